use crate::error::Error;
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub(crate) enum Cache<T> {
    Empty,
    Conv {
        input: Tensor<T>,
        stride: usize,
        pad_left: usize,
    },
    BatchNorm {
        normalized: Tensor<T>,
        inv_std: Vec<T>,
    },
    Relu {
        active: Vec<bool>,
    },
    MaxPool {
        argmax: Vec<usize>,
        input_shape: Vec<usize>,
    },
    MeanPool {
        input_shape: Vec<usize>,
    },
    Dense {
        input: Tensor<T>,
    },
}

/// Per-layer forward cache consumed by the matching backward call.
#[derive(Clone, Debug)]
pub struct LayerContext<T> {
    training: bool,
    pub(crate) cache: Cache<T>,
}

impl<T> LayerContext<T> {
    pub fn training() -> Self {
        LayerContext {
            training: true,
            cache: Cache::Empty,
        }
    }

    pub fn inference() -> Self {
        LayerContext {
            training: false,
            cache: Cache::Empty,
        }
    }

    pub fn new(training: bool) -> Self {
        if training {
            Self::training()
        } else {
            Self::inference()
        }
    }

    pub fn is_training(&self) -> bool {
        self.training
    }

    pub fn is_populated(&self) -> bool {
        !matches!(self.cache, Cache::Empty)
    }

    pub(crate) fn store(&mut self, cache: Cache<T>) {
        if self.training {
            self.cache = cache;
        }
    }

    pub(crate) fn missing(&self, op: &str) -> Error {
        if self.training {
            Error::Usage(format!("{op}: context was not populated by a matching forward call"))
        } else {
            Error::Usage(format!("{op}: context is in inference mode and holds no cache"))
        }
    }
}


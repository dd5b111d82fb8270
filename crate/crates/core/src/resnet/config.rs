use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Topology of the residual network.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub num_block_layers: usize,
    pub blocks_per_layer: usize,
    pub base_filters: usize,
    pub bottleneck_expansion: usize,
    pub initial_filters: usize,
    pub initial_kernel: usize,
    pub num_classes: usize,
    pub input_channels: usize,
    pub epoch_samples: usize,
    /// Extra max pool directly after the initial conv, ahead of the per-layer pools.
    pub stem_pool: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            num_block_layers: 4,
            blocks_per_layer: 4,
            base_filters: 16,
            bottleneck_expansion: 4,
            initial_filters: 64,
            initial_kernel: 16,
            num_classes: 5,
            input_channels: 5,
            epoch_samples: 6000,
            stem_pool: false,
        }
    }
}

impl ModelConfig {
    /// Small network used for gradient checks: two block layers of one block each.
    pub fn miniature() -> Self {
        ModelConfig {
            num_block_layers: 2,
            blocks_per_layer: 1,
            base_filters: 2,
            initial_filters: 8,
            num_classes: 3,
            input_channels: 2,
            epoch_samples: 32,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("num_block_layers", self.num_block_layers),
            ("blocks_per_layer", self.blocks_per_layer),
            ("base_filters", self.base_filters),
            ("bottleneck_expansion", self.bottleneck_expansion),
            ("initial_filters", self.initial_filters),
            ("initial_kernel", self.initial_kernel),
            ("num_classes", self.num_classes),
            ("input_channels", self.input_channels),
            ("epoch_samples", self.epoch_samples),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("model.{name} must be positive")));
        }
        let pools = self.pool_count();
        if pools >= usize::BITS as usize || !self.epoch_samples.is_multiple_of(1usize << pools) {
            return Err(Error::Config(format!(
                "epoch_samples {} is not divisible by 2^{pools}",
                self.epoch_samples
            )));
        }
        Ok(())
    }

    pub fn pool_count(&self) -> usize {
        self.num_block_layers + usize::from(self.stem_pool)
    }

    /// Internal (bottleneck) width of block layer `l` (1-based).
    pub fn inner_width(&self, layer: usize) -> usize {
        layer * self.base_filters
    }

    /// Output width of every block in block layer `l` (1-based).
    pub fn output_width(&self, layer: usize) -> usize {
        self.bottleneck_expansion * layer * self.base_filters
    }

    /// Output widths after each block layer.
    pub fn channel_progression(&self) -> Vec<usize> {
        (1..=self.num_block_layers).map(|l| self.output_width(l)).collect()
    }

    /// Time length at the input, after each pool, then after mean pooling (1).
    pub fn time_progression(&self) -> Vec<usize> {
        let mut out = vec![self.epoch_samples];
        let mut t = self.epoch_samples;
        for _ in 0..self.pool_count() {
            t /= 2;
            out.push(t);
        }
        out.push(1);
        out
    }

    pub fn feature_width(&self) -> usize {
        self.output_width(self.num_block_layers)
    }

    /// Convolutions on the main path plus the dense head; projections are not counted.
    pub fn weighted_layer_count(&self) -> usize {
        1 + 3 * self.num_block_layers * self.blocks_per_layer + 1
    }
}

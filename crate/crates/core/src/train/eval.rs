use crate::data::EpochDataset;
use crate::error::Result;
use crate::metrics::{ConfusionMatrix, EvaluationReport, MetricsReport};
use crate::resnet::{argmax, ModelParams};
use crate::tensor::Real;

/// Inference-mode predictions for every epoch of one recording.
#[derive(Clone, Debug, PartialEq)]
pub struct RecordingPredictions {
    pub id: String,
    pub probs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub report: EvaluationReport,
    pub predictions: Vec<RecordingPredictions>,
    pub confusion: ConfusionMatrix,
}

fn predict_recording<T: Real>(params: &ModelParams<T>, data: &EpochDataset, r: usize) -> Result<RecordingPredictions> {
    let rec = &data.recordings[r];
    let probs = if rec.is_empty() {
        Vec::new()
    } else {
        params.hypnodensity(&rec.epochs.cast::<T>())?
    };
    Ok(RecordingPredictions {
        id: rec.id.clone(),
        labels: probs.iter().map(|p| argmax(p)).collect(),
        probs,
    })
}

/// Predicts every recording, sharding across `threads` workers.
pub fn predict_dataset<T: Real>(params: &ModelParams<T>, data: &EpochDataset, threads: usize) -> Result<Vec<RecordingPredictions>> {
    let n = data.recordings.len();
    let threads = threads.clamp(1, n.max(1));
    if threads == 1 {
        return (0..n).map(|r| predict_recording(params, data, r)).collect();
    }
    let mut slots: Vec<Option<Result<RecordingPredictions>>> = (0..n).map(|_| None).collect();
    std::thread::scope(|s| {
        for (w, chunk) in slots.chunks_mut(n.div_ceil(threads)).enumerate() {
            let start = w * n.div_ceil(threads);
            s.spawn(move || {
                for (i, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(predict_recording(params, data, start + i));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("every slot filled")).collect()
}

/// Scores predictions against the scored epochs; recordings without any are skipped.
pub fn score_predictions(data: &EpochDataset, predictions: &[RecordingPredictions], classes: usize) -> Result<(EvaluationReport, ConfusionMatrix)> {
    let mut aggregate = ConfusionMatrix::new(classes);
    let mut reports = Vec::new();
    for (rec, pred) in data.recordings.iter().zip(predictions) {
        let mut cm = ConfusionMatrix::new(classes);
        for (label, &p) in rec.labels.iter().zip(&pred.labels) {
            if let Some(stage) = label {
                cm.add(stage.index(), p)?;
            }
        }
        if cm.total() > 0 {
            reports.push(MetricsReport::from_confusion(&rec.id, &cm)?);
            aggregate.merge(&cm)?;
        }
    }
    let agg = MetricsReport::from_confusion("aggregate", &aggregate)?;
    Ok((EvaluationReport::new(agg, reports), aggregate))
}

/// Per-recording reports, their summary and the pooled confusion matrix.
///
/// `params` is only read; batch-norm running statistics stay as they are.
pub fn evaluate<T: Real>(params: &ModelParams<T>, data: &EpochDataset, threads: usize) -> Result<Evaluation> {
    let predictions = predict_dataset(params, data, threads)?;
    let (report, confusion) = score_predictions(data, &predictions, params.config.num_classes)?;
    Ok(Evaluation {
        report,
        predictions,
        confusion,
    })
}

//! Confusion matrices, per-stage and frequency-weighted scores, Cohen's kappa
//! and cohort summaries.

mod export;

use serde::{Deserialize, Serialize};

use crate::data::Stage;
use crate::error::{Error, Result};

pub use export::{confusion_csv, recordings_csv, report_json, EvaluationReport};

/// `K x K` counts, rows are true classes and columns predictions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let k = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != k) {
            return Err(Error::dim("ConfusionMatrix::from_rows", format!("{k} columns"), r.len()));
        }
        Ok(ConfusionMatrix {
            classes: k,
            counts: rows.concat(),
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn add(&mut self, truth: usize, pred: usize) -> Result<()> {
        let k = self.classes;
        if truth >= k || pred >= k {
            return Err(Error::dim("ConfusionMatrix::add", format!("labels < {k}"), format!("({truth}, {pred})")));
        }
        self.counts[truth * k + pred] += 1;
        Ok(())
    }

    /// Adds one count per `(truth, pred)` pair.
    pub fn accumulate(&mut self, truth: &[usize], pred: &[usize]) -> Result<()> {
        if truth.len() != pred.len() {
            return Err(Error::dim("accumulate", format!("{} predictions", truth.len()), pred.len()));
        }
        for (&t, &p) in truth.iter().zip(pred) {
            self.add(t, p)?;
        }
        Ok(())
    }

    /// Elementwise sum, for merging shards.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::dim("ConfusionMatrix::merge", self.classes, other.classes));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|k| self.get(k, k)).sum()
    }

    pub fn row_sum(&self, k: usize) -> u64 {
        (0..self.classes).map(|j| self.get(k, j)).sum()
    }

    pub fn col_sum(&self, k: usize) -> u64 {
        (0..self.classes).map(|i| self.get(i, k)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.classes.max(1)).map(<[u64]>::to_vec).collect()
    }

    fn require_nonempty(&self, op: &str) -> Result<()> {
        if self.total() == 0 {
            return Err(Error::Usage(format!("{op}: confusion matrix is empty")));
        }
        Ok(())
    }
}

/// Display name of class `k`: stage names for five classes, else `c<k>`.
pub fn class_name(classes: usize, k: usize) -> String {
    match Stage::from_index(k) {
        Some(s) if classes == Stage::COUNT => s.name().to_string(),
        _ => format!("c{k}"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// True-class count (row sum).
    pub support: u64,
    /// Set when some denominator was zero and the 0/0 → 0 convention applied.
    pub undefined: bool,
}

fn ratio(num: u64, den: u64, undefined: &mut bool) -> f64 {
    if den == 0 {
        *undefined = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn stage_metrics(cm: &ConfusionMatrix) -> Vec<StageScores> {
    (0..cm.classes())
        .map(|k| {
            let tp = cm.get(k, k);
            let support = cm.row_sum(k);
            let mut undefined = false;
            let precision = ratio(tp, cm.col_sum(k), &mut undefined);
            let recall = ratio(tp, support, &mut undefined);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                undefined = true;
                0.0
            };
            StageScores {
                precision,
                recall,
                f1,
                support,
                undefined,
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedSummary {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

/// Per-stage scores averaged with true-class frequencies as weights.
pub fn weighted_summary(cm: &ConfusionMatrix) -> Result<WeightedSummary> {
    cm.require_nonempty("weighted_summary")?;
    let total = cm.total() as f64;
    let mut out = WeightedSummary {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
        accuracy: cm.trace() as f64 / total,
    };
    for s in stage_metrics(cm) {
        let beta = s.support as f64 / total;
        out.precision += beta * s.precision;
        out.recall += beta * s.recall;
        out.f1 += beta * s.f1;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    pub value: f64,
    /// Chance agreement was 1, so the ratio is undefined.
    pub degenerate: bool,
}

pub fn cohen_kappa(cm: &ConfusionMatrix) -> Result<Kappa> {
    cm.require_nonempty("cohen_kappa")?;
    let n = cm.total() as f64;
    let po = cm.trace() as f64 / n;
    let pe: f64 = (0..cm.classes())
        .map(|k| cm.row_sum(k) as f64 * cm.col_sum(k) as f64)
        .sum::<f64>()
        / (n * n);
    if 1.0 - pe <= 0.0 {
        return Ok(Kappa {
            value: if po >= 1.0 { 1.0 } else { 0.0 },
            degenerate: true,
        });
    }
    Ok(Kappa {
        value: (po - pe) / (1.0 - pe),
        degenerate: false,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub id: String,
    pub epochs: u64,
    pub stages: Vec<StageScores>,
    /// True-class frequencies used as weights.
    pub frequencies: Vec<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub kappa: f64,
    pub kappa_degenerate: bool,
    pub confusion: ConfusionMatrix,
}

impl MetricsReport {
    pub fn from_confusion(id: impl Into<String>, cm: &ConfusionMatrix) -> Result<Self> {
        let w = weighted_summary(cm)?;
        let kappa = cohen_kappa(cm)?;
        let total = cm.total() as f64;
        Ok(MetricsReport {
            id: id.into(),
            epochs: cm.total(),
            stages: stage_metrics(cm),
            frequencies: (0..cm.classes()).map(|k| cm.row_sum(k) as f64 / total).collect(),
            precision: w.precision,
            recall: w.recall,
            f1: w.f1,
            accuracy: w.accuracy,
            kappa: kappa.value,
            kappa_degenerate: kappa.degenerate,
            confusion: cm.clone(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    /// Arithmetic mean and sample standard deviation; one value gives sd 0.
    pub fn of(values: &[f64]) -> MeanSd {
        let n = values.len();
        if n == 0 {
            return MeanSd { mean: 0.0, sd: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        MeanSd { mean, sd }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub recordings: usize,
    pub accuracy: MeanSd,
    pub kappa: MeanSd,
    pub precision: MeanSd,
    pub recall: MeanSd,
    pub f1: MeanSd,
}

pub fn cohort_summary(reports: &[MetricsReport]) -> CohortSummary {
    let of = |f: fn(&MetricsReport) -> f64| MeanSd::of(&reports.iter().map(f).collect::<Vec<_>>());
    CohortSummary {
        recordings: reports.len(),
        accuracy: of(|r| r.accuracy),
        kappa: of(|r| r.kappa),
        precision: of(|r| r.precision),
        recall: of(|r| r.recall),
        f1: of(|r| r.f1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulate_contract() {
        let mut cm = ConfusionMatrix::new(3);
        cm.accumulate(&[], &[]).unwrap();
        assert_eq!(cm.total(), 0);
        cm.accumulate(&[0, 1, 2], &[0, 1, 2]).unwrap();
        assert_eq!(cm.trace(), 3);
        assert!(cm.accumulate(&[0], &[]).is_err());
        assert!(cm.accumulate(&[3], &[0]).is_err());
    }

    #[test]
    fn kappa_fixed_points() {
        let id = ConfusionMatrix::from_rows(&[vec![5, 0], vec![0, 5]]).unwrap();
        assert_eq!(cohen_kappa(&id).unwrap().value, 1.0);
        let indep = ConfusionMatrix::from_rows(&[vec![25, 25], vec![25, 25]]).unwrap();
        assert_eq!(cohen_kappa(&indep).unwrap().value, 0.0);
        let single = ConfusionMatrix::from_rows(&[vec![4, 0], vec![0, 0]]).unwrap();
        assert_eq!(cohen_kappa(&single).unwrap(), Kappa { value: 1.0, degenerate: true });
        assert!(cohen_kappa(&ConfusionMatrix::new(2)).is_err());
    }

    #[test]
    fn absent_class_is_flagged_zero() {
        let cm = ConfusionMatrix::from_rows(&[vec![3, 0], vec![0, 0]]).unwrap();
        let s = stage_metrics(&cm);
        assert_eq!((s[1].precision, s[1].recall, s[1].f1), (0.0, 0.0, 0.0));
        assert!(s[1].undefined && !s[0].undefined);
        let w = weighted_summary(&cm).unwrap();
        assert_eq!((w.precision, w.recall, w.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn two_point_sd() {
        let m = MeanSd::of(&[0.8, 0.9]);
        assert!((m.mean - 0.85).abs() < 1e-12);
        assert!((m.sd - 0.070_710_678_118_654_76).abs() < 1e-12);
        assert_eq!(MeanSd::of(&[0.7]).sd, 0.0);
    }
}

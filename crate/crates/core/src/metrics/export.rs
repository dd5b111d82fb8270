use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{class_name, cohort_summary, stage_metrics, CohortSummary, ConfusionMatrix, MetricsReport};
use crate::error::Result;

/// Aggregate matrix, per-recording reports and their mean ± SD.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub aggregate: MetricsReport,
    pub recordings: Vec<MetricsReport>,
    pub summary: CohortSummary,
}

impl EvaluationReport {
    pub fn new(aggregate: MetricsReport, recordings: Vec<MetricsReport>) -> Self {
        let summary = cohort_summary(&recordings);
        EvaluationReport {
            aggregate,
            recordings,
            summary,
        }
    }
}

pub fn report_json(report: &EvaluationReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

/// Counts with stage scores (percent, one decimal) appended to each row.
pub fn confusion_csv(cm: &ConfusionMatrix) -> String {
    let k = cm.classes();
    let mut out = String::from("true\\pred");
    for j in 0..k {
        write!(out, ",{}", class_name(k, j)).unwrap();
    }
    out.push_str(",Pr (%),Re (%),F1 (%)\n");
    for (i, s) in stage_metrics(cm).iter().enumerate() {
        out.push_str(&class_name(k, i));
        for j in 0..k {
            write!(out, ",{}", cm.get(i, j)).unwrap();
        }
        writeln!(out, ",{:.1},{:.1},{:.1}", 100.0 * s.precision, 100.0 * s.recall, 100.0 * s.f1).unwrap();
    }
    out
}

/// One row per recording.
pub fn recordings_csv(reports: &[MetricsReport]) -> String {
    let mut out = String::from("id,epochs,accuracy,kappa,precision,recall,f1\n");
    for r in reports {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.id, r.epochs, r.accuracy, r.kappa, r.precision, r.recall, r.f1
        )
        .unwrap();
    }
    out
}

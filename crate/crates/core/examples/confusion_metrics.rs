use psg_stager::metrics::{cohen_kappa, cohort_summary, confusion_csv, stage_metrics, weighted_summary, ConfusionMatrix, MetricsReport};

fn main() -> psg_stager::Result<()> {
    // rows are the scorer's stages, columns the network's
    let cm = ConfusionMatrix::from_rows(&[
        vec![412, 31, 9, 0, 6],
        vec![40, 95, 38, 0, 27],
        vec![12, 44, 960, 35, 9],
        vec![0, 0, 51, 180, 0],
        vec![10, 22, 8, 0, 301],
    ])?;
    print!("{}", confusion_csv(&cm));

    for (k, s) in stage_metrics(&cm).iter().enumerate() {
        println!("class {k}: support {:>4}  f1 {:.3}", s.support, s.f1);
    }
    let w = weighted_summary(&cm)?;
    let kappa = cohen_kappa(&cm)?;
    println!("accuracy {:.4}  weighted f1 {:.4}  kappa {:.4}", w.accuracy, w.f1, kappa.value);

    let a = MetricsReport::from_confusion("night-a", &ConfusionMatrix::from_rows(&[vec![40, 2], vec![5, 30]])?)?;
    let b = MetricsReport::from_confusion("night-b", &ConfusionMatrix::from_rows(&[vec![35, 9], vec![2, 41]])?)?;
    let summary = cohort_summary(&[a, b]);
    println!("per-recording accuracy {:.3} ± {:.3}", summary.accuracy.mean, summary.accuracy.sd);
    Ok(())
}

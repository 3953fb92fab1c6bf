//! The ROC curve behind the abstention threshold: which calibration samples
//! should be declined, how well the top-1 score separates them, and where
//! Youden's J puts the cutoff.
//!
//!     cargo run --example roc_abstention

use dual_threshold::{
    abstention_threshold, generate_dataset, roc_points, AbstainTarget, GeneratorConfig,
};

fn main() -> dual_threshold::Result<()> {
    let cal = generate_dataset(&GeneratorConfig {
        n_samples: 1_000,
        seed: 3,
        ..Default::default()
    })?;
    let scores: Vec<f64> = cal.iter().map(|s| s.true_label_score().value()).collect();
    let flags: Vec<bool> = cal
        .iter()
        .map(|s| AbstainTarget::Misclassified.should_abstain(&s.probs, s.label, f64::INFINITY))
        .collect();

    let roc = roc_points(&scores, &flags)?;
    let (tau, j) = abstention_threshold(&roc);
    println!(
        "{} positives (misclassified), {} negatives, AUC {:.4}",
        roc.positives, roc.negatives, roc.auc
    );
    println!("Youden-optimal tau {tau:.4} with J {j:.4}\n");

    // A coarse view of the curve: roughly ten evenly spaced points.
    let step = (roc.points.len() / 10).max(1);
    println!("{:>10} {:>8} {:>8}", "tau", "fpr", "tpr");
    for p in roc.points.iter().step_by(step).chain(roc.points.last()) {
        println!("{:>10.4} {:>8.4} {:>8.4}", p.threshold, p.fpr, p.tpr);
    }
    Ok(())
}

//! Per-prediction uncertainty metrics on a few hand-picked distributions.
//!
//!     cargo run --example uncertainty_metrics

use dual_threshold::metrics::{confidence, margin, normalized_entropy};
use dual_threshold::{softmax, LogitVector, NonconformityScore, ProbabilityVector};

fn main() -> dual_threshold::Result<()> {
    let cases = [
        ("one-hot", ProbabilityVector::new(vec![1.0, 0.0, 0.0, 0.0])?),
        (
            "confident",
            ProbabilityVector::new(vec![0.85, 0.05, 0.05, 0.05])?,
        ),
        (
            "two-way",
            ProbabilityVector::new(vec![0.45, 0.45, 0.05, 0.05])?,
        ),
        ("uniform", ProbabilityVector::new(vec![0.25; 4])?),
        (
            "softmax",
            softmax(&LogitVector::new(vec![2.0, 1.0, 0.1, -1.0])?),
        ),
    ];
    println!(
        "{:<10} {:>8} {:>10} {:>8} {:>10}",
        "case", "entropy", "confidence", "margin", "top1 score"
    );
    for (name, p) in &cases {
        println!(
            "{name:<10} {:>8.4} {:>10.4} {:>8.4} {:>10.4}",
            normalized_entropy(p),
            confidence(p),
            margin(p),
            NonconformityScore::from_probability(p.max()).value()
        );
    }
    Ok(())
}

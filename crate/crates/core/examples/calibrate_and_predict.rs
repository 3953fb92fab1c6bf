//! Calibrate both thresholds on a held-out split and apply them to new samples.
//!
//!     cargo run --example calibrate_and_predict -- [alpha]

use dual_threshold::{
    calibrate, evaluate_sample, exchangeable_split, generate_dataset, GeneratorConfig,
};

fn main() -> dual_threshold::Result<()> {
    let alpha: f64 = std::env::args()
        .nth(1)
        .map(|a| a.parse().expect("alpha must be a number"))
        .unwrap_or(0.1);

    let data = generate_dataset(&GeneratorConfig {
        n_samples: 3_000,
        seed: 42,
        ..Default::default()
    })?;
    let (cal, test) = exchangeable_split(&data, 1_000, 42)?;
    let t = calibrate(&cal, alpha)?;
    println!(
        "alpha={alpha}  q_conf={:.4}  q_abs={:.4}  youden_j={:.3}  (n={})",
        t.q_conf, t.q_abs, t.youden_j, t.n_calibration
    );

    println!(
        "\n{:<14} {:>5} {:>5} {:<16} {:>8} {:>7}",
        "sample", "label", "top1", "set", "abstain", "conf"
    );
    for sample in test.iter().take(12) {
        let r = evaluate_sample(sample, &t)?;
        println!(
            "{:<14} {:>5} {:>5} {:<16} {:>8} {:>7.3}",
            r.sample_id,
            sample.label,
            r.top1,
            format!("{:?}", r.prediction_set.members()),
            if r.abstained { "yes" } else { "no" },
            r.confidence
        );
    }
    Ok(())
}

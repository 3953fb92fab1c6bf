//! Empirical check of the marginal coverage guarantee. The expected coverage
//! over exchangeable splits lies in [1 - alpha, 1 - alpha + 1/(n+1)]; a single
//! split is noisy (sd around 0.02 here), so the average needs many trials to
//! settle inside that narrow range.
//!
//!     cargo run --release --example coverage_guarantee -- [trials]

use dual_threshold::metrics::{average_set_size, empirical_coverage};
use dual_threshold::{
    calibrate, evaluate_batch, exchangeable_split, generate_dataset, GeneratorConfig,
};

const N_CAL: usize = 500;

fn main() -> dual_threshold::Result<()> {
    let trials: u64 = std::env::args()
        .nth(1)
        .map(|a| a.parse().expect("trials must be an integer"))
        .unwrap_or(200);

    println!(
        "{:>6} {:>10} {:>22} {:>9}",
        "alpha", "coverage", "expected", "set size"
    );
    for alpha in [0.05, 0.1, 0.2, 0.3] {
        let (mut cov, mut size) = (0.0, 0.0);
        for trial in 0..trials {
            let data = generate_dataset(&GeneratorConfig {
                n_samples: 2 * N_CAL,
                seed: trial,
                ..Default::default()
            })?;
            let (cal, test) = exchangeable_split(&data, N_CAL, trial)?;
            let records = evaluate_batch(&test, &calibrate(&cal, alpha)?)?;
            cov += empirical_coverage(&records)?;
            size += average_set_size(&records)?;
        }
        let n = trials as f64;
        println!(
            "{alpha:>6} {:>10.4} {:>22} {:>9.3}",
            cov / n,
            format!(
                "[{:.4}, {:.4}]",
                1.0 - alpha,
                1.0 - alpha + 1.0 / (N_CAL as f64 + 1.0)
            ),
            size / n
        );
    }
    Ok(())
}

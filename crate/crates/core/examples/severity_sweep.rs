//! Calibrate on clean data, then watch coverage, entropy and abstention move
//! as synthetic corruption gets heavier. Writes the full sweep output
//! (summaries, heatmap, ROC and per-sample records) to a directory.
//!
//!     cargo run --release --example severity_sweep -- [config.toml] [out_dir]
//!
//! Without a config the built-in defaults are used; see
//! `examples/configs/sweep.toml` for every key.

use std::path::PathBuf;

use dual_threshold::commands::{run_sweep, SweepConfig};

fn main() -> dual_threshold::Result<()> {
    let mut args = std::env::args().skip(1);
    let cfg = match args.next() {
        Some(path) => SweepConfig::read(path)?,
        None => SweepConfig::default(),
    };
    let out_dir = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("dual-threshold-sweep"));

    let summaries = run_sweep(&cfg, &out_dir, 4, &mut std::io::sink())?;

    println!(
        "abstention rate by severity (calibrated at alpha={})",
        cfg.alpha
    );
    let mut last = "";
    for s in &summaries {
        if s.condition != last {
            print!("\n{:<12}", s.condition);
            last = &s.condition;
        }
        print!(" s{}={:.3}", s.severity, s.abstention_rate);
    }
    println!("\n\noutputs in {}", out_dir.display());
    Ok(())
}

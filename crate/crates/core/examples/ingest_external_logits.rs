//! Evaluate logits exported from any model. The CSV needs a header
//! `sample_id,label,logit_0..logit_{K-1}` (or `prob_0..` for probabilities).
//!
//!     cargo run --example ingest_external_logits -- cal.csv test.csv [alpha]
//!
//! With no arguments a small demo pair of files is written to a temporary
//! directory first.

use std::error::Error;
use std::path::PathBuf;

use dual_threshold::io::{
    read_logits_csv, read_thresholds, write_logits_csv, write_records_csv, write_summary,
    write_thresholds, SummaryFormat,
};
use dual_threshold::{calibrate, evaluate_batch, generate_dataset, summarize, GeneratorConfig};

fn demo_files() -> Result<(PathBuf, PathBuf), Box<dyn Error>> {
    let dir = std::env::temp_dir().join("dual-threshold-ingest");
    std::fs::create_dir_all(&dir)?;
    let cal = dir.join("cal.csv");
    let test = dir.join("test.csv");
    let base = GeneratorConfig {
        k_classes: 5,
        n_samples: 800,
        ..Default::default()
    };
    write_logits_csv(
        &generate_dataset(&GeneratorConfig {
            seed: 1,
            ..base.clone()
        })?,
        &cal,
    )?;
    write_logits_csv(
        &generate_dataset(&GeneratorConfig {
            seed: 2,
            severity: 2,
            ..base
        })?,
        &test,
    )?;
    Ok((cal, test))
}

fn main() -> Result<(), Box<dyn Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (cal_path, test_path) = match args.as_slice() {
        [cal, test, ..] => (PathBuf::from(cal), PathBuf::from(test)),
        _ => demo_files()?,
    };
    let alpha = args
        .get(2)
        .map_or(0.1, |a| a.parse().expect("alpha must be a number"));

    let cal = read_logits_csv(&cal_path, "clean", 0)?;
    let test = read_logits_csv(&test_path, "external", 1)?;
    let t = calibrate(&cal, alpha)?;

    // Thresholds are a portable artifact: write, read back, apply.
    let out = test_path.with_extension("out");
    std::fs::create_dir_all(&out)?;
    write_thresholds(&t, out.join("thresholds.json"))?;
    let t = read_thresholds(out.join("thresholds.json"))?;

    let records = evaluate_batch(&test, &t)?;
    let summary = summarize(&records)?;
    write_records_csv(&records, out.join("records.csv"))?;
    write_summary(&summary, out.join("summary.json"), SummaryFormat::Json)?;

    let s = &summary[0];
    println!(
        "{} test samples: coverage {:.4}, set size {:.3}, abstention {:.4}, AUC {}",
        s.n,
        s.coverage,
        s.avg_set_size,
        s.abstention_rate,
        s.auc.map_or("n/a".into(), |a| format!("{a:.4}"))
    );
    println!("artifacts in {}", out.display());
    Ok(())
}

//! Workflow commands behind the `dual-threshold` binary: generate synthetic
//! data, calibrate, evaluate, and sweep a condition x severity grid.
//!
//! Each command writes human-readable progress to `out`, warnings to `err`,
//! and returns an [`Error`] on failure; [`exit_code`] maps that to the
//! process exit status.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate_with, AbstainTarget, CalibratedThresholds};
use crate::datagen::{derive_seed, exchangeable_split, generate_dataset, GeneratorConfig};
use crate::error::{Error, Result};
use crate::io::{
    read_logits_csv, read_thresholds, write_heatmap_csv, write_logits_csv, write_records_csv,
    write_roc_csv, write_summary, write_thresholds, write_thresholds_table, DatasetManifest,
    ManifestEntry, SummaryFormat,
};
use crate::metrics::{detection_auc, summarize, EvaluationSummary};
use crate::prediction::{evaluate_batch, EvaluationRecord};
use crate::types::{check_severity, LabeledSample};

/// Process exit status for a command error: 3 for degenerate statistics,
/// 2 for everything else (usage, input and artifact errors).
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::DegenerateLabels(_) => 3,
        _ => 2,
    }
}

/// Generator fields a sweep config may override. Severity, seed and
/// condition are set per group by the sweep itself.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorOverrides {
    pub k_classes: Option<usize>,
    pub n_samples: Option<usize>,
    pub base_accuracy: Option<f64>,
    pub temperature_per_level: Option<f64>,
    pub noise_sigma_per_level: Option<f64>,
    pub logit_scale: Option<f64>,
}

impl GeneratorOverrides {
    fn apply(&self, cfg: &mut GeneratorConfig) {
        if let Some(v) = self.k_classes {
            cfg.k_classes = v;
        }
        if let Some(v) = self.n_samples {
            cfg.n_samples = v;
        }
        if let Some(v) = self.base_accuracy {
            cfg.base_accuracy = v;
        }
        if let Some(v) = self.temperature_per_level {
            cfg.temperature_per_level = v;
        }
        if let Some(v) = self.noise_sigma_per_level {
            cfg.noise_sigma_per_level = v;
        }
        if let Some(v) = self.logit_scale {
            cfg.logit_scale = v;
        }
    }
}

/// TOML configuration shared by `gen` and `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Miscoverage level; 0.1 targets 90% coverage.
    pub alpha: f64,
    pub conditions: Vec<String>,
    pub severities: Vec<u8>,
    pub seed: u64,
    /// Size of the clean calibration split per condition.
    pub n_calibration: usize,
    pub abstain_target: AbstainTarget,
    /// Load logits through this manifest instead of generating them.
    /// Relative paths resolve against the config file's directory.
    pub manifest: Option<PathBuf>,
    pub generator: GeneratorOverrides,
    pub condition_overrides: BTreeMap<String, GeneratorOverrides>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            conditions: ["rain", "fog", "snow", "motion_blur"]
                .map(String::from)
                .to_vec(),
            severities: vec![1, 2, 3, 4, 5],
            seed: 2024,
            n_calibration: 1_000,
            abstain_target: AbstainTarget::default(),
            manifest: None,
            generator: GeneratorOverrides::default(),
            condition_overrides: BTreeMap::new(),
        }
    }
}

impl SweepConfig {
    /// Reads a TOML config; relative `manifest` paths are resolved here.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = toml::from_str(&text)
            .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        if let Some(m) = cfg.manifest.as_mut() {
            if m.is_relative() {
                *m = path.parent().unwrap_or(Path::new(".")).join(&*m);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        crate::calibration::check_alpha(self.alpha)?;
        if self.conditions.is_empty() {
            return Err(Error::invalid("conditions must not be empty"));
        }
        if self.severities.is_empty() {
            return Err(Error::invalid("severities must not be empty"));
        }
        let mut seen = HashSet::new();
        for c in &self.conditions {
            let ok = !c.is_empty()
                && c.chars()
                    .all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-');
            if !ok {
                return Err(Error::invalid(format!(
                    "condition {c:?} must be non-empty ASCII letters, digits, '_' or '-'"
                )));
            }
            if !seen.insert(c) {
                return Err(Error::invalid(format!("condition {c:?} listed twice")));
            }
        }
        for &s in &self.severities {
            check_severity(s)?;
        }
        if self.n_calibration == 0 {
            return Err(Error::invalid("n_calibration must be positive"));
        }
        if let Some(c) = self
            .condition_overrides
            .keys()
            .find(|c| !self.conditions.contains(c))
        {
            return Err(Error::invalid(format!(
                "condition_overrides names unknown condition {c:?}"
            )));
        }
        if self.manifest.is_none() {
            for c in &self.conditions {
                self.generator_config(c, 0).validate()?;
            }
        }
        Ok(())
    }

    /// Severity list with the clean level first, deduplicated and sorted.
    fn severities_with_clean(&self) -> Vec<u8> {
        let mut s: Vec<u8> = self.severities.clone();
        s.push(0);
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Generator settings for one (condition, severity) cell. All severities
    /// of a condition share a seed, so they describe the same samples.
    pub fn generator_config(&self, condition: &str, severity: u8) -> GeneratorConfig {
        let mut cfg = GeneratorConfig {
            severity,
            seed: derive_seed(self.seed, condition),
            condition: condition.to_string(),
            ..GeneratorConfig::default()
        };
        self.generator.apply(&mut cfg);
        if let Some(o) = self.condition_overrides.get(condition) {
            o.apply(&mut cfg);
        }
        cfg
    }

    /// Seed of the calibration/test split for `condition`.
    pub fn split_seed(&self, condition: &str) -> u64 {
        derive_seed(self.seed, &format!("{condition}/split"))
    }
}

/// Where sweep data comes from.
enum DataSource {
    Generate,
    Manifest {
        manifest: DatasetManifest,
        base: PathBuf,
    },
}

impl DataSource {
    fn new(cfg: &SweepConfig) -> Result<Self> {
        match &cfg.manifest {
            None => Ok(DataSource::Generate),
            Some(path) => Ok(DataSource::Manifest {
                manifest: DatasetManifest::read(path)?,
                base: path.parent().unwrap_or(Path::new(".")).to_path_buf(),
            }),
        }
    }

    fn load(&self, cfg: &SweepConfig, condition: &str, severity: u8) -> Result<Vec<LabeledSample>> {
        match self {
            DataSource::Generate => generate_dataset(&cfg.generator_config(condition, severity)),
            DataSource::Manifest { manifest, base } => {
                let entry = manifest.entry(condition, severity).ok_or_else(|| {
                    Error::invalid(format!(
                        "manifest has no file for {condition} severity {severity}"
                    ))
                })?;
                manifest.load(base, entry)
            }
        }
    }
}

fn data_file_name(condition: &str, severity: u8) -> String {
    format!("{condition}_s{severity}.csv")
}

/// Writes one logits CSV per (condition, severity), always including the
/// clean level 0, plus `manifest.toml`.
pub fn cmd_gen(config: &Path, out_dir: &Path, out: &mut dyn Write) -> Result<()> {
    let cfg = SweepConfig::read(config)?;
    if cfg.manifest.is_some() {
        return Err(Error::invalid(
            "gen generates data; remove `manifest` from the config",
        ));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let k = cfg.generator_config(&cfg.conditions[0], 0).k_classes;
    if cfg
        .conditions
        .iter()
        .any(|c| cfg.generator_config(c, 0).k_classes != k)
    {
        return Err(Error::invalid("all conditions must share k_classes"));
    }
    let mut manifest = DatasetManifest::new(k);
    for condition in &cfg.conditions {
        for severity in cfg.severities_with_clean() {
            let samples = generate_dataset(&cfg.generator_config(condition, severity))?;
            let name = data_file_name(condition, severity);
            write_logits_csv(&samples, out_dir.join(&name))?;
            let _ = writeln!(out, "{name}: {} samples", samples.len());
            manifest.files.push(ManifestEntry {
                path: name.into(),
                condition: condition.clone(),
                severity,
            });
        }
    }
    manifest.write(out_dir.join("manifest.toml"))?;
    let _ = writeln!(out, "manifest.toml: {} files", manifest.files.len());
    Ok(())
}

pub fn cmd_calibrate(
    cal: &Path,
    alpha: f64,
    target: AbstainTarget,
    out_path: &Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<CalibratedThresholds> {
    let samples = read_logits_csv(cal, "clean", 0)?;
    let t = calibrate_with(&samples, alpha, target)?;
    if t.is_trivial_conf() {
        let _ = writeln!(
            err,
            "warning: q_conf=inf: alpha={alpha} < 1/(n+1) for n={}; prediction sets will \
             contain every label",
            t.n_calibration
        );
    }
    write_thresholds(&t, out_path)?;
    let _ = writeln!(out, "q_conf={}", fmt_threshold(t.q_conf));
    let _ = writeln!(out, "q_abs={}", fmt_threshold(t.q_abs));
    let _ = writeln!(out, "youden_j={:.6}", t.youden_j);
    let _ = writeln!(out, "n={}", t.n_calibration);
    Ok(t)
}

fn fmt_threshold(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.6}")
    }
}

/// Options for [`cmd_evaluate`] beyond the input paths.
#[derive(Debug, Clone)]
pub struct EvaluateOptions<'a> {
    pub records_out: Option<&'a Path>,
    pub summary_out: Option<&'a Path>,
    pub condition: &'a str,
    pub severity: u8,
}

pub fn cmd_evaluate(
    test: &Path,
    thresholds: &Path,
    opts: &EvaluateOptions<'_>,
    out: &mut dyn Write,
) -> Result<Vec<EvaluationSummary>> {
    let t = read_thresholds(thresholds)?;
    let samples = read_logits_csv(test, opts.condition, opts.severity)?;
    if samples.is_empty() {
        return Err(Error::invalid(format!("{} has no samples", test.display())));
    }
    let records = evaluate_batch(&samples, &t)?;
    let summaries = summarize(&records)?;
    if let Some(p) = opts.records_out {
        write_records_csv(&records, p)?;
    }
    if let Some(p) = opts.summary_out {
        write_summary(&summaries, p, SummaryFormat::from_path(p))?;
    }
    for s in &summaries {
        let _ = writeln!(
            out,
            "{} s{}: n={} coverage={:.4} set_size={:.3} abstention={:.4} auc={}",
            s.condition,
            s.severity,
            s.n,
            s.coverage,
            s.avg_set_size,
            s.abstention_rate,
            s.auc.map_or("n/a".to_string(), |a| format!("{a:.4}"))
        );
    }
    Ok(summaries)
}

/// Everything the sweep computed for one condition.
struct ConditionRun {
    condition: String,
    thresholds: CalibratedThresholds,
    /// Records per requested severity, ascending.
    records: Vec<(u8, Vec<EvaluationRecord>)>,
}

fn run_condition(cfg: &SweepConfig, source: &DataSource, condition: &str) -> Result<ConditionRun> {
    let clean = source.load(cfg, condition, 0)?;
    let (cal, _) = exchangeable_split(&clean, cfg.n_calibration, cfg.split_seed(condition))?;
    let thresholds =
        calibrate_with(&cal, cfg.alpha, cfg.abstain_target).map_err(|e| annotate(e, condition))?;
    let held_out: HashSet<&str> = cal.iter().map(|s| s.sample_id.as_str()).collect();

    let mut severities = cfg.severities.clone();
    severities.sort_unstable();
    severities.dedup();
    let mut records = Vec::with_capacity(severities.len());
    for severity in severities {
        let data = if severity == 0 {
            clean.clone()
        } else {
            source.load(cfg, condition, severity)?
        };
        let test: Vec<LabeledSample> = data
            .into_iter()
            .filter(|s| !held_out.contains(s.sample_id.as_str()))
            .collect();
        if test.is_empty() {
            return Err(Error::invalid(format!(
                "{condition} severity {severity}: no samples left after removing the calibration split"
            )));
        }
        records.push((severity, evaluate_batch(&test, &thresholds)?));
    }
    Ok(ConditionRun {
        condition: condition.to_string(),
        thresholds,
        records,
    })
}

fn annotate(e: Error, condition: &str) -> Error {
    match e {
        Error::DegenerateLabels(m) => Error::DegenerateLabels(format!("{condition}: {m}")),
        Error::InvalidInput(m) => Error::InvalidInput(format!("{condition}: {m}")),
        other => other,
    }
}

/// Output file name, marked `.partial` when some group failed.
fn output_name(name: &str, partial: bool) -> String {
    if partial {
        format!("{name}.partial")
    } else {
        name.to_string()
    }
}

/// Runs every (condition, severity) group and writes:
///
/// * `summary.csv`, `summary.json` - one row per group
/// * `heatmap.csv` - metrics pivoted by condition x severity
/// * `thresholds.csv` - calibrated thresholds per condition
/// * `roc/<condition>_s<severity>.csv` - ROC points per group
/// * `records/<condition>_s<severity>.csv` - per-sample records
///
/// If any condition fails, the successful groups are still written with a
/// `.partial` suffix and the first error is returned.
pub fn cmd_sweep(
    config: &Path,
    out_dir: &Path,
    jobs: usize,
    out: &mut dyn Write,
) -> Result<Vec<EvaluationSummary>> {
    let cfg = SweepConfig::read(config)?;
    run_sweep(&cfg, out_dir, jobs, out)
}

pub fn run_sweep(
    cfg: &SweepConfig,
    out_dir: &Path,
    jobs: usize,
    out: &mut dyn Write,
) -> Result<Vec<EvaluationSummary>> {
    cfg.validate()?;
    let source = DataSource::new(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let runs: Vec<Result<ConditionRun>> = pool.install(|| {
        cfg.conditions
            .par_iter()
            .map(|c| run_condition(cfg, &source, c))
            .collect()
    });

    let mut first_error = None;
    let mut done = Vec::new();
    for run in runs {
        match run {
            Ok(r) => done.push(r),
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }
    let partial = first_error.is_some();

    std::fs::create_dir_all(out_dir.join("roc")).map_err(|e| Error::io(out_dir, e))?;
    std::fs::create_dir_all(out_dir.join("records")).map_err(|e| Error::io(out_dir, e))?;

    let mut summaries = Vec::new();
    for run in &done {
        for (severity, records) in &run.records {
            let stem = format!("{}_s{severity}.csv", run.condition);
            write_records_csv(
                records,
                out_dir.join("records").join(output_name(&stem, partial)),
            )?;
            if let Ok(roc) = detection_auc(records) {
                write_roc_csv(&roc, out_dir.join("roc").join(output_name(&stem, partial)))?;
            }
            summaries.extend(summarize(records)?);
        }
    }
    summaries.sort_by(|a, b| (&a.condition, a.severity).cmp(&(&b.condition, b.severity)));

    if !done.is_empty() {
        let table: Vec<(String, CalibratedThresholds)> = done
            .iter()
            .map(|r| (r.condition.clone(), r.thresholds.clone()))
            .collect();
        write_thresholds_table(&table, out_dir.join(output_name("thresholds.csv", partial)))?;
        write_summary(
            &summaries,
            out_dir.join(output_name("summary.csv", partial)),
            SummaryFormat::Csv,
        )?;
        write_summary(
            &summaries,
            out_dir.join(output_name("summary.json", partial)),
            SummaryFormat::Json,
        )?;
        write_heatmap_csv(
            &summaries,
            out_dir.join(output_name("heatmap.csv", partial)),
        )?;
    }

    for s in &summaries {
        let _ = writeln!(
            out,
            "{} s{}: coverage={:.4} set_size={:.3} entropy={:.4} abstention={:.4} auc={}",
            s.condition,
            s.severity,
            s.coverage,
            s.avg_set_size,
            s.avg_entropy,
            s.abstention_rate,
            s.auc.map_or("n/a".to_string(), |a| format!("{a:.4}"))
        );
    }
    match first_error {
        Some(e) => Err(e),
        None => Ok(summaries),
    }
}

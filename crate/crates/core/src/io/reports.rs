use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::calibration::{CalibratedThresholds, RocCurve};
use crate::error::{Error, Result};
use crate::metrics::EvaluationSummary;
use crate::prediction::EvaluationRecord;

use super::{create, fmt6, write_err};

pub const RECORDS_HEADER: &str = "sample_id,condition,severity,top1,covered,abstained,\
should_abstain,set_size,entropy,confidence,margin,score_top1";

pub const SUMMARY_HEADER: &str = "condition,severity,n,coverage,avg_set_size,avg_entropy,\
avg_confidence,avg_margin,abstention_rate,auc";

/// Metric rows of the heatmap pivot, in output order.
pub const HEATMAP_METRICS: [&str; 7] = [
    "coverage",
    "avg_set_size",
    "avg_entropy",
    "avg_confidence",
    "avg_margin",
    "abstention_rate",
    "auc",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SummaryFormat {
    Csv,
    Json,
}

impl SummaryFormat {
    /// `.json` means JSON, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => SummaryFormat::Json,
            _ => SummaryFormat::Csv,
        }
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::io::BufWriter<std::fs::File>>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create(path)?))
}

fn bit(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn non_empty<T>(items: &[T], what: &str) -> Result<()> {
    if items.is_empty() {
        return Err(Error::invalid(format!("no {what} to write")));
    }
    Ok(())
}

pub fn write_records_csv(records: &[EvaluationRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    non_empty(records, "records")?;
    let mut w = csv_writer(path)?;
    w.write_record(RECORDS_HEADER.split(','))
        .map_err(|e| write_err(path, e))?;
    for r in records {
        w.write_record([
            r.sample_id.as_str(),
            r.condition.as_str(),
            &r.severity.to_string(),
            &r.top1.to_string(),
            bit(r.covered),
            bit(r.abstained),
            bit(r.should_abstain),
            &r.prediction_set.size().to_string(),
            &fmt6(r.entropy),
            &fmt6(r.confidence),
            &fmt6(r.margin),
            &fmt6(r.score_top1.value()),
        ])
        .map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| write_err(path, e))
}

fn summary_row(s: &EvaluationSummary) -> Vec<String> {
    vec![
        s.condition.clone(),
        s.severity.to_string(),
        s.n.to_string(),
        fmt6(s.coverage),
        fmt6(s.avg_set_size),
        fmt6(s.avg_entropy),
        fmt6(s.avg_confidence),
        fmt6(s.avg_margin),
        fmt6(s.abstention_rate),
        s.auc.map(fmt6).unwrap_or_default(),
    ]
}

/// Summary table as CSV (6 decimals, empty `auc` when absent) or as a JSON
/// array of objects with the same keys (`auc: null` when absent).
pub fn write_summary(
    summaries: &[EvaluationSummary],
    path: impl AsRef<Path>,
    format: SummaryFormat,
) -> Result<()> {
    let path = path.as_ref();
    non_empty(summaries, "summaries")?;
    match format {
        SummaryFormat::Csv => {
            let mut w = csv_writer(path)?;
            w.write_record(SUMMARY_HEADER.split(','))
                .map_err(|e| write_err(path, e))?;
            for s in summaries {
                w.write_record(summary_row(s))
                    .map_err(|e| write_err(path, e))?;
            }
            w.flush().map_err(|e| write_err(path, e))
        }
        SummaryFormat::Json => write_json(summaries, path),
    }
}

fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| write_err(path, e))?;
    text.push('\n');
    let mut f = create(path)?;
    f.write_all(text.as_bytes())
        .map_err(|e| write_err(path, e))?;
    f.flush().map_err(|e| write_err(path, e))
}

/// `tau,fpr,tpr`, one row per ROC point (sentinels written as `inf`/`-inf`).
pub fn write_roc_csv(curve: &RocCurve, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    non_empty(&curve.points, "ROC points")?;
    let mut w = csv_writer(path)?;
    w.write_record(["tau", "fpr", "tpr"])
        .map_err(|e| write_err(path, e))?;
    for p in &curve.points {
        w.write_record([fmt6(p.threshold), fmt6(p.fpr), fmt6(p.tpr)])
            .map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| write_err(path, e))
}

/// Pivot of every summary metric: one row per (metric, condition), one
/// column per severity (`s0`..`s5`, only those present).
pub fn write_heatmap_csv(summaries: &[EvaluationSummary], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    non_empty(summaries, "summaries")?;
    let severities: BTreeSet<u8> = summaries.iter().map(|s| s.severity).collect();
    let conditions: BTreeSet<&str> = summaries.iter().map(|s| s.condition.as_str()).collect();
    let mut w = csv_writer(path)?;
    let mut header = vec!["metric".to_string(), "condition".to_string()];
    header.extend(severities.iter().map(|s| format!("s{s}")));
    w.write_record(&header).map_err(|e| write_err(path, e))?;
    for metric in HEATMAP_METRICS {
        for &condition in &conditions {
            let mut row = vec![metric.to_string(), condition.to_string()];
            for &sev in &severities {
                let cell = summaries
                    .iter()
                    .find(|s| s.condition == condition && s.severity == sev)
                    .and_then(|s| metric_value(s, metric))
                    .map(fmt6)
                    .unwrap_or_default();
                row.push(cell);
            }
            w.write_record(&row).map_err(|e| write_err(path, e))?;
        }
    }
    w.flush().map_err(|e| write_err(path, e))
}

fn metric_value(s: &EvaluationSummary, metric: &str) -> Option<f64> {
    match metric {
        "coverage" => Some(s.coverage),
        "avg_set_size" => Some(s.avg_set_size),
        "avg_entropy" => Some(s.avg_entropy),
        "avg_confidence" => Some(s.avg_confidence),
        "avg_margin" => Some(s.avg_margin),
        "abstention_rate" => Some(s.abstention_rate),
        "auc" => s.auc,
        _ => None,
    }
}

/// `condition,q_conf,q_abs,alpha,n_calibration,youden_j`, one row per condition.
pub fn write_thresholds_table(
    rows: &[(String, CalibratedThresholds)],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    non_empty(rows, "thresholds")?;
    let mut w = csv_writer(path)?;
    w.write_record([
        "condition",
        "q_conf",
        "q_abs",
        "alpha",
        "n_calibration",
        "youden_j",
    ])
    .map_err(|e| write_err(path, e))?;
    for (condition, t) in rows {
        w.write_record([
            condition.clone(),
            fmt6(t.q_conf),
            fmt6(t.q_abs),
            fmt6(t.alpha),
            t.n_calibration.to_string(),
            fmt6(t.youden_j),
        ])
        .map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| write_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::roc_points;

    fn summary(condition: &str, severity: u8, auc: Option<f64>) -> EvaluationSummary {
        EvaluationSummary {
            condition: condition.into(),
            severity,
            n: 10,
            coverage: 0.9,
            avg_set_size: 1.5,
            avg_entropy: 0.25,
            avg_confidence: 0.8,
            avg_margin: 0.6,
            abstention_rate: 0.125,
            auc,
        }
    }

    #[test]
    fn summary_csv_and_json() {
        let dir = tempfile::tempdir().unwrap();
        let sums = vec![summary("fog", 1, Some(0.75)), summary("fog", 2, None)];
        let csv_path = dir.path().join("s.csv");
        write_summary(&sums, &csv_path, SummaryFormat::Csv).unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        assert_eq!(
            text,
            format!(
                "{SUMMARY_HEADER}\n\
                 fog,1,10,0.900000,1.500000,0.250000,0.800000,0.600000,0.125000,0.750000\n\
                 fog,2,10,0.900000,1.500000,0.250000,0.800000,0.600000,0.125000,\n"
            )
        );

        let json_path = dir.path().join("s.json");
        assert_eq!(SummaryFormat::from_path(&json_path), SummaryFormat::Json);
        write_summary(&sums, &json_path, SummaryFormat::Json).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
        assert_eq!(v[0]["auc"], 0.75);
        assert!(v[1]["auc"].is_null());
        let mut keys: Vec<_> = v[0].as_object().unwrap().keys().cloned().collect();
        let mut expected: Vec<_> = SUMMARY_HEADER.split(',').collect();
        keys.sort();
        expected.sort();
        assert_eq!(keys, expected);
    }

    #[test]
    fn identical_inputs_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let sums = vec![summary("rain", 3, Some(0.5))];
        let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        write_summary(&sums, &a, SummaryFormat::Csv).unwrap();
        write_summary(&sums, &b, SummaryFormat::Csv).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }

    #[test]
    fn roc_rows_equal_candidates_plus_sentinels() {
        let dir = tempfile::tempdir().unwrap();
        let scores = [0.4, 0.1, 0.4, 0.9, 0.3];
        let roc = roc_points(&scores, &[true, false, false, true, false]).unwrap();
        let p = dir.path().join("roc.csv");
        write_roc_csv(&roc, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let rows: Vec<_> = text.lines().skip(1).collect();
        // 4 distinct scores + 2 sentinels
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[0], "inf,0.000000,0.000000");
        assert_eq!(rows[5], "-inf,1.000000,1.000000");
    }

    #[test]
    fn heatmap_layout() {
        let dir = tempfile::tempdir().unwrap();
        let sums = vec![
            summary("fog", 1, Some(0.7)),
            summary("fog", 3, None),
            summary("rain", 1, Some(0.8)),
        ];
        let p = dir.path().join("h.csv");
        write_heatmap_csv(&sums, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "metric,condition,s1,s3");
        assert_eq!(lines.len(), 1 + HEATMAP_METRICS.len() * 2);
        assert!(lines.contains(&"auc,fog,0.700000,"));
        assert!(lines.contains(&"auc,rain,0.800000,"));
        assert!(lines.contains(&"abstention_rate,fog,0.125000,0.125000"));
    }

    #[test]
    fn unwritable_path_is_artifact_error() {
        let err = write_summary(
            &[summary("fog", 1, None)],
            "/nonexistent-dir/x.csv",
            SummaryFormat::Csv,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Artifact(_)));
        assert!(write_summary(&[], "/tmp/x.csv", SummaryFormat::Csv).is_err());
    }
}

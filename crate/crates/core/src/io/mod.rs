//! File formats: logits/probability CSV ingestion, threshold artifacts,
//! record and summary exports, and dataset manifests.
//!
//! Every text file is UTF-8 with LF line endings and `.` as the decimal
//! separator. Writers use fixed formatting so identical inputs give
//! byte-identical files.

mod logits;
mod manifest;
mod reports;
mod thresholds;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

pub use logits::{format_sig9, read_logits_csv, round_sig9, write_logits_csv};
pub use manifest::{DatasetManifest, ManifestEntry, MANIFEST_VERSION};
pub use reports::{
    write_heatmap_csv, write_records_csv, write_roc_csv, write_summary, write_thresholds_table,
    SummaryFormat, HEATMAP_METRICS, RECORDS_HEADER, SUMMARY_HEADER,
};
pub use thresholds::{read_thresholds, thresholds_to_json, write_thresholds, THRESHOLDS_VERSION};

use crate::error::{Error, Result};

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Artifact(format!("cannot write {}: {e}", path.display())))
}

pub(crate) fn write_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Artifact(format!("cannot write {}: {e}", path.display()))
}

/// `inf` / `-inf` for the infinite sentinels, plain `{:.6}` otherwise.
pub(crate) fn fmt6(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v:.6}")
    }
}

use std::io::Write;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::calibration::{AbstainTarget, CalibratedThresholds};
use crate::error::{Error, Result};

use super::{create, write_err};

pub const THRESHOLDS_VERSION: u32 = 1;

/// A JSON number, or one of the strings `"inf"` / `"-inf"`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum JsonReal {
    Number(f64),
    Text(String),
}

impl From<f64> for JsonReal {
    fn from(v: f64) -> Self {
        if v == f64::INFINITY {
            JsonReal::Text("inf".into())
        } else if v == f64::NEG_INFINITY {
            JsonReal::Text("-inf".into())
        } else {
            JsonReal::Number(v)
        }
    }
}

impl JsonReal {
    fn to_f64(&self, key: &str) -> Result<f64> {
        match self {
            JsonReal::Number(v) => Ok(*v),
            JsonReal::Text(s) if s == "inf" => Ok(f64::INFINITY),
            JsonReal::Text(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
            JsonReal::Text(s) => Err(Error::Artifact(format!("{key}: unexpected value {s:?}"))),
        }
    }
}

fn is_default_target(t: &AbstainTarget) -> bool {
    *t == AbstainTarget::default()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThresholdsDocument {
    format_version: u32,
    q_conf: JsonReal,
    q_abs: JsonReal,
    alpha: f64,
    n_calibration: usize,
    youden_j: f64,
    k_classes: usize,
    #[serde(default, skip_serializing_if = "is_default_target")]
    abstain_target: AbstainTarget,
    created_utc: String,
}

/// Serializes thresholds with the given creation timestamp.
pub fn thresholds_to_json(t: &CalibratedThresholds, created: DateTime<Utc>) -> Result<String> {
    t.validate()?;
    let doc = ThresholdsDocument {
        format_version: THRESHOLDS_VERSION,
        q_conf: t.q_conf.into(),
        q_abs: t.q_abs.into(),
        alpha: t.alpha,
        n_calibration: t.n_calibration,
        youden_j: t.youden_j,
        k_classes: t.k_classes,
        abstain_target: t.abstain_target,
        created_utc: created.to_rfc3339_opts(SecondsFormat::Secs, true),
    };
    let mut s = serde_json::to_string_pretty(&doc).map_err(|e| Error::Artifact(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes the thresholds artifact stamped with the current UTC time.
pub fn write_thresholds(t: &CalibratedThresholds, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json = thresholds_to_json(t, Utc::now())?;
    let mut f = create(path)?;
    f.write_all(json.as_bytes())
        .map_err(|e| write_err(path, e))?;
    f.flush().map_err(|e| write_err(path, e))
}

pub fn read_thresholds(path: impl AsRef<Path>) -> Result<CalibratedThresholds> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: String| Error::Artifact(format!("{}: {msg}", path.display()));
    let doc: ThresholdsDocument = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    if doc.format_version != THRESHOLDS_VERSION {
        return Err(bad(format!(
            "unsupported format_version {} (expected {THRESHOLDS_VERSION})",
            doc.format_version
        )));
    }
    DateTime::parse_from_rfc3339(&doc.created_utc)
        .map_err(|e| bad(format!("created_utc {:?}: {e}", doc.created_utc)))?;
    let t = CalibratedThresholds {
        q_conf: doc
            .q_conf
            .to_f64("q_conf")
            .map_err(|e| bad(e.to_string()))?,
        q_abs: doc.q_abs.to_f64("q_abs").map_err(|e| bad(e.to_string()))?,
        alpha: doc.alpha,
        n_calibration: doc.n_calibration,
        youden_j: doc.youden_j,
        k_classes: doc.k_classes,
        abstain_target: doc.abstain_target,
    };
    t.validate().map_err(|e| bad(e.to_string()))?;
    Ok(t)
}

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{check_severity, LabeledSample};

use super::read_logits_csv;

pub const MANIFEST_VERSION: u32 = 1;

/// One data file on the condition x severity grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
    pub condition: String,
    pub severity: u8,
}

/// TOML index of logits files, one per (condition, severity).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub k_classes: usize,
    pub files: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn new(k_classes: usize) -> Self {
        Self {
            format_version: MANIFEST_VERSION,
            k_classes,
            files: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != MANIFEST_VERSION {
            return Err(Error::Artifact(format!(
                "unsupported manifest format_version {}",
                self.format_version
            )));
        }
        if self.k_classes < 2 {
            return Err(Error::Artifact("manifest k_classes must be >= 2".into()));
        }
        let mut seen = BTreeSet::new();
        for f in &self.files {
            check_severity(f.severity).map_err(|e| Error::Artifact(e.to_string()))?;
            if !seen.insert((f.condition.as_str(), f.severity)) {
                return Err(Error::Artifact(format!(
                    "duplicate manifest entry for {} severity {}",
                    f.condition, f.severity
                )));
            }
        }
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Self = toml::from_str(&text)
            .map_err(|e| Error::Artifact(format!("{}: {e}", path.display())))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.validate()?;
        let text = toml::to_string(self).map_err(|e| Error::Artifact(e.to_string()))?;
        std::fs::write(path, text)
            .map_err(|e| Error::Artifact(format!("cannot write {}: {e}", path.display())))
    }

    pub fn entry(&self, condition: &str, severity: u8) -> Option<&ManifestEntry> {
        self.files
            .iter()
            .find(|f| f.condition == condition && f.severity == severity)
    }

    /// Loads one entry's samples, checking the class count against the manifest.
    pub fn load(&self, base_dir: &Path, entry: &ManifestEntry) -> Result<Vec<LabeledSample>> {
        let path = base_dir.join(&entry.path);
        let samples = read_logits_csv(&path, &entry.condition, entry.severity)?;
        if let Some(s) = samples.iter().find(|s| s.num_classes() != self.k_classes) {
            return Err(Error::invalid(format!(
                "{}: sample {} has {} classes, manifest declares {}",
                path.display(),
                s.sample_id,
                s.num_classes(),
                self.k_classes
            )));
        }
        Ok(samples)
    }
}

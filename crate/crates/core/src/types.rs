//! Validated numeric domain types and the two scalar transforms shared by
//! every other module: softmax and the negative-log-likelihood
//! nonconformity score.
//!
//! All types are immutable once constructed, so they can be shared freely
//! across threads.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied to probabilities before taking a logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Tolerance on `sum(p) == 1` when validating ingested probability rows.
pub const PROB_SUM_TOLERANCE: f64 = 1e-6;

/// Highest supported severity level (0 = clean).
pub const MAX_SEVERITY: u8 = 5;

/// Raw, unnormalized model outputs for a single input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LogitVector(Vec<f64>);

impl LogitVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid(format!(
                "logit vector needs at least 2 classes, got {}",
                values.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!("logit {i} is not finite ({v})")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }
}

impl TryFrom<Vec<f64>> for LogitVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<LogitVector> for Vec<f64> {
    fn from(v: LogitVector) -> Self {
        v.0
    }
}

/// A categorical distribution over `K >= 2` classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    /// Validates `values` as a distribution: every entry in `[0, 1]` and the
    /// total within [`PROB_SUM_TOLERANCE`] of one.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid(format!(
                "probability vector needs at least 2 classes, got {}",
                values.len()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::invalid(format!(
                "probability {i} outside [0, 1] ({v})"
            )));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(Error::invalid(format!(
                "probabilities sum to {total}, expected 1 within {PROB_SUM_TOLERANCE}"
            )));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, class: usize) -> Option<f64> {
        self.0.get(class).copied()
    }

    /// Index of the most probable class; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate().skip(1) {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    /// Largest probability.
    pub fn max(&self) -> f64 {
        self.0[self.argmax()]
    }
}

impl TryFrom<Vec<f64>> for ProbabilityVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<ProbabilityVector> for Vec<f64> {
    fn from(v: ProbabilityVector) -> Self {
        v.0
    }
}

/// Negative log-probability of a label; always finite and `>= 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct NonconformityScore(f64);

impl NonconformityScore {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::invalid(format!(
                "nonconformity score must be finite and >= 0, got {value}"
            )));
        }
        Ok(Self(value))
    }

    /// Score of a single probability: `-ln(clamp(p, PROB_FLOOR, 1))`.
    pub fn from_probability(p: f64) -> Self {
        // -ln(1) is -0.0; normalize the sign so serialized output is stable.
        Self((-p.clamp(PROB_FLOOR, 1.0).ln()).max(0.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for NonconformityScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// One evaluation unit: a model output with its ground-truth label and the
/// environmental condition it was recorded under.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub sample_id: String,
    pub label: usize,
    pub probs: ProbabilityVector,
    /// Present when the sample was built from logits; kept so the sample can
    /// be written back out in logit form.
    pub logits: Option<LogitVector>,
    pub condition: String,
    pub severity: u8,
}

impl LabeledSample {
    pub fn from_probs(
        sample_id: impl Into<String>,
        label: usize,
        probs: ProbabilityVector,
        condition: impl Into<String>,
        severity: u8,
    ) -> Result<Self> {
        let sample = Self {
            sample_id: sample_id.into(),
            label,
            probs,
            logits: None,
            condition: condition.into(),
            severity,
        };
        sample.validate()?;
        Ok(sample)
    }

    pub fn from_logits(
        sample_id: impl Into<String>,
        label: usize,
        logits: LogitVector,
        condition: impl Into<String>,
        severity: u8,
    ) -> Result<Self> {
        let sample = Self {
            sample_id: sample_id.into(),
            label,
            probs: softmax(&logits),
            logits: Some(logits),
            condition: condition.into(),
            severity,
        };
        sample.validate()?;
        Ok(sample)
    }

    fn validate(&self) -> Result<()> {
        let k = self.num_classes();
        if self.label >= k {
            return Err(Error::invalid(format!(
                "label {} out of range for {k} classes",
                self.label
            )));
        }
        check_severity(self.severity)
    }

    pub fn num_classes(&self) -> usize {
        self.probs.num_classes()
    }

    /// Nonconformity of the true label.
    pub fn true_label_score(&self) -> NonconformityScore {
        NonconformityScore::from_probability(self.probs.as_slice()[self.label])
    }

    pub fn is_misclassified(&self) -> bool {
        self.probs.argmax() != self.label
    }
}

pub(crate) fn check_severity(severity: u8) -> Result<()> {
    if severity > MAX_SEVERITY {
        return Err(Error::invalid(format!(
            "severity {severity} outside 0..={MAX_SEVERITY}"
        )));
    }
    Ok(())
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &LogitVector) -> ProbabilityVector {
    let z = logits.as_slice();
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    ProbabilityVector(exps.into_iter().map(|e| e / total).collect())
}

/// Nonconformity of `label` under `probs`: `-ln(clamp(p[label], 1e-12, 1))`.
pub fn nonconformity(probs: &ProbabilityVector, label: usize) -> Result<NonconformityScore> {
    let p = probs.get(label).ok_or_else(|| {
        Error::invalid(format!(
            "label {label} out of range for {} classes",
            probs.num_classes()
        ))
    })?;
    Ok(NonconformityScore::from_probability(p))
}

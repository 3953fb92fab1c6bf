//! Prediction phase: conformal prediction sets, the abstention verdict, and
//! per-sample evaluation records.

use rayon::prelude::*;

use crate::calibration::CalibratedThresholds;
use crate::error::{Error, Result};
use crate::metrics;
use crate::types::{LabeledSample, NonconformityScore, ProbabilityVector};

/// Labels whose nonconformity is within the conformal threshold, ascending.
/// May be empty for a finite threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionSet {
    members: Vec<usize>,
}

impl PredictionSet {
    /// Builds a set from strictly increasing class indices.
    pub fn new(members: Vec<usize>) -> Result<Self> {
        if members.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(
                "prediction set members must be strictly increasing",
            ));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, label: usize) -> bool {
        self.members.binary_search(&label).is_ok()
    }
}

/// Everything measured about one test sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRecord {
    pub sample_id: String,
    pub prediction_set: PredictionSet,
    pub covered: bool,
    pub abstained: bool,
    pub should_abstain: bool,
    pub top1: usize,
    pub score_top1: NonconformityScore,
    pub entropy: f64,
    pub confidence: f64,
    pub margin: f64,
    pub condition: String,
    pub severity: u8,
}

/// `{ y : -ln(clamp(p(y))) <= q_conf }`. An infinite threshold admits every label.
pub fn prediction_set(probs: &ProbabilityVector, q_conf: f64) -> PredictionSet {
    let members = probs
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &p)| NonconformityScore::from_probability(p).value() <= q_conf)
        .map(|(y, _)| y)
        .collect();
    PredictionSet { members }
}

/// Abstain when the top-1 nonconformity strictly exceeds `q_abs`.
pub fn abstain_decision(probs: &ProbabilityVector, q_abs: f64) -> bool {
    NonconformityScore::from_probability(probs.max()).value() > q_abs
}

pub fn evaluate_sample(
    sample: &LabeledSample,
    thresholds: &CalibratedThresholds,
) -> Result<EvaluationRecord> {
    if sample.num_classes() != thresholds.k_classes {
        return Err(Error::invalid(format!(
            "sample {} has {} classes but thresholds were calibrated on {}",
            sample.sample_id,
            sample.num_classes(),
            thresholds.k_classes
        )));
    }
    let probs = &sample.probs;
    let set = prediction_set(probs, thresholds.q_conf);
    let top1 = probs.argmax();
    Ok(EvaluationRecord {
        sample_id: sample.sample_id.clone(),
        covered: set.contains(sample.label),
        prediction_set: set,
        abstained: abstain_decision(probs, thresholds.q_abs),
        should_abstain: thresholds.abstain_target.should_abstain(
            probs,
            sample.label,
            thresholds.q_conf,
        ),
        top1,
        score_top1: NonconformityScore::from_probability(probs.as_slice()[top1]),
        entropy: metrics::normalized_entropy(probs),
        confidence: metrics::confidence(probs),
        margin: metrics::margin(probs),
        condition: sample.condition.clone(),
        severity: sample.severity,
    })
}

/// Evaluates samples in parallel; output order matches input order.
pub fn evaluate_batch(
    samples: &[LabeledSample],
    thresholds: &CalibratedThresholds,
) -> Result<Vec<EvaluationRecord>> {
    samples
        .par_iter()
        .map(|s| evaluate_sample(s, thresholds))
        .collect()
}

//! Calibration phase: the conformal threshold that guarantees marginal
//! coverage, and the abstention threshold picked off the ROC curve of the
//! same nonconformity scores by maximizing Youden's J.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{LabeledSample, NonconformityScore, ProbabilityVector};

/// Which samples count as "should have abstained" when fitting and scoring
/// the abstention threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbstainTarget {
    /// The top-1 prediction disagrees with the true label.
    #[default]
    Misclassified,
    /// The true label falls outside the conformal prediction set.
    NotCovered,
}

impl AbstainTarget {
    /// Ground-truth abstention flag for one sample under `q_conf`.
    pub fn should_abstain(self, probs: &ProbabilityVector, label: usize, q_conf: f64) -> bool {
        match self {
            AbstainTarget::Misclassified => probs.argmax() != label,
            AbstainTarget::NotCovered => {
                NonconformityScore::from_probability(probs.as_slice()[label]).value() > q_conf
            }
        }
    }
}

/// Output of the calibration phase.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedThresholds {
    /// Conformal threshold; `f64::INFINITY` when the conformal rank exceeds `n`.
    pub q_conf: f64,
    /// Abstention threshold; `-inf` only if no finite τ beats abstaining on everything.
    pub q_abs: f64,
    pub alpha: f64,
    pub n_calibration: usize,
    /// TPR - FPR achieved at `q_abs` on the calibration set.
    pub youden_j: f64,
    pub k_classes: usize,
    pub abstain_target: AbstainTarget,
}

impl CalibratedThresholds {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.n_calibration == 0 {
            return Err(Error::invalid("n_calibration must be >= 1"));
        }
        if self.q_conf.is_nan() || self.q_conf < 0.0 || self.q_conf == f64::NEG_INFINITY {
            return Err(Error::invalid(format!(
                "q_conf must be >= 0 or +inf, got {}",
                self.q_conf
            )));
        }
        if self.q_abs.is_nan() {
            return Err(Error::invalid("q_abs is NaN"));
        }
        if !(-1.0..=1.0).contains(&self.youden_j) {
            return Err(Error::invalid(format!(
                "youden_j must lie in [-1, 1], got {}",
                self.youden_j
            )));
        }
        if self.k_classes < 2 {
            return Err(Error::invalid("k_classes must be >= 2"));
        }
        Ok(())
    }

    /// True when the conformal rank exceeded the calibration size.
    pub fn is_trivial_conf(&self) -> bool {
        self.q_conf == f64::INFINITY
    }
}

/// One operating point. `true_positives`/`false_positives` are the raw counts
/// of abstentions (`score > threshold`) among positive and negative samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
    pub true_positives: usize,
    pub false_positives: usize,
}

/// ROC curve ordered by descending threshold, from `(+inf, 0, 0)` to `(-inf, 1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
    pub positives: usize,
    pub negatives: usize,
}

impl RocCurve {
    /// `(TPR - FPR) * positives * negatives`, exact in integers.
    fn j_numerator(&self, point: &RocPoint) -> i128 {
        point.true_positives as i128 * self.negatives as i128
            - point.false_positives as i128 * self.positives as i128
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

/// 1-based conformal rank `ceil((n + 1)(1 - alpha))`.
///
/// The product is nudged down by 1e-9 so that decimal alphas like 0.1 do not
/// round a whole-number rank up by one.
pub fn conformal_rank(n: usize, alpha: f64) -> usize {
    let raw = (n as f64 + 1.0) * (1.0 - alpha);
    (raw - 1e-9).ceil().max(1.0) as usize
}

/// Conformal quantile of the calibration scores: the `k`-th smallest score
/// with `k = ceil((n + 1)(1 - alpha))`, or `+inf` when `k > n`.
pub fn conformal_threshold(scores: &[NonconformityScore], alpha: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::invalid(
            "conformal threshold needs at least one score",
        ));
    }
    check_alpha(alpha)?;
    let n = scores.len();
    let k = conformal_rank(n, alpha);
    if k > n {
        return Ok(f64::INFINITY);
    }
    let mut values: Vec<f64> = scores.iter().map(|s| s.value()).collect();
    let (_, kth, _) = values.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*kth)
}

/// Builds the ROC curve of "abstain when `score > τ`" against the
/// `should_abstain` flags, sweeping τ over `+inf`, every distinct score in
/// descending order, then `-inf`. AUC is the trapezoid integral.
pub fn roc_points(scores: &[f64], should_abstain: &[bool]) -> Result<RocCurve> {
    if scores.len() != should_abstain.len() {
        return Err(Error::invalid(format!(
            "{} scores but {} flags",
            scores.len(),
            should_abstain.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::invalid("ROC needs at least one score"));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::invalid(format!(
            "ROC scores must be finite, got {s}"
        )));
    }
    let positives = should_abstain.iter().filter(|&&f| f).count();
    let negatives = should_abstain.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateLabels(format!(
            "all {} flags are {}; TPR and FPR both need at least one sample of each class",
            scores.len(),
            positives > 0
        )));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let point = |threshold: f64, tp: usize, fp: usize| RocPoint {
        threshold,
        fpr: fp as f64 / negatives as f64,
        tpr: tp as f64 / positives as f64,
        true_positives: tp,
        false_positives: fp,
    };

    let mut points = Vec::with_capacity(scores.len() + 2);
    points.push(point(f64::INFINITY, 0, 0));
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < order.len() {
        let tau = scores[order[i]];
        // Everything strictly above tau has already been counted.
        points.push(point(tau, tp, fp));
        while i < order.len() && scores[order[i]] == tau {
            if should_abstain[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
    }
    points.push(point(f64::NEG_INFINITY, tp, fp));

    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) * 0.5)
        .sum::<f64>()
        .clamp(0.0, 1.0);

    Ok(RocCurve {
        points,
        auc,
        positives,
        negatives,
    })
}

/// Threshold maximizing `TPR - FPR`. Among tied maximizers the smallest τ
/// wins, so the most conservative (most abstaining) operating point is used.
pub fn abstention_threshold(roc: &RocCurve) -> (f64, f64) {
    let mut best = &roc.points[0];
    let mut best_j = roc.j_numerator(best);
    for p in &roc.points[1..] {
        let j = roc.j_numerator(p);
        // Points run in descending τ, so `>=` keeps the last (smallest) maximizer.
        if j >= best_j {
            best = p;
            best_j = j;
        }
    }
    (best.threshold, best.tpr - best.fpr)
}

/// Calibrates both thresholds with the default [`AbstainTarget::Misclassified`] rule.
pub fn calibrate(samples: &[LabeledSample], alpha: f64) -> Result<CalibratedThresholds> {
    calibrate_with(samples, alpha, AbstainTarget::default())
}

pub fn calibrate_with(
    samples: &[LabeledSample],
    alpha: f64,
    target: AbstainTarget,
) -> Result<CalibratedThresholds> {
    let first = samples
        .first()
        .ok_or_else(|| Error::invalid("calibration set is empty"))?;
    check_alpha(alpha)?;
    let k = first.num_classes();
    if let Some(s) = samples.iter().find(|s| s.num_classes() != k) {
        return Err(Error::invalid(format!(
            "sample {} has {} classes, expected {k}",
            s.sample_id,
            s.num_classes()
        )));
    }

    let scores: Vec<NonconformityScore> = samples
        .par_iter()
        .map(LabeledSample::true_label_score)
        .collect();
    let q_conf = conformal_threshold(&scores, alpha)?;

    let flags: Vec<bool> = samples
        .iter()
        .map(|s| target.should_abstain(&s.probs, s.label, q_conf))
        .collect();
    let raw: Vec<f64> = scores.iter().map(|s| s.value()).collect();
    let roc = roc_points(&raw, &flags).map_err(|e| match e {
        Error::DegenerateLabels(_) => {
            let positives = flags.iter().filter(|&&f| f).count();
            let what = match target {
                AbstainTarget::Misclassified => "misclassified",
                AbstainTarget::NotCovered => "outside the prediction set",
            };
            Error::DegenerateLabels(format!(
                "{positives} of {} calibration samples are {what}; the abstention threshold \
                 needs at least one sample on each side. Use a larger or more varied \
                 calibration set",
                flags.len()
            ))
        }
        other => other,
    })?;
    let (q_abs, youden_j) = abstention_threshold(&roc);

    Ok(CalibratedThresholds {
        q_conf,
        q_abs,
        alpha,
        n_calibration: samples.len(),
        youden_j,
        k_classes: k,
        abstain_target: target,
    })
}

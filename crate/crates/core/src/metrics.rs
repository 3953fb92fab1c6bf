//! Uncertainty metrics for single predictions and aggregate statistics over
//! evaluation records, grouped by condition and severity.
//!
//! Aggregates are computed so that they do not depend on record order: values
//! are sorted before a pairwise summation, which makes parallel and serial
//! runs (or shuffled inputs) produce bit-identical summaries.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::calibration::{roc_points, RocCurve};
use crate::error::{Error, Result};
use crate::prediction::EvaluationRecord;
use crate::types::ProbabilityVector;

/// Aggregate metrics for one (condition, severity) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationSummary {
    pub condition: String,
    pub severity: u8,
    pub n: usize,
    pub coverage: f64,
    pub avg_set_size: f64,
    pub avg_entropy: f64,
    pub avg_confidence: f64,
    pub avg_margin: f64,
    pub abstention_rate: f64,
    /// `None` when the group holds only one `should_abstain` class.
    pub auc: Option<f64>,
}

/// Shannon entropy divided by `ln K`, with `0 ln 0 = 0`.
pub fn normalized_entropy(probs: &ProbabilityVector) -> f64 {
    let p = probs.as_slice();
    let h: f64 = p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum();
    // `+ 0.0` turns the -0.0 of a one-hot vector into +0.0.
    (h / (p.len() as f64).ln()).clamp(0.0, 1.0) + 0.0
}

pub fn confidence(probs: &ProbabilityVector) -> f64 {
    probs.max()
}

/// Gap between the largest and second-largest probability.
pub fn margin(probs: &ProbabilityVector) -> f64 {
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &p in probs.as_slice() {
        if p > first {
            second = first;
            first = p;
        } else if p > second {
            second = p;
        }
    }
    first - second
}

/// Recursive pairwise summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let (a, b) = values.split_at(values.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Mean that does not depend on input order.
fn stable_mean(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    pairwise_sum(&values) / values.len() as f64
}

fn non_empty(records: &[EvaluationRecord], what: &str) -> Result<()> {
    if records.is_empty() {
        return Err(Error::invalid(format!("{what} needs at least one record")));
    }
    Ok(())
}

fn fraction(records: &[EvaluationRecord], pred: impl Fn(&EvaluationRecord) -> bool) -> f64 {
    records.iter().filter(|r| pred(r)).count() as f64 / records.len() as f64
}

/// Fraction of records whose true label is in the prediction set.
pub fn empirical_coverage(records: &[EvaluationRecord]) -> Result<f64> {
    non_empty(records, "coverage")?;
    Ok(fraction(records, |r| r.covered))
}

pub fn average_set_size(records: &[EvaluationRecord]) -> Result<f64> {
    non_empty(records, "average set size")?;
    Ok(stable_mean(
        records
            .iter()
            .map(|r| r.prediction_set.size() as f64)
            .collect(),
    ))
}

pub fn abstention_rate(records: &[EvaluationRecord]) -> Result<f64> {
    non_empty(records, "abstention rate")?;
    Ok(fraction(records, |r| r.abstained))
}

/// ROC of the top-1 nonconformity score against the `should_abstain` flags.
pub fn detection_auc(records: &[EvaluationRecord]) -> Result<RocCurve> {
    let scores: Vec<f64> = records.iter().map(|r| r.score_top1.value()).collect();
    let flags: Vec<bool> = records.iter().map(|r| r.should_abstain).collect();
    roc_points(&scores, &flags)
}

fn summarize_group(
    condition: &str,
    severity: u8,
    records: &[EvaluationRecord],
) -> Result<EvaluationSummary> {
    let auc = match detection_auc(records) {
        Ok(roc) => Some(roc.auc),
        Err(Error::DegenerateLabels(_)) => None,
        Err(e) => return Err(e),
    };
    let mean_of = |f: fn(&EvaluationRecord) -> f64| stable_mean(records.iter().map(f).collect());
    Ok(EvaluationSummary {
        condition: condition.to_string(),
        severity,
        n: records.len(),
        coverage: empirical_coverage(records)?,
        avg_set_size: average_set_size(records)?,
        avg_entropy: mean_of(|r| r.entropy),
        avg_confidence: mean_of(|r| r.confidence),
        avg_margin: mean_of(|r| r.margin),
        abstention_rate: abstention_rate(records)?,
        auc,
    })
}

/// Groups records by records' (condition, severity) and aggregates each
/// group. Output is sorted by condition, then severity.
pub fn summarize(records: &[EvaluationRecord]) -> Result<Vec<EvaluationSummary>> {
    non_empty(records, "summary")?;
    let mut groups: BTreeMap<(&str, u8), Vec<EvaluationRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.condition.as_str(), r.severity))
            .or_default()
            .push(r.clone());
    }
    groups
        .iter()
        .map(|(&(condition, severity), group)| summarize_group(condition, severity, group))
        .collect()
}

/// ROC curve per (condition, severity) group; groups with a single
/// `should_abstain` class are skipped.
pub fn group_rocs(records: &[EvaluationRecord]) -> Result<Vec<((String, u8), RocCurve)>> {
    let mut groups: BTreeMap<(String, u8), Vec<EvaluationRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.condition.clone(), r.severity))
            .or_default()
            .push(r.clone());
    }
    let mut out = Vec::new();
    for (key, group) in groups {
        match detection_auc(&group) {
            Ok(roc) => out.push((key, roc)),
            Err(Error::DegenerateLabels(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::NonconformityScore;
    use proptest::prelude::*;

    fn probs(v: &[f64]) -> ProbabilityVector {
        ProbabilityVector::new(v.to_vec()).unwrap()
    }

    fn record(
        condition: &str,
        severity: u8,
        covered: bool,
        abstained: bool,
        should_abstain: bool,
        score: f64,
    ) -> EvaluationRecord {
        let p = probs(&[0.7, 0.2, 0.1]);
        let set = crate::prediction::prediction_set(&p, if covered { 3.0 } else { 0.1 });
        EvaluationRecord {
            sample_id: format!("{condition}-{severity}-{score}"),
            prediction_set: set,
            covered,
            abstained,
            should_abstain,
            top1: 0,
            score_top1: NonconformityScore::new(score).unwrap(),
            entropy: score / 10.0,
            confidence: 0.7,
            margin: 0.5,
            condition: condition.to_string(),
            severity,
        }
    }

    fn with_set(mut r: EvaluationRecord, members: usize) -> EvaluationRecord {
        r.prediction_set = crate::prediction::PredictionSet::new((0..members).collect()).unwrap();
        r
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(normalized_entropy(&probs(&[0.5, 0.5])), 1.0);
        let e = normalized_entropy(&probs(&[0.0, 1.0, 0.0]));
        assert!(e == 0.0 && e.is_sign_positive());
        let h = normalized_entropy(&probs(&[0.7, 0.1, 0.1, 0.1]));
        // H = 0.940448 nats, ln 4 = 1.386294
        assert!((h - 0.678390).abs() < 1e-6, "{h}");
    }

    #[test]
    fn confidence_and_margin_examples() {
        let p = probs(&[0.6, 0.3, 0.1]);
        assert_eq!(confidence(&p), 0.6);
        assert!((margin(&p) - 0.3).abs() < 1e-12);
        assert_eq!(confidence(&probs(&[0.0, 1.0])), 1.0);
        assert_eq!(margin(&probs(&[0.0, 1.0])), 1.0);
        assert_eq!(confidence(&probs(&[0.2; 5])), 0.2);
        assert_eq!(margin(&probs(&[0.2; 5])), 0.0);
    }

    #[test]
    fn counting_aggregates() {
        let recs: Vec<_> = (0..10)
            .map(|i| record("rain", 1, i != 3, i < 2, i < 5, i as f64))
            .collect();
        assert!((empirical_coverage(&recs).unwrap() - 0.9).abs() < 1e-12);
        assert!((abstention_rate(&recs).unwrap() - 0.2).abs() < 1e-12);
        assert!(empirical_coverage(&[]).is_err());
        assert!(average_set_size(&[]).is_err());
        assert!(abstention_rate(&[]).is_err());

        let recs: Vec<_> = (0..8)
            .map(|i| record("rain", 1, true, i < 2, false, 0.1))
            .collect();
        assert_eq!(abstention_rate(&recs).unwrap(), 0.25);
    }

    #[test]
    fn set_size_mean() {
        let base = record("fog", 1, true, false, false, 0.1);
        let recs = vec![
            with_set(base.clone(), 1),
            with_set(base.clone(), 1),
            with_set(base, 2),
        ];
        assert!((average_set_size(&recs).unwrap() - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn detection_auc_perfect_and_degenerate() {
        let recs: Vec<_> = (0..6)
            .map(|i| record("snow", 3, true, false, i >= 3, i as f64))
            .collect();
        assert_eq!(detection_auc(&recs).unwrap().auc, 1.0);
        let recs: Vec<_> = (0..6)
            .map(|i| record("snow", 3, true, false, false, i as f64))
            .collect();
        assert!(matches!(
            detection_auc(&recs),
            Err(Error::DegenerateLabels(_))
        ));
    }

    #[test]
    fn summarize_groups_sorted() {
        let mut recs = Vec::new();
        for (c, s) in [("snow", 2), ("fog", 2), ("snow", 1), ("fog", 1)] {
            for i in 0..4 {
                recs.push(record(c, s, true, i == 0, i >= 2, i as f64));
            }
        }
        let sums = summarize(&recs).unwrap();
        let keys: Vec<_> = sums
            .iter()
            .map(|s| (s.condition.as_str(), s.severity))
            .collect();
        assert_eq!(keys, [("fog", 1), ("fog", 2), ("snow", 1), ("snow", 2)]);
        assert!(sums.iter().all(|s| s.n == 4 && s.auc == Some(1.0)));
        assert_eq!(sums[0].abstention_rate, 0.25);
        assert!((sums[0].avg_entropy - 0.15).abs() < 1e-12);
    }

    #[test]
    fn summarize_single_class_group_has_no_auc() {
        let recs: Vec<_> = (0..3)
            .map(|i| record("fog", 4, true, false, false, i as f64))
            .collect();
        let sums = summarize(&recs).unwrap();
        assert_eq!(sums[0].auc, None);
        assert_eq!(sums[0].coverage, 1.0);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 500500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn empty_sets_count_as_size_zero() {
        let recs = vec![record("rain", 5, false, true, true, 2.0)];
        assert!(recs[0].prediction_set.is_empty());
        assert_eq!(average_set_size(&recs).unwrap(), 0.0);
        assert_eq!(empirical_coverage(&recs).unwrap(), 0.0);
    }

    fn prob_vec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, 2..16).prop_filter_map("zero mass", |w| {
            let total: f64 = w.iter().sum();
            (total > 0.0).then(|| w.iter().map(|x| x / total).collect())
        })
    }

    proptest! {
        #[test]
        fn entropy_in_unit_interval(p in prob_vec()) {
            let h = normalized_entropy(&probs(&p));
            prop_assert!((0.0..=1.0).contains(&h));
        }

        #[test]
        fn margin_below_confidence_and_permutation_invariant(p in prob_vec(), rot in 0usize..16) {
            let a = probs(&p);
            let mut q = p.clone();
            let n = q.len();
            q.rotate_left(rot % n);
            let b = probs(&q);
            prop_assert!(margin(&a) <= confidence(&a));
            prop_assert_eq!(confidence(&a), confidence(&b));
            prop_assert_eq!(margin(&a), margin(&b));
        }

        #[test]
        fn summarize_is_order_independent(
            rows in prop::collection::vec((0u8..3, 0u8..3, any::<bool>(), any::<bool>(), 0.0f64..5.0), 1..60),
            seed in any::<u64>(),
        ) {
            let conds = ["fog", "rain", "snow"];
            let recs: Vec<_> = rows
                .iter()
                .map(|&(c, s, cov, abst, score)| record(conds[c as usize], s, cov, abst, score > 2.0, score))
                .collect();
            let mut shuffled = recs.clone();
            // deterministic Fisher-Yates from the seed
            let mut state = seed;
            for i in (1..shuffled.len()).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (state >> 33) as usize % (i + 1));
            }
            let a = summarize(&recs).unwrap();
            let b = summarize(&shuffled).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.iter().map(|s| s.n).sum::<usize>(), recs.len());
        }
    }
}

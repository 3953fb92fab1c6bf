//! Seeded synthetic classifier outputs with a severity-parameterized
//! degradation model.
//!
//! Generator `v1`:
//!
//! 1. `rng = ChaCha20Rng::seed_from_u64(seed)`.
//! 2. Per sample, in order: the label (uniform over `K`), `K` clean logits
//!    `logit_scale * N(0, 1)` with `signal` added to the true class, then `K`
//!    standard-normal noise draws.
//! 3. Severity `s` turns clean logits `z` and noise `e` into
//!    `temperature_per_level^s * z + s * noise_sigma_per_level * e`, rounded
//!    to nine significant digits so the CSV form reads back bit-identical.
//!
//! Noise is drawn even at severity 0, so datasets that share a seed describe
//! the same underlying samples at different severities. `signal` is solved
//! numerically so that the clean top-1 accuracy equals `base_accuracy` in
//! expectation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::io::round_sig9;
use crate::types::{check_severity, LabeledSample, LogitVector};

pub const GENERATOR_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub k_classes: usize,
    pub n_samples: usize,
    pub base_accuracy: f64,
    pub severity: u8,
    /// Multiplier applied to clean logits once per severity level.
    pub temperature_per_level: f64,
    /// Standard deviation of additive logit noise, per severity level.
    pub noise_sigma_per_level: f64,
    /// Standard deviation of the clean per-class logits.
    pub logit_scale: f64,
    pub seed: u64,
    pub condition: String,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            k_classes: 10,
            n_samples: 5_000,
            base_accuracy: 0.9,
            severity: 0,
            temperature_per_level: 0.75,
            noise_sigma_per_level: 0.4,
            logit_scale: 3.5,
            seed: 0,
            condition: "clean".to_string(),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_classes < 2 {
            return Err(Error::invalid(format!(
                "k_classes must be >= 2, got {}",
                self.k_classes
            )));
        }
        if self.n_samples == 0 {
            return Err(Error::invalid("n_samples must be positive"));
        }
        let chance = 1.0 / self.k_classes as f64;
        if !(self.base_accuracy > chance && self.base_accuracy < 1.0) {
            return Err(Error::invalid(format!(
                "base_accuracy must lie in ({chance}, 1) for {} classes, got {}",
                self.k_classes, self.base_accuracy
            )));
        }
        check_severity(self.severity)?;
        if !(self.temperature_per_level > 0.0 && self.temperature_per_level.is_finite()) {
            return Err(Error::invalid("temperature_per_level must be positive"));
        }
        if !(self.noise_sigma_per_level >= 0.0 && self.noise_sigma_per_level.is_finite()) {
            return Err(Error::invalid("noise_sigma_per_level must be >= 0"));
        }
        if !(self.logit_scale > 0.0 && self.logit_scale.is_finite()) {
            return Err(Error::invalid("logit_scale must be positive"));
        }
        Ok(())
    }
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Expected top-1 accuracy when the true class logit leads the other `k - 1`
/// i.i.d. standard-normal logits by `gap` standard deviations:
/// `∫ φ(x) Φ(x + gap)^(k-1) dx`, by composite Simpson on [-12, 12].
fn expected_accuracy(gap: f64, k: usize) -> f64 {
    const STEPS: usize = 800;
    let (lo, hi) = (-12.0, 12.0);
    let h = (hi - lo) / STEPS as f64;
    let f = |x: f64| std_normal_pdf(x) * std_normal_cdf(x + gap).powi(k as i32 - 1);
    let interior: f64 = (1..STEPS)
        .map(|i| {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            w * f(lo + i as f64 * h)
        })
        .sum();
    (f(lo) + interior + f(hi)) * h / 3.0
}

/// Gap (in clean-logit standard deviations) giving the requested accuracy.
fn solve_gap(accuracy: f64, k: usize) -> f64 {
    let (mut lo, mut hi) = (0.0, 40.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if expected_accuracy(mid, k) < accuracy {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Zero-padded id shared by every severity of the same underlying sample.
pub fn sample_id(index: usize) -> String {
    format!("sample-{index:06}")
}

pub fn generate_dataset(config: &GeneratorConfig) -> Result<Vec<LabeledSample>> {
    config.validate()?;
    let k = config.k_classes;
    let signal = solve_gap(config.base_accuracy, k) * config.logit_scale;
    let level = f64::from(config.severity);
    let shrink = config
        .temperature_per_level
        .powi(i32::from(config.severity));
    let noise_sd = level * config.noise_sigma_per_level;

    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut samples = Vec::with_capacity(config.n_samples);
    let mut clean = vec![0.0; k];
    for i in 0..config.n_samples {
        let label = rng.random_range(0..k);
        for (c, z) in clean.iter_mut().enumerate() {
            let draw: f64 = rng.sample(StandardNormal);
            *z = config.logit_scale * draw + if c == label { signal } else { 0.0 };
        }
        let logits: Vec<f64> = clean
            .iter()
            .map(|&z| {
                let e: f64 = rng.sample(StandardNormal);
                round_sig9(shrink * z + noise_sd * e)
            })
            .collect();
        samples.push(LabeledSample::from_logits(
            sample_id(i),
            label,
            LogitVector::new(logits)?,
            config.condition.clone(),
            config.severity,
        )?);
    }
    Ok(samples)
}

/// Seeded uniform shuffle, then the first `n_cal` samples go to calibration.
pub fn exchangeable_split(
    samples: &[LabeledSample],
    n_cal: usize,
    seed: u64,
) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    if n_cal == 0 || n_cal >= samples.len() {
        return Err(Error::invalid(format!(
            "calibration size must be in 1..{}, got {n_cal}",
            samples.len()
        )));
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect();
    Ok((pick(&order[..n_cal]), pick(&order[n_cal..])))
}

/// Mixes a textual tag into a seed (FNV-1a over the tag, then SplitMix64).
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

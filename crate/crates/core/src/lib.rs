//! Dual-threshold conformal prediction.
//!
//! Two thresholds are calibrated on held-out classifier outputs:
//!
//! * a conformal threshold `q_conf` on the negative log-probability of the
//!   true label, giving prediction sets that contain the true label with
//!   probability at least `1 - alpha` under exchangeability, and
//! * an abstention threshold `q_abs` chosen on the ROC curve of those same
//!   scores by maximizing Youden's J, used to decline a prediction when the
//!   top-1 score is too high.
//!
//! The crate also provides the uncertainty metrics (normalized entropy,
//! confidence, margin, set size, coverage, abstention rate, detection AUC),
//! a seeded synthetic data generator with a severity-driven degradation
//! model, CSV/JSON file formats, and a sweep driver over condition x
//! severity grids. See `examples/` for one runnable program per capability.
//!
//! ```
//! use dual_threshold::{calibrate, evaluate_batch, metrics, GeneratorConfig, generate_dataset,
//!                      exchangeable_split};
//!
//! let data = generate_dataset(&GeneratorConfig { n_samples: 2_000, seed: 7, ..Default::default() })?;
//! let (cal, test) = exchangeable_split(&data, 1_000, 7)?;
//! let thresholds = calibrate(&cal, 0.1)?;
//! let records = evaluate_batch(&test, &thresholds)?;
//! assert!(metrics::empirical_coverage(&records)? > 0.85);
//! # Ok::<(), dual_threshold::Error>(())
//! ```

pub mod calibration;
pub mod commands;
pub mod datagen;
pub mod error;
pub mod io;
pub mod metrics;
pub mod prediction;
pub mod types;

pub use calibration::{
    abstention_threshold, calibrate, calibrate_with, conformal_threshold, roc_points,
    AbstainTarget, CalibratedThresholds, RocCurve, RocPoint,
};
pub use datagen::{exchangeable_split, generate_dataset, GeneratorConfig};
pub use error::{Error, Result};
pub use metrics::{summarize, EvaluationSummary};
pub use prediction::{
    abstain_decision, evaluate_batch, evaluate_sample, prediction_set, EvaluationRecord,
    PredictionSet,
};
pub use types::{
    nonconformity, softmax, LabeledSample, LogitVector, NonconformityScore, ProbabilityVector,
};

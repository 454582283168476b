//! Unsupervised post-hoc temperature calibration for post-trained language
//! models.
//!
//! A post-trained model (PoLM) is calibrated against its pre-trained
//! counterpart (PLM) using only exported per-layer option logits. Two
//! alignment signals are blended per sample:
//!
//! - confidence alignment: KL between the final-layer option distributions;
//! - process alignment: squared difference of the inferential stability
//!   entropy (ISE) computed over the layers after the peak divergence layer.
//!
//! The blend weight is the size of the peak jump in the layer-wise
//! Jensen-Shannon divergence between the two models. The result is a single
//! temperature that never changes the model's predictions.
//!
//! Module map:
//! - [`trace`]: trace data model, JSONL format, validation
//! - [`probkit`]: softmax, entropy, KL, JSD kernels
//! - [`drift`]: per-sample drift analysis (JSD trajectory, PDL, ISE)
//! - [`calibrate`]: losses, the scalar Adam optimizer, baselines
//! - [`metrics`]: ECE / MCE / ACE / Brier and reliability tables
//! - [`synth`]: seeded synthetic trace generator

pub mod calibrate;
pub mod drift;
pub mod error;
pub mod metrics;
pub mod probkit;
pub mod synth;
pub mod trace;

pub use calibrate::{
    apply_temperature, conf_loss, dual_loss, internal_consistency_confidence, optimize,
    process_loss, CalibrationResult, LayerFraction, LossBreakdown, Method, OptimizerConfig,
};
pub use drift::{analyze, DriftProfile, Regime};
pub use error::{Error, Result};
pub use metrics::{evaluate, BinRow, MetricsReport};
pub use probkit::LayerDistribution;
pub use synth::{generate, Preset, SynthConfig};
pub use trace::{load_traces, validate, write_traces, TracePair, TraceSet, Violation};

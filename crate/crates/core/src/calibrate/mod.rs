//! Temperature calibration: alignment losses, the scalar optimizer and the
//! logit-based baselines.

mod baselines;
mod loss;
mod method;
mod optimizer;

pub use baselines::{apply_temperature, internal_consistency_confidence, mean_cross_entropy};
pub use loss::{conf_loss, cross_entropy, dual_loss, process_loss, LossBreakdown};
pub use method::{LayerFraction, Method};
pub use optimizer::{
    central_difference, objective_value, optimize, CalibrationResult, OptimizerConfig, FD_STEP,
};

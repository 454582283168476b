use crate::drift::predicted_option;
use crate::error::{Error, Result};
use crate::probkit::{self, argmax, LayerDistribution};
use crate::trace::{TracePair, TraceSet};

use super::loss::cross_entropy;

/// Calibrated PoLM output: final logits softmaxed at `tau`. The argmax is
/// the same for every temperature.
pub fn apply_temperature(pair: &TracePair, tau: f64) -> Result<LayerDistribution> {
    probkit::softmax(pair.polm_final(), tau)
}

/// Fraction of PoLM layers whose argmax matches the final prediction.
/// The final layer always counts, so the result is positive.
pub fn internal_consistency_confidence(pair: &TracePair) -> f64 {
    let layers = &pair.polm_layers;
    if layers.is_empty() {
        return 0.0;
    }
    let final_pred = predicted_option(layers);
    let hits = layers
        .iter()
        .filter(|row| argmax(row) == final_pred)
        .count();
    hits as f64 / layers.len() as f64
}

/// Mean gold-label negative log-likelihood of the tempered PoLM.
pub fn mean_cross_entropy(set: &TraceSet, tau: f64) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptyTraceSet);
    }
    let mut total = 0.0;
    for pair in set {
        total += cross_entropy(pair, tau)?;
    }
    Ok(total / set.len() as f64)
}

//! Probability kernels: temperature softmax, entropy, KL and JS divergence.
//!
//! Entropy and KL are in nats. JSD uses base-2 logs so it is bounded by 1,
//! which keeps the per-sample mixing weight of the dual loss in `[0, 1]`.

use std::ops::Deref;

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-12;

/// A strictly positive probability vector that sums to one.
///
/// Produced by [`softmax`]; [`LayerDistribution::from_probs`] validates
/// hand-built vectors and rejects zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerDistribution(Vec<f64>);

impl LayerDistribution {
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty".into()));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p > 0.0 && **p <= 1.0))
        {
            return Err(Error::InvalidDistribution(format!(
                "entry {i} = {p} is not in (0, 1]"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("sums to {total}")));
        }
        Ok(Self(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Index of the largest probability, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    pub fn max_prob(&self) -> f64 {
        self.0[self.argmax()]
    }
}

impl Deref for LayerDistribution {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for LayerDistribution {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Index of the maximum element; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidTemperature(tau))
    }
}

fn check_logits(logits: &[f64]) -> Result<()> {
    if logits.is_empty() {
        return Err(Error::EmptyLogits);
    }
    match logits.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// `ln Σ exp(x_i / tau)` with max-shift stabilization.
pub fn log_sum_exp(logits: &[f64], tau: f64) -> Result<f64> {
    check_tau(tau)?;
    check_logits(logits)?;
    Ok(lse_unchecked(logits, tau))
}

fn lse_unchecked(logits: &[f64], tau: f64) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max) / tau;
    m + logits
        .iter()
        .map(|&z| (z / tau - m).exp())
        .sum::<f64>()
        .ln()
}

/// Temperature-scaled softmax, `exp(z_i/tau - m) / Σ_j exp(z_j/tau - m)`.
pub fn softmax(logits: &[f64], tau: f64) -> Result<LayerDistribution> {
    check_tau(tau)?;
    check_logits(logits)?;
    Ok(LayerDistribution(softmax_unchecked(logits, tau)))
}

pub(crate) fn softmax_unchecked(logits: &[f64], tau: f64) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max) / tau;
    let mut out: Vec<f64> = logits.iter().map(|&z| (z / tau - m).exp()).collect();
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    out
}

/// Log-softmax at temperature `tau`; used where probabilities can underflow.
pub fn log_softmax(logits: &[f64], tau: f64) -> Result<Vec<f64>> {
    check_tau(tau)?;
    check_logits(logits)?;
    let lse = lse_unchecked(logits, tau);
    Ok(logits.iter().map(|&z| z / tau - lse).collect())
}

/// Shannon entropy in nats.
pub fn entropy(dist: &LayerDistribution) -> f64 {
    entropy_of(dist)
}

pub(crate) fn entropy_of(probs: &[f64]) -> f64 {
    let h: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    h.max(0.0)
}

/// `KL(p ‖ q)` in nats. Both inputs are strictly positive by construction.
pub fn kl_divergence(p: &LayerDistribution, q: &LayerDistribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(kl_of(p, q))
}

fn kl_of(p: &[f64], q: &[f64]) -> f64 {
    let kl: f64 = p
        .iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum();
    kl.max(0.0)
}

/// Jensen-Shannon divergence in bits, in `[0, 1]`.
pub fn js_divergence(p: &LayerDistribution, q: &LayerDistribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(jsd_of(p, q))
}

pub(crate) fn jsd_of(p: &[f64], q: &[f64]) -> f64 {
    // Summed symmetrically per term so that JSD(p,q) and JSD(q,p) agree
    // to the last bit.
    let nats: f64 = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| {
            let m = 0.5 * (a + b);
            let ta = if a > 0.0 { a * (a / m).ln() } else { 0.0 };
            let tb = if b > 0.0 { b * (b / m).ln() } else { 0.0 };
            ta + tb
        })
        .sum::<f64>()
        * 0.5;
    (nats / std::f64::consts::LN_2).clamp(0.0, 1.0)
}

//! Mini-batch Adam on a single log-temperature.
//!
//! The temperature is parameterized as `tau = exp(theta)` so it stays
//! positive without projection. Gradients are central finite differences in
//! `theta`; the objective is a cheap scalar function of one variable.

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::kl_to_tempered;
use super::method::Method;
use crate::drift::{self, DriftProfile};
use crate::error::{Error, Result};
use crate::probkit;
use crate::trace::{TracePair, TraceSet};

/// Central-difference step on `theta = ln(tau)`.
pub const FD_STEP: f64 = 1e-4;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub tau_init: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 300,
            batch_size: 128,
            seed: 0,
            tau_init: 1.0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        if !(self.tau_init > 0.0 && self.tau_init.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "initial temperature must be positive, got {}",
                self.tau_init
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub method: Method,
    pub tau_star: f64,
    pub epochs: usize,
    pub seed: u64,
    pub final_loss: f64,
    /// Mean loss over the method's sample pool at the end of each epoch.
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
enum Objective {
    Conf,
    Process,
    Dual,
    CrossEntropy,
}

/// Everything about one sample the loss needs, precomputed once.
/// Only the PoLM side depends on the temperature.
struct Prepared {
    objective: Objective,
    target: Vec<f64>,
    polm_final: Vec<f64>,
    polm_trail: Vec<f64>,
    ise_plm: f64,
    weight: f64,
    label: usize,
}

impl Prepared {
    fn new(pair: &TracePair, profile: &DriftProfile, objective: Objective) -> Result<Self> {
        let target = probkit::softmax(pair.plm_final(), 1.0)?.into_vec();
        let polm_trail = pair.polm_layers[profile.pdl - 1..]
            .iter()
            .map(|row| row[profile.polm_pred])
            .collect();
        Ok(Self {
            objective,
            target,
            polm_final: pair.polm_final().to_vec(),
            polm_trail,
            ise_plm: profile.ise_plm,
            weight: profile.delta_jsd,
            label: pair.label.unwrap_or(0),
        })
    }

    fn loss(&self, tau: f64) -> Result<f64> {
        let conf = || kl_to_tempered(&self.target, &self.polm_final, tau);
        let process = || -> Result<f64> {
            let ise_f = drift::ise_of_trail(&self.polm_trail, tau)?;
            Ok((ise_f - self.ise_plm).powi(2))
        };
        match self.objective {
            Objective::Conf => conf(),
            Objective::Process => process(),
            Objective::Dual => Ok((1.0 - self.weight) * conf()? + self.weight * process()?),
            Objective::CrossEntropy => {
                let log_q = probkit::log_softmax(&self.polm_final, tau)?;
                Ok(-log_q[self.label])
            }
        }
    }
}

fn prepare(set: &TraceSet, method: Method) -> Result<Vec<Prepared>> {
    if set.is_empty() {
        return Err(Error::EmptyTraceSet);
    }
    if method.is_supervised() {
        if let Some(s) = set.first_unlabeled() {
            return Err(Error::MissingLabel(s.id.clone()));
        }
    }
    let mut pool = Vec::with_capacity(set.len());
    for pair in set {
        let profile = match method {
            Method::FixedLayer(frac) => drift::analyze_at_layer(pair, frac.layer(set.layer_count))?,
            _ => drift::analyze(pair)?,
        };
        let objective = match method {
            Method::DualAlign | Method::FixedLayer(_) => Some(Objective::Dual),
            Method::ConfOnly => Some(Objective::Conf),
            Method::ProcessOnly => Some(Objective::Process),
            Method::SimpleStratify if profile.agree => Some(Objective::Conf),
            Method::SimpleStratify => Some(Objective::Process),
            Method::Daca if profile.agree => Some(Objective::Conf),
            Method::Daca => None,
            Method::TsOracle => Some(Objective::CrossEntropy),
        };
        if let Some(objective) = objective {
            pool.push(Prepared::new(pair, &profile, objective)?);
        }
    }
    if pool.is_empty() {
        return Err(Error::NoAgreementSamples);
    }
    Ok(pool)
}

/// `(f(theta + h) - f(theta - h)) / 2h`.
pub fn central_difference(f: impl Fn(f64) -> Result<f64>, theta: f64, step: f64) -> Result<f64> {
    Ok((f(theta + step)? - f(theta - step)?) / (2.0 * step))
}

fn mean_loss(pool: &[Prepared], tau: f64) -> Result<f64> {
    let mut total = 0.0;
    for s in pool {
        total += s.loss(tau)?;
    }
    Ok(total / pool.len() as f64)
}

/// Learns a single temperature for `set` under `method`.
///
/// Each epoch reshuffles the sample pool with a ChaCha8 stream seeded from
/// `config.seed` and walks it in consecutive batches. Reductions run in pool
/// order, so a fixed seed reproduces the result bit for bit.
///
/// The supervised `ts-oracle` baseline always takes full-batch steps;
/// `batch_size` applies to the unsupervised methods.
pub fn optimize(
    set: &TraceSet,
    method: Method,
    config: &OptimizerConfig,
) -> Result<CalibrationResult> {
    config.validate()?;
    let pool = prepare(set, method)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut theta = config.tau_init.ln();
    let (mut m, mut v) = (0.0f64, 0.0f64);
    let mut step = 0i32;
    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = Vec::with_capacity(pool.len());
    let batch_size = if method.is_supervised() {
        pool.len()
    } else {
        config.batch_size
    };

    for epoch in 0..config.epochs {
        order.clear();
        order.extend(0..pool.len());
        order.shuffle(&mut rng);
        for batch in order.chunks(batch_size) {
            let mut grad = 0.0;
            for &i in batch {
                let s = &pool[i];
                grad += central_difference(|t| s.loss(t.exp()), theta, FD_STEP)?;
            }
            grad /= batch.len() as f64;
            if !grad.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite gradient at tau = {}",
                    theta.exp()
                )));
            }
            step += 1;
            m = BETA1 * m + (1.0 - BETA1) * grad;
            v = BETA2 * v + (1.0 - BETA2) * grad * grad;
            let m_hat = m / (1.0 - BETA1.powi(step));
            let v_hat = v / (1.0 - BETA2.powi(step));
            theta -= config.learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
        let loss = mean_loss(&pool, theta.exp())?;
        debug!(
            "{method} epoch {epoch}: tau = {:.6}, loss = {loss:.8}",
            theta.exp()
        );
        history.push(loss);
    }

    Ok(CalibrationResult {
        method,
        tau_star: theta.exp(),
        epochs: config.epochs,
        seed: config.seed,
        final_loss: history.last().copied().unwrap_or(f64::NAN),
        loss_history: history,
    })
}

/// Mean per-sample objective of `method` over its sample pool at a fixed
/// temperature. This is the quantity `optimize` descends.
pub fn objective_value(set: &TraceSet, method: Method, tau: f64) -> Result<f64> {
    probkit::check_tau(tau)?;
    mean_loss(&prepare(set, method)?, tau)
}

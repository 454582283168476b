//! Per-sample drift analysis between the reference and post-trained model.
//!
//! Layers are 1-based here (`1..=L`), matching how the peak divergence layer
//! is reported. Row `l - 1` of a logit matrix holds layer `l`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probkit::{self, argmax, check_tau};
use crate::trace::{TracePair, TraceSet};

/// Which drift regime a sample falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Final predictions agree; only confidence can have drifted.
    Confidence,
    /// Final predictions differ; the inference path diverged.
    Process,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftProfile {
    pub sample_id: String,
    /// JSD in bits between the two models at each layer `1..=L`.
    pub jsd_trajectory: Vec<f64>,
    /// Peak divergence layer, in `2..=L`.
    pub pdl: usize,
    /// Size of the peak JSD jump, clamped to `[0, 1]`.
    pub delta_jsd: f64,
    pub agree: bool,
    pub plm_pred: usize,
    pub polm_pred: usize,
    /// PLM stability entropy over layers `pdl..=L`, nats.
    pub ise_plm: f64,
}

impl DriftProfile {
    pub fn regime(&self) -> Regime {
        if self.agree {
            Regime::Confidence
        } else {
            Regime::Process
        }
    }
}

/// `d^l = JSD(softmax(plm_l), softmax(polm_l))` for every layer, at `tau = 1`.
pub fn jsd_trajectory(pair: &TracePair) -> Result<Vec<f64>> {
    if pair.plm_layers.len() != pair.polm_layers.len() {
        return Err(Error::LengthMismatch {
            left: pair.plm_layers.len(),
            right: pair.polm_layers.len(),
        });
    }
    pair.plm_layers
        .iter()
        .zip(&pair.polm_layers)
        .map(|(g, f)| {
            let p = probkit::softmax(g, 1.0)?;
            let q = probkit::softmax(f, 1.0)?;
            probkit::js_divergence(&p, &q)
        })
        .collect()
}

/// Layer with the largest JSD increase over its predecessor.
///
/// Returns `(pdl, delta)` with `pdl` 1-based in `2..=L`, earliest layer on
/// ties, and `delta` the increase clamped to `[0, 1]`.
pub fn find_pdl(trajectory: &[f64]) -> Result<(usize, f64)> {
    if trajectory.len() < 2 {
        return Err(Error::TrajectoryTooShort(trajectory.len()));
    }
    let mut best_layer = 2;
    let mut best_jump = trajectory[1] - trajectory[0];
    for (i, w) in trajectory.windows(2).enumerate().skip(1) {
        let jump = w[1] - w[0];
        if jump > best_jump {
            best_jump = jump;
            best_layer = i + 2;
        }
    }
    Ok((best_layer, best_jump.clamp(0.0, 1.0)))
}

/// JSD jump into `layer` (1-based, `>= 2`), clamped to `[0, 1]`.
pub fn jump_at(trajectory: &[f64], layer: usize) -> Result<f64> {
    check_layer(layer, trajectory.len())?;
    Ok((trajectory[layer - 1] - trajectory[layer - 2]).clamp(0.0, 1.0))
}

/// Final-layer argmax, lowest index on ties.
pub fn predicted_option(layers: &[Vec<f64>]) -> usize {
    layers.last().map_or(0, |row| argmax(row))
}

fn check_layer(pdl: usize, layer_count: usize) -> Result<()> {
    if (2..=layer_count).contains(&pdl) {
        Ok(())
    } else {
        Err(Error::LayerOutOfRange {
            layer: pdl,
            min: 2,
            max: layer_count,
        })
    }
}

/// Inferential stability entropy.
///
/// Takes the logit of the final prediction `pred` at each layer
/// `pdl..=L`, softmaxes that sequence over layers at temperature `tau` and
/// returns its entropy in nats. Low values mean conviction is concentrated
/// in a few layers.
pub fn ise(layers: &[Vec<f64>], pred: usize, pdl: usize, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    check_layer(pdl, layers.len())?;
    let trail: Vec<f64> = layers[pdl - 1..]
        .iter()
        .map(|row| {
            row.get(pred).copied().ok_or(Error::LabelOutOfRange {
                label: pred,
                options: row.len(),
            })
        })
        .collect::<Result<_>>()?;
    ise_of_trail(&trail, tau)
}

pub(crate) fn ise_of_trail(trail: &[f64], tau: f64) -> Result<f64> {
    let q = probkit::softmax(trail, tau)?;
    Ok(probkit::entropy(&q))
}

/// Full drift profile of one sample at `tau = 1`.
pub fn analyze(pair: &TracePair) -> Result<DriftProfile> {
    let trajectory = jsd_trajectory(pair)?;
    let (pdl, delta_jsd) = find_pdl(&trajectory)?;
    profile_at(pair, trajectory, pdl, delta_jsd)
}

/// Profile with the divergence layer forced to `pdl`; the weight is the
/// clamped JSD jump into that layer.
pub fn analyze_at_layer(pair: &TracePair, pdl: usize) -> Result<DriftProfile> {
    let trajectory = jsd_trajectory(pair)?;
    let delta = jump_at(&trajectory, pdl)?;
    profile_at(pair, trajectory, pdl, delta)
}

fn profile_at(
    pair: &TracePair,
    jsd_trajectory: Vec<f64>,
    pdl: usize,
    delta_jsd: f64,
) -> Result<DriftProfile> {
    let plm_pred = predicted_option(&pair.plm_layers);
    let polm_pred = predicted_option(&pair.polm_layers);
    let ise_plm = ise(&pair.plm_layers, plm_pred, pdl, 1.0)?;
    Ok(DriftProfile {
        sample_id: pair.id.clone(),
        jsd_trajectory,
        pdl,
        delta_jsd,
        agree: plm_pred == polm_pred,
        plm_pred,
        polm_pred,
        ise_plm,
    })
}

/// Profiles for a whole set, in set order.
pub fn analyze_set(set: &TraceSet) -> Result<Vec<DriftProfile>> {
    set.iter().map(analyze).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IseConfidenceRow {
    pub id: String,
    pub confidence: f64,
    pub ise_f: f64,
    pub ise_g: f64,
}

/// PoLM final confidence at `tau` next to both models' ISE, per sample.
pub fn ise_confidence_table(set: &TraceSet, tau: f64) -> Result<Vec<IseConfidenceRow>> {
    check_tau(tau)?;
    set.iter()
        .map(|pair| {
            let profile = analyze(pair)?;
            let confidence = probkit::softmax(pair.polm_final(), tau)?.max_prob();
            let ise_f = ise(&pair.polm_layers, profile.polm_pred, profile.pdl, tau)?;
            Ok(IseConfidenceRow {
                id: pair.id.clone(),
                confidence,
                ise_f,
                ise_g: profile.ise_plm,
            })
        })
        .collect()
}

pub fn write_profiles_jsonl(profiles: &[DriftProfile], w: &mut impl Write) -> Result<()> {
    for p in profiles {
        serde_json::to_writer(&mut *w, p)?;
        w.write_all(b"\n").map_err(|e| Error::io("<writer>", e))?;
    }
    Ok(())
}

/// CSV with header `id,confidence,ise_f,ise_g`.
pub fn write_ise_csv(rows: &[IseConfidenceRow], w: &mut impl Write) -> Result<()> {
    let io = |e| Error::io("<writer>", e);
    writeln!(w, "id,confidence,ise_f,ise_g").map_err(io)?;
    for r in rows {
        writeln!(
            w,
            "{},{:.6},{:.6},{:.6}",
            csv_field(&r.id),
            r.confidence,
            r.ise_f,
            r.ise_g
        )
        .map_err(io)?;
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

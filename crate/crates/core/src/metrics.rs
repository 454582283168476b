//! Calibration metrics and reliability tables.
//!
//! ECE, MCE and ACE are reported in percent. Bins are equal width,
//! left-closed and right-open, except the last bin which also holds 1.0.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::calibrate::apply_temperature;
use crate::error::{Error, Result};
use crate::probkit::check_tau;
use crate::trace::TraceSet;

/// One reliability-diagram bin. Statistics are `None` when the bin is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub mean_confidence: Option<f64>,
    pub accuracy: Option<f64>,
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ece: f64,
    pub mce: f64,
    pub ace: f64,
    pub brier: f64,
    pub accuracy: f64,
    pub n_samples: usize,
    pub n_bins: usize,
    pub ace_variant: String,
    pub bins: Vec<BinRow>,
}

pub const ACE_VARIANT: &str = "top-label equal-count ranges, unweighted mean";

fn check_pairs(confidences: &[f64], correct: &[bool]) -> Result<()> {
    if confidences.len() != correct.len() {
        return Err(Error::LengthMismatch {
            left: confidences.len(),
            right: correct.len(),
        });
    }
    if confidences.is_empty() {
        return Err(Error::InvalidInput("no samples to bin".into()));
    }
    if let Some(i) = confidences.iter().position(|c| !(0.0..=1.0).contains(c)) {
        return Err(Error::InvalidInput(format!(
            "confidence {} at position {i} is outside [0, 1]",
            confidences[i]
        )));
    }
    Ok(())
}

/// Bin index for a confidence in `[0, 1]` with `m` equal-width bins.
pub fn bin_index(confidence: f64, m: usize) -> usize {
    ((confidence * m as f64).floor() as usize).min(m - 1)
}

pub fn reliability_bins(confidences: &[f64], correct: &[bool], m: usize) -> Result<Vec<BinRow>> {
    check_pairs(confidences, correct)?;
    if m == 0 {
        return Err(Error::InvalidInput("bin count must be at least 1".into()));
    }
    let mut count = vec![0usize; m];
    let mut conf_sum = vec![0.0f64; m];
    let mut hits = vec![0usize; m];
    for (&c, &ok) in confidences.iter().zip(correct) {
        let b = bin_index(c, m);
        count[b] += 1;
        conf_sum[b] += c;
        hits[b] += usize::from(ok);
    }
    Ok((0..m)
        .map(|b| {
            let n = count[b];
            let (mean_confidence, accuracy) = if n == 0 {
                (None, None)
            } else {
                (
                    Some(conf_sum[b] / n as f64),
                    Some(hits[b] as f64 / n as f64),
                )
            };
            BinRow {
                lower: b as f64 / m as f64,
                upper: (b + 1) as f64 / m as f64,
                count: n,
                mean_confidence,
                accuracy,
                gap: mean_confidence.zip(accuracy).map(|(c, a)| (a - c).abs()),
            }
        })
        .collect())
}

/// Expected calibration error over a bin table with `k` total samples.
pub fn ece(bins: &[BinRow], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidInput("ECE needs at least one sample".into()));
    }
    let total: f64 = bins
        .iter()
        .filter_map(|b| b.gap.map(|g| b.count as f64 / k as f64 * g))
        .sum();
    Ok(100.0 * total)
}

/// Maximum gap over non-empty bins.
pub fn mce(bins: &[BinRow]) -> Result<f64> {
    bins.iter()
        .filter_map(|b| b.gap)
        .reduce(f64::max)
        .map(|g| 100.0 * g)
        .ok_or_else(|| Error::InvalidInput("all bins are empty".into()))
}

/// Adaptive calibration error over `r` equal-count confidence ranges.
///
/// Samples are stably sorted by confidence and cut into `r` contiguous
/// groups whose sizes differ by at most one, larger groups first.
pub fn ace(confidences: &[f64], correct: &[bool], r: usize) -> Result<f64> {
    check_pairs(confidences, correct)?;
    if r == 0 || confidences.len() < r {
        return Err(Error::InvalidInput(format!(
            "{} samples cannot fill {r} ranges",
            confidences.len()
        )));
    }
    let mut order: Vec<usize> = (0..confidences.len()).collect();
    order.sort_by(|&a, &b| confidences[a].total_cmp(&confidences[b]));

    let n = order.len();
    let (base, extra) = (n / r, n % r);
    let mut start = 0;
    let mut total = 0.0;
    for g in 0..r {
        let size = base + usize::from(g < extra);
        let group = &order[start..start + size];
        start += size;
        let conf = group.iter().map(|&i| confidences[i]).sum::<f64>() / size as f64;
        let acc = group.iter().filter(|&&i| correct[i]).count() as f64 / size as f64;
        total += (acc - conf).abs();
    }
    Ok(100.0 * total / r as f64)
}

/// Multiclass Brier score: mean of `Σ_i (p_i - 1[i = label])^2`.
pub fn brier<D: AsRef<[f64]>>(dists: &[D], labels: &[usize]) -> Result<f64> {
    if dists.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: dists.len(),
            right: labels.len(),
        });
    }
    if dists.is_empty() {
        return Err(Error::InvalidInput(
            "Brier score needs at least one sample".into(),
        ));
    }
    let mut total = 0.0;
    for (d, &label) in dists.iter().zip(labels) {
        let p = d.as_ref();
        if label >= p.len() {
            return Err(Error::LabelOutOfRange {
                label,
                options: p.len(),
            });
        }
        total += p
            .iter()
            .enumerate()
            .map(|(i, &pi)| {
                let y = if i == label { 1.0 } else { 0.0 };
                (pi - y).powi(2)
            })
            .sum::<f64>();
    }
    Ok(total / dists.len() as f64)
}

/// Scores the PoLM at temperature `tau` against gold labels.
pub fn evaluate(set: &TraceSet, tau: f64, m: usize) -> Result<MetricsReport> {
    check_tau(tau)?;
    if set.is_empty() {
        return Err(Error::EmptyTraceSet);
    }
    let mut dists = Vec::with_capacity(set.len());
    let mut labels = Vec::with_capacity(set.len());
    let mut confidences = Vec::with_capacity(set.len());
    let mut correct = Vec::with_capacity(set.len());
    for pair in set {
        let label = pair
            .label
            .ok_or_else(|| Error::MissingLabel(pair.id.clone()))?;
        let dist = apply_temperature(pair, tau)?;
        let pred = dist.argmax();
        confidences.push(dist[pred]);
        correct.push(pred == label);
        labels.push(label);
        dists.push(dist);
    }
    let bins = reliability_bins(&confidences, &correct, m)?;
    let k = confidences.len();
    Ok(MetricsReport {
        ece: ece(&bins, k)?,
        mce: mce(&bins)?,
        ace: ace(&confidences, &correct, m.min(k))?,
        brier: brier(&dists, &labels)?,
        accuracy: correct.iter().filter(|&&c| c).count() as f64 / k as f64,
        n_samples: k,
        n_bins: m,
        ace_variant: ACE_VARIANT.to_string(),
        bins,
    })
}

/// Writes `lower,upper,count,mean_confidence,accuracy,gap` with six
/// fractional digits. Empty bins leave the three statistics blank.
pub fn write_reliability_csv(bins: &[BinRow], w: &mut impl Write) -> Result<()> {
    let io = |e| Error::io("<writer>", e);
    writeln!(w, "lower,upper,count,mean_confidence,accuracy,gap").map_err(io)?;
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for b in bins {
        writeln!(
            w,
            "{:.6},{:.6},{},{},{},{}",
            b.lower,
            b.upper,
            b.count,
            fmt(b.mean_confidence),
            fmt(b.accuracy),
            fmt(b.gap)
        )
        .map_err(io)?;
    }
    Ok(())
}

/// Logit-gap confidence proxy `sigmoid(gap / tau)`, where
/// `gap = z_top - ln Σ_{j != top} exp(z_j)`.
///
/// At `tau = 1` this equals the maximum softmax probability exactly.
pub fn logit_gap_confidence(final_logits: &[f64], tau: f64) -> Result<f64> {
    check_tau(tau)?;
    if final_logits.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "logit gap needs at least 2 options, got {}",
            final_logits.len()
        )));
    }
    if let Some(index) = final_logits.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let top = crate::probkit::argmax(final_logits);
    let rest_max = final_logits
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != top)
        .map(|(_, &z)| z)
        .fold(f64::NEG_INFINITY, f64::max);
    let rest_lse = rest_max
        + final_logits
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != top)
            .map(|(_, &z)| (z - rest_max).exp())
            .sum::<f64>()
            .ln();
    let gap = final_logits[top] - rest_lse;
    Ok(sigmoid(gap / tau))
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

//! Naive reference implementations used to check the library. Written
//! directly from the definitions, with loops instead of shared helpers.

#![allow(clippy::needless_range_loop)]

pub fn softmax(z: &[f64], tau: f64) -> Vec<f64> {
    let mut hi = f64::NEG_INFINITY;
    for &v in z {
        if v / tau > hi {
            hi = v / tau;
        }
    }
    let mut e = Vec::new();
    let mut total = 0.0;
    for &v in z {
        let x = (v / tau - hi).exp();
        e.push(x);
        total += x;
    }
    for x in e.iter_mut() {
        *x /= total;
    }
    e
}

fn log_softmax(z: &[f64], tau: f64) -> Vec<f64> {
    let mut hi = f64::NEG_INFINITY;
    for &v in z {
        hi = hi.max(v / tau);
    }
    let mut total = 0.0;
    for &v in z {
        total += (v / tau - hi).exp();
    }
    let log_z = hi + total.ln();
    z.iter().map(|&v| v / tau - log_z).collect()
}

pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        if p[i] > 0.0 {
            s += p[i] * (p[i] / q[i]).ln();
        }
    }
    s
}

pub fn jsd_bits(p: &[f64], q: &[f64]) -> f64 {
    let m: Vec<f64> = (0..p.len()).map(|i| 0.5 * (p[i] + q[i])).collect();
    (0.5 * kl(p, &m) + 0.5 * kl(q, &m)) / std::f64::consts::LN_2
}

pub fn entropy(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &x in p {
        if x > 0.0 {
            h -= x * x.ln();
        }
    }
    h
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

pub fn ise(trail: &[f64], tau: f64) -> f64 {
    entropy(&softmax(trail, tau))
}

/// 1-based peak divergence layer and the (clamped) jump there.
pub fn pdl(plm: &[Vec<f64>], polm: &[Vec<f64>]) -> (usize, f64) {
    let d: Vec<f64> = (0..plm.len())
        .map(|l| jsd_bits(&softmax(&plm[l], 1.0), &softmax(&polm[l], 1.0)))
        .collect();
    let mut best = 2;
    let mut jump = d[1] - d[0];
    for l in 3..=d.len() {
        let j = d[l - 1] - d[l - 2];
        if j > jump {
            best = l;
            jump = j;
        }
    }
    (best, jump.clamp(0.0, 1.0))
}

/// Everything about a sample that does not depend on the temperature.
pub struct Sample {
    target: Vec<f64>,
    polm_final: Vec<f64>,
    polm_trail: Vec<f64>,
    ise_plm: f64,
    weight: f64,
    pub agree: bool,
    label: Option<usize>,
}

impl Sample {
    pub fn new(plm: &[Vec<f64>], polm: &[Vec<f64>], label: Option<usize>) -> Self {
        let l = plm.len();
        let (peak, weight) = pdl(plm, polm);
        let plm_pred = argmax(&plm[l - 1]);
        let polm_pred = argmax(&polm[l - 1]);
        let plm_trail: Vec<f64> = (peak - 1..l).map(|i| plm[i][plm_pred]).collect();
        let polm_trail: Vec<f64> = (peak - 1..l).map(|i| polm[i][polm_pred]).collect();
        Sample {
            target: softmax(&plm[l - 1], 1.0),
            polm_final: polm[l - 1].clone(),
            ise_plm: ise(&plm_trail, 1.0),
            polm_trail,
            weight,
            agree: plm_pred == polm_pred,
            label,
        }
    }

    pub fn conf_loss(&self, tau: f64) -> f64 {
        let log_q = log_softmax(&self.polm_final, tau);
        let mut s = 0.0;
        for i in 0..self.target.len() {
            if self.target[i] > 0.0 {
                s += self.target[i] * (self.target[i].ln() - log_q[i]);
            }
        }
        s
    }

    pub fn dual_loss(&self, tau: f64) -> f64 {
        let process = (ise(&self.polm_trail, tau) - self.ise_plm).powi(2);
        (1.0 - self.weight) * self.conf_loss(tau) + self.weight * process
    }

    pub fn cross_entropy(&self, tau: f64) -> f64 {
        -log_softmax(&self.polm_final, tau)[self.label.expect("labeled")]
    }
}

/// Grid point in `[lo, hi]` with spacing `step` minimizing `f`; earliest wins.
pub fn grid_argmin(lo: f64, hi: f64, step: f64, f: impl Fn(f64) -> f64) -> f64 {
    let n = ((hi - lo) / step).round() as usize;
    let mut best = (lo, f64::INFINITY);
    for i in 0..=n {
        let tau = lo + i as f64 * step;
        let v = f(tau);
        if v < best.1 {
            best = (tau, v);
        }
    }
    best.0
}

fn in_bin(c: f64, b: usize, m: usize) -> bool {
    let lo = b as f64 / m as f64;
    let hi = (b + 1) as f64 / m as f64;
    if b == m - 1 {
        c >= lo && c <= 1.0
    } else {
        c >= lo && c < hi
    }
}

/// Per-bin (count, |acc - conf|) by rescanning all samples for each bin.
fn bin_gaps(conf: &[f64], correct: &[bool], m: usize) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for b in 0..m {
        let mut n = 0;
        let mut c_sum = 0.0;
        let mut hits = 0.0;
        for i in 0..conf.len() {
            if in_bin(conf[i], b, m) {
                n += 1;
                c_sum += conf[i];
                if correct[i] {
                    hits += 1.0;
                }
            }
        }
        if n > 0 {
            out.push((n, (hits / n as f64 - c_sum / n as f64).abs()));
        }
    }
    out
}

pub fn ece(conf: &[f64], correct: &[bool], m: usize) -> f64 {
    let k = conf.len() as f64;
    100.0
        * bin_gaps(conf, correct, m)
            .iter()
            .map(|&(n, g)| n as f64 / k * g)
            .sum::<f64>()
}

pub fn mce(conf: &[f64], correct: &[bool], m: usize) -> f64 {
    100.0
        * bin_gaps(conf, correct, m)
            .iter()
            .map(|&(_, g)| g)
            .fold(0.0, f64::max)
}

/// Equal-count ranges over the confidence order; the first `k % r` ranges
/// hold one extra sample.
pub fn ace(conf: &[f64], correct: &[bool], r: usize) -> f64 {
    let k = conf.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| conf[a].partial_cmp(&conf[b]).unwrap());
    let mut total = 0.0;
    for g in 0..r {
        let start = g * (k / r) + g.min(k % r);
        let end = (g + 1) * (k / r) + (g + 1).min(k % r);
        let mut c_sum = 0.0;
        let mut hits = 0.0;
        for &i in &order[start..end] {
            c_sum += conf[i];
            if correct[i] {
                hits += 1.0;
            }
        }
        let n = (end - start) as f64;
        total += (hits / n - c_sum / n).abs();
    }
    100.0 * total / r as f64
}

pub fn brier(dists: &[Vec<f64>], labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (p, &y) in dists.iter().zip(labels) {
        for (i, &pi) in p.iter().enumerate() {
            let t = if i == y { 1.0 } else { 0.0 };
            total += (pi - t) * (pi - t);
        }
    }
    total / dists.len() as f64
}

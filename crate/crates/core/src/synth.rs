//! Seeded synthetic traces with planted drift.
//!
//! The generator uses `ChaCha8Rng::seed_from_u64(seed)` and draws per sample,
//! in id order:
//!
//! 1. final PLM logits `z ~ N(0, 1.5^2)`, one per option;
//! 2. intermediate PLM rows `l = 1..L-1`: `(l / L) * z + N(0, noise_sigma^2)`
//!    (row `L` is `z` itself);
//! 3. the gold label from `softmax(z)`, so the PLM is calibrated in
//!    expectation;
//! 4. for `mixed`, a fair coin choosing the regime;
//! 5. for process drift, the option swapped with the PLM's top choice.
//!
//! Regimes:
//! - confidence drift: PoLM rows equal PLM rows except the last, which is
//!   `scale_c * z`. Predictions agree and the optimal temperature is
//!   `scale_c`.
//! - process drift: from `spike_layer` on, the PoLM swaps the PLM top option
//!   with another option and adds `PROCESS_MARGIN` to it. The final
//!   predictions disagree and the JSD jumps at `spike_layer`.

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probkit::{argmax, softmax_unchecked};
use crate::trace::{TracePair, TraceSet};

/// Standard deviation of the final PLM logits.
pub const FINAL_LOGIT_SIGMA: f64 = 1.5;
/// Logit bonus given to the flipped option in process-drift samples.
pub const PROCESS_MARGIN: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    ConfidenceDrift,
    ProcessDrift,
    Mixed,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "confidence-drift" => Ok(Preset::ConfidenceDrift),
            "process-drift" => Ok(Preset::ProcessDrift),
            "mixed" => Ok(Preset::Mixed),
            other => Err(Error::InvalidConfig(format!("unknown preset '{other}'"))),
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Preset::ConfidenceDrift => "confidence-drift",
            Preset::ProcessDrift => "process-drift",
            Preset::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub preset: Preset,
    pub n: usize,
    pub layers: usize,
    pub options: usize,
    pub scale_c: f64,
    pub spike_layer: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            preset: Preset::Mixed,
            n: 1000,
            layers: 12,
            options: 4,
            scale_c: 2.5,
            spike_layer: 7,
            noise_sigma: 0.05,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n < 1 {
            return fail("n must be at least 1".into());
        }
        if self.layers < 4 {
            return fail(format!("layers must be at least 4, got {}", self.layers));
        }
        if self.options < 2 {
            return fail(format!("options must be at least 2, got {}", self.options));
        }
        if !(self.scale_c > 0.0 && self.scale_c.is_finite()) {
            return fail(format!("scale_c must be positive, got {}", self.scale_c));
        }
        if !(2..=self.layers).contains(&self.spike_layer) {
            return fail(format!(
                "spike_layer {} outside 2..={}",
                self.spike_layer, self.layers
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return fail(format!(
                "noise_sigma must be non-negative, got {}",
                self.noise_sigma
            ));
        }
        Ok(())
    }
}

pub fn option_names(count: usize) -> Vec<String> {
    (0..count)
        .map(|i| {
            if count <= 26 {
                ((b'A' + i as u8) as char).to_string()
            } else {
                format!("O{i}")
            }
        })
        .collect()
}

pub fn generate(config: &SynthConfig) -> Result<TraceSet> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let final_dist = Normal::new(0.0, FINAL_LOGIT_SIGMA).expect("valid sigma");
    let noise = Normal::new(0.0, config.noise_sigma).expect("validated sigma");
    let names = option_names(config.options);
    let l_count = config.layers;
    let width = (config.n.max(2) - 1).to_string().len().max(5);

    let mut samples = Vec::with_capacity(config.n);
    for i in 0..config.n {
        let z: Vec<f64> = (0..config.options)
            .map(|_| final_dist.sample(&mut rng))
            .collect();
        let mut plm: Vec<Vec<f64>> = (1..l_count)
            .map(|l| {
                let frac = l as f64 / l_count as f64;
                z.iter()
                    .map(|&v| frac * v + noise.sample(&mut rng))
                    .collect()
            })
            .collect();
        plm.push(z.clone());

        let weights = WeightedIndex::new(softmax_unchecked(&z, 1.0)).expect("positive weights");
        let label = weights.sample(&mut rng);

        let process = match config.preset {
            Preset::ConfidenceDrift => false,
            Preset::ProcessDrift => true,
            Preset::Mixed => rng.random_bool(0.5),
        };

        let mut polm = plm.clone();
        if process {
            let top = argmax(&z);
            let mut other = rng.random_range(0..config.options - 1);
            if other >= top {
                other += 1;
            }
            for row in &mut polm[config.spike_layer - 1..] {
                row.swap(top, other);
                row[other] += PROCESS_MARGIN;
            }
        } else {
            let last = polm.last_mut().expect("at least 4 layers");
            for v in last.iter_mut() {
                *v *= config.scale_c;
            }
        }

        samples.push(TracePair {
            id: format!("s{i:0width$}"),
            option_names: names.clone(),
            label: Some(label),
            plm_layers: plm,
            polm_layers: polm,
        });
    }
    TraceSet::new(samples)
}

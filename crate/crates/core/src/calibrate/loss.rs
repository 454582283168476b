use serde::{Deserialize, Serialize};

use crate::drift::{self, DriftProfile};
use crate::error::{Error, Result};
use crate::probkit::{self, check_tau};
use crate::trace::TracePair;

/// Per-sample pieces of the dual objective at one temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// `KL(p_g ‖ p_f(tau))`, nats.
    pub conf_loss: f64,
    /// `(ISE_f(tau) - ISE_g)^2`, nats².
    pub process_loss: f64,
    pub weight: f64,
    pub dual_loss: f64,
}

impl LossBreakdown {
    pub fn new(conf_loss: f64, process_loss: f64, weight: f64) -> Self {
        Self {
            conf_loss,
            process_loss,
            weight,
            dual_loss: (1.0 - weight) * conf_loss + weight * process_loss,
        }
    }
}

/// KL from the PLM's final distribution to the tempered PoLM final
/// distribution, in nats.
pub fn conf_loss(pair: &TracePair, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let target = probkit::softmax(pair.plm_final(), 1.0)?;
    kl_to_tempered(&target, pair.polm_final(), tau)
}

pub(crate) fn kl_to_tempered(target: &[f64], logits: &[f64], tau: f64) -> Result<f64> {
    if target.len() != logits.len() {
        return Err(Error::LengthMismatch {
            left: target.len(),
            right: logits.len(),
        });
    }
    // log-space so saturated PoLM logits cannot produce ln(0)
    let log_q = probkit::log_softmax(logits, tau)?;
    let kl: f64 = target
        .iter()
        .zip(&log_q)
        .map(|(&p, &lq)| p * (p.ln() - lq))
        .sum();
    Ok(kl.max(0.0))
}

/// Squared gap between the tempered PoLM stability entropy and the PLM's,
/// both measured from the profile's divergence layer.
pub fn process_loss(pair: &TracePair, profile: &DriftProfile, tau: f64) -> Result<f64> {
    let ise_f = drift::ise(&pair.polm_layers, profile.polm_pred, profile.pdl, tau)?;
    Ok((ise_f - profile.ise_plm).powi(2))
}

/// Confidence and process losses blended by the profile's JSD jump.
pub fn dual_loss(pair: &TracePair, profile: &DriftProfile, tau: f64) -> Result<LossBreakdown> {
    let conf = conf_loss(pair, tau)?;
    let process = process_loss(pair, profile, tau)?;
    Ok(LossBreakdown::new(conf, process, profile.delta_jsd))
}

/// Negative log-likelihood of the gold label under the tempered PoLM final
/// distribution.
pub fn cross_entropy(pair: &TracePair, tau: f64) -> Result<f64> {
    let label = pair
        .label
        .ok_or_else(|| Error::MissingLabel(pair.id.clone()))?;
    let log_q = probkit::log_softmax(pair.polm_final(), tau)?;
    log_q
        .get(label)
        .map(|lq| -lq)
        .ok_or(Error::LabelOutOfRange {
            label,
            options: log_q.len(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::analyze;
    use crate::trace::fixtures::pair;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn conf_loss_examples() {
        let same = pair("a", vec![vec![0.2, 1.0]; 2], vec![vec![0.2, 1.0]; 2], None);
        assert!(conf_loss(&same, 1.0).unwrap() < 1e-15);

        let l3 = 3f64.ln();
        let p = pair(
            "b",
            vec![vec![0.0, 0.0]; 2],
            vec![vec![0.0, 0.0], vec![l3, 0.0]],
            None,
        );
        assert_abs_diff_eq!(
            conf_loss(&p, 1.0).unwrap(),
            0.143_841_036_225_890_46,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(conf_loss(&p, 1e6).unwrap(), 0.0, epsilon = 1e-5);
        assert!(matches!(
            conf_loss(&p, 0.0),
            Err(Error::InvalidTemperature(_))
        ));
    }

    #[test]
    fn process_loss_examples() {
        // post-PDL window is layers 2..=3; polm predicts option 0 with trail [1, 0]
        let plm = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]];
        let polm = vec![vec![0.0, 0.0], vec![1.0, -5.0], vec![0.0, -5.0]];
        let p = pair("c", plm, polm, None);
        let mut prof = analyze(&p).unwrap();
        prof.pdl = 2;
        prof.ise_plm = std::f64::consts::LN_2;
        prof.polm_pred = 0;
        let expected = (0.582_203_108_888_217_9 - std::f64::consts::LN_2).powi(2);
        assert_abs_diff_eq!(
            process_loss(&p, &prof, 1.0).unwrap(),
            expected,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            process_loss(&p, &prof, 1.0).unwrap(),
            0.012_309,
            epsilon = 1e-6
        );
        assert!(process_loss(&p, &prof, 1e6).unwrap() < 1e-12);

        // ISE_f hits ISE_g exactly when the PoLM trail equals the PLM trail
        let m = vec![vec![0.3, 0.0], vec![1.0, 0.0], vec![2.5, 0.0]];
        let q = pair("d", m.clone(), m, None);
        let prof = analyze(&q).unwrap();
        assert_eq!(process_loss(&q, &prof, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn dual_loss_weights() {
        let b = LossBreakdown::new(0.2, 0.1, 0.3);
        assert_abs_diff_eq!(b.dual_loss, 0.17, epsilon = 1e-15);
        assert_eq!(LossBreakdown::new(0.2, 0.1, 0.0).dual_loss, 0.2);
        assert_eq!(LossBreakdown::new(0.2, 0.1, 1.0).dual_loss, 0.1);

        let p = pair(
            "e",
            vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![1.0, 0.0]],
            vec![vec![0.0, 0.0], vec![0.0, 2.0], vec![0.0, 3.0]],
            None,
        );
        let prof = analyze(&p).unwrap();
        let b = dual_loss(&p, &prof, 1.7).unwrap();
        assert_eq!(b.weight, prof.delta_jsd);
        assert_eq!(b.conf_loss, conf_loss(&p, 1.7).unwrap());
        assert_eq!(b.process_loss, process_loss(&p, &prof, 1.7).unwrap());
    }

    #[test]
    fn cross_entropy_needs_label() {
        let p = pair("f", vec![vec![0.0, 0.0]; 2], vec![vec![0.0, 0.0]; 2], None);
        assert!(matches!(cross_entropy(&p, 1.0), Err(Error::MissingLabel(id)) if id == "f"));
        let p = pair(
            "g",
            vec![vec![0.0, 0.0]; 2],
            vec![vec![0.0, 0.0]; 2],
            Some(1),
        );
        assert_abs_diff_eq!(
            cross_entropy(&p, 1.0).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
    }

    proptest! {
        #[test]
        fn dual_between_components(
            conf in 0.0f64..5.0, process in 0.0f64..5.0, weight in 0.0f64..=1.0
        ) {
            let b = LossBreakdown::new(conf, process, weight);
            prop_assert!(b.dual_loss >= conf.min(process) - 1e-12);
            prop_assert!(b.dual_loss <= conf.max(process) + 1e-12);
        }

        #[test]
        fn dual_between_components_on_traces(
            rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 3..8),
            scale in 0.5f64..4.0,
            tau in 0.1f64..10.0,
        ) {
            let polm: Vec<Vec<f64>> = rows.iter().rev().map(|r| r.iter().map(|v| v * scale).collect()).collect();
            let p = pair("h", rows, polm, None);
            let prof = analyze(&p).unwrap();
            let b = dual_loss(&p, &prof, tau).unwrap();
            prop_assert!(b.dual_loss >= b.conf_loss.min(b.process_loss) - 1e-12);
            prop_assert!(b.dual_loss <= b.conf_loss.max(b.process_loss) + 1e-12);
            let recomposed = (1.0 - b.weight) * b.conf_loss + b.weight * b.process_loss;
            prop_assert!((b.dual_loss - recomposed).abs() < 1e-12);
        }
    }
}

use dualign::calibrate::{optimize, Method, OptimizerConfig};
use dualign::drift::{analyze_set, Regime};
use dualign::metrics::evaluate;
use dualign::synth::{generate, Preset, SynthConfig};
use dualign::trace::{load_traces, validate, write_traces};
use dualign::Error;
use proptest::prelude::*;

fn quick() -> OptimizerConfig {
    OptimizerConfig {
        epochs: 60,
        ..OptimizerConfig::default()
    }
}

#[test]
fn synth_to_calibrated_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traces.jsonl");
    let set = generate(&SynthConfig {
        preset: Preset::ConfidenceDrift,
        n: 400,
        ..SynthConfig::default()
    })
    .unwrap();
    write_traces(&set, &path).unwrap();
    let loaded = load_traces(&path).unwrap();
    assert_eq!(loaded, set);
    assert!(validate(&loaded).is_empty());

    let result = optimize(&loaded, Method::DualAlign, &OptimizerConfig::default()).unwrap();
    assert!((result.tau_star - 2.5).abs() < 0.05, "{}", result.tau_star);
    let before = evaluate(&loaded, 1.0, 10).unwrap();
    let after = evaluate(&loaded, result.tau_star, 10).unwrap();
    assert!(after.ece < before.ece);
    assert_eq!(after.accuracy, before.accuracy);
    assert!(after.brier < before.brier);
}

#[test]
fn regimes_follow_the_preset() {
    let set = generate(&SynthConfig {
        n: 300,
        ..SynthConfig::default()
    })
    .unwrap();
    for profile in analyze_set(&set).unwrap() {
        match profile.regime() {
            Regime::Confidence => assert_eq!(profile.pdl, 12, "{}", profile.sample_id),
            Regime::Process => assert_eq!(profile.pdl, 7, "{}", profile.sample_id),
        }
    }
}

#[test]
fn every_method_runs_on_mixed_traces() {
    let set = generate(&SynthConfig {
        n: 200,
        ..SynthConfig::default()
    })
    .unwrap();
    for method in Method::ALL {
        let r = optimize(&set, method, &quick()).unwrap();
        assert!(r.tau_star > 0.0 && r.tau_star.is_finite(), "{method}");
        assert_eq!(r.loss_history.len(), 60);
    }
}

#[test]
fn daca_needs_agreement() {
    let set = generate(&SynthConfig {
        preset: Preset::ProcessDrift,
        n: 30,
        ..SynthConfig::default()
    })
    .unwrap();
    assert!(matches!(
        optimize(&set, Method::Daca, &quick()),
        Err(Error::NoAgreementSamples)
    ));
}

#[test]
fn hand_written_file_loads() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    std::fs::write(
        &path,
        concat!(
            r#"{"id":"q1","options":["A","B"],"label":0,"plm":{"layers":[[0,0],[1,0]]},"polm":{"layers":[[0,0],[3,0]]}}"#,
            "\n\n",
            r#"{"id":"q2","options":["A","B"],"plm":{"layers":[[0,1],[0,2]]},"polm":{"layers":[[0,1],[2,0]]}}"#,
            "\n"
        ),
    )
    .unwrap();
    let set = load_traces(&path).unwrap();
    assert_eq!(set.len(), 2);
    assert_eq!(set.layer_count, 2);
    assert_eq!(set.samples[1].label, None);
    assert_eq!(set.first_unlabeled().map(|p| p.id.as_str()), Some("q2"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn jsonl_round_trip_is_exact(
        seed in any::<u64>(),
        n in 1usize..20,
        layers in 4usize..10,
        options in 2usize..6,
        noise in 0.0f64..0.5,
        preset in prop_oneof![
            Just(Preset::ConfidenceDrift),
            Just(Preset::ProcessDrift),
            Just(Preset::Mixed),
        ],
    ) {
        let set = generate(&SynthConfig {
            preset, n, layers, options, noise_sigma: noise, seed,
            spike_layer: layers / 2 + 1,
            ..SynthConfig::default()
        }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        write_traces(&set, &path).unwrap();
        let back = load_traces(&path).unwrap();
        prop_assert_eq!(&back, &set);
        let again = dir.path().join("r2.jsonl");
        write_traces(&back, &again).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }
}

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use dualign::calibrate::{apply_temperature, optimize, CalibrationResult, Method, OptimizerConfig};
use dualign::drift::{analyze_set, ise_confidence_table, write_ise_csv, write_profiles_jsonl};
use dualign::metrics::{evaluate, write_reliability_csv, MetricsReport};
use dualign::synth::{generate, Preset, SynthConfig};
use dualign::trace::{load_traces, write_traces_to, TraceSet};
use log::info;
use serde::Serialize;

use crate::args::{required, AnalyzeArgs, CalibrateArgs, EvalArgs, FileConfig, SynthArgs};
use crate::manifest::RunManifest;
use crate::InvariantViolation;

const DEFAULT_BINS: usize = 10;

/// `report.json` -> `report.<suffix>`
fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    out.with_extension(suffix)
}

fn write_file(path: &Path, fill: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    fill(&mut w)?;
    w.flush()
        .with_context(|| format!("writing {}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

fn load(path: &Path) -> Result<TraceSet> {
    let set = load_traces(path)?;
    info!(
        "loaded {} samples ({} layers, {} options) from {}",
        set.len(),
        set.layer_count,
        set.option_count,
        path.display()
    );
    Ok(set)
}

#[derive(Serialize)]
struct CalibrateOutput<'a> {
    #[serde(flatten)]
    result: &'a CalibrationResult,
    manifest: RunManifest,
}

pub fn calibrate(args: CalibrateArgs, file: FileConfig) -> Result<()> {
    let traces = required(args.traces, file.traces, "traces")?;
    let out = required(args.out, file.out, "out")?;
    let method: Method = args
        .method
        .or(file.method)
        .unwrap_or_else(|| Method::DualAlign.to_string())
        .parse()?;
    let defaults = OptimizerConfig::default();
    let config = OptimizerConfig {
        learning_rate: args.lr.or(file.lr).unwrap_or(defaults.learning_rate),
        epochs: args.epochs.or(file.epochs).unwrap_or(defaults.epochs),
        batch_size: args
            .batch_size
            .or(file.batch_size)
            .unwrap_or(defaults.batch_size),
        seed: args.seed.or(file.seed).unwrap_or(defaults.seed),
        tau_init: args.tau_init.or(file.tau_init).unwrap_or(defaults.tau_init),
    };
    config.validate()?;

    let set = load(&traces)?;
    let result = optimize(&set, method, &config)?;
    check_predictions_kept(&set, result.tau_star)?;
    info!("{method}: tau* = {:.6}", result.tau_star);

    let manifest = RunManifest::new("calibrate")
        .arg("traces", traces.display())
        .arg("method", method)
        .arg("lr", config.learning_rate)
        .arg("epochs", config.epochs)
        .arg("batch-size", config.batch_size)
        .arg("tau-init", config.tau_init)
        .arg("seed", config.seed)
        .input(&traces)?
        .seed(config.seed);
    write_json(
        &out,
        &CalibrateOutput {
            result: &result,
            manifest,
        },
    )?;
    println!("tau_star {:.6}", result.tau_star);
    Ok(())
}

/// Temperature scaling must never change a prediction.
fn check_predictions_kept(set: &TraceSet, tau: f64) -> Result<()> {
    for pair in set {
        let before = apply_temperature(pair, 1.0)?.argmax();
        let after = apply_temperature(pair, tau)?.argmax();
        if before != after {
            return Err(InvariantViolation(format!(
                "tau {tau} changed the prediction of sample '{}'",
                pair.id
            ))
            .into());
        }
    }
    Ok(())
}

struct Evaluation {
    traces: PathBuf,
    out: PathBuf,
    tau: f64,
    report: MetricsReport,
    manifest: RunManifest,
}

fn run_evaluation(command: &str, args: EvalArgs, file: FileConfig) -> Result<Evaluation> {
    let traces = required(args.traces, file.traces, "traces")?;
    let out = required(args.out, file.out, "out")?;
    let tau = args.tau.or(file.tau).unwrap_or(1.0);
    let bins = args.bins.or(file.bins).unwrap_or(DEFAULT_BINS);
    let set = load(&traces)?;
    let report = evaluate(&set, tau, bins)?;
    if report.ece > report.mce + 1e-9 {
        return Err(
            InvariantViolation(format!("ECE {} exceeds MCE {}", report.ece, report.mce)).into(),
        );
    }
    let manifest = RunManifest::new(command)
        .arg("traces", traces.display())
        .arg("tau", tau)
        .arg("bins", bins)
        .input(&traces)?;
    Ok(Evaluation {
        traces,
        out,
        tau,
        report,
        manifest,
    })
}

#[derive(Serialize)]
struct EvaluateOutput<'a> {
    tau: f64,
    #[serde(flatten)]
    report: &'a MetricsReport,
    manifest: RunManifest,
}

pub fn evaluate_cmd(args: EvalArgs, file: FileConfig) -> Result<()> {
    let eval = run_evaluation("evaluate", args, file)?;
    let csv = sidecar(&eval.out, "csv");
    write_file(&csv, |w| Ok(write_reliability_csv(&eval.report.bins, w)?))?;
    write_json(
        &eval.out,
        &EvaluateOutput {
            tau: eval.tau,
            report: &eval.report,
            manifest: eval.manifest,
        },
    )?;
    info!("evaluated {}", eval.traces.display());
    println!(
        "ece {:.4} mce {:.4} ace {:.4} brier {:.6} accuracy {:.4}",
        eval.report.ece, eval.report.mce, eval.report.ace, eval.report.brier, eval.report.accuracy
    );
    Ok(())
}

pub fn diagram(args: EvalArgs, file: FileConfig) -> Result<()> {
    let eval = run_evaluation("diagram", args, file)?;
    write_file(&eval.out, |w| {
        Ok(write_reliability_csv(&eval.report.bins, w)?)
    })?;
    write_json(&sidecar(&eval.out, "manifest.json"), &eval.manifest)
}

pub fn analyze(args: AnalyzeArgs, file: FileConfig) -> Result<()> {
    let traces = required(args.traces, file.traces, "traces")?;
    let out = required(args.out, file.out, "out")?;
    let tau = args.tau.or(file.tau).unwrap_or(1.0);
    let set = load(&traces)?;
    let profiles = analyze_set(&set)?;
    let table = ise_confidence_table(&set, tau)?;
    write_file(&out, |w| Ok(write_profiles_jsonl(&profiles, w)?))?;
    write_file(&sidecar(&out, "csv"), |w| Ok(write_ise_csv(&table, w)?))?;
    let manifest = RunManifest::new("analyze")
        .arg("traces", traces.display())
        .arg("tau", tau)
        .input(&traces)?;
    write_json(&sidecar(&out, "manifest.json"), &manifest)?;
    let disagree = profiles.iter().filter(|p| !p.agree).count();
    println!("{} samples, {} disagreements", profiles.len(), disagree);
    Ok(())
}

#[derive(Serialize)]
struct SynthSidecar<'a> {
    config: &'a SynthConfig,
    manifest: RunManifest,
}

pub fn synth(args: SynthArgs, file: FileConfig) -> Result<()> {
    let out = required(args.out, file.out, "out")?;
    let d = SynthConfig::default();
    let preset: Preset = match args.preset.or(file.preset) {
        Some(name) => name.parse()?,
        None => d.preset,
    };
    let config = SynthConfig {
        preset,
        n: args.n.or(file.n).unwrap_or(d.n),
        layers: args.layers.or(file.layers).unwrap_or(d.layers),
        options: args.options.or(file.options).unwrap_or(d.options),
        scale_c: args.scale_c.or(file.scale_c).unwrap_or(d.scale_c),
        spike_layer: args
            .spike_layer
            .or(file.spike_layer)
            .unwrap_or(d.spike_layer),
        noise_sigma: args
            .noise_sigma
            .or(file.noise_sigma)
            .unwrap_or(d.noise_sigma),
        seed: args.seed.or(file.seed).unwrap_or(d.seed),
    };
    let set = generate(&config)?;
    write_file(&out, |w| Ok(write_traces_to(&set, w)?))?;
    let manifest = RunManifest::new("synth")
        .arg("preset", config.preset)
        .arg("n", config.n)
        .arg("layers", config.layers)
        .arg("options", config.options)
        .arg("scale-c", config.scale_c)
        .arg("spike-layer", config.spike_layer)
        .arg("noise-sigma", config.noise_sigma)
        .arg("seed", config.seed)
        .seed(config.seed);
    write_json(
        &sidecar(&out, "config.json"),
        &SynthSidecar {
            config: &config,
            manifest,
        },
    )?;
    info!("wrote {} samples to {}", set.len(), out.display());
    Ok(())
}

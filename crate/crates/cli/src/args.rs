use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(
    name = "dualign",
    version,
    about = "Unsupervised temperature calibration of post-trained LMs from per-layer option-logit traces"
)]
pub struct Cli {
    /// TOML file with default flag values; explicit flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a temperature from traces and write the result JSON.
    Calibrate(CalibrateArgs),
    /// Score the PoLM at a temperature: metrics JSON plus reliability CSV.
    Evaluate(EvalArgs),
    /// Per-sample drift profiles (JSONL) and the confidence/ISE table (CSV).
    Analyze(AnalyzeArgs),
    /// Generate synthetic traces with planted drift.
    Synth(SynthArgs),
    /// Reliability table CSV only.
    Diagram(EvalArgs),
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, value_name = "PATH")]
    pub traces: Option<PathBuf>,
    /// dual-align, daca, conf-only, process-only, simple-stratify,
    /// fixed-layer:1/4, fixed-layer:1/2, fixed-layer:3/4 or ts-oracle
    #[arg(long, value_name = "NAME")]
    pub method: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub tau_init: Option<f64>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "PATH")]
    pub traces: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long, value_name = "PATH")]
    pub traces: Option<PathBuf>,
    /// Temperature used for the PoLM side of the confidence/ISE table.
    #[arg(long, allow_negative_numbers = true)]
    pub tau: Option<f64>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// confidence-drift, process-drift or mixed
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub options: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub scale_c: Option<f64>,
    #[arg(long)]
    pub spike_layer: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

/// Values accepted from a `--config` TOML file. Keys use the flag names.
#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub traces: Option<PathBuf>,
    pub method: Option<String>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub tau_init: Option<f64>,
    pub tau: Option<f64>,
    pub bins: Option<usize>,
    pub out: Option<PathBuf>,
    pub preset: Option<String>,
    pub n: Option<usize>,
    pub layers: Option<usize>,
    pub options: Option<usize>,
    pub scale_c: Option<f64>,
    pub spike_layer: Option<usize>,
    pub noise_sigma: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Flag value, else config value, else error naming the flag.
pub fn required<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T> {
    match flag.or(file) {
        Some(v) => Ok(v),
        None => bail!("missing required --{name}"),
    }
}

//! Command-line flags, the flat `key=value` config file, and their
//! resolution into core configurations.
//!
//! Config file keys are flag names without the leading dashes. File entries
//! are replayed as flags ahead of the real command line, and later
//! occurrences override earlier ones, so flags always win.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use tangled_core::forest::{ForestParams, Mtry};
use tangled_core::ingest::SyntheticSpec;
use tangled_core::select::{ImportanceBackend, SelectionConfig, TargetAngle};
use tangled_core::stability::StabilityConfig;

use crate::error::{CliError, CliResult};
use crate::io::AngleUnit;

#[derive(Debug, Parser)]
#[command(name = "tangled", version, about = "Feature selection for correlated feature spaces")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Subcommand)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Select,
    Stability,
    Synth,
    Evaluate,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cluster, pick representatives and refine; writes selection_<angle>.json.
    Select(Flags),
    /// Bootstrap stability; writes stability_<angle>.json and kuncheva_<angle>.csv.
    Stability(Flags),
    /// Synthetic data; writes features.csv, angles.csv and ground_truth.json.
    Synth(Flags),
    /// Held-out accuracy of a selection; writes accuracy_<angle>.json.
    Evaluate(Flags),
}

impl Command {
    pub fn split(self) -> (Mode, Flags) {
        match self {
            Command::Select(f) => (Mode::Select, f),
            Command::Stability(f) => (Mode::Stability, f),
            Command::Synth(f) => (Mode::Synth, f),
            Command::Evaluate(f) => (Mode::Evaluate, f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AngleArg {
    Phi,
    Psi,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ImportanceArg {
    Impurity,
    Permutation,
}

fn parse_mtry(s: &str) -> Result<Mtry, String> {
    match s {
        "third" | "one_third" => Ok(Mtry::OneThird),
        "all" => Ok(Mtry::All),
        _ => s
            .parse::<usize>()
            .map(Mtry::Fixed)
            .map_err(|_| format!("expected `third`, `all` or a positive integer, got {s:?}")),
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Flat key=value file; keys are flag names without dashes.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub angles: Option<PathBuf>,
    /// Selection JSON to evaluate.
    #[arg(long)]
    pub selection: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub angle_unit: Option<AngleUnit>,
    #[arg(long, value_enum)]
    pub angle: Option<AngleArg>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Ensemble runs R.
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub coverage: Option<f64>,
    #[arg(long)]
    pub trees: Option<usize>,
    /// `third`, `all`, or a fixed count.
    #[arg(long, value_parser = parse_mtry)]
    pub mtry: Option<Mtry>,
    #[arg(long)]
    pub min_leaf: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long, value_enum)]
    pub importance: Option<ImportanceArg>,
    /// Shuffles per feature for permutation importance.
    #[arg(long)]
    pub permutation_repeats: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Kuncheva curves use k = 1..=k_max.
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Skip the naive top-k impurity baseline in stability runs.
    #[arg(long)]
    pub no_baseline: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub cluster_size: Option<usize>,
    /// Target intra-cluster correlation of synthetic data.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub noise_features: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
}

/// Fully resolved settings, echoed into every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub features: Option<PathBuf>,
    pub angles: Option<PathBuf>,
    pub selection_file: Option<PathBuf>,
    pub angle_unit: AngleUnit,
    pub seed: u64,
    pub selection: SelectionConfig,
    pub stability: StabilityConfig,
    pub synthetic: SyntheticSpec,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub threads: Option<usize>,
}

/// Turns `key=value` lines into `--key value` arguments. Blank lines and
/// lines starting with `#` are skipped; `key=true` becomes a bare switch.
pub fn config_file_args(path: &Path) -> CliResult<Vec<OsString>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("config file {}: {e}", path.display())))?;
    let mut args = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::config(format!("config file {}: line {} is not key=value", path.display(), i + 1))
        })?;
        let key = k.trim().replace('_', "-");
        if key == "config" {
            return Err(CliError::config("config files cannot include other config files"));
        }
        let v = v.trim();
        match v {
            "true" => args.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                args.push(format!("--{key}").into());
                args.push(v.into());
            }
        }
    }
    Ok(args)
}

fn clap_error(e: clap::Error) -> CliError {
    let msg = e.to_string();
    let first = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
    CliError::config(first.trim_start_matches("error: ").to_owned())
}

/// Parses the command line, splicing in the config file when one is given.
/// `Ok(None)` means help or version text was printed.
pub fn parse_args<I, T>(args: I) -> CliResult<Option<(Mode, Flags)>>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let first = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return Ok(None);
        }
        Err(e) => return Err(clap_error(e)),
    };
    let (mode, flags) = first.command.split();
    let Some(path) = flags.config.clone() else {
        return Ok(Some((mode, flags)));
    };
    // program and subcommand, then the file, then the real flags
    let mut spliced: Vec<OsString> = args[..2].to_vec();
    spliced.extend(config_file_args(&path)?);
    spliced.extend(args[2..].iter().cloned());
    let cli = Cli::try_parse_from(&spliced).map_err(clap_error)?;
    Ok(Some(cli.command.split()))
}

fn need(path: &Option<PathBuf>, flag: &str, mode: Mode) -> CliResult<()> {
    if path.is_none() {
        return Err(CliError::config(format!("--{flag} is required for {mode:?}").to_lowercase()));
    }
    Ok(())
}

impl RunConfig {
    /// Materializes defaults; seed defaults to 0.
    pub fn resolve(mode: Mode, f: Flags) -> CliResult<Self> {
        let seed = f.seed.unwrap_or(0);
        let forest = ForestParams {
            n_trees: f.trees.unwrap_or(ForestParams::default().n_trees),
            mtry: f.mtry.unwrap_or(Mtry::OneThird),
            min_samples_leaf: f.min_leaf.unwrap_or(ForestParams::default().min_samples_leaf),
            max_depth: f.max_depth,
            bootstrap: true,
            seed,
        };
        let defaults = SelectionConfig::default();
        let importance = match f.importance.unwrap_or(ImportanceArg::Impurity) {
            ImportanceArg::Impurity => ImportanceBackend::Impurity,
            ImportanceArg::Permutation => ImportanceBackend::Permutation {
                n_repeats: f.permutation_repeats.unwrap_or(5),
            },
        };
        let selection = SelectionConfig {
            tau: f.tau.unwrap_or(defaults.tau),
            runs: f.runs.unwrap_or(defaults.runs),
            forest,
            coverage: f.coverage.unwrap_or(defaults.coverage),
            importance,
            seed,
            target_angle: match f.angle.unwrap_or(AngleArg::Both) {
                AngleArg::Phi => TargetAngle::Phi,
                AngleArg::Psi => TargetAngle::Psi,
                AngleArg::Both => TargetAngle::Both,
            },
        };
        let sd = StabilityConfig::default();
        let stability = StabilityConfig {
            n_repeats: f.repeats.unwrap_or(sd.n_repeats),
            train_fraction: f.train_fraction.unwrap_or(sd.train_fraction),
            k_grid: f.k_max.map(|k| (1..=k).collect()),
            selection: selection.clone(),
            seed,
            repeat_seeds: None,
            naive_baseline: !f.no_baseline,
        };
        let reference = SyntheticSpec::reference(seed);
        let clusters = f.clusters.unwrap_or(reference.n_clusters);
        let synthetic = SyntheticSpec {
            n_clusters: clusters,
            cluster_sizes: vec![f.cluster_size.unwrap_or(reference.cluster_sizes[0]); clusters],
            intra_correlation: f.rho.unwrap_or(reference.intra_correlation),
            n_noise_features: f.noise_features.unwrap_or(reference.n_noise_features),
            n_samples: f.samples.unwrap_or(reference.n_samples),
            noise_sd: f.noise_sd.unwrap_or(reference.noise_sd),
            ..reference
        };
        if f.threads == Some(0) {
            return Err(CliError::config("--threads must be at least 1"));
        }
        match mode {
            Mode::Select | Mode::Stability => {
                need(&f.features, "features", mode)?;
                need(&f.angles, "angles", mode)?;
            }
            Mode::Evaluate => {
                need(&f.features, "features", mode)?;
                need(&f.angles, "angles", mode)?;
                need(&f.selection, "selection", mode)?;
            }
            Mode::Synth => {}
        }
        selection.validate()?;
        if mode == Mode::Stability && stability.n_repeats < 2 {
            return Err(CliError::config(format!("n_repeats must be at least 2, got {}", stability.n_repeats)));
        }
        if !(stability.train_fraction > 0.0 && stability.train_fraction < 1.0) {
            return Err(CliError::config(format!(
                "train_fraction {} not in (0, 1)",
                stability.train_fraction
            )));
        }
        Ok(Self {
            mode,
            features: f.features,
            angles: f.angles,
            selection_file: f.selection,
            angle_unit: f.angle_unit.unwrap_or(AngleUnit::Rad),
            seed,
            selection,
            stability,
            synthetic,
            out: f.out.unwrap_or_else(|| PathBuf::from(".")),
            threads: f.threads,
        })
    }
}

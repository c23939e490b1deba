//! The four subcommands. Each returns `Ok(())` or a classified [`CliError`];
//! no output file is left behind on failure.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use tangled_core::forest::ForestParams;
use tangled_core::ingest::{self, generate_synthetic, GroundTruth, SyntheticSpec};
use tangled_core::metrics::{evaluate_predictor, AccuracyReport, Predictor};
use tangled_core::select::{run_pipeline, SelectionResult};
use tangled_core::stability::{run_stability, StabilityReport};

use crate::config::{Mode, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io;

/// Common header of every JSON output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub format: String,
    pub created_unix: u64,
    pub run_config: RunConfig,
    #[serde(flatten)]
    pub body: T,
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn artifact<T>(format: &str, cfg: &RunConfig, body: T) -> Artifact<T> {
    Artifact {
        format: format.into(),
        created_unix: now_unix(),
        run_config: cfg.clone(),
        body,
    }
}

fn path_of<'a>(p: &'a Option<PathBuf>, what: &str) -> CliResult<&'a Path> {
    p.as_deref().ok_or_else(|| CliError::config(format!("missing --{what}")))
}

fn prepare_out(cfg: &RunConfig) -> CliResult<()> {
    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::config(format!("output directory {}: {e}", cfg.out.display())))
}

fn load(cfg: &RunConfig) -> CliResult<(tangled_core::FeatureMatrix, ingest::AngleTargets)> {
    io::load_csv(path_of(&cfg.features, "features")?, path_of(&cfg.angles, "angles")?, cfg.angle_unit)
}

/// Runs the configured subcommand, on a dedicated pool when `threads` is set.
pub fn run(cfg: &RunConfig) -> CliResult<()> {
    match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::internal(format!("thread pool: {e}")))?
            .install(|| dispatch(cfg)),
        None => dispatch(cfg),
    }
}

fn dispatch(cfg: &RunConfig) -> CliResult<()> {
    match cfg.mode {
        Mode::Select => cmd_select(cfg),
        Mode::Stability => cmd_stability(cfg),
        Mode::Synth => cmd_synth(cfg),
        Mode::Evaluate => cmd_evaluate(cfg),
    }
}

pub fn cmd_select(cfg: &RunConfig) -> CliResult<()> {
    let (d, angles) = load(cfg)?;
    prepare_out(cfg)?;
    let results = run_pipeline(&d, &angles, &cfg.selection)?;
    for r in &results {
        let path = cfg.out.join(format!("selection_{}.json", r.angle.as_str()));
        io::write_json(&path, &artifact("tangled-selection", cfg, r))?;
        print_selection(r);
    }
    Ok(())
}

fn print_selection(r: &SelectionResult) {
    println!(
        "angle {}: {} components, {} representatives, {} selected",
        r.angle.as_str(),
        r.partition.len(),
        r.refined.len(),
        r.selected.len()
    );
    println!("{:>4}  {:<24} {:>7} {:>10} {:>10} {:>10}", "rank", "feature", "cluster", "ensemble", "refined", "cumulative");
    for (i, e) in r.refined.iter().filter(|e| e.selected).enumerate() {
        println!(
            "{:>4}  {:<24} {:>7} {:>10.4} {:>10.4} {:>10.4}",
            i + 1,
            e.name,
            e.cluster_id,
            e.ensemble_importance,
            e.refined_importance,
            e.cumulative
        );
    }
}

pub fn cmd_stability(cfg: &RunConfig) -> CliResult<()> {
    let (d, angles) = load(cfg)?;
    prepare_out(cfg)?;
    let reports = run_stability(&d, &angles, &cfg.stability)?;
    for r in &reports {
        let a = r.angle.as_str();
        io::write_json(&cfg.out.join(format!("stability_{a}.json")), &artifact("tangled-stability", cfg, r))?;
        write_curve(&cfg.out.join(format!("kuncheva_{a}.csv")), r)?;
        print_stability(r);
    }
    Ok(())
}

fn write_curve(path: &Path, r: &StabilityReport) -> CliResult<()> {
    let k: Vec<f64> = r.kuncheva.iter().map(|p| p.k as f64).collect();
    let mean: Vec<f64> = r.kuncheva.iter().map(|p| p.mean).collect();
    let se: Vec<f64> = r.kuncheva.iter().map(|p| p.stderr).collect();
    io::write_table(path, &["k", "mean", "stderr"], &[k, mean, se])
}

fn print_stability(r: &StabilityReport) {
    println!("angle {}: {} repeats", r.angle.as_str(), r.runs.len());
    match r.spearman.mean {
        Some(m) => println!("mean pairwise spearman {m:.4}"),
        None => println!("mean pairwise spearman undefined"),
    }
    let naive = r.naive_baseline.as_ref();
    println!("{:>4} {:>10} {:>10} {:>10}", "k", "kuncheva", "stderr", "naive");
    for (i, p) in r.kuncheva.iter().enumerate() {
        let b = naive.map_or(String::from("-"), |n| format!("{:.4}", n.kuncheva[i].mean));
        println!("{:>4} {:>10.4} {:>10.4} {:>10}", p.k, p.mean, p.stderr, b);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthOutput {
    #[serde(flatten)]
    pub truth: GroundTruth,
    pub spec: SyntheticSpec,
}

pub fn cmd_synth(cfg: &RunConfig) -> CliResult<()> {
    let data = generate_synthetic(&cfg.synthetic)?;
    prepare_out(cfg)?;
    io::write_features(&cfg.out.join("features.csv"), &data.features)?;
    io::write_angles(&cfg.out.join("angles.csv"), &data.angles, cfg.angle_unit)?;
    let body = SynthOutput { truth: data.truth, spec: cfg.synthetic.clone() };
    io::write_json(&cfg.out.join("ground_truth.json"), &artifact("tangled-ground-truth", cfg, &body))?;
    println!(
        "wrote {} rows x {} features; drivers {:?}",
        data.features.n(),
        data.features.m(),
        body.truth.drivers
    );
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationOutput {
    pub angle: ingest::Angle,
    pub selected: Vec<usize>,
    pub selected_names: Vec<String>,
    pub split: ingest::DatasetSplit,
    pub reports: Vec<AccuracyReport>,
}

pub fn cmd_evaluate(cfg: &RunConfig) -> CliResult<()> {
    let sel_path = path_of(&cfg.selection_file, "selection")?;
    let sel: Artifact<SelectionResult> = io::read_json(sel_path)?;
    let sel = sel.body;
    if sel.selected.is_empty() {
        return Err(CliError::data(format!("{}: selection is empty", sel_path.display())));
    }
    let (d, angles) = load(cfg)?;
    if let Some(&f) = sel.selected.iter().find(|&&f| f >= d.m()) {
        return Err(CliError::data(format!("selected feature {f} outside the {} feature columns", d.m())));
    }
    for (&f, name) in sel.selected.iter().zip(&sel.selected_names) {
        if &d.names()[f] != name {
            return Err(CliError::data(format!(
                "selection names feature {f} {name:?} but the features file has {:?}",
                d.names()[f]
            )));
        }
    }
    prepare_out(cfg)?;
    let split = ingest::split(d.n(), cfg.stability.train_fraction, cfg.seed)?;
    let forest = Predictor::Forest {
        params: ForestParams { seed: cfg.seed, ..cfg.selection.forest.clone() },
    };
    let reports = [Predictor::Ols, forest]
        .iter()
        .map(|p| evaluate_predictor(p, &sel.selected, &split, &d, &angles, sel.angle, cfg.seed))
        .collect::<Result<Vec<_>, _>>()?;
    for r in &reports {
        println!(
            "{} {}: r2_components {:.4}, rmse_components {:.4}, r2_angular {:.4}, rmse_angular {:.4}",
            sel.angle.as_str(),
            r.predictor,
            r.r2_components,
            r.rmse_components,
            r.r2_angular,
            r.rmse_angular
        );
    }
    let body = EvaluationOutput {
        angle: sel.angle,
        selected: sel.selected.clone(),
        selected_names: sel.selected_names.clone(),
        split,
        reports,
    };
    let path = cfg.out.join(format!("accuracy_{}.json", sel.angle.as_str()));
    io::write_json(&path, &artifact("tangled-accuracy", cfg, &body))
}

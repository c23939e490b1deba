//! Representative selection within correlated clusters, cumulative-importance
//! refinement, and the end-to-end pipeline.
//!
//! For each of `runs` ensemble runs, one member is drawn uniformly from every
//! multi-member cluster and fitted together with all singleton features. A
//! feature's ensemble score is the mean of its normalized importances over
//! the runs it took part in; the best-scoring member represents its cluster.
//! Representatives are then refitted alone, ranked, and kept in descending
//! order until their importances cover `coverage` of the total.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corrgraph::{self, ClusterPartition};
use crate::forest::{
    fit_forest, impurity_importance, permutation_importance, rank_descending, ForestParams,
    ImportanceVector,
};
use crate::ingest::{encode_angles, Angle, AngleTargets, EncodedTargets};
use crate::matrix::{FeatureMatrix, Matrix};
use crate::par;
use crate::rng;
use crate::{Error, Result};

/// Slack when comparing a cumulative sum against the coverage threshold.
pub const COVERAGE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetAngle {
    Phi,
    Psi,
    Both,
}

impl TargetAngle {
    pub fn angles(self) -> Vec<Angle> {
        match self {
            TargetAngle::Phi => alloc::vec![Angle::Phi],
            TargetAngle::Psi => alloc::vec![Angle::Psi],
            TargetAngle::Both => alloc::vec![Angle::Phi, Angle::Psi],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ImportanceBackend {
    /// Mean decrease in squared error.
    Impurity,
    /// MSE increase under column shuffling, on the training rows.
    Permutation { n_repeats: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Correlation threshold for graph edges.
    pub tau: f64,
    /// Ensemble runs `R`.
    pub runs: usize,
    /// Forest settings; `seed` is ignored in favour of streams derived from `seed` below.
    pub forest: ForestParams,
    pub coverage: f64,
    pub importance: ImportanceBackend,
    pub seed: u64,
    pub target_angle: TargetAngle,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            tau: 0.8,
            runs: 50,
            forest: ForestParams::default(),
            coverage: 0.99,
            importance: ImportanceBackend::Impurity,
            seed: 0,
            target_angle: TargetAngle::Both,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "tau",
                reason: format!("{} not in (0, 1]", self.tau),
            });
        }
        if self.runs == 0 {
            return Err(Error::InvalidParameter {
                name: "runs",
                reason: "need at least one ensemble run".into(),
            });
        }
        if !(self.coverage > 0.0 && self.coverage <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "coverage",
                reason: format!("{} not in (0, 1]", self.coverage),
            });
        }
        if let ImportanceBackend::Permutation { n_repeats: 0 } = self.importance {
            return Err(Error::InvalidParameter {
                name: "importance",
                reason: "permutation importance needs n_repeats >= 1".into(),
            });
        }
        if self.forest.n_trees == 0 || self.forest.min_samples_leaf == 0 {
            return self.forest.validate(usize::MAX);
        }
        Ok(())
    }

    /// The config as recorded in reports: forest seed mirrors the master seed.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.forest.seed = c.seed;
        c
    }
}

/// Mean over target columns of each column forest's normalized importance.
pub fn component_importance(
    x: &Matrix,
    targets: &Matrix,
    params: &ForestParams,
    backend: ImportanceBackend,
    seed: u64,
    tag: &str,
) -> Result<Vec<f64>> {
    let c = targets.ncols();
    let mut avg = alloc::vec![0.0; x.ncols()];
    for j in 0..c {
        let y = targets.column(j);
        let mut p = params.clone();
        p.seed = rng::derive_seed(seed, tag, j as u64);
        let forest = fit_forest(x, &y, &p)?;
        let imp: ImportanceVector = match backend {
            ImportanceBackend::Impurity => impurity_importance(&forest),
            ImportanceBackend::Permutation { n_repeats } => permutation_importance(
                &forest,
                x,
                &y,
                n_repeats,
                rng::derive_seed(seed, "permutation", j as u64),
            )?,
        };
        for (a, v) in avg.iter_mut().zip(&imp.values) {
            *a += v;
        }
    }
    avg.iter_mut().for_each(|a| *a /= c as f64);
    Ok(avg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub feature: usize,
    pub name: String,
    /// Ensemble runs in which the feature was drawn.
    pub runs: usize,
    /// Mean normalized importance over those runs (0 when never drawn).
    pub mean_importance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRepresentative {
    pub cluster_id: usize,
    pub representative: usize,
    pub mean_importance: f64,
    pub candidates: Vec<CandidateScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeSet {
    pub clusters: Vec<ClusterRepresentative>,
}

impl RepresentativeSet {
    /// Representative feature indices, ascending.
    pub fn indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.clusters.iter().map(|c| c.representative).collect();
        v.sort_unstable();
        v
    }

    fn lookup(&self, feature: usize) -> Option<&ClusterRepresentative> {
        self.clusters.iter().find(|c| c.representative == feature)
    }
}

fn targets_tag(targets: &EncodedTargets) -> String {
    let names: Vec<&str> = targets.columns().iter().map(|c| c.as_str()).collect();
    names.join("+")
}

fn check_inputs(d: &FeatureMatrix, targets: &EncodedTargets) -> Result<()> {
    if targets.n() != d.n() {
        return Err(Error::DimensionMismatch {
            context: "target rows vs feature rows",
            expected: d.n(),
            found: targets.n(),
        });
    }
    if targets.columns().is_empty() {
        return Err(Error::EmptyInput("target columns"));
    }
    Ok(())
}

/// Picks one representative per cluster from `cfg.runs` ensemble runs.
pub fn ensemble_representatives(
    d: &FeatureMatrix,
    partition: &ClusterPartition,
    targets: &EncodedTargets,
    cfg: &SelectionConfig,
) -> Result<RepresentativeSet> {
    cfg.validate()?;
    check_inputs(d, targets)?;
    if partition.assignment.len() != d.m() {
        return Err(Error::DimensionMismatch {
            context: "partition size vs feature count",
            expected: d.m(),
            found: partition.assignment.len(),
        });
    }
    let tag = targets_tag(targets);
    let sample_tag = format!("ensemble-draw/{tag}");
    let forest_tag = format!("ensemble-forest/{tag}");
    let singletons: Vec<usize> = partition
        .components
        .iter()
        .filter(|c| c.len() == 1)
        .map(|c| c[0])
        .collect();

    let runs: Vec<Result<Vec<(usize, f64)>>> = par::map_range(cfg.runs, |r| {
        let mut draw = rng::stream(cfg.seed, &sample_tag, r as u64);
        let mut features: Vec<usize> = partition
            .components
            .iter()
            .filter(|c| c.len() > 1)
            .map(|c| c[draw.random_range(0..c.len())])
            .chain(singletons.iter().copied())
            .collect();
        features.sort_unstable();
        let x = d.values().select_columns(&features);
        let imp = component_importance(
            &x,
            targets.values(),
            &cfg.forest,
            cfg.importance,
            rng::derive_seed(cfg.seed, &forest_tag, r as u64),
            "column",
        )?;
        Ok(features.into_iter().zip(imp).collect())
    });

    let mut sum = alloc::vec![0.0; d.m()];
    let mut count = alloc::vec![0usize; d.m()];
    for run in runs {
        for (f, v) in run? {
            sum[f] += v;
            count[f] += 1;
        }
    }
    let score = |f: usize| if count[f] > 0 { sum[f] / count[f] as f64 } else { 0.0 };

    let clusters = partition
        .components
        .iter()
        .enumerate()
        .map(|(k, members)| {
            let mut best: Option<(usize, f64)> = None;
            for &f in members {
                if count[f] == 0 {
                    continue;
                }
                let s = score(f);
                // members ascend, so strict `>` keeps the lowest index on ties
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((f, s));
                }
            }
            let (representative, mean_importance) =
                best.expect("every cluster is sampled in every run");
            ClusterRepresentative {
                cluster_id: k,
                representative,
                mean_importance,
                candidates: members
                    .iter()
                    .map(|&f| CandidateScore {
                        feature: f,
                        name: d.names()[f].clone(),
                        runs: count[f],
                        mean_importance: score(f),
                    })
                    .collect(),
            }
        })
        .collect();
    Ok(RepresentativeSet { clusters })
}

/// Result of walking an importance ranking until coverage is reached.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageCut {
    /// Indices by descending importance, ties to the lower index.
    pub order: Vec<usize>,
    /// Running sum along `order`.
    pub cumulative: Vec<f64>,
    /// Length of the retained prefix of `order`.
    pub retained: usize,
}

/// Keeps the shortest prefix of the descending ranking whose sum reaches
/// `coverage` (the crossing entry included). Zero-importance entries are
/// never added after the first, and at least one entry is always kept.
pub fn cumulative_cut(importance: &[f64], coverage: f64) -> CoverageCut {
    let order = rank_descending(importance);
    let mut cumulative = Vec::with_capacity(order.len());
    let mut acc = 0.0;
    for &i in &order {
        acc += importance[i];
        cumulative.push(acc);
    }
    let mut retained = 0;
    for (pos, &i) in order.iter().enumerate() {
        if retained > 0 && (cumulative[pos - 1] >= coverage - COVERAGE_EPS || importance[i] <= 0.0)
        {
            break;
        }
        retained += 1;
    }
    CoverageCut {
        order,
        cumulative,
        retained,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedEntry {
    pub feature: usize,
    pub name: String,
    pub cluster_id: usize,
    /// Ensemble score of the feature within its cluster.
    pub ensemble_importance: f64,
    /// Normalized importance from the refinement forests.
    pub refined_importance: f64,
    /// Cumulative refined importance up to and including this entry.
    pub cumulative: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub angle: Angle,
    /// Final subset, by descending refined importance.
    pub selected: Vec<usize>,
    pub selected_names: Vec<String>,
    /// All representatives in refined order; the first `selected.len()` are retained.
    pub refined: Vec<RefinedEntry>,
    pub representatives: RepresentativeSet,
    pub partition: ClusterPartition,
    pub flagged_constant: Vec<usize>,
    pub config: SelectionConfig,
}

/// Refits forests on the representatives only and applies [`cumulative_cut`].
pub fn refine_cumulative(
    d: &FeatureMatrix,
    reps: &RepresentativeSet,
    targets: &EncodedTargets,
    cfg: &SelectionConfig,
) -> Result<(Vec<RefinedEntry>, usize)> {
    cfg.validate()?;
    check_inputs(d, targets)?;
    let features = reps.indices();
    if features.is_empty() {
        return Err(Error::EmptyInput("representative set"));
    }
    let x = d.values().select_columns(&features);
    let tag = format!("refine/{}", targets_tag(targets));
    let imp = component_importance(
        &x,
        targets.values(),
        &cfg.forest,
        cfg.importance,
        rng::derive_seed(cfg.seed, &tag, 0),
        "column",
    )?;
    let cut = cumulative_cut(&imp, cfg.coverage);
    let entries = cut
        .order
        .iter()
        .zip(&cut.cumulative)
        .enumerate()
        .map(|(pos, (&local, &cumulative))| {
            let f = features[local];
            let rep = reps.lookup(f).expect("feature came from the representative set");
            RefinedEntry {
                feature: f,
                name: d.names()[f].clone(),
                cluster_id: rep.cluster_id,
                ensemble_importance: rep.mean_importance,
                refined_importance: imp[local],
                cumulative,
                selected: pos < cut.retained,
            }
        })
        .collect();
    Ok((entries, cut.retained))
}

fn selection_for_angle(
    d: &FeatureMatrix,
    encoded: &EncodedTargets,
    partition: &ClusterPartition,
    flagged: &[usize],
    angle: Angle,
    cfg: &SelectionConfig,
) -> Result<SelectionResult> {
    let targets = encoded.for_angle(angle)?;
    let reps = ensemble_representatives(d, partition, &targets, cfg)?;
    let (refined, retained) = refine_cumulative(d, &reps, &targets, cfg)?;
    let selected: Vec<usize> = refined[..retained].iter().map(|e| e.feature).collect();
    Ok(SelectionResult {
        angle,
        selected_names: selected.iter().map(|&f| d.names()[f].clone()).collect(),
        selected,
        refined,
        representatives: reps,
        partition: partition.clone(),
        flagged_constant: flagged.to_vec(),
        config: cfg.resolved(),
    })
}

/// Correlation clustering, ensemble representatives and refinement, once per
/// requested angle (each angle uses only its own cosine/sine pair).
pub fn run_pipeline(
    d: &FeatureMatrix,
    angles: &AngleTargets,
    cfg: &SelectionConfig,
) -> Result<Vec<SelectionResult>> {
    cfg.validate()?;
    if angles.len() != d.n() {
        return Err(Error::DimensionMismatch {
            context: "angle rows vs feature rows",
            expected: d.n(),
            found: angles.len(),
        });
    }
    let (corr, partition) = corrgraph::cluster_features(d, cfg.tau)?;
    let flagged = corr.flagged_constant();
    let encoded = encode_angles(angles);
    cfg.target_angle
        .angles()
        .into_iter()
        .map(|a| selection_for_angle(d, &encoded, &partition, &flagged, a, cfg))
        .collect()
}

/// Per-cluster count of selected features; handy for checking that a
/// selection never keeps two members of one cluster.
pub fn selected_per_cluster(result: &SelectionResult) -> BTreeMap<usize, usize> {
    let mut m = BTreeMap::new();
    for &f in &result.selected {
        *m.entry(result.partition.assignment[f]).or_insert(0) += 1;
    }
    m
}

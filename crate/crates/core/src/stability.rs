//! Bootstrap stability of the selection: Kuncheva top-k overlap curves and
//! pairwise Spearman correlation of SHAP importances across repeats.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::forest::{fit_forest, rank_descending, ImportanceVector};
use crate::ingest::{self, encode_angles, Angle, AngleTargets};
use crate::matrix::{FeatureMatrix, Matrix};
use crate::metrics::{fit_ols, score_components, AccuracyReport};
use crate::par;
use crate::rng;
use crate::select::{component_importance, run_pipeline, ImportanceBackend, SelectionConfig};
use crate::shap::{mean_abs_shap, tree_shap};
use crate::{Error, Result};

fn check_subset(s: &[usize], m: usize) -> Result<()> {
    let mut seen = alloc::vec![false; m];
    for &f in s {
        if f >= m {
            return Err(Error::Domain(format!("feature {f} outside universe of size {m}")));
        }
        if core::mem::replace(&mut seen[f], true) {
            return Err(Error::Domain(format!("feature {f} repeated in subset")));
        }
    }
    Ok(())
}

/// Kuncheva index as an exact fraction `(r·m − k²) / (k·(m − k))`, with `r = |A ∩ B|`.
pub fn kuncheva_fraction(a: &[usize], b: &[usize], k: usize, m: usize) -> Result<(i64, i64)> {
    if k == 0 || k >= m {
        return Err(Error::Domain(format!("kuncheva needs 1 <= k < m, got k={k}, m={m}")));
    }
    if a.len() != k || b.len() != k {
        return Err(Error::DimensionMismatch {
            context: "kuncheva subset size",
            expected: k,
            found: if a.len() != k { a.len() } else { b.len() },
        });
    }
    check_subset(a, m)?;
    check_subset(b, m)?;
    let r = a.iter().filter(|f| b.contains(f)).count() as i64;
    let (k, m) = (k as i64, m as i64);
    Ok((r * m - k * k, k * (m - k)))
}

pub fn kuncheva_pair(a: &[usize], b: &[usize], k: usize, m: usize) -> Result<f64> {
    let (num, den) = kuncheva_fraction(a, b, k, m)?;
    Ok(num as f64 / den as f64)
}

/// 1-based ranks, ties sharing the mean of the positions they span.
pub fn fractional_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut ranks = alloc::vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        let r = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Pearson correlation of the fractional ranks of `x` and `y`.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "spearman inputs",
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::Domain("spearman needs at least two observations".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Domain("spearman input is not finite".into()));
    }
    pearson(&fractional_ranks(x), &fractional_ranks(y))
        .ok_or_else(|| Error::Domain("spearman input is constant".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KunchevaPair {
    pub a: usize,
    pub b: usize,
    /// Subset size actually compared.
    pub k: usize,
    pub value: f64,
    /// True when a run had fewer than the requested `k` ranked features.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KunchevaPoint {
    pub k: usize,
    pub mean: f64,
    /// Standard error of the mean over pairs; 0 for a single pair.
    pub stderr: f64,
    pub pairs: Vec<KunchevaPair>,
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var / n))
}

/// Mean pairwise Kuncheva index of the rankings' top-k prefixes for each k.
///
/// Rankings list features by decreasing importance and may be shorter than
/// `m`; a pair is then compared at the shorter length and flagged.
pub fn kuncheva_curve(rankings: &[Vec<usize>], k_grid: &[usize], m: usize) -> Result<Vec<KunchevaPoint>> {
    if rankings.len() < 2 {
        return Err(Error::Domain("kuncheva curve needs at least two rankings".into()));
    }
    for r in rankings {
        if r.is_empty() {
            return Err(Error::EmptyInput("ranking"));
        }
        check_subset(r, m)?;
    }
    k_grid
        .iter()
        .map(|&k| {
            let mut pairs = Vec::new();
            for a in 0..rankings.len() {
                for b in a + 1..rankings.len() {
                    let k_eff = k.min(rankings[a].len()).min(rankings[b].len());
                    let value = kuncheva_pair(&rankings[a][..k_eff], &rankings[b][..k_eff], k_eff, m)?;
                    pairs.push(KunchevaPair {
                        a,
                        b,
                        k: k_eff,
                        value,
                        truncated: k_eff < k,
                    });
                }
            }
            let values: Vec<f64> = pairs.iter().map(|p| p.value).collect();
            let (mean, stderr) = mean_stderr(&values);
            Ok(KunchevaPoint { k, mean, stderr, pairs })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpearmanSummary {
    /// `(a, b, rho)`; `rho` is absent when the pair's vectors are constant.
    pub pairs: Vec<(usize, usize, Option<f64>)>,
    pub mean: Option<f64>,
}

/// Importances of the features in `selected`, aligned with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRanking {
    pub importance: Vec<f64>,
    /// `selected` reordered by decreasing importance, ties to the lower index.
    pub ranking: Vec<usize>,
}

impl ModelRanking {
    fn new(selected: &[usize], importance: Vec<f64>) -> Self {
        let mut ranking: Vec<(usize, f64)> = selected.iter().copied().zip(importance.iter().copied()).collect();
        ranking.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Self {
            importance,
            ranking: ranking.into_iter().map(|(f, _)| f).collect(),
        }
    }

    fn value_of(&self, selected: &[usize], f: usize) -> Option<f64> {
        selected.iter().position(|&s| s == f).map(|p| self.importance[p])
    }
}

/// Spearman over the union of both runs' selections; a feature missing from
/// a run gets importance −1 there, tying below every selected feature.
fn pair_spearman(sel_a: &[usize], a: &ModelRanking, sel_b: &[usize], b: &ModelRanking) -> Option<f64> {
    let mut union: Vec<usize> = sel_a.iter().chain(sel_b).copied().collect();
    union.sort_unstable();
    union.dedup();
    let x: Vec<f64> = union.iter().map(|&f| a.value_of(sel_a, f).unwrap_or(-1.0)).collect();
    let y: Vec<f64> = union.iter().map(|&f| b.value_of(sel_b, f).unwrap_or(-1.0)).collect();
    if x == y {
        return Some(1.0);
    }
    spearman(&x, &y).ok()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub repeat: usize,
    pub seed: u64,
    pub n_clusters: usize,
    /// Selected features in the pipeline's retained order.
    pub selected: Vec<usize>,
    pub selected_names: Vec<String>,
    /// Mean |TreeSHAP| of the downstream forests on the test fold.
    pub forest: ModelRanking,
    /// Mean |β_j (x_j − x̄_j)| of the downstream OLS fits on the test fold.
    pub ols: ModelRanking,
    pub accuracy: Vec<AccuracyReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelStability {
    pub model: String,
    pub kuncheva: Vec<KunchevaPoint>,
    pub spearman: SpearmanSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineStability {
    /// Per repeat, all features by decreasing impurity importance.
    pub rankings: Vec<Vec<usize>>,
    pub kuncheva: Vec<KunchevaPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub n_repeats: usize,
    pub train_fraction: f64,
    /// Top-k values for the curves; `None` means `1..=min(15, m − 1)`.
    pub k_grid: Option<Vec<usize>>,
    /// Per-repeat selection settings; its `seed` is replaced by the repeat seed.
    pub selection: SelectionConfig,
    pub seed: u64,
    /// Explicit per-repeat seeds, overriding those derived from `seed`.
    pub repeat_seeds: Option<Vec<u64>>,
    /// Also score top-k impurity importance on all features, without clustering.
    pub naive_baseline: bool,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            n_repeats: 10,
            train_fraction: 0.8,
            k_grid: None,
            selection: SelectionConfig::default(),
            seed: 0,
            repeat_seeds: None,
            naive_baseline: true,
        }
    }
}

impl StabilityConfig {
    pub fn resolved_k_grid(&self, m: usize) -> Vec<usize> {
        match &self.k_grid {
            Some(g) => g.clone(),
            None => (1..=15.min(m.saturating_sub(1))).collect(),
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.n_repeats < 2 {
            return Err(Error::InvalidParameter {
                name: "n_repeats",
                reason: format!("{} < 2", self.n_repeats),
            });
        }
        if let Some(s) = &self.repeat_seeds {
            if s.len() != self.n_repeats {
                return Err(Error::InvalidParameter {
                    name: "repeat_seeds",
                    reason: format!("{} seeds for {} repeats", s.len(), self.n_repeats),
                });
            }
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidParameter {
                name: "train_fraction",
                reason: format!("{} not in (0, 1)", self.train_fraction),
            });
        }
        let grid = self.resolved_k_grid(m);
        if grid.is_empty() {
            return Err(Error::InvalidParameter {
                name: "k_grid",
                reason: "empty".into(),
            });
        }
        if let Some(&k) = grid.iter().find(|&&k| k == 0 || k >= m) {
            return Err(Error::InvalidParameter {
                name: "k_grid",
                reason: format!("k={k} outside 1..{m}"),
            });
        }
        self.selection.validate()
    }

    fn repeat_seed(&self, r: usize) -> u64 {
        match &self.repeat_seeds {
            Some(s) => s[r],
            None => rng::derive_seed(self.seed, "repeat", r as u64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub angle: Angle,
    pub n_features: usize,
    pub k_grid: Vec<usize>,
    pub split: ingest::DatasetSplit,
    pub runs: Vec<RunRecord>,
    /// Curves of the forest SHAP rankings.
    pub kuncheva: Vec<KunchevaPoint>,
    pub spearman: SpearmanSummary,
    /// Curves for every downstream model, forest first.
    pub per_model: Vec<ModelStability>,
    pub naive_baseline: Option<BaselineStability>,
    pub config: StabilityConfig,
}

struct RepeatOutput {
    runs: Vec<RunRecord>,
    naive: Vec<Vec<usize>>,
}

/// Mean |β_j (x_ij − x̄_j)| over test rows, x̄ taken on the training rows.
fn linear_shap_importance(coef: &[f64], x_train: &Matrix, x_test: &Matrix) -> ImportanceVector {
    let n_train = x_train.nrows() as f64;
    let values = (0..coef.len())
        .map(|j| {
            let mean = x_train.column(j).iter().sum::<f64>() / n_train;
            let s: f64 = x_test.column(j).iter().map(|v| libm::fabs(coef[j] * (v - mean))).sum();
            s / x_test.nrows() as f64
        })
        .collect();
    ImportanceVector::normalized(values)
}

fn average(vs: &[ImportanceVector]) -> Vec<f64> {
    let mut acc = alloc::vec![0.0; vs[0].values.len()];
    for v in vs {
        for (a, x) in acc.iter_mut().zip(&v.values) {
            *a += x;
        }
    }
    acc.iter_mut().for_each(|a| *a /= vs.len() as f64);
    acc
}

#[allow(clippy::too_many_arguments)]
fn run_repeat(
    d: &FeatureMatrix,
    angles: &AngleTargets,
    test: &[usize],
    train: &[usize],
    selected_angles: &[Angle],
    cfg: &StabilityConfig,
    repeat: usize,
) -> Result<RepeatOutput> {
    let seed = cfg.repeat_seed(repeat);
    let rows = ingest::bootstrap_resample(train, seed)?;
    let d_boot = d.select_rows(&rows)?;
    let a_boot = angles.select_rows(&rows);
    let sel_cfg = SelectionConfig {
        seed,
        ..cfg.selection.clone()
    };
    let results = run_pipeline(&d_boot, &a_boot, &sel_cfg)?;
    let enc_boot = encode_angles(&a_boot);
    let enc_test = encode_angles(&angles.select_rows(test));

    let mut runs = Vec::with_capacity(results.len());
    let mut naive = Vec::new();
    for (res, &angle) in results.iter().zip(selected_angles) {
        let y_train = enc_boot.for_angle(angle)?;
        let y_test = enc_test.for_angle(angle)?;
        let x_train = d_boot.values().select_columns(&res.selected);
        let x_test = d.values().select_rows(test).select_columns(&res.selected);
        let theta: Vec<f64> = test.iter().map(|&i| angles.angle(angle)[i]).collect();

        let mut shap_imp = Vec::with_capacity(2);
        let mut ols_imp = Vec::with_capacity(2);
        let mut rf_pred = Vec::with_capacity(2);
        let mut ols_pred = Vec::with_capacity(2);
        let mut truth = Vec::with_capacity(2);
        for c in 0..2 {
            let y = y_train.values().column(c);
            let mut p = cfg.selection.forest.clone();
            p.seed = rng::derive_seed(seed, &format!("downstream/{}", angle.as_str()), c as u64);
            let forest = fit_forest(&x_train, &y, &p)?;
            shap_imp.push(mean_abs_shap(&tree_shap(&forest, &x_test)?));
            rf_pred.push(forest.predict(&x_test)?);
            let ols = fit_ols(&x_train, &y)?;
            ols_imp.push(linear_shap_importance(&ols.coefficients, &x_train, &x_test));
            ols_pred.push(ols.predict(&x_test)?);
            truth.push(y_test.values().column(c));
        }
        let t = [truth[0].as_slice(), truth[1].as_slice()];
        let accuracy = alloc::vec![
            score_components(angle, "forest", t, [&rf_pred[0], &rf_pred[1]], &theta)?,
            score_components(angle, "ols", t, [&ols_pred[0], &ols_pred[1]], &theta)?,
        ];
        runs.push(RunRecord {
            repeat,
            seed,
            n_clusters: res.partition.len(),
            selected: res.selected.clone(),
            selected_names: res.selected_names.clone(),
            forest: ModelRanking::new(&res.selected, average(&shap_imp)),
            ols: ModelRanking::new(&res.selected, average(&ols_imp)),
            accuracy,
        });

        if cfg.naive_baseline {
            let imp = component_importance(
                d_boot.values(),
                y_train.values(),
                &cfg.selection.forest,
                ImportanceBackend::Impurity,
                rng::derive_seed(seed, &format!("naive/{}", angle.as_str()), 0),
                "column",
            )?;
            naive.push(rank_descending(&imp));
        }
    }
    Ok(RepeatOutput { runs, naive })
}

fn model_stability(
    model: &str,
    runs: &[RunRecord],
    pick: impl Fn(&RunRecord) -> &ModelRanking,
    k_grid: &[usize],
    m: usize,
) -> Result<ModelStability> {
    let rankings: Vec<Vec<usize>> = runs.iter().map(|r| pick(r).ranking.clone()).collect();
    let kuncheva = kuncheva_curve(&rankings, k_grid, m)?;
    let mut pairs = Vec::new();
    for a in 0..runs.len() {
        for b in a + 1..runs.len() {
            let rho = pair_spearman(&runs[a].selected, pick(&runs[a]), &runs[b].selected, pick(&runs[b]));
            pairs.push((a, b, rho));
        }
    }
    let defined: Vec<f64> = pairs.iter().filter_map(|p| p.2).collect();
    let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(ModelStability {
        model: model.into(),
        kuncheva,
        spearman: SpearmanSummary { pairs, mean },
    })
}

/// Splits once, then reruns the whole pipeline on bootstrap resamples of the
/// training fold and measures how stable the SHAP rankings are. Returns one
/// report per angle in the selection's target.
pub fn run_stability(d: &FeatureMatrix, angles: &AngleTargets, cfg: &StabilityConfig) -> Result<Vec<StabilityReport>> {
    let m = d.m();
    cfg.validate(m)?;
    if angles.len() != d.n() {
        return Err(Error::DimensionMismatch {
            context: "angle rows vs feature rows",
            expected: d.n(),
            found: angles.len(),
        });
    }
    let k_grid = cfg.resolved_k_grid(m);
    let split = ingest::split(d.n(), cfg.train_fraction, cfg.seed)?;
    let selected_angles = cfg.selection.target_angle.angles();

    let outputs: Vec<Result<RepeatOutput>> = par::map_range(cfg.n_repeats, |r| {
        run_repeat(
            d,
            angles,
            &split.test_indices,
            &split.train_indices,
            &selected_angles,
            cfg,
            r,
        )
    });
    let outputs: Vec<RepeatOutput> = outputs.into_iter().collect::<Result<_>>()?;

    selected_angles
        .iter()
        .enumerate()
        .map(|(ai, &angle)| {
            let runs: Vec<RunRecord> = outputs.iter().map(|o| o.runs[ai].clone()).collect();
            let forest = model_stability("forest", &runs, |r| &r.forest, &k_grid, m)?;
            let ols = model_stability("ols", &runs, |r| &r.ols, &k_grid, m)?;
            let naive_baseline = if cfg.naive_baseline {
                let rankings: Vec<Vec<usize>> = outputs.iter().map(|o| o.naive[ai].clone()).collect();
                let kuncheva = kuncheva_curve(&rankings, &k_grid, m)?;
                Some(BaselineStability { rankings, kuncheva })
            } else {
                None
            };
            Ok(StabilityReport {
                angle,
                n_features: m,
                k_grid: k_grid.clone(),
                split: split.clone(),
                kuncheva: forest.kuncheva.clone(),
                spearman: forest.spearman.clone(),
                per_model: alloc::vec![forest, ols],
                runs,
                naive_baseline,
                config: cfg.clone(),
            })
        })
        .collect()
}

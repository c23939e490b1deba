//! CART regression trees and bagged random forests.
//!
//! Splits minimize the weighted squared error. Candidate thresholds are the
//! midpoints of consecutive distinct values among a node's samples; a row
//! goes left iff `x[feature] <= threshold`. Equal-gain candidates resolve to
//! the lowest feature index, then the lowest threshold.
//!
//! A bootstrap resample is represented as per-row multiplicities, so a row
//! drawn three times carries weight 3 and counts three times towards
//! `cover` and `min_samples_leaf`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::par;
use crate::rng::{self, StreamRng};
use crate::{Error, Result};

/// Features sampled at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mtry {
    /// `max(1, ⌊m/3⌋)`, the usual regression-forest rule.
    OneThird,
    /// All `m` features (plain bagging).
    All,
    Fixed(usize),
}

impl Mtry {
    pub fn resolve(self, m: usize) -> Result<usize> {
        match self {
            Mtry::OneThird => Ok((m / 3).max(1)),
            Mtry::All => Ok(m),
            Mtry::Fixed(k) if k >= 1 && k <= m => Ok(k),
            Mtry::Fixed(k) => Err(Error::InvalidParameter {
                name: "mtry",
                reason: format!("{k} not in [1, {m}]"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub mtry: Mtry,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            mtry: Mtry::OneThird,
            min_samples_leaf: 5,
            max_depth: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self, m: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParameter {
                name: "n_trees",
                reason: "need at least one tree".into(),
            });
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidParameter {
                name: "min_samples_leaf",
                reason: "must be at least 1".into(),
            });
        }
        self.mtry.resolve(m).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Weighted training-sample count reaching the node.
        cover: usize,
        /// Weighted mean training target at the node.
        value: f64,
    },
    Leaf {
        cover: usize,
        value: f64,
    },
}

impl Node {
    pub fn cover(&self) -> usize {
        match *self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => cover,
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            Node::Split { value, .. } | Node::Leaf { value, .. } => value,
        }
    }
}

/// Arena-allocated binary tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// Wraps a node arena after checking structural invariants.
    pub fn from_nodes(nodes: Vec<Node>, feature_count: usize) -> Result<Self> {
        let t = Self { nodes };
        t.validate(feature_count)?;
        Ok(t)
    }

    pub fn leaf(value: f64, cover: usize) -> Self {
        Self {
            nodes: alloc::vec![Node::Leaf { cover, value }],
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[feature] <= threshold { left } else { right },
                Node::Leaf { .. } => return i,
            }
        }
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.nodes[self.leaf_index(x)].value()
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn uses_feature(&self, f: usize) -> bool {
        self.nodes
            .iter()
            .any(|n| matches!(*n, Node::Split { feature, .. } if feature == f))
    }

    /// Squared-error decrease credited to each split feature.
    ///
    /// For a split with children `L`, `R` this is
    /// `n_L (μ_L − μ)² + n_R (μ_R − μ)²`, which equals the parent's SSE minus
    /// the children's SSE when node values are weighted means.
    pub fn impurity_decrease(&self, m: usize) -> Vec<f64> {
        let mut out = alloc::vec![0.0; m];
        for n in &self.nodes {
            if let Node::Split {
                feature,
                left,
                right,
                value,
                ..
            } = *n
            {
                let (l, r) = (&self.nodes[left], &self.nodes[right]);
                let dl = l.value() - value;
                let dr = r.value() - value;
                out[feature] += l.cover() as f64 * dl * dl + r.cover() as f64 * dr * dr;
            }
        }
        out
    }

    fn validate(&self, m: usize) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::InvalidModel("tree has no nodes".into()));
        }
        let mut seen = alloc::vec![false; self.nodes.len()];
        let mut stack = alloc::vec![0usize];
        while let Some(i) = stack.pop() {
            if seen[i] {
                return Err(Error::InvalidModel(format!("node {i} reachable twice")));
            }
            seen[i] = true;
            match self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    cover,
                    value,
                } => {
                    if feature >= m {
                        return Err(Error::InvalidModel(format!(
                            "node {i} splits on feature {feature} >= {m}"
                        )));
                    }
                    if !threshold.is_finite() || !value.is_finite() {
                        return Err(Error::InvalidModel(format!("node {i} is not finite")));
                    }
                    if left >= self.nodes.len() || right >= self.nodes.len() {
                        return Err(Error::InvalidModel(format!("node {i} child out of range")));
                    }
                    let sum = self.nodes[left].cover() + self.nodes[right].cover();
                    if sum != cover {
                        return Err(Error::InvalidModel(format!(
                            "node {i} cover {cover} != children {sum}"
                        )));
                    }
                    stack.push(left);
                    stack.push(right);
                }
                Node::Leaf { value, .. } => {
                    if !value.is_finite() {
                        return Err(Error::InvalidModel(format!("leaf {i} is not finite")));
                    }
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidModel("unreachable nodes in arena".into()));
        }
        Ok(())
    }
}

/// Column-major copy of the training data plus each feature's rows sorted
/// by value (ties by row index). Shared by all trees of a forest.
struct Presorted {
    columns: Vec<Vec<f64>>,
    order: Vec<Vec<u32>>,
}

impl Presorted {
    fn new(x: &Matrix) -> Self {
        let columns = x.columns();
        let order = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..col.len() as u32).collect();
                idx.sort_by(|&a, &b| {
                    col[a as usize]
                        .total_cmp(&col[b as usize])
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        Self { columns, order }
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Candidate {
    fn beats(&self, other: &Option<Candidate>) -> bool {
        match other {
            None => true,
            Some(o) => match self.gain.partial_cmp(&o.gain) {
                Some(Ordering::Greater) => true,
                Some(Ordering::Equal) => {
                    self.feature < o.feature
                        || (self.feature == o.feature && self.threshold < o.threshold)
                }
                _ => false,
            },
        }
    }
}

struct Builder<'a> {
    data: &'a Presorted,
    y: &'a [f64],
    weight: &'a [u32],
    order: Vec<Vec<u32>>,
    scratch: Vec<u32>,
    goes_left: Vec<bool>,
    features: Vec<usize>,
    mtry: usize,
    min_leaf: u64,
    max_depth: Option<usize>,
    rng: StreamRng,
    nodes: Vec<Node>,
}

impl<'a> Builder<'a> {
    fn new(
        data: &'a Presorted,
        y: &'a [f64],
        weight: &'a [u32],
        params: &ForestParams,
        mtry: usize,
        rng: StreamRng,
    ) -> Self {
        let order: Vec<Vec<u32>> = data
            .order
            .iter()
            .map(|o| o.iter().copied().filter(|&r| weight[r as usize] > 0).collect())
            .collect();
        let active = order.first().map_or(0, Vec::len);
        Self {
            data,
            y,
            weight,
            order,
            scratch: Vec::with_capacity(active),
            goes_left: alloc::vec![false; y.len()],
            features: (0..data.columns.len()).collect(),
            mtry,
            min_leaf: params.min_samples_leaf as u64,
            max_depth: params.max_depth,
            rng,
            nodes: Vec::new(),
        }
    }

    fn build(mut self) -> Tree {
        let n = self.order.first().map_or(0, Vec::len);
        self.grow(0, n, 0);
        Tree { nodes: self.nodes }
    }

    fn grow(&mut self, start: usize, end: usize, depth: usize) -> usize {
        let (mut w, mut s) = (0u64, 0.0f64);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &r in &self.order[0][start..end] {
            let r = r as usize;
            let c = self.weight[r];
            let y = self.y[r];
            w += u64::from(c);
            s += f64::from(c) * y;
            lo = lo.min(y);
            hi = hi.max(y);
        }
        let value = s / w as f64;
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            cover: w as usize,
            value,
        });

        let depth_ok = self.max_depth.is_none_or(|d| depth < d);
        if !depth_ok || lo == hi || w < 2 * self.min_leaf {
            return id;
        }
        let Some(best) = self.best_split(start, end, w, s) else {
            return id;
        };

        let col = &self.data.columns[best.feature];
        let mut n_left = 0;
        for &r in &self.order[0][start..end] {
            let left = col[r as usize] <= best.threshold;
            self.goes_left[r as usize] = left;
            n_left += usize::from(left);
        }
        for f in 0..self.order.len() {
            stable_partition(
                &mut self.order[f][start..end],
                &mut self.scratch,
                &self.goes_left,
            );
        }
        let mid = start + n_left;
        let left = self.grow(start, mid, depth + 1);
        let right = self.grow(mid, end, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
            cover: w as usize,
            value,
        };
        id
    }

    fn best_split(&mut self, start: usize, end: usize, w: u64, s: f64) -> Option<Candidate> {
        let m = self.features.len();
        let (chosen, _) = self.features.partial_shuffle(&mut self.rng, self.mtry);
        let mut chosen: Vec<usize> = chosen.to_vec();
        if self.mtry < m {
            chosen.sort_unstable();
        }
        let parent = s * s / w as f64;
        let mut best: Option<Candidate> = None;
        for &f in &chosen {
            let col = &self.data.columns[f];
            let rows = &self.order[f][start..end];
            let (mut wl, mut sl) = (0u64, 0.0f64);
            for k in 0..rows.len() - 1 {
                let r = rows[k] as usize;
                let c = self.weight[r];
                wl += u64::from(c);
                sl += f64::from(c) * self.y[r];
                let (a, b) = (col[r], col[rows[k + 1] as usize]);
                if a == b {
                    continue;
                }
                let wr = w - wl;
                if wl < self.min_leaf {
                    continue;
                }
                if wr < self.min_leaf {
                    break;
                }
                let sr = s - sl;
                let gain = sl * sl / wl as f64 + sr * sr / wr as f64 - parent;
                let mut threshold = a + (b - a) * 0.5;
                if threshold >= b {
                    threshold = a;
                }
                let cand = Candidate {
                    gain,
                    feature: f,
                    threshold,
                };
                if cand.beats(&best) {
                    best = Some(cand);
                }
            }
        }
        best.filter(|b| b.gain > 0.0)
    }
}

fn stable_partition(slice: &mut [u32], scratch: &mut Vec<u32>, goes_left: &[bool]) {
    scratch.clear();
    let mut k = 0;
    for i in 0..slice.len() {
        let r = slice[i];
        if goes_left[r as usize] {
            slice[k] = r;
            k += 1;
        } else {
            scratch.push(r);
        }
    }
    slice[k..].copy_from_slice(scratch);
}

fn check_xy(x: &Matrix, y: &[f64]) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::EmptyInput("training rows"));
    }
    if x.ncols() == 0 {
        return Err(Error::EmptyInput("training features"));
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "rows of X vs length of y",
            expected: x.nrows(),
            found: y.len(),
        });
    }
    if x.nrows() > u32::MAX as usize {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "too many rows".into(),
        });
    }
    Ok(())
}

/// Fits one CART tree on all rows (no resampling).
pub fn fit_tree(x: &Matrix, y: &[f64], params: &ForestParams, rng_seed: u64) -> Result<Tree> {
    check_xy(x, y)?;
    params.validate(x.ncols())?;
    let mtry = params.mtry.resolve(x.ncols())?;
    let data = Presorted::new(x);
    let weight = alloc::vec![1u32; y.len()];
    let rng = rng::stream(rng_seed, "tree", 0);
    Ok(Builder::new(&data, y, &weight, params, mtry, rng).build())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionForest {
    trees: Vec<Tree>,
    params: ForestParams,
    feature_count: usize,
    oob_indices: Vec<Vec<usize>>,
}

impl RegressionForest {
    /// Assembles a forest from existing trees, validating each.
    pub fn from_trees(trees: Vec<Tree>, feature_count: usize, params: ForestParams) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::EmptyInput("forest has no trees"));
        }
        for t in &trees {
            t.validate(feature_count)?;
        }
        Ok(Self {
            trees,
            params,
            feature_count,
            oob_indices: Vec::new(),
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    /// Out-of-bag rows of each tree; empty when bootstrap is off.
    pub fn oob_indices(&self) -> &[Vec<usize>] {
        &self.oob_indices
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.ncols() != self.feature_count {
            return Err(Error::DimensionMismatch {
                context: "prediction columns",
                expected: self.feature_count,
                found: x.ncols(),
            });
        }
        Ok((0..x.nrows()).map(|i| self.predict_row(x.row(i))).collect())
    }

    /// Raw per-feature squared-error decrease, averaged over trees.
    pub fn impurity_decrease(&self) -> Vec<f64> {
        let m = self.feature_count;
        let mut total = alloc::vec![0.0; m];
        for t in &self.trees {
            for (a, b) in total.iter_mut().zip(t.impurity_decrease(m)) {
                *a += b;
            }
        }
        let k = self.trees.len() as f64;
        total.iter_mut().for_each(|v| *v /= k);
        total
    }

    pub fn to_document(&self) -> ForestDocument {
        ForestDocument {
            format: FOREST_FORMAT.into(),
            version: FOREST_VERSION,
            feature_count: self.feature_count,
            params: self.params.clone(),
            trees: self.trees.iter().map(|t| NodeDoc::from_tree(t, 0)).collect(),
            oob_indices: self.oob_indices.clone(),
        }
    }

    pub fn from_document(doc: ForestDocument) -> Result<Self> {
        if doc.format != FOREST_FORMAT || doc.version != FOREST_VERSION {
            return Err(Error::InvalidModel(format!(
                "unsupported forest document {} v{}",
                doc.format, doc.version
            )));
        }
        let trees = doc
            .trees
            .iter()
            .map(|root| {
                let mut nodes = Vec::new();
                root.flatten(&mut nodes);
                Tree::from_nodes(nodes, doc.feature_count)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut f = Self::from_trees(trees, doc.feature_count, doc.params)?;
        if !doc.oob_indices.is_empty() && doc.oob_indices.len() != f.trees.len() {
            return Err(Error::InvalidModel("oob list count != tree count".into()));
        }
        f.oob_indices = doc.oob_indices;
        Ok(f)
    }
}

/// Fits `params.n_trees` trees, each on its own bootstrap resample (when
/// enabled) with its own random stream keyed by `(params.seed, tree index)`.
pub fn fit_forest(x: &Matrix, y: &[f64], params: &ForestParams) -> Result<RegressionForest> {
    check_xy(x, y)?;
    params.validate(x.ncols())?;
    let mtry = params.mtry.resolve(x.ncols())?;
    let n = y.len();
    let data = Presorted::new(x);
    let fitted: Vec<(Tree, Vec<usize>)> = par::map_range(params.n_trees, |t| {
        let mut r = rng::stream(params.seed, "forest-tree", t as u64);
        let mut weight = alloc::vec![0u32; n];
        if params.bootstrap {
            for _ in 0..n {
                weight[r.random_range(0..n)] += 1;
            }
        } else {
            weight.iter_mut().for_each(|w| *w = 1);
        }
        let oob = if params.bootstrap {
            (0..n).filter(|&i| weight[i] == 0).collect()
        } else {
            Vec::new()
        };
        (Builder::new(&data, y, &weight, params, mtry, r).build(), oob)
    });
    let (trees, oob_indices) = fitted.into_iter().unzip();
    Ok(RegressionForest {
        trees,
        params: params.clone(),
        feature_count: x.ncols(),
        oob_indices: if params.bootstrap { oob_indices } else { Vec::new() },
    })
}

pub fn predict(forest: &RegressionForest, x: &Matrix) -> Result<Vec<f64>> {
    forest.predict(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Raw,
    SumToOne,
}

/// Non-negative per-feature importance scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    pub values: Vec<f64>,
    pub normalization: Normalization,
}

impl ImportanceVector {
    /// Rescales to unit sum when the total is positive; otherwise stays raw.
    pub fn normalized(values: Vec<f64>) -> Self {
        let total: f64 = values.iter().sum();
        if total > 0.0 {
            Self {
                values: values.iter().map(|v| v / total).collect(),
                normalization: Normalization::SumToOne,
            }
        } else {
            Self {
                values,
                normalization: Normalization::Raw,
            }
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Indices by descending value, ties to the lower index.
    pub fn ranking(&self) -> Vec<usize> {
        rank_descending(&self.values)
    }
}

/// Indices sorted by descending score; equal scores keep ascending index order.
pub fn rank_descending(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

/// Mean decrease in squared error, normalized to sum to one.
pub fn impurity_importance(forest: &RegressionForest) -> ImportanceVector {
    ImportanceVector::normalized(forest.impurity_decrease())
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Increase in MSE when one column is shuffled, averaged over repeats,
/// clamped at zero and normalized.
pub fn permutation_importance(
    forest: &RegressionForest,
    x: &Matrix,
    y: &[f64],
    n_repeats: usize,
    seed: u64,
) -> Result<ImportanceVector> {
    check_xy(x, y)?;
    if n_repeats == 0 {
        return Err(Error::InvalidParameter {
            name: "n_repeats",
            reason: "must be at least 1".into(),
        });
    }
    let baseline = mse(&forest.predict(x)?, y);
    let m = forest.feature_count;
    let scores: Vec<f64> = par::map_range(m, |j| {
        let mut total = 0.0;
        let original = x.column(j);
        for rep in 0..n_repeats {
            let mut perm = original.clone();
            perm.shuffle(&mut rng::stream(seed, "permute", (j * n_repeats + rep) as u64));
            let mut xp = x.clone();
            for (i, v) in perm.iter().enumerate() {
                xp.set(i, j, *v);
            }
            let pred: Vec<f64> = (0..xp.nrows()).map(|i| forest.predict_row(xp.row(i))).collect();
            total += mse(&pred, y) - baseline;
        }
        (total / n_repeats as f64).max(0.0)
    });
    Ok(ImportanceVector::normalized(scores))
}

pub const FOREST_FORMAT: &str = "tangled-forest";
pub const FOREST_VERSION: u32 = 1;

/// Versioned, nested serialization of a forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestDocument {
    pub format: String,
    pub version: u32,
    pub feature_count: usize,
    pub params: ForestParams,
    pub trees: Vec<NodeDoc>,
    #[serde(default)]
    pub oob_indices: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeDoc {
    Split {
        feature: usize,
        threshold: f64,
        cover: usize,
        node_value: f64,
        left: alloc::boxed::Box<NodeDoc>,
        right: alloc::boxed::Box<NodeDoc>,
    },
    Leaf {
        prediction: f64,
        cover: usize,
        node_value: f64,
    },
}

impl NodeDoc {
    fn from_tree(t: &Tree, i: usize) -> Self {
        match t.nodes[i] {
            Node::Split {
                feature,
                threshold,
                left,
                right,
                cover,
                value,
            } => NodeDoc::Split {
                feature,
                threshold,
                cover,
                node_value: value,
                left: alloc::boxed::Box::new(Self::from_tree(t, left)),
                right: alloc::boxed::Box::new(Self::from_tree(t, right)),
            },
            Node::Leaf { cover, value } => NodeDoc::Leaf {
                prediction: value,
                cover,
                node_value: value,
            },
        }
    }

    fn flatten(&self, out: &mut Vec<Node>) -> usize {
        let id = out.len();
        match self {
            NodeDoc::Leaf {
                prediction, cover, ..
            } => out.push(Node::Leaf {
                cover: *cover,
                value: *prediction,
            }),
            NodeDoc::Split {
                feature,
                threshold,
                cover,
                node_value,
                left,
                right,
            } => {
                out.push(Node::Leaf {
                    cover: 0,
                    value: 0.0,
                });
                let l = left.flatten(out);
                let r = right.flatten(out);
                out[id] = Node::Split {
                    feature: *feature,
                    threshold: *threshold,
                    left: l,
                    right: r,
                    cover: *cover,
                    value: *node_value,
                };
            }
        }
        id
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn params(n_trees: usize, min_leaf: usize, bootstrap: bool) -> ForestParams {
        ForestParams {
            n_trees,
            mtry: Mtry::All,
            min_samples_leaf: min_leaf,
            max_depth: None,
            bootstrap,
            seed: 3,
        }
    }

    #[test]
    fn constant_target_gives_single_leaf() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        let t = fit_tree(&x, &[4.0, 4.0, 4.0], &params(1, 1, false), 0).unwrap();
        assert_eq!(t.nodes(), &[Node::Leaf { cover: 3, value: 4.0 }]);
    }

    #[test]
    fn two_point_split_at_midpoint() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let t = fit_tree(&x, &[0.0, 10.0], &params(1, 1, false), 0).unwrap();
        match t.root() {
            Node::Split {
                feature,
                threshold,
                cover,
                value,
                ..
            } => {
                assert_eq!((*feature, *threshold, *cover, *value), (0, 0.5, 2, 5.0));
            }
            other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(t.predict_row(&[0.0]), 0.0);
        assert_eq!(t.predict_row(&[1.0]), 10.0);
        assert_eq!(t.predict_row(&[0.5]), 0.0);
    }

    #[test]
    fn max_depth_zero_is_mean_leaf() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let mut p = params(1, 1, false);
        p.max_depth = Some(0);
        let t = fit_tree(&x, &[0.0, 3.0, 6.0], &p, 0).unwrap();
        assert_eq!(t.nodes(), &[Node::Leaf { cover: 3, value: 3.0 }]);
    }

    #[test]
    fn min_leaf_blocks_small_children() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let t = fit_tree(&x, &[0.0, 0.0, 0.0, 9.0], &params(1, 2, false), 0).unwrap();
        for n in t.nodes() {
            if let Node::Leaf { cover, .. } = n {
                assert!(*cover >= 2);
            }
        }
    }

    #[test]
    fn equal_gain_prefers_lower_feature() {
        // columns 0 and 1 are identical, so every split ties
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]).unwrap();
        let t = fit_tree(&x, &[0.0, 0.0, 5.0, 5.0], &params(1, 1, false), 0).unwrap();
        assert!(matches!(t.root(), Node::Split { feature: 0, .. }));
        assert!(!t.uses_feature(1));
    }

    #[test]
    fn forest_averages_trees() {
        let a = Tree::leaf(0.0, 2);
        let b = Tree::leaf(10.0, 2);
        let f = RegressionForest::from_trees(vec![a, b], 1, ForestParams::default()).unwrap();
        let x = Matrix::from_rows(&[[1.0], [-3.0]]).unwrap();
        assert_eq!(f.predict(&x).unwrap(), vec![5.0, 5.0]);
        assert!(f.predict(&Matrix::zeros(1, 2)).is_err());
        let imp = impurity_importance(&f);
        assert_eq!(imp.values, vec![0.0]);
        assert_eq!(imp.normalization, Normalization::Raw);
    }

    #[test]
    fn single_tree_forest_without_bootstrap_matches_tree() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.5], [2.0, 0.2], [3.0, 0.9]]).unwrap();
        let y = [1.0, 2.0, 0.5, 3.0];
        let p = params(1, 1, false);
        let f = fit_forest(&x, &y, &p).unwrap();
        assert!(f.oob_indices().is_empty());
        let t = &f.trees()[0];
        for i in 0..4 {
            assert_eq!(f.predict_row(x.row(i)), t.predict_row(x.row(i)));
            assert_eq!(t.predict_row(x.row(i)), y[i]);
        }
    }

    #[test]
    fn one_split_puts_all_mass_on_its_feature() {
        let nodes = vec![
            Node::Split {
                feature: 3,
                threshold: 0.0,
                left: 1,
                right: 2,
                cover: 4,
                value: 1.0,
            },
            Node::Leaf { cover: 2, value: 0.0 },
            Node::Leaf { cover: 2, value: 2.0 },
        ];
        let t = Tree::from_nodes(nodes, 5).unwrap();
        let f = RegressionForest::from_trees(vec![t], 5, ForestParams::default()).unwrap();
        assert_eq!(f.impurity_decrease(), vec![0.0, 0.0, 0.0, 4.0, 0.0]);
        assert_eq!(impurity_importance(&f).values, vec![0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn loader_rejects_bad_cover_and_feature() {
        let bad = vec![
            Node::Split {
                feature: 0,
                threshold: 0.0,
                left: 1,
                right: 2,
                cover: 5,
                value: 1.0,
            },
            Node::Leaf { cover: 2, value: 0.0 },
            Node::Leaf { cover: 2, value: 2.0 },
        ];
        assert!(Tree::from_nodes(bad.clone(), 1).is_err());
        let mut ok = bad;
        ok[0] = Node::Split {
            feature: 1,
            threshold: 0.0,
            left: 1,
            right: 2,
            cover: 4,
            value: 1.0,
        };
        assert!(Tree::from_nodes(ok.clone(), 1).is_err());
        assert!(Tree::from_nodes(ok, 2).is_ok());
    }

    #[test]
    fn mtry_resolution() {
        assert_eq!(Mtry::OneThird.resolve(2).unwrap(), 1);
        assert_eq!(Mtry::OneThird.resolve(15).unwrap(), 5);
        assert_eq!(Mtry::All.resolve(7).unwrap(), 7);
        assert!(Mtry::Fixed(0).resolve(3).is_err());
        assert!(Mtry::Fixed(4).resolve(3).is_err());
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        let p = ForestParams::default();
        assert!(fit_tree(&Matrix::zeros(0, 1), &[], &p, 0).is_err());
        assert!(fit_forest(&Matrix::zeros(2, 1), &[1.0], &p).is_err());
    }
}

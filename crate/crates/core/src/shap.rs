//! Path-dependent TreeSHAP for the regression forest, plus an exhaustive
//! Shapley oracle over the same cover-weighted characteristic function.
//!
//! Features outside a coalition are marginalized by descending both children
//! of a split, weighted by the children's share of the parent's cover.

use alloc::vec::Vec;

use crate::forest::{ImportanceVector, Node, RegressionForest, Tree};
use crate::matrix::Matrix;
use crate::par;
use crate::{Error, Result};

/// Per-row, per-feature attributions and the expected model output.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapMatrix {
    pub values: Matrix,
    pub base_value: f64,
}

impl ShapMatrix {
    /// `base_value + Σ_j values[i][j]` for every row.
    pub fn reconstructed(&self) -> Vec<f64> {
        (0..self.values.nrows())
            .map(|i| self.base_value + self.values.row(i).iter().sum::<f64>())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct PathElem {
    feature: usize,
    zero: f64,
    one: f64,
    weight: f64,
}

const NO_FEATURE: usize = usize::MAX;

fn extend(path: &mut [PathElem], depth: usize, zero: f64, one: f64, feature: usize) {
    path[depth] = PathElem {
        feature,
        zero,
        one,
        weight: if depth == 0 { 1.0 } else { 0.0 },
    };
    let d1 = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / d1;
        path[i].weight = zero * path[i].weight * (depth - i) as f64 / d1;
    }
}

fn unwind(path: &mut [PathElem], depth: usize, at: usize) {
    let one = path[at].one;
    let zero = path[at].zero;
    let d1 = (depth + 1) as f64;
    let mut next = path[depth].weight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next * d1 / ((i + 1) as f64 * one);
            next = tmp - path[i].weight * zero * (depth - i) as f64 / d1;
        } else {
            path[i].weight = path[i].weight * d1 / (zero * (depth - i) as f64);
        }
    }
    for i in at..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
}

fn unwound_sum(path: &[PathElem], depth: usize, at: usize) -> f64 {
    let one = path[at].one;
    let zero = path[at].zero;
    let d1 = (depth + 1) as f64;
    let mut total = 0.0;
    if one != 0.0 {
        let mut next = path[depth].weight;
        for i in (0..depth).rev() {
            let tmp = next * d1 / ((i + 1) as f64 * one);
            total += tmp;
            next = path[i].weight - tmp * zero * (depth - i) as f64 / d1;
        }
    } else {
        for i in (0..depth).rev() {
            total += path[i].weight * d1 / (zero * (depth - i) as f64);
        }
    }
    total
}

struct TreeExplainer<'a> {
    tree: &'a Tree,
    x: &'a [f64],
    phi: &'a mut [f64],
}

impl TreeExplainer<'_> {
    /// `parent` is the offset of the parent's path segment in `buf`; this
    /// node's segment starts right after it.
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        &mut self,
        buf: &mut [PathElem],
        parent: usize,
        node: usize,
        mut depth: usize,
        zero: f64,
        one: f64,
        feature: usize,
    ) {
        let start = parent + depth + 1;
        buf.copy_within(parent..parent + depth + 1, start);
        let path = &mut buf[start..];
        extend(path, depth, zero, one, feature);

        match self.tree.nodes()[node] {
            Node::Leaf { value, .. } => {
                for i in 1..=depth {
                    let w = unwound_sum(path, depth, i);
                    let el = path[i];
                    self.phi[el.feature] += w * (el.one - el.zero) * value;
                }
            }
            Node::Split {
                feature: split,
                threshold,
                left,
                right,
                cover,
                ..
            } => {
                let (hot, cold) = if self.x[split] <= threshold {
                    (left, right)
                } else {
                    (right, left)
                };
                let nodes = self.tree.nodes();
                let w = cover as f64;
                let hot_zero = nodes[hot].cover() as f64 / w;
                let cold_zero = nodes[cold].cover() as f64 / w;
                let (mut in_zero, mut in_one) = (1.0, 1.0);
                if let Some(k) = (1..=depth).find(|&k| path[k].feature == split) {
                    in_zero = path[k].zero;
                    in_one = path[k].one;
                    unwind(path, depth, k);
                    depth -= 1;
                }
                self.recurse(buf, start, hot, depth + 1, hot_zero * in_zero, in_one, split);
                self.recurse(buf, start, cold, depth + 1, cold_zero * in_zero, 0.0, split);
            }
        }
    }
}

fn check_covers(forest: &RegressionForest) -> Result<()> {
    for (t, tree) in forest.trees().iter().enumerate() {
        if let Some(node) = tree.nodes().iter().position(|n| n.cover() == 0) {
            return Err(Error::MissingCover { tree: t, node });
        }
    }
    Ok(())
}

/// Attributions of one tree for one row.
pub fn tree_shap_row(tree: &Tree, x: &[f64], m: usize) -> Vec<f64> {
    let mut phi = alloc::vec![0.0; m];
    let d = tree.depth() + 2;
    let mut buf = alloc::vec![PathElem::default(); (d + 1) * (d + 2) / 2 + d];
    let mut ex = TreeExplainer {
        tree,
        x,
        phi: &mut phi,
    };
    ex.recurse(&mut buf, 0, 0, 0, 1.0, 1.0, NO_FEATURE);
    phi
}

/// Forest attributions: mean of per-tree TreeSHAP values. The base value is
/// the mean of the trees' root values.
pub fn tree_shap(forest: &RegressionForest, x: &Matrix) -> Result<ShapMatrix> {
    let m = forest.feature_count();
    if x.ncols() != m {
        return Err(Error::DimensionMismatch {
            context: "SHAP input columns",
            expected: m,
            found: x.ncols(),
        });
    }
    check_covers(forest)?;
    let trees = forest.trees();
    let k = trees.len() as f64;
    let rows: Vec<Vec<f64>> = par::map_range(x.nrows(), |i| {
        let mut acc = alloc::vec![0.0; m];
        for t in trees {
            for (a, v) in acc.iter_mut().zip(tree_shap_row(t, x.row(i), m)) {
                *a += v;
            }
        }
        acc.iter_mut().for_each(|a| *a /= k);
        acc
    });
    let mut values = Matrix::zeros(x.nrows(), m);
    for (i, r) in rows.iter().enumerate() {
        for (j, &v) in r.iter().enumerate() {
            values.set(i, j, v);
        }
    }
    let base_value = trees.iter().map(|t| t.root().value()).sum::<f64>() / k;
    Ok(ShapMatrix { values, base_value })
}

pub const BRUTE_FORCE_MAX_FEATURES: usize = 12;

/// Cover-weighted conditional expectation of the tree given the features
/// in `coalition` (bit mask) are fixed to `x`.
pub fn conditional_expectation(tree: &Tree, x: &[f64], coalition: u32) -> f64 {
    fn go(tree: &Tree, i: usize, x: &[f64], s: u32) -> f64 {
        match tree.nodes()[i] {
            Node::Leaf { value, .. } => value,
            Node::Split {
                feature,
                threshold,
                left,
                right,
                cover,
            ..
            } => {
                if s & (1 << feature) != 0 {
                    go(tree, if x[feature] <= threshold { left } else { right }, x, s)
                } else {
                    let n = tree.nodes();
                    let w = cover as f64;
                    (n[left].cover() as f64 * go(tree, left, x, s)
                        + n[right].cover() as f64 * go(tree, right, x, s))
                        / w
                }
            }
        }
    }
    go(tree, 0, x, coalition)
}

/// Exact Shapley values by enumerating all `2^m` coalitions.
pub fn brute_force_shapley(tree: &Tree, x: &[f64], m: usize) -> Result<Vec<f64>> {
    if m > BRUTE_FORCE_MAX_FEATURES {
        return Err(Error::TooManyFeatures {
            found: m,
            max: BRUTE_FORCE_MAX_FEATURES,
        });
    }
    if x.len() < m {
        return Err(Error::DimensionMismatch {
            context: "row length",
            expected: m,
            found: x.len(),
        });
    }
    let full = 1u32 << m;
    let values: Vec<f64> = (0..full)
        .map(|s| conditional_expectation(tree, x, s))
        .collect();
    // weight(|S|) = |S|! (m - |S| - 1)! / m!
    let mut fact = alloc::vec![1.0f64; m + 1];
    for i in 1..=m {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut phi = alloc::vec![0.0; m];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1u32 << i;
        for s in 0..full {
            if s & bit != 0 {
                continue;
            }
            let size = s.count_ones() as usize;
            let w = fact[size] * fact[m - size - 1] / fact[m];
            *p += w * (values[(s | bit) as usize] - values[s as usize]);
        }
    }
    Ok(phi)
}

/// `(1/n) Σ_i |values[i][j]|`, normalized to sum to one when positive.
pub fn mean_abs_shap(s: &ShapMatrix) -> ImportanceVector {
    let n = s.values.nrows();
    let m = s.values.ncols();
    let mut acc = alloc::vec![0.0; m];
    for i in 0..n {
        for (a, v) in acc.iter_mut().zip(s.values.row(i)) {
            *a += v.abs();
        }
    }
    if n > 0 {
        acc.iter_mut().for_each(|a| *a /= n as f64);
    }
    ImportanceVector::normalized(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::ForestParams;
    use alloc::vec;

    fn stump(a: f64, b: f64, cl: usize, cr: usize) -> Tree {
        let cover = cl + cr;
        let value = (a * cl as f64 + b * cr as f64) / cover as f64;
        Tree::from_nodes(
            vec![
                Node::Split {
                    feature: 0,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                    cover,
                    value,
                },
                Node::Leaf { cover: cl, value: a },
                Node::Leaf { cover: cr, value: b },
            ],
            2,
        )
        .unwrap()
    }

    #[test]
    fn single_leaf_has_zero_attribution() {
        let f = RegressionForest::from_trees(vec![Tree::leaf(3.5, 10)], 2, ForestParams::default())
            .unwrap();
        let x = Matrix::from_rows(&[[0.0, 1.0], [4.0, 2.0]]).unwrap();
        let s = tree_shap(&f, &x).unwrap();
        assert_eq!(s.base_value, 3.5);
        assert!(s.values.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(brute_force_shapley(&f.trees()[0], x.row(0), 2).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn balanced_stump_closed_form() {
        let (a, b) = (2.0, 10.0);
        let t = stump(a, b, 5, 5);
        let f = RegressionForest::from_trees(vec![t.clone()], 2, ForestParams::default()).unwrap();
        let x = Matrix::from_rows(&[[0.0, 7.0]]).unwrap();
        let s = tree_shap(&f, &x).unwrap();
        assert!((s.base_value - (a + b) / 2.0).abs() < 1e-12);
        assert!((s.values.get(0, 0) - (a - b) / 2.0).abs() < 1e-12);
        assert_eq!(s.values.get(0, 1), 0.0);
        let bf = brute_force_shapley(&t, x.row(0), 2).unwrap();
        assert!((bf[0] - (a - b) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_features_share_credit() {
        // split on 0 then on 1 with mirrored structure: symmetric in (0, 1)
        let nodes = vec![
            Node::Split {
                feature: 0,
                threshold: 0.5,
                left: 1,
                right: 2,
                cover: 8,
                value: 2.5,
            },
            Node::Split {
                feature: 1,
                threshold: 0.5,
                left: 3,
                right: 4,
                cover: 4,
                value: 0.5,
            },
            Node::Split {
                feature: 1,
                threshold: 0.5,
                left: 5,
                right: 6,
                cover: 4,
                value: 4.5,
            },
            Node::Leaf { cover: 2, value: 0.0 },
            Node::Leaf { cover: 2, value: 1.0 },
            Node::Leaf { cover: 2, value: 1.0 },
            Node::Leaf { cover: 2, value: 8.0 },
        ];
        let t = Tree::from_nodes(nodes, 2).unwrap();
        for x in [[0.0, 0.0], [1.0, 1.0]] {
            let bf = brute_force_shapley(&t, &x, 2).unwrap();
            assert!((bf[0] - bf[1]).abs() < 1e-12);
            let ts = tree_shap_row(&t, &x, 2);
            assert!((ts[0] - bf[0]).abs() < 1e-12 && (ts[1] - bf[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn brute_force_limits() {
        let t = Tree::leaf(1.0, 1);
        assert!(matches!(
            brute_force_shapley(&t, &[0.0; 13], 13),
            Err(Error::TooManyFeatures { .. })
        ));
    }

    #[test]
    fn zero_cover_is_rejected() {
        let t = Tree::from_nodes(
            vec![
                Node::Split {
                    feature: 0,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                    cover: 1,
                    value: 1.0,
                },
                Node::Leaf { cover: 1, value: 1.0 },
                Node::Leaf { cover: 0, value: 3.0 },
            ],
            1,
        )
        .unwrap();
        let f = RegressionForest::from_trees(vec![t], 1, ForestParams::default()).unwrap();
        assert!(matches!(
            tree_shap(&f, &Matrix::zeros(1, 1)),
            Err(Error::MissingCover { tree: 0, node: 2 })
        ));
    }

    #[test]
    fn mean_abs_examples() {
        let zero = ShapMatrix {
            values: Matrix::zeros(3, 2),
            base_value: 0.0,
        };
        assert_eq!(mean_abs_shap(&zero).values, vec![0.0, 0.0]);
        let s = ShapMatrix {
            values: Matrix::from_rows(&[[0.0, -2.0, 0.0], [0.0, 1.0, 0.0]]).unwrap(),
            base_value: 1.0,
        };
        assert_eq!(mean_abs_shap(&s).values, vec![0.0, 1.0, 0.0]);
    }
}

//! Pearson correlation matrix, threshold graph and connected components.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::matrix::FeatureMatrix;
use crate::par;
use crate::{Error, Result};

/// Symmetric `m × m` Pearson correlation matrix.
///
/// Zero-variance columns are flagged; their correlation with every column,
/// including themselves, is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    m: usize,
    values: Vec<f64>,
    names: Vec<String>,
    constant: Vec<bool>,
}

impl CorrelationMatrix {
    /// Wraps precomputed values. Used for tests and for callers that already
    /// hold a correlation matrix.
    pub fn from_values(names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let m = names.len();
        if values.len() != m * m {
            return Err(Error::DimensionMismatch {
                context: "correlation values",
                expected: m * m,
                found: values.len(),
            });
        }
        for i in 0..m {
            for j in 0..m {
                let v = values[i * m + j];
                if !(-1.0..=1.0).contains(&v) || (v - values[j * m + i]).abs() > 1e-12 {
                    return Err(Error::Domain(format!(
                        "entry ({i}, {j}) = {v} is out of range or asymmetric"
                    )));
                }
            }
        }
        let constant = (0..m).map(|i| values[i * m + i] == 0.0).collect();
        Ok(Self {
            m,
            values,
            names,
            constant,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.m + j]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn is_constant(&self, j: usize) -> bool {
        self.constant[j]
    }

    pub fn flagged_constant(&self) -> Vec<usize> {
        (0..self.m).filter(|&j| self.constant[j]).collect()
    }
}

/// Population-convention Pearson correlation between all column pairs.
pub fn pearson_matrix(d: &FeatureMatrix) -> CorrelationMatrix {
    let n = d.n();
    let m = d.m();
    let mut centered: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut norms = Vec::with_capacity(m);
    let mut constant = Vec::with_capacity(m);
    for j in 0..m {
        let col = d.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let scale = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let c: Vec<f64> = col.iter().map(|v| v - mean).collect();
        let ss: f64 = c.iter().map(|v| v * v).sum();
        // relative cutoff so that float noise around an exact constant is not
        // mistaken for variance
        let tol = 1e-12 * scale;
        let is_const = ss <= n as f64 * tol * tol;
        constant.push(is_const);
        norms.push(libm::sqrt(ss));
        centered.push(c);
    }

    let rows: Vec<Vec<f64>> = par::map_range(m, |i| {
        (0..m)
            .map(|j| {
                if j < i || constant[i] || constant[j] {
                    0.0
                } else if i == j {
                    1.0
                } else {
                    let dot: f64 = centered[i]
                        .iter()
                        .zip(&centered[j])
                        .map(|(a, b)| a * b)
                        .sum();
                    (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0)
                }
            })
            .collect()
    });
    let mut values = alloc::vec![0.0; m * m];
    for i in 0..m {
        for j in i..m {
            values[i * m + j] = rows[i][j];
            values[j * m + i] = rows[i][j];
        }
    }
    CorrelationMatrix {
        m,
        values,
        names: d.names().to_vec(),
        constant,
    }
}

/// Undirected graph with an edge wherever `|Σij| >= τ`, `i != j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdGraph {
    pub vertex_count: usize,
    /// Sorted pairs `(i, j)` with `i < j`.
    pub edges: Vec<(usize, usize)>,
    pub tau: f64,
}

pub fn build_graph(s: &CorrelationMatrix, tau: f64) -> Result<ThresholdGraph> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "tau",
            reason: format!("{tau} not in (0, 1]"),
        });
    }
    let m = s.m();
    let mut edges = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            if s.get(i, j).abs() >= tau {
                edges.push((i, j));
            }
        }
    }
    Ok(ThresholdGraph {
        vertex_count: m,
        edges,
        tau,
    })
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: alloc::vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            core::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Partition of feature indices into connected components.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterPartition {
    /// Component id of each feature.
    pub assignment: Vec<usize>,
    /// Members of each component, ascending; components ordered by smallest member.
    pub components: Vec<Vec<usize>>,
}

impl ClusterPartition {
    /// Builds a partition from component lists, normalizing the ordering.
    pub fn from_components(m: usize, mut components: Vec<Vec<usize>>) -> Result<Self> {
        let mut assignment = alloc::vec![usize::MAX; m];
        for c in components.iter_mut() {
            if c.is_empty() {
                return Err(Error::EmptyInput("cluster component"));
            }
            c.sort_unstable();
        }
        components.sort_by_key(|c| c[0]);
        for (k, c) in components.iter().enumerate() {
            for &j in c {
                if j >= m || assignment[j] != usize::MAX {
                    return Err(Error::Domain(format!(
                        "feature {j} missing from universe or assigned twice"
                    )));
                }
                assignment[j] = k;
            }
        }
        if let Some(j) = assignment.iter().position(|&a| a == usize::MAX) {
            return Err(Error::Domain(format!("feature {j} not assigned")));
        }
        Ok(Self {
            assignment,
            components,
        })
    }

    pub fn singletons(m: usize) -> Self {
        Self {
            assignment: (0..m).collect(),
            components: (0..m).map(|j| alloc::vec![j]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

pub fn connected_components(g: &ThresholdGraph) -> ClusterPartition {
    let m = g.vertex_count;
    let mut uf = UnionFind::new(m);
    for &(i, j) in &g.edges {
        uf.union(i, j);
    }
    let mut root_to_id = alloc::vec![usize::MAX; m];
    let mut assignment = alloc::vec![0; m];
    let mut components: Vec<Vec<usize>> = Vec::new();
    // ascending scan assigns ids in order of smallest member
    for j in 0..m {
        let r = uf.find(j);
        if root_to_id[r] == usize::MAX {
            root_to_id[r] = components.len();
            components.push(Vec::new());
        }
        assignment[j] = root_to_id[r];
        components[root_to_id[r]].push(j);
    }
    ClusterPartition {
        assignment,
        components,
    }
}

/// Correlation → threshold graph → components in one call.
pub fn cluster_features(d: &FeatureMatrix, tau: f64) -> Result<(CorrelationMatrix, ClusterPartition)> {
    let s = pearson_matrix(d);
    let g = build_graph(&s, tau)?;
    Ok((s, connected_components(&g)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Matrix;
    use alloc::vec;

    fn fm(cols: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::with_default_names(Matrix::from_columns(cols).unwrap()).unwrap()
    }

    #[test]
    fn pearson_known_values() {
        let d = fm(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 4.0], vec![-1.0, -2.0, -3.0]]);
        let s = pearson_matrix(&d);
        assert_eq!(s.get(0, 0), 1.0);
        // 3 / sqrt(2 · 42/9)
        let expected = 9.0 / libm::sqrt(84.0);
        assert!((s.get(0, 1) - expected).abs() < 1e-14);
        assert!((s.get(0, 1) - 0.98198).abs() < 5e-6);
        assert!((s.get(0, 2) + 1.0).abs() < 1e-15);
        assert_eq!(s.get(1, 0), s.get(0, 1));
    }

    #[test]
    fn constant_columns_are_flagged_and_zero() {
        let d = fm(&[vec![0.1, 0.1, 0.1], vec![1.0, 2.0, 4.0]]);
        let s = pearson_matrix(&d);
        assert!(s.is_constant(0));
        assert_eq!(s.flagged_constant(), vec![0]);
        assert_eq!(s.get(0, 0), 0.0);
        assert_eq!(s.get(0, 1), 0.0);
        assert_eq!(s.get(1, 1), 1.0);
        let p = connected_components(&build_graph(&s, 0.1).unwrap());
        assert_eq!(p.components, vec![vec![0], vec![1]]);
    }

    fn corr(m: usize, pairs: &[(usize, usize, f64)]) -> CorrelationMatrix {
        let mut v = vec![0.0; m * m];
        for i in 0..m {
            v[i * m + i] = 1.0;
        }
        for &(i, j, r) in pairs {
            v[i * m + j] = r;
            v[j * m + i] = r;
        }
        CorrelationMatrix::from_values((0..m).map(|j| format!("x{j}")).collect(), v).unwrap()
    }

    #[test]
    fn threshold_is_inclusive() {
        let s = corr(3, &[(0, 1, 0.9), (1, 2, -0.7), (0, 2, 0.1)]);
        assert_eq!(build_graph(&s, 0.8).unwrap().edges, vec![(0, 1)]);
        assert_eq!(build_graph(&s, 0.7).unwrap().edges, vec![(0, 1), (1, 2)]);
        assert_eq!(build_graph(&s, 1.0).unwrap().edges, vec![]);
        assert_eq!(build_graph(&s, 0.0999).unwrap().edges.len(), 3);
        assert!(build_graph(&s, 0.0).is_err());
        assert!(build_graph(&s, 1.5).is_err());
    }

    #[test]
    fn component_examples() {
        let g = ThresholdGraph {
            vertex_count: 4,
            edges: vec![],
            tau: 0.5,
        };
        assert_eq!(connected_components(&g).components.len(), 4);
        let g = ThresholdGraph {
            vertex_count: 4,
            edges: vec![(0, 1), (1, 2)],
            tau: 0.5,
        };
        let p = connected_components(&g);
        assert_eq!(p.components, vec![vec![0, 1, 2], vec![3]]);
        assert_eq!(p.assignment, vec![0, 0, 0, 1]);
        let g = ThresholdGraph {
            vertex_count: 3,
            edges: vec![(0, 2), (1, 2), (0, 1)],
            tau: 0.5,
        };
        assert_eq!(connected_components(&g).components, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn ids_follow_smallest_member() {
        let g = ThresholdGraph {
            vertex_count: 5,
            edges: vec![(3, 4), (1, 4)],
            tau: 0.5,
        };
        let p = connected_components(&g);
        assert_eq!(p.components, vec![vec![0], vec![1, 3, 4], vec![2]]);
        let q = ClusterPartition::from_components(5, vec![vec![2], vec![4, 3, 1], vec![0]]).unwrap();
        assert_eq!(p, q);
    }
}

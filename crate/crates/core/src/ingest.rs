//! Angle targets and their cosine/sine encoding, train/test splitting,
//! bootstrap resampling and the synthetic correlated-cluster generator.
//!
//! Angles are always held in radians on the half-open interval `[-π, π)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::matrix::{FeatureMatrix, Matrix};
use crate::rng;
use crate::{Error, Result};

/// Wraps an angle in radians into `[-π, π)`. `π` maps to `-π`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut r = theta - TAU * libm::floor((theta + PI) / TAU);
    if r < -PI {
        r += TAU;
    }
    if r >= PI {
        r -= TAU;
    }
    // rounding in the two corrections can land exactly on +π
    if r >= PI {
        -PI
    } else {
        r
    }
}

/// One of the two backbone torsion angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Angle {
    Phi,
    Psi,
}

impl Angle {
    pub const ALL: [Angle; 2] = [Angle::Phi, Angle::Psi];

    pub fn as_str(self) -> &'static str {
        match self {
            Angle::Phi => "phi",
            Angle::Psi => "psi",
        }
    }

    pub fn cos_column(self) -> TargetColumn {
        match self {
            Angle::Phi => TargetColumn::CosPhi,
            Angle::Psi => TargetColumn::CosPsi,
        }
    }

    pub fn sin_column(self) -> TargetColumn {
        match self {
            Angle::Phi => TargetColumn::SinPhi,
            Angle::Psi => TargetColumn::SinPsi,
        }
    }
}

/// Paired torsion angles, one per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleTargets {
    phi: Vec<f64>,
    psi: Vec<f64>,
}

impl AngleTargets {
    /// Validates that both vectors have the same length and lie in `[-π, π)`.
    pub fn new(phi: Vec<f64>, psi: Vec<f64>) -> Result<Self> {
        if phi.len() != psi.len() {
            return Err(Error::DimensionMismatch {
                context: "phi vs psi length",
                expected: phi.len(),
                found: psi.len(),
            });
        }
        for (col, v) in [(0usize, &phi), (1, &psi)] {
            for (row, &a) in v.iter().enumerate() {
                if !a.is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
                if !(-PI..PI).contains(&a) {
                    return Err(Error::Domain(format!(
                        "angle {a} at row {row} outside [-pi, pi)"
                    )));
                }
            }
        }
        Ok(Self { phi, psi })
    }

    /// Wraps arbitrary radian values into range before validating.
    pub fn from_radians(phi: &[f64], psi: &[f64]) -> Result<Self> {
        Self::new(
            phi.iter().map(|&a| wrap_angle(a)).collect(),
            psi.iter().map(|&a| wrap_angle(a)).collect(),
        )
    }

    pub fn from_degrees(phi: &[f64], psi: &[f64]) -> Result<Self> {
        let conv = |v: &[f64]| -> Vec<f64> { v.iter().map(|&d| d * (PI / 180.0)).collect() };
        Self::from_radians(&conv(phi), &conv(psi))
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn angle(&self, angle: Angle) -> &[f64] {
        match angle {
            Angle::Phi => &self.phi,
            Angle::Psi => &self.psi,
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            phi: rows.iter().map(|&r| self.phi[r]).collect(),
            psi: rows.iter().map(|&r| self.psi[r]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetColumn {
    CosPhi,
    SinPhi,
    CosPsi,
    SinPsi,
}

impl TargetColumn {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetColumn::CosPhi => "cos_phi",
            TargetColumn::SinPhi => "sin_phi",
            TargetColumn::CosPsi => "cos_psi",
            TargetColumn::SinPsi => "sin_psi",
        }
    }
}

/// Angles in cosine/sine form, one column per encoded component.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedTargets {
    columns: Vec<TargetColumn>,
    values: Matrix,
}

impl EncodedTargets {
    pub fn columns(&self) -> &[TargetColumn] {
        &self.columns
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn column(&self, which: TargetColumn) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|&c| c == which)?;
        Some(self.values.column(j))
    }

    /// The `(cos, sin)` pair of a single angle.
    pub fn for_angle(&self, angle: Angle) -> Result<Self> {
        let idx = [angle.cos_column(), angle.sin_column()]
            .iter()
            .map(|c| {
                self.columns.iter().position(|x| x == c).ok_or_else(|| {
                    Error::InvalidParameter {
                        name: "angle",
                        reason: format!("column {} not encoded", c.as_str()),
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            columns: idx.iter().map(|&j| self.columns[j]).collect(),
            values: self.values.select_columns(&idx),
        })
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            columns: self.columns.clone(),
            values: self.values.select_rows(rows),
        }
    }
}

/// Encodes both angles as `(cos φ, sin φ, cos ψ, sin ψ)`.
pub fn encode_angles(targets: &AngleTargets) -> EncodedTargets {
    let n = targets.len();
    let mut values = Matrix::zeros(n, 4);
    for i in 0..n {
        let (sp, cp) = (libm::sin(targets.phi[i]), libm::cos(targets.phi[i]));
        let (ss, cs) = (libm::sin(targets.psi[i]), libm::cos(targets.psi[i]));
        values.set(i, 0, cp);
        values.set(i, 1, sp);
        values.set(i, 2, cs);
        values.set(i, 3, ss);
    }
    EncodedTargets {
        columns: alloc::vec![
            TargetColumn::CosPhi,
            TargetColumn::SinPhi,
            TargetColumn::CosPsi,
            TargetColumn::SinPsi
        ],
        values,
    }
}

/// Recovers angles from (possibly non-unit) cosine/sine pairs.
pub fn decode_angle(cos_col: &[f64], sin_col: &[f64]) -> Result<Vec<f64>> {
    if cos_col.len() != sin_col.len() {
        return Err(Error::DimensionMismatch {
            context: "cos vs sin length",
            expected: cos_col.len(),
            found: sin_col.len(),
        });
    }
    cos_col
        .iter()
        .zip(sin_col)
        .enumerate()
        .map(|(i, (&c, &s))| {
            if c == 0.0 && s == 0.0 {
                Err(Error::UndefinedAngle(i))
            } else {
                Ok(wrap_angle(libm::atan2(s, c)))
            }
        })
        .collect()
}

/// Disjoint train/test row indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Seeded random split: a uniform permutation of `0..n`, the first
/// `⌊fraction · n⌋` indices going to train.
pub fn split(n: usize, train_fraction: f64, seed: u64) -> Result<DatasetSplit> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter {
            name: "train_fraction",
            reason: format!("{train_fraction} not in (0, 1)"),
        });
    }
    let n_train = libm::floor(train_fraction * n as f64) as usize;
    if n < 2 || n_train == 0 || n_train >= n {
        return Err(Error::DegenerateSplit {
            train: n_train.min(n),
            test: n.saturating_sub(n_train),
        });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::stream(seed, "split", 0));
    let test_indices = perm.split_off(n_train);
    Ok(DatasetSplit {
        train_indices: perm,
        test_indices,
    })
}

/// Samples `indices.len()` entries of `indices` uniformly with replacement.
pub fn bootstrap_resample(indices: &[usize], seed: u64) -> Result<Vec<usize>> {
    if indices.is_empty() {
        return Err(Error::EmptyInput("bootstrap input"));
    }
    let mut r = rng::stream(seed, "bootstrap", 0);
    Ok((0..indices.len())
        .map(|_| indices[r.random_range(0..indices.len())])
        .collect())
}

/// Map from cluster drivers to the synthetic angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetFunction {
    /// With three clusters and standardized drivers `d1, d2, d3`:
    /// `φ = 1.5·tanh(d1) + 0.8·sin(d2)`, `ψ = 1.2·d3·exp(-d3²) + 0.6·cos(d1)`.
    ///
    /// With any other cluster count the terms cycle over the drivers so that
    /// every driver enters both angles: driver `k` adds `1.5·tanh(d)` (even
    /// `k`) or `0.8·sin(d)` (odd `k`) to φ, and `0.6·cos(d)` (even `k`) or
    /// `1.2·d·exp(-d²)` (odd `k`) to ψ. φ is scaled by `3/K` to keep its
    /// spread comparable to the three-cluster case.
    Reference,
}

/// Parameters of the synthetic correlated-cluster generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_clusters: usize,
    pub cluster_sizes: Vec<usize>,
    pub intra_correlation: f64,
    pub n_noise_features: usize,
    pub n_samples: usize,
    pub target_function: TargetFunction,
    pub noise_sd: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Five clusters of four, ten noise columns, 2000 rows.
    pub fn reference(seed: u64) -> Self {
        Self {
            n_clusters: 5,
            cluster_sizes: alloc::vec![4; 5],
            intra_correlation: 0.9,
            n_noise_features: 10,
            n_samples: 2000,
            target_function: TargetFunction::Reference,
            noise_sd: 0.05,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.cluster_sizes.len() != self.n_clusters {
            return Err(Error::DimensionMismatch {
                context: "cluster_sizes vs n_clusters",
                expected: self.n_clusters,
                found: self.cluster_sizes.len(),
            });
        }
        if self.n_clusters == 0 {
            return Err(Error::InvalidParameter {
                name: "n_clusters",
                reason: "need at least one cluster".into(),
            });
        }
        if self.cluster_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidParameter {
                name: "cluster_sizes",
                reason: "every cluster needs at least one member".into(),
            });
        }
        if self.n_samples < 2 {
            return Err(Error::InvalidParameter {
                name: "n_samples",
                reason: "need at least 2 samples".into(),
            });
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "noise_sd",
                reason: format!("{} is not a finite non-negative value", self.noise_sd),
            });
        }
        if !(self.intra_correlation > 0.0 && self.intra_correlation < 1.0) {
            return Err(Error::InfeasibleCorrelation {
                target: self.intra_correlation,
                measured: f64::NAN,
            });
        }
        Ok(())
    }
}

/// Which columns form each generated cluster and which member drives the target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub clusters: Vec<Vec<usize>>,
    pub drivers: Vec<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub features: FeatureMatrix,
    pub angles: AngleTargets,
    pub truth: GroundTruth,
}

fn standardize(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let sd = libm::sqrt(var);
    v.iter()
        .map(|x| if sd > 0.0 { (x - mean) / sd } else { 0.0 })
        .collect()
}

fn abs_pearson(a: &[f64], b: &[f64]) -> f64 {
    let (za, zb) = (standardize(a), standardize(b));
    let r = za.iter().zip(&zb).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64;
    r.abs()
}

/// Draws a dataset of correlated clusters plus independent noise columns.
///
/// Each cluster `k` has a latent factor `z_k`; member `j` is `a_j·(z_k + s_j·ε)`
/// with a random signed loading `a_j`. The designated driver has `s_j = 0`;
/// the other members use `s = sqrt((1-ρ)/ρ)` so their pairwise correlation is
/// `ρ` in expectation. The driver's position within the cluster is random.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let n = spec.n_samples;
    let mut r = rng::stream(spec.seed, "synthetic", 0);
    let rho = spec.intra_correlation;
    let member_noise = libm::sqrt((1.0 - rho) / rho);

    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut clusters = Vec::with_capacity(spec.n_clusters);
    let mut drivers = Vec::with_capacity(spec.n_clusters);

    for (k, &size) in spec.cluster_sizes.iter().enumerate() {
        let latent: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
        let driver_slot = r.random_range(0..size);
        let start = columns.len();
        for j in 0..size {
            let sign = if r.random_bool(0.5) { 1.0 } else { -1.0 };
            let loading = sign * r.random_range(0.5..2.0);
            let s = if j == driver_slot { 0.0 } else { member_noise };
            let col: Vec<f64> = latent
                .iter()
                .map(|&z| {
                    let e: f64 = r.sample(StandardNormal);
                    loading * (z + s * e)
                })
                .collect();
            columns.push(col);
            names.push(format!("c{k}_{j}"));
        }
        clusters.push((start..start + size).collect::<Vec<_>>());
        drivers.push(start + driver_slot);
    }
    for j in 0..spec.n_noise_features {
        let scale = r.random_range(0.5..2.0);
        columns.push(
            (0..n)
                .map(|_| scale * r.sample::<f64, _>(StandardNormal))
                .collect(),
        );
        names.push(format!("noise_{j}"));
    }

    let mut intra = Vec::new();
    for c in &clusters {
        for (a, &i) in c.iter().enumerate() {
            for &j in &c[a + 1..] {
                intra.push(abs_pearson(&columns[i], &columns[j]));
            }
        }
    }
    if !intra.is_empty() {
        let mean = intra.iter().sum::<f64>() / intra.len() as f64;
        if mean < rho - 0.05 {
            return Err(Error::InfeasibleCorrelation {
                target: rho,
                measured: mean,
            });
        }
    }

    let d: Vec<Vec<f64>> = drivers.iter().map(|&i| standardize(&columns[i])).collect();
    let mut phi = Vec::with_capacity(n);
    let mut psi = Vec::with_capacity(n);
    for i in 0..n {
        let (p, q) = reference_target(&d, i);
        let e1: f64 = r.sample(StandardNormal);
        let e2: f64 = r.sample(StandardNormal);
        phi.push(wrap_angle(p + spec.noise_sd * e1));
        psi.push(wrap_angle(q + spec.noise_sd * e2));
    }

    let features = FeatureMatrix::new(names, Matrix::from_columns(&columns)?)?;
    Ok(SyntheticData {
        features,
        angles: AngleTargets::new(phi, psi)?,
        truth: GroundTruth {
            clusters,
            drivers,
            seed: spec.seed,
        },
    })
}

fn reference_target(d: &[Vec<f64>], i: usize) -> (f64, f64) {
    let k = d.len();
    if k == 3 {
        let (d1, d2, d3) = (d[0][i], d[1][i], d[2][i]);
        return (
            1.5 * libm::tanh(d1) + 0.8 * libm::sin(d2),
            1.2 * d3 * libm::exp(-d3 * d3) + 0.6 * libm::cos(d1),
        );
    }
    let scale = 3.0 / k as f64;
    let mut phi = 0.0;
    let mut psi = 0.0;
    for (c, col) in d.iter().enumerate() {
        let x = col[i];
        if c % 2 == 0 {
            phi += 1.5 * libm::tanh(x);
            psi += 0.6 * libm::cos(x);
        } else {
            phi += 0.8 * libm::sin(x);
            psi += 1.2 * x * libm::exp(-x * x);
        }
    }
    (scale * phi, psi)
}

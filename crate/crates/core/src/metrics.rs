//! Accuracy metrics, circular counterparts for angles, the OLS reference
//! predictor and held-out evaluation of a feature subset.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::forest::{fit_forest, ForestParams};
use crate::ingest::{decode_angle, encode_angles, wrap_angle, Angle, AngleTargets};
use crate::matrix::{FeatureMatrix, Matrix};
use crate::rng;
use crate::{Error, Result};

fn same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() {
        return Err(Error::EmptyInput("metric input"));
    }
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "metric inputs",
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    same_len(y, yhat)?;
    let sse: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(libm::sqrt(sse / y.len() as f64))
}

/// `1 − SSE / SST`. Fails when `y` has zero variance.
pub fn r_squared(y: &[f64], yhat: &[f64]) -> Result<f64> {
    same_len(y, yhat)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|a| (a - mean) * (a - mean)).sum();
    if sst <= 0.0 {
        return Err(Error::Domain("R² undefined for zero-variance target".into()));
    }
    let sse: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - sse / sst)
}

/// RMSE of differences wrapped into `[-π, π)`.
pub fn angular_rmse(theta: &[f64], theta_hat: &[f64]) -> Result<f64> {
    same_len(theta, theta_hat)?;
    let s: f64 = theta
        .iter()
        .zip(theta_hat)
        .map(|(a, b)| {
            let d = wrap_angle(a - b);
            d * d
        })
        .sum();
    Ok(libm::sqrt(s / theta.len() as f64))
}

/// `atan2(mean sin, mean cos)`.
pub fn circular_mean(theta: &[f64]) -> Result<f64> {
    if theta.is_empty() {
        return Err(Error::EmptyInput("circular mean"));
    }
    let s: f64 = theta.iter().map(|&a| libm::sin(a)).sum();
    let c: f64 = theta.iter().map(|&a| libm::cos(a)).sum();
    if s == 0.0 && c == 0.0 {
        return Err(Error::Domain("circular mean undefined for balanced angles".into()));
    }
    Ok(wrap_angle(libm::atan2(s, c)))
}

/// `1 − Σ wrap(θ − θ̂)² / Σ wrap(θ − circular mean)²`.
pub fn angular_r_squared(theta: &[f64], theta_hat: &[f64]) -> Result<f64> {
    same_len(theta, theta_hat)?;
    let mu = circular_mean(theta)?;
    let sst: f64 = theta
        .iter()
        .map(|&a| {
            let d = wrap_angle(a - mu);
            d * d
        })
        .sum();
    if sst <= 0.0 {
        return Err(Error::Domain("angular R² undefined for constant angles".into()));
    }
    let sse: f64 = theta
        .iter()
        .zip(theta_hat)
        .map(|(a, b)| {
            let d = wrap_angle(a - b);
            d * d
        })
        .sum();
    Ok(1.0 - sse / sst)
}

/// Least-squares linear model `y ≈ X β + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub rank: usize,
    /// Set when the centered design has rank below its column count; the
    /// coefficients are then the minimum-norm solution.
    pub rank_deficient: bool,
}

impl OlsModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(x)
                .map(|(b, v)| b * v)
                .sum::<f64>()
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.ncols() != self.coefficients.len() {
            return Err(Error::DimensionMismatch {
                context: "OLS prediction columns",
                expected: self.coefficients.len(),
                found: x.ncols(),
            });
        }
        Ok((0..x.nrows()).map(|i| self.predict_row(x.row(i))).collect())
    }
}

/// Fits OLS with intercept via an SVD of the column-centered design.
pub fn fit_ols(x: &Matrix, y: &[f64]) -> Result<OlsModel> {
    let (n, m) = (x.nrows(), x.ncols());
    if n == 0 {
        return Err(Error::EmptyInput("OLS rows"));
    }
    if n != y.len() {
        return Err(Error::DimensionMismatch {
            context: "OLS rows vs target",
            expected: n,
            found: y.len(),
        });
    }
    let x_mean: Vec<f64> = (0..m)
        .map(|j| (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64)
        .collect();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    if m == 0 {
        return Ok(OlsModel {
            coefficients: Vec::new(),
            intercept: y_mean,
            rank: 0,
            rank_deficient: false,
        });
    }
    let a = DMatrix::from_fn(n, m, |i, j| x.get(i, j) - x_mean[j]);
    let b = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let svd = a.svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |acc, &s| acc.max(s));
    let tol = smax * (n.max(m) as f64) * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let beta = if rank == 0 {
        DVector::zeros(m)
    } else {
        svd.solve(&b, tol)
            .map_err(|e| Error::Domain(format!("OLS solve failed: {e}")))?
    };
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let intercept = y_mean
        - coefficients
            .iter()
            .zip(&x_mean)
            .map(|(b, m)| b * m)
            .sum::<f64>();
    Ok(OlsModel {
        coefficients,
        intercept,
        rank,
        rank_deficient: rank < m,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predictor {
    Ols,
    Forest { params: ForestParams },
}

impl Predictor {
    pub fn name(&self) -> &'static str {
        match self {
            Predictor::Ols => "ols",
            Predictor::Forest { .. } => "forest",
        }
    }
}

/// A fitted downstream model for one target component.
#[derive(Debug, Clone)]
pub enum FittedPredictor {
    Ols(OlsModel),
    Forest(crate::forest::RegressionForest),
}

impl FittedPredictor {
    pub fn fit(predictor: &Predictor, x: &Matrix, y: &[f64], seed: u64) -> Result<Self> {
        match predictor {
            Predictor::Ols => fit_ols(x, y).map(Self::Ols),
            Predictor::Forest { params } => {
                let mut p = params.clone();
                p.seed = seed;
                fit_forest(x, y, &p).map(Self::Forest)
            }
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        match self {
            Self::Ols(m) => m.predict(x),
            Self::Forest(f) => f.predict(x),
        }
    }
}

/// Held-out accuracy for one angle and one predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub angle: Angle,
    pub predictor: alloc::string::String,
    /// Mean RMSE over the (cos, sin) columns.
    pub rmse_components: f64,
    /// Mean R² over the (cos, sin) columns.
    pub r2_components: f64,
    /// Wrapped-difference RMSE of the decoded angle, radians.
    pub rmse_angular: f64,
    /// `1 − Σ wrap(θ − θ̂)² / Σ wrap(θ − circular mean)²`.
    pub r2_angular: f64,
}

/// Fits `predictor` on `train` rows of the `selected` columns (one model per
/// encoded component of `angle`) and scores it on `test` rows.
///
/// `train` may repeat rows (bootstrap resamples).
#[allow(clippy::too_many_arguments)]
pub fn evaluate_rows(
    predictor: &Predictor,
    selected: &[usize],
    train: &[usize],
    test: &[usize],
    d: &FeatureMatrix,
    angles: &AngleTargets,
    angle: Angle,
    seed: u64,
) -> Result<AccuracyReport> {
    if selected.is_empty() {
        return Err(Error::EmptyInput("selected features"));
    }
    if let Some(&j) = selected.iter().find(|&&j| j >= d.m()) {
        return Err(Error::InvalidParameter {
            name: "selected",
            reason: format!("feature index {j} >= {}", d.m()),
        });
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::DegenerateSplit {
            train: train.len(),
            test: test.len(),
        });
    }
    if angles.len() != d.n() {
        return Err(Error::DimensionMismatch {
            context: "angle rows vs feature rows",
            expected: d.n(),
            found: angles.len(),
        });
    }
    let x = d.values().select_columns(selected);
    let x_train = x.select_rows(train);
    let x_test = x.select_rows(test);
    let enc = encode_angles(angles).for_angle(angle)?;

    let mut truth = Vec::with_capacity(2);
    let mut preds = Vec::with_capacity(2);
    for c in 0..2 {
        let col = enc.values().column(c);
        let y_train: Vec<f64> = train.iter().map(|&i| col[i]).collect();
        let s = rng::derive_seed(seed, "evaluate", c as u64);
        let model = FittedPredictor::fit(predictor, &x_train, &y_train, s)?;
        preds.push(model.predict(&x_test)?);
        truth.push(test.iter().map(|&i| col[i]).collect::<Vec<f64>>());
    }
    let theta: Vec<f64> = test.iter().map(|&i| angles.angle(angle)[i]).collect();
    score_components(angle, predictor.name(), [&truth[0], &truth[1]], [&preds[0], &preds[1]], &theta)
}

/// Scores (cos, sin) predictions against their truth and the decoded angle
/// against `theta`.
pub fn score_components(
    angle: Angle,
    predictor: &str,
    truth: [&[f64]; 2],
    preds: [&[f64]; 2],
    theta: &[f64],
) -> Result<AccuracyReport> {
    let mut rmses = 0.0;
    let mut r2s = 0.0;
    for c in 0..2 {
        rmses += rmse(truth[c], preds[c])?;
        r2s += r_squared(truth[c], preds[c])?;
    }
    let theta_hat = decode_angle(preds[0], preds[1])?;
    Ok(AccuracyReport {
        angle,
        predictor: predictor.into(),
        rmse_components: rmses / 2.0,
        r2_components: r2s / 2.0,
        rmse_angular: angular_rmse(theta, &theta_hat)?,
        r2_angular: angular_r_squared(theta, &theta_hat)?,
    })
}

/// [`evaluate_rows`] on the folds of a [`DatasetSplit`](crate::ingest::DatasetSplit).
pub fn evaluate_predictor(
    predictor: &Predictor,
    selected: &[usize],
    split: &crate::ingest::DatasetSplit,
    d: &FeatureMatrix,
    angles: &AngleTargets,
    angle: Angle,
    seed: u64,
) -> Result<AccuracyReport> {
    evaluate_rows(
        predictor,
        selected,
        &split.train_indices,
        &split.test_indices,
        d,
        angles,
        angle,
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::PI;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - libm::sqrt(12.5)).abs() < 1e-15);
        assert!((rmse(&[1.0, 5.0, -2.0], &[3.5, 7.5, 0.5]).unwrap() - 2.5).abs() < 1e-15);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn r2_examples() {
        assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert!((r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(r_squared(&[2.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn angular_rmse_examples() {
        assert_eq!(angular_rmse(&[0.3, -1.0], &[0.3, -1.0]).unwrap(), 0.0);
        let v = angular_rmse(&[PI - 0.1], &[-PI + 0.1]).unwrap();
        assert!((v - 0.2).abs() < 1e-12);
        let theta = [0.1, 1.0, -2.0];
        let shifted: Vec<f64> = theta.iter().map(|&t| wrap_angle(t + PI)).collect();
        assert!((angular_rmse(&theta, &shifted).unwrap() - PI).abs() < 1e-12);
    }

    #[test]
    fn ols_exact_line() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [5.0]]).unwrap();
        let y: Vec<f64> = [0.0, 1.0, 2.0, 5.0].iter().map(|v| 2.0 * v + 1.0).collect();
        let m = fit_ols(&x, &y).unwrap();
        assert!((m.coefficients[0] - 2.0).abs() < 1e-9);
        assert!((m.intercept - 1.0).abs() < 1e-9);
        assert!(!m.rank_deficient);
    }

    #[test]
    fn ols_duplicate_column_is_flagged() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [4.0, 4.0]]).unwrap();
        let y = [1.0, 3.0, 5.0, 9.0];
        let m = fit_ols(&x, &y).unwrap();
        assert!(m.rank_deficient);
        assert_eq!(m.rank, 1);
        // minimum-norm splits the slope evenly
        assert!((m.coefficients[0] - 1.0).abs() < 1e-9);
        assert!((m.coefficients[1] - 1.0).abs() < 1e-9);
        for (p, t) in m.predict(&x).unwrap().iter().zip(&y) {
            assert!((p - t).abs() < 1e-6);
        }
    }

    #[test]
    fn ols_zero_design() {
        let x = Matrix::zeros(3, 2);
        let m = fit_ols(&x, &[1.0, 2.0, 6.0]).unwrap();
        assert_eq!(m.coefficients, vec![0.0, 0.0]);
        assert!((m.intercept - 3.0).abs() < 1e-12);
    }
}

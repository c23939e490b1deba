//! Dense row-major matrices and the named feature matrix.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Dense row-major `rows × cols` matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "matrix data length",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: alloc::vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    context: "row length",
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Builds a matrix from equally long columns.
    pub fn from_columns<C: AsRef<[f64]>>(columns: &[C]) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.as_ref().len());
        let cols = columns.len();
        let mut m = Self::zeros(rows, cols);
        for (j, c) in columns.iter().enumerate() {
            let c = c.as_ref();
            if c.len() != rows {
                return Err(Error::DimensionMismatch {
                    context: "column length",
                    expected: rows,
                    found: c.len(),
                });
            }
            for (i, &v) in c.iter().enumerate() {
                m.data[i * cols + j] = v;
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, col)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Rows in the given order; indices may repeat.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Self {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for i in 0..self.rows {
            let row = self.row(i);
            data.extend(cols.iter().map(|&c| row[c]));
        }
        Self {
            rows: self.rows,
            cols: cols.len(),
            data,
        }
    }
}

/// The `n × m` predictor matrix with unique column names.
///
/// Construction checks that every entry is finite, names are unique,
/// `n >= 2` and `m >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    names: Vec<String>,
    values: Matrix,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, values: Matrix) -> Result<Self> {
        if names.len() != values.ncols() {
            return Err(Error::DimensionMismatch {
                context: "feature names vs columns",
                expected: values.ncols(),
                found: names.len(),
            });
        }
        if values.ncols() == 0 {
            return Err(Error::EmptyInput("feature matrix has no columns"));
        }
        if values.nrows() < 2 {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: alloc::format!("need at least 2 observations, got {}", values.nrows()),
            });
        }
        let mut seen = BTreeSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateFeatureName(name.clone()));
            }
        }
        for i in 0..values.nrows() {
            for (j, v) in values.row(i).iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(Self { names, values })
    }

    /// Names `x0, x1, ...` for anonymous data.
    pub fn with_default_names(values: Matrix) -> Result<Self> {
        let names = (0..values.ncols()).map(|j| alloc::format!("x{j}")).collect();
        Self::new(names, values)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn m(&self) -> usize {
        self.values.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j)
    }

    /// Row subset (indices may repeat, as in a bootstrap resample).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        Self::new(self.names.clone(), self.values.select_rows(rows))
    }

    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        let names = cols.iter().map(|&c| self.names[c].clone()).collect();
        Self::new(names, self.values.select_columns(cols))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_duplicate_names() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let err = FeatureMatrix::new(vec!["a".into(), "a".into()], m).unwrap_err();
        assert_eq!(err, Error::DuplicateFeatureName("a".into()));
    }

    #[test]
    fn rejects_non_finite_and_tiny_inputs() {
        let m = Matrix::from_rows(&[[1.0, f64::NAN], [3.0, 4.0]]).unwrap();
        assert!(matches!(
            FeatureMatrix::with_default_names(m),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
        let m = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        assert!(FeatureMatrix::with_default_names(m).is_err());
    }

    #[test]
    fn column_and_row_selection() {
        let m = Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(m.column(1), vec![2.0, 5.0]);
        let s = m.select_columns(&[2, 0]);
        assert_eq!(s.row(1), &[6.0, 4.0]);
        let r = m.select_rows(&[1, 1, 0]);
        assert_eq!(r.nrows(), 3);
        assert_eq!(r.row(0), &[4.0, 5.0, 6.0]);
        let c = Matrix::from_columns(&[vec![1.0, 4.0], vec![2.0, 5.0], vec![3.0, 6.0]]).unwrap();
        assert_eq!(c, m);
    }
}

//! Regression data container: design matrix, response, likelihood family, and
//! standardization bookkeeping.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Likelihood family of the response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Binomial,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("need at least 2 rows and 1 predictor, got n = {n}, p = {p}")]
    TooSmall { n: usize, p: usize },
    #[error("dimension mismatch: X has {n} rows but y has {len}")]
    DimensionMismatch { n: usize, len: usize },
    #[error("non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: String },
    #[error("binomial response must be 0 or 1, got {value} at row {row}")]
    NotBinary { row: usize, value: f64 },
    #[error("predictor column {index} is constant; cannot standardize")]
    ConstantColumn { index: usize },
}

/// A fixed regression problem. Rows are observations.
///
/// `standardized` means every predictor column has mean 0 and squared norm
/// `n`; `column_means` / `column_scales` hold the transform that produced it
/// (zeros and ones otherwise). `intercept` records whether downstream fits
/// should model an unpenalized intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    family: Family,
    standardized: bool,
    column_means: DVector<f64>,
    column_scales: DVector<f64>,
    intercept: bool,
}

impl Dataset {
    pub fn new(
        x: DMatrix<f64>,
        y: DVector<f64>,
        family: Family,
        intercept: bool,
    ) -> Result<Self, DataError> {
        let (n, p) = (x.nrows(), x.ncols());
        if n < 2 || p < 1 {
            return Err(DataError::TooSmall { n, p });
        }
        if y.len() != n {
            return Err(DataError::DimensionMismatch { n, len: y.len() });
        }
        for j in 0..p {
            for i in 0..n {
                if !x[(i, j)].is_finite() {
                    return Err(DataError::NonFinite {
                        row: i,
                        col: format!("{j}"),
                    });
                }
            }
        }
        for i in 0..n {
            if !y[i].is_finite() {
                return Err(DataError::NonFinite {
                    row: i,
                    col: "response".into(),
                });
            }
            if family == Family::Binomial && y[i] != 0.0 && y[i] != 1.0 {
                return Err(DataError::NotBinary {
                    row: i,
                    value: y[i],
                });
            }
        }
        Ok(Self {
            x,
            y,
            family,
            standardized: false,
            column_means: DVector::zeros(p),
            column_scales: DVector::from_element(p, 1.0),
            intercept,
        })
    }

    /// Centers each predictor column and rescales it to squared norm `n`,
    /// recording the applied means and scales. No-op on already-standardized
    /// data.
    pub fn standardize(&self) -> Result<Dataset, DataError> {
        if self.standardized {
            return Ok(self.clone());
        }
        let (n, p) = (self.n(), self.p());
        let mut x = self.x.clone();
        let mut means = DVector::zeros(p);
        let mut scales = DVector::from_element(p, 1.0);
        for j in 0..p {
            let mean = x.column(j).sum() / n as f64;
            let mut ss = 0.0;
            for i in 0..n {
                x[(i, j)] -= mean;
                ss += x[(i, j)] * x[(i, j)];
            }
            let scale = (ss / n as f64).sqrt();
            if scale <= 0.0 || !scale.is_finite() {
                return Err(DataError::ConstantColumn { index: j });
            }
            for i in 0..n {
                x[(i, j)] /= scale;
            }
            means[j] = mean;
            scales[j] = scale;
        }
        Ok(Dataset {
            x,
            y: self.y.clone(),
            family: self.family,
            standardized: true,
            column_means: means,
            column_scales: scales,
            intercept: self.intercept,
        })
    }

    /// Rows at `indices`, in order, as a new dataset on the same scale.
    /// Standardization metadata is reset (a fold is a new sample).
    pub fn select_rows(&self, indices: &[usize]) -> Result<Dataset, DataError> {
        let p = self.p();
        let mut x = DMatrix::zeros(indices.len(), p);
        let mut y = DVector::zeros(indices.len());
        for (r, &i) in indices.iter().enumerate() {
            for j in 0..p {
                x[(r, j)] = self.x[(i, j)];
            }
            y[r] = self.y[i];
        }
        Dataset::new(x, y, self.family, self.intercept)
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn has_intercept(&self) -> bool {
        self.intercept
    }

    pub fn column_means(&self) -> &DVector<f64> {
        &self.column_means
    }

    pub fn column_scales(&self) -> &DVector<f64> {
        &self.column_scales
    }

    /// Mean of the response (the profiled Gaussian intercept).
    pub fn y_mean(&self) -> f64 {
        self.y.sum() / self.n() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn standardize_centers_and_scales() {
        let x = dmatrix![1.0, 10.0; 2.0, 20.0; 3.0, 60.0; 4.0, 30.0];
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let d = Dataset::new(x, y, Family::Gaussian, true).unwrap();
        let s = d.standardize().unwrap();
        assert!(s.is_standardized());
        let n = s.n() as f64;
        for j in 0..s.p() {
            let col = s.x().column(j);
            assert!(col.sum().abs() < 1e-10);
            assert!((col.dot(&col) - n).abs() < 1e-10);
        }
        // round trip back to the original scale
        for j in 0..s.p() {
            for i in 0..s.n() {
                let orig = s.x()[(i, j)] * s.column_scales()[j] + s.column_means()[j];
                assert!((orig - d.x()[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = dmatrix![1.0; 2.0];
        let y = DVector::from_vec(vec![0.0, 0.5]);
        assert!(matches!(
            Dataset::new(x.clone(), y, Family::Binomial, false),
            Err(DataError::NotBinary { row: 1, .. })
        ));
        let y2 = DVector::from_vec(vec![0.0, f64::NAN]);
        assert!(matches!(
            Dataset::new(x.clone(), y2, Family::Gaussian, false),
            Err(DataError::NonFinite { .. })
        ));
        let y3 = DVector::from_vec(vec![0.0]);
        assert!(Dataset::new(x, y3, Family::Gaussian, false).is_err());
    }

    #[test]
    fn constant_column_cannot_standardize() {
        let x = dmatrix![1.0, 5.0; 2.0, 5.0; 3.0, 5.0];
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let d = Dataset::new(x, y, Family::Gaussian, true).unwrap();
        assert!(matches!(
            d.standardize(),
            Err(DataError::ConstantColumn { index: 1 })
        ));
    }
}

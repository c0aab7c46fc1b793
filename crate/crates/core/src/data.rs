//! Centred response/covariate container with column metadata.

use crate::error::{Error, Result};
use crate::linalg::{centre_matrix, centre_vector};
use nalgebra::{DMatrix, DVector};

/// Centred response vector and covariate matrix, with the removed means,
/// column names and the indices of constant columns (which are excluded from
/// any arrangement but kept for reporting).
#[derive(Debug, Clone)]
pub struct DataSet {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub y_mean: f64,
    pub col_means: DVector<f64>,
    pub response_name: String,
    pub names: Vec<String>,
    pub constant_cols: Vec<usize>,
}

impl DataSet {
    /// Centre raw data at ingestion. Rejects non-finite values and fewer than
    /// two observations; flags columns whose centred norm vanishes.
    pub fn from_raw(
        y_raw: &DVector<f64>,
        x_raw: &DMatrix<f64>,
        response_name: impl Into<String>,
        names: Vec<String>,
    ) -> Result<Self> {
        if y_raw.nrows() != x_raw.nrows() {
            return Err(Error::invalid("response and covariate row counts differ"));
        }
        if names.len() != x_raw.ncols() {
            return Err(Error::invalid("one name per covariate column required"));
        }
        let (y, y_mean) = centre_vector(y_raw)?;
        let centred = centre_matrix(x_raw)?;
        let constant_cols = (0..centred.values.ncols())
            .filter(|&j| centred.values.column(j).norm() < 1e-12)
            .collect();
        Ok(DataSet {
            y,
            x: centred.values,
            y_mean,
            col_means: centred.means,
            response_name: response_name.into(),
            names,
            constant_cols,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Columns eligible for arrangement (everything except constants).
    pub fn eligible(&self) -> Vec<usize> {
        (0..self.p())
            .filter(|j| !self.constant_cols.contains(j))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centres_and_flags_constant_columns() {
        let y = DVector::from_column_slice(&[1.0, 2.0, 3.0]);
        let x = DMatrix::from_column_slice(
            3,
            3,
            &[
                1.0, 2.0, 3.0, // varying
                5.0, 5.0, 5.0, // constant
                0.0, 1.0, -1.0,
            ],
        );
        let ds = DataSet::from_raw(&y, &x, "y", vec!["a".into(), "b".into(), "c".into()]).unwrap();
        assert_eq!(ds.y_mean, 2.0);
        assert_eq!(ds.constant_cols, vec![1]);
        assert_eq!(ds.eligible(), vec![0, 2]);
        assert!(ds.y.sum().abs() < 1e-12);
    }

    #[test]
    fn rejects_shape_mismatch_and_nan() {
        let y = DVector::from_column_slice(&[1.0, 2.0]);
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        assert!(DataSet::from_raw(&y, &x, "y", vec!["a".into()]).is_err());
        let y3 = DVector::from_column_slice(&[1.0, 2.0, f64::NAN]);
        assert!(DataSet::from_raw(&y3, &x, "y", vec!["a".into()]).is_err());
    }
}

//! Observation matrix type.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::DataError;

/// An n x p matrix of observations, one sample per row.
///
/// All entries are validated finite on construction, so downstream numeric
/// code never has to re-check.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
}

impl DataMatrix {
    /// Wraps an array, rejecting NaN and infinite entries and empty shapes.
    pub fn new(values: Array2<f64>) -> Result<Self, DataError> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(DataError::Empty);
        }
        for ((i, j), v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(DataError::NonFinite { row: i, col: j });
            }
        }
        Ok(Self { values })
    }

    /// Builds a matrix from rows of equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, DataError> {
        if rows.is_empty() {
            return Err(DataError::Empty);
        }
        let p = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(DataError::Ragged {
                    line: i + 1,
                    expected: p,
                    actual: r.len(),
                });
            }
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let arr = Array2::from_shape_vec((rows.len(), p), flat)
            .expect("shape checked above");
        Self::new(arr)
    }

    /// Number of samples (rows).
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Number of variables (columns).
    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    /// View of column `j`.
    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.column(j)
    }

    /// View of row `i`.
    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    /// Full view of the underlying array.
    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    /// Reference to the underlying array.
    pub fn as_array(&self) -> &Array2<f64> {
        &self.values
    }

    /// Consumes the wrapper and returns the array.
    pub fn into_array(self) -> Array2<f64> {
        self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_non_finite() {
        let err = DataMatrix::new(array![[1.0, f64::NAN]]).unwrap_err();
        assert!(matches!(err, DataError::NonFinite { row: 0, col: 1 }));
    }

    #[test]
    fn rejects_empty() {
        assert!(matches!(
            DataMatrix::new(Array2::<f64>::zeros((0, 3))),
            Err(DataError::Empty)
        ));
    }

    #[test]
    fn from_rows_checks_raggedness() {
        let err = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).unwrap_err();
        assert!(matches!(err, DataError::Ragged { line: 2, .. }));
    }
}

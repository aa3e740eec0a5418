//! Dense symmetric matrix primitives: eigendecomposition, Cholesky-based
//! inversion, and the matrix norms used by the estimators.

mod chol;
mod eigen;
mod norms;

pub use chol::chol_inverse;
pub use norms::{
    norm_fro, norm_inf_induced, norm_l11, norm_max, norm_relative_fro, norm_spectral,
};

use ndarray::Array2;

use crate::error::LinalgError;

/// A dense real symmetric matrix.
///
/// Symmetry is enforced on construction by averaging `(M + M')/2`; U-statistic
/// accumulation in floating point routinely produces 1-ulp asymmetries, and
/// averaging removes them without penalizing exact inputs. All entries are
/// validated finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    data: Array2<f64>,
}

impl SymMatrix {
    /// Builds a symmetric matrix from a square array, averaging `(M + M')/2`.
    pub fn from_array(a: Array2<f64>) -> Result<Self, LinalgError> {
        if a.nrows() != a.ncols() {
            return Err(LinalgError::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        for ((i, j), v) in a.indexed_iter() {
            if !v.is_finite() {
                return Err(LinalgError::NonFinite { row: i, col: j });
            }
        }
        let mut m = a;
        let n = m.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (m[[i, j]] + m[[j, i]]);
                m[[i, j]] = avg;
                m[[j, i]] = avg;
            }
        }
        Ok(Self { data: m })
    }

    /// Wraps an array that is symmetric by construction (e.g. assembled from
    /// mirrored writes). Debug builds verify the claim.
    pub(crate) fn from_symmetric_unchecked(a: Array2<f64>) -> Self {
        debug_assert_eq!(a.nrows(), a.ncols());
        debug_assert!(a.iter().all(|v| v.is_finite()));
        #[cfg(debug_assertions)]
        {
            for i in 0..a.nrows() {
                for j in (i + 1)..a.ncols() {
                    debug_assert_eq!(a[[i, j]], a[[j, i]], "asymmetry at ({i}, {j})");
                }
            }
        }
        Self { data: a }
    }

    /// The p x p identity.
    pub fn identity(p: usize) -> Self {
        Self {
            data: Array2::eye(p),
        }
    }

    /// The p x p zero matrix.
    pub fn zeros(p: usize) -> Self {
        Self {
            data: Array2::zeros((p, p)),
        }
    }

    /// A diagonal matrix from the given entries.
    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Array2::zeros((d.len(), d.len()));
        for (i, v) in d.iter().enumerate() {
            m[[i, i]] = *v;
        }
        Self { data: m }
    }

    /// Matrix dimension p.
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    /// Entry (i, j).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[[i, j]]
    }

    /// The diagonal as a vector.
    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.data[[i, i]]).collect()
    }

    /// Reference to the underlying array.
    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    /// Consumes the wrapper and returns the array.
    pub fn into_array(self) -> Array2<f64> {
        self.data
    }
}

/// Eigenvalues in descending order with column-orthonormal eigenvectors.
///
/// Sign convention: in each eigenvector column the entry of largest absolute
/// value is non-negative (first such entry on an exact tie). This removes the
/// sign ambiguity that would otherwise make max-norm comparisons between
/// eigenvector estimates ill-defined.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    /// Eigenvalues, `values[0] >= values[1] >= ...`.
    pub values: Vec<f64>,
    /// dim x k matrix whose columns are the corresponding eigenvectors.
    pub vectors: Array2<f64>,
}

/// Computes the top `k` eigenpairs of a symmetric matrix.
///
/// Householder tridiagonalization followed by implicit-shift QL, capped at
/// 100 sweeps per eigenvalue. The full decomposition is computed and the
/// leading `k` pairs returned; the procedure is deterministic, so identical
/// inputs produce bitwise-identical outputs.
pub fn sym_eigen(m: &SymMatrix, k: usize) -> Result<EigenPairs, LinalgError> {
    let n = m.dim();
    if k == 0 || k > n {
        return Err(LinalgError::InvalidArgument(format!(
            "k = {k} out of range 1..={n}"
        )));
    }
    let (values, vectors) = eigen::symmetric_eigen_full(m.as_array())?;
    let mut top = Array2::zeros((n, k));
    for j in 0..k {
        for i in 0..n {
            top[[i, j]] = vectors[[i, j]];
        }
    }
    Ok(EigenPairs {
        values: values[..k].to_vec(),
        vectors: top,
    })
}

/// Full eigendecomposition (`k = dim`).
pub fn sym_eigen_full(m: &SymMatrix) -> Result<EigenPairs, LinalgError> {
    sym_eigen(m, m.dim())
}

/// Applies the sign convention of [`EigenPairs`] to each column in place.
pub(crate) fn apply_sign_convention(vectors: &mut Array2<f64>) {
    let (n, k) = (vectors.nrows(), vectors.ncols());
    for j in 0..k {
        let mut best = 0usize;
        let mut best_abs = vectors[[0, j]].abs();
        for i in 1..n {
            let a = vectors[[i, j]].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if vectors[[best, j]] < 0.0 {
            for i in 0..n {
                vectors[[i, j]] = -vectors[[i, j]];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_sym(p: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
        let mut a = Array2::zeros((p, p));
        for i in 0..p {
            for j in 0..=i {
                let v = rng.random_range(-1.0..1.0);
                a[[i, j]] = v;
                a[[j, i]] = v;
            }
        }
        SymMatrix::from_array(a).unwrap()
    }

    fn random_pd(p: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
        let a = random_sym(p, rng);
        let b = a.as_array().t().dot(a.as_array()) + Array2::<f64>::eye(p) * 0.5;
        SymMatrix::from_array(b).unwrap()
    }

    #[test]
    fn identity_eigen() {
        let m = SymMatrix::identity(3);
        let e = sym_eigen_full(&m).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
        // Columns are a permutation of identity columns.
        for j in 0..3 {
            let col: Vec<f64> = (0..3).map(|i| e.vectors[[i, j]]).collect();
            let ones = col.iter().filter(|v| **v == 1.0).count();
            let zeros = col.iter().filter(|v| **v == 0.0).count();
            assert_eq!((ones, zeros), (1, 2));
        }
    }

    #[test]
    fn two_by_two_closed_form() {
        let m = SymMatrix::from_array(array![[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let e = sym_eigen_full(&m).unwrap();
        let s = 1.0 / 2.0_f64.sqrt();
        assert_abs_diff_eq!(e.values[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.vectors[[0, 0]], s, epsilon = 1e-12);
        assert_abs_diff_eq!(e.vectors[[1, 0]], s, epsilon = 1e-12);
        // Sign convention puts the positive entry first.
        assert_abs_diff_eq!(e.vectors[[0, 1]], s, epsilon = 1e-12);
        assert_abs_diff_eq!(e.vectors[[1, 1]], -s, epsilon = 1e-12);
    }

    #[test]
    fn diagonal_top_pair() {
        let m = SymMatrix::from_diag(&[5.0, 2.0, 1.0]);
        let e = sym_eigen(&m, 1).unwrap();
        assert_abs_diff_eq!(e.values[0], 5.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.vectors[[0, 0]], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.vectors[[1, 0]], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.vectors[[2, 0]], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn spectral_reconstruction_and_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in [2usize, 5, 17, 40] {
            let m = random_sym(p, &mut rng);
            let e = sym_eigen_full(&m).unwrap();
            // Residual per pair.
            for j in 0..p {
                let v = e.vectors.column(j);
                let mv = m.as_array().dot(&v);
                let mut res = 0.0f64;
                for i in 0..p {
                    res += (mv[i] - e.values[j] * v[i]).powi(2);
                }
                assert!(
                    res.sqrt() <= 1e-9 * (1.0 + e.values[j].abs()),
                    "residual {} too large at p={p}",
                    res.sqrt()
                );
            }
            // Reconstruction.
            let lam = SymMatrix::from_diag(&e.values);
            let rec = e.vectors.dot(lam.as_array()).dot(&e.vectors.t());
            let err = norm_max(&(&rec - m.as_array()));
            assert!(err <= 1e-8 * (1.0 + norm_max(m.as_array())));
            // Orthonormality.
            let gram = e.vectors.t().dot(&e.vectors);
            let id = Array2::<f64>::eye(p);
            assert!(norm_max(&(&gram - &id)) <= 1e-10);
            // Descending order.
            for j in 1..p {
                assert!(e.values[j - 1] >= e.values[j]);
            }
        }
    }

    #[test]
    fn eigen_is_deterministic_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_sym(23, &mut rng);
        let a = sym_eigen_full(&m).unwrap();
        let b = sym_eigen_full(&m).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn chol_inverse_identity_and_diag() {
        let inv = chol_inverse(&SymMatrix::identity(4)).unwrap();
        assert_eq!(inv.as_array(), SymMatrix::identity(4).as_array());
        let inv = chol_inverse(&SymMatrix::from_diag(&[2.0, 4.0])).unwrap();
        assert_abs_diff_eq!(inv.get(0, 0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(inv.get(1, 1), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn chol_inverse_residual_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_pd(5, &mut rng);
        let inv = chol_inverse(&m).unwrap();
        let prod = m.as_array().dot(inv.as_array());
        let id = Array2::<f64>::eye(5);
        assert!(norm_max(&(&prod - &id)) <= 1e-8);
    }

    #[test]
    fn chol_rejects_indefinite_with_pivot() {
        let m = SymMatrix::from_diag(&[1.0, -1.0, 2.0]);
        match chol_inverse(&m) {
            Err(LinalgError::NotPositiveDefinite { pivot }) => assert_eq!(pivot, 1),
            other => panic!("expected pivot failure, got {other:?}"),
        }
    }

    #[test]
    fn norm_examples() {
        let i2 = Array2::<f64>::eye(2);
        assert_eq!(norm_max(&i2), 1.0);
        assert_abs_diff_eq!(norm_spectral(&i2).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(norm_fro(&i2), 2.0_f64.sqrt(), epsilon = 1e-15);
        assert_eq!(norm_inf_induced(&i2), 1.0);
        assert_eq!(norm_l11(&i2), 2.0);

        // A'A of [[0,3],[0,4]] has eigenvalues {0, 25}.
        let a = array![[0.0, 3.0], [0.0, 4.0]];
        assert_abs_diff_eq!(norm_spectral(&a).unwrap(), 5.0, epsilon = 1e-10);

        let z = Array2::<f64>::zeros((3, 3));
        assert_eq!(norm_max(&z), 0.0);
        assert_eq!(norm_spectral(&z).unwrap(), 0.0);
        assert_eq!(norm_fro(&z), 0.0);
        assert_eq!(norm_inf_induced(&z), 0.0);
        assert_eq!(norm_l11(&z), 0.0);
    }

    #[test]
    fn norm_chain_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for p in [2usize, 4, 9] {
            let m = random_sym(p, &mut rng);
            let a = m.as_array();
            let spec = norm_spectral(a).unwrap();
            let fro = norm_fro(a);
            assert!(spec <= fro + 1e-10);
            assert!(fro <= (p as f64).sqrt() * spec + 1e-10);
        }
    }

    #[test]
    fn relative_fro_normalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for p in [3usize, 6, 12] {
            let sigma = random_pd(p, &mut rng);
            let v = norm_relative_fro(&sigma, &sigma).unwrap();
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-10);
        }
        // Hand example: Sigma = 4 I_4, A = I_4.
        let sigma = SymMatrix::from_diag(&[4.0; 4]);
        let a = SymMatrix::identity(4);
        assert_abs_diff_eq!(
            norm_relative_fro(&a, &sigma).unwrap(),
            0.25,
            epsilon = 1e-12
        );
        // Zero numerator.
        let z = SymMatrix::zeros(4);
        assert_eq!(norm_relative_fro(&z, &sigma).unwrap(), 0.0);
    }

    #[test]
    fn relative_fro_rejects_singular() {
        let sigma = SymMatrix::from_diag(&[1.0, 0.0]);
        let a = SymMatrix::identity(2);
        assert!(matches!(
            norm_relative_fro(&a, &sigma),
            Err(LinalgError::Singular { .. })
        ));
    }

    #[test]
    fn symmetrization_averages() {
        let m = SymMatrix::from_array(array![[1.0, 0.4], [0.2, 1.0]]).unwrap();
        assert_abs_diff_eq!(m.get(0, 1), 0.3, epsilon = 1e-15);
        assert_eq!(m.get(0, 1), m.get(1, 0));
    }
}

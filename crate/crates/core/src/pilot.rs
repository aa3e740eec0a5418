//! Pilot estimators: the covariance estimate, leading eigenvalues, and
//! leading eigenvectors that seed the thresholding pipeline.
//!
//! The two families target different tail behavior. The sub-Gaussian pilot
//! reads everything off the sample covariance matrix. The elliptical pilot
//! splits the work: eigenvalues come from the rank-based covariance
//! `Sigma_1 = D R D`, while eigenvectors come from the multivariate
//! Kendall's tau matrix, which shares the eigenspaces of the covariance
//! under elliptical distributions. The two sources are never mixed the
//! other way around.

use ndarray::Array2;

use crate::data::DataMatrix;
use crate::error::EstimateError;
use crate::kendall::{multivariate_kendall, sigma1_estimator, PairMode};
use crate::linalg::{self, sym_eigen, SymMatrix};
use crate::robust::{robust_variance_vector, MEstimatorConfig};

/// Relative floor below which the m-th eigenvalue is treated as rank
/// deficiency; the precision recomposition needs an invertible Lambda.
const RANK_FLOOR: f64 = 1e-12;

/// Which pilot family produced a triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PilotFamily {
    /// Sample covariance eigen-structure.
    Subgaussian,
    /// Rank-based robust construction.
    Elliptical,
}

impl PilotFamily {
    /// Lowercase name used in reports and on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            PilotFamily::Subgaussian => "subgaussian",
            PilotFamily::Elliptical => "elliptical",
        }
    }
}

/// A pilot covariance estimate together with its leading eigenvalues and
/// eigenvectors. `m = 0` is the degenerate factor-free triple used by the
/// pure sparse path.
#[derive(Debug, Clone)]
pub struct PilotTriple {
    /// The p x p pilot covariance estimate.
    pub sigma: SymMatrix,
    /// Leading eigenvalues, strictly descending and positive (length m).
    pub lambda: Vec<f64>,
    /// p x m matrix of the corresponding eigenvectors.
    pub gamma: Array2<f64>,
    /// Family that produced this triple.
    pub family: PilotFamily,
    /// Number of factors.
    pub m: usize,
    /// Sample size the pilot was computed from.
    pub n: usize,
}

impl PilotTriple {
    /// Validates and assembles a triple.
    pub fn new(
        sigma: SymMatrix,
        lambda: Vec<f64>,
        gamma: Array2<f64>,
        family: PilotFamily,
        n: usize,
    ) -> Result<Self, EstimateError> {
        let p = sigma.dim();
        let m = lambda.len();
        if gamma.nrows() != p || gamma.ncols() != m {
            return Err(EstimateError::InvalidParameter(format!(
                "gamma is {}x{}, expected {p}x{m}",
                gamma.nrows(),
                gamma.ncols()
            )));
        }
        if m > n.min(p) {
            return Err(EstimateError::FactorCountOutOfRange {
                m,
                limit: n.min(p),
            });
        }
        if m > 0 {
            let floor = RANK_FLOOR * lambda[0].max(0.0);
            for (j, l) in lambda.iter().enumerate() {
                if !(*l > floor) {
                    return Err(EstimateError::RankDeficient {
                        index: j,
                        value: *l,
                        floor,
                    });
                }
                if j > 0 && *l >= lambda[j - 1] {
                    return Err(EstimateError::InvalidParameter(format!(
                        "leading eigenvalues must be strictly descending; \
                         lambda[{}] = {} >= lambda[{}] = {}",
                        j,
                        l,
                        j - 1,
                        lambda[j - 1]
                    )));
                }
            }
            // Column orthonormality within 1e-8 max-norm.
            let gram = gamma.t().dot(&gamma);
            for i in 0..m {
                for j in 0..m {
                    let target = if i == j { 1.0 } else { 0.0 };
                    if (gram[[i, j]] - target).abs() > 1e-8 {
                        return Err(EstimateError::InvalidParameter(format!(
                            "eigenvector columns not orthonormal: gram[{i}][{j}] = {}",
                            gram[[i, j]]
                        )));
                    }
                }
            }
        }
        Ok(Self {
            sigma,
            lambda,
            gamma,
            family,
            m,
            n,
        })
    }

    /// The rank-m component `Gamma Lambda Gamma'`, assembled entrywise so
    /// the result is exactly symmetric and bitwise reproducible.
    pub fn low_rank(&self) -> Array2<f64> {
        let p = self.sigma.dim();
        let mut out = Array2::zeros((p, p));
        if self.m == 0 {
            return out;
        }
        for i in 0..p {
            for j in i..p {
                let mut s = 0.0f64;
                for (k, l) in self.lambda.iter().enumerate() {
                    s += l * self.gamma[[i, k]] * self.gamma[[j, k]];
                }
                out[[i, j]] = s;
                out[[j, i]] = s;
            }
        }
        out
    }
}

fn check_m(m: usize, n: usize, p: usize) -> Result<(), EstimateError> {
    let limit = n.min(p);
    if m == 0 || m >= limit {
        return Err(EstimateError::FactorCountOutOfRange { m, limit });
    }
    Ok(())
}

/// Centers columns by their arithmetic means.
fn center_columns(y: &DataMatrix) -> Array2<f64> {
    let (n, p) = (y.n(), y.p());
    let mut x = y.as_array().clone();
    for j in 0..p {
        let mean = y.column(j).sum() / n as f64;
        for i in 0..n {
            x[[i, j]] -= mean;
        }
    }
    x
}

/// Mean-centered sample covariance `X'X / n`.
pub fn sample_covariance(y: &DataMatrix) -> Result<SymMatrix, EstimateError> {
    let n = y.n();
    if n < 2 {
        return Err(EstimateError::SampleTooSmall {
            actual: n,
            requirement: "sample covariance needs at least 2 samples".into(),
        });
    }
    let x = center_columns(y);
    Ok(SymMatrix::from_array(x.t().dot(&x) / n as f64)?)
}

/// Sample-covariance pilot: mean-centered `Sigma = X'X / n` with its top-m
/// eigenpairs.
///
/// When `n < p` the eigenpairs are obtained from the n x n Gram matrix
/// `X X' / n`, which has the same nonzero spectrum; eigenvectors map back
/// through `X' u / sqrt(n lambda)`. This is algebraically identical to an
/// eigendecomposition of `Sigma` and much cheaper in the p >> n regime.
pub fn pilot_subgaussian(y: &DataMatrix, m: usize) -> Result<PilotTriple, EstimateError> {
    let (n, p) = (y.n(), y.p());
    if n < 2 {
        return Err(EstimateError::SampleTooSmall {
            actual: n,
            requirement: "sample covariance needs at least 2 samples".into(),
        });
    }
    check_m(m, n, p)?;

    let x = center_columns(y);
    let sigma = SymMatrix::from_array(x.t().dot(&x) / n as f64)?;

    let (lambda, gamma) = if p <= n {
        let eig = sym_eigen(&sigma, m)?;
        (eig.values, eig.vectors)
    } else {
        let gram = SymMatrix::from_array(x.dot(&x.t()) / n as f64)?;
        let eig = sym_eigen(&gram, m)?;
        let mut gamma = Array2::zeros((p, m));
        for j in 0..m {
            let lam = eig.values[j];
            if lam <= 0.0 {
                return Err(EstimateError::RankDeficient {
                    index: j,
                    value: lam,
                    floor: 0.0,
                });
            }
            let u = eig.vectors.column(j);
            let v = x.t().dot(&u);
            let scale = 1.0 / (n as f64 * lam).sqrt();
            for i in 0..p {
                gamma[[i, j]] = v[i] * scale;
            }
        }
        linalg::apply_sign_convention(&mut gamma);
        (eig.values, gamma)
    };

    PilotTriple::new(sigma, lambda, gamma, PilotFamily::Subgaussian, n)
}

/// Rank-based pilot for elliptical data.
///
/// `sigma` is `Sigma_1 = D R D` from robust variances and the
/// sine-transformed Kendall's tau matrix; `lambda` holds the top-m
/// eigenvalues of `Sigma_1`; `gamma` holds the top-m eigenvectors of the
/// multivariate Kendall's tau matrix.
pub fn pilot_elliptical(
    y: &DataMatrix,
    m: usize,
    config: &MEstimatorConfig,
    mode: PairMode,
) -> Result<PilotTriple, EstimateError> {
    let (n, p) = (y.n(), y.p());
    check_m(m, n, p)?;

    let scale = robust_variance_vector(y, config)?;
    let sigma1 = sigma1_estimator(y, &scale)?;
    let lambda = sym_eigen(&sigma1, m)?.values;

    let mk = multivariate_kendall(y, mode)?;
    let gamma = sym_eigen(&mk.matrix, m)?.vectors;

    PilotTriple::new(sigma1, lambda, gamma, PilotFamily::Elliptical, n)
}

/// Eigenvalue-ratio heuristic for the number of factors. Experimental: the
/// estimation pipeline treats the factor count as caller-supplied and never
/// applies this automatically.
///
/// Returns the `j` maximizing `eigvals[j] / eigvals[j+1]` over
/// `j <= floor(len/2)` (1-based).
pub fn estimate_num_factors(eigvals: &[f64]) -> Result<usize, EstimateError> {
    let len = eigvals.len();
    if len < 2 {
        return Err(EstimateError::InvalidParameter(
            "factor-count heuristic needs at least 2 eigenvalues".into(),
        ));
    }
    let cap = (len / 2).clamp(1, len - 1);
    let mut best_j = 1usize;
    let mut best_ratio = f64::NEG_INFINITY;
    for j in 1..=cap {
        let denom = eigvals[j];
        if denom <= 0.0 {
            continue;
        }
        let ratio = eigvals[j - 1] / denom;
        if ratio > best_ratio {
            best_ratio = ratio;
            best_j = j;
        }
    }
    Ok(best_j)
}

//! Multivariate-t data generation and the two benchmark designs.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::data::DataMatrix;
use crate::error::EstimateError;
use crate::linalg::{self, chol_inverse, sym_eigen, sym_eigen_full, SymMatrix};

/// Draws `n` rows with covariance exactly `cov` from a multivariate
/// t-distribution with `nu` degrees of freedom, or a Gaussian when `nu` is
/// infinite.
///
/// For finite `nu` the scatter matrix is `cov (nu-2)/nu`, so dividing the
/// Gaussian draw by `sqrt(w/nu)` with `w ~ chi-square(nu)` restores `cov`
/// as the covariance. Requires `nu > 2` (finite second moments) and a PSD
/// `cov`.
pub fn sample_mvt<R: Rng + ?Sized>(
    n: usize,
    cov: &SymMatrix,
    nu: f64,
    rng: &mut R,
) -> Result<DataMatrix, EstimateError> {
    if !nu.is_infinite() && !(nu > 2.0) {
        return Err(EstimateError::InvalidParameter(format!(
            "degrees of freedom must exceed 2 or be infinite, got {nu}"
        )));
    }
    let p = cov.dim();
    let eig = sym_eigen_full(cov)?;
    let lam_max = eig.values[0].max(0.0);
    if eig.values[p - 1] < -1e-10 * lam_max.max(1.0) {
        return Err(EstimateError::InvalidParameter(format!(
            "covariance is not PSD: min eigenvalue {}",
            eig.values[p - 1]
        )));
    }

    let scatter_scale = if nu.is_infinite() {
        1.0
    } else {
        ((nu - 2.0) / nu).sqrt()
    };

    // Transform A = Gamma diag(sqrt(lambda)); diagonal covariance keeps the
    // O(p) fast path.
    let diagonal = {
        let mut diag_only = true;
        'outer: for i in 0..p {
            for j in (i + 1)..p {
                if cov.get(i, j) != 0.0 {
                    diag_only = false;
                    break 'outer;
                }
            }
        }
        diag_only
    };
    let sqrt_diag: Vec<f64> = if diagonal {
        (0..p).map(|i| cov.get(i, i).max(0.0).sqrt()).collect()
    } else {
        Vec::new()
    };
    let a = if diagonal {
        Array2::zeros((0, 0))
    } else {
        let mut scaled = eig.vectors.clone();
        for (j, l) in eig.values.iter().enumerate() {
            let s = l.max(0.0).sqrt();
            for i in 0..p {
                scaled[[i, j]] *= s;
            }
        }
        scaled
    };

    let chi = if nu.is_infinite() {
        None
    } else {
        Some(ChiSquared::new(nu).map_err(|e| {
            EstimateError::InvalidParameter(format!("chi-square({nu}): {e}"))
        })?)
    };

    let mut out = Array2::zeros((n, p));
    let mut g = vec![0.0f64; p];
    for i in 0..n {
        for gj in g.iter_mut() {
            *gj = rng.sample(StandardNormal);
        }
        if diagonal {
            for j in 0..p {
                out[[i, j]] = scatter_scale * sqrt_diag[j] * g[j];
            }
        } else {
            for j in 0..p {
                let mut s = 0.0f64;
                for k in 0..p {
                    s += a[[j, k]] * g[k];
                }
                out[[i, j]] = scatter_scale * s;
            }
        }
        if let Some(chi) = &chi {
            let w: f64 = chi.sample(rng);
            let denom = (w / nu).sqrt();
            for j in 0..p {
                out[[i, j]] /= denom;
            }
        }
    }
    DataMatrix::new(out).map_err(|e| EstimateError::InvalidParameter(e.to_string()))
}

/// Ground truth accompanying a simulated dataset.
#[derive(Debug, Clone)]
pub struct SimTruth {
    /// Population covariance `B B' + Sigma_u`.
    pub sigma: SymMatrix,
    /// Its inverse.
    pub sigma_inv: SymMatrix,
    /// Idiosyncratic covariance.
    pub sigma_u: SymMatrix,
    /// Its inverse.
    pub sigma_u_inv: SymMatrix,
    /// Leading eigenvalues of `sigma` (length m).
    pub lambda: Vec<f64>,
    /// Leading eigenvectors of `sigma`, sign convention applied.
    pub gamma: Array2<f64>,
    /// Factor loadings used to generate the data.
    pub loadings: Array2<f64>,
    /// Idiosyncratic precision matrix (graph design only).
    pub omega_u: Option<SymMatrix>,
    /// Full precision matrix (graph design only).
    pub omega: Option<SymMatrix>,
}

/// N(0, 1) loading matrix, one row per variable.
pub fn draw_loadings<R: Rng + ?Sized>(p: usize, m: usize, rng: &mut R) -> Array2<f64> {
    let mut b = Array2::zeros((p, m));
    for v in b.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    b
}

/// Factor design with identity idiosyncratic covariance: draws `(f, u)`
/// jointly t with covariance `diag(I_m, I_p)` and forms `y = B f + u`, so
/// the population covariance is `B B' + I`.
pub fn gen_cov_design<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    m: usize,
    nu: f64,
    rng: &mut R,
) -> Result<(DataMatrix, SimTruth), EstimateError> {
    let b = draw_loadings(p, m, rng);
    gen_cov_design_with_loadings(&b, n, nu, rng)
}

/// As [`gen_cov_design`] with caller-supplied loadings.
pub fn gen_cov_design_with_loadings<R: Rng + ?Sized>(
    b: &Array2<f64>,
    n: usize,
    nu: f64,
    rng: &mut R,
) -> Result<(DataMatrix, SimTruth), EstimateError> {
    let (p, m) = (b.nrows(), b.ncols());
    if m >= p {
        return Err(EstimateError::FactorCountOutOfRange { m, limit: p });
    }
    let joint_cov = SymMatrix::identity(m + p);
    let fu = sample_mvt(n, &joint_cov, nu, rng)?;
    let y = assemble_observations(b, &fu)?;

    let sigma_u = SymMatrix::identity(p);
    let truth = factor_truth(b, &sigma_u, &sigma_u, None)?;
    Ok((y, truth))
}

/// Block-diagonal precision design: `Omega_u = diag(M, ..., M)` with
/// `M = [[1, 0.5], [0.5, 1]]`, so `Sigma_u` has 2x2 blocks
/// `[[4/3, -2/3], [-2/3, 4/3]]`; `(f, u)` is drawn jointly t with
/// covariance `diag(I_m, Omega_u^{-1})`. Requires even `p`.
pub fn gen_graph_design<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    m: usize,
    nu: f64,
    rng: &mut R,
) -> Result<(DataMatrix, SimTruth), EstimateError> {
    let b = draw_loadings(p, m, rng);
    gen_graph_design_with_loadings(&b, n, nu, rng)
}

/// As [`gen_graph_design`] with caller-supplied loadings.
pub fn gen_graph_design_with_loadings<R: Rng + ?Sized>(
    b: &Array2<f64>,
    n: usize,
    nu: f64,
    rng: &mut R,
) -> Result<(DataMatrix, SimTruth), EstimateError> {
    let (p, m) = (b.nrows(), b.ncols());
    if p % 2 != 0 {
        return Err(EstimateError::InvalidParameter(format!(
            "block-diagonal design needs even p, got {p}"
        )));
    }
    if m >= p {
        return Err(EstimateError::FactorCountOutOfRange { m, limit: p });
    }

    let (omega_u, sigma_u) = block_truth(p);
    let mut joint = Array2::zeros((m + p, m + p));
    for i in 0..m {
        joint[[i, i]] = 1.0;
    }
    for i in 0..p {
        for j in 0..p {
            joint[[m + i, m + j]] = sigma_u.get(i, j);
        }
    }
    let fu = sample_mvt(n, &SymMatrix::from_symmetric_unchecked(joint), nu, rng)?;
    let y = assemble_observations(b, &fu)?;

    let truth = factor_truth(b, &sigma_u, &omega_u, Some(omega_u.clone()))?;
    Ok((y, truth))
}

/// `Omega_u` and its closed-form inverse for the 2x2 block design.
fn block_truth(p: usize) -> (SymMatrix, SymMatrix) {
    let mut omega = Array2::zeros((p, p));
    let mut sigma = Array2::zeros((p, p));
    for b in 0..p / 2 {
        let i = 2 * b;
        omega[[i, i]] = 1.0;
        omega[[i + 1, i + 1]] = 1.0;
        omega[[i, i + 1]] = 0.5;
        omega[[i + 1, i]] = 0.5;
        sigma[[i, i]] = 4.0 / 3.0;
        sigma[[i + 1, i + 1]] = 4.0 / 3.0;
        sigma[[i, i + 1]] = -2.0 / 3.0;
        sigma[[i + 1, i]] = -2.0 / 3.0;
    }
    (
        SymMatrix::from_symmetric_unchecked(omega),
        SymMatrix::from_symmetric_unchecked(sigma),
    )
}

/// `Y = F B' + U` from the joint `(f, u)` sample.
fn assemble_observations(
    b: &Array2<f64>,
    fu: &DataMatrix,
    ) -> Result<DataMatrix, EstimateError> {
    let (p, m) = (b.nrows(), b.ncols());
    let n = fu.n();
    let mut y = Array2::zeros((n, p));
    for i in 0..n {
        let row = fu.row(i);
        for j in 0..p {
            let mut v = row[m + j];
            for k in 0..m {
                v += b[[j, k]] * row[k];
            }
            y[[i, j]] = v;
        }
    }
    DataMatrix::new(y).map_err(|e| EstimateError::InvalidParameter(e.to_string()))
}

/// Truth quantities shared by both designs.
///
/// The leading eigenstructure of `Sigma = B B' + Sigma_u` comes from the
/// m x m matrix `B'B` when `Sigma_u = I` (exact); otherwise from a direct
/// eigendecomposition. The full precision matrix uses the Woodbury identity
/// on the true quantities.
fn factor_truth(
    b: &Array2<f64>,
    sigma_u: &SymMatrix,
    sigma_u_inv: &SymMatrix,
    omega_u: Option<SymMatrix>,
) -> Result<SimTruth, EstimateError> {
    let (p, m) = (b.nrows(), b.ncols());
    let is_identity_sigma_u = omega_u.is_none();

    let mut sigma_arr = Array2::zeros((p, p));
    for i in 0..p {
        for j in i..p {
            let mut v = sigma_u.get(i, j);
            for k in 0..m {
                v += b[[i, k]] * b[[j, k]];
            }
            sigma_arr[[i, j]] = v;
            sigma_arr[[j, i]] = v;
        }
    }
    let sigma = SymMatrix::from_symmetric_unchecked(sigma_arr);

    let btb_eig = if is_identity_sigma_u {
        Some(sym_eigen_full(&SymMatrix::from_array(b.t().dot(b))?)?)
    } else {
        None
    };
    let closed_form_ok = btb_eig
        .as_ref()
        .map(|e| e.values[m - 1] > 1e-12 * e.values[0].max(1.0))
        .unwrap_or(false);
    let (lambda, gamma) = if closed_form_ok {
        // Sigma = B B' + I: eigenvalues are mu_j + 1 with mu_j the spectrum
        // of B'B, eigenvectors B u_j / sqrt(mu_j).
        let eig = btb_eig.expect("checked above");
        let mut gamma = Array2::zeros((p, m));
        let mut lambda = Vec::with_capacity(m);
        for j in 0..m {
            let mu = eig.values[j];
            lambda.push(mu + 1.0);
            let u = eig.vectors.column(j);
            let v = b.dot(&u);
            let s = 1.0 / mu.sqrt();
            for i in 0..p {
                gamma[[i, j]] = v[i] * s;
            }
        }
        linalg::apply_sign_convention(&mut gamma);
        (lambda, gamma)
    } else {
        // Degenerate or structured idiosyncratic part: read the leading
        // eigenstructure off Sigma directly.
        let eig = sym_eigen(&sigma, m)?;
        (eig.values, eig.vectors)
    };

    // Sigma^{-1} = Omega_u - Omega_u B (I_m + B' Omega_u B)^{-1} B' Omega_u
    // with Omega_u = Sigma_u^{-1}.
    let g = sigma_u_inv.as_array().dot(b); // p x m
    let mut core = b.t().dot(&g);
    for k in 0..m {
        core[[k, k]] += 1.0;
    }
    let core_inv = chol_inverse(&SymMatrix::from_array(core)?)?;
    let gc = g.dot(core_inv.as_array());
    let mut sigma_inv_arr = Array2::zeros((p, p));
    for i in 0..p {
        for j in i..p {
            let mut corr = 0.0f64;
            for k in 0..m {
                corr += gc[[i, k]] * g[[j, k]];
            }
            let v = sigma_u_inv.get(i, j) - corr;
            sigma_inv_arr[[i, j]] = v;
            sigma_inv_arr[[j, i]] = v;
        }
    }
    let sigma_inv = SymMatrix::from_symmetric_unchecked(sigma_inv_arr);
    let omega = omega_u.as_ref().map(|_| sigma_inv.clone());

    Ok(SimTruth {
        sigma,
        sigma_inv,
        sigma_u: sigma_u.clone(),
        sigma_u_inv: sigma_u_inv.clone(),
        lambda,
        gamma,
        loadings: b.clone(),
        omega_u,
        omega,
    })
}

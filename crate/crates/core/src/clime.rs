//! Conditional graphical model estimation: column-wise constrained
//! l1-minimization for the idiosyncratic precision matrix, min-magnitude
//! symmetrization, and Sherman-Morrison-Woodbury recomposition of the full
//! precision matrix.

use ndarray::Array2;
use rayon::prelude::*;

use crate::data::DataMatrix;
use crate::error::EstimateError;
use crate::linalg::{chol_inverse, norm_max, sym_eigen_full, SymMatrix};
use crate::pilot::PilotTriple;
use crate::poet::{build_pilot, psd_clip, psd_maxnorm_dual, rate_wn, residual_covariance,
    FamilySpec, PsdMode};
use crate::simplex::{simplex_min, LpOutcome};

/// Sparse precision estimate for the idiosyncratic component, with the
/// recomposed full precision matrix when a factor structure was removed.
#[derive(Debug, Clone)]
pub struct PrecisionEstimate {
    /// Symmetrized idiosyncratic precision estimate.
    pub omega_u: SymMatrix,
    /// Full precision matrix from the Woodbury recomposition; absent when
    /// the estimate was built without a factor part.
    pub omega: Option<SymMatrix>,
    /// Constraint level the column programs were solved at.
    pub tau_used: f64,
    /// `max |Sigma_u Omega^1 - I|` over the column-wise (pre-symmetrization)
    /// solution, restricted to columns that solved; each solved column is
    /// LP-feasible, so this never exceeds `tau_used` beyond roundoff.
    pub feasibility_residual: f64,
    /// `max |Sigma_u Omega_u - I|` for the symmetrized matrix. The
    /// min-magnitude symmetrization can move entries, so this may exceed
    /// `tau_used`.
    pub symmetrized_residual: f64,
    /// Columns whose linear program failed; their entries are zero.
    pub columns_failed: Vec<usize>,
    /// Smallest eigenvalue of `omega_u`. PSD is not enforced; this reports
    /// how far from the cone the estimate landed.
    pub omega_u_min_eigenvalue: f64,
}

/// Solves the column program
/// `min |w|_1  s.t.  max_k |(Sigma_u w - e_j)_k| <= tau`
/// by a split into positive and negative parts and a dense two-phase
/// simplex solve.
pub fn clime_column(
    sigma_u: &SymMatrix,
    j: usize,
    tau: f64,
) -> Result<Vec<f64>, EstimateError> {
    let p = sigma_u.dim();
    if j >= p {
        return Err(EstimateError::InvalidParameter(format!(
            "column index {j} out of range for p = {p}"
        )));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(EstimateError::InvalidParameter(format!(
            "tau must be nonnegative, got {tau}"
        )));
    }

    // Variables x = (w+, w-), constraints:
    //   S (w+ - w-) <= tau + e_j   and   -S (w+ - w-) <= tau - e_j.
    let c = vec![1.0f64; 2 * p];
    let mut rows = Vec::with_capacity(2 * p);
    let mut b = Vec::with_capacity(2 * p);
    for k in 0..p {
        let mut row = vec![0.0f64; 2 * p];
        for l in 0..p {
            row[l] = sigma_u.get(k, l);
            row[p + l] = -sigma_u.get(k, l);
        }
        b.push(tau + if k == j { 1.0 } else { 0.0 });
        rows.push(row);
    }
    for k in 0..p {
        let mut row = vec![0.0f64; 2 * p];
        for l in 0..p {
            row[l] = -sigma_u.get(k, l);
            row[p + l] = sigma_u.get(k, l);
        }
        b.push(tau - if k == j { 1.0 } else { 0.0 });
        rows.push(row);
    }

    match simplex_min(&c, &rows, &b).map_err(|reason| EstimateError::LpFailure {
        column: j,
        reason,
    })? {
        LpOutcome::Optimal { x } => {
            Ok((0..p).map(|l| x[l] - x[p + l]).collect())
        }
        LpOutcome::Infeasible => Err(EstimateError::LpFailure {
            column: j,
            reason: "infeasible constraint set".into(),
        }),
    }
}

/// Min-magnitude symmetrization: keep whichever of `(i, j)` and `(j, i)` has
/// the smaller absolute value, preferring `(i, j)` on ties.
pub(crate) fn symmetrize_min_magnitude(raw: &Array2<f64>) -> Array2<f64> {
    let p = raw.nrows();
    let mut out = Array2::zeros((p, p));
    for i in 0..p {
        out[[i, i]] = raw[[i, i]];
        for j in (i + 1)..p {
            let a = raw[[i, j]];
            let b = raw[[j, i]];
            let v = if a.abs() <= b.abs() { a } else { b };
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    out
}

/// Column-by-column precision estimation with symmetrization. Individual
/// column failures are recorded, zero-filled, and do not abort the run; the
/// call fails only if every column fails.
pub fn clime_estimate(
    sigma_u: &SymMatrix,
    tau: f64,
) -> Result<PrecisionEstimate, EstimateError> {
    let p = sigma_u.dim();
    let solved: Vec<Result<Vec<f64>, EstimateError>> = (0..p)
        .into_par_iter()
        .map(|j| clime_column(sigma_u, j, tau))
        .collect();

    let mut raw = Array2::zeros((p, p));
    let mut columns_failed = Vec::new();
    for (j, res) in solved.into_iter().enumerate() {
        match res {
            Ok(col) => {
                for i in 0..p {
                    raw[[i, j]] = col[i];
                }
            }
            Err(_) => columns_failed.push(j),
        }
    }
    if columns_failed.len() == p {
        return Err(EstimateError::LpFailure {
            column: columns_failed[0],
            reason: "every column program failed".into(),
        });
    }

    // Feasibility of the column-wise solution over solved columns.
    let prod = sigma_u.as_array().dot(&raw);
    let mut feasibility_residual = 0.0f64;
    for j in 0..p {
        if columns_failed.contains(&j) {
            continue;
        }
        for i in 0..p {
            let target = if i == j { 1.0 } else { 0.0 };
            feasibility_residual = feasibility_residual.max((prod[[i, j]] - target).abs());
        }
    }

    let sym = symmetrize_min_magnitude(&raw);
    let omega_u = SymMatrix::from_symmetric_unchecked(sym);
    let prod_sym = sigma_u.as_array().dot(omega_u.as_array());
    let eye = Array2::<f64>::eye(p);
    let symmetrized_residual = norm_max(&(&prod_sym - &eye));
    let omega_u_min_eigenvalue = sym_eigen_full(&omega_u)?.values[p - 1];

    Ok(PrecisionEstimate {
        omega_u,
        omega: None,
        tau_used: tau,
        feasibility_residual,
        symmetrized_residual,
        columns_failed,
        omega_u_min_eigenvalue,
    })
}

/// Full precision matrix from the Woodbury identity:
/// `Omega = Omega_u - Omega_u G (Lambda^{-1} + G' Omega_u G)^{-1} G' Omega_u`.
pub fn precision_from_factor(
    omega_u: &SymMatrix,
    pilot: &PilotTriple,
) -> Result<SymMatrix, EstimateError> {
    let p = omega_u.dim();
    let m = pilot.m;
    if pilot.sigma.dim() != p {
        return Err(EstimateError::InvalidParameter(format!(
            "pilot dimension {} does not match omega_u dimension {p}",
            pilot.sigma.dim()
        )));
    }
    if m == 0 {
        return Ok(omega_u.clone());
    }

    // Core = Lambda^{-1} + Gamma' Omega_u Gamma, m x m.
    let g = omega_u.as_array().dot(&pilot.gamma); // p x m
    let mut core = pilot.gamma.t().dot(&g); // m x m
    for (k, l) in pilot.lambda.iter().enumerate() {
        core[[k, k]] += 1.0 / l;
    }
    let core_sym = SymMatrix::from_array(core)?;
    let eig = sym_eigen_full(&core_sym)?;
    let (lmax, lmin) = (eig.values[0], eig.values[m - 1]);
    if !(lmin > 0.0) || lmax / lmin > 1e10 {
        return Err(EstimateError::SingularCore { dim: m });
    }
    let core_inv = chol_inverse(&core_sym)?;

    // Correction = G core^{-1} G', assembled entrywise for exact symmetry.
    let gc = g.dot(core_inv.as_array()); // p x m
    let mut out = Array2::zeros((p, p));
    for i in 0..p {
        for j in i..p {
            let mut corr = 0.0f64;
            for k in 0..m {
                corr += gc[[i, k]] * g[[j, k]];
            }
            let v = omega_u.get(i, j) - corr;
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    Ok(SymMatrix::from_symmetric_unchecked(out))
}

/// Conditional graphical model pipeline: pilot, residual, optional PSD
/// projection, column-wise precision estimation at `tau = C w_n`, and
/// Woodbury recomposition.
pub fn conditional_graph_estimate(
    y: &DataMatrix,
    m: usize,
    spec: &FamilySpec,
    clime_tau_const: f64,
    psd: PsdMode,
) -> Result<PrecisionEstimate, EstimateError> {
    let pilot = build_pilot(y, m, spec)?;
    graph_from_pilot(&pilot, clime_tau_const, psd)
}

/// Conditional graphical model pipeline from an existing pilot triple.
pub fn graph_from_pilot(
    pilot: &PilotTriple,
    clime_tau_const: f64,
    psd: PsdMode,
) -> Result<PrecisionEstimate, EstimateError> {
    if !(clime_tau_const >= 0.0 && clime_tau_const.is_finite()) {
        return Err(EstimateError::InvalidParameter(format!(
            "clime tau constant must be nonnegative, got {clime_tau_const}"
        )));
    }
    let p = pilot.sigma.dim();
    let tau = clime_tau_const * rate_wn(pilot.n, p);

    let residual = residual_covariance(pilot);
    let projected = match psd {
        PsdMode::None => residual,
        PsdMode::Clip => psd_clip(&residual)?,
        PsdMode::MaxnormDual => psd_maxnorm_dual(&residual, tau)?,
    };

    let mut estimate = clime_estimate(&projected, tau)?;
    estimate.omega = Some(if pilot.m == 0 {
        estimate.omega_u.clone()
    } else {
        precision_from_factor(&estimate.omega_u, pilot)?
    });
    Ok(estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eigen_full;
    use crate::pilot::PilotFamily;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pd(p: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
        let mut a = Array2::<f64>::zeros((p, p));
        for i in 0..p {
            for j in 0..p {
                a[[i, j]] = rng.random_range(-1.0..1.0);
            }
        }
        let b = a.t().dot(&a) + Array2::<f64>::eye(p) * (0.5 * p as f64);
        SymMatrix::from_array(b).unwrap()
    }

    fn random_orthonormal_cols(p: usize, m: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        let s = random_pd(p, rng);
        let eig = sym_eigen_full(&s).unwrap();
        let mut g = Array2::zeros((p, m));
        for j in 0..m {
            for i in 0..p {
                g[[i, j]] = eig.vectors[[i, j]];
            }
        }
        g
    }

    #[test]
    fn column_identity_and_large_tau() {
        let eye = SymMatrix::identity(3);
        let col = clime_column(&eye, 1, 0.0).unwrap();
        assert_abs_diff_eq!(col[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(col[1], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(col[2], 0.0, epsilon = 1e-9);

        // With tau >= 1 the zero vector is feasible and optimal.
        let m = SymMatrix::from_array(array![[1.0, 0.3], [0.3, 1.0]]).unwrap();
        let col = clime_column(&m, 0, 1.0).unwrap();
        assert_abs_diff_eq!(col[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(col[1], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn column_exact_inverse_at_tau_zero() {
        let m = SymMatrix::from_array(array![[1.0, 0.5], [0.5, 1.0]]).unwrap();
        let col = clime_column(&m, 0, 0.0).unwrap();
        assert_abs_diff_eq!(col[0], 4.0 / 3.0, epsilon = 1e-8);
        assert_abs_diff_eq!(col[1], -2.0 / 3.0, epsilon = 1e-8);
    }

    #[test]
    fn objective_bounded_by_true_inverse_column() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for _ in 0..10 {
            let s = random_pd(4, &mut rng);
            let inv = chol_inverse(&s).unwrap();
            for j in 0..4 {
                let col = clime_column(&s, j, 0.05).unwrap();
                let obj: f64 = col.iter().map(|v| v.abs()).sum();
                let inv_l1: f64 = (0..4).map(|i| inv.get(i, j).abs()).sum();
                assert!(
                    obj <= inv_l1 + 1e-7,
                    "objective {obj} exceeds inverse column norm {inv_l1}"
                );
            }
        }
    }

    #[test]
    fn objective_monotone_in_tau() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let s = random_pd(4, &mut rng);
        let taus = [0.0, 0.05, 0.2, 0.5];
        let mut last = f64::INFINITY;
        for tau in taus {
            let total: f64 = (0..4)
                .map(|j| {
                    clime_column(&s, j, tau)
                        .unwrap()
                        .iter()
                        .map(|v| v.abs())
                        .sum::<f64>()
                })
                .sum();
            assert!(
                total <= last + 1e-7,
                "objective increased from {last} to {total} at tau {tau}"
            );
            last = total;
        }
    }

    #[test]
    fn estimate_identity() {
        let est = clime_estimate(&SymMatrix::identity(3), 0.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(est.omega_u.get(i, j), expected, epsilon = 1e-8);
            }
        }
        assert!(est.columns_failed.is_empty());
        assert!(est.feasibility_residual <= 1e-8);
        assert!(est.omega.is_none());
    }

    #[test]
    fn symmetrization_picks_smaller_magnitude() {
        let raw = array![[1.0, 0.3], [-0.2, 1.0]];
        let sym = symmetrize_min_magnitude(&raw);
        assert_eq!(sym[[0, 1]], -0.2);
        assert_eq!(sym[[1, 0]], -0.2);
        // Ties keep the (i, j) entry.
        let raw = array![[1.0, 0.25], [-0.25, 1.0]];
        let sym = symmetrize_min_magnitude(&raw);
        assert_eq!(sym[[0, 1]], 0.25);
        // Never exceeds either input in magnitude.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut raw = Array2::<f64>::zeros((5, 5));
        for v in raw.iter_mut() {
            *v = rng.random_range(-2.0..2.0);
        }
        let sym = symmetrize_min_magnitude(&raw);
        for i in 0..5 {
            for j in 0..5 {
                assert!(sym[[i, j]].abs() <= raw[[i, j]].abs().max(raw[[j, i]].abs()) + 1e-15);
                assert!(
                    sym[[i, j]].abs() >= raw[[i, j]].abs().min(raw[[j, i]].abs()) - 1e-15
                );
            }
        }
    }

    #[test]
    fn block_diagonal_pattern_recovery() {
        // Exact Sigma_u with 2x2 blocks [[4/3, -2/3], [-2/3, 4/3]]; the
        // estimate has the block-diagonal inverse pattern [[1, .5], [.5, 1]].
        let p = 6;
        let mut m = Array2::<f64>::zeros((p, p));
        for b in 0..p / 2 {
            let i = 2 * b;
            m[[i, i]] = 4.0 / 3.0;
            m[[i + 1, i + 1]] = 4.0 / 3.0;
            m[[i, i + 1]] = -2.0 / 3.0;
            m[[i + 1, i]] = -2.0 / 3.0;
        }
        let sigma_u = SymMatrix::from_array(m).unwrap();
        let est = clime_estimate(&sigma_u, 0.01).unwrap();
        assert!(est.columns_failed.is_empty());
        assert!(est.feasibility_residual <= 0.01 + 1e-8);
        for i in 0..p {
            for j in 0..p {
                if i / 2 == j / 2 {
                    let expected = if i == j { 1.0 } else { 0.5 };
                    assert!(
                        (est.omega_u.get(i, j) - expected).abs() < 0.05,
                        "block entry ({i},{j}) = {}",
                        est.omega_u.get(i, j)
                    );
                } else {
                    assert_eq!(est.omega_u.get(i, j), 0.0, "off-block ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn woodbury_hand_example() {
        // omega_u = I, gamma = e1, lambda = (1):
        // Omega = I - e1 (1 + 1)^{-1} e1' = diag(1/2, 1, 1).
        let omega_u = SymMatrix::identity(3);
        let mut gamma = Array2::zeros((3, 1));
        gamma[[0, 0]] = 1.0;
        let pilot = PilotTriple::new(
            SymMatrix::identity(3),
            vec![1.0],
            gamma,
            PilotFamily::Subgaussian,
            10,
        )
        .unwrap();
        let omega = precision_from_factor(&omega_u, &pilot).unwrap();
        assert_abs_diff_eq!(omega.get(0, 0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(omega.get(1, 1), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(omega.get(2, 2), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(omega.get(0, 1), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn woodbury_huge_lambda_limit() {
        // As lambda grows the recomposition approaches
        // Omega_u - Omega_u G (G' Omega_u G)^{-1} G' Omega_u.
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let omega_u = random_pd(5, &mut rng);
        let gamma = random_orthonormal_cols(5, 1, &mut rng);

        let make = |lam: f64| {
            let pilot = PilotTriple::new(
                SymMatrix::identity(5),
                vec![lam],
                gamma.clone(),
                PilotFamily::Subgaussian,
                10,
            )
            .unwrap();
            precision_from_factor(&omega_u, &pilot).unwrap()
        };
        let at_large = make(1e12);

        // Limit form computed directly.
        let g = omega_u.as_array().dot(&gamma);
        let core = gamma.t().dot(&g);
        let corr = g.dot(&(g.t().to_owned() / core[[0, 0]]));
        let limit = omega_u.as_array() - &corr;
        let diff = at_large.as_array() - &limit;
        assert!(norm_max(&diff) < 1e-9);
    }

    #[test]
    fn woodbury_matches_direct_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let (p, m) = (8, 2);
        let omega_u = random_pd(p, &mut rng);
        let gamma = random_orthonormal_cols(p, m, &mut rng);
        let lambda = vec![7.0, 3.0];
        let pilot = PilotTriple::new(
            SymMatrix::identity(p),
            lambda.clone(),
            gamma.clone(),
            PilotFamily::Subgaussian,
            20,
        )
        .unwrap();

        let smw = precision_from_factor(&omega_u, &pilot).unwrap();

        let sigma_u = chol_inverse(&omega_u).unwrap();
        let total = SymMatrix::from_array(pilot.low_rank() + sigma_u.as_array()).unwrap();
        let direct = chol_inverse(&total).unwrap();
        let diff = smw.as_array() - direct.as_array();
        assert!(norm_max(&diff) <= 1e-7, "max diff {}", norm_max(&diff));
    }

    #[test]
    fn conditional_graph_recovers_identity_on_gaussian_factor_data() {
        // Factor data with Sigma_u = I: the idiosyncratic precision estimate
        // lands within a few w_n of the identity in max norm.
        use crate::poet::{rate_wn, FamilySpec, PsdMode};
        use crate::sim::gen_cov_design;
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let (p, n, m) = (20, 200, 2);
        let (y, _) = gen_cov_design(n, p, m, f64::INFINITY, &mut rng).unwrap();
        let est =
            conditional_graph_estimate(&y, m, &FamilySpec::Subgaussian, 0.5, PsdMode::None)
                .unwrap();
        assert!(est.columns_failed.is_empty());
        let eye = Array2::<f64>::eye(p);
        let err = norm_max(&(est.omega_u.as_array() - &eye));
        let bound = 3.0 * rate_wn(n, p);
        assert!(err <= bound, "max-norm error {err} above 3 w_n = {bound}");
        // Invariant: LP-certified feasibility within the constraint level.
        assert!(est.feasibility_residual <= est.tau_used + 1e-8);
    }

    #[test]
    fn conditional_graph_m_zero_skips_recomposition() {
        use crate::poet::{FamilySpec, PsdMode};
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| {
                (0..5)
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect()
            })
            .collect();
        let y = crate::data::DataMatrix::from_rows(&rows).unwrap();
        let est =
            conditional_graph_estimate(&y, 0, &FamilySpec::Subgaussian, 0.5, PsdMode::None)
                .unwrap();
        let omega = est.omega.as_ref().unwrap();
        assert_eq!(omega.as_array(), est.omega_u.as_array());
    }

    #[test]
    fn woodbury_rejects_dimension_mismatch() {
        let omega_u = SymMatrix::identity(4);
        let mut gamma = Array2::zeros((3, 1));
        gamma[[0, 0]] = 1.0;
        let pilot = PilotTriple::new(
            SymMatrix::identity(3),
            vec![1.0],
            gamma,
            PilotFamily::Subgaussian,
            10,
        )
        .unwrap();
        assert!(precision_from_factor(&omega_u, &pilot).is_err());
    }
}

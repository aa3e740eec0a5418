//! Coordinatewise robust location and variance estimation for heavy-tailed
//! data, based on Huber- and Catoni-style M-estimators.
//!
//! The location estimate for a column solves `sum_i h(alpha (y_i - mu)) = 0`
//! where `h` is a bounded nondecreasing influence function and `alpha` a
//! tuning scale derived from a confidence parameter `epsilon` and a variance
//! bound `v`. Variances come from a second M-estimate on the squared data,
//! floored at a small `delta_0`.

use rayon::prelude::*;

use crate::data::DataMatrix;
use crate::error::EstimateError;

/// Influence function family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MFamily {
    /// `h(x) = clamp(x, -1, 1)`.
    Huber,
    /// `h(x) = sgn(x) log(1 + |x| + x^2/2)`.
    Catoni,
}

/// Tuning for the M-estimators. `None` fields resolve from the data:
/// `epsilon = 1/(n v p)^2`, `v` = largest classical column variance, and
/// `delta0 = 1e-8 * max(1, median column variance)`.
#[derive(Debug, Clone)]
pub struct MEstimatorConfig {
    /// Influence function family.
    pub family: MFamily,
    /// Confidence parameter in (0, 1).
    pub epsilon: Option<f64>,
    /// Upper bound on the largest marginal variance.
    pub v: Option<f64>,
    /// Variance floor `delta_0 > 0`.
    pub delta0: Option<f64>,
}

impl Default for MEstimatorConfig {
    fn default() -> Self {
        // Catoni is the family exercised in the simulations; its sample-size
        // condition n > 2 log(1/eps) is much weaker than Huber's n >= 8 log(1/eps).
        Self {
            family: MFamily::Catoni,
            epsilon: None,
            v: None,
            delta0: None,
        }
    }
}

impl MEstimatorConfig {
    /// Validates the explicitly set fields.
    pub fn validate(&self) -> Result<(), EstimateError> {
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e < 1.0) {
                return Err(EstimateError::InvalidParameter(format!(
                    "epsilon must lie in (0, 1), got {e}"
                )));
            }
        }
        if let Some(v) = self.v {
            if !(v > 0.0 && v.is_finite()) {
                return Err(EstimateError::InvalidParameter(format!(
                    "variance bound v must be positive, got {v}"
                )));
            }
        }
        if let Some(d) = self.delta0 {
            if !(d > 0.0 && d.is_finite()) {
                return Err(EstimateError::InvalidParameter(format!(
                    "variance floor delta0 must be positive, got {d}"
                )));
            }
        }
        Ok(())
    }

    fn resolve_epsilon(&self, n: usize, p: usize) -> f64 {
        self.epsilon
            .unwrap_or_else(|| 1.0 / ((n.max(p)) as f64).powi(2))
    }
}

/// Fully resolved tuning used by [`alpha_for`].
#[derive(Debug, Clone, Copy)]
pub struct ResolvedMConfig {
    /// Influence function family.
    pub family: MFamily,
    /// Confidence parameter in (0, 1).
    pub epsilon: f64,
    /// Variance upper bound.
    pub v: f64,
}

/// Tuning scale `alpha` for a given sample size.
///
/// Huber: `alpha = sqrt(log(1/eps) / (n v^2))`, valid while
/// `log(1/eps) <= n/8`. Catoni:
/// `alpha = sqrt(2 L / (n (v + 2 v L / (n - 2 L))))` with `L = log(1/eps)`,
/// valid while `n > 2 L`.
pub fn alpha_for(config: &ResolvedMConfig, n: usize) -> Result<f64, EstimateError> {
    let log_inv_eps = (1.0 / config.epsilon).ln();
    let nf = n as f64;
    match config.family {
        MFamily::Huber => {
            if log_inv_eps > nf / 8.0 {
                return Err(EstimateError::SampleTooSmall {
                    actual: n,
                    requirement: format!(
                        "Huber tuning requires log(1/epsilon) <= n/8, i.e. n >= {}",
                        (8.0 * log_inv_eps).ceil()
                    ),
                });
            }
            Ok((log_inv_eps / (nf * config.v * config.v)).sqrt())
        }
        MFamily::Catoni => {
            if nf <= 2.0 * log_inv_eps {
                return Err(EstimateError::SampleTooSmall {
                    actual: n,
                    requirement: format!(
                        "Catoni tuning requires n > 2 log(1/epsilon) = {:.3}",
                        2.0 * log_inv_eps
                    ),
                });
            }
            let denom = config.v + 2.0 * config.v * log_inv_eps / (nf - 2.0 * log_inv_eps);
            Ok((2.0 * log_inv_eps / (nf * denom)).sqrt())
        }
    }
}

fn huber_h(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

fn catoni_h(x: f64) -> f64 {
    x.signum() * (1.0 + x.abs() + 0.5 * x * x).ln()
}

fn influence_sum(samples: &[f64], alpha: f64, mu: f64, family: MFamily) -> f64 {
    let h = match family {
        MFamily::Huber => huber_h,
        MFamily::Catoni => catoni_h,
    };
    samples.iter().map(|y| h(alpha * (y - mu))).sum()
}

/// Root of `sum_i h(alpha (y_i - mu)) = 0` in `mu`.
///
/// Both influence functions are nondecreasing, so the sum is nonincreasing in
/// `mu` with a sign change on `[min(y), max(y)]`; bisection is guaranteed to
/// bracket. Runs to an interval of `1e-12 * (max - min)` and keeps halving
/// (cap 200) until the residual is below `1e-10 * n`.
pub fn m_location(samples: &[f64], alpha: f64, family: MFamily) -> f64 {
    debug_assert!(samples.len() >= 2);
    debug_assert!(alpha > 0.0);
    let mut lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return lo;
    }
    let width_tol = 1e-12 * (hi - lo);
    let res_tol = 1e-10 * samples.len() as f64;
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let s = influence_sum(samples, alpha, mid, family);
        if s == 0.0 {
            return mid;
        }
        if s > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= width_tol && s.abs() <= res_tol {
            break;
        }
    }
    mid
}

/// Coordinatewise robust mean of the columns of `Y`.
pub fn robust_mean_vector(
    y: &DataMatrix,
    config: &MEstimatorConfig,
) -> Result<Vec<f64>, EstimateError> {
    config.validate()?;
    let (n, p) = (y.n(), y.p());
    if n < 2 {
        return Err(EstimateError::SampleTooSmall {
            actual: n,
            requirement: "robust location needs at least 2 samples".into(),
        });
    }
    let epsilon = config.resolve_epsilon(n, p);
    let variances = column_sample_variances(y);
    let v = resolve_v(config.v, &variances);
    let resolved = ResolvedMConfig {
        family: config.family,
        epsilon,
        v,
    };
    let alpha = alpha_for(&resolved, n)?;
    let mut out = vec![0.0f64; p];
    out.par_iter_mut().enumerate().for_each(|(j, slot)| {
        let col: Vec<f64> = y.column(j).to_vec();
        *slot = m_location(&col, alpha, config.family);
    });
    Ok(out)
}

/// Robust marginal scale estimates.
#[derive(Debug, Clone)]
pub struct RobustScale {
    /// Robust column means.
    pub mean: Vec<f64>,
    /// Robust variances, floored at `delta_0`.
    pub sigma2: Vec<f64>,
    /// Standard deviations `sqrt(sigma2)`; the diagonal of `D`.
    pub stddev: Vec<f64>,
}

/// Robust variances: an M-estimate `eta_j` of the second moment on the
/// squared data combined with the location estimate,
/// `sigma_j^2 = max(eta_j - mu_j^2, delta_0)`.
pub fn robust_variance_vector(
    y: &DataMatrix,
    config: &MEstimatorConfig,
) -> Result<RobustScale, EstimateError> {
    config.validate()?;
    let (n, p) = (y.n(), y.p());
    if n < 2 {
        return Err(EstimateError::SampleTooSmall {
            actual: n,
            requirement: "robust variance needs at least 2 samples".into(),
        });
    }
    let epsilon = config.resolve_epsilon(n, p);
    let variances = column_sample_variances(y);
    let delta0 = config.delta0.unwrap_or_else(|| {
        let mut sorted = variances.clone();
        sorted.sort_by(f64::total_cmp);
        let median = if p % 2 == 1 {
            sorted[p / 2]
        } else {
            0.5 * (sorted[p / 2 - 1] + sorted[p / 2])
        };
        1e-8 * median.max(1.0)
    });

    let v_loc = resolve_v(config.v, &variances);
    let alpha_loc = alpha_for(
        &ResolvedMConfig {
            family: config.family,
            epsilon,
            v: v_loc,
        },
        n,
    )?;

    // The second-moment pass applies the same machinery to the squared data,
    // so its auto variance bound comes from the squared columns.
    let squared: Vec<Vec<f64>> = (0..p)
        .map(|j| y.column(j).iter().map(|x| x * x).collect())
        .collect();
    let sq_variances: Vec<f64> = squared.iter().map(|c| sample_variance(c)).collect();
    let v_sq = resolve_v(config.v, &sq_variances);
    let alpha_sq = alpha_for(
        &ResolvedMConfig {
            family: config.family,
            epsilon,
            v: v_sq,
        },
        n,
    )?;

    let family = config.family;
    let results: Vec<(f64, f64)> = (0..p)
        .into_par_iter()
        .map(|j| {
            let col: Vec<f64> = y.column(j).to_vec();
            let mu = m_location(&col, alpha_loc, family);
            let eta = m_location(&squared[j], alpha_sq, family);
            (mu, (eta - mu * mu).max(delta0))
        })
        .collect();

    let mean: Vec<f64> = results.iter().map(|r| r.0).collect();
    let sigma2: Vec<f64> = results.iter().map(|r| r.1).collect();
    let stddev: Vec<f64> = sigma2.iter().map(|s| s.sqrt()).collect();
    Ok(RobustScale {
        mean,
        sigma2,
        stddev,
    })
}

fn sample_variance(col: &[f64]) -> f64 {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

fn column_sample_variances(y: &DataMatrix) -> Vec<f64> {
    (0..y.p())
        .map(|j| sample_variance(&y.column(j).to_vec()))
        .collect()
}

fn resolve_v(configured: Option<f64>, variances: &[f64]) -> f64 {
    match configured {
        Some(v) => v,
        None => variances.iter().copied().fold(0.0f64, f64::max).max(1e-12),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn fixed(family: MFamily, epsilon: f64, v: f64) -> ResolvedMConfig {
        ResolvedMConfig { family, epsilon, v }
    }

    #[test]
    fn alpha_matches_closed_forms() {
        let eps = (-1.0f64).exp();
        let a = alpha_for(&fixed(MFamily::Huber, eps, 1.0), 100).unwrap();
        assert_abs_diff_eq!(a, 0.1, epsilon = 1e-14);
        let a = alpha_for(&fixed(MFamily::Catoni, eps, 1.0), 100).unwrap();
        let expected = (2.0f64 / (100.0 * (1.0 + 2.0 / 98.0))).sqrt();
        assert_abs_diff_eq!(a, expected, epsilon = 1e-14);
        assert_abs_diff_eq!(a, 0.140, epsilon = 5e-4);
    }

    #[test]
    fn alpha_rejects_small_samples() {
        let eps = (-1.0f64).exp();
        let err = alpha_for(&fixed(MFamily::Huber, eps, 1.0), 4).unwrap_err();
        assert!(matches!(err, EstimateError::SampleTooSmall { actual: 4, .. }));
        let err = alpha_for(&fixed(MFamily::Catoni, eps, 1.0), 2).unwrap_err();
        assert!(matches!(err, EstimateError::SampleTooSmall { .. }));
    }

    #[test]
    fn location_constant_and_symmetric() {
        for family in [MFamily::Huber, MFamily::Catoni] {
            assert_eq!(m_location(&[3.5, 3.5, 3.5], 0.7, family), 3.5);
            assert_abs_diff_eq!(m_location(&[-1.0, 1.0], 2.3, family), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn location_grid_scan_oracle() {
        // samples (0, 0, 0, 100), huber, alpha = 1: root of 3 h(-mu) + h(100 - mu) = 0.
        let samples = [0.0, 0.0, 0.0, 100.0];
        let est = m_location(&samples, 1.0, MFamily::Huber);
        let mut best = f64::INFINITY;
        let mut best_mu = 0.0;
        let mut mu = 0.0;
        while mu <= 100.0 {
            let s = influence_sum(&samples, 1.0, mu, MFamily::Huber).abs();
            if s < best {
                best = s;
                best_mu = mu;
            }
            mu += 1e-6;
        }
        assert_abs_diff_eq!(est, best_mu, epsilon = 2e-6);
        // Residual contract.
        let res = influence_sum(&samples, 1.0, est, MFamily::Huber).abs();
        assert!(res <= 1e-10 * samples.len() as f64);
    }

    #[test]
    fn mean_vector_identical_rows() {
        let rows = vec![vec![1.0, -2.0, 0.5]; 20];
        let y = DataMatrix::from_rows(&rows).unwrap();
        let mu = robust_mean_vector(&y, &MEstimatorConfig::default()).unwrap();
        assert_eq!(mu, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn mean_vector_two_symmetric_rows() {
        let y = DataMatrix::from_rows(&[vec![-1.0; 4], vec![1.0; 4]]).unwrap();
        let cfg = MEstimatorConfig {
            epsilon: Some(0.7),
            ..MEstimatorConfig::default()
        };
        let mu = robust_mean_vector(&y, &cfg).unwrap();
        for v in mu {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn mean_vector_gaussian_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (n, p) = (10_000, 3);
        let truth = [1.0, 2.0, 3.0];
        let mut a = Array2::zeros((n, p));
        for i in 0..n {
            for j in 0..p {
                let z: f64 = rng.sample(StandardNormal);
                a[[i, j]] = truth[j] + z;
            }
        }
        let y = DataMatrix::new(a).unwrap();
        for family in [MFamily::Huber, MFamily::Catoni] {
            let cfg = MEstimatorConfig {
                family,
                ..MEstimatorConfig::default()
            };
            let mu = robust_mean_vector(&y, &cfg).unwrap();
            for j in 0..p {
                assert!(
                    (mu[j] - truth[j]).abs() < 0.05,
                    "family {family:?} column {j}: {} vs {}",
                    mu[j],
                    truth[j]
                );
            }
        }
    }

    #[test]
    fn variance_floors_constant_columns() {
        let rows = vec![vec![2.0, -1.0]; 8];
        let y = DataMatrix::from_rows(&rows).unwrap();
        let cfg = MEstimatorConfig {
            epsilon: Some(0.2),
            delta0: Some(1e-6),
            v: Some(1.0),
            ..MEstimatorConfig::default()
        };
        let scale = robust_variance_vector(&y, &cfg).unwrap();
        assert_eq!(scale.sigma2, vec![1e-6, 1e-6]);
    }

    #[test]
    fn variance_two_point_column() {
        let y = DataMatrix::from_rows(&[vec![-1.0], vec![1.0]]).unwrap();
        let cfg = MEstimatorConfig {
            epsilon: Some(0.7),
            ..MEstimatorConfig::default()
        };
        let scale = robust_variance_vector(&y, &cfg).unwrap();
        assert_abs_diff_eq!(scale.sigma2[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(scale.stddev[0], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn variance_t7_monte_carlo() {
        // t_7 scaled to unit variance: x = z * sqrt(5/7) / sqrt(w / 7).
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 20_000;
        let nu = 7.0f64;
        let scale = ((nu - 2.0) / nu).sqrt();
        let chi = rand_distr::ChiSquared::new(nu).unwrap();
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            let w: f64 = rng.sample(chi);
            rows.push(vec![scale * z / (w / nu).sqrt()]);
        }
        let y = DataMatrix::from_rows(&rows).unwrap();
        let est = robust_variance_vector(&y, &MEstimatorConfig::default()).unwrap();
        assert!(
            (est.sigma2[0] - 1.0).abs() < 0.1,
            "robust variance {} too far from 1",
            est.sigma2[0]
        );
    }

    #[test]
    fn variance_invariant_to_row_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rows: Vec<Vec<f64>> = (0..40)
            .map(|_| {
                (0..3)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        let y1 = DataMatrix::from_rows(&rows).unwrap();
        let cfg = MEstimatorConfig::default();
        let a = robust_variance_vector(&y1, &cfg).unwrap();
        rows.reverse();
        rows.swap(0, 17);
        let y2 = DataMatrix::from_rows(&rows).unwrap();
        let b = robust_variance_vector(&y2, &cfg).unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(a.sigma2[j], b.sigma2[j], epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn location_translation_equivariant(
            base in proptest::collection::vec(-50.0f64..50.0, 2..12),
            shift in -20.0f64..20.0,
            alpha in 0.01f64..5.0,
        ) {
            let shifted: Vec<f64> = base.iter().map(|v| v + shift).collect();
            for family in [MFamily::Huber, MFamily::Catoni] {
                let a = m_location(&base, alpha, family);
                let b = m_location(&shifted, alpha, family);
                prop_assert!((b - (a + shift)).abs() < 1e-7);
            }
        }

        #[test]
        fn location_stays_in_range_and_monotone(
            base in proptest::collection::vec(-50.0f64..50.0, 2..12),
            extra in 0.1f64..30.0,
            alpha in 0.01f64..5.0,
        ) {
            let lo = base.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = base.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for family in [MFamily::Huber, MFamily::Catoni] {
                let est = m_location(&base, alpha, family);
                prop_assert!(est >= lo - 1e-9 && est <= hi + 1e-9);
                // Appending a sample above the estimate never decreases it.
                let mut grown = base.clone();
                grown.push(est + extra);
                let est2 = m_location(&grown, alpha, family);
                prop_assert!(est2 >= est - 1e-7);
            }
        }
    }
}

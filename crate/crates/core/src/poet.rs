//! The thresholding pipeline: residual extraction, adaptive entrywise
//! shrinkage, covariance recomposition, and positive semidefinite projection
//! of the residual.
//!
//! Given a pilot triple, the residual `Sigma_u = Sigma - Gamma Lambda Gamma'`
//! is thresholded entrywise at `tau_ij = tau (sigma_ii sigma_jj)^{1/2}` with
//! a hard, soft, or SCAD shrinkage rule, and the low-rank part is added
//! back. When the pilot's eigenvectors and eigenvalues come from different
//! source matrices the residual can be indefinite, in which case it is
//! projected onto the PSD cone first (eigenvalue clipping, or the graphical
//! lasso dual which stays within a max-norm ball of the input).

use ndarray::Array2;

use crate::data::DataMatrix;
use crate::error::EstimateError;
use crate::kendall::{sigma1_estimator, PairMode};
use crate::linalg::{chol_inverse, norm_l11, sym_eigen_full, SymMatrix};
use crate::pilot::{
    pilot_elliptical, pilot_subgaussian, sample_covariance, PilotFamily, PilotTriple,
};
use crate::robust::{robust_variance_vector, MEstimatorConfig};

/// Entrywise shrinkage family applied above the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shrinkage {
    /// Keep the value unchanged.
    Hard,
    /// `sgn(z) (|z| - tau_ij)`.
    Soft,
    /// The three-piece SCAD rule with parameter `a`.
    Scad,
}

impl Shrinkage {
    /// Lowercase name used on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            Shrinkage::Hard => "hard",
            Shrinkage::Soft => "soft",
            Shrinkage::Scad => "scad",
        }
    }
}

/// Threshold configuration: shrinkage family and the constant `C` in
/// `tau = C * w_n`, or an absolute override.
#[derive(Debug, Clone)]
pub struct ThresholdRule {
    /// Shrinkage family.
    pub shrinkage: Shrinkage,
    /// SCAD parameter, must exceed 2. The conventional choice is 3.7.
    pub scad_a: f64,
    /// Constant `C` in `tau = C * w_n(n, p)`.
    pub tau_const: f64,
    /// Absolute threshold override; bypasses the rate when set.
    pub tau_override: Option<f64>,
}

impl Default for ThresholdRule {
    fn default() -> Self {
        Self {
            shrinkage: Shrinkage::Soft,
            scad_a: 3.7,
            tau_const: 0.5,
            tau_override: None,
        }
    }
}

impl ThresholdRule {
    /// Validates parameter ranges.
    pub fn validate(&self) -> Result<(), EstimateError> {
        if self.shrinkage == Shrinkage::Scad && !(self.scad_a > 2.0) {
            return Err(EstimateError::InvalidParameter(format!(
                "SCAD parameter must exceed 2, got {}",
                self.scad_a
            )));
        }
        if !(self.tau_const >= 0.0 && self.tau_const.is_finite()) {
            return Err(EstimateError::InvalidParameter(format!(
                "tau_const must be nonnegative, got {}",
                self.tau_const
            )));
        }
        if let Some(t) = self.tau_override {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(EstimateError::InvalidParameter(format!(
                    "tau override must be nonnegative, got {t}"
                )));
            }
        }
        Ok(())
    }

    /// The threshold level for a given data shape.
    pub fn tau(&self, n: usize, p: usize) -> f64 {
        self.tau_override
            .unwrap_or_else(|| self.tau_const * rate_wn(n, p))
    }
}

/// The benchmark rate `w_n = sqrt(log p / n) + 1/sqrt(p)`.
pub fn rate_wn(n: usize, p: usize) -> f64 {
    let (nf, pf) = (n as f64, p as f64);
    (pf.ln() / nf).sqrt() + 1.0 / pf.sqrt()
}

/// Principal orthogonal complement `Sigma_u = Sigma - Gamma Lambda Gamma'`.
///
/// Both operands are exactly symmetric, so the difference is too.
pub fn residual_covariance(pilot: &PilotTriple) -> SymMatrix {
    let diff = pilot.sigma.as_array() - &pilot.low_rank();
    SymMatrix::from_symmetric_unchecked(diff)
}

fn shrink(z: f64, tau_ij: f64, rule: &ThresholdRule) -> f64 {
    if z.abs() < tau_ij {
        return 0.0;
    }
    match rule.shrinkage {
        Shrinkage::Hard => z,
        Shrinkage::Soft => z.signum() * (z.abs() - tau_ij),
        Shrinkage::Scad => {
            let a = rule.scad_a;
            let abs = z.abs();
            if abs <= 2.0 * tau_ij {
                z.signum() * (abs - tau_ij).max(0.0)
            } else if abs <= a * tau_ij {
                ((a - 1.0) * z - z.signum() * a * tau_ij) / (a - 2.0)
            } else {
                z
            }
        }
    }
}

/// Adaptive entrywise thresholding with correlation-scaled thresholds
/// `tau_ij = tau (sigma_ii sigma_jj)^{1/2}`. The diagonal is preserved
/// verbatim.
pub fn adaptive_threshold(
    sigma_u: &SymMatrix,
    rule: &ThresholdRule,
    n: usize,
) -> Result<SymMatrix, EstimateError> {
    threshold_with_flag(sigma_u, rule, n).map(|(m, _)| m)
}

/// As [`adaptive_threshold`], also reporting whether any row fell back to
/// the max-diagonal threshold because its residual variance was nonpositive.
pub(crate) fn threshold_with_flag(
    sigma_u: &SymMatrix,
    rule: &ThresholdRule,
    n: usize,
) -> Result<(SymMatrix, bool), EstimateError> {
    rule.validate()?;
    let p = sigma_u.dim();
    let tau = rule.tau(n, p);
    let diag = sigma_u.diag();
    let max_diag = diag.iter().copied().fold(0.0f64, f64::max).max(0.0);
    let bad: Vec<bool> = diag.iter().map(|d| *d <= 0.0).collect();
    let fallback_used = bad.iter().any(|b| *b);

    let mut out = Array2::zeros((p, p));
    for i in 0..p {
        out[[i, i]] = diag[i];
        for j in (i + 1)..p {
            let tau_ij = if bad[i] || bad[j] {
                // Mixed-source pilots can leave a nonpositive residual
                // variance; scale by the largest diagonal entry instead.
                tau * max_diag
            } else {
                tau * (diag[i] * diag[j]).sqrt()
            };
            let v = shrink(sigma_u.get(i, j), tau_ij, rule);
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    Ok((SymMatrix::from_symmetric_unchecked(out), fallback_used))
}

/// Eigenvalue clipping: floor the spectrum at zero and recompose.
///
/// This is the Frobenius-optimal PSD projection, not the max-norm-optimal
/// one; [`psd_maxnorm_dual`] stays within a max-norm ball instead.
pub fn psd_clip(m: &SymMatrix) -> Result<SymMatrix, EstimateError> {
    let eig = sym_eigen_full(m)?;
    let p = m.dim();
    if eig.values[p - 1] >= 0.0 {
        return Ok(m.clone());
    }
    let mut scaled = eig.vectors.clone();
    for (j, l) in eig.values.iter().enumerate() {
        let lc = l.max(0.0);
        for i in 0..p {
            scaled[[i, j]] *= lc;
        }
    }
    let rec = scaled.dot(&eig.vectors.t());
    Ok(SymMatrix::from_array(rec)?)
}

/// Maximum sweeps for the dual coordinate descent.
const DUAL_MAX_SWEEPS: usize = 500;
/// Duality gap tolerance.
const DUAL_GAP_TOL: f64 = 1e-6;

/// Positive definite starting point inside the max-norm ball, with the
/// diagonal pinned at its upper bound `A_ii + tau` (where the dual optimum
/// always sits). Tries `A + tau I`, then the box point with off-diagonals
/// soft-thresholded toward zero, then the eigenvalue-clipped input clamped
/// back into the box.
fn dual_feasible_start(a: &SymMatrix, tau: f64) -> Result<Array2<f64>, EstimateError> {
    let p = a.dim();
    let chol_ok = |w: &Array2<f64>| crate::linalg::chol_inverse(
        &SymMatrix::from_symmetric_unchecked(w.clone()),
    )
    .is_ok();

    let mut w = a.as_array().clone();
    for i in 0..p {
        w[[i, i]] += tau;
    }
    if chol_ok(&w) {
        return Ok(w);
    }

    let mut w2 = Array2::zeros((p, p));
    for i in 0..p {
        w2[[i, i]] = a.get(i, i) + tau;
        for j in (i + 1)..p {
            let v = soft(a.get(i, j), tau);
            w2[[i, j]] = v;
            w2[[j, i]] = v;
        }
    }
    if chol_ok(&w2) {
        return Ok(w2);
    }

    let clipped = psd_clip(a)?;
    let mut w3 = Array2::zeros((p, p));
    for i in 0..p {
        w3[[i, i]] = a.get(i, i) + tau;
        for j in (i + 1)..p {
            let lo = a.get(i, j) - tau;
            let hi = a.get(i, j) + tau;
            let v = clipped.get(i, j).clamp(lo, hi);
            w3[[i, j]] = v;
            w3[[j, i]] = v;
        }
    }
    if chol_ok(&w3) {
        return Ok(w3);
    }

    let min_eig = sym_eigen_full(a)?.values[p - 1];
    Err(EstimateError::ProjectionInfeasible {
        min_eigenvalue: min_eig,
        tau,
    })
}

/// PSD projection through the graphical lasso dual:
/// maximize `log det W` subject to `max |W - A| <= tau`.
///
/// Block coordinate descent over columns; each column subproblem is a lasso
/// solved by coordinate descent. The result is positive definite, satisfies
/// the max-norm constraint within 1e-8, and is optimal to duality gap 1e-6.
/// Requires `tau > 0` and a positive definite point in the max-norm ball
/// reachable by the start search in [`dual_feasible_start`].
pub fn psd_maxnorm_dual(a: &SymMatrix, tau: f64) -> Result<SymMatrix, EstimateError> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(EstimateError::InvalidParameter(format!(
            "maxnorm_dual needs tau > 0, got {tau}"
        )));
    }
    let p = a.dim();
    let mut w = dual_feasible_start(a, tau)?;
    if p == 1 {
        return Ok(SymMatrix::from_array(w)?);
    }

    let mut betas = vec![vec![0.0f64; p - 1]; p];
    let mut last_gap = f64::INFINITY;

    for sweep in 0..DUAL_MAX_SWEEPS {
        for j in 0..p {
            // Gather V = W without row/column j and s = column j of A.
            let others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
            let mut v = Array2::zeros((p - 1, p - 1));
            for (ai, &ka) in others.iter().enumerate() {
                for (bi, &kb) in others.iter().enumerate() {
                    v[[ai, bi]] = w[[ka, kb]];
                }
            }
            let s: Vec<f64> = others.iter().map(|&k| a.as_array()[[k, j]]).collect();

            // Lasso: min 1/2 b'Vb - s'b + tau |b|_1 by coordinate descent.
            let beta = &mut betas[j];
            let mut grad: Vec<f64> = (0..p - 1)
                .map(|k| {
                    let mut g = 0.0;
                    for l in 0..p - 1 {
                        g += v[[k, l]] * beta[l];
                    }
                    g
                })
                .collect();
            for _ in 0..200 {
                let mut max_delta = 0.0f64;
                for k in 0..p - 1 {
                    let old = beta[k];
                    let resid = s[k] - (grad[k] - v[[k, k]] * old);
                    let new = soft(resid, tau) / v[[k, k]];
                    if new != old {
                        let delta = new - old;
                        beta[k] = new;
                        for l in 0..p - 1 {
                            grad[l] += v[[l, k]] * delta;
                        }
                        max_delta = max_delta.max(delta.abs());
                    }
                }
                if max_delta <= 1e-12 {
                    break;
                }
            }

            // w_col = V beta, clamped into the box around s.
            for (ai, &k) in others.iter().enumerate() {
                let val = grad[ai].clamp(s[ai] - tau, s[ai] + tau);
                w[[k, j]] = val;
                w[[j, k]] = val;
            }
        }

        // Duality gap: tr(A Theta) + tau |Theta|_1 - p with Theta = W^{-1}.
        let w_sym = SymMatrix::from_array(w.clone())?;
        match chol_inverse(&w_sym) {
            Ok(theta) => {
                let tr: f64 = (0..p)
                    .map(|i| {
                        (0..p)
                            .map(|k| a.as_array()[[i, k]] * theta.get(k, i))
                            .sum::<f64>()
                    })
                    .sum();
                let gap = tr + tau * norm_l11(theta.as_array()) - p as f64;
                last_gap = gap;
                if gap.abs() <= DUAL_GAP_TOL {
                    return Ok(w_sym);
                }
            }
            Err(_) => {
                // Interior iterate momentarily lost definiteness; keep
                // sweeping.
                let _ = sweep;
            }
        }
    }
    Err(EstimateError::ProjectionNoConvergence {
        gap: last_gap,
        sweeps: DUAL_MAX_SWEEPS,
    })
}

fn soft(z: f64, tau: f64) -> f64 {
    z.signum() * (z.abs() - tau).max(0.0)
}

/// PSD handling for the residual before thresholding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsdMode {
    /// Use the residual as-is.
    None,
    /// Eigenvalue clipping.
    Clip,
    /// Graphical lasso dual within a max-norm ball of radius tau.
    MaxnormDual,
}

impl PsdMode {
    /// Lowercase name used in reports and on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            PsdMode::None => "none",
            PsdMode::Clip => "clip",
            PsdMode::MaxnormDual => "maxnorm_dual",
        }
    }

    /// Family-dependent default: mixed-source elliptical pilots can produce
    /// indefinite residuals, sample-covariance residuals cannot.
    pub fn default_for(family: PilotFamily) -> Self {
        match family {
            PilotFamily::Subgaussian => PsdMode::None,
            PilotFamily::Elliptical => PsdMode::Clip,
        }
    }
}

/// Pilot family selection for the estimation pipeline.
#[derive(Debug, Clone)]
pub enum FamilySpec {
    /// Sample covariance pilot.
    Subgaussian,
    /// Rank-based pilot with its M-estimator tuning and pair selection.
    Elliptical {
        /// Robust scale tuning.
        config: MEstimatorConfig,
        /// Multivariate Kendall's tau pair selection.
        pairs: PairMode,
    },
}

impl FamilySpec {
    /// Elliptical family with default tuning and the full pair set.
    pub fn elliptical_default() -> Self {
        FamilySpec::Elliptical {
            config: MEstimatorConfig::default(),
            pairs: PairMode::Full,
        }
    }

    /// The pilot family this spec produces.
    pub fn family(&self) -> PilotFamily {
        match self {
            FamilySpec::Subgaussian => PilotFamily::Subgaussian,
            FamilySpec::Elliptical { .. } => PilotFamily::Elliptical,
        }
    }
}

/// Output of the covariance pipeline.
#[derive(Debug, Clone)]
pub struct PoetResult {
    /// Final estimate `Gamma Lambda Gamma' + Sigma_u^T`.
    pub sigma_total: SymMatrix,
    /// Thresholded residual.
    pub sigma_u_thresholded: SymMatrix,
    /// The residual that was thresholded (after PSD projection when one was
    /// applied); its diagonal equals the diagonal of `sigma_u_thresholded`.
    pub sigma_u_raw: SymMatrix,
    /// Threshold level actually used.
    pub tau_used: f64,
    /// The pilot triple behind the estimate.
    pub pilot: PilotTriple,
    /// PSD handling that was applied to the residual.
    pub psd_mode_applied: PsdMode,
    /// Whether any threshold fell back to max-diagonal scaling because of a
    /// nonpositive residual variance.
    pub diag_fallback: bool,
}

/// Builds the pilot for a family, allowing the degenerate `m = 0` triple
/// that turns the pipeline into pure sparse covariance estimation.
pub(crate) fn build_pilot(
    y: &DataMatrix,
    m: usize,
    spec: &FamilySpec,
) -> Result<PilotTriple, EstimateError> {
    if m == 0 {
        let (sigma, family) = match spec {
            FamilySpec::Subgaussian => (sample_covariance(y)?, PilotFamily::Subgaussian),
            FamilySpec::Elliptical { config, .. } => {
                let scale = robust_variance_vector(y, config)?;
                (sigma1_estimator(y, &scale)?, PilotFamily::Elliptical)
            }
        };
        let p = sigma.dim();
        return PilotTriple::new(sigma, Vec::new(), Array2::zeros((p, 0)), family, y.n());
    }
    match spec {
        FamilySpec::Subgaussian => pilot_subgaussian(y, m),
        FamilySpec::Elliptical { config, pairs } => pilot_elliptical(y, m, config, *pairs),
    }
}

/// Full covariance pipeline from data: pilot, residual, optional PSD
/// projection, adaptive thresholding, recomposition.
pub fn poet_estimate(
    y: &DataMatrix,
    m: usize,
    spec: &FamilySpec,
    rule: &ThresholdRule,
    psd: PsdMode,
) -> Result<PoetResult, EstimateError> {
    let pilot = build_pilot(y, m, spec)?;
    poet_from_pilot(pilot, rule, psd)
}

/// Covariance pipeline from an existing pilot triple.
pub fn poet_from_pilot(
    pilot: PilotTriple,
    rule: &ThresholdRule,
    psd: PsdMode,
) -> Result<PoetResult, EstimateError> {
    rule.validate()?;
    let n = pilot.n;
    let p = pilot.sigma.dim();
    let tau = rule.tau(n, p);

    let residual = residual_covariance(&pilot);
    let projected = match psd {
        PsdMode::None => residual,
        PsdMode::Clip => psd_clip(&residual)?,
        PsdMode::MaxnormDual => psd_maxnorm_dual(&residual, tau)?,
    };

    let pinned = ThresholdRule {
        tau_override: Some(tau),
        ..rule.clone()
    };
    let (thresholded, diag_fallback) = threshold_with_flag(&projected, &pinned, n)?;

    let total = pilot.low_rank() + thresholded.as_array();
    let sigma_total = SymMatrix::from_symmetric_unchecked(total);
    Ok(PoetResult {
        sigma_total,
        sigma_u_thresholded: thresholded,
        sigma_u_raw: projected,
        tau_used: tau,
        pilot,
        psd_mode_applied: psd,
        diag_fallback,
    })
}

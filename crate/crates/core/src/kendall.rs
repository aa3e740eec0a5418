//! Rank-based covariance machinery: the marginal Kendall's tau matrix with
//! the sine transform, and the multivariate (spatial-sign) Kendall's tau
//! U-statistic whose eigenvectors estimate the leading eigenvectors of the
//! covariance matrix under elliptical distributions.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::DataMatrix;
use crate::error::EstimateError;
use crate::linalg::SymMatrix;
use crate::robust::RobustScale;

/// Pairwise Kendall's tau correlation with the fixed denominator
/// `n(n-1)/2`:
///
/// `tau = sum_{i<i'} sgn((x_i - x_i')(y_i - y_i')) / (n(n-1)/2)`
///
/// Ties contribute zero to the numerator (`sgn(0) = 0`) and are never removed
/// from the denominator. Computed in O(n log n) by merge-sort inversion
/// counting with tie-group corrections; the result equals the brute-force
/// pair sum exactly.
pub fn kendall_tau_pair(x: &[f64], y: &[f64]) -> Result<f64, EstimateError> {
    let n = x.len();
    if y.len() != n {
        return Err(EstimateError::InvalidParameter(format!(
            "length mismatch: x has {n} entries, y has {}",
            y.len()
        )));
    }
    if n < 2 {
        return Err(EstimateError::SampleTooSmall {
            actual: n,
            requirement: "Kendall's tau needs at least 2 samples".into(),
        });
    }

    // Canonicalize -0.0 to +0.0 so the total order below agrees with `==`
    // tie detection, then sort lexicographically by (x, y).
    let x: Vec<f64> = x.iter().map(|v| v + 0.0).collect();
    let y: Vec<f64> = y.iter().map(|v| v + 0.0).collect();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    // Tie counts within x and within (x, y) from consecutive runs.
    let mut tied_x: i64 = 0;
    let mut tied_xy: i64 = 0;
    let mut run_x: i64 = 1;
    let mut run_xy: i64 = 1;
    for w in 1..n {
        let (prev, cur) = (idx[w - 1], idx[w]);
        if x[cur] == x[prev] {
            run_x += 1;
            if y[cur] == y[prev] {
                run_xy += 1;
            } else {
                tied_xy += run_xy * (run_xy - 1) / 2;
                run_xy = 1;
            }
        } else {
            tied_x += run_x * (run_x - 1) / 2;
            run_x = 1;
            tied_xy += run_xy * (run_xy - 1) / 2;
            run_xy = 1;
        }
    }
    tied_x += run_x * (run_x - 1) / 2;
    tied_xy += run_xy * (run_xy - 1) / 2;

    // Bottom-up merge sort of the y sequence, counting discordant pairs.
    // Within an x tie group y is already ascending, so no pair tied in x is
    // ever counted; equal y values merge from the left and are not counted.
    let mut yy: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let mut buf = yy.clone();
    let mut swaps: i64 = 0;
    let mut width = 1usize;
    while width < n {
        let mut offset = 0usize;
        while offset < n {
            let i_end = (offset + width).min(n);
            let j_end = (i_end + width).min(n);
            let (mut i, mut j, mut k) = (offset, i_end, offset);
            while i < i_end || j < j_end {
                if i < i_end && (j >= j_end || yy[i] <= yy[j]) {
                    buf[k] = yy[i];
                    i += 1;
                } else {
                    buf[k] = yy[j];
                    j += 1;
                    swaps += (i_end - i) as i64;
                }
                k += 1;
            }
            offset += 2 * width;
        }
        std::mem::swap(&mut yy, &mut buf);
        width *= 2;
    }

    // Tie count within y from the now fully sorted sequence.
    let mut tied_y: i64 = 0;
    let mut run_y: i64 = 1;
    for w in 1..n {
        if yy[w] == yy[w - 1] {
            run_y += 1;
        } else {
            tied_y += run_y * (run_y - 1) / 2;
            run_y = 1;
        }
    }
    tied_y += run_y * (run_y - 1) / 2;

    let pairs = (n as i64) * (n as i64 - 1) / 2;
    let numerator = pairs - tied_x - tied_y + tied_xy - 2 * swaps;
    Ok(numerator as f64 / pairs as f64)
}

/// Matrix of pairwise Kendall's tau values with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct TauMatrix {
    inner: SymMatrix,
}

impl TauMatrix {
    /// Underlying symmetric matrix.
    pub fn as_sym(&self) -> &SymMatrix {
        &self.inner
    }

    /// Matrix dimension p.
    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Entry (j, k).
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.inner.get(j, k)
    }
}

/// Kendall's tau for every column pair of `Y`. Diagonal is forced to 1.
pub fn kendall_tau_matrix(y: &DataMatrix) -> Result<TauMatrix, EstimateError> {
    let (n, p) = (y.n(), y.p());
    if n < 2 {
        return Err(EstimateError::SampleTooSmall {
            actual: n,
            requirement: "Kendall's tau needs at least 2 samples".into(),
        });
    }
    let cols: Vec<Vec<f64>> = (0..p).map(|j| y.column(j).to_vec()).collect();
    let pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|j| ((j + 1)..p).map(move |k| (j, k)))
        .collect();
    let taus: Vec<f64> = pairs
        .par_iter()
        .map(|&(j, k)| kendall_tau_pair(&cols[j], &cols[k]).expect("validated above"))
        .collect();

    let mut m = Array2::zeros((p, p));
    for i in 0..p {
        m[[i, i]] = 1.0;
    }
    for (idx, &(j, k)) in pairs.iter().enumerate() {
        m[[j, k]] = taus[idx];
        m[[k, j]] = taus[idx];
    }
    Ok(TauMatrix {
        inner: SymMatrix::from_symmetric_unchecked(m),
    })
}

/// Entrywise sine transform `r_jk = sin(pi/2 * tau_jk)`, mapping rank
/// correlations to Pearson correlations under elliptical distributions.
/// The diagonal stays exactly 1.
pub fn correlation_from_tau(t: &TauMatrix) -> SymMatrix {
    let p = t.dim();
    let mut r = Array2::zeros((p, p));
    for j in 0..p {
        r[[j, j]] = 1.0;
        for k in (j + 1)..p {
            let v = (std::f64::consts::FRAC_PI_2 * t.get(j, k)).sin().clamp(-1.0, 1.0);
            r[[j, k]] = v;
            r[[k, j]] = v;
        }
    }
    SymMatrix::from_symmetric_unchecked(r)
}

/// Rank-based covariance pilot `Sigma_1 = D R D`, with `D` the robust
/// standard deviations and `R` the sine-transformed tau matrix. The diagonal
/// is set to the robust variances exactly.
pub fn sigma1_estimator(
    y: &DataMatrix,
    scale: &RobustScale,
) -> Result<SymMatrix, EstimateError> {
    let p = y.p();
    if scale.sigma2.len() != p {
        return Err(EstimateError::InvalidParameter(format!(
            "scale has {} entries but data has {p} columns",
            scale.sigma2.len()
        )));
    }
    let tau = kendall_tau_matrix(y)?;
    let r = correlation_from_tau(&tau);
    let mut m = Array2::zeros((p, p));
    for j in 0..p {
        m[[j, j]] = scale.sigma2[j];
        for k in (j + 1)..p {
            let v = scale.stddev[j] * r.get(j, k) * scale.stddev[k];
            m[[j, k]] = v;
            m[[k, j]] = v;
        }
    }
    Ok(SymMatrix::from_symmetric_unchecked(m))
}

/// Pair selection for [`multivariate_kendall`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMode {
    /// Average the kernel over all `n(n-1)/2` pairs.
    Full,
    /// Average over the `floor(n/2)` disjoint pairs of a seeded random
    /// permutation. O(n p^2) instead of O(n^2 p^2); the disjoint-pair
    /// average has the same distributional structure as the full
    /// U-statistic.
    DisjointPairs {
        /// Seed for the permutation.
        seed: u64,
    },
}

/// Multivariate Kendall's tau estimate.
#[derive(Debug, Clone)]
pub struct MultiKendall {
    /// The averaged kernel matrix; PSD with unit trace when no pairs are
    /// skipped for degeneracy.
    pub matrix: SymMatrix,
    /// Number of pairs that entered the average.
    pub pairs_used: usize,
    /// Number of exact-duplicate pairs that were skipped.
    pub pairs_skipped: usize,
}

/// Multivariate Kendall's tau: the average of the rank-one kernels
/// `(y_i - y_i')(y_i - y_i')' / ||y_i - y_i'||^2` over sample pairs.
///
/// Pairs with exactly identical rows have an undefined (0/0) kernel; they
/// are skipped and removed from the denominator. Fails if every pair is
/// degenerate. The pair set is tiled into chunks that depend only on `n` and
/// reduced in a fixed order, so results are bitwise reproducible at any
/// thread count.
pub fn multivariate_kendall(
    y: &DataMatrix,
    mode: PairMode,
) -> Result<MultiKendall, EstimateError> {
    let (n, p) = (y.n(), y.p());
    if n < 2 {
        return Err(EstimateError::SampleTooSmall {
            actual: n,
            requirement: "multivariate Kendall's tau needs at least 2 samples".into(),
        });
    }

    let pair_list: Option<Vec<(usize, usize)>> = match mode {
        PairMode::Full => None,
        PairMode::DisjointPairs { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            Some((0..n / 2).map(|r| (perm[2 * r], perm[2 * r + 1])).collect())
        }
    };

    // Accumulate the upper triangle of the kernel sum per chunk, then fold
    // chunks in index order.
    let tri_len = p * (p + 1) / 2;
    let chunk_results: Vec<(Vec<f64>, usize, usize)> = match &pair_list {
        None => {
            let rows = n - 1;
            let n_chunks = rows.min(64);
            let chunk_size = rows.div_ceil(n_chunks);
            (0..n_chunks)
                .into_par_iter()
                .map(|c| {
                    let lo = c * chunk_size;
                    let hi = ((c + 1) * chunk_size).min(rows);
                    let mut acc = vec![0.0f64; tri_len];
                    let mut used = 0usize;
                    let mut skipped = 0usize;
                    let mut diff = vec![0.0f64; p];
                    for i in lo..hi {
                        for i2 in (i + 1)..n {
                            accumulate_kernel(y, i, i2, &mut diff, &mut acc, &mut used, &mut skipped);
                        }
                    }
                    (acc, used, skipped)
                })
                .collect()
        }
        Some(pairs) => {
            let mut acc = vec![0.0f64; tri_len];
            let mut used = 0usize;
            let mut skipped = 0usize;
            let mut diff = vec![0.0f64; p];
            for &(i, i2) in pairs {
                accumulate_kernel(y, i, i2, &mut diff, &mut acc, &mut used, &mut skipped);
            }
            vec![(acc, used, skipped)]
        }
    };

    let mut total = vec![0.0f64; tri_len];
    let mut pairs_used = 0usize;
    let mut pairs_skipped = 0usize;
    for (acc, used, skipped) in chunk_results {
        for (t, a) in total.iter_mut().zip(acc.iter()) {
            *t += a;
        }
        pairs_used += used;
        pairs_skipped += skipped;
    }
    if pairs_used == 0 {
        return Err(EstimateError::DegeneratePairs);
    }

    let scale = 1.0 / pairs_used as f64;
    let mut m = Array2::zeros((p, p));
    let mut t = 0usize;
    for a in 0..p {
        for b in a..p {
            let v = total[t] * scale;
            m[[a, b]] = v;
            m[[b, a]] = v;
            t += 1;
        }
    }
    Ok(MultiKendall {
        matrix: SymMatrix::from_symmetric_unchecked(m),
        pairs_used,
        pairs_skipped,
    })
}

#[inline]
fn accumulate_kernel(
    y: &DataMatrix,
    i: usize,
    i2: usize,
    diff: &mut [f64],
    acc: &mut [f64],
    used: &mut usize,
    skipped: &mut usize,
) {
    let p = diff.len();
    let ri = y.row(i);
    let rj = y.row(i2);
    let mut norm2 = 0.0f64;
    for a in 0..p {
        let d = ri[a] - rj[a];
        diff[a] = d;
        norm2 += d * d;
    }
    if norm2 == 0.0 {
        *skipped += 1;
        return;
    }
    *used += 1;
    let inv = 1.0 / norm2;
    let mut t = 0usize;
    for a in 0..p {
        let da = diff[a] * inv;
        for b in a..p {
            acc[t] += da * diff[b];
            t += 1;
        }
    }
}

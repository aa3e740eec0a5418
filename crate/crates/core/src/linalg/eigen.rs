//! Symmetric eigensolver: Householder tridiagonalization (`tred2`) followed
//! by tridiagonal QL with implicit shifts (`tql2`), the classic EISPACK
//! routines. Operates on flat row-major buffers for speed; the public wrapper
//! sorts eigenvalues in descending order and fixes eigenvector signs.

use ndarray::Array2;

use super::apply_sign_convention;
use crate::error::LinalgError;

/// Sweep cap per eigenvalue before reporting failure.
const MAX_SWEEPS: usize = 100;

/// Full decomposition: returns descending eigenvalues and the matching
/// column-orthonormal eigenvector matrix with the sign convention applied.
pub(crate) fn symmetric_eigen_full(
    a: &Array2<f64>,
) -> Result<(Vec<f64>, Array2<f64>), LinalgError> {
    let n = a.nrows();
    let mut v: Vec<f64> = a.iter().copied().collect();
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n];

    if n == 1 {
        let mut vectors = Array2::zeros((1, 1));
        vectors[[0, 0]] = 1.0;
        return Ok((vec![v[0]], vectors));
    }

    tred2(&mut v, &mut d, &mut e, n);
    tql2(&mut v, &mut d, &mut e, n)?;
    sort_descending(&mut v, &mut d, n);

    let mut vectors = Array2::from_shape_vec((n, n), v).expect("square buffer");
    apply_sign_convention(&mut vectors);
    Ok((d, vectors))
}

#[inline(always)]
fn at(v: &[f64], n: usize, i: usize, j: usize) -> f64 {
    v[i * n + j]
}

#[inline(always)]
fn set(v: &mut [f64], n: usize, i: usize, j: usize, x: f64) {
    v[i * n + j] = x;
}

/// Householder reduction to symmetric tridiagonal form, accumulating the
/// orthogonal transformation in `v`.
fn tred2(v: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) {
    for j in 0..n {
        d[j] = at(v, n, n - 1, j);
    }

    for i in (1..n).rev() {
        // Scale to avoid under/overflow.
        let mut scale = 0.0f64;
        let mut h = 0.0f64;
        for item in d.iter().take(i) {
            scale += item.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = at(v, n, i - 1, j);
                set(v, n, i, j, 0.0);
                set(v, n, j, i, 0.0);
            }
        } else {
            // Generate the Householder vector.
            for item in d.iter_mut().take(i) {
                *item /= scale;
                h += *item * *item;
            }
            let f0 = d[i - 1];
            let mut g = h.sqrt();
            if f0 > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f0 * g;
            d[i - 1] = f0 - g;
            for item in e.iter_mut().take(i) {
                *item = 0.0;
            }

            // Apply the similarity transformation to the remaining columns.
            for j in 0..i {
                let f = d[j];
                set(v, n, j, i, f);
                let mut g = e[j] + at(v, n, j, j) * f;
                for k in (j + 1)..i {
                    g += at(v, n, k, j) * d[k];
                    e[k] += at(v, n, k, j) * f;
                }
                e[j] = g;
            }
            let mut f = 0.0f64;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let fj = d[j];
                let gj = e[j];
                for k in j..i {
                    let cur = at(v, n, k, j);
                    set(v, n, k, j, cur - (fj * e[k] + gj * d[k]));
                }
                d[j] = at(v, n, i - 1, j);
                set(v, n, i, j, 0.0);
            }
        }
        d[i] = h;
    }

    // Accumulate transformations.
    for i in 0..(n - 1) {
        let vii = at(v, n, i, i);
        set(v, n, n - 1, i, vii);
        set(v, n, i, i, 1.0);
        let h = d[i + 1];
        if h != 0.0 {
            for (k, item) in d.iter_mut().enumerate().take(i + 1) {
                *item = at(v, n, k, i + 1) / h;
            }
            for j in 0..=i {
                let mut g = 0.0f64;
                for k in 0..=i {
                    g += at(v, n, k, i + 1) * at(v, n, k, j);
                }
                for (k, item) in d.iter().enumerate().take(i + 1) {
                    let cur = at(v, n, k, j);
                    set(v, n, k, j, cur - g * item);
                }
            }
        }
        for k in 0..=i {
            set(v, n, k, i + 1, 0.0);
        }
    }
    for (j, item) in d.iter_mut().enumerate().take(n) {
        *item = at(v, n, n - 1, j);
        set(v, n, n - 1, j, 0.0);
    }
    set(v, n, n - 1, n - 1, 1.0);
    e[0] = 0.0;
}

/// Implicit-shift QL iteration on the tridiagonal form, updating the
/// eigenvector accumulation in `v`.
fn tql2(v: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) -> Result<(), LinalgError> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let eps = f64::EPSILON;
    let mut f = 0.0f64;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());

        // Find a small subdiagonal element; e[n-1] == 0 bounds the scan.
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }

        if m > l {
            let mut sweeps = 0usize;
            loop {
                sweeps += 1;
                if sweeps > MAX_SWEEPS {
                    return Err(LinalgError::NoConvergence {
                        index: l,
                        residual: e[l].abs(),
                    });
                }

                // Implicit shift.
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;

                // QL transformation.
                p = d[m];
                let mut c = 1.0f64;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0f64;
                let mut s2 = 0.0f64;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    // Rotate the eigenvector columns i and i+1.
                    for k in 0..n {
                        let h = at(v, n, k, i + 1);
                        let vk = at(v, n, k, i);
                        set(v, n, k, i + 1, s * vk + c * h);
                        set(v, n, k, i, c * vk - s * h);
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;

                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Selection sort into descending eigenvalue order, swapping eigenvector
/// columns alongside. Deterministic tie handling: earlier index wins.
fn sort_descending(v: &mut [f64], d: &mut [f64], n: usize) {
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, dj) in d.iter().enumerate().take(n).skip(i + 1) {
            if *dj > p {
                k = j;
                p = *dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for row in 0..n {
                v.swap(row * n + i, row * n + k);
            }
        }
    }
}

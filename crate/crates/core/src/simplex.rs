//! Dense two-phase simplex for small linear programs in the form
//! `min c'x  s.t.  A x <= b,  x >= 0` where `b` may have negative entries.
//!
//! Pivot selection uses Bland's rule (lowest eligible index), which cannot
//! cycle, so the tableau walk is deterministic. Intended for the
//! column-by-column l1-minimization problems, which are small (a few hundred
//! rows) at the scales this crate targets.

/// Outcome of a solve.
#[derive(Debug, Clone)]
pub(crate) enum LpOutcome {
    /// Optimal basic solution; the objective is `c'x`.
    Optimal {
        /// Values of the original (structural) variables.
        x: Vec<f64>,
    },
    /// No feasible point.
    Infeasible,
}

const ENTER_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;

/// Solves `min c'x  s.t.  A x <= b, x >= 0`.
pub(crate) fn simplex_min(
    c: &[f64],
    a_rows: &[Vec<f64>],
    b: &[f64],
) -> Result<LpOutcome, String> {
    let m = b.len();
    let n = c.len();
    assert_eq!(a_rows.len(), m);

    // Rows with negative right-hand side are negated and get an artificial
    // variable; the rest start with their slack basic.
    let negated: Vec<bool> = b.iter().map(|v| *v < 0.0).collect();
    let n_art = negated.iter().filter(|v| **v).count();
    let ncols = n + m + n_art;

    let mut tab = vec![vec![0.0f64; ncols + 1]; m];
    let mut basis = vec![0usize; m];
    let mut art_seen = 0usize;
    for i in 0..m {
        let sign = if negated[i] { -1.0 } else { 1.0 };
        for j in 0..n {
            tab[i][j] = sign * a_rows[i][j];
        }
        tab[i][n + i] = sign; // slack
        tab[i][ncols] = sign * b[i];
        if negated[i] {
            let a_col = n + m + art_seen;
            tab[i][a_col] = 1.0;
            basis[i] = a_col;
            art_seen += 1;
        } else {
            basis[i] = n + i;
        }
    }

    let iter_cap = 2000 + 200 * (m + ncols);

    // Phase 1: minimize the sum of artificials.
    if n_art > 0 {
        let mut obj = vec![0.0f64; ncols + 1];
        for j in n + m..ncols {
            obj[j] = 1.0;
        }
        // Zero out the reduced costs of the basic artificials.
        for i in 0..m {
            if basis[i] >= n + m {
                for j in 0..=ncols {
                    obj[j] -= tab[i][j];
                }
            }
        }
        pivot_loop(&mut tab, &mut basis, &mut obj, ncols, ncols, iter_cap)?;
        let phase1 = -obj[ncols];
        if phase1 > FEAS_TOL * (1.0 + b.iter().fold(0.0f64, |a, v| a.max(v.abs()))) {
            return Ok(LpOutcome::Infeasible);
        }
        // Pivot any remaining artificial out of the basis when possible;
        // rows where that fails are redundant and harmless since the
        // artificial sits at level zero and is barred from re-entering.
        for i in 0..m {
            if basis[i] >= n + m {
                if let Some(j) = (0..n + m).find(|&j| tab[i][j].abs() > PIVOT_TOL) {
                    pivot(&mut tab, &mut basis, None, i, j, ncols);
                }
            }
        }
    }

    // Phase 2: original objective, artificial columns barred.
    let mut obj = vec![0.0f64; ncols + 1];
    obj[..n].copy_from_slice(c);
    for i in 0..m {
        let bi = basis[i];
        let cost = if bi < n { c[bi] } else { 0.0 };
        if cost != 0.0 {
            for j in 0..=ncols {
                obj[j] -= cost * tab[i][j];
            }
        }
    }
    pivot_loop(&mut tab, &mut basis, &mut obj, n + m, ncols, iter_cap)?;

    let mut x = vec![0.0f64; n];
    for i in 0..m {
        if basis[i] < n {
            x[basis[i]] = tab[i][ncols];
        }
    }
    Ok(LpOutcome::Optimal { x })
}

/// Bland pivoting until no reduced cost is negative. `enter_limit` bounds
/// the columns allowed to enter (used to bar artificials in phase 2).
fn pivot_loop(
    tab: &mut [Vec<f64>],
    basis: &mut [usize],
    obj: &mut [f64],
    enter_limit: usize,
    ncols: usize,
    iter_cap: usize,
) -> Result<(), String> {
    let m = tab.len();
    for _ in 0..iter_cap {
        // Entering: lowest index with a significantly negative reduced cost.
        let Some(e) = (0..enter_limit).find(|&j| obj[j] < -ENTER_TOL) else {
            return Ok(());
        };
        // Leaving: minimum ratio, ties broken by the lowest basis index.
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            if tab[i][e] > PIVOT_TOL {
                let ratio = tab[i][ncols] / tab[i][e];
                let better = match leave {
                    None => true,
                    Some(cur) => {
                        ratio < best_ratio - 1e-12
                            || (ratio <= best_ratio + 1e-12 && basis[i] < basis[cur])
                    }
                };
                if better {
                    best_ratio = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(l) = leave else {
            return Err(format!("LP unbounded in column {e}"));
        };
        pivot(tab, basis, Some(obj), l, e, ncols);
    }
    Err("simplex iteration cap exceeded".into())
}

/// Gauss-Jordan pivot on (row, col), updating the objective row when given.
fn pivot(
    tab: &mut [Vec<f64>],
    basis: &mut [usize],
    obj: Option<&mut [f64]>,
    row: usize,
    col: usize,
    ncols: usize,
) {
    let piv = tab[row][col];
    for j in 0..=ncols {
        tab[row][j] /= piv;
    }
    tab[row][col] = 1.0;
    for i in 0..tab.len() {
        if i != row {
            let factor = tab[i][col];
            if factor != 0.0 {
                for j in 0..=ncols {
                    tab[i][j] -= factor * tab[row][j];
                }
                tab[i][col] = 0.0;
            }
        }
    }
    if let Some(obj) = obj {
        let factor = obj[col];
        if factor != 0.0 {
            for j in 0..=ncols {
                obj[j] -= factor * tab[row][j];
            }
            obj[col] = 0.0;
        }
    }
    basis[row] = col;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> LpOutcome {
        simplex_min(c, a, b).unwrap()
    }

    #[test]
    fn simple_bounded_minimum() {
        // min -x - y s.t. x + y <= 1, x, y >= 0  => objective -1.
        let out = solve(&[-1.0, -1.0], &[vec![1.0, 1.0]], &[1.0]);
        match out {
            LpOutcome::Optimal { x } => {
                let objective = -x[0] - x[1];
                assert!((objective + 1.0).abs() < 1e-9);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_rhs_requires_phase_one() {
        // min x s.t. -x <= -2  (x >= 2) => x = 2.
        let out = solve(&[1.0], &[vec![-1.0]], &[-2.0]);
        match out {
            LpOutcome::Optimal { x } => {
                assert!((x[0] - 2.0).abs() < 1e-9);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn detects_infeasible() {
        // x <= 1 and -x <= -3 cannot both hold.
        let out = solve(&[1.0], &[vec![1.0], vec![-1.0]], &[1.0, -3.0]);
        assert!(matches!(out, LpOutcome::Infeasible));
    }

    #[test]
    fn equality_via_two_inequalities() {
        // min x + y s.t. x + 2y = 3 encoded as two inequalities.
        let out = solve(
            &[1.0, 1.0],
            &[vec![1.0, 2.0], vec![-1.0, -2.0]],
            &[3.0, -3.0],
        );
        match out {
            LpOutcome::Optimal { x } => {
                assert!((x[0] + 2.0 * x[1] - 3.0).abs() < 1e-9);
                let objective = x[0] + x[1];
                assert!((objective - 1.5).abs() < 1e-9, "objective {objective}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}

//! Dense tableau simplex for `max c.x  s.t.  A x <= b, x >= 0` with `b >= 0`.
//!
//! The origin is always feasible under `b >= 0`, so no phase one is needed.
//! Pivoting follows Bland's rule, which rules out cycling and makes the
//! result independent of floating-point tie order.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
    pub pivots: usize,
}

/// Solves the LP. `a` is row-major with `b.len()` rows and `c.len()` columns.
pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution> {
    let n = c.len();
    let m = b.len();
    if a.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: a.len() });
    }
    if let Some(row) = a.iter().find(|row| row.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: row.len() });
    }
    if b.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::invalid("right-hand side must be finite and non-negative"));
    }

    // Columns: n structural, m slack, 1 rhs.
    let width = n + m + 1;
    let mut tab = vec![0.0; (m + 1) * width];
    for (i, row) in a.iter().enumerate() {
        let r = &mut tab[i * width..(i + 1) * width];
        r[..n].copy_from_slice(row);
        r[n + i] = 1.0;
        r[width - 1] = b[i];
    }
    // Objective row holds reduced costs -c; optimal once all are >= 0.
    {
        let r = &mut tab[m * width..];
        for j in 0..n {
            r[j] = -c[j];
        }
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let max_pivots = 50 * (n + m + 1);
    let mut pivots = 0;
    loop {
        let obj = &tab[m * width..];
        let Some(enter) = (0..n + m).find(|&j| obj[j] < -PIVOT_EPS) else {
            break;
        };
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            let coef = tab[i * width + enter];
            if coef > PIVOT_EPS {
                let ratio = tab[i * width + width - 1] / coef;
                let better = match leave {
                    None => true,
                    Some(l) => {
                        ratio < best_ratio - 1e-15
                            || ((ratio - best_ratio).abs() <= 1e-15 && basis[i] < basis[l])
                    }
                };
                if better {
                    best_ratio = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(row) = leave else {
            return Err(Error::invalid("linear program is unbounded"));
        };
        pivot(&mut tab, width, m, row, enter);
        basis[row] = enter;
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::invalid("simplex exceeded its pivot budget"));
        }
    }

    let mut x = vec![0.0; n];
    for (i, &var) in basis.iter().enumerate() {
        if var < n {
            x[var] = tab[i * width + width - 1].max(0.0);
        }
    }
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Ok(LpSolution { objective, x, pivots })
}

fn pivot(tab: &mut [f64], width: usize, m: usize, row: usize, col: usize) {
    let p = tab[row * width + col];
    for v in &mut tab[row * width..(row + 1) * width] {
        *v /= p;
    }
    let pivot_row: Vec<f64> = tab[row * width..(row + 1) * width].to_vec();
    for i in 0..=m {
        if i == row {
            continue;
        }
        let f = tab[i * width + col];
        if f != 0.0 {
            for (v, pr) in tab[i * width..(i + 1) * width].iter_mut().zip(&pivot_row) {
                *v -= f * pr;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y; x <= 4; 2y <= 12; 3x + 2y <= 18 -> (2, 6), 36
        let sol = maximize(
            &[3.0, 5.0],
            &[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]],
            &[4.0, 12.0, 18.0],
        )
        .unwrap();
        assert!((sol.objective - 36.0).abs() < 1e-12);
        assert!((sol.x[0] - 2.0).abs() < 1e-12 && (sol.x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Classic cycling example under Dantzig's rule; Bland's rule terminates.
        let c = [0.75, -150.0, 0.02, -6.0];
        let a = vec![
            vec![0.25, -60.0, -0.04, 9.0],
            vec![0.5, -90.0, -0.02, 3.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ];
        let sol = maximize(&c, &a, &[0.0, 0.0, 1.0]).unwrap();
        assert!((sol.objective - 0.05).abs() < 1e-9);
    }

    #[test]
    fn unbounded_is_reported() {
        assert!(maximize(&[1.0], &[vec![-1.0]], &[1.0]).is_err());
    }

    #[test]
    fn negative_rhs_rejected() {
        assert!(maximize(&[1.0], &[vec![1.0]], &[-1.0]).is_err());
    }
}

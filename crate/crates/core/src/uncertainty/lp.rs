//! Dense primal simplex for `max c·x  s.t.  A x <= b, x >= 0` with `b >= 0`,
//! using Bland's rule. Meant for the handful of variables arising in the
//! Γ-sum inner problem.

use crate::error::{Error, Result};

const EPS: f64 = 1e-12;

pub(crate) fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<(f64, Vec<f64>)> {
    let (m, n) = (a.len(), c.len());
    debug_assert!(b.iter().all(|&x| x >= 0.0));
    let width = n + m + 1;
    // rows 0..m constraints, row m objective (reduced costs, negated)
    let mut t = vec![vec![0.0; width]; m + 1];
    for i in 0..m {
        t[i][..n].copy_from_slice(&a[i]);
        t[i][n + i] = 1.0;
        t[i][width - 1] = b[i];
    }
    for j in 0..n {
        t[m][j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    for _ in 0..10_000 {
        let Some(enter) = (0..n + m).find(|&j| t[m][j] < -EPS) else {
            let mut x = vec![0.0; n];
            for (i, &bv) in basis.iter().enumerate() {
                if bv < n {
                    x[bv] = t[i][width - 1];
                }
            }
            return Ok((t[m][width - 1], x));
        };
        let mut leave: Option<(f64, usize)> = None;
        for i in 0..m {
            if t[i][enter] > EPS {
                let ratio = t[i][width - 1] / t[i][enter];
                let better = match leave {
                    None => true,
                    Some((best, li)) => ratio < best - EPS || (ratio <= best + EPS && basis[i] < basis[li]),
                };
                if better {
                    leave = Some((ratio, i));
                }
            }
        }
        let Some((_, row)) = leave else {
            return Err(Error::InvariantViolation("linear program is unbounded".into()));
        };
        let p = t[row][enter];
        for v in t[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = t[row].clone();
        for (i, r) in t.iter_mut().enumerate() {
            if i != row && r[enter] != 0.0 {
                let f = r[enter];
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        basis[row] = enter;
    }
    Err(Error::NumericalConvergence("simplex iteration limit reached".into()))
}

//! Finite-order Wasserstein balls through the one-dimensional dual
//!
//! `v = min_{λ >= 0} λθ^q + (1/N) sum_k max_t [ t - λ g_k(t)^{q/r} ]`,
//!
//! where `g_k(t) = min_{y in blocker} sum_{j in y} (t - c_kj)_+^r`. The outer
//! problem is convex in `λ` and solved by golden-section search on
//! `[0, θ^{1-q}]`; the inner maximum runs over
//! `t in [Z_k, max_j c_kj + 2 N^{1/q} θ]`. When the blocker can be listed the
//! inner problem splits into one concave problem per element, otherwise the
//! blocker oracle is evaluated on a breakpoint grid and refined locally.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_theta_r, oriented, sign, Sense};
use crate::bottleneck::bottleneck;
use crate::error::{domain, Error, Result};
use crate::instances::CombinatorialSystem;
use crate::scenarios::ScenarioSet;
use crate::stats::canonical_mean;

const GOLDEN: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteQ {
    pub v_u: f64,
    pub v_saa: f64,
    /// Minimizing multiplier; `None` when `θ = 0`.
    pub lambda_star: Option<f64>,
    pub q: f64,
    pub r: f64,
    pub theta: f64,
    pub sense: Sense,
    /// True when the inner problem was solved element by element.
    pub enumerated: bool,
}

/// Prepared dual for one data set, exposing `φ(λ)`.
pub struct QDual<'a> {
    system: &'a CombinatorialSystem,
    data: Vec<Vec<f64>>,
    theta: f64,
    q: f64,
    r: f64,
    z: Vec<f64>,
    cap: Vec<f64>,
    blocker: Option<Vec<Vec<usize>>>,
}

fn golden_max(mut a: f64, mut b: f64, f: &mut dyn FnMut(f64) -> Result<f64>) -> Result<f64> {
    let mut best = f(a)?.max(f(b)?);
    let tol = 1e-13 * (1.0 + a.abs().max(b.abs()));
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    for _ in 0..200 {
        if b - a <= tol {
            return Ok(best.max(f1).max(f2));
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = f(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = f(x1)?;
        }
        best = best.max(f1).max(f2);
    }
    if b - a <= 1e-9 * (1.0 + a.abs().max(b.abs())) {
        return Ok(best);
    }
    Err(Error::NumericalConvergence("golden-section search did not converge".into()))
}

impl<'a> QDual<'a> {
    pub fn new(
        system: &'a CombinatorialSystem,
        scenarios: &ScenarioSet,
        theta: f64,
        q: f64,
        r: f64,
        sense: Sense,
    ) -> Result<Self> {
        check_theta_r(theta, r)?;
        if !(q >= 1.0 && q.is_finite()) {
            return Err(domain(format!("order q must be finite and >= 1, got {q}")));
        }
        scenarios.check_against(system)?;
        let data = oriented(scenarios, sense).costs().to_vec();
        let z: Vec<f64> = data
            .par_iter()
            .map(|c| bottleneck(system, c))
            .collect::<Result<_>>()?;
        let reach = 2.0 * (data.len() as f64).powf(1.0 / q) * theta;
        let cap = data
            .iter()
            .map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max) + reach)
            .collect();
        let blocker = system
            .blocker(false)
            .ok()
            .map(|b| b.into_iter().map(|y| y.elements).collect());
        Ok(QDual {
            system,
            data,
            theta,
            q,
            r,
            z,
            cap,
            blocker,
        })
    }

    /// Upper end of the multiplier search interval.
    pub fn lambda_upper(&self) -> f64 {
        self.theta.powf(1.0 - self.q)
    }

    fn penalty(&self, lambda: f64, g: f64) -> f64 {
        if lambda == 0.0 || g == 0.0 {
            0.0
        } else {
            (lambda.ln() + self.q / self.r * g.ln()).exp()
        }
    }

    fn inner(&self, k: usize, lambda: f64) -> Result<f64> {
        let c = &self.data[k];
        let (z, cap) = (self.z[k], self.cap[k]);
        let r = self.r;
        let excess = |y: &[usize], t: f64| -> f64 {
            y.iter()
                .map(|&j| if t > c[j] { (t - c[j]).powf(r) } else { 0.0 })
                .sum()
        };
        if lambda == 0.0 {
            return Ok(cap);
        }
        if let Some(blocker) = &self.blocker {
            let mut best = f64::NEG_INFINITY;
            for y in blocker {
                let lo = y.iter().map(|&j| c[j]).fold(f64::INFINITY, f64::min);
                let mut h = |t: f64| Ok(t - self.penalty(lambda, excess(y, t)));
                best = best.max(golden_max(lo.min(cap), cap, &mut h)?);
            }
            return Ok(best);
        }
        let mut h = |t: f64| -> Result<f64> {
            let w: Vec<f64> = c
                .iter()
                .map(|&cj| if t > cj { (t - cj).powf(r) } else { 0.0 })
                .collect();
            let g = self.system.min_blocker_raw(&w)?.0;
            Ok(t - self.penalty(lambda, g))
        };
        let mut grid: Vec<f64> = c.iter().copied().filter(|&x| x > z && x < cap).collect();
        let pieces = 32;
        grid.extend((0..=pieces).map(|i| z + (cap - z) * i as f64 / pieces as f64));
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let values: Vec<f64> = grid.iter().map(|&t| h(t)).collect::<Result<_>>()?;
        let (i, &top) = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("grid is nonempty");
        let a = grid[i.saturating_sub(1)];
        let b = grid[(i + 1).min(grid.len() - 1)];
        Ok(top.max(golden_max(a, b, &mut h)?))
    }

    /// Dual objective `φ(λ)`.
    pub fn phi(&self, lambda: f64) -> Result<f64> {
        if !(lambda >= 0.0) {
            return Err(domain("multiplier must be nonnegative"));
        }
        let inner: Vec<f64> = (0..self.data.len())
            .into_par_iter()
            .map(|k| self.inner(k, lambda))
            .collect::<Result<_>>()?;
        Ok(lambda * self.theta.powf(self.q) + canonical_mean(&inner))
    }

    pub fn solve(&self, sense: Sense) -> Result<QuoteQ> {
        let v_saa = canonical_mean(&self.z);
        let s = sign(sense);
        let mut quote = QuoteQ {
            v_u: s * v_saa,
            v_saa: s * v_saa,
            lambda_star: None,
            q: self.q,
            r: self.r,
            theta: self.theta,
            sense,
            enumerated: self.blocker.is_some(),
        };
        if self.theta == 0.0 {
            return Ok(quote);
        }
        let hi = self.lambda_upper();
        let mut candidates = vec![(0.0, self.phi(0.0)?), (hi, self.phi(hi)?)];
        let (mut a, mut b) = (0.0, hi);
        let mut x1 = b - GOLDEN * (b - a);
        let mut x2 = a + GOLDEN * (b - a);
        let (mut f1, mut f2) = (self.phi(x1)?, self.phi(x2)?);
        let mut converged = false;
        for _ in 0..200 {
            if b - a <= 1e-10 * hi {
                converged = true;
                break;
            }
            if f1 > f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + GOLDEN * (b - a);
                f2 = self.phi(x2)?;
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - GOLDEN * (b - a);
                f1 = self.phi(x1)?;
            }
        }
        if !converged {
            return Err(Error::NumericalConvergence("multiplier search did not converge".into()));
        }
        candidates.push((x1, f1));
        candidates.push((x2, f2));
        let (lam, v) = candidates
            .into_iter()
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("nonempty");
        quote.v_u = s * v;
        quote.lambda_star = Some(lam);
        Ok(quote)
    }
}

/// Robust value over a `q`-Wasserstein ball with `r`-norm ground metric.
pub fn q_wasserstein_u(
    system: &CombinatorialSystem,
    scenarios: &ScenarioSet,
    theta: f64,
    q: f64,
    r: f64,
    sense: Sense,
) -> Result<QuoteQ> {
    QDual::new(system, scenarios, theta, q, r, sense)?.solve(sense)
}

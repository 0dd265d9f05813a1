//! Finite-sample Wasserstein radii.
//!
//! All rules share the base `N^{-1/2} σ sqrt(-3 ln ε)` and differ in a
//! structural factor.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// A radius together with the inputs that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusSpec {
    pub samples: usize,
    pub sigma: f64,
    pub epsilon: f64,
    /// Multiplier applied to the base radius.
    pub structural: f64,
    pub theta: f64,
}

fn check(samples: usize, sigma: f64, epsilon: f64) -> Result<()> {
    if samples == 0 {
        return Err(domain("sample count must be at least 1"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(domain(format!("sigma must be positive, got {sigma}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    Ok(())
}

fn check_r(r: f64) -> Result<()> {
    if !(r >= 1.0 && r.is_finite()) {
        return Err(domain(format!("norm order r must be finite and >= 1, got {r}")));
    }
    Ok(())
}

fn spec(samples: usize, sigma: f64, epsilon: f64, structural: f64) -> RadiusSpec {
    let base = (samples as f64).powf(-0.5) * sigma * (-3.0 * epsilon.ln()).sqrt();
    RadiusSpec {
        samples,
        sigma,
        epsilon,
        structural,
        theta: base * structural,
    }
}

/// `N^{-1/2} σ sqrt(-3 ln ε)`, the radius with no structural factor.
pub fn radius_base(samples: usize, sigma: f64, epsilon: f64) -> Result<RadiusSpec> {
    check(samples, sigma, epsilon)?;
    Ok(spec(samples, sigma, epsilon, 1.0))
}

/// Uncertainty-quantification radius: base times `max |y|^{1/r}` over
/// blocker elements.
pub fn radius_u(
    samples: usize,
    sigma: f64,
    epsilon: f64,
    max_blocker_size: usize,
    r: f64,
) -> Result<RadiusSpec> {
    check(samples, sigma, epsilon)?;
    check_r(r)?;
    if max_blocker_size == 0 {
        return Err(domain("blocker size must be positive"));
    }
    Ok(spec(samples, sigma, epsilon, (max_blocker_size as f64).powf(1.0 / r)))
}

/// Radius for the upper confidence statement; the same value as [`radius_u`].
/// [`radius_base`] gives the variant without the structural factor.
pub fn radius_u_upper(
    samples: usize,
    sigma: f64,
    epsilon: f64,
    max_blocker_size: usize,
    r: f64,
) -> Result<RadiusSpec> {
    radius_u(samples, sigma, epsilon, max_blocker_size, r)
}

/// Decision radius `N^{-1/2} σ sqrt(-3 ln ε + 3 n ln 2)`, uniform over all
/// `2^n` subsets. With `n = 0` this is the single-solution radius.
pub fn radius_d(samples: usize, sigma: f64, epsilon: f64, n: usize) -> Result<RadiusSpec> {
    check(samples, sigma, epsilon)?;
    let le = -3.0 * epsilon.ln();
    let structural = ((le + 3.0 * n as f64 * std::f64::consts::LN_2) / le).sqrt();
    Ok(spec(samples, sigma, epsilon, structural))
}

/// The two Γ-sum quantification radii: part (i) uses
/// `Γ^{-1} max_y |∪ s|^{1/r}`, part (ii) uses `Γ^{-(r-1)/r}`.
pub fn radius_gamma_u(
    samples: usize,
    sigma: f64,
    epsilon: f64,
    gamma: usize,
    r: f64,
    union_size: usize,
) -> Result<(RadiusSpec, RadiusSpec)> {
    check(samples, sigma, epsilon)?;
    check_r(r)?;
    if gamma == 0 || union_size == 0 {
        return Err(domain("gamma and union size must be positive"));
    }
    let g = gamma as f64;
    let lower = spec(samples, sigma, epsilon, (union_size as f64).powf(1.0 / r) / g);
    let upper = spec(samples, sigma, epsilon, g.powf(-(r - 1.0) / r));
    Ok((lower, upper))
}

/// Γ-sum decision radius: [`radius_d`] scaled by `Γ^{-(r-1)/r}`.
pub fn radius_gamma_d(
    samples: usize,
    sigma: f64,
    epsilon: f64,
    n: usize,
    gamma: usize,
    r: f64,
) -> Result<RadiusSpec> {
    check_r(r)?;
    if gamma == 0 {
        return Err(domain("gamma must be positive"));
    }
    let mut s = radius_d(samples, sigma, epsilon, n)?;
    let f = (gamma as f64).powf(-(r - 1.0) / r);
    s.structural *= f;
    s.theta *= f;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert!((radius_u(100, 1.0, 0.05, 4, 1.0).unwrap().theta - 1.19915).abs() < 1e-4);
        assert!((radius_d(100, 1.0, 0.05, 10).unwrap().theta - 0.54572).abs() < 1e-4);
        let (i, ii) = radius_gamma_u(100, 1.0, 0.05, 2, 1.0, 4).unwrap();
        assert!((i.theta - 0.59957).abs() < 1e-4);
        assert!((ii.theta - radius_base(100, 1.0, 0.05).unwrap().theta).abs() < 1e-15);
        assert!((radius_gamma_d(100, 1.0, 0.05, 10, 4, 2.0).unwrap().theta - 0.2729).abs() < 1e-4);
    }

    #[test]
    fn reductions_and_scaling() {
        let base = radius_base(100, 1.0, 0.05).unwrap().theta;
        assert_eq!(radius_d(100, 1.0, 0.05, 0).unwrap().theta, base);
        let (i, _) = radius_gamma_u(100, 1.0, 0.05, 1, 2.0, 4).unwrap();
        assert!((i.theta - radius_u(100, 1.0, 0.05, 4, 2.0).unwrap().theta).abs() < 1e-15);
        assert_eq!(
            radius_gamma_d(100, 1.0, 0.05, 10, 1, 2.0).unwrap().theta,
            radius_d(100, 1.0, 0.05, 10).unwrap().theta
        );
        let quad = radius_u(400, 1.0, 0.05, 4, 1.0).unwrap().theta;
        assert!((quad * 2.0 - radius_u(100, 1.0, 0.05, 4, 1.0).unwrap().theta).abs() < 1e-12);
        assert!(radius_u(100, 1.0, 1.0 - 1e-12, 4, 1.0).unwrap().theta < 1e-5);
        assert!(radius_d(100, 1.0, 0.025, 3).unwrap().theta > radius_d(100, 1.0, 0.05, 3).unwrap().theta);
        assert!(radius_u(100, 1.0, 1.0, 4, 1.0).is_err());
        assert!(radius_u(100, 1.0, 0.0, 4, 1.0).is_err());
        assert!(radius_u(100, 1.0, 0.1, 4, 0.5).is_err());
    }
}

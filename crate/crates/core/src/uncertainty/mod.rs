//! Worst-case expected bottleneck values over Wasserstein balls.
//!
//! Under the ∞-Wasserstein ball each scenario moves independently within an
//! `r`-norm ball of radius `θ`, so the robust value is the average of
//! per-scenario values
//!
//! `t* = max{ t : min_{y in F} sum_{j in y} (t - c_j)_+^r <= θ^r }`,
//!
//! found by bisection on `[Z(c), Z(c) + θ]` with the blocker oracle
//! supplying the inner minimum, then snapped to the closed form of the
//! maximizing blocker element.

mod gamma;
mod lp;
mod qwass;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use gamma::{gamma_u, GammaQuote};
pub use qwass::{q_wasserstein_u, QDual, QuoteQ};

use crate::bottleneck::{bottleneck, bottleneck_value};
use crate::error::{domain, Error, Result};
use crate::instances::{BlockerElement, CombinatorialSystem};
use crate::scenarios::ScenarioSet;
use crate::stats::canonical_mean;

/// Whether element values are costs (the adversary raises them, the
/// decision maker minimizes the largest) or capacities (the adversary lowers
/// them, the decision maker maximizes the smallest).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    #[default]
    Cost,
    Capacity,
}

/// Wasserstein order `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    Finite(f64),
    Infinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AmbiguityConfig {
    Wasserstein { q: Order, r: f64, theta: f64 },
    TotalVariation { d: f64 },
}

impl AmbiguityConfig {
    pub fn infinity(r: f64, theta: f64) -> Self {
        AmbiguityConfig::Wasserstein {
            q: Order::Infinity,
            r,
            theta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AmbiguityConfig::Wasserstein { q, r, theta } => {
                check_theta_r(theta, r)?;
                if let Order::Finite(q) = q {
                    if !(q >= 1.0 && q.is_finite()) {
                        return Err(domain(format!("order q must be >= 1, got {q}")));
                    }
                }
                Ok(())
            }
            AmbiguityConfig::TotalVariation { d } => {
                if !(0.0..=2.0).contains(&d) {
                    return Err(domain(format!("total-variation radius must lie in [0, 2], got {d}")));
                }
                Ok(())
            }
        }
    }
}

pub(crate) fn check_theta_r(theta: f64, r: f64) -> Result<()> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(domain(format!("radius θ must be finite and >= 0, got {theta}")));
    }
    if !(r >= 1.0 && r.is_finite()) {
        return Err(domain(format!("norm order r must be finite and >= 1, got {r}")));
    }
    Ok(())
}

/// One scenario's share of a robust quote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioQuote {
    /// Worst-case bottleneck value of this scenario.
    pub t_star: f64,
    /// Bottleneck value of the unperturbed scenario.
    pub saa: f64,
    /// Blocker element attaining `t_star`.
    pub blocker: BlockerElement,
    /// Elements of `blocker` moved to `t_star` by the adversary.
    pub raised: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustQuote {
    pub v_u: f64,
    pub v_saa: f64,
    pub sense: Sense,
    pub config: AmbiguityConfig,
    pub per_scenario: Vec<ScenarioQuote>,
    /// One perturbed cost vector per scenario attaining `v_u`.
    pub worst_case_support: Vec<Vec<f64>>,
}

/// `sum_i (t - a_i)_+^r` over the given costs.
fn excess(costs: &[f64], t: f64, r: f64) -> f64 {
    costs
        .iter()
        .map(|&a| if t > a { (t - a).powf(r) } else { 0.0 })
        .sum()
}

/// Largest `t` with `sum_{j in y} (t - a_j)_+^r <= θ^r`, for the costs `a`
/// of one blocker element.
pub fn t_star_for_costs(costs: &[f64], theta: f64, r: f64) -> f64 {
    let mut a = costs.to_vec();
    a.sort_by(f64::total_cmp);
    let budget = theta.powf(r);
    // largest prefix whose top element is still reachable within budget
    let mut p = 1;
    while p < a.len() && excess(&a[..p], a[p], r) <= budget {
        p += 1;
    }
    let prefix = &a[..p];
    let k = p as f64;
    if r == 1.0 {
        return (prefix.iter().sum::<f64>() + theta) / k;
    }
    if r == 2.0 {
        let mean = prefix.iter().sum::<f64>() / k;
        let spread: f64 = prefix.iter().map(|x| (x - mean).powi(2)).sum();
        return mean + ((theta * theta - spread).max(0.0) / k).sqrt();
    }
    let (mut lo, mut hi) = (a[p - 1], a[p - 1] + theta);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(prefix, mid, r) <= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Closed form for `r = 1` from costs sorted ascending: `(sum of prefix + θ) / |prefix|`
/// for the unique prefix with `a_p <= t < a_{p+1}`.
pub fn t_star_l1(sorted_costs: &[f64], theta: f64) -> Result<f64> {
    if sorted_costs.is_empty() {
        return Err(domain("blocker costs must be nonempty"));
    }
    if sorted_costs.windows(2).any(|w| w[0] > w[1]) {
        return Err(domain("blocker costs must be sorted ascending"));
    }
    if !(theta >= 0.0) {
        return Err(domain("radius must be nonnegative"));
    }
    let mut sum = 0.0;
    for (i, &a) in sorted_costs.iter().enumerate() {
        sum += a;
        let t = (sum + theta) / (i + 1) as f64;
        let next = sorted_costs.get(i + 1).copied().unwrap_or(f64::INFINITY);
        if a <= t && t < next {
            return Ok(t);
        }
    }
    Err(Error::InvariantViolation("no prefix satisfies the bracketing condition".into()))
}

/// Per-scenario worst-case bottleneck value under an `r`-norm ball of radius `θ`.
pub fn robust_scenario_value(
    system: &CombinatorialSystem,
    costs: &[f64],
    theta: f64,
    r: f64,
) -> Result<ScenarioQuote> {
    check_theta_r(theta, r)?;
    let base = bottleneck_value(system, costs)?;
    let z = base.value;
    let raised_at = |y: &BlockerElement, t: f64| -> Vec<usize> {
        y.elements.iter().copied().filter(|&j| costs[j] <= t).collect()
    };
    if theta == 0.0 {
        let raised = raised_at(&base.dual_witness, z);
        return Ok(ScenarioQuote {
            t_star: z,
            saa: z,
            blocker: base.dual_witness,
            raised,
        });
    }
    let budget = theta.powf(r);
    let weights = |t: f64| -> Vec<f64> {
        costs
            .iter()
            .map(|&c| if t > c { (t - c).powf(r) } else { 0.0 })
            .collect()
    };
    let g = |t: f64| -> Result<f64> { Ok(system.min_blocker_raw(&weights(t))?.0) };
    let scale = 1.0 + costs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let tol = 1e-9 * scale;
    let (mut lo, mut hi) = (z, z + theta);
    let mut iterations = 0;
    while hi - lo > tol {
        iterations += 1;
        if iterations > 200 {
            return Err(Error::NumericalConvergence(
                "robust value bisection did not converge".into(),
            ));
        }
        let mid = 0.5 * (lo + hi);
        if g(mid)? <= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // snap to the closed form of the witness, then climb while another
    // element still admits a larger value
    let eta = 1e-12 * scale;
    let mut probe = lo;
    let mut best: Option<(f64, BlockerElement)> = None;
    for _ in 0..1000 {
        let (_, y) = system.min_weight_blocker(&weights(probe))?;
        let ys: Vec<f64> = y.elements.iter().map(|&j| costs[j]).collect();
        let t = t_star_for_costs(&ys, theta, r);
        if best.as_ref().map_or(true, |(bt, _)| t > *bt) {
            best = Some((t, y));
        }
        let bt = best.as_ref().expect("set above").0;
        if bt + eta > z + theta || g(bt + eta)? > budget {
            break;
        }
        probe = bt + eta;
    }
    let (t_star, blocker) = best.expect("at least one probe");
    let raised = raised_at(&blocker, t_star);
    Ok(ScenarioQuote {
        t_star,
        saa: z,
        blocker,
        raised,
    })
}

fn oriented(scenarios: &ScenarioSet, sense: Sense) -> std::borrow::Cow<'_, ScenarioSet> {
    match sense {
        Sense::Cost => std::borrow::Cow::Borrowed(scenarios),
        Sense::Capacity => std::borrow::Cow::Owned(scenarios.negated()),
    }
}

fn sign(sense: Sense) -> f64 {
    match sense {
        Sense::Cost => 1.0,
        Sense::Capacity => -1.0,
    }
}

/// Robust value under the ∞-Wasserstein ball. For `Sense::Capacity` the
/// problem is solved on negated data and mapped back, so `t_star`, `saa` and
/// the support are reported in capacity units.
pub fn drbcp_u(
    system: &CombinatorialSystem,
    scenarios: &ScenarioSet,
    config: &AmbiguityConfig,
    sense: Sense,
) -> Result<RobustQuote> {
    config.validate()?;
    let (r, theta) = match *config {
        AmbiguityConfig::Wasserstein {
            q: Order::Infinity,
            r,
            theta,
        } => (r, theta),
        AmbiguityConfig::Wasserstein { .. } => {
            return Err(domain("finite order q is handled by q_wasserstein_u"))
        }
        AmbiguityConfig::TotalVariation { .. } => {
            return Err(domain("drbcp_u needs a Wasserstein ball"))
        }
    };
    scenarios.check_against(system)?;
    let data = oriented(scenarios, sense);
    let s = sign(sense);
    let per_scenario: Vec<ScenarioQuote> = data
        .costs()
        .par_iter()
        .map(|c| {
            robust_scenario_value(system, c, theta, r).map(|mut q| {
                q.t_star *= s;
                q.saa *= s;
                q
            })
        })
        .collect::<Result<_>>()?;
    let v_u = canonical_mean(&per_scenario.iter().map(|q| q.t_star).collect::<Vec<_>>());
    let v_saa = canonical_mean(&per_scenario.iter().map(|q| q.saa).collect::<Vec<_>>());
    let worst_case_support = support(&per_scenario, scenarios);
    Ok(RobustQuote {
        v_u,
        v_saa,
        sense,
        config: *config,
        per_scenario,
        worst_case_support,
    })
}

fn support(per_scenario: &[ScenarioQuote], scenarios: &ScenarioSet) -> Vec<Vec<f64>> {
    per_scenario
        .iter()
        .zip(scenarios.costs())
        .map(|(q, c)| {
            let mut star = c.clone();
            for &j in &q.raised {
                star[j] = q.t_star;
            }
            star
        })
        .collect()
}

/// The `N` support points of a worst-case distribution: each raised element
/// is moved to its scenario's `t_star`.
pub fn worst_case_distribution_u(
    quote: &RobustQuote,
    scenarios: &ScenarioSet,
) -> Result<Vec<Vec<f64>>> {
    if quote.per_scenario.len() != scenarios.len() {
        return Err(Error::Dimension(format!(
            "quote covers {} scenarios, data has {}",
            quote.per_scenario.len(),
            scenarios.len()
        )));
    }
    Ok(support(&quote.per_scenario, scenarios))
}

/// Sample-average bottleneck value.
pub fn saa_u(system: &CombinatorialSystem, scenarios: &ScenarioSet, sense: Sense) -> Result<f64> {
    scenarios.check_against(system)?;
    let data = oriented(scenarios, sense);
    let s = sign(sense);
    let z: Vec<f64> = data
        .costs()
        .par_iter()
        .map(|c| bottleneck(system, c).map(|v| s * v))
        .collect::<Result<_>>()?;
    Ok(canonical_mean(&z))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub lower: f64,
    pub gap: f64,
    pub upper: f64,
    pub lower_margin: f64,
    pub upper_margin: f64,
}

/// Checks `θ / max|y|^{1/r} <= v_U - v_SAA <= θ` with `1e-9` slack. For
/// capacity data pass the negated values.
pub fn sandwich_bounds_u(
    v_u: f64,
    v_saa: f64,
    theta: f64,
    r: f64,
    max_blocker_size: usize,
) -> Result<SandwichReport> {
    check_theta_r(theta, r)?;
    let lower = theta / (max_blocker_size.max(1) as f64).powf(1.0 / r);
    let gap = v_u - v_saa;
    let report = SandwichReport {
        lower,
        gap,
        upper: theta,
        lower_margin: gap - lower,
        upper_margin: theta - gap,
    };
    if report.lower_margin < -1e-9 || report.upper_margin < -1e-9 {
        return Err(Error::InvariantViolation(format!(
            "sandwich bound violated: {lower} <= {gap} <= {theta} fails"
        )));
    }
    Ok(report)
}

impl RobustQuote {
    /// Sandwich check in the orientation of the quote.
    pub fn sandwich(&self, max_blocker_size: usize) -> Result<SandwichReport> {
        let AmbiguityConfig::Wasserstein { r, theta, .. } = self.config else {
            return Err(domain("sandwich bounds need a Wasserstein ball"));
        };
        let s = sign(self.sense);
        sandwich_bounds_u(s * self.v_u, s * self.v_saa, theta, r, max_blocker_size)
    }
}

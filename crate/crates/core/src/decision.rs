//! Robust decisions: pick the subset whose per-scenario bottleneck values
//! behave best across the empirical scenarios.
//!
//! The per-scenario value of a member `x` is `max_{j in x} c_j` (or the sum
//! of its Γ largest costs). All solvers run best-first branch-and-bound over
//! the system with the mean of per-scenario partial maxima as bound; ties go
//! to the lexicographically smallest member.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bottleneck::check_gamma;
use crate::error::{domain, invalid, Error, Result};
use crate::instances::{CombinatorialSystem, SystemKind};
use crate::scenarios::ScenarioSet;
use crate::search::{self, Found, Objective, DEFAULT_NODE_BUDGET};
use crate::stats::{canonical_mean, population_variance, top_gamma_sum};
use crate::uncertainty::{check_theta_r, Sense};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecisionModel {
    Saa,
    Robust { theta: f64 },
    DecisionRobust { theta: f64 },
    TotalVariation { d: f64 },
    GammaSaa { gamma: usize },
    GammaRobust { theta: f64, r: f64, gamma: usize },
    GammaDecisionRobust { theta: f64, r: f64, gamma: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionReport {
    pub x: Vec<usize>,
    pub objective: f64,
    pub per_scenario_values: Vec<f64>,
    pub mean: f64,
    /// Population variance (divisor `N`) of the per-scenario values.
    pub variance: f64,
    pub model: DecisionModel,
    pub sense: Sense,
}

impl DecisionReport {
    /// Column of each row for an assignment decision.
    pub fn permutation(&self, system: &CombinatorialSystem) -> Option<Vec<usize>> {
        let SystemKind::Assignment { m } = *system.kind() else {
            return None;
        };
        let mut perm = vec![0; m];
        for &e in &self.x {
            perm[e / m] = e % m;
        }
        Some(perm)
    }

    /// Maps a report computed on negated capacities back to capacity units.
    /// Variance objectives are unchanged by the negation.
    pub fn into_capacity(mut self) -> Self {
        if !matches!(
            self.model,
            DecisionModel::DecisionRobust { .. } | DecisionModel::GammaDecisionRobust { .. }
        ) {
            self.objective = -self.objective;
        }
        self.mean = -self.mean;
        for v in &mut self.per_scenario_values {
            *v = -*v;
        }
        self.sense = Sense::Capacity;
        self
    }
}

#[derive(Clone, Copy)]
enum Agg {
    Max,
    Top(usize),
}

struct Data<'a> {
    rows: &'a [Vec<f64>],
    floors: Vec<f64>,
    agg: Agg,
}

impl<'a> Data<'a> {
    fn new(system: &CombinatorialSystem, scenarios: &'a ScenarioSet, agg: Agg) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(domain("at least one scenario is required"));
        }
        scenarios.check_against(system)?;
        for row in scenarios.costs() {
            system.check_costs(row)?;
        }
        if let Agg::Top(g) = agg {
            check_gamma(system, g)?;
        }
        let floors = scenarios
            .costs()
            .iter()
            .map(|c| c.iter().copied().fold(f64::INFINITY, f64::min))
            .collect();
        Ok(Data {
            rows: scenarios.costs(),
            floors,
            agg,
        })
    }

    fn value(&self, k: usize, x: &[usize]) -> f64 {
        let c = &self.rows[k];
        match self.agg {
            Agg::Max => x.iter().map(|&j| c[j]).fold(f64::NEG_INFINITY, f64::max),
            Agg::Top(g) => top_gamma_sum(x.iter().map(|&j| c[j]), g),
        }
    }

    fn values(&self, x: &[usize]) -> Vec<f64> {
        (0..self.rows.len()).map(|k| self.value(k, x)).collect()
    }

    /// Per-scenario values no larger than those of any completion of `partial`.
    fn bounds(&self, partial: &[usize]) -> Vec<f64> {
        (0..self.rows.len())
            .map(|k| match self.agg {
                Agg::Max if partial.is_empty() => self.floors[k],
                Agg::Max => self.value(k, partial),
                Agg::Top(g) => {
                    let missing = g.saturating_sub(partial.len());
                    self.value(k, partial) + missing as f64 * self.floors[k]
                }
            })
            .collect()
    }

    fn report(&self, x: Vec<usize>, objective: f64, model: DecisionModel) -> DecisionReport {
        let values = self.values(&x);
        DecisionReport {
            mean: canonical_mean(&values),
            variance: population_variance(&values),
            x,
            objective,
            per_scenario_values: values,
            model,
            sense: Sense::Cost,
        }
    }
}

struct MeanObjective<'a>(&'a Data<'a>);

impl Objective for MeanObjective<'_> {
    fn lower_bound(&self, partial: &[usize]) -> f64 {
        canonical_mean(&self.0.bounds(partial))
    }
    fn value(&self, member: &[usize]) -> Option<f64> {
        Some(canonical_mean(&self.0.values(member)))
    }
}

struct VarianceObjective<'a> {
    data: &'a Data<'a>,
    threshold: f64,
}

impl Objective for VarianceObjective<'_> {
    fn lower_bound(&self, _partial: &[usize]) -> f64 {
        0.0
    }
    fn value(&self, member: &[usize]) -> Option<f64> {
        let v = self.data.values(member);
        (canonical_mean(&v) <= self.threshold).then(|| population_variance(&v))
    }
    fn prune(&self, partial: &[usize]) -> bool {
        canonical_mean(&self.data.bounds(partial)) > self.threshold
    }
}

struct TvObjective<'a> {
    data: &'a Data<'a>,
    d: f64,
}

impl Objective for TvObjective<'_> {
    // the objective is nondecreasing in every per-scenario value
    fn lower_bound(&self, partial: &[usize]) -> f64 {
        tv_value(&self.data.bounds(partial), self.d)
    }
    fn value(&self, member: &[usize]) -> Option<f64> {
        Some(tv_value(&self.data.values(member), self.d))
    }
}

fn run(system: &CombinatorialSystem, obj: &dyn Objective, force: bool) -> Result<Found> {
    let found = match search::minimize(system, obj, DEFAULT_NODE_BUDGET) {
        Err(Error::ScaleGuard(_)) if force => search::enumerate_minimize(system, obj, true)?,
        other => other?,
    };
    found.ok_or_else(|| Error::InvariantViolation("no admissible member found".into()))
}

fn saa_with(system: &CombinatorialSystem, data: &Data) -> Result<Found> {
    run(system, &MeanObjective(data), false)
}

/// Member minimizing the sample mean of per-scenario bottleneck values.
pub fn saa_d(system: &CombinatorialSystem, scenarios: &ScenarioSet) -> Result<DecisionReport> {
    let data = Data::new(system, scenarios, Agg::Max)?;
    let f = saa_with(system, &data)?;
    Ok(data.report(f.member, f.value, DecisionModel::Saa))
}

/// Robust decision: the SAA member, with objective `v_SAA + θ`.
pub fn drbcp_d(system: &CombinatorialSystem, scenarios: &ScenarioSet, theta: f64) -> Result<DecisionReport> {
    check_theta_r(theta, 1.0)?;
    let mut rep = saa_d(system, scenarios)?;
    rep.objective += theta;
    rep.model = DecisionModel::Robust { theta };
    Ok(rep)
}

fn check_member(system: &CombinatorialSystem, x: &[usize]) -> Result<Vec<usize>> {
    let mut x = x.to_vec();
    x.sort_unstable();
    x.dedup();
    if x.iter().any(|&j| j >= system.n()) {
        return Err(invalid("decision refers to an element outside the ground set"));
    }
    let mut allowed = vec![false; system.n()];
    for &j in &x {
        allowed[j] = true;
    }
    if system.member_within(&allowed).as_deref() != Some(&x[..]) {
        return Err(invalid(format!("{x:?} is not a feasible subset")));
    }
    Ok(x)
}

/// Worst-case support for a fixed decision: in each scenario the costliest
/// element of `x` (smallest id among ties) is raised by `θ`.
pub fn worst_case_distribution_d(
    system: &CombinatorialSystem,
    x: &[usize],
    scenarios: &ScenarioSet,
    theta: f64,
) -> Result<Vec<Vec<f64>>> {
    check_theta_r(theta, 1.0)?;
    scenarios.check_against(system)?;
    let x = check_member(system, x)?;
    Ok(scenarios
        .costs()
        .iter()
        .map(|c| {
            let mut star = c.clone();
            let mut arg = x[0];
            for &j in &x[1..] {
                if c[j] > c[arg] {
                    arg = j;
                }
            }
            star[arg] += theta;
            star
        })
        .collect())
}

/// Members whose sample mean stays within `threshold` of the best.
pub struct IndifferenceSet<'a> {
    system: &'a CombinatorialSystem,
    data: Data<'a>,
    pub threshold: f64,
    /// The SAA optimizer, always a member.
    pub saa: Vec<usize>,
}

impl IndifferenceSet<'_> {
    pub fn contains(&self, x: &[usize]) -> bool {
        match check_member(self.system, x) {
            Ok(x) => canonical_mean(&self.data.values(&x)) <= self.threshold,
            Err(_) => false,
        }
    }

    /// All members, under the member-enumeration guard.
    pub fn members(&self, force: bool) -> Result<Vec<Vec<usize>>> {
        Ok(self
            .system
            .members(force)?
            .into_iter()
            .filter(|x| canonical_mean(&self.data.values(x)) <= self.threshold)
            .collect())
    }
}

fn indifference_with<'a>(
    system: &'a CombinatorialSystem,
    scenarios: &'a ScenarioSet,
    agg: Agg,
    slack: f64,
) -> Result<IndifferenceSet<'a>> {
    let data = Data::new(system, scenarios, agg)?;
    let f = saa_with(system, &data)?;
    Ok(IndifferenceSet {
        system,
        threshold: f.value + slack,
        saa: f.member,
        data,
    })
}

pub fn indifference_set<'a>(
    system: &'a CombinatorialSystem,
    scenarios: &'a ScenarioSet,
    theta: f64,
) -> Result<IndifferenceSet<'a>> {
    check_theta_r(theta, 1.0)?;
    indifference_with(system, scenarios, Agg::Max, theta)
}

fn variance_within(set: &IndifferenceSet, model: DecisionModel) -> Result<DecisionReport> {
    let obj = VarianceObjective {
        data: &set.data,
        threshold: set.threshold,
    };
    let f = run(set.system, &obj, false)?;
    Ok(set.data.report(f.member, f.value, model))
}

/// Smallest-variance member among those within `θ` of the SAA mean.
pub fn decision_robust(system: &CombinatorialSystem, scenarios: &ScenarioSet, theta: f64) -> Result<DecisionReport> {
    let set = indifference_set(system, scenarios, theta)?;
    variance_within(&set, DecisionModel::DecisionRobust { theta })
}

/// `min_β (1 - d/2) β + mean((v - β)_+) + (d/2) max v`, scanning `β` over the values.
pub fn tv_value(values: &[f64], d: f64) -> f64 {
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut best = f64::INFINITY;
    for &beta in values {
        let over: Vec<f64> = values.iter().map(|&v| (v - beta).max(0.0)).collect();
        best = best.min((1.0 - d / 2.0) * beta + canonical_mean(&over) + d / 2.0 * top);
    }
    best
}

/// Decision under a total-variation ball of radius `d`.
pub fn tv_decision(system: &CombinatorialSystem, scenarios: &ScenarioSet, d: f64) -> Result<DecisionReport> {
    if !(0.0..=2.0).contains(&d) {
        return Err(domain(format!("total-variation radius must lie in [0, 2], got {d}")));
    }
    let data = Data::new(system, scenarios, Agg::Max)?;
    let f = run(system, &TvObjective { data: &data, d }, false)?;
    Ok(data.report(f.member, f.value, DecisionModel::TotalVariation { d }))
}

/// SAA decision for the Γ-sum objective.
pub fn gamma_saa_d(system: &CombinatorialSystem, scenarios: &ScenarioSet, gamma: usize) -> Result<DecisionReport> {
    let data = Data::new(system, scenarios, Agg::Top(gamma))?;
    let f = saa_with(system, &data)?;
    Ok(data.report(f.member, f.value, DecisionModel::GammaSaa { gamma }))
}

/// Robust Γ-sum decision: objective `v_SAA + Γ^{(r-1)/r} θ`.
pub fn gamma_d(
    system: &CombinatorialSystem,
    scenarios: &ScenarioSet,
    theta: f64,
    r: f64,
    gamma: usize,
) -> Result<DecisionReport> {
    check_theta_r(theta, r)?;
    let mut rep = gamma_saa_d(system, scenarios, gamma)?;
    rep.objective += gamma_shift(theta, r, gamma);
    rep.model = DecisionModel::GammaRobust { theta, r, gamma };
    Ok(rep)
}

fn gamma_shift(theta: f64, r: f64, gamma: usize) -> f64 {
    (gamma as f64).powf((r - 1.0) / r) * theta
}

pub fn gamma_indifference_set<'a>(
    system: &'a CombinatorialSystem,
    scenarios: &'a ScenarioSet,
    theta: f64,
    r: f64,
    gamma: usize,
) -> Result<IndifferenceSet<'a>> {
    check_theta_r(theta, r)?;
    indifference_with(system, scenarios, Agg::Top(gamma), gamma_shift(theta, r, gamma))
}

pub fn gamma_decision_robust(
    system: &CombinatorialSystem,
    scenarios: &ScenarioSet,
    theta: f64,
    r: f64,
    gamma: usize,
) -> Result<DecisionReport> {
    let set = gamma_indifference_set(system, scenarios, theta, r, gamma)?;
    variance_within(&set, DecisionModel::GammaDecisionRobust { theta, r, gamma })
}

/// Evaluates a fixed decision on scenarios: per-scenario values, mean, variance.
pub fn evaluate_decision(
    system: &CombinatorialSystem,
    x: &[usize],
    scenarios: &ScenarioSet,
) -> Result<DecisionReport> {
    let data = Data::new(system, scenarios, Agg::Max)?;
    let x = check_member(system, x)?;
    let rep = data.report(x, 0.0, DecisionModel::Saa);
    Ok(DecisionReport {
        objective: rep.mean,
        ..rep
    })
}

/// Evaluates many decisions in parallel; order is preserved.
pub fn evaluate_decisions(
    system: &CombinatorialSystem,
    xs: &[Vec<usize>],
    scenarios: &ScenarioSet,
) -> Result<Vec<DecisionReport>> {
    xs.par_iter().map(|x| evaluate_decision(system, x, scenarios)).collect()
}

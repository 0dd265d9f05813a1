//! Confidence intervals, radius selection and Monte Carlo checks.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::bottleneck::bottleneck;
use crate::decision::{decision_robust, drbcp_d, evaluate_decision, tv_decision, DecisionReport};
use crate::error::{domain, Error, Result};
use crate::instances::CombinatorialSystem;
use crate::radius::{radius_d, radius_gamma_d, radius_gamma_u, radius_u};
use crate::scenarios::{rng, ScenarioSampler, ScenarioSet};
use crate::stats::{canonical_mean, sample_std};
use crate::uncertainty::{drbcp_u, AmbiguityConfig, Sense};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CiMethod {
    Asymptotic,
    TheoreticalU,
    TheoreticalD,
    TheoreticalGammaU,
    TheoreticalGammaD,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiReport {
    pub point: f64,
    pub half_width: f64,
    pub level: f64,
    pub method: CiMethod,
}

impl CiReport {
    pub fn low(&self) -> f64 {
        self.point - self.half_width
    }
    pub fn high(&self) -> f64 {
        self.point + self.half_width
    }
    pub fn overlaps(&self, other: &CiReport) -> bool {
        self.low() <= other.high() && other.low() <= self.high()
    }
}

fn z_value(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(domain(format!("confidence level must lie in (0, 1), got {level}")));
    }
    if level == 0.95 {
        return Ok(1.96);
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(0.5 + level / 2.0))
}

/// `mean ± z s / sqrt(N)` with `s` the sample standard deviation.
pub fn asymptotic_ci(values: &[f64], level: f64) -> Result<CiReport> {
    if values.len() < 2 {
        return Err(domain("an asymptotic interval needs at least two values"));
    }
    let z = z_value(level)?;
    Ok(CiReport {
        point: canonical_mean(values),
        half_width: z * sample_std(values) / (values.len() as f64).sqrt(),
        level,
        method: CiMethod::Asymptotic,
    })
}

/// Structural inputs selecting the radius formula behind a theoretical interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TheoryKind {
    U { max_blocker_size: usize, r: f64 },
    /// `n = 0` gives the single-solution interval.
    D { n: usize },
    /// Uses the part (ii) radius, the width of the upper bracket.
    GammaU { gamma: usize, r: f64, union_size: usize },
    GammaD { n: usize, gamma: usize, r: f64 },
}

/// `point ± θ` with `θ` from the finite-sample radius; level `1 - 2ε`.
pub fn theoretical_ci(point: f64, samples: usize, sigma: f64, epsilon: f64, kind: TheoryKind) -> Result<CiReport> {
    let (theta, method) = match kind {
        TheoryKind::U { max_blocker_size, r } => (
            radius_u(samples, sigma, epsilon, max_blocker_size, r)?.theta,
            CiMethod::TheoreticalU,
        ),
        TheoryKind::D { n } => (radius_d(samples, sigma, epsilon, n)?.theta, CiMethod::TheoreticalD),
        TheoryKind::GammaU { gamma, r, union_size } => (
            radius_gamma_u(samples, sigma, epsilon, gamma, r, union_size)?.1.theta,
            CiMethod::TheoreticalGammaU,
        ),
        TheoryKind::GammaD { n, gamma, r } => (
            radius_gamma_d(samples, sigma, epsilon, n, gamma, r)?.theta,
            CiMethod::TheoreticalGammaD,
        ),
    };
    Ok(CiReport {
        point,
        half_width: theta,
        level: 1.0 - 2.0 * epsilon,
        method,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Lower,
    Upper,
}

/// Smallest grid radius whose robust value has left the interval: for
/// capacities the first value strictly below the chosen endpoint (upper by
/// default), for costs the first strictly above it (lower by default).
pub fn theta_star(curve: &[(f64, f64)], ci: &CiReport, sense: Sense, endpoint: Option<Endpoint>) -> Result<Option<f64>> {
    if curve.is_empty() {
        return Err(domain("θ grid is empty"));
    }
    if curve.windows(2).any(|w| w[0].0 > w[1].0) {
        return Err(domain("θ grid must be sorted ascending"));
    }
    let edge = match endpoint.unwrap_or(match sense {
        Sense::Capacity => Endpoint::Upper,
        Sense::Cost => Endpoint::Lower,
    }) {
        Endpoint::Lower => ci.low(),
        Endpoint::Upper => ci.high(),
    };
    Ok(curve
        .iter()
        .find(|&&(_, v)| match sense {
            Sense::Capacity => v < edge,
            Sense::Cost => v > edge,
        })
        .map(|&(t, _)| t))
}

/// Decision model evaluated by [`cross_validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvModel {
    DecisionRobust,
    TvDecision,
    DrbcpD,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub theta: f64,
    pub mean_ci: CiReport,
    pub variance_ci: CiReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValReport {
    pub grid: Vec<f64>,
    pub rows: Vec<CvRow>,
    pub recommended: f64,
    pub repeats: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub model: CvModel,
    pub seed: u64,
}

fn solve(system: &CombinatorialSystem, train: &ScenarioSet, theta: f64, model: CvModel) -> Result<DecisionReport> {
    match model {
        CvModel::DecisionRobust => decision_robust(system, train, theta),
        CvModel::TvDecision => tv_decision(system, train, theta),
        CvModel::DrbcpD => drbcp_d(system, train, theta),
    }
}

fn ci_or_point(values: &[f64]) -> Result<CiReport> {
    if values.len() == 1 {
        return Ok(CiReport {
            point: values[0],
            half_width: 0.0,
            level: 0.95,
            method: CiMethod::Asymptotic,
        });
    }
    asymptotic_ci(values, 0.95)
}

/// Repeated random train/test splits. For each radius the model is solved on
/// the training part and its choice evaluated on the rest; the recommended
/// radius has a test-mean interval overlapping that of the first grid point
/// and the smallest average test variance among those (smallest radius on ties).
pub fn cross_validate(
    system: &CombinatorialSystem,
    scenarios: &ScenarioSet,
    grid: &[f64],
    train_size: usize,
    repeats: usize,
    seed: u64,
    model: CvModel,
) -> Result<CrossValReport> {
    let n = scenarios.len();
    if train_size == 0 || train_size >= n {
        return Err(domain(format!(
            "training size must lie in 1..{n}, got {train_size}"
        )));
    }
    if repeats == 0 {
        return Err(domain("at least one repeat is required"));
    }
    if grid.is_empty() || grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(domain("θ grid must be nonempty and sorted ascending"));
    }
    // per repeat, per θ: (test mean, test variance)
    let results: Vec<Vec<(f64, f64)>> = (0..repeats)
        .into_par_iter()
        .map(|rep| {
            let mut g = rng(seed, rep as u64);
            let mut train: Vec<usize> = sample(&mut g, n, train_size).into_vec();
            train.sort_unstable();
            let test: Vec<usize> = (0..n).filter(|i| train.binary_search(i).is_err()).collect();
            let (tr, te) = (scenarios.select(&train), scenarios.select(&test));
            grid.iter()
                .map(|&theta| {
                    let x = solve(system, &tr, theta, model)?.x;
                    let ev = evaluate_decision(system, &x, &te)?;
                    Ok((ev.mean, ev.variance))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let rows: Vec<CvRow> = grid
        .iter()
        .enumerate()
        .map(|(i, &theta)| {
            let means: Vec<f64> = results.iter().map(|r| r[i].0).collect();
            let vars: Vec<f64> = results.iter().map(|r| r[i].1).collect();
            Ok(CvRow {
                theta,
                mean_ci: ci_or_point(&means)?,
                variance_ci: ci_or_point(&vars)?,
            })
        })
        .collect::<Result<_>>()?;
    let reference = rows[0].mean_ci;
    let recommended = rows
        .iter()
        .filter(|r| r.mean_ci.overlaps(&reference))
        .fold(None::<&CvRow>, |best, r| match best {
            Some(b) if b.variance_ci.point <= r.variance_ci.point => Some(b),
            _ => Some(r),
        })
        .expect("the first row overlaps itself")
        .theta;
    Ok(CrossValReport {
        grid: grid.to_vec(),
        rows,
        recommended,
        repeats,
        train_size,
        test_size: n - train_size,
        model,
        seed,
    })
}

impl CrossValReport {
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["theta", "mean", "mean_ci_low", "mean_ci_high", "variance", "variance_ci_low", "variance_ci_high"])
            .map_err(io)?;
        for r in &self.rows {
            let cells = [
                r.theta,
                r.mean_ci.point,
                r.mean_ci.low(),
                r.mean_ci.high(),
                r.variance_ci.point,
                r.variance_ci.low(),
                r.variance_ci.high(),
            ];
            w.write_record(cells.iter().map(|x| x.to_string())).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}

/// Which robust value a coverage experiment checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoverageKind {
    /// Quantification under the ∞-Wasserstein ball with `r`-norm.
    U { r: f64 },
    /// Decision value `v_SAA + θ`; the truth is the best member's true mean.
    D,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum RadiusRule {
    /// The finite-sample radius with the given σ.
    FiniteSample { sigma: f64 },
    Fixed { theta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub samples: usize,
    pub trials: usize,
    pub epsilon: f64,
    pub rule: RadiusRule,
    pub kind: CoverageKind,
    pub reference_samples: usize,
    pub seed: u64,
}

impl CoverageConfig {
    pub fn new(samples: usize, trials: usize, epsilon: f64, rule: RadiusRule, kind: CoverageKind) -> Self {
        CoverageConfig {
            samples,
            trials,
            epsilon,
            rule,
            kind,
            reference_samples: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageTrial {
    pub value: f64,
    pub covers: bool,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub theta: f64,
    /// Fraction of trials with `v >= v_true`.
    pub lower_frequency: f64,
    /// Fraction of trials with `v <= v_true + 2θ`.
    pub upper_frequency: f64,
    pub reference_value: f64,
    /// Monte Carlo standard error of `reference_value`.
    pub reference_std_error: f64,
    pub trials: Vec<CoverageTrial>,
}

/// Draws `trials` independent data sets of size `N` and checks the robust
/// value against a large-sample reference. Trial `i` uses substream `i + 1`
/// of the seed, the reference uses substream 0.
pub fn coverage_experiment(
    system: &CombinatorialSystem,
    sampler: &dyn ScenarioSampler,
    config: &CoverageConfig,
) -> Result<CoverageReport> {
    if config.trials == 0 {
        return Err(domain("at least one trial is required"));
    }
    if config.samples == 0 || config.reference_samples < 2 {
        return Err(domain("sample sizes must be positive"));
    }
    let theta = match (config.rule, config.kind) {
        (RadiusRule::Fixed { theta }, _) => {
            if !(theta >= 0.0) {
                return Err(domain("radius must be nonnegative"));
            }
            theta
        }
        (RadiusRule::FiniteSample { sigma }, CoverageKind::U { r }) => {
            radius_u(config.samples, sigma, config.epsilon, system.max_blocker_size().0, r)?.theta
        }
        (RadiusRule::FiniteSample { sigma }, CoverageKind::D) => {
            radius_d(config.samples, sigma, config.epsilon, system.n())?.theta
        }
    };
    let reference = sampler.sample(&mut rng(config.seed, 0), config.reference_samples)?;
    let (reference_value, reference_std_error) = match config.kind {
        CoverageKind::U { .. } => {
            let z: Vec<f64> = reference
                .costs()
                .par_iter()
                .map(|c| bottleneck(system, c))
                .collect::<Result<_>>()?;
            (canonical_mean(&z), sample_std(&z) / (z.len() as f64).sqrt())
        }
        CoverageKind::D => {
            let members = system.members(false)?;
            let evals: Vec<DecisionReport> = members
                .par_iter()
                .map(|x| evaluate_decision(system, x, &reference))
                .collect::<Result<_>>()?;
            let best = evals
                .iter()
                .min_by(|a, b| a.mean.total_cmp(&b.mean))
                .expect("a system has members");
            let err = (best.variance * reference.len() as f64 / (reference.len() - 1) as f64).sqrt()
                / (reference.len() as f64).sqrt();
            (best.mean, err)
        }
    };
    let trials: Vec<CoverageTrial> = (0..config.trials)
        .into_par_iter()
        .map(|i| {
            let data = sampler.sample(&mut rng(config.seed, i as u64 + 1), config.samples)?;
            let value = match config.kind {
                CoverageKind::U { r } => {
                    drbcp_u(system, &data, &AmbiguityConfig::infinity(r, theta), Sense::Cost)?.v_u
                }
                CoverageKind::D => drbcp_d(system, &data, theta)?.objective,
            };
            Ok(CoverageTrial {
                value,
                covers: value >= reference_value,
                within: value <= reference_value + 2.0 * theta,
            })
        })
        .collect::<Result<_>>()?;
    let count = trials.len() as f64;
    Ok(CoverageReport {
        theta,
        lower_frequency: trials.iter().filter(|t| t.covers).count() as f64 / count,
        upper_frequency: trials.iter().filter(|t| t.within).count() as f64 / count,
        reference_value,
        reference_std_error,
        trials,
    })
}

/// Sample standard deviation of objective samples.
pub fn estimate_sigma(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(domain("σ estimation needs at least two samples"));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(domain("σ estimation needs finite samples"));
    }
    Ok(sample_std(samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::IidGaussian;
    use crate::uncertainty::tests::triangle;
    use proptest::prelude::*;

    #[test]
    fn asymptotic_examples() {
        let c = asymptotic_ci(&[1.0; 4], 0.95).unwrap();
        assert_eq!((c.point, c.half_width), (1.0, 0.0));
        let c = asymptotic_ci(&[0.0, 2.0], 0.95).unwrap();
        assert_eq!(c.point, 1.0);
        assert!((c.half_width - 1.96).abs() < 1e-12);
        let c90 = asymptotic_ci(&[0.0, 2.0], 0.90).unwrap();
        assert!((c90.half_width - 1.6448536).abs() < 1e-6);
        assert!(asymptotic_ci(&[1.0], 0.95).is_err());
    }

    #[test]
    fn theoretical_examples() {
        let u = theoretical_ci(0.0, 100, 1.0, 0.025, TheoryKind::U { max_blocker_size: 4, r: 1.0 }).unwrap();
        assert!((u.half_width - 0.1 * (3.0 * 40f64.ln()).sqrt() * 4.0).abs() < 1e-12);
        assert!((u.half_width - 1.3305).abs() < 1e-3);
        assert!((u.level - 0.95).abs() < 1e-12);
        let wide = theoretical_ci(0.0, 100, 1.0, 0.025, TheoryKind::D { n: 0 }).unwrap();
        let narrow = theoretical_ci(0.0, 100, 1.0, 0.05, TheoryKind::D { n: 0 }).unwrap();
        assert!(wide.half_width > narrow.half_width);
        assert!((narrow.half_width - 0.1 * (-3.0 * 0.05f64.ln()).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn theta_star_examples() {
        let ci = CiReport { point: 5.30, half_width: 0.10, level: 0.95, method: CiMethod::Asymptotic };
        let curve = [(0.0, 5.45), (0.1, 5.41), (0.2, 5.38)];
        assert_eq!(theta_star(&curve, &ci, Sense::Capacity, None).unwrap(), Some(0.2));
        let flat = [(0.0, 5.45), (0.1, 5.45)];
        assert_eq!(theta_star(&flat, &ci, Sense::Capacity, None).unwrap(), None);
        assert!(theta_star(&[], &ci, Sense::Capacity, None).is_err());
        let rising = [(0.0, 1.0), (0.5, 1.5), (1.0, 2.0)];
        let band = CiReport { point: 1.0, half_width: 0.4, level: 0.95, method: CiMethod::Asymptotic };
        assert_eq!(theta_star(&rising, &band, Sense::Cost, Some(Endpoint::Upper)).unwrap(), Some(0.5));
    }

    #[test]
    fn sigma_estimates() {
        assert_eq!(estimate_sigma(&[3.0; 5]).unwrap(), 0.0);
        assert!((estimate_sigma(&[0.0, 2.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(estimate_sigma(&[1.0]).is_err());
    }

    #[test]
    fn cross_validation_basics() {
        let sys = CombinatorialSystem::assignment(2).unwrap();
        let sc = ScenarioSet::new(vec![vec![1.0, 2.0, 3.0, 4.0]; 6]).unwrap();
        let rep = cross_validate(&sys, &sc, &[0.0, 0.5, 1.0], 4, 5, 7, CvModel::DecisionRobust).unwrap();
        assert!(rep.rows.iter().all(|r| r.variance_ci.point == 0.0));
        assert_eq!(rep, cross_validate(&sys, &sc, &[0.0, 0.5, 1.0], 4, 5, 7, CvModel::DecisionRobust).unwrap());
        let single = cross_validate(&sys, &sc, &[0.0], 4, 1, 7, CvModel::DrbcpD).unwrap();
        assert_eq!(single.rows[0].mean_ci.half_width, 0.0);
        assert_eq!(single.rows[0].mean_ci.point, 3.0);
        assert!(cross_validate(&sys, &sc, &[0.0], 6, 1, 7, CvModel::DrbcpD).is_err());
        assert!(rep.to_csv_string().unwrap().starts_with("theta,mean"));
    }

    #[test]
    fn coverage_extremes() {
        let sampler = IidGaussian { mean: vec![1.0, 2.0, 1.5], sd: vec![1.0; 3] };
        let mut cfg = CoverageConfig::new(20, 40, 0.1, RadiusRule::Fixed { theta: 100.0 }, CoverageKind::U { r: 1.0 });
        cfg.reference_samples = 20_000;
        let huge = coverage_experiment(&triangle(), &sampler, &cfg).unwrap();
        assert_eq!(huge.lower_frequency, 1.0);
        cfg.rule = RadiusRule::Fixed { theta: 0.0 };
        let zero = coverage_experiment(&triangle(), &sampler, &cfg).unwrap();
        assert!(zero.lower_frequency < 0.9);
        cfg.trials = 0;
        assert!(coverage_experiment(&triangle(), &sampler, &cfg).is_err());
    }

    proptest! {
        #[test]
        fn widening_band_never_raises_theta_star(
            vals in prop::collection::vec(0.0f64..10.0, 1..8),
            point in 0.0f64..10.0,
            w in 0.0f64..3.0,
            extra in 0.0f64..3.0,
        ) {
            let curve: Vec<(f64, f64)> = vals.iter().enumerate().map(|(i, &v)| (i as f64 * 0.1, v)).collect();
            let narrow = CiReport { point, half_width: w, level: 0.95, method: CiMethod::Asymptotic };
            let wide = CiReport { half_width: w + extra, ..narrow };
            for sense in [Sense::Capacity, Sense::Cost] {
                let at = |ci: &CiReport| theta_star(&curve, ci, sense, None).unwrap().unwrap_or(f64::INFINITY);
                prop_assert!(at(&wide) <= at(&narrow));
            }
        }

        #[test]
        fn sigma_scales(vals in prop::collection::vec(-5.0f64..5.0, 2..20), k in -4.0f64..4.0) {
            let s = estimate_sigma(&vals).unwrap();
            let scaled: Vec<f64> = vals.iter().map(|v| v * k).collect();
            prop_assert!((estimate_sigma(&scaled).unwrap() - k.abs() * s).abs() <= 1e-9 * (1.0 + s));
        }
    }
}

//! Pipelines behind the `drbcp` binary.
//!
//! Every model writes a results CSV with the fixed columns
//!
//! `theta, value, saa_value, lower, upper, mean, variance, ci_low, ci_high, wall_time_s, subset`
//!
//! (one row per radius, cells left empty when they do not apply) and a JSON
//! summary next to it with the same rows minus wall time. For `tv-decide` the
//! `theta` column holds the total-variation radius `d`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use drbcp::bottleneck::{bottleneck, dual_bottleneck_value};
use drbcp::calibration::{asymptotic_ci, cross_validate, estimate_sigma, theta_star, CiReport, CvModel};
use drbcp::decision::{
    decision_robust, drbcp_d, evaluate_decision, gamma_d, gamma_decision_robust, gamma_saa_d, indifference_set, saa_d,
    tv_decision, DecisionReport,
};
use drbcp::radius::{radius_d, radius_u};
use drbcp::scenarios::{gen_multihop, load_scenarios, save_scenarios, MultihopParams, ScenarioSet};
use drbcp::uncertainty::{
    drbcp_u, gamma_u, q_wasserstein_u, robust_scenario_value, saa_u, t_star_for_costs, AmbiguityConfig, Sense,
};
use drbcp::{CombinatorialSystem, Error, Result};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_COLUMNS: [&str; 11] = [
    "theta",
    "value",
    "saa_value",
    "lower",
    "upper",
    "mean",
    "variance",
    "ci_low",
    "ci_high",
    "wall_time_s",
    "subset",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Quantify,
    Decide,
    RobustDecide,
    TvDecide,
    GammaQuantify,
    GammaDecide,
    Calibrate,
    Simulate,
    Evaluate,
    Oracle,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub model: Model,
    pub instance: Option<PathBuf>,
    pub scenarios: Option<PathBuf>,
    /// Radii, sorted ascending.
    pub thetas: Vec<f64>,
    /// Wasserstein order; `None` is `q = ∞`.
    pub q: Option<f64>,
    pub r: f64,
    pub d: f64,
    pub gamma: usize,
    pub sense: Sense,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub force_enumeration: bool,
    /// Decision to score with `evaluate`.
    pub decision: Option<Vec<usize>>,
    pub epsilon: f64,
    pub train_size: Option<usize>,
    pub repeats: usize,
    /// Ground nodes and scenario count for `simulate`.
    pub nodes: usize,
    pub samples: usize,
}

impl RunConfig {
    pub fn new(model: Model) -> Self {
        RunConfig {
            model,
            instance: None,
            scenarios: None,
            thetas: vec![0.0],
            q: None,
            r: 1.0,
            d: 0.0,
            gamma: 1,
            sense: Sense::Cost,
            seed: 0,
            out: None,
            force_enumeration: false,
            decision: None,
            epsilon: 0.05,
            train_size: None,
            repeats: 20,
            nodes: 20,
            samples: 100,
        }
    }
}

/// One results row.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Row {
    pub theta: Option<f64>,
    pub value: Option<f64>,
    pub saa_value: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub mean: Option<f64>,
    pub variance: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    #[serde(skip)]
    pub wall_time_s: f64,
    pub subset: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Output {
    pub rows: Vec<Row>,
    /// Model-specific extras for the summary.
    pub details: serde_json::Value,
    /// Line printed on success.
    pub message: String,
}

/// Exit status for an error: 1 input or domain problems, 2 scale guard,
/// 3 internal failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ScaleGuard(_) => 2,
        Error::InvariantViolation(_) | Error::NumericalConvergence(_) => 3,
        _ => 1,
    }
}

/// Parses `a:b:step` or a comma list into a sorted grid.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::Domain(format!("bad number \"{s}\" in θ grid")))
    };
    let grid = if let [a, b, step] = text.split(':').collect::<Vec<_>>()[..] {
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if !(step > 0.0) || b < a {
            return Err(Error::Domain(format!("grid {text} needs start <= stop and a positive step")));
        }
        let count = ((b - a) / step + 1e-9).floor() as usize;
        (0..=count).map(|i| a + i as f64 * step).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if grid.is_empty() || grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Domain("θ grid must be nonempty and sorted ascending".into()));
    }
    Ok(grid)
}

fn load(config: &RunConfig) -> Result<(CombinatorialSystem, ScenarioSet)> {
    let sys = CombinatorialSystem::load(need(&config.instance, "--instance")?)?;
    let sc = load_scenarios(need(&config.scenarios, "--scenarios")?)?;
    sc.check_against(&sys)?;
    Ok((sys, sc))
}

fn need<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::Domain(format!("model needs {flag}")))
}

fn timed(theta: f64, f: impl FnOnce() -> Result<Row>) -> Result<Row> {
    let start = Instant::now();
    let mut row = f()?;
    row.theta = Some(theta);
    row.wall_time_s = (start.elapsed().as_secs_f64() * 1000.0).round() / 1000.0;
    Ok(row)
}

fn over_grid(thetas: &[f64], f: impl Fn(f64) -> Result<Row> + Sync) -> Result<Vec<Row>> {
    thetas.par_iter().map(|&t| timed(t, || f(t))).collect()
}

/// Solves a decision model in the configured sense.
fn decide_in_sense(
    sc: &ScenarioSet,
    sense: Sense,
    f: impl Fn(&ScenarioSet) -> Result<DecisionReport>,
) -> Result<DecisionReport> {
    match sense {
        Sense::Cost => f(sc),
        Sense::Capacity => Ok(f(&sc.negated())?.into_capacity()),
    }
}

fn decision_row(rep: &DecisionReport, saa: &DecisionReport) -> Row {
    Row {
        value: Some(rep.objective),
        saa_value: Some(saa.objective),
        mean: Some(rep.mean),
        variance: Some(rep.variance),
        subset: Some(rep.x.clone()),
        ..Row::default()
    }
}

fn ci_cells(row: &mut Row, ci: &CiReport) {
    row.ci_low = Some(ci.low());
    row.ci_high = Some(ci.high());
}

/// Per-scenario bottleneck values in the configured sense.
fn scenario_values(sys: &CombinatorialSystem, sc: &ScenarioSet, sense: Sense) -> Result<Vec<f64>> {
    sc.costs()
        .par_iter()
        .map(|c| match sense {
            Sense::Cost => bottleneck(sys, c),
            Sense::Capacity => bottleneck(sys, &c.iter().map(|x| -x).collect::<Vec<_>>()).map(|v| -v),
        })
        .collect()
}

fn quantify(config: &RunConfig) -> Result<Output> {
    let (sys, sc) = load(config)?;
    let values = scenario_values(&sys, &sc, config.sense)?;
    let ci = asymptotic_ci(&values, 0.95)?;
    let (ymax, exact_size) = sys.max_blocker_size();
    let rows = over_grid(&config.thetas, |theta| {
        let (v_u, v_saa) = match config.q {
            None => {
                let q = drbcp_u(&sys, &sc, &AmbiguityConfig::infinity(config.r, theta), config.sense)?;
                (q.v_u, q.v_saa)
            }
            Some(q) => {
                let quote = q_wasserstein_u(&sys, &sc, theta, q, config.r, config.sense)?;
                (quote.v_u, quote.v_saa)
            }
        };
        let lower_gap = theta / (ymax.max(1) as f64).powf(1.0 / config.r);
        let (lower, upper) = match config.sense {
            Sense::Cost => (v_saa + lower_gap, v_saa + theta),
            Sense::Capacity => (v_saa - theta, v_saa - lower_gap),
        };
        let mut row = Row {
            value: Some(v_u),
            saa_value: Some(v_saa),
            ..Row::default()
        };
        if config.q.is_none() {
            row.lower = Some(lower);
            row.upper = Some(upper);
        }
        ci_cells(&mut row, &ci);
        Ok(row)
    })?;
    let curve: Vec<(f64, f64)> = rows.iter().map(|r| (r.theta.unwrap(), r.value.unwrap())).collect();
    let star = theta_star(&curve, &ci, config.sense, None)?;
    Ok(Output {
        message: format!("quantified {} radii", rows.len()),
        details: json!({
            "saa_ci": ci,
            "theta_star": star,
            "max_blocker_size": ymax,
            "max_blocker_size_exact": exact_size,
        }),
        rows,
    })
}

fn decide(config: &RunConfig) -> Result<Output> {
    let (sys, sc) = load(config)?;
    let g = config.gamma;
    let saa = decide_in_sense(&sc, config.sense, |s| {
        if g == 1 {
            saa_d(&sys, s)
        } else {
            gamma_saa_d(&sys, s, g)
        }
    })?;
    let rows = over_grid(&config.thetas, |theta| {
        let rep = decide_in_sense(&sc, config.sense, |s| match config.model {
            Model::RobustDecide if g == 1 => decision_robust(&sys, s, theta),
            Model::RobustDecide => gamma_decision_robust(&sys, s, theta, config.r, g),
            _ if g == 1 => drbcp_d(&sys, s, theta),
            _ => gamma_d(&sys, s, theta, config.r, g),
        })?;
        let mut row = decision_row(&rep, &saa);
        if config.model == Model::RobustDecide {
            row.saa_value = Some(saa.mean);
        }
        Ok(row)
    })?;
    Ok(Output {
        message: format!("solved {} radii", rows.len()),
        details: json!({
            "saa_subset": saa.x,
            "saa_permutation": saa.permutation(&sys),
        }),
        rows,
    })
}

fn tv(config: &RunConfig) -> Result<Output> {
    let (sys, sc) = load(config)?;
    let saa = decide_in_sense(&sc, config.sense, |s| saa_d(&sys, s))?;
    let rows = over_grid(&[config.d], |d| {
        let rep = decide_in_sense(&sc, config.sense, |s| tv_decision(&sys, s, d))?;
        Ok(decision_row(&rep, &saa))
    })?;
    Ok(Output {
        message: format!("solved total-variation model at d = {}", config.d),
        details: json!({ "d": config.d }),
        rows,
    })
}

fn gamma_quantify(config: &RunConfig) -> Result<Output> {
    if config.sense == Sense::Capacity || config.q.is_some() {
        return Err(Error::Domain("gamma-quantify supports the cost sense with q = ∞ only".into()));
    }
    let (sys, sc) = load(config)?;
    let rows = over_grid(&config.thetas, |theta| {
        let q = gamma_u(&sys, &sc, theta, config.r, config.gamma, config.force_enumeration)?;
        Ok(Row {
            value: q.exact,
            saa_value: Some(q.v_saa),
            lower: Some(q.lower),
            upper: Some(q.upper),
            ..Row::default()
        })
    })?;
    Ok(Output {
        message: format!("quantified {} radii with Γ = {}", rows.len(), config.gamma),
        details: json!({ "gamma": config.gamma }),
        rows,
    })
}

fn calibrate(config: &RunConfig) -> Result<Output> {
    let (sys, sc) = load(config)?;
    let train = config.train_size.unwrap_or(sc.len() / 2);
    let data = match config.sense {
        Sense::Cost => sc.clone(),
        Sense::Capacity => sc.negated(),
    };
    let start = Instant::now();
    let cv = cross_validate(&sys, &data, &config.thetas, train, config.repeats, config.seed, CvModel::DecisionRobust)?;
    let per_point = start.elapsed().as_secs_f64() / config.thetas.len() as f64;
    let s = if config.sense == Sense::Capacity { -1.0 } else { 1.0 };
    let rows = cv
        .rows
        .iter()
        .map(|r| {
            let (lo, hi) = (s * r.mean_ci.low(), s * r.mean_ci.high());
            Row {
                theta: Some(r.theta),
                value: Some(r.variance_ci.point),
                mean: Some(s * r.mean_ci.point),
                variance: Some(r.variance_ci.point),
                ci_low: Some(lo.min(hi)),
                ci_high: Some(lo.max(hi)),
                wall_time_s: (per_point * 1000.0).round() / 1000.0,
                ..Row::default()
            }
        })
        .collect();
    let values = scenario_values(&sys, &sc, config.sense)?;
    let sigma = estimate_sigma(&values)?;
    let (ymax, _) = sys.max_blocker_size();
    Ok(Output {
        message: format!("cross-validation recommends θ = {}", cv.recommended),
        details: json!({
            "recommended_theta": cv.recommended,
            "train_size": cv.train_size,
            "test_size": cv.test_size,
            "repeats": cv.repeats,
            "sigma_estimate": sigma,
            "radius_u": radius_u(sc.len(), sigma, config.epsilon, ymax, config.r)?,
            "radius_d": radius_d(sc.len(), sigma, config.epsilon, sys.n())?,
            "saa_ci": asymptotic_ci(&values, 0.95)?,
        }),
        rows,
    })
}

fn evaluate(config: &RunConfig) -> Result<Output> {
    let (sys, sc) = load(config)?;
    let x = config
        .decision
        .as_ref()
        .ok_or_else(|| Error::Domain("evaluate needs --decision".into()))?;
    let rep = decide_in_sense(&sc, config.sense, |s| evaluate_decision(&sys, x, s))?;
    let values = &rep.per_scenario_values;
    let ci = asymptotic_ci(values, 0.95)?;
    let mut row = Row {
        value: Some(rep.mean),
        mean: Some(rep.mean),
        variance: Some(rep.variance),
        subset: Some(rep.x.clone()),
        ..Row::default()
    };
    ci_cells(&mut row, &ci);
    Ok(Output {
        message: format!("evaluated decision on {} scenarios", sc.len()),
        details: json!({ "per_scenario_values": values }),
        rows: vec![row],
    })
}

fn simulate(config: &RunConfig) -> Result<Output> {
    let out = need(&config.out, "--out")?;
    let params = MultihopParams {
        nodes: config.nodes,
        samples: config.samples,
        seed: config.seed,
        ..MultihopParams::default()
    };
    let (sys, sc, _, meta) = gen_multihop(&params)?;
    save_scenarios(out, &sc)?;
    let instance = out.with_extension("instance.json");
    sys.save(&instance)?;
    let meta_path = meta.save_alongside(out)?;
    Ok(Output {
        message: format!(
            "wrote {}, {} and {}",
            out.display(),
            instance.display(),
            meta_path.display()
        ),
        details: serde_json::to_value(&meta)?,
        rows: Vec::new(),
    })
}

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvariantViolation(what()))
    }
}

/// Brute-force cross-checks of the structural solvers on an instance small
/// enough to enumerate. Without `--scenarios`, five integer cost vectors are
/// drawn from the seed.
fn oracle(config: &RunConfig) -> Result<Output> {
    let sys = CombinatorialSystem::load(need(&config.instance, "--instance")?)?;
    let sc = match &config.scenarios {
        Some(p) => load_scenarios(p)?,
        None => {
            let mut g = ChaCha8Rng::seed_from_u64(config.seed);
            ScenarioSet::new(
                (0..5)
                    .map(|_| (0..sys.n()).map(|_| (g.next_u32() % 8) as f64).collect())
                    .collect(),
            )?
        }
    };
    sc.check_against(&sys)?;
    let force = config.force_enumeration;
    let members = sys.members(force)?;
    let blocker = sys.blocker(force)?;
    let mut compared = 0usize;
    let close = |a: f64, b: f64, tol: f64| (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()));

    for (k, c) in sc.costs().iter().enumerate() {
        let primal = members
            .iter()
            .map(|x| x.iter().map(|&j| c[j]).fold(f64::NEG_INFINITY, f64::max))
            .fold(f64::INFINITY, f64::min);
        let dual = blocker
            .iter()
            .map(|y| y.elements.iter().map(|&j| c[j]).fold(f64::INFINITY, f64::min))
            .fold(f64::NEG_INFINITY, f64::max);
        let z = bottleneck(&sys, c)?;
        let dz = dual_bottleneck_value(&sys, c)?;
        check(primal == dual && z == primal && dz == dual, || {
            format!("scenario {k}: primal {primal}, dual {dual}, solver {z}/{dz}")
        })?;
        compared += 4;
        for &theta in &config.thetas {
            let q = robust_scenario_value(&sys, c, theta, config.r)?;
            let closed = blocker
                .iter()
                .map(|y| t_star_for_costs(&y.elements.iter().map(|&j| c[j]).collect::<Vec<_>>(), theta, config.r))
                .fold(f64::NEG_INFINITY, f64::max);
            check(close(q.t_star, closed, 1e-9), || {
                format!("scenario {k}, θ = {theta}: robust value {} vs closed form {closed}", q.t_star)
            })?;
            compared += 1;
        }
    }

    let ymax = blocker.iter().map(|y| y.elements.len()).max().unwrap_or(1);
    let saa = saa_d(&sys, &sc)?;
    let means: Vec<f64> = members
        .iter()
        .map(|x| evaluate_decision(&sys, x, &sc).map(|r| r.mean))
        .collect::<Result<_>>()?;
    let best = means.iter().copied().fold(f64::INFINITY, f64::min);
    check(saa.mean == best && saa_u(&sys, &sc, Sense::Cost)? <= best, || {
        format!("SAA decision {} vs enumeration {best}", saa.mean)
    })?;
    compared += 2;
    for &theta in &config.thetas {
        let quote = drbcp_u(&sys, &sc, &AmbiguityConfig::infinity(config.r, theta), Sense::Cost)?;
        quote.sandwich(ymax)?;
        let rob = drbcp_d(&sys, &sc, theta)?;
        check(close(rob.objective - saa.objective, theta, 1e-12), || {
            format!("θ = {theta}: v_D - v_SAA = {}", rob.objective - saa.objective)
        })?;
        let set = indifference_set(&sys, &sc, theta)?;
        let dr = decision_robust(&sys, &sc, theta)?;
        let best_var = set
            .members(force)?
            .iter()
            .map(|x| evaluate_decision(&sys, x, &sc).map(|r| r.variance))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        check(dr.objective == best_var, || {
            format!("θ = {theta}: decision-robust variance {} vs enumeration {best_var}", dr.objective)
        })?;
        let g1 = gamma_u(&sys, &sc, theta, config.r, 1, force)?;
        check(g1.exact == Some(quote.v_u), || format!("θ = {theta}: Γ = 1 value differs"))?;
        compared += 4;
    }
    Ok(Output {
        message: format!(
            "all checks passed ({compared} values compared over {} scenarios, {} members, {} blocker elements)",
            sc.len(),
            members.len(),
            blocker.len()
        ),
        details: json!({ "compared": compared, "members": members.len(), "blocker_elements": blocker.len() }),
        rows: Vec::new(),
    })
}

/// Runs the configured pipeline and writes its outputs. Without `--out` the
/// CSV goes to standard output.
pub fn run(config: &RunConfig) -> Result<Output> {
    if config.thetas.is_empty() || config.thetas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Domain("θ grid must be nonempty and sorted ascending".into()));
    }
    let output = match config.model {
        Model::Quantify => quantify(config)?,
        Model::Decide | Model::RobustDecide => decide(config)?,
        Model::GammaDecide => {
            if config.gamma < 2 {
                return Err(Error::Domain("gamma-decide needs --gamma >= 2".into()));
            }
            decide(config)?
        }
        Model::TvDecide => tv(config)?,
        Model::GammaQuantify => gamma_quantify(config)?,
        Model::Calibrate => calibrate(config)?,
        Model::Evaluate => evaluate(config)?,
        Model::Simulate => return simulate(config),
        Model::Oracle => return oracle(config),
    };
    match &config.out {
        Some(path) => {
            std::fs::write(path, to_csv(&output.rows)?)?;
            std::fs::write(summary_path(path), summary_json(config, &output)?)?;
        }
        None => print!("{}", to_csv(&output.rows)?),
    }
    Ok(output)
}

/// `results.csv` -> `results.json`.
pub fn summary_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn to_csv(rows: &[Row]) -> Result<String> {
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).map_err(io)?;
    for r in rows {
        let subset = r
            .subset
            .as_ref()
            .map(|x| x.iter().map(usize::to_string).collect::<Vec<_>>().join(" "))
            .unwrap_or_default();
        w.write_record([
            cell(r.theta),
            cell(r.value),
            cell(r.saa_value),
            cell(r.lower),
            cell(r.upper),
            cell(r.mean),
            cell(r.variance),
            cell(r.ci_low),
            cell(r.ci_high),
            format!("{:.3}", r.wall_time_s),
            subset,
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub fn summary_json(config: &RunConfig, output: &Output) -> Result<String> {
    let value = json!({
        "schema_version": SCHEMA_VERSION,
        "model": config.model,
        "sense": config.sense,
        "config": {
            "thetas": config.thetas,
            "q": config.q,
            "r": config.r,
            "d": config.d,
            "gamma": config.gamma,
            "seed": config.seed,
            "force_enumeration": config.force_enumeration,
        },
        "columns": CSV_COLUMNS,
        "rows": output.rows,
        "details": output.details,
    });
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

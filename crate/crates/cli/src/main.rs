use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use drbcp::uncertainty::Sense;
use drbcp_cli::{exit_code, parse_grid, run, Model, RunConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
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

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SenseArg {
    Cost,
    Capacity,
}

/// Distributionally robust bottleneck combinatorial problems.
#[derive(Debug, Parser)]
#[command(name = "drbcp", version)]
struct Cli {
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Instance JSON.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Scenario CSV, one row per scenario.
    #[arg(long)]
    scenarios: Option<PathBuf>,
    #[arg(long, conflicts_with = "theta_grid")]
    theta: Option<f64>,
    /// `start:stop:step` or a comma list.
    #[arg(long)]
    theta_grid: Option<String>,
    /// Wasserstein order, a number >= 1 or `inf`.
    #[arg(long, default_value = "inf")]
    q: String,
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Total-variation radius in [0, 2].
    #[arg(long, default_value_t = 0.0)]
    d: f64,
    #[arg(long, default_value_t = 1)]
    gamma: usize,
    #[arg(long, value_enum, default_value = "cost")]
    sense: SenseArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Results CSV; the JSON summary is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Lift the enumeration scale guards.
    #[arg(long)]
    force_enumeration: bool,
    /// Comma-separated element ids, for `evaluate`.
    #[arg(long)]
    decision: Option<String>,
    /// Confidence parameter for the radius formulas.
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    /// Cross-validation training size (default half the scenarios).
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long, default_value_t = 20)]
    repeats: usize,
    /// Multihop nodes for `simulate`.
    #[arg(long, default_value_t = 20)]
    nodes: usize,
    /// Scenario count for `simulate`.
    #[arg(long, default_value_t = 100)]
    samples: usize,
}

fn config(cli: Cli) -> drbcp::Result<RunConfig> {
    let model = match cli.model {
        ModelArg::Quantify => Model::Quantify,
        ModelArg::Decide => Model::Decide,
        ModelArg::RobustDecide => Model::RobustDecide,
        ModelArg::TvDecide => Model::TvDecide,
        ModelArg::GammaQuantify => Model::GammaQuantify,
        ModelArg::GammaDecide => Model::GammaDecide,
        ModelArg::Calibrate => Model::Calibrate,
        ModelArg::Simulate => Model::Simulate,
        ModelArg::Evaluate => Model::Evaluate,
        ModelArg::Oracle => Model::Oracle,
    };
    let mut c = RunConfig::new(model);
    c.thetas = match (cli.theta, cli.theta_grid) {
        (Some(t), _) => vec![t],
        (None, Some(g)) => parse_grid(&g)?,
        (None, None) if model == Model::Oracle => vec![0.0, 0.1, 1.0],
        (None, None) => vec![0.0],
    };
    c.q = match cli.q.as_str() {
        "inf" | "infinity" => None,
        s => Some(
            s.parse()
                .map_err(|_| drbcp::Error::Domain(format!("bad --q value \"{s}\"")))?,
        ),
    };
    c.decision = cli
        .decision
        .map(|s| {
            s.split(',')
                .map(|t| {
                    t.trim()
                        .parse()
                        .map_err(|_| drbcp::Error::Domain(format!("bad element id \"{t}\"")))
                })
                .collect()
        })
        .transpose()?;
    c.instance = cli.instance;
    c.scenarios = cli.scenarios;
    c.r = cli.r;
    c.d = cli.d;
    c.gamma = cli.gamma;
    c.sense = match cli.sense {
        SenseArg::Cost => Sense::Cost,
        SenseArg::Capacity => Sense::Capacity,
    };
    c.seed = cli.seed;
    c.out = cli.out;
    c.force_enumeration = cli.force_enumeration;
    c.epsilon = cli.epsilon;
    c.train_size = cli.train_size;
    c.repeats = cli.repeats;
    c.nodes = cli.nodes;
    c.samples = cli.samples;
    Ok(c)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage errors share the exit code of other input errors
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = config(cli).and_then(|c| run(&c).map(|o| (c, o)));
    match result {
        Ok((c, out)) => {
            if c.out.is_some() || matches!(c.model, Model::Oracle) {
                println!("{}", out.message);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

//! Scenario data: the empirical cost vectors, CSV persistence and seeded
//! generators.
//!
//! CSV layout: one header row of element ids (or element labels), then one
//! row per scenario. Floats are written in Rust's shortest round-trip form, so
//! `load(save(s)) == s` bit for bit.
//!
//! Random streams come from `ChaCha8Rng` seeded with `seed_from_u64(seed)`;
//! independent streams are selected with `set_stream`.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::instances::{CombinatorialSystem, Edge};

/// Name of the random generator recorded in metadata.
pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64 + set_stream";

/// `N` empirical cost vectors over a common ground set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    costs: Vec<Vec<f64>>,
    header: Vec<String>,
    source: String,
}

impl ScenarioSet {
    pub fn new(costs: Vec<Vec<f64>>) -> Result<Self> {
        let n = costs.first().map_or(0, Vec::len);
        Self::with_header((0..n).map(|j| j.to_string()).collect(), costs)
    }

    pub fn with_header(header: Vec<String>, costs: Vec<Vec<f64>>) -> Result<Self> {
        if costs.is_empty() {
            return Err(domain("scenario set must contain at least one scenario"));
        }
        let n = header.len();
        if n == 0 {
            return Err(domain("scenarios must have at least one element"));
        }
        for (k, c) in costs.iter().enumerate() {
            if c.len() != n {
                return Err(Error::Dimension(format!(
                    "scenario {k} has {} entries, expected {n}",
                    c.len()
                )));
            }
            if let Some(j) = c.iter().position(|x| !x.is_finite()) {
                return Err(domain(format!("scenario {k}, element {j} is not finite")));
            }
        }
        Ok(ScenarioSet {
            costs,
            header,
            source: "inline".to_string(),
        })
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }

    /// Number of scenarios `N`.
    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    /// Ground set size `n`.
    pub fn n(&self) -> usize {
        self.header.len()
    }

    pub fn costs(&self) -> &[Vec<f64>] {
        &self.costs
    }

    pub fn scenario(&self, k: usize) -> &[f64] {
        &self.costs[k]
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Every cost multiplied by `-1`.
    pub fn negated(&self) -> ScenarioSet {
        ScenarioSet {
            costs: self
                .costs
                .iter()
                .map(|c| c.iter().map(|x| -x).collect())
                .collect(),
            header: self.header.clone(),
            source: self.source.clone(),
        }
    }

    /// The scenarios at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> ScenarioSet {
        ScenarioSet {
            costs: indices.iter().map(|&k| self.costs[k].clone()).collect(),
            header: self.header.clone(),
            source: self.source.clone(),
        }
    }

    /// Checks that the header names the system's elements in order, either
    /// by id or by label.
    pub fn check_against(&self, system: &CombinatorialSystem) -> Result<()> {
        if self.n() != system.n() {
            return Err(Error::Dimension(format!(
                "scenarios have {} columns, instance has {} elements",
                self.n(),
                system.n()
            )));
        }
        let by_label = system
            .ground()
            .labels()
            .is_some_and(|l| l == self.header.as_slice());
        if by_label {
            return Ok(());
        }
        for (j, h) in self.header.iter().enumerate() {
            if h.trim() != j.to_string() {
                return Err(Error::Dimension(format!(
                    "column {} is headed \"{h}\", expected element id {j}",
                    j + 1
                )));
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.header).map_err(io)?;
        for row in &self.costs {
            w.write_record(row.iter().map(|x| x.to_string())).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parses CSV text. Rows and columns in errors are 1-based, the header
    /// being row 1.
    pub fn read_csv(input: impl Read) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(input);
        let parse_err = |row: usize, column: usize, message: String| Error::Parse {
            row,
            column,
            message,
        };
        let mut records = r.records();
        let header: Vec<String> = match records.next() {
            None => return Err(parse_err(1, 1, "missing header row".into())),
            Some(rec) => rec
                .map_err(|e| parse_err(1, 1, e.to_string()))?
                .iter()
                .map(|h| h.trim().to_string())
                .collect(),
        };
        for (j, h) in header.iter().enumerate() {
            if h.is_empty() {
                return Err(parse_err(1, j + 1, "empty header cell".into()));
            }
            if header[..j].contains(h) {
                return Err(parse_err(1, j + 1, format!("duplicate header \"{h}\"")));
            }
        }
        let mut costs = Vec::new();
        for (i, rec) in records.enumerate() {
            let row = i + 2;
            let rec = rec.map_err(|e| parse_err(row, 1, e.to_string()))?;
            if rec.len() != header.len() {
                return Err(parse_err(
                    row,
                    rec.len().min(header.len()) + 1,
                    format!("row has {} cells, header has {}", rec.len(), header.len()),
                ));
            }
            let mut values = Vec::with_capacity(rec.len());
            for (j, cell) in rec.iter().enumerate() {
                let v: f64 = cell
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(row, j + 1, format!("\"{cell}\" is not a number")))?;
                if !v.is_finite() {
                    return Err(parse_err(row, j + 1, format!("\"{cell}\" is not finite")));
                }
                values.push(v);
            }
            costs.push(values);
        }
        if costs.is_empty() {
            return Err(parse_err(2, 1, "no scenario rows".into()));
        }
        ScenarioSet::with_header(header, costs)
    }
}

pub fn load_scenarios(path: impl AsRef<Path>) -> Result<ScenarioSet> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    Ok(ScenarioSet::read_csv(std::io::BufReader::new(file))?.with_source(path.display().to_string()))
}

pub fn save_scenarios(path: impl AsRef<Path>, scenarios: &ScenarioSet) -> Result<()> {
    let file = std::fs::File::create(path)?;
    scenarios.write_csv(std::io::BufWriter::new(file))
}

/// Provenance written next to every generated scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorMeta {
    pub generator: String,
    pub rng: String,
    pub seed: u64,
    pub samples: usize,
    pub elements: usize,
    pub params: serde_json::Value,
}

impl GeneratorMeta {
    /// `scenarios.csv` -> `scenarios.meta.json`.
    pub fn path_for(csv_path: &Path) -> PathBuf {
        csv_path.with_extension("meta.json")
    }

    pub fn save_alongside(&self, csv_path: &Path) -> Result<PathBuf> {
        let path = Self::path_for(csv_path);
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}

pub(crate) fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Anything that draws i.i.d. cost vectors.
pub trait ScenarioSampler: Sync {
    /// Ground set size of each draw.
    fn n(&self) -> usize;
    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;

    fn sample(&self, rng: &mut ChaCha8Rng, count: usize) -> Result<ScenarioSet> {
        ScenarioSet::new((0..count).map(|_| self.draw(rng)).collect())
    }
}

/// Independent normal costs per element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IidGaussian {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl ScenarioSampler for IidGaussian {
    fn n(&self) -> usize {
        self.mean.len()
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.sd)
            .map(|(&m, &s)| Normal::new(m, s).expect("sd >= 0").sample(rng))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultihopParams {
    pub nodes: usize,
    pub bandwidth: f64,
    pub power: (f64, f64),
    pub noise: f64,
    pub distance: (f64, f64),
    pub samples: usize,
    pub seed: u64,
    pub source: usize,
    pub sink: usize,
}

impl Default for MultihopParams {
    fn default() -> Self {
        MultihopParams {
            nodes: 20,
            bandwidth: 1.0,
            power: (0.1, 0.2),
            noise: 1e-10,
            distance: (0.03, 0.07),
            samples: 100,
            seed: 0,
            source: 0,
            sink: 1,
        }
    }
}

/// Received signal-to-noise ratio for transmit power `p` (W), noise power
/// `noise` (W) and distance `d` (km).
pub fn snr(p: f64, noise: f64, d: f64) -> f64 {
    p / noise * 10f64.powf(-12.81 - 3.76 * d.log10())
}

/// Shannon capacity `B log2(1 + snr * xi)`.
pub fn shannon_capacity(bandwidth: f64, snr: f64, xi: f64) -> f64 {
    bandwidth * (snr * xi).ln_1p() / std::f64::consts::LN_2
}

/// Fixed per-link parameters of a multihop network; draws fade each link
/// with an independent unit exponential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultihopSampler {
    pub bandwidth: f64,
    pub snr: Vec<f64>,
}

impl ScenarioSampler for MultihopSampler {
    fn n(&self) -> usize {
        self.snr.len()
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.snr
            .iter()
            .map(|&s| {
                let u: f64 = rng.random();
                let xi = -(-u).ln_1p();
                shannon_capacity(self.bandwidth, s, xi)
            })
            .collect()
    }
}

fn positive_range(name: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(domain(format!("{name} range must satisfy 0 < lo <= hi")));
    }
    Ok(())
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Complete graph on `nodes` nodes with one path system between `source`
/// and `sink`, and `samples` capacity scenarios. Link parameters use stream 0,
/// fading draws stream 1.
pub fn gen_multihop(
    params: &MultihopParams,
) -> Result<(CombinatorialSystem, ScenarioSet, MultihopSampler, GeneratorMeta)> {
    positive_range("power", params.power)?;
    positive_range("distance", params.distance)?;
    if !(params.bandwidth > 0.0 && params.noise > 0.0) {
        return Err(domain("bandwidth and noise must be positive"));
    }
    if params.nodes < 2 || params.samples == 0 {
        return Err(domain("need at least two nodes and one sample"));
    }
    let edges: Vec<Edge> = (0..params.nodes)
        .flat_map(|u| (u + 1..params.nodes).map(move |v| Edge::new(u, v)))
        .collect();
    let system = CombinatorialSystem::path(params.nodes, edges, params.source, params.sink)?;
    let mut link_rng = rng(params.seed, 0);
    let snrs: Vec<f64> = (0..system.n())
        .map(|_| {
            let p = uniform(&mut link_rng, params.power);
            let d = uniform(&mut link_rng, params.distance);
            snr(p, params.noise, d)
        })
        .collect();
    let sampler = MultihopSampler {
        bandwidth: params.bandwidth,
        snr: snrs,
    };
    let scenarios = sampler
        .sample(&mut rng(params.seed, 1), params.samples)?
        .with_source("multihop");
    let meta = GeneratorMeta {
        generator: "multihop".into(),
        rng: RNG_NAME.into(),
        seed: params.seed,
        samples: params.samples,
        elements: system.n(),
        params: serde_json::to_value(params)?,
    };
    Ok((system, scenarios, sampler, meta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncGaussParams {
    pub mean: Vec<f64>,
    pub sd_base: Vec<f64>,
    pub alpha: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Per-cell normal `N(mean, alpha * sd_base)` truncated to `[0, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncGaussSampler {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

/// Rejection attempts per draw before giving up.
const REJECTION_CAP: usize = 100_000;

impl TruncGaussSampler {
    fn try_draw(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        self.mean
            .iter()
            .zip(&self.sd)
            .enumerate()
            .map(|(j, (&m, &s))| {
                if s == 0.0 {
                    return Ok(m.max(0.0));
                }
                let normal = Normal::new(m, s).map_err(|e| domain(e.to_string()))?;
                for _ in 0..REJECTION_CAP {
                    let x = normal.sample(rng);
                    if x >= 0.0 {
                        return Ok(x);
                    }
                }
                Err(Error::NumericalConvergence(format!(
                    "rejection sampling for cell {j} accepted nothing in {REJECTION_CAP} tries"
                )))
            })
            .collect()
    }
}

impl ScenarioSampler for TruncGaussSampler {
    fn n(&self) -> usize {
        self.mean.len()
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.try_draw(rng).expect("parameters validated by the generator")
    }

    fn sample(&self, rng: &mut ChaCha8Rng, count: usize) -> Result<ScenarioSet> {
        let rows = (0..count)
            .map(|_| self.try_draw(rng))
            .collect::<Result<Vec<_>>>()?;
        ScenarioSet::new(rows)
    }
}

/// `m x m` assignment system with truncated-normal cell costs (stream 0).
pub fn gen_matching_gaussian(
    params: &TruncGaussParams,
) -> Result<(CombinatorialSystem, ScenarioSet, TruncGaussSampler, GeneratorMeta)> {
    let cells = params.mean.len();
    if params.sd_base.len() != cells {
        return Err(Error::Dimension(format!(
            "{} means but {} standard deviations",
            cells,
            params.sd_base.len()
        )));
    }
    let m = (cells as f64).sqrt().round() as usize;
    if m == 0 || m * m != cells {
        return Err(Error::Dimension(format!("{cells} cells is not a square count")));
    }
    if !(params.alpha > 0.0) || params.samples == 0 {
        return Err(domain("alpha must be positive and samples at least 1"));
    }
    if params.sd_base.iter().any(|&s| !(s >= 0.0) || !s.is_finite())
        || params.mean.iter().any(|m| !m.is_finite())
    {
        return Err(domain("means must be finite and deviations nonnegative"));
    }
    let system = CombinatorialSystem::assignment(m)?;
    let sampler = TruncGaussSampler {
        mean: params.mean.clone(),
        sd: params.sd_base.iter().map(|s| s * params.alpha).collect(),
    };
    let scenarios = sampler
        .sample(&mut rng(params.seed, 0), params.samples)?
        .with_source("matching-gaussian");
    let meta = GeneratorMeta {
        generator: "matching-gaussian".into(),
        rng: RNG_NAME.into(),
        seed: params.seed,
        samples: params.samples,
        elements: cells,
        params: serde_json::to_value(params)?,
    };
    Ok((system, scenarios, sampler, meta))
}

//! Multi-start experiment campaigns.
//!
//! A campaign generates `num_instances` quadratic instances, sweeps each one's
//! Pareto front, runs every selected method from `num_starts` shared Gaussian
//! starts and scores the resulting point sets. Results are written as
//! `runs.csv`, `summary.json`, `front_<seed>.csv` and `plotdata_<method>.csv`.
//!
//! Configuration files are TOML with dotted keys:
//!
//! ```toml
//! methods = ["gmoba", "moml"]
//! problem.n = 100
//! problem.m = 2
//! problem.mu = 0.1
//! problem.num_instances = 5
//! problem.instance_seed = 1
//! starts.num_starts = 100
//! starts.start_seed = 7
//! front.num_weights = 500
//! gmoba.alpha = 0.0025
//! output.dir = "out/bi_objective"
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::direction::stationarity_residual;
use crate::error::{Error, Result};
use crate::gmoba::{exact_hypergradients, solve_from, RunRecord, SolverConfig, SolverState, Termination};
use crate::l2o::{l2o_then_gmoba, save_checkpoint, train, GradientMethod, L2OParams, LossKind, TrainConfig};
use crate::metrics::{dp, feasibility, MeanStd, MetricsReport, DEFAULT_PURITY_TAU};
use crate::moml::{moml_solve, MomlConfig};
use crate::pareto::{nondominated_filter, simplex_lattice, sweep_front, FrontOracle, ParetoFront};
use crate::problem::{generate_instance, BilevelProblem, ExactOracle, ProblemDims, QuadraticInstance, Vector};
use crate::rng::{derive_seed, seeded, standard_normal_vector};

/// Solvers a campaign can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "gmoba")]
    Gmoba,
    #[serde(rename = "moml")]
    Moml,
    #[serde(rename = "l2o-gmoba")]
    L2oGmoba,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Gmoba, Method::Moml, Method::L2oGmoba];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Gmoba => "gmoba",
            Method::Moml => "moml",
            Method::L2oGmoba => "l2o-gmoba",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?} (expected gmoba, moml or l2o-gmoba)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub n: usize,
    pub m: usize,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "one")]
    pub num_instances: usize,
    #[serde(default)]
    pub instance_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartsSection {
    #[serde(default = "one")]
    pub num_starts: usize,
    #[serde(default)]
    pub start_seed: u64,
}

impl Default for StartsSection {
    fn default() -> Self {
        Self { num_starts: 1, start_seed: 0 }
    }
}

/// Front resolution: points in total for `m = 2`, points per edge for `m ≥ 3`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontSection {
    pub num_weights: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    #[serde(default = "default_tau")]
    pub tau: f64,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self { tau: DEFAULT_PURITY_TAU }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Also write one training checkpoint per instance for `l2o-gmoba`.
    #[serde(default = "yes")]
    pub checkpoints: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), checkpoints: true }
    }
}

/// Training settings for `l2o-gmoba`; base steps come from the `gmoba` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct L2OSection {
    pub layers: usize,
    pub learn_rate: f64,
    pub train_iters: usize,
    pub loss: LossKind,
    pub gradient: GradientMethod,
    pub random_init: bool,
    pub gaussian_lower_start: bool,
}

impl Default for L2OSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            layers: t.layers,
            learn_rate: t.learn_rate,
            train_iters: t.train_iters,
            loss: t.loss,
            gradient: t.gradient,
            random_init: t.random_init,
            gaussian_lower_start: t.gaussian_lower_start,
        }
    }
}

/// A complete campaign description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub problem: ProblemSection,
    #[serde(default)]
    pub starts: StartsSection,
    #[serde(default)]
    pub gmoba: SolverConfig,
    #[serde(default)]
    pub moml: MomlConfig,
    #[serde(default)]
    pub l2o: L2OSection,
    #[serde(default)]
    pub front: FrontSection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_mu() -> f64 {
    0.1
}
fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn default_tau() -> f64 {
    DEFAULT_PURITY_TAU
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("methods must name at least one solver".into()));
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(Error::Config("methods must not repeat".into()));
        }
        ProblemDims::square(self.problem.n, self.problem.m)?;
        if !(self.problem.mu > 0.0) {
            return Err(Error::Config("problem.mu must be positive".into()));
        }
        if self.problem.num_instances == 0 || self.starts.num_starts == 0 {
            return Err(Error::Config("instance and start counts must be at least 1".into()));
        }
        if self.front.num_weights == Some(0) {
            return Err(Error::Config("front.num_weights must be at least 1".into()));
        }
        if !(self.metrics.tau >= 0.0) {
            return Err(Error::Config("metrics.tau must be nonnegative".into()));
        }
        self.gmoba.validate()?;
        self.moml.validate()?;
        self.train_config(0).validate()
    }

    /// Seed of instance `index`.
    pub fn instance_seed(&self, index: usize) -> u64 {
        self.problem.instance_seed.wrapping_add(index as u64)
    }

    /// Front resolution actually used.
    pub fn num_weights(&self) -> usize {
        self.front.num_weights.unwrap_or(if self.problem.m == 2 { 500 } else { 60 })
    }

    /// Training configuration for the instance with the given seed.
    pub fn train_config(&self, instance_seed: u64) -> TrainConfig {
        let l = &self.l2o;
        TrainConfig {
            steps: (&self.gmoba).into(),
            layers: l.layers,
            learn_rate: l.learn_rate,
            train_iters: l.train_iters,
            loss: l.loss,
            gradient: l.gradient,
            seed: derive_seed(&[instance_seed], "l2o-train"),
            random_init: l.random_init,
            gaussian_lower_start: l.gaussian_lower_start,
        }
    }

    /// Start `start_id` for an instance; shared by every method.
    pub fn start_point(&self, instance_seed: u64, start_id: usize) -> Vector {
        let seed = derive_seed(&[instance_seed, self.starts.start_seed, start_id as u64], "x0");
        standard_normal_vector(self.problem.n, &mut seeded(seed))
    }
}

/// One row of `runs.csv`, plus the final reduced objective values.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub method: Method,
    pub instance_seed: u64,
    pub start_id: usize,
    pub iters: usize,
    pub time_ms: f64,
    pub dp: f64,
    pub feasibility: f64,
    pub stationarity: f64,
    /// Termination reason, or `error` when the run failed outright.
    pub termination: String,
    /// `Φ_i(x)` at the final iterate.
    pub objectives: Vec<f64>,
}

impl RunRow {
    /// Runs that enter the metric sets.
    pub fn usable(&self) -> bool {
        self.termination != "error"
            && self.termination != Termination::Divergence.as_str()
            && self.objectives.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub instance_seed: u64,
    /// `None` when every run failed.
    pub report: Option<MetricsReport>,
    pub failures: usize,
    pub mean_time_ms: f64,
    pub mean_iters: f64,
    pub training_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub instances: Vec<InstanceSummary>,
    /// Mean ± sample std across instances of each per-instance quantity.
    pub aggregate: BTreeMap<String, MeanStd>,
}

/// Everything a campaign produced.
#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub config: ExperimentConfig,
    pub runs: Vec<RunRow>,
    pub fronts: Vec<ParetoFront>,
    pub methods: BTreeMap<Method, MethodSummary>,
    pub checkpoints: Vec<(u64, L2OParams, TrainConfig)>,
    pub wall_time: Duration,
}

fn final_row(
    method: Method,
    inst: &QuadraticInstance,
    front: &ParetoFront,
    start_id: usize,
    outcome: Result<RunRecord>,
) -> RunRow {
    let mut row = RunRow {
        method,
        instance_seed: inst.seed(),
        start_id,
        iters: 0,
        time_ms: 0.0,
        dp: f64::NAN,
        feasibility: f64::NAN,
        stationarity: f64::NAN,
        termination: "error".into(),
        objectives: vec![f64::NAN; inst.dims().m],
    };
    let Ok(rec) = outcome else { return row };
    row.iters = rec.iterations;
    let preamble = rec.preamble.map_or(Duration::ZERO, |p| p.wall_time);
    row.time_ms = (rec.parallel_time + preamble).as_secs_f64() * 1e3;
    row.termination = rec.termination.as_str().into();
    let x = &rec.state.x;
    if x.iter().all(|v| v.is_finite()) {
        let m = inst.dims().m;
        row.dp = dp(inst, front, x).unwrap_or(f64::NAN);
        row.feasibility = feasibility(inst, x, &rec.state.y).unwrap_or(f64::NAN);
        row.stationarity = exact_hypergradients(inst, m, x)
            .and_then(|g| stationarity_residual(&g))
            .unwrap_or(f64::NAN);
        row.objectives = (0..m).map(|i| inst.reduced_objective(i, x).unwrap_or(f64::NAN)).collect();
    }
    row
}

/// Per-instance metrics of one method's runs against the instance's front.
pub fn instance_report(rows: &[&RunRow], front: &ParetoFront, tau: f64) -> Result<Option<MetricsReport>> {
    let usable: Vec<&&RunRow> = rows.iter().filter(|r| r.usable()).collect();
    if usable.is_empty() {
        return Ok(None);
    }
    let objs: Vec<Vec<f64>> = usable.iter().map(|r| r.objectives.clone()).collect();
    let kept: Vec<Vec<f64>> = nondominated_filter(&objs).into_iter().map(|i| objs[i].clone()).collect();
    let dps: Vec<f64> = usable.iter().map(|r| r.dp).collect();
    let feas: Vec<f64> = usable.iter().map(|r| r.feasibility).collect();
    MetricsReport::compute(&kept, &front.objectives(), tau, &dps, &feas).map(Some)
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), a| (s + a, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn summarize(
    config: &ExperimentConfig,
    runs: &[RunRow],
    fronts: &[ParetoFront],
    training: &BTreeMap<u64, f64>,
) -> Result<BTreeMap<Method, MethodSummary>> {
    let mut out = BTreeMap::new();
    for &method in &config.methods {
        let mut instances = Vec::new();
        for front in fronts {
            let seed = front.instance_seed;
            let rows: Vec<&RunRow> = runs.iter().filter(|r| r.method == method && r.instance_seed == seed).collect();
            let usable = || rows.iter().filter(|r| r.usable());
            instances.push(InstanceSummary {
                instance_seed: seed,
                report: instance_report(&rows, front, config.metrics.tau)?,
                failures: rows.iter().filter(|r| !r.usable()).count(),
                mean_time_ms: mean(usable().map(|r| r.time_ms)),
                mean_iters: mean(usable().map(|r| r.iters as f64)),
                training_time_s: if method == Method::L2oGmoba { training.get(&seed).copied() } else { None },
            });
        }
        out.insert(method, MethodSummary { aggregate: aggregate(&instances), instances });
    }
    Ok(out)
}

fn aggregate(instances: &[InstanceSummary]) -> BTreeMap<String, MeanStd> {
    type Getter = fn(&InstanceSummary) -> Option<f64>;
    let fields: [(&str, Getter); 11] = [
        ("purity", |s| s.report.as_ref().map(|r| r.purity)),
        ("gd", |s| s.report.as_ref().map(|r| r.gd)),
        ("spread_gamma", |s| s.report.as_ref().and_then(|r| r.spread_gamma)),
        ("spread_delta", |s| s.report.as_ref().and_then(|r| r.spread_delta)),
        ("sp", |s| s.report.as_ref().and_then(|r| r.sp)),
        ("dp", |s| s.report.as_ref().map(|r| r.dp_mean)),
        ("feasibility", |s| s.report.as_ref().map(|r| r.feasibility_mean)),
        ("time_s", |s| Some(s.mean_time_ms / 1e3)),
        ("iters", |s| Some(s.mean_iters)),
        ("failures", |s| Some(s.failures as f64)),
        ("training_time_s", |s| s.training_time_s),
    ];
    fields
        .iter()
        .filter_map(|(name, get)| MeanStd::of(instances.iter().filter_map(get)).map(|ms| (name.to_string(), ms)))
        .collect()
}

/// Runs a whole campaign. `threads = None` uses the global rayon pool.
///
/// Per-run failures are recorded with termination `error`; only
/// configuration and front-construction errors abort the campaign.
pub fn run_campaign(config: &ExperimentConfig, threads: Option<usize>) -> Result<CampaignResult> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_in_pool(config))
}

fn run_in_pool(config: &ExperimentConfig) -> Result<CampaignResult> {
    let started = Instant::now();
    let dims = ProblemDims::square(config.problem.n, config.problem.m)?;
    let mut runs = Vec::new();
    let mut fronts = Vec::new();
    let mut checkpoints = Vec::new();
    let mut training = BTreeMap::new();
    for index in 0..config.problem.num_instances {
        let seed = config.instance_seed(index);
        let inst = generate_instance(dims, config.problem.mu, seed)?;
        let front = sweep_front(&inst, config.num_weights())?;
        let oracle = FrontOracle { instance: &inst, front: &front };

        let params = if config.methods.contains(&Method::L2oGmoba) {
            let tc = config.train_config(seed);
            let outcome = train(&inst, &tc)?;
            training.insert(seed, outcome.wall_time.as_secs_f64());
            checkpoints.push((seed, outcome.params.clone(), tc));
            Some(outcome.params)
        } else {
            None
        };

        let jobs: Vec<(Method, usize)> = config
            .methods
            .iter()
            .flat_map(|&m| (0..config.starts.num_starts).map(move |s| (m, s)))
            .collect();
        let rows: Vec<RunRow> = jobs
            .par_iter()
            .map(|&(method, start_id)| {
                let x0 = config.start_point(seed, start_id);
                let y0 = Vector::zeros(dims.n_y);
                let outcome = match method {
                    Method::Gmoba => SolverState::new(&inst, x0, y0, None)
                        .and_then(|s| solve_from(&inst, s, &config.gmoba, Some(&oracle))),
                    Method::Moml => moml_solve(&inst, x0, y0, &config.moml, Some(&oracle)),
                    Method::L2oGmoba => {
                        let v0 = vec![Vector::zeros(dims.n_y); dims.m];
                        let p = params.as_ref().expect("trained above");
                        l2o_then_gmoba(&inst, p, &x0, &y0, &v0, &config.gmoba, Some(&oracle))
                    }
                };
                final_row(method, &inst, &front, start_id, outcome)
            })
            .collect();
        runs.extend(rows);
        fronts.push(front);
    }
    let methods = summarize(config, &runs, &fronts, &training)?;
    Ok(CampaignResult { config: config.clone(), runs, fronts, methods, checkpoints, wall_time: started.elapsed() })
}

pub const RUNS_HEADER: [&str; 9] =
    ["method", "instance_seed", "start_id", "iters", "time_ms", "dp", "feasibility", "stationarity", "termination"];

/// Writes `runs.csv`.
pub fn write_runs<W: Write>(w: W, runs: &[RunRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RUNS_HEADER)?;
    for r in runs {
        out.write_record([
            r.method.as_str().to_string(),
            r.instance_seed.to_string(),
            r.start_id.to_string(),
            r.iters.to_string(),
            r.time_ms.to_string(),
            r.dp.to_string(),
            r.feasibility.to_string(),
            r.stationarity.to_string(),
            r.termination.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads `runs.csv`; objective vectors are left empty.
pub fn read_runs<R: std::io::Read>(r: R) -> Result<Vec<RunRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    if rdr.headers()?.iter().ne(RUNS_HEADER) {
        return Err(Error::InvalidArgument("runs.csv header does not match".into()));
    }
    let parse_f = |s: &str| s.parse::<f64>().map_err(|e| Error::InvalidArgument(format!("bad number {s:?}: {e}")));
    let parse_u = |s: &str| s.parse::<u64>().map_err(|e| Error::InvalidArgument(format!("bad integer {s:?}: {e}")));
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(RunRow {
                method: rec[0].parse()?,
                instance_seed: parse_u(&rec[1])?,
                start_id: parse_u(&rec[2])? as usize,
                iters: parse_u(&rec[3])? as usize,
                time_ms: parse_f(&rec[4])?,
                dp: parse_f(&rec[5])?,
                feasibility: parse_f(&rec[6])?,
                stationarity: parse_f(&rec[7])?,
                termination: rec[8].to_string(),
                objectives: Vec::new(),
            })
        })
        .collect()
}

/// Writes final reduced objective vectors of one method's usable runs.
pub fn write_plotdata<W: Write>(w: W, runs: &[RunRow], method: Method, m: usize) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["instance_seed".to_string(), "start_id".to_string()];
    header.extend((1..=m).map(|i| format!("phi_{i}")));
    out.write_record(&header)?;
    for r in runs.iter().filter(|r| r.method == method && r.usable()) {
        let mut rec = vec![r.instance_seed.to_string(), r.start_id.to_string()];
        rec.extend(r.objectives.iter().map(f64::to_string));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// `(instance_seed, start_id) → objective vector` from a plot-data file.
pub fn read_plotdata<R: std::io::Read>(r: R) -> Result<Vec<(u64, usize, Vec<f64>)>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            let bad = |e: String| Error::InvalidArgument(format!("plot data: {e}"));
            let seed = rec[0].parse::<u64>().map_err(|e| bad(e.to_string()))?;
            let start = rec[1].parse::<usize>().map_err(|e| bad(e.to_string()))?;
            let phi = rec.iter().skip(2).map(|s| s.parse::<f64>().map_err(|e| bad(e.to_string()))).collect::<Result<_>>()?;
            Ok((seed, start, phi))
        })
        .collect()
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    format: &'static str,
    config: &'a ExperimentConfig,
    num_weights: usize,
    wall_time_s: f64,
    notes: BTreeMap<&'static str, &'static str>,
    methods: BTreeMap<String, &'a MethodSummary>,
}

#[derive(Deserialize)]
struct SummaryHeader {
    config: ExperimentConfig,
}

fn summary_notes() -> BTreeMap<&'static str, &'static str> {
    BTreeMap::from([
        ("obtained_set", "non-dominated filter of exact reduced objective values at final iterates of non-diverged runs"),
        ("purity", "fraction of obtained points within metrics.tau (Euclidean) of a front point"),
        ("dp", "min distance of (x, y*(x)) to front decision points, divided by n"),
        ("time", "per-iteration maximum over the parallel updates, summed; l2o-gmoba adds its unrolled warm start"),
        ("aggregate", "mean and sample standard deviation across instances"),
    ])
}

/// Writes every campaign artifact into `dir`.
pub fn emit(result: &CampaignResult, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let m = result.config.problem.m;
    write_runs(BufWriter::new(File::create(dir.join("runs.csv"))?), &result.runs)?;
    for front in &result.fronts {
        front.write_csv(BufWriter::new(File::create(dir.join(format!("front_{}.csv", front.instance_seed)))?))?;
    }
    for &method in &result.config.methods {
        let f = File::create(dir.join(format!("plotdata_{method}.csv")))?;
        write_plotdata(BufWriter::new(f), &result.runs, method, m)?;
    }
    if result.config.output.checkpoints {
        for (seed, params, tc) in &result.checkpoints {
            save_checkpoint(dir.join(format!("l2o_{seed}.json")), params, tc)?;
        }
    }
    let summary = SummaryFile {
        format: "moblo-campaign-summary",
        config: &result.config,
        num_weights: result.config.num_weights(),
        wall_time_s: result.wall_time.as_secs_f64(),
        notes: summary_notes(),
        methods: result.methods.iter().map(|(k, v)| (k.as_str().to_string(), v)).collect(),
    };
    let mut w = BufWriter::new(File::create(dir.join("summary.json"))?);
    serde_json::to_writer_pretty(&mut w, &summary)?;
    w.flush()?;
    Ok(())
}

/// Recomputes per-instance metrics from the files `emit` wrote.
///
/// `tau` defaults to the value stored in `summary.json`.
pub fn recompute_metrics(dir: impl AsRef<Path>, tau: Option<f64>) -> Result<BTreeMap<Method, Vec<InstanceSummary>>> {
    let dir = dir.as_ref();
    let header: SummaryHeader = serde_json::from_reader(File::open(dir.join("summary.json"))?)?;
    let config = header.config;
    let tau = tau.unwrap_or(config.metrics.tau);
    let mut runs = read_runs(File::open(dir.join("runs.csv"))?)?;
    for &method in &config.methods {
        let plot = read_plotdata(File::open(dir.join(format!("plotdata_{method}.csv")))?)?;
        let lookup: BTreeMap<(u64, usize), Vec<f64>> = plot.into_iter().map(|(s, i, p)| ((s, i), p)).collect();
        for r in runs.iter_mut().filter(|r| r.method == method) {
            r.objectives = lookup.get(&(r.instance_seed, r.start_id)).cloned().unwrap_or_else(|| vec![f64::NAN; config.problem.m]);
        }
    }
    let mut fronts = Vec::new();
    for index in 0..config.problem.num_instances {
        let seed = config.instance_seed(index);
        fronts.push(ParetoFront::read_csv(File::open(dir.join(format!("front_{seed}.csv")))?, seed)?);
    }
    let mut cfg = config.clone();
    cfg.metrics.tau = tau;
    Ok(summarize(&cfg, &runs, &fronts, &BTreeMap::new())?
        .into_iter()
        .map(|(k, v)| (k, v.instances))
        .collect())
}

/// Number of lattice weights a front sweep evaluates before filtering.
pub fn lattice_size(m: usize, num_weights: usize) -> usize {
    simplex_lattice(m, num_weights).len()
}

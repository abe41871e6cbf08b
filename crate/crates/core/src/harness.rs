//! Config-driven experiments: replicated runs, trace files, summaries and
//! cross-algorithm comparisons.

use crate::baselines::{BatchAlgorithm, BatchOptimizer, MonteCarloConfig};
use crate::error::{Error, Result};
use crate::gaussian::GaussianParams;
use crate::incremental::{Ce2nd, Schedules, StopReason, StopRule};
use crate::linalg::Matrix;
use crate::objectives::{make_benchmark, make_triangle_example, ObjectiveFunction};
use crate::rng::RngState;
use crate::trace::{write_trace, TraceRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ce2nd,
    Mcce,
    Gmcce,
}

impl Algorithm {
    pub fn id(self) -> &'static str {
        match self {
            Algorithm::Ce2nd => "ce2nd",
            Algorithm::Mcce => "mcce",
            Algorithm::Gmcce => "gmcce",
        }
    }

    fn batch(self) -> Option<BatchAlgorithm> {
        match self {
            Algorithm::Ce2nd => None,
            Algorithm::Mcce => Some(BatchAlgorithm::Mcce),
            Algorithm::Gmcce => Some(BatchAlgorithm::Gmcce),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub name: String,
    /// Dimension; benchmarks fall back to their default.
    #[serde(default)]
    pub m: Option<usize>,
    /// Half-width of the triangle example.
    #[serde(default)]
    pub delta: Option<f64>,
}

impl ObjectiveSpec {
    pub fn build(&self) -> Result<ObjectiveFunction<f64>> {
        if self.name.eq_ignore_ascii_case("triangle") {
            if self.m.is_some_and(|m| m != 1) {
                return Err(Error::config("objective.m", "the triangle example is one-dimensional"));
            }
            let delta = self
                .delta
                .ok_or_else(|| Error::config("objective.delta", "required for the triangle example"))?;
            return make_triangle_example(delta);
        }
        if self.delta.is_some() {
            return Err(Error::config("objective.delta", "only used by the triangle example"));
        }
        let bench: crate::objectives::Benchmark = self.name.parse()?;
        make_benchmark(&self.name, self.m.unwrap_or(bench.default_dim()))
    }

    fn same_problem(&self, other: &Self) -> Result<bool> {
        let (a, b) = (self.build()?, other.build()?);
        Ok(a.id() == b.id() && a.dim() == b.dim() && self.delta == other.delta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeanSpec {
    Broadcast(f64),
    Vector(Vec<f64>),
}

/// `N(μ₀, q I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theta0Spec {
    pub mu0: MeanSpec,
    pub q: f64,
}

impl Theta0Spec {
    pub fn build(&self, m: usize) -> Result<GaussianParams<f64>> {
        if !(self.q > 0.0) || !self.q.is_finite() {
            return Err(Error::config("theta0.q", format!("must be positive, got {}", self.q)));
        }
        let mu = match &self.mu0 {
            MeanSpec::Broadcast(v) => vec![*v; m],
            MeanSpec::Vector(v) if v.len() == m => v.clone(),
            MeanSpec::Vector(v) => {
                return Err(Error::config(
                    "theta0.mu0",
                    format!("has {} entries, objective dimension is {m}", v.len()),
                ))
            }
        };
        GaussianParams::new(mu, Matrix::scaled_identity(m, self.q))
    }
}

/// Inline `θ₀` or a path (relative to the config file) to a fragment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Theta0Source {
    Inline(Theta0Spec),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    pub max_evals: u64,
    #[serde(default)]
    pub max_updates: Option<u64>,
    #[serde(default = "default_degeneracy")]
    pub degeneracy: f64,
}

fn default_degeneracy() -> f64 {
    1e-12
}

fn default_one() -> usize {
    1
}

fn default_stride() -> u64 {
    1
}

impl Budget {
    pub fn stop_rule(&self) -> StopRule {
        StopRule {
            max_evals: self.max_evals,
            max_updates: self.max_updates,
            degeneracy: self.degeneracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub algorithm: Algorithm,
    pub objective: ObjectiveSpec,
    #[serde(default)]
    pub schedules: Option<Schedules>,
    #[serde(default)]
    pub monte_carlo: Option<MonteCarloConfig>,
    pub theta0: Theta0Source,
    #[serde(default = "default_one")]
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub budget: Budget,
    #[serde(default = "default_stride")]
    pub stride: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Overrides the default `H* - 0.05 |H* - H(μ₀)|`.
    #[serde(default)]
    pub success_threshold: Option<f64>,
    /// Worker threads for replications; all cores when absent.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.algorithm.id().to_string())
    }

    /// Inline `θ₀`; fragments must have been resolved by [`load_config`].
    pub fn theta0_spec(&self) -> Result<&Theta0Spec> {
        match &self.theta0 {
            Theta0Source::Inline(s) => Ok(s),
            Theta0Source::File(p) => Err(Error::config(
                "theta0",
                format!("fragment {} was not resolved", p.display()),
            )),
        }
    }

    /// Hard checks; returns soft warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.replications < 1 {
            return Err(Error::config("replications", "must be at least 1"));
        }
        if self.stride < 1 {
            return Err(Error::config("stride", "must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers", "must be at least 1"));
        }
        if !(self.budget.degeneracy >= 0.0) {
            return Err(Error::config("budget.degeneracy", "must be non-negative"));
        }
        let f = self.objective.build()?;
        self.theta0_spec()?.build(f.dim())?;
        let mut warnings = Vec::new();
        match self.algorithm.batch() {
            None => {
                let s = self
                    .schedules
                    .as_ref()
                    .ok_or_else(|| Error::config("schedules", "required for ce2nd"))?;
                if self.monte_carlo.is_some() {
                    return Err(Error::config("monte_carlo", "not used by ce2nd"));
                }
                warnings.extend(s.validate()?);
            }
            Some(b) => {
                let mc = self
                    .monte_carlo
                    .as_ref()
                    .ok_or_else(|| Error::config("monte_carlo", format!("required for {}", b.id())))?;
                if self.schedules.is_some() {
                    return Err(Error::config("schedules", format!("not used by {}", b.id())));
                }
                mc.validate(b)?;
                if let Some(w) = mc.alpha.as_ref().and_then(|a| a.robbins_monro_warning("alpha")) {
                    if b == BatchAlgorithm::Gmcce {
                        warnings.push(w);
                    }
                }
            }
        }
        Ok(warnings)
    }

    /// Success threshold: explicit, or `H* - 0.05 |H* - H(μ₀)|` when the
    /// optimum is known.
    pub fn target(&self) -> Result<Option<f64>> {
        if let Some(t) = self.success_threshold {
            return Ok(Some(t));
        }
        let f = self.objective.build()?;
        let theta0 = self.theta0_spec()?.build(f.dim())?;
        Ok(match f.known_optimum() {
            Some(opt) => {
                let h0 = f.peek(theta0.mu())?;
                Some(opt.value - 0.05 * (opt.value - h0).abs())
            }
            None => None,
        })
    }
}

/// Turns a serde error into a key-naming config error when possible.
fn parse_error(e: serde_json::Error, origin: &Path) -> Error {
    let msg = e.to_string();
    for prefix in ["missing field `", "unknown field `"] {
        if let Some(rest) = msg.strip_prefix(prefix) {
            if let Some(end) = rest.find('`') {
                return Error::config(&rest[..end], format!("{msg} in {}", origin.display()));
            }
        }
    }
    Error::Parse(format!("{}: {msg}", origin.display()))
}

pub fn parse_config(text: &str, origin: &Path) -> Result<RunConfig> {
    serde_json::from_str(text).map_err(|e| parse_error(e, origin))
}

pub fn load_theta0_fragment(path: &Path) -> Result<Theta0Spec> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| parse_error(e, path))
}

/// A validated config plus the non-fatal warnings it raised.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub warnings: Vec<String>,
}

/// Reads, resolves `θ₀` fragments, validates. Warnings are also logged.
pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = fs::read_to_string(path)?;
    let mut config = parse_config(&text, path)?;
    if let Theta0Source::File(rel) = &config.theta0 {
        let frag = path.parent().unwrap_or(Path::new(".")).join(rel);
        config.theta0 = Theta0Source::Inline(load_theta0_fragment(&frag)?);
    }
    if config.name.is_none() {
        config.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    }
    let warnings = config.validate()?;
    for w in &warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(LoadedConfig { config, warnings })
}

/// Outcome of one replication.
#[derive(Debug, Clone)]
pub struct ReplicationResult {
    pub index: usize,
    pub seed: u64,
    /// Starts with the `t = 0` record of the initial model.
    pub trace: Vec<TraceRecord>,
    pub stop: StopReason,
    pub error: Option<String>,
    pub final_mu: Vec<f64>,
    pub final_sigma: Matrix<f64>,
    pub n_evals: u64,
    pub n_updates: u64,
    pub wall_clock_s: f64,
}

impl ReplicationResult {
    pub fn final_h(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.h_of_mu)
    }

    /// Best recorded `H(μ)` (resolution follows the trace stride).
    pub fn best_h(&self) -> f64 {
        self.trace
            .iter()
            .map(|r| r.h_of_mu)
            .filter(|v| !v.is_nan())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Evaluations spent when `H(μ)` was first recorded at or above `target`.
    pub fn evals_to_target(&self, target: f64) -> Option<u64> {
        self.trace.iter().find(|r| r.h_of_mu >= target).map(|r| r.n_evals)
    }
}

pub fn stop_id(s: StopReason) -> &'static str {
    match s {
        StopReason::MaxEvals => "max_evals",
        StopReason::MaxUpdates => "max_updates",
        StopReason::Degenerate => "degenerate",
        StopReason::Diverged => "diverged",
    }
}

fn initial_record(f: &ObjectiveFunction<f64>, theta0: &GaussianParams<f64>, algorithm: Algorithm) -> TraceRecord {
    let incremental = algorithm == Algorithm::Ce2nd;
    TraceRecord {
        t: 0,
        n_evals: 0,
        n_updates: 0,
        h_of_mu: f.peek(theta0.mu()).unwrap_or(f64::NAN),
        gamma: if incremental { 0.0 } else { f64::NEG_INFINITY },
        gamma_prev: incremental.then_some(f64::NEG_INFINITY),
        tcmp: incremental.then_some(0.0),
        sigma_trace: theta0.sigma().trace(),
    }
}

/// Runs replication `index` of `config`; seed is `base_seed + index`.
pub fn run_replication(config: &RunConfig, index: usize) -> Result<ReplicationResult> {
    let mut f = config.objective.build()?;
    let theta0 = config.theta0_spec()?.build(f.dim())?;
    let seed = config.base_seed.wrapping_add(index as u64);
    let rng = RngState::new(seed, 0);
    let stop = config.budget.stop_rule();
    let mut trace = vec![initial_record(&f, &theta0, config.algorithm)];
    let started = Instant::now();
    let (stop_reason, error, theta, n_updates) = match config.algorithm.batch() {
        None => {
            let schedules = config.schedules.clone().expect("validated");
            let mut opt = Ce2nd::new(schedules, theta0, rng)?;
            let out = opt.run(&mut f, &stop, config.stride);
            trace.extend(out.trace);
            (out.stop, out.error, out.final_state.theta, out.final_state.n_updates)
        }
        Some(b) => {
            let mc = config.monte_carlo.clone().expect("validated");
            let mut opt = BatchOptimizer::new(b, mc, theta0, rng)?;
            let out = opt.run(&mut f, &stop, config.stride);
            trace.extend(out.trace);
            (out.stop, out.error, out.final_state.theta, out.final_state.n_updates)
        }
    };
    Ok(ReplicationResult {
        index,
        seed,
        trace,
        stop: stop_reason,
        error: error.map(|e| e.to_string()),
        final_mu: theta.mu().to_vec(),
        final_sigma: theta.sigma().clone(),
        n_evals: f.evaluations(),
        n_updates,
        wall_clock_s: started.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub replications: usize,
    pub mean_final_h: f64,
    pub median_final_h: f64,
    pub mean_best_h: f64,
    pub median_best_h: f64,
    pub success_fraction: Option<f64>,
    pub diverged: usize,
    pub total_evals: u64,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: RunConfig,
    pub target: Option<f64>,
    pub replications: Vec<ReplicationResult>,
}

impl ExperimentResult {
    pub fn is_success(&self, rep: &ReplicationResult) -> Option<bool> {
        self.target.map(|t| rep.error.is_none() && rep.final_h() >= t)
    }

    pub fn aggregate(&self) -> Aggregate {
        let finals: Vec<f64> = self.replications.iter().map(|r| r.final_h()).collect();
        let bests: Vec<f64> = self.replications.iter().map(|r| r.best_h()).collect();
        let n = self.replications.len();
        let success_fraction = self.target.map(|_| {
            let ok = self
                .replications
                .iter()
                .filter(|r| self.is_success(r) == Some(true))
                .count();
            ok as f64 / n as f64
        });
        Aggregate {
            replications: n,
            mean_final_h: mean(&finals),
            median_final_h: median(&finals),
            mean_best_h: mean(&bests),
            median_best_h: median(&bests),
            success_fraction,
            diverged: self.replications.iter().filter(|r| r.error.is_some()).count(),
            total_evals: self.replications.iter().map(|r| r.n_evals).sum(),
        }
    }
}

fn in_pool<R: Send>(workers: Option<usize>, job: impl FnOnce() -> R + Send) -> Result<R> {
    match workers {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// Runs every replication (concurrently) and collects results in index order.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let target = config.target()?;
    let reps = in_pool(config.workers, || {
        (0..config.replications)
            .into_par_iter()
            .map(|k| run_replication(config, k))
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(ExperimentResult {
        config: config.clone(),
        target,
        replications: reps,
    })
}

pub const SUMMARY_HEADER: [&str; 10] = [
    "replication",
    "seed",
    "stop",
    "final_H_of_mu",
    "best_H_of_mu",
    "n_evals",
    "n_updates",
    "success",
    "evals_to_target",
    "error",
];

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fmt_f(v: f64) -> String {
    format!("{v:?}")
}

/// Writes `rep_NNN.csv` per replication, `summary.csv`, `aggregate.csv`
/// (all deterministic) and `timing.csv` (wall-clock, not deterministic).
pub fn write_experiment(result: &ExperimentResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for rep in &result.replications {
        let file = fs::File::create(dir.join(format!("rep_{:03}.csv", rep.index)))?;
        write_trace(std::io::BufWriter::new(file), &rep.trace).map_err(csv_err)?;
    }

    let mut w = csv::Writer::from_path(dir.join("summary.csv")).map_err(csv_err)?;
    w.write_record(SUMMARY_HEADER).map_err(csv_err)?;
    for rep in &result.replications {
        w.write_record([
            rep.index.to_string(),
            rep.seed.to_string(),
            stop_id(rep.stop).to_string(),
            fmt_f(rep.final_h()),
            fmt_f(rep.best_h()),
            rep.n_evals.to_string(),
            rep.n_updates.to_string(),
            fmt_opt(result.is_success(rep)),
            fmt_opt(result.target.and_then(|t| rep.evals_to_target(t))),
            rep.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;

    let a = result.aggregate();
    let mut w = csv::Writer::from_path(dir.join("aggregate.csv")).map_err(csv_err)?;
    w.write_record([
        "config",
        "algorithm",
        "replications",
        "target",
        "mean_final_H_of_mu",
        "median_final_H_of_mu",
        "mean_best_H_of_mu",
        "median_best_H_of_mu",
        "success_fraction",
        "diverged",
        "total_evals",
    ])
    .map_err(csv_err)?;
    w.write_record([
        result.config.name(),
        result.config.algorithm.id().to_string(),
        a.replications.to_string(),
        fmt_opt(result.target.map(fmt_f)),
        fmt_f(a.mean_final_h),
        fmt_f(a.median_final_h),
        fmt_f(a.mean_best_h),
        fmt_f(a.median_best_h),
        fmt_opt(a.success_fraction.map(fmt_f)),
        a.diverged.to_string(),
        a.total_evals.to_string(),
    ])
    .map_err(csv_err)?;
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("timing.csv")).map_err(csv_err)?;
    w.write_record(["replication", "wall_clock_s"]).map_err(csv_err)?;
    for rep in &result.replications {
        w.write_record([rep.index.to_string(), fmt_f(rep.wall_clock_s)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("csv: {other:?}")),
    }
}

/// Per-config results of a comparison.
#[derive(Debug, Clone)]
pub struct CompareEntry {
    pub result: ExperimentResult,
    pub evals_to_target: Vec<Option<u64>>,
    /// `None` when fewer than half of the replications reached the target.
    pub median_evals_to_target: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub budget: u64,
    pub target: f64,
    /// Sorted by median evaluations-to-target, unreached last.
    pub entries: Vec<CompareEntry>,
}

/// Median with unreached replications counted as `+∞`.
pub fn median_hitting(hits: &[Option<u64>]) -> Option<f64> {
    let v: Vec<f64> = hits
        .iter()
        .map(|h| h.map_or(f64::INFINITY, |n| n as f64))
        .collect();
    let m = median(&v);
    m.is_finite().then_some(m)
}

/// Runs every config under a common evaluation budget and ranks them by
/// evaluations needed to reach `target` (default: the first config's
/// success threshold).
pub fn compare(configs: &[RunConfig], budget: u64, target: Option<f64>) -> Result<ComparisonReport> {
    let first = configs
        .first()
        .ok_or_else(|| Error::InvalidInput("compare needs at least one config".into()))?;
    for c in &configs[1..] {
        if !first.objective.same_problem(&c.objective)? {
            return Err(Error::MismatchedObjectives(format!(
                "{} targets {:?}, {} targets {:?}",
                first.name(),
                first.objective,
                c.name(),
                c.objective
            )));
        }
    }
    let target = match target {
        Some(t) => t,
        None => first.target()?.ok_or_else(|| {
            Error::InvalidInput("objective has no known optimum; pass an explicit target".into())
        })?,
    };
    let mut entries = Vec::with_capacity(configs.len());
    for c in configs {
        let mut c = c.clone();
        c.budget.max_evals = budget;
        let result = run_experiment(&c)?;
        let evals_to_target: Vec<Option<u64>> = result
            .replications
            .iter()
            .map(|r| r.evals_to_target(target))
            .collect();
        let median_evals_to_target = median_hitting(&evals_to_target);
        entries.push(CompareEntry {
            result,
            evals_to_target,
            median_evals_to_target,
        });
    }
    entries.sort_by(|a, b| {
        let key = |e: &CompareEntry| e.median_evals_to_target.unwrap_or(f64::INFINITY);
        key(a).total_cmp(&key(b))
    });
    Ok(ComparisonReport {
        budget,
        target,
        entries,
    })
}

/// `traces.csv` (long format), `cumulative_samples.csv` (evaluations to
/// target per replication) and `ranking.csv`.
pub fn write_comparison(report: &ComparisonReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("traces.csv")).map_err(csv_err)?;
    w.write_record(["config", "algorithm", "replication", "n_evals", "H_of_mu"])
        .map_err(csv_err)?;
    for e in &report.entries {
        let name = e.result.config.name();
        let alg = e.result.config.algorithm.id();
        for rep in &e.result.replications {
            for r in &rep.trace {
                w.write_record([
                    name.clone(),
                    alg.to_string(),
                    rep.index.to_string(),
                    r.n_evals.to_string(),
                    fmt_f(r.h_of_mu),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("cumulative_samples.csv")).map_err(csv_err)?;
    w.write_record(["config", "algorithm", "replication", "target", "evals_to_target", "total_evals"])
        .map_err(csv_err)?;
    for e in &report.entries {
        for (rep, hit) in e.result.replications.iter().zip(&e.evals_to_target) {
            w.write_record([
                e.result.config.name(),
                e.result.config.algorithm.id().to_string(),
                rep.index.to_string(),
                fmt_f(report.target),
                fmt_opt(*hit),
                rep.n_evals.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("ranking.csv")).map_err(csv_err)?;
    w.write_record(["rank", "config", "algorithm", "median_evals_to_target", "reached", "replications"])
        .map_err(csv_err)?;
    for (i, e) in report.entries.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            e.result.config.name(),
            e.result.config.algorithm.id().to_string(),
            fmt_opt(e.median_evals_to_target.map(fmt_f)),
            e.evals_to_target.iter().filter(|h| h.is_some()).count().to_string(),
            e.evals_to_target.len().to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn default_output_dir(config: &RunConfig) -> PathBuf {
    config
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(config.name()))
}

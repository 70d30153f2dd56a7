//! Experiment orchestration behind the CLI: config parsing, the per-cell
//! Monte-Carlo runner, and CSV/JSON writers.
//!
//! Config files are flat `key = value` lines (`#` starts a comment). Component
//! keys select registry entries (`loss`, `set`, `population`); dotted keys
//! (`set.radius`, `population.noise_rate`, `loss.label_bound`) are forwarded
//! to the chosen factory.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::{set_registry, FeasibleSet};
use crate::losses::{draw_dataset, generator_registry, loss_registry, DataPoint, LossOracle, PopulationSpec};
use crate::optimizer::{
    baseline_minimizer, empirical_risk, estimate_regret, private_sgd, Baseline, RiskEstimate, RunConfig,
    RunSummary, RunTrace,
};
use crate::privacy::{audit_single_step, end_to_end, max_epsilon, AuditConfig, AuditResult, EndToEndParams, PrivacyReport};
use crate::registry::{parse_list, Params};
use crate::rng;
use crate::sampler::{simulate_tau, TauStats};

pub const OUTPUT_DIR_ENV: &str = "DPSCO_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "results";

pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const REGIME: i32 = 3;
    pub const AUDIT: i32 = 4;
    pub const OVERRUN: i32 = 5;
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => exit::CONFIG,
        Error::Domain(_) | Error::Precondition(_) => exit::REGIME,
        Error::Overrun { .. } => exit::OVERRUN,
        Error::Logic(_) | Error::Io(_) | Error::Json(_) => exit::IO,
    }
}

pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

/// Parses `key = value` lines into [`Params`].
pub fn parse_config(text: &str) -> Result<Params> {
    let mut p = Params::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("config line {}: expected key = value, got {raw:?}", i + 1)))?;
        p.insert(k.trim(), v.trim());
    }
    Ok(p)
}

/// Per-cell privacy level: a number, or `max` for `1/(2 sqrt n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonChoice {
    Value(f64),
    Max,
}

impl EpsilonChoice {
    pub fn resolve(&self, n: usize) -> f64 {
        match *self {
            EpsilonChoice::Value(e) => e,
            EpsilonChoice::Max => max_epsilon(n),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub name: String,
    pub population: PopulationSpec,
    pub loss: LossOracle,
    pub set: FeasibleSet,
    pub n_values: Vec<usize>,
    pub epsilon_values: Vec<EpsilonChoice>,
    pub delta: f64,
    pub delta_prime: f64,
    pub repeats: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub eval_samples: usize,
    pub baseline_steps: usize,
    /// Replaces the calibrated noise scale (and the step size with it).
    pub sigma_override: Option<f64>,
    pub max_steps_factor: usize,
    /// Write the step trace of the first run in every cell.
    pub dump_traces: bool,
    pub params: Params,
}

fn field<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config(m) if !m.starts_with(name) => Error::Config(format!("{name}: {m}")),
        other => other,
    })
}

fn sub_params(p: &Params, prefix: &str, dimension: usize) -> Params {
    let mut out = Params::new().with("dimension", dimension);
    let dotted = format!("{prefix}.");
    for (k, v) in p.iter() {
        if let Some(rest) = k.strip_prefix(&dotted) {
            out.insert(rest, v);
        }
    }
    out
}

impl ExperimentSpec {
    /// Builds and validates a spec from resolved parameters.
    pub fn from_params(p: &Params) -> Result<Self> {
        let dimension: usize = field("dimension", p.require("dimension"))?;
        if dimension == 0 {
            return Err(Error::Config("dimension: must be positive".into()));
        }
        let seed: u64 = field("seed", p.require("seed"))?;
        let feature_bound: f64 = field("feature_bound", p.get_or("feature_bound", 1.0))?;

        let generator_name = p.raw("population").unwrap_or("linear-margin");
        let generator = field(
            "population",
            generator_registry().build(generator_name, &sub_params(p, "population", dimension)),
        )?;
        let population_seed: u64 = field("population.seed", p.get_or("population.seed", seed))?;
        let population = field(
            "population",
            PopulationSpec::new(generator, dimension, feature_bound, population_seed),
        )?;
        let loss = field(
            "loss",
            loss_registry().build(p.raw("loss").unwrap_or("hinge"), &sub_params(p, "loss", dimension)),
        )?;
        let set = field(
            "set",
            set_registry().build(p.raw("set").unwrap_or("l2ball"), &sub_params(p, "set", dimension)),
        )?;
        if set.dimension() != dimension {
            return Err(Error::Config(format!("set: dimension {} != {dimension}", set.dimension())));
        }

        let n_values: Vec<usize> = field("n_values", parse_list("n_values", p.raw("n_values").unwrap_or("")))?;
        let epsilon_values = p
            .raw("epsilon_values")
            .unwrap_or("max")
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| match s {
                "max" => Ok(EpsilonChoice::Max),
                v => v
                    .parse()
                    .map(EpsilonChoice::Value)
                    .map_err(|_| Error::Config(format!("epsilon_values: cannot parse {v:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;

        let spec = Self {
            name: p.raw("name").unwrap_or("experiment").to_string(),
            population,
            loss,
            set,
            n_values,
            epsilon_values,
            delta: field("delta", p.get_or("delta", 1e-6))?,
            delta_prime: field("delta_prime", p.get_or("delta_prime", 1e-6))?,
            repeats: field("repeats", p.get_or("repeats", 1))?,
            seed,
            output_dir: p.raw("output_dir").map(PathBuf::from).unwrap_or_else(default_output_dir),
            eval_samples: field("eval_samples", p.get_or("eval_samples", 20_000))?,
            baseline_steps: field("baseline_steps", p.get_or("baseline_steps", 100_000))?,
            sigma_override: field("sigma_override", p.get("sigma_override"))?,
            max_steps_factor: field("max_steps_factor", p.get_or("max_steps_factor", 4))?,
            dump_traces: field("dump_traces", p.get_or("dump_traces", false))?,
            params: p.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |f: &str, m: String| Err(Error::Config(format!("{f}: {m}")));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad("name", format!("{:?} is not a plain directory name", self.name));
        }
        if self.n_values.is_empty() {
            return bad("n_values", "at least one n is required".into());
        }
        if let Some(n) = self.n_values.iter().find(|&&n| n < 16) {
            return bad("n_values", format!("n = {n} < 16"));
        }
        if self.epsilon_values.is_empty() {
            return bad("epsilon_values", "at least one epsilon is required".into());
        }
        for &n in &self.n_values {
            for e in &self.epsilon_values {
                let eps = e.resolve(n);
                if !(eps > 0.0 && eps <= max_epsilon(n)) {
                    return bad(
                        "epsilon_values",
                        format!("epsilon = {eps} outside (0, 1/(2 sqrt n)] = (0, {}] for n = {n}", max_epsilon(n)),
                    );
                }
            }
        }
        for (f, v) in [("delta", self.delta), ("delta_prime", self.delta_prime)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(f, format!("{v} outside (0, 1)"));
            }
        }
        if self.repeats == 0 {
            return bad("repeats", "must be at least 1".into());
        }
        if self.eval_samples == 0 {
            return bad("eval_samples", "must be at least 1".into());
        }
        if let Some(s) = self.sigma_override {
            if !(s >= 0.0 && s.is_finite()) {
                return bad("sigma_override", format!("{s} must be nonnegative"));
            }
        }
        if self.max_steps_factor == 0 {
            return bad("max_steps_factor", "must be at least 1".into());
        }
        field("loss", self.lipschitz().map(|_| ()))
    }

    pub fn lipschitz(&self) -> Result<f64> {
        self.loss.lipschitz(self.population.feature_bound, Some(self.set.as_ref()))
    }

    /// Fully resolved configuration, embedded in every output file.
    pub fn describe(&self) -> Value {
        json!({
            "name": self.name,
            "seed": self.seed,
            "population": self.population.describe(),
            "loss": self.loss.describe(),
            "set": self.set.describe(),
            "lipschitz": self.lipschitz().ok(),
            "diameter": self.set.diameter(),
            "n_values": self.n_values,
            "epsilon_values": self.epsilon_values,
            "delta": self.delta,
            "delta_prime": self.delta_prime,
            "repeats": self.repeats,
            "eval_samples": self.eval_samples,
            "baseline_steps": self.baseline_steps,
            "sigma_override": self.sigma_override,
            "max_steps_factor": self.max_steps_factor,
        })
    }

    pub fn cell_dir(&self) -> PathBuf {
        self.output_dir.join(&self.name)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub n: usize,
    pub epsilon: f64,
    pub sigma: f64,
    pub eta: f64,
    pub runs: usize,
    pub overruns: usize,
    pub degraded: bool,
    pub mean_tau: f64,
    pub mean_regret: f64,
    pub regret_bound: f64,
    pub mean_excess_risk: f64,
    pub run_stderr: f64,
    pub oracle_error: f64,
    /// `run_stderr + oracle_error`
    pub stderr: f64,
    /// `(5/2) D (L + sigma sqrt d) / sqrt n`
    pub bound_value: f64,
    pub bound_satisfied: bool,
    /// `mean_excess_risk sqrt(n) / (D (L + sigma sqrt d))`, to set beside 5/2.
    pub fitted_constant: f64,
    pub risk_bound: f64,
    pub privacy_report: PrivacyReport,
    pub first_run: Option<RunSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub config: Value,
    pub baseline: Baseline,
    pub baseline_risk: RiskEstimate,
    pub cells: Vec<CellResult>,
}

struct RunOutcome {
    tau: usize,
    regret: f64,
    excess: f64,
    summary: RunSummary,
    trace: RunTrace,
    config: RunConfig,
}

/// Runs every `(n, epsilon)` cell of the experiment. Repeats execute in
/// parallel on derived RNG streams; results are reduced in repeat order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<(ExperimentResult, Vec<Option<(RunConfig, RunTrace)>>)> {
    spec.validate()?;
    let lip = spec.lipschitz()?;
    let diam = spec.set.diameter();
    let d = spec.set.dimension();

    let baseline = baseline_minimizer(&spec.population, &spec.loss, &spec.set, spec.baseline_steps)?;
    let eval: Vec<DataPoint> =
        draw_dataset(&spec.population, spec.eval_samples, &mut rng::stream(spec.seed, &[0xE7A1]))?;
    let baseline_risk = empirical_risk(&baseline.w, &eval, &spec.loss);

    let cells: Vec<(usize, f64)> = spec
        .n_values
        .iter()
        .flat_map(|&n| spec.epsilon_values.iter().map(move |e| (n, e.resolve(n))))
        .collect();

    let mut results = Vec::with_capacity(cells.len());
    let mut traces = Vec::with_capacity(cells.len());
    for (ci, &(n, epsilon)) in cells.iter().enumerate() {
        let e2e = end_to_end(&EndToEndParams {
            n,
            epsilon,
            delta: spec.delta,
            delta_prime: spec.delta_prime,
            lipschitz: lip,
            diameter: diam,
            dimension: d,
        })?;
        let (sigma, eta) = match spec.sigma_override {
            Some(s) => (s, diam / ((n as f64).sqrt() * (lip + s * (d as f64).sqrt()))),
            None => (e2e.sigma, e2e.eta),
        };

        let outcomes: Vec<Result<RunOutcome>> = (0..spec.repeats)
            .into_par_iter()
            .map(|r| {
                let path = [ci as u64, r as u64];
                let data = draw_dataset(&spec.population, n, &mut rng::stream(spec.seed, &[path[0], path[1], 0]))?;
                let mut cfg = RunConfig::new(n, eta, sigma, spec.set.clone(), spec.loss.clone());
                cfg.seed = rng::derive_seed(spec.seed, &[path[0], path[1], 1]);
                cfg.max_steps = spec.max_steps_factor * n;
                let trace = private_sgd(&cfg, &data, &mut rng::stream(cfg.seed, &[]))?;
                let regret = estimate_regret(&trace, &data, &baseline.w, &cfg)?;
                let risk = empirical_risk(&trace.output, &eval, &spec.loss);
                let excess = risk.mean - baseline_risk.mean;
                let summary = RunSummary {
                    config: cfg.describe(),
                    tau: trace.tau,
                    output: trace.output.clone(),
                    regret,
                    risk,
                    excess_risk: excess,
                };
                Ok(RunOutcome { tau: trace.tau, regret, excess, summary, trace, config: cfg })
            })
            .collect();

        let mut ok = Vec::new();
        let mut overruns = 0;
        for o in outcomes {
            match o {
                Ok(run) => ok.push(run),
                Err(Error::Overrun { .. }) => overruns += 1,
                Err(e) => return Err(e),
            }
        }
        let k = ok.len() as f64;
        let excess = RiskEstimate::from_values(ok.iter().map(|r| r.excess));
        let mean_tau = ok.iter().map(|r| r.tau as f64).sum::<f64>() / k;
        let mean_regret = ok.iter().map(|r| r.regret).sum::<f64>() / k;
        let scale = diam * (lip + sigma * (d as f64).sqrt());
        let bound_value = 2.5 * scale / (n as f64).sqrt();
        let stderr = excess.stderr + baseline.oracle_error;
        let first = ok.into_iter().next();
        results.push(CellResult {
            n,
            epsilon,
            sigma,
            eta,
            runs: spec.repeats,
            overruns,
            degraded: overruns as f64 > 0.01 * spec.repeats as f64,
            mean_tau,
            mean_regret,
            regret_bound: 2.0 * scale * (n as f64).sqrt(),
            mean_excess_risk: excess.mean,
            run_stderr: excess.stderr,
            oracle_error: baseline.oracle_error,
            stderr,
            bound_value,
            bound_satisfied: excess.mean <= bound_value + 3.0 * stderr,
            fitted_constant: excess.mean * (n as f64).sqrt() / scale,
            risk_bound: e2e.risk_bound,
            privacy_report: e2e.report,
            first_run: first.as_ref().map(|r| r.summary.clone()),
        });
        traces.push(first.map(|r| (r.config, r.trace)));
    }

    Ok((ExperimentResult { config: spec.describe(), baseline, baseline_risk, cells: results }, traces))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn g(x: f64) -> String {
    format!("{x:.16e}")
}

pub const CELLS_HEADER: &str = "n,epsilon,sigma,eta,runs,overruns,degraded,mean_tau,mean_regret,regret_bound,\
mean_excess_risk,run_stderr,oracle_error,stderr,bound_value,bound_satisfied,fitted_constant,risk_bound,\
privacy_epsilon,privacy_delta";

pub fn write_cells_csv<W: Write>(mut out: W, result: &ExperimentResult) -> Result<()> {
    writeln!(out, "# {}", serde_json::to_string(&result.config)?)?;
    writeln!(out, "{CELLS_HEADER}")?;
    for c in &result.cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.n,
            g(c.epsilon),
            g(c.sigma),
            g(c.eta),
            c.runs,
            c.overruns,
            c.degraded,
            g(c.mean_tau),
            g(c.mean_regret),
            g(c.regret_bound),
            g(c.mean_excess_risk),
            g(c.run_stderr),
            g(c.oracle_error),
            g(c.stderr),
            g(c.bound_value),
            c.bound_satisfied,
            g(c.fitted_constant),
            g(c.risk_bound),
            g(c.privacy_report.epsilon),
            g(c.privacy_report.delta_total),
        )?;
    }
    Ok(())
}

/// `cmd run`: executes the experiment and writes `cells.csv`, `summary.json`
/// (and per-cell traces when requested) under `<output_dir>/<name>/`.
pub fn cmd_run(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let (result, traces) = run_experiment(spec)?;
    let dir = spec.cell_dir();
    let mut f = create(&dir.join("cells.csv"))?;
    write_cells_csv(&mut f, &result)?;
    f.flush()?;
    let mut f = create(&dir.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut f, &result)?;
    writeln!(f)?;
    f.flush()?;
    if spec.dump_traces {
        for (ci, t) in traces.iter().enumerate() {
            if let Some((cfg, trace)) = t {
                let mut f = create(&dir.join(format!("trace_cell{ci}.csv")))?;
                trace.write_csv(&mut f, cfg)?;
                f.flush()?;
            }
        }
    }
    Ok(result)
}

/// `cmd tau-sim`: writes `<dir>/n<n>/tau.csv` per n and `<dir>/tau_summary.json`.
pub fn cmd_tau_sim(n_values: &[usize], trials: usize, seed: u64, dir: &Path) -> Result<Vec<TauStats>> {
    if trials < 1000 {
        return Err(Error::Config(format!("trials: need at least 1000, got {trials}")));
    }
    if n_values.is_empty() || n_values.contains(&0) {
        return Err(Error::Config("n_values: need positive n".into()));
    }
    let stats = n_values
        .iter()
        .map(|&n| simulate_tau(n, trials, seed))
        .collect::<Result<Vec<_>>>()?;
    for s in &stats {
        let mut f = create(&dir.join(format!("n{}", s.n)).join("tau.csv"))?;
        s.write_csv(&mut f)?;
        f.flush()?;
    }
    let summary: Vec<_> = stats.iter().map(TauStats::summary).collect();
    let mut f = create(&dir.join("tau_summary.json"))?;
    serde_json::to_writer_pretty(&mut f, &json!({ "seed": seed, "trials": trials, "summaries": summary }))?;
    writeln!(f)?;
    f.flush()?;
    Ok(stats)
}

/// `cmd audit`: writes `<dir>/audit.csv`; the caller maps `significant` to exit 4.
pub fn cmd_audit(cfg: &AuditConfig, dir: &Path) -> Result<AuditResult> {
    let result = audit_single_step(cfg)?;
    let mut f = create(&dir.join("audit.csv"))?;
    result.write_csv(&mut f)?;
    f.flush()?;
    Ok(result)
}

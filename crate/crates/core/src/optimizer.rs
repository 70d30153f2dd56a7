//! The noisy stochastic mirror-descent loop that stops once more than half of
//! the dataset has been touched, plus regret/risk estimation and a non-private
//! projected-subgradient baseline used as the `F(w*)` oracle.
//!
//! Noise convention: `xi_t ~ N(0, sigma^2 I)`, i.e. `sigma` is the
//! per-coordinate standard deviation.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::{mirror_step_unchecked, Euclidean, FeasibleSet, SharedPotential};
use crate::linalg::{add_scaled, mean, norm};
use crate::losses::{draw_dataset, draw_sample, DataPoint, LossOracle, PopulationSpec};
use crate::rng;
use crate::sampler::{sample_index, FreshSet};

/// Step-size rule. Only the constant rule carries the regret/utility analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "eta", rename_all = "kebab-case")]
pub enum StepSchedule {
    Constant(f64),
    /// `eta / sqrt(t)`
    InverseSqrt(f64),
}

impl StepSchedule {
    pub fn at(&self, t: usize) -> f64 {
        match *self {
            StepSchedule::Constant(eta) => eta,
            StepSchedule::InverseSqrt(eta) => eta / (t as f64).sqrt(),
        }
    }

    fn base(&self) -> f64 {
        match *self {
            StepSchedule::Constant(eta) | StepSchedule::InverseSqrt(eta) => eta,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub n: usize,
    pub step: StepSchedule,
    pub sigma: f64,
    pub set: FeasibleSet,
    pub potential: SharedPotential,
    pub oracle: LossOracle,
    pub w1: Vec<f64>,
    pub seed: u64,
    pub max_steps: usize,
}

impl RunConfig {
    /// Constant step `eta`, Euclidean potential, `w1` at the set's minimum-norm
    /// point and a `4n` step cap.
    pub fn new(n: usize, eta: f64, sigma: f64, set: FeasibleSet, oracle: LossOracle) -> Self {
        let w1 = set.center();
        Self {
            n,
            step: StepSchedule::Constant(eta),
            sigma,
            set,
            potential: Arc::new(Euclidean),
            oracle,
            w1,
            seed: 0,
            max_steps: 4 * n,
        }
    }

    pub fn dimension(&self) -> usize {
        self.set.dimension()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        let eta = self.step.base();
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Config(format!("eta must be positive, got {eta}")));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be nonnegative, got {}", self.sigma)));
        }
        if self.w1.len() != self.dimension() {
            return Err(Error::dim("w1", self.dimension(), self.w1.len()));
        }
        if !self.set.contains(&self.w1) {
            return Err(Error::Config("w1 lies outside the feasible set".into()));
        }
        if self.max_steps < self.n {
            return Err(Error::Config(format!(
                "max_steps={} must be at least n={}",
                self.max_steps, self.n
            )));
        }
        Ok(())
    }

    pub fn describe(&self) -> Value {
        json!({
            "n": self.n,
            "d": self.dimension(),
            "step": self.step,
            "sigma": self.sigma,
            "set": self.set.describe(),
            "potential": self.potential.name(),
            "loss": self.oracle.describe(),
            "w1": self.w1,
            "seed": self.seed,
            "max_steps": self.max_steps,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Step {
    pub t: usize,
    pub sampled_index: usize,
    pub was_fresh: bool,
    pub iterate_before: Vec<f64>,
    pub noise_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunTrace {
    pub steps: Vec<Step>,
    pub tau: usize,
    pub fresh_step_times: Vec<usize>,
    pub output: Vec<f64>,
    /// Iterate after the final step.
    pub last: Vec<f64>,
}

impl RunTrace {
    /// Iterates `w_t` at the steps that consumed a fresh sample.
    pub fn fresh_iterates(&self) -> impl Iterator<Item = &Step> {
        self.steps.iter().filter(|s| s.was_fresh)
    }

    /// CSV with columns `t,index,fresh,noise_norm`.
    pub fn write_csv<W: Write>(&self, mut out: W, config: &RunConfig) -> Result<()> {
        writeln!(out, "# {}", config.describe())?;
        writeln!(out, "t,index,fresh,noise_norm")?;
        for s in &self.steps {
            writeln!(out, "{},{},{},{:.16e}", s.t, s.sampled_index, s.was_fresh as u8, s.noise_norm)?;
        }
        Ok(())
    }
}

/// Runs the private SGD loop.
///
/// Each step draws an index uniformly. A fresh index triggers a mirror step
/// along `subgradient + xi`; a previously seen one a noise-only step along
/// `xi`. The loop stops once more than `n/2` distinct indices were drawn and
/// returns the average of the iterates at fresh-step times.
pub fn private_sgd<R: Rng>(config: &RunConfig, dataset: &[DataPoint], rng: &mut R) -> Result<RunTrace> {
    config.validate()?;
    if dataset.len() != config.n {
        return Err(Error::Config(format!(
            "dataset has {} points but config.n = {}",
            dataset.len(),
            config.n
        )));
    }
    let d = config.dimension();
    if let Some(p) = dataset.iter().find(|p| p.dimension() != d) {
        return Err(Error::dim("dataset point", d, p.dimension()));
    }

    let mut fresh = FreshSet::new(config.n);
    let mut w = config.w1.clone();
    let mut steps = Vec::new();
    let mut fresh_step_times = Vec::with_capacity(FreshSet::stop_count(config.n));
    let mut fresh_iterates = Vec::with_capacity(FreshSet::stop_count(config.n));
    let mut noise = vec![0.0; d];

    let mut t = 0;
    while !fresh.should_stop() {
        if t == config.max_steps {
            let partial = finish(steps, fresh_step_times, &fresh_iterates, w, &config.w1);
            return Err(Error::Overrun {
                max_steps: config.max_steps,
                fresh: fresh.count(),
                needed: FreshSet::stop_count(config.n),
                partial: Box::new(partial),
            });
        }
        t += 1;
        let idx = sample_index(rng, config.n)?;
        // Noise is drawn even when sigma = 0 so the index stream does not depend on sigma.
        for z in noise.iter_mut() {
            let e: f64 = StandardNormal.sample(rng);
            *z = config.sigma * e;
        }
        let is_fresh = fresh.record(idx)?;
        let g = if is_fresh {
            let sub = config.oracle.subgradient(&w, &dataset[idx]);
            add_scaled(&sub, 1.0, &noise)
        } else {
            noise.clone()
        };
        let next = mirror_step_unchecked(
            config.potential.as_ref(),
            config.set.as_ref(),
            &w,
            &g,
            config.step.at(t),
        );
        if is_fresh {
            fresh_step_times.push(t);
            fresh_iterates.push(w.clone());
        }
        steps.push(Step {
            t,
            sampled_index: idx,
            was_fresh: is_fresh,
            iterate_before: std::mem::replace(&mut w, next),
            noise_norm: norm(&noise),
        });
    }
    Ok(finish(steps, fresh_step_times, &fresh_iterates, w, &config.w1))
}

fn finish(
    steps: Vec<Step>,
    fresh_step_times: Vec<usize>,
    fresh_iterates: &[Vec<f64>],
    last: Vec<f64>,
    w1: &[f64],
) -> RunTrace {
    let output = if fresh_iterates.is_empty() { w1.to_vec() } else { mean(fresh_iterates) };
    RunTrace { tau: steps.len(), steps, fresh_step_times, output, last }
}

/// `sum over fresh steps of f(w_t, x_{y_t}) - f(u, x_{y_t})`. The linear noise
/// terms have zero mean and are left out.
pub fn estimate_regret(trace: &RunTrace, dataset: &[DataPoint], u: &[f64], config: &RunConfig) -> Result<f64> {
    if u.len() != config.dimension() {
        return Err(Error::dim("comparator", config.dimension(), u.len()));
    }
    if !config.set.contains(u) {
        return Err(Error::Config("comparator lies outside the feasible set".into()));
    }
    let f = &config.oracle;
    trace
        .fresh_iterates()
        .map(|s| {
            let x = dataset
                .get(s.sampled_index)
                .ok_or_else(|| Error::Logic(format!("trace index {} out of range", s.sampled_index)))?;
            Ok(f.value(&s.iterate_before, x) - f.value(u, x))
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub eval_samples: usize,
}

impl RiskEstimate {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        // Welford
        let (mut k, mut m, mut s) = (0usize, 0.0f64, 0.0f64);
        for v in values {
            k += 1;
            let delta = v - m;
            m += delta / k as f64;
            s += delta * (v - m);
        }
        let stderr = if k > 1 { (s / (k - 1) as f64).sqrt() / (k as f64).sqrt() } else { 0.0 };
        Self { mean: m, stderr, eval_samples: k }
    }
}

/// Monte-Carlo estimate of the population risk `F(w) = E f(w, X)`.
pub fn estimate_risk<R: Rng>(
    w: &[f64],
    spec: &PopulationSpec,
    oracle: &LossOracle,
    eval_samples: usize,
    rng: &mut R,
) -> Result<RiskEstimate> {
    if eval_samples == 0 {
        return Err(Error::Config("eval_samples must be at least 1".into()));
    }
    if w.len() != spec.dimension {
        return Err(Error::dim("estimate_risk", spec.dimension, w.len()));
    }
    Ok(RiskEstimate::from_values(
        (0..eval_samples).map(|_| oracle.value(w, &draw_sample(spec, rng))),
    ))
}

/// Mean loss of `w` over a fixed sample.
pub fn empirical_risk(w: &[f64], sample: &[DataPoint], oracle: &LossOracle) -> RiskEstimate {
    RiskEstimate::from_values(sample.iter().map(|x| oracle.value(w, x)))
}

pub const BASELINE_MIN_STEPS: usize = 10_000;
pub const BASELINE_SAMPLE_SIZE: usize = 100_000;

/// Approximate population minimiser from the non-private baseline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Baseline {
    pub w: Vec<f64>,
    /// Guaranteed optimisation gap `1.5 D L / sqrt(T)` of the averaged iterate.
    pub oracle_error: f64,
    pub budget_steps: usize,
    pub sample_size: usize,
}

/// Projected stochastic subgradient descent with `eta_t = D / (L sqrt(t))`
/// over a held-out sample drawn from `spec` (seeded by `spec.seed`),
/// returning the averaged iterate.
pub fn baseline_minimizer(
    spec: &PopulationSpec,
    oracle: &LossOracle,
    set: &FeasibleSet,
    budget_steps: usize,
) -> Result<Baseline> {
    if budget_steps < BASELINE_MIN_STEPS {
        return Err(Error::Config(format!(
            "baseline budget must be at least {BASELINE_MIN_STEPS} steps, got {budget_steps}"
        )));
    }
    if set.dimension() != spec.dimension {
        return Err(Error::dim("baseline set", spec.dimension, set.dimension()));
    }
    let sample = draw_dataset(spec, BASELINE_SAMPLE_SIZE, &mut rng::stream(spec.seed, &[0xBA5E, 0]))?;
    let mut rng = rng::stream(spec.seed, &[0xBA5E, 1]);
    let lip = oracle.lipschitz(spec.feature_bound, Some(set.as_ref()))?;
    let diam = set.diameter();

    let mut w = set.center();
    let mut avg = vec![0.0; w.len()];
    for t in 1..=budget_steps {
        for (a, x) in avg.iter_mut().zip(&w) {
            *a += (x - *a) / t as f64;
        }
        let x = &sample[rng.random_range(0..sample.len())];
        let g = oracle.subgradient(&w, x);
        let eta = diam / (lip * (t as f64).sqrt());
        w = set.project_unchecked(&add_scaled(&w, -eta, &g));
    }
    Ok(Baseline {
        w: avg,
        oracle_error: 1.5 * diam * lip / (budget_steps as f64).sqrt(),
        budget_steps,
        sample_size: sample.len(),
    })
}

/// Per-run record exported by the harness.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub config: Value,
    pub tau: usize,
    pub output: Vec<f64>,
    pub regret: f64,
    pub risk: RiskEstimate,
    pub excess_risk: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{L2Ball, BoxSet};
    use crate::losses::{Absolute, Hinge, LinearMargin, LinearRegression, Loss, Squared};
    use crate::rng::stream;

    fn ball(r: f64, d: usize) -> FeasibleSet {
        Arc::new(L2Ball::origin(r, d).unwrap())
    }

    fn pt(f: &[f64], y: f64) -> DataPoint {
        DataPoint { features: f.to_vec(), label: y }
    }

    fn margin_pop(d: usize, noise: f64, seed: u64) -> PopulationSpec {
        let mut w = vec![0.0; d];
        w[0] = 1.0;
        PopulationSpec::new(Arc::new(LinearMargin::new(w, noise).unwrap()), d, 1.0, seed).unwrap()
    }

    #[test]
    fn two_point_hand_computed_run() {
        // n = 2, d = 1, hinge, sigma = 0. The guard stops after both points are
        // fresh (count 2 > 1). Points: x0 = (0.5, +1), x1 = (1.0, -1).
        let data = vec![pt(&[0.5], 1.0), pt(&[1.0], -1.0)];
        let mut cfg = RunConfig::new(2, 0.4, 0.0, ball(1.0, 1), Arc::new(Hinge));
        cfg.w1 = vec![0.0];
        let trace = private_sgd(&cfg, &data, &mut stream(5, &[])).unwrap();
        let mut w = 0.0f64;
        let mut seen = [false; 2];
        let mut fresh_ws = vec![];
        for s in &trace.steps {
            assert!((s.iterate_before[0] - w).abs() < 1e-15);
            let i = s.sampled_index;
            if !seen[i] {
                seen[i] = true;
                fresh_ws.push(w);
                let (x, y) = if i == 0 { (0.5, 1.0) } else { (1.0, -1.0) };
                // hinge subgradient: -y x while y w x <= 1
                let g = if y * w * x > 1.0 { 0.0 } else { -y * x };
                w = (w - 0.4 * g).clamp(-1.0, 1.0);
            }
        }
        assert_eq!(fresh_ws.len(), 2);
        assert!((trace.output[0] - (fresh_ws[0] + fresh_ws[1]) / 2.0).abs() < 1e-15);
        // Whichever point comes first, the first update is +-0.2 / -0.4 from 0:
        // x0 first: w = 0.2, then x1: w = 0.2 - 0.4 = -0.2; output (0 + 0.2)/2 = 0.1
        // x1 first: w = -0.4, then x0: output (0 - 0.4)/2 = -0.2
        let first = trace.steps[0].sampled_index;
        let expected = if first == 0 { 0.1 } else { -0.2 };
        assert!((trace.output[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn vanishing_step_returns_start() {
        let pop = margin_pop(3, 0.1, 1);
        let data = draw_dataset(&pop, 64, &mut stream(1, &[])).unwrap();
        let cfg = RunConfig::new(64, 1e-12, 0.0, ball(1.0, 3), Arc::new(Hinge));
        let trace = private_sgd(&cfg, &data, &mut stream(2, &[])).unwrap();
        assert!(norm(&trace.output) < 1e-6);
    }

    #[test]
    fn runs_are_deterministic_and_well_formed() {
        let pop = margin_pop(4, 0.1, 2);
        let data = draw_dataset(&pop, 101, &mut stream(2, &[])).unwrap();
        let cfg = RunConfig::new(101, 0.05, 0.7, ball(0.5, 4), Arc::new(Hinge));
        let a = private_sgd(&cfg, &data, &mut stream(8, &[])).unwrap();
        let b = private_sgd(&cfg, &data, &mut stream(8, &[])).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fresh_step_times.len(), 101 / 2 + 1);
        assert_eq!(a.tau, a.steps.len());
        assert!(a.steps.iter().all(|s| cfg.set.contains(&s.iterate_before)));
        assert!(cfg.set.contains(&a.output));
        let fresh: Vec<Vec<f64>> = a.fresh_iterates().map(|s| s.iterate_before.clone()).collect();
        let m = mean(&fresh);
        assert!(m.iter().zip(&a.output).all(|(x, y)| (x - y).abs() < 1e-12));
        assert!(a.steps.iter().any(|s| !s.was_fresh));
    }

    #[test]
    fn step_cap_below_n_is_rejected() {
        let pop = margin_pop(2, 0.0, 3);
        let data = draw_dataset(&pop, 50, &mut stream(3, &[])).unwrap();
        let mut cfg = RunConfig::new(50, 0.1, 0.0, ball(1.0, 2), Arc::new(Hinge));
        assert_eq!(cfg.max_steps, 200);
        cfg.max_steps = 10;
        assert!(matches!(private_sgd(&cfg, &data, &mut stream(3, &[])), Err(Error::Config(_))));
    }

    #[test]
    fn overrun_reports_fresh_progress() {
        // n = 3 needs 2 distinct draws; with a cap of 3 steps, the stream
        // (a, a, a) overruns with probability 1/9 per seed.
        let data = vec![pt(&[0.1], 1.0), pt(&[0.2], 1.0), pt(&[0.3], -1.0)];
        let mut cfg = RunConfig::new(3, 0.1, 0.0, ball(1.0, 1), Arc::new(Hinge));
        cfg.max_steps = 3;
        let mut saw_overrun = false;
        for seed in 0..200 {
            match private_sgd(&cfg, &data, &mut stream(seed, &[])) {
                Ok(t) => assert_eq!(t.fresh_step_times.len(), 2),
                Err(Error::Overrun { max_steps, fresh, needed, partial }) => {
                    assert_eq!((max_steps, fresh, needed), (3, 1, 2));
                    assert_eq!(partial.tau, 3);
                    saw_overrun = true;
                }
                Err(e) => panic!("{e}"),
            }
        }
        assert!(saw_overrun);
    }

    #[test]
    fn config_validation() {
        let data = vec![pt(&[0.1, 0.0], 1.0); 4];
        let base = RunConfig::new(4, 0.1, 0.0, ball(1.0, 2), Arc::new(Hinge));
        let mut c = base.clone();
        c.w1 = vec![2.0, 0.0];
        assert!(matches!(private_sgd(&c, &data, &mut stream(0, &[])), Err(Error::Config(_))));
        let mut c = base.clone();
        c.step = StepSchedule::Constant(0.0);
        assert!(private_sgd(&c, &data, &mut stream(0, &[])).is_err());
        let mut c = base.clone();
        c.sigma = -1.0;
        assert!(private_sgd(&c, &data, &mut stream(0, &[])).is_err());
        assert!(private_sgd(&base, &data[..3], &mut stream(0, &[])).is_err());
        let bad = vec![pt(&[0.1], 1.0); 4];
        assert!(private_sgd(&base, &bad, &mut stream(0, &[])).is_err());
    }

    #[derive(Debug)]
    struct Constant(f64);
    impl Loss for Constant {
        fn name(&self) -> &'static str {
            "constant"
        }
        fn value(&self, _: &[f64], _: &DataPoint) -> f64 {
            self.0
        }
        fn subgradient(&self, w: &[f64], _: &DataPoint) -> Vec<f64> {
            vec![0.0; w.len()]
        }
        fn lipschitz(&self, _: f64, _: Option<&dyn crate::geometry::ConvexSet>) -> Result<f64> {
            Ok(1e-12)
        }
        fn is_smooth(&self) -> bool {
            true
        }
    }

    #[test]
    fn regret_of_constant_loss_is_zero() {
        let pop = margin_pop(2, 0.0, 5);
        let data = draw_dataset(&pop, 40, &mut stream(5, &[])).unwrap();
        let cfg = RunConfig::new(40, 0.1, 0.0, ball(1.0, 2), Arc::new(Constant(0.7)));
        let trace = private_sgd(&cfg, &data, &mut stream(5, &[])).unwrap();
        assert_eq!(estimate_regret(&trace, &data, &[0.3, 0.3], &cfg).unwrap(), 0.0);
        let own = trace.output.clone();
        assert!(estimate_regret(&trace, &data, &own, &cfg).unwrap().is_finite());
        assert!(estimate_regret(&trace, &data, &[3.0, 0.0], &cfg).is_err());
    }

    #[test]
    fn risk_of_constant_and_origin() {
        let pop = margin_pop(3, 0.2, 6);
        let c: LossOracle = Arc::new(Constant(2.5));
        let r = estimate_risk(&[0.1, 0.2, 0.3], &pop, &c, 1000, &mut stream(6, &[])).unwrap();
        assert_eq!((r.mean, r.stderr, r.eval_samples), (2.5, 0.0, 1000));
        let h: LossOracle = Arc::new(Hinge);
        let r = estimate_risk(&[0.0; 3], &pop, &h, 1000, &mut stream(6, &[])).unwrap();
        assert_eq!((r.mean, r.stderr), (1.0, 0.0));
        assert!(estimate_risk(&[0.0; 3], &pop, &h, 0, &mut stream(6, &[])).is_err());
    }

    /// Midpoint-rule integral of E[max(0, 1 - sign(x1) <w, x>)] for x uniform
    /// on the unit disc, in polar coordinates.
    fn disc_hinge_expectation(w: [f64; 2]) -> f64 {
        let (nr, nt) = (2000, 2000);
        let mut acc = 0.0;
        for i in 0..nr {
            let r = (i as f64 + 0.5) / nr as f64;
            for j in 0..nt {
                let th = (j as f64 + 0.5) / nt as f64 * std::f64::consts::TAU;
                let (x, y) = (r * th.cos(), r * th.sin());
                let label = if x >= 0.0 { 1.0 } else { -1.0 };
                let f = (1.0 - label * (w[0] * x + w[1] * y)).max(0.0);
                acc += f * r;
            }
        }
        acc / (nr * nt) as f64 * std::f64::consts::TAU / std::f64::consts::PI
    }

    #[test]
    fn risk_matches_quadrature() {
        let w = [0.8, 0.6];
        let oracle = disc_hinge_expectation(w);
        let pop = margin_pop(2, 0.0, 7);
        let h: LossOracle = Arc::new(Hinge);
        let r = estimate_risk(&w, &pop, &h, 1_000_000, &mut stream(7, &[])).unwrap();
        assert!((r.mean - oracle).abs() <= 3.0 * r.stderr, "{} vs {oracle} ({})", r.mean, r.stderr);
    }

    fn regression_pop(w_true: Vec<f64>, seed: u64) -> PopulationSpec {
        let d = w_true.len();
        PopulationSpec::new(Arc::new(LinearRegression { w_true, noise_std: 0.0 }), d, 1.0, seed).unwrap()
    }

    #[test]
    fn baseline_recovers_interior_minimizer() {
        let pop = regression_pop(vec![0.3, -0.2], 8);
        let oracle: LossOracle = Arc::new(Squared::default());
        let b = baseline_minimizer(&pop, &oracle, &ball(1.0, 2), 100_000).unwrap();
        assert!((b.w[0] - 0.3).abs() < 1e-2 && (b.w[1] + 0.2).abs() < 1e-2, "{:?}", b.w);
        assert!(b.sample_size >= 100_000);
        assert!(baseline_minimizer(&pop, &oracle, &ball(1.0, 2), 100).is_err());
    }

    #[test]
    fn baseline_recovers_boundary_minimizer() {
        // Isotropic feature covariance: the constrained optimum of the quadratic
        // is the Euclidean projection of w_true = (2, 0), i.e. (1, 0).
        let pop = regression_pop(vec![2.0, 0.0], 9);
        let oracle: LossOracle = Arc::new(Squared { label_bound: 2.0 });
        let b = baseline_minimizer(&pop, &oracle, &ball(1.0, 2), 100_000).unwrap();
        assert!((b.w[0] - 1.0).abs() < 1e-2 && b.w[1].abs() < 1e-2, "{:?}", b.w);
    }

    #[test]
    fn baseline_error_budget_shrinks_as_inverse_sqrt() {
        // Absolute loss, noiseless regression labels: F(w*) = 0 at w* = w_true,
        // so the measured risk is the excess risk itself.
        let pop = regression_pop(vec![0.25, 0.1, -0.3], 10);
        let oracle: LossOracle = Arc::new(Absolute);
        let set: FeasibleSet = Arc::new(BoxSet::new(vec![-1.0; 3], vec![1.0; 3]).unwrap());
        let eval = draw_dataset(&pop, 50_000, &mut stream(10, &[9])).unwrap();
        let mut prev = f64::INFINITY;
        for budget in [10_000, 40_000, 160_000] {
            let b = baseline_minimizer(&pop, &oracle, &set, budget).unwrap();
            let expected = 1.5 * set.diameter() * 1.0 / (budget as f64).sqrt();
            assert!((b.oracle_error - expected).abs() < 1e-12);
            assert!(b.oracle_error < prev);
            prev = b.oracle_error;
            let excess = empirical_risk(&b.w, &eval, &oracle);
            assert!(excess.mean <= b.oracle_error + 3.0 * excess.stderr, "{budget}: {:?}", excess);
        }
    }

    #[test]
    fn trace_csv_layout() {
        let data = vec![pt(&[0.1], 1.0), pt(&[0.2], -1.0)];
        let cfg = RunConfig::new(2, 0.1, 1.0, ball(1.0, 1), Arc::new(Hinge));
        let trace = private_sgd(&cfg, &data, &mut stream(1, &[])).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf, &cfg).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# {"));
        assert_eq!(lines.next(), Some("t,index,fresh,noise_norm"));
        assert_eq!(lines.count(), trace.tau);
    }
}

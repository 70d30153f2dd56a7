//! Privacy accountant: Gaussian noise calibration, amplification by
//! subsampling, advanced composition over a fixed number of steps, end-to-end
//! parameter selection, and a Monte-Carlo audit of a single noisy step.
//!
//! All logarithms are natural. Out-of-regime parameters are rejected, never
//! clamped.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng;

/// Largest per-step epsilon for which `e^x - 1 <= 2x`.
pub const LINEARIZATION_LIMIT: f64 = 1.256;

fn check_delta(name: &str, delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie in (0, 1), got {delta}")))
    }
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive, got {x}")))
    }
}

/// Noise standard deviation making one gradient step with sensitivity `L`
/// `(eps_tilde, delta)`-DP: `L sqrt(3 ln(1/delta)) / eps_tilde`.
pub fn calibrate_sigma(lipschitz: f64, delta: f64, epsilon_tilde: f64) -> Result<f64> {
    check_positive("L", lipschitz)?;
    check_positive("epsilon_tilde", epsilon_tilde)?;
    check_delta("delta", delta)?;
    Ok(lipschitz * (3.0 * (1.0 / delta).ln()).sqrt() / epsilon_tilde)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepPrivacy {
    pub epsilon_tilde: f64,
    pub delta: f64,
    /// Subsample size; 1 for the single-index loop.
    pub m: usize,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    PerStep,
    Subsampled,
    Composed,
    EndToEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrivacyReport {
    pub stage: Stage,
    pub epsilon: f64,
    pub delta_total: f64,
    pub assumptions: Vec<String>,
}

impl PrivacyReport {
    fn new(stage: Stage, epsilon: f64, delta_total: f64, assumptions: Vec<String>) -> Result<Self> {
        if !(epsilon >= 0.0) {
            return Err(Error::Domain(format!("epsilon came out negative or NaN: {epsilon}")));
        }
        check_delta("delta_total", delta_total)?;
        Ok(Self { stage, epsilon, delta_total, assumptions })
    }
}

impl StepPrivacy {
    fn validate(&self) -> Result<()> {
        check_positive("epsilon_tilde", self.epsilon_tilde)?;
        check_delta("delta", self.delta)?;
        if self.n == 0 || self.m == 0 {
            return Err(Error::Domain("m and n must be positive".into()));
        }
        if self.m > self.n {
            return Err(Error::Domain(format!("subsample size m={} exceeds n={}", self.m, self.n)));
        }
        Ok(())
    }

    pub fn report(&self) -> Result<PrivacyReport> {
        self.validate()?;
        PrivacyReport::new(Stage::PerStep, self.epsilon_tilde, self.delta, vec![])
    }
}

/// `((m/n)(e^eps - 1), (m/n) delta)` for a step run on a uniform size-`m` subsample.
pub fn amplify_by_subsampling(step: &StepPrivacy) -> Result<PrivacyReport> {
    step.validate()?;
    let q = step.m as f64 / step.n as f64;
    PrivacyReport::new(
        Stage::Subsampled,
        q * step.epsilon_tilde.exp_m1(),
        q * step.delta,
        vec![format!("uniform subsample of m={} out of n={}", step.m, step.n)],
    )
}

/// Advanced composition of `tau` single-index noisy steps:
/// `eps = 2 eps~ sqrt(2 tau ln(1/delta')) / n + 4 tau eps~^2 / n^2`,
/// `delta = tau delta / n + delta'`.
pub fn compose(step: &StepPrivacy, tau: usize, delta_prime: f64) -> Result<PrivacyReport> {
    step.validate()?;
    check_delta("delta_prime", delta_prime)?;
    if step.m != 1 {
        return Err(Error::Precondition(format!(
            "composition is stated for single-index steps (m = 1), got m = {}",
            step.m
        )));
    }
    if step.epsilon_tilde > LINEARIZATION_LIMIT {
        return Err(Error::Precondition(format!(
            "epsilon_tilde = {} > {LINEARIZATION_LIMIT}: e^eps - 1 <= 2 eps no longer holds",
            step.epsilon_tilde
        )));
    }
    let (e, n, t) = (step.epsilon_tilde, step.n as f64, tau as f64);
    let epsilon = 2.0 * e * (2.0 * t * (1.0 / delta_prime).ln()).sqrt() / n + 4.0 * t * e * e / (n * n);
    let delta_total = t * step.delta / n + delta_prime;
    PrivacyReport::new(
        Stage::Composed,
        epsilon,
        delta_total,
        vec![
            format!("epsilon_tilde = {e} <= {LINEARIZATION_LIMIT} so e^eps - 1 <= 2 eps"),
            format!("number of steps fixed at tau = {tau}"),
        ],
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EndToEndParams {
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub lipschitz: f64,
    pub diameter: f64,
    pub dimension: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndToEnd {
    pub sigma: f64,
    pub eta: f64,
    /// `(4 eps (sqrt(ln 1/delta') + 2), delta + delta' + 2 e^{-n/16})`
    pub report: PrivacyReport,
    /// The composition bound at `tau = 2n` evaluated directly; dominated by `report`.
    pub composed: PrivacyReport,
    /// `5 L D / sqrt(n) + 20 L D sqrt(d ln(1/delta)) / (eps n)`
    pub risk_bound: f64,
}

pub fn max_epsilon(n: usize) -> f64 {
    1.0 / (2.0 * (n as f64).sqrt())
}

/// Probability that the stopping time exceeds `2n`, at most `2 e^{-n/16}`.
pub fn overrun_mass(n: usize) -> f64 {
    2.0 * (-(n as f64) / 16.0).exp()
}

/// Noise scale, step size, privacy guarantee and excess-risk bound for a run
/// of the private loop on `n` points at target `epsilon <= 1/(2 sqrt n)`.
pub fn end_to_end(p: &EndToEndParams) -> Result<EndToEnd> {
    if p.n < 16 {
        return Err(Error::Precondition(format!("n = {} < 16", p.n)));
    }
    check_positive("epsilon", p.epsilon)?;
    check_delta("delta", p.delta)?;
    check_delta("delta_prime", p.delta_prime)?;
    check_positive("L", p.lipschitz)?;
    check_positive("D", p.diameter)?;
    if p.dimension == 0 {
        return Err(Error::Domain("d must be positive".into()));
    }
    let limit = max_epsilon(p.n);
    if p.epsilon > limit {
        return Err(Error::Precondition(format!(
            "epsilon = {} > 1/(2 sqrt(n)) = {limit}: the guarantee only covers epsilon <= 1/(2 sqrt n)",
            p.epsilon
        )));
    }
    let (n, eps, l, dd, d) = (p.n as f64, p.epsilon, p.lipschitz, p.diameter, p.dimension as f64);
    let ln_delta = (1.0 / p.delta).ln();
    let ln_delta_prime = (1.0 / p.delta_prime).ln();

    let sigma = 8.0 * l * ln_delta.sqrt() / (n.sqrt() * eps);
    let eta = dd / (n.sqrt() * (l + sigma * d.sqrt()));
    let risk_bound = 5.0 * l * dd / n.sqrt() + 20.0 * l * dd * (d * ln_delta).sqrt() / (eps * n);

    let stop_mass = overrun_mass(p.n);
    let report = PrivacyReport::new(
        Stage::EndToEnd,
        4.0 * eps * (ln_delta_prime.sqrt() + 2.0),
        p.delta + p.delta_prime + stop_mass,
        vec![
            format!("epsilon = {eps} <= 1/(2 sqrt(n)) = {limit}"),
            format!("conditioned on tau <= 2n = {}; failure mass 2 exp(-n/16) = {stop_mass:e} added to delta", 2 * p.n),
            format!("per-step epsilon_tilde = sqrt(n) epsilon = {}", n.sqrt() * eps),
        ],
    )?;

    // The same sigma, read as a per-step calibration at epsilon_tilde = sqrt(n) eps,
    // corresponds to per-step delta = exp(-(sigma eps~ / L)^2 / 3) = delta^{64/3}.
    let eps_tilde = n.sqrt() * eps;
    let step_delta = (-(sigma * eps_tilde / l).powi(2) / 3.0).exp().max(f64::MIN_POSITIVE);
    let composed = compose(
        &StepPrivacy { epsilon_tilde: eps_tilde, delta: step_delta, m: 1, n: p.n },
        2 * p.n,
        p.delta_prime,
    )?;
    Ok(EndToEnd { sigma, eta, report, composed, risk_bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TargetParams {
    pub epsilon: f64,
    pub delta: f64,
    pub delta_prime: f64,
}

/// Internal parameters achieving an overall `(eps_bar, delta_bar)` target:
/// `delta = delta' = delta_bar / 3`, `epsilon = eps_bar / (8 sqrt(ln 1/delta'))`.
pub fn from_target(eps_bar: f64, delta_bar: f64, n: usize) -> Result<TargetParams> {
    check_positive("eps_bar", eps_bar)?;
    check_delta("delta_bar", delta_bar)?;
    if n < 16 {
        return Err(Error::Domain(format!("n = {n} < 16")));
    }
    let lo = 6.0 * (-(n as f64) / 16.0).exp();
    let hi = 3.0 * (-4.0f64).exp();
    if delta_bar < lo || delta_bar > hi {
        return Err(Error::Domain(format!(
            "delta_bar = {delta_bar} outside [6 exp(-n/16), 3 e^-4] = [{lo:e}, {hi:e}]"
        )));
    }
    let delta = delta_bar / 3.0;
    let epsilon = eps_bar / (8.0 * (1.0 / delta).ln().sqrt());
    // Equivalent to eps_bar / sqrt(ln(3/delta_bar)) <= 4 / sqrt(n).
    let limit = max_epsilon(n);
    if epsilon > limit {
        return Err(Error::Domain(format!(
            "eps_bar / sqrt(ln(3/delta_bar)) = {} > 4/sqrt(n) = {}: mapped epsilon {epsilon} exceeds 1/(2 sqrt n)",
            eps_bar / (3.0 / delta_bar).ln().sqrt(),
            4.0 / (n as f64).sqrt()
        )));
    }
    Ok(TargetParams { epsilon, delta, delta_prime: delta })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditConfig {
    pub sigma: f64,
    pub lipschitz: f64,
    pub epsilon_tilde: f64,
    pub delta: f64,
    pub trials: usize,
    pub grid: usize,
    pub seed: u64,
}

pub const MAX_AUDIT_GRID: usize = 500;
/// Minimum trials per grid interval.
pub const AUDIT_TRIALS_PER_INTERVAL: usize = 2000;
const AUDIT_CHUNKS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditInterval {
    pub lo: f64,
    pub hi: f64,
    pub p_s: f64,
    pub p_sprime: f64,
    /// `max` over both directions of `P[M(S) in E] - e^eps P[M(S') in E] - delta`.
    pub violation: f64,
    /// Pooled binomial standard error of the violation estimate.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditResult {
    pub config: AuditConfig,
    pub intervals: Vec<AuditInterval>,
    pub max_violation: f64,
    /// Interval with the largest `violation - 3 stderr`.
    pub worst_interval: usize,
    pub significant: bool,
}

impl AuditResult {
    /// CSV with columns `interval_lo,interval_hi,p_S,p_Sprime,violation`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# {}", serde_json::to_string(&self.config)?)?;
        writeln!(out, "interval_lo,interval_hi,p_S,p_Sprime,violation")?;
        for iv in &self.intervals {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                iv.lo, iv.hi, iv.p_s, iv.p_sprime, iv.violation
            )?;
        }
        Ok(())
    }
}

/// Grid edges for the audit; the outer intervals extend to infinity.
pub fn audit_edges(cfg: &AuditConfig) -> Vec<f64> {
    let (a, b) = (-cfg.lipschitz.abs(), 0.0);
    let lo = a - 6.0 * cfg.sigma;
    let hi = b + 6.0 * cfg.sigma;
    let mut edges: Vec<f64> = (0..=cfg.grid)
        .map(|i| lo + (hi - lo) * i as f64 / cfg.grid as f64)
        .collect();
    edges[0] = f64::NEG_INFINITY;
    edges[cfg.grid] = f64::INFINITY;
    edges
}

/// One noisy step `w - eta (g + xi)` from `w = 0` with `eta = 1`, in one
/// dimension, on two neighbouring datasets whose gradients at the audited
/// iterate are `0` and `L`. The output is not projected.
fn noisy_step<R: Rng>(gradient: f64, sigma: f64, rng: &mut R) -> f64 {
    let xi: f64 = StandardNormal.sample(rng);
    0.0 - (gradient + sigma * xi)
}

/// Histograms the outputs of `M(S)` and `M(S')` over `grid` intervals and
/// checks every interval event against the `(eps_tilde, delta)` inequality in
/// both directions.
pub fn audit_single_step(cfg: &AuditConfig) -> Result<AuditResult> {
    check_positive("sigma", cfg.sigma)?;
    check_positive("L", cfg.lipschitz)?;
    check_positive("epsilon_tilde", cfg.epsilon_tilde)?;
    check_delta("delta", cfg.delta)?;
    if cfg.grid < 2 || cfg.grid > MAX_AUDIT_GRID {
        return Err(Error::Config(format!("grid must have 2..={MAX_AUDIT_GRID} intervals, got {}", cfg.grid)));
    }
    let needed = AUDIT_TRIALS_PER_INTERVAL * cfg.grid;
    if cfg.trials < needed {
        return Err(Error::Config(format!(
            "{} trials are too few for {} intervals (need at least {needed})",
            cfg.trials, cfg.grid
        )));
    }

    let edges = audit_edges(cfg);
    let (lo, hi) = (edges[1] - (edges[2] - edges[1]), edges[cfg.grid - 1] + (edges[2] - edges[1]));
    let width = (hi - lo) / cfg.grid as f64;
    let bin = |y: f64| (((y - lo) / width).floor().max(0.0) as usize).min(cfg.grid - 1);

    let per_chunk = cfg.trials.div_ceil(AUDIT_CHUNKS);
    let (counts_s, counts_sp) = (0..AUDIT_CHUNKS)
        .into_par_iter()
        .map(|c| {
            let start = c * per_chunk;
            let len = per_chunk.min(cfg.trials.saturating_sub(start));
            let mut rng = rng::stream(cfg.seed, &[0xA0D17, c as u64]);
            let mut hs = vec![0u64; cfg.grid];
            let mut hp = vec![0u64; cfg.grid];
            for _ in 0..len {
                hs[bin(noisy_step(0.0, cfg.sigma, &mut rng))] += 1;
                hp[bin(noisy_step(cfg.lipschitz, cfg.sigma, &mut rng))] += 1;
            }
            (hs, hp)
        })
        .reduce(
            || (vec![0u64; cfg.grid], vec![0u64; cfg.grid]),
            |(mut a, mut b), (c, d)| {
                a.iter_mut().zip(c).for_each(|(x, y)| *x += y);
                b.iter_mut().zip(d).for_each(|(x, y)| *x += y);
                (a, b)
            },
        );

    let t = cfg.trials as f64;
    let factor = cfg.epsilon_tilde.exp();
    let intervals: Vec<AuditInterval> = (0..cfg.grid)
        .map(|i| {
            let p = counts_s[i] as f64 / t;
            let q = counts_sp[i] as f64 / t;
            let forward = p - factor * q - cfg.delta;
            let backward = q - factor * p - cfg.delta;
            // Pooled two-proportion standard error: under the null both
            // estimates share the pooled rate, which stays stable when one
            // count is near zero.
            let pooled = 0.5 * (p + q);
            let stderr = (pooled * (1.0 - pooled) * (1.0 + factor * factor) / t).sqrt();
            let violation = forward.max(backward);
            AuditInterval { lo: edges[i], hi: edges[i + 1], p_s: p, p_sprime: q, violation, stderr }
        })
        .collect();

    let max_violation = intervals.iter().map(|iv| iv.violation).fold(f64::NEG_INFINITY, f64::max);
    let (worst_interval, worst_margin) = intervals
        .iter()
        .map(|iv| iv.violation - 3.0 * iv.stderr)
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, m)| if m > acc.1 { (i, m) } else { acc });
    Ok(AuditResult {
        config: *cfg,
        intervals,
        max_violation,
        worst_interval,
        significant: worst_margin > 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn sigma_calibration() {
        let s = calibrate_sigma(1.0, (-3.0f64).exp(), 3.0).unwrap();
        assert!(rel(s, 1.0) < 1e-15);
        // sqrt(3 ln 1e6), evaluated at 30 digits
        let s = calibrate_sigma(1.0, 1e-6, 1.0).unwrap();
        assert!(rel(s, 6.437_898_078_868_041_7) < 1e-14, "{s}");
        assert!(rel(calibrate_sigma(2.0, 1e-6, 1.0).unwrap(), 2.0 * s) < 1e-15);
        for bad in [0.0, 1.0, 1.5, -0.1] {
            assert!(matches!(calibrate_sigma(1.0, bad, 1.0), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn subsampling_examples() {
        let full = StepPrivacy { epsilon_tilde: 0.7, delta: 1e-5, m: 10, n: 10 };
        let r = amplify_by_subsampling(&full).unwrap();
        assert!(rel(r.epsilon, 0.7f64.exp() - 1.0) < 1e-15);
        assert_eq!(r.delta_total, 1e-5);
        assert_eq!(r.stage, Stage::Subsampled);
        assert!(r.epsilon <= 2.0 * 0.7);

        let tiny = StepPrivacy { epsilon_tilde: 1e-12, delta: 1e-5, m: 1, n: 10 };
        assert!(amplify_by_subsampling(&tiny).unwrap().epsilon < 1e-12);

        let r = amplify_by_subsampling(&StepPrivacy { epsilon_tilde: 0.5, delta: 1e-6, m: 1, n: 100 }).unwrap();
        assert!((r.epsilon - 0.0064872).abs() < 1e-7, "{}", r.epsilon);
        assert!(rel(r.delta_total, 1e-8) < 1e-12);

        let bad = StepPrivacy { epsilon_tilde: 0.5, delta: 1e-6, m: 11, n: 10 };
        assert!(matches!(amplify_by_subsampling(&bad), Err(Error::Domain(_))));
    }

    #[test]
    fn composition_examples() {
        let step = StepPrivacy { epsilon_tilde: 0.05, delta: 1e-8, m: 1, n: 100 };
        let r = compose(&step, 0, 1e-6).unwrap();
        assert_eq!((r.epsilon, r.delta_total), (0.0, 1e-6));

        let r = compose(&step, 200, 1e-6).unwrap();
        // independent arithmetic: 0.001 * sqrt(400 ln 1e6) + 800 * 0.0025 / 1e4
        let expected = 0.001 * (400.0 * 13.815510557964274f64).sqrt() + 0.0002;
        assert!(rel(r.epsilon, expected) < 1e-12);
        assert!((r.epsilon - 0.074538).abs() < 1e-5);
        assert!(rel(r.delta_total, 1.02e-6) < 1e-12);
        assert_eq!(r.stage, Stage::Composed);
        assert_eq!(r.assumptions.len(), 2);

        let hot = StepPrivacy { epsilon_tilde: 1.3, ..step };
        assert!(matches!(compose(&hot, 10, 1e-6), Err(Error::Precondition(_))));
        let batch = StepPrivacy { m: 2, ..step };
        assert!(matches!(compose(&batch, 10, 1e-6), Err(Error::Precondition(_))));
    }

    fn e2e(n: usize, eps: f64, d: usize) -> EndToEndParams {
        EndToEndParams { n, epsilon: eps, delta: 1e-6, delta_prime: 1e-6, lipschitz: 1.0, diameter: 1.0, dimension: d }
    }

    #[test]
    fn end_to_end_examples() {
        let r = end_to_end(&e2e(10_000, 0.005, 10)).unwrap();
        // 30-digit reference values
        assert!(rel(r.sigma, 59.470_755_021_597_415) < 1e-14, "{}", r.sigma);
        assert!(rel(r.eta, 5.289_241_090_158_327e-5) < 1e-13, "{}", r.eta);
        assert!(rel(r.risk_bound, 4.751_576_000_953_599) < 1e-14, "{}", r.risk_bound);
        assert_eq!(r.report.stage, Stage::EndToEnd);
        assert!(r.composed.epsilon <= r.report.epsilon);
        assert!(r.composed.delta_total <= r.report.delta_total);

        assert!(matches!(end_to_end(&e2e(10_000, 0.0051, 10)), Err(Error::Precondition(_))));
        assert!(matches!(end_to_end(&e2e(15, 0.01, 10)), Err(Error::Precondition(_))));
    }

    #[test]
    fn target_mapping_examples() {
        let t = from_target(0.1, 3e-6, 400).unwrap();
        assert!(rel(t.delta, 1e-6) < 1e-12 && t.delta == t.delta_prime);
        assert!(rel(t.epsilon, 0.003_362_997_492_252_586) < 1e-14, "{}", t.epsilon);
        assert!(matches!(from_target(0.1, 0.1, 400), Err(Error::Domain(_))));
        assert!(matches!(from_target(0.1, 1e-12, 400), Err(Error::Domain(_))));
        assert!(matches!(from_target(10.0, 3e-6, 400), Err(Error::Domain(_))));
    }

    #[test]
    fn composition_is_monotone() {
        use rand::Rng;
        let mut r = rng::stream(3, &[]);
        for _ in 0..10_000 {
            let n = r.random_range(1..10_000);
            let e = r.random_range(1e-4..1.2);
            let tau = r.random_range(0..50_000);
            let step = StepPrivacy { epsilon_tilde: e, delta: 1e-9, m: 1, n };
            let a = compose(&step, tau, 1e-6).unwrap();
            let b = compose(&step, tau + 1, 1e-6).unwrap();
            assert!(a.epsilon <= b.epsilon && a.delta_total <= b.delta_total);
            let e2 = (e + r.random_range(0.0..0.05)).min(LINEARIZATION_LIMIT);
            let c = compose(&StepPrivacy { epsilon_tilde: e2, ..step }, tau, 1e-6).unwrap();
            assert!(a.epsilon <= c.epsilon);
        }
    }

    #[test]
    fn report_json_shape() {
        let r = amplify_by_subsampling(&StepPrivacy { epsilon_tilde: 0.5, delta: 1e-6, m: 1, n: 100 }).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["stage"], "subsampled");
        assert!(v["assumptions"].is_array());
        assert!(v["epsilon"].is_number() && v["delta_total"].is_number());
    }

    #[test]
    fn audit_rejects_thin_grids() {
        let cfg = AuditConfig { sigma: 1.0, lipschitz: 1.0, epsilon_tilde: 0.5, delta: 1e-6, trials: 100_000, grid: 500, seed: 0 };
        assert!(matches!(audit_single_step(&cfg), Err(Error::Config(_))));
        assert!(matches!(audit_single_step(&AuditConfig { grid: 501, trials: 10_000_000, ..cfg }), Err(Error::Config(_))));
    }

    #[test]
    fn small_audit_is_deterministic_and_partitions_mass() {
        let sigma = calibrate_sigma(1.0, 1e-6, 0.5).unwrap();
        let cfg = AuditConfig { sigma, lipschitz: 1.0, epsilon_tilde: 0.5, delta: 1e-6, trials: 100_000, grid: 50, seed: 4 };
        let a = audit_single_step(&cfg).unwrap();
        assert_eq!(a, audit_single_step(&cfg).unwrap());
        let ps: f64 = a.intervals.iter().map(|i| i.p_s).sum();
        let pq: f64 = a.intervals.iter().map(|i| i.p_sprime).sum();
        assert!((ps - 1.0).abs() < 1e-9 && (pq - 1.0).abs() < 1e-9);
        assert!(!a.significant);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1), Some("interval_lo,interval_hi,p_S,p_Sprime,violation"));
        assert_eq!(text.lines().count(), 52);
    }
}

//! Convex loss oracles `f(w, x)` with subgradients and Lipschitz certificates,
//! plus the synthetic populations the experiments draw from.

use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::ConvexSet;
use crate::linalg::{dot, norm, scale};
use crate::registry::{Params, Registry};

#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint {
    pub features: Vec<f64>,
    pub label: f64,
}

impl DataPoint {
    /// Validating constructor; rejects features whose norm exceeds `feature_bound`.
    pub fn new(features: Vec<f64>, label: f64, feature_bound: f64) -> Result<Self> {
        let r = norm(&features);
        if r > feature_bound * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "feature norm {r} exceeds bound {feature_bound}"
            )));
        }
        if !label.is_finite() {
            return Err(Error::Config("label must be finite".into()));
        }
        Ok(Self { features, label })
    }

    pub fn dimension(&self) -> usize {
        self.features.len()
    }
}

pub trait Loss: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;
    fn value(&self, w: &[f64], x: &DataPoint) -> f64;
    /// Any element of the subdifferential of `f(., x)` at `w`.
    fn subgradient(&self, w: &[f64], x: &DataPoint) -> Vec<f64>;
    /// Uniform bound on subgradient norms given `|features| <= feature_bound`.
    /// Losses without a global constant need the feasible set.
    fn lipschitz(&self, feature_bound: f64, domain: Option<&dyn ConvexSet>) -> Result<f64>;
    fn is_smooth(&self) -> bool;
    fn describe(&self) -> Value {
        json!({ "kind": self.name() })
    }
}

pub type LossOracle = Arc<dyn Loss>;

/// `max(0, 1 - y <w, x>)`
#[derive(Debug, Clone, Copy, Default)]
pub struct Hinge;

impl Loss for Hinge {
    fn name(&self) -> &'static str {
        "hinge"
    }

    fn value(&self, w: &[f64], x: &DataPoint) -> f64 {
        (1.0 - x.label * dot(w, &x.features)).max(0.0)
    }

    fn subgradient(&self, w: &[f64], x: &DataPoint) -> Vec<f64> {
        // At the kink (margin == 1) we return the extreme subgradient -y x.
        if x.label * dot(w, &x.features) > 1.0 {
            vec![0.0; w.len()]
        } else {
            scale(&x.features, -x.label)
        }
    }

    fn lipschitz(&self, feature_bound: f64, _: Option<&dyn ConvexSet>) -> Result<f64> {
        positive_bound(feature_bound)
    }

    fn is_smooth(&self) -> bool {
        false
    }
}

/// `|<w, x> - y|`
#[derive(Debug, Clone, Copy, Default)]
pub struct Absolute;

impl Loss for Absolute {
    fn name(&self) -> &'static str {
        "absolute"
    }

    fn value(&self, w: &[f64], x: &DataPoint) -> f64 {
        (dot(w, &x.features) - x.label).abs()
    }

    fn subgradient(&self, w: &[f64], x: &DataPoint) -> Vec<f64> {
        let r = dot(w, &x.features) - x.label;
        let s = if r > 0.0 {
            1.0
        } else if r < 0.0 {
            -1.0
        } else {
            0.0
        };
        scale(&x.features, s)
    }

    fn lipschitz(&self, feature_bound: f64, _: Option<&dyn ConvexSet>) -> Result<f64> {
        positive_bound(feature_bound)
    }

    fn is_smooth(&self) -> bool {
        false
    }
}

/// `(<w, x> - y)^2 / 2`. Only Lipschitz on a bounded domain, with labels
/// bounded by `label_bound` in absolute value.
#[derive(Debug, Clone, Copy)]
pub struct Squared {
    pub label_bound: f64,
}

impl Default for Squared {
    fn default() -> Self {
        Self { label_bound: 1.0 }
    }
}

impl Loss for Squared {
    fn name(&self) -> &'static str {
        "squared"
    }

    fn value(&self, w: &[f64], x: &DataPoint) -> f64 {
        let r = dot(w, &x.features) - x.label;
        0.5 * r * r
    }

    fn subgradient(&self, w: &[f64], x: &DataPoint) -> Vec<f64> {
        scale(&x.features, dot(w, &x.features) - x.label)
    }

    fn lipschitz(&self, feature_bound: f64, domain: Option<&dyn ConvexSet>) -> Result<f64> {
        let b = positive_bound(feature_bound)?;
        let set = domain.ok_or_else(|| {
            Error::Config("squared loss has no global Lipschitz constant; a bounded domain is required".into())
        })?;
        let w_max = set.max_norm();
        if !w_max.is_finite() {
            return Err(Error::Config("squared loss requires a bounded domain".into()));
        }
        Ok((w_max * b + self.label_bound) * b)
    }

    fn is_smooth(&self) -> bool {
        true
    }

    fn describe(&self) -> Value {
        json!({ "kind": "squared", "label_bound": self.label_bound })
    }
}

fn positive_bound(b: f64) -> Result<f64> {
    if b > 0.0 && b.is_finite() {
        Ok(b)
    } else {
        Err(Error::Config(format!("feature bound must be positive, got {b}")))
    }
}

fn check_point(w: &[f64], x: &DataPoint) -> Result<()> {
    if w.len() != x.dimension() {
        return Err(Error::dim("loss", w.len(), x.dimension()));
    }
    Ok(())
}

pub fn loss_value(oracle: &dyn Loss, w: &[f64], x: &DataPoint) -> Result<f64> {
    check_point(w, x)?;
    Ok(oracle.value(w, x))
}

pub fn subgradient(oracle: &dyn Loss, w: &[f64], x: &DataPoint) -> Result<Vec<f64>> {
    check_point(w, x)?;
    Ok(oracle.subgradient(w, x))
}

pub fn lipschitz_certificate(
    oracle: &dyn Loss,
    feature_bound: f64,
    domain: Option<&dyn ConvexSet>,
) -> Result<f64> {
    oracle.lipschitz(feature_bound, domain)
}

pub fn loss_registry() -> Registry<dyn Loss> {
    let mut reg: Registry<dyn Loss> = Registry::new("loss");
    reg.register("hinge", "max(0, 1 - y<w,x>), non-smooth", |_| Ok(Arc::new(Hinge)));
    reg.register("absolute", "|<w,x> - y|, non-smooth", |_| Ok(Arc::new(Absolute)));
    reg.register("squared", "(<w,x> - y)^2 / 2, smooth on bounded sets", |p| {
        Ok(Arc::new(Squared { label_bound: p.get_or("label_bound", 1.0)? }))
    });
    reg
}

/// Label rule of a synthetic population. Features are drawn uniformly from
/// the ball of radius `feature_bound` by [`PopulationSpec`].
pub trait LabelModel: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;
    fn label(&self, features: &[f64], rng: &mut dyn rand::RngCore) -> f64;
    fn dimension(&self) -> Option<usize> {
        None
    }
    fn describe(&self) -> Value;
}

/// `sign(<w_true, x>)`, flipped independently with probability `noise_rate`.
#[derive(Debug, Clone)]
pub struct LinearMargin {
    pub w_true: Vec<f64>,
    pub noise_rate: f64,
}

impl LinearMargin {
    pub fn new(w_true: Vec<f64>, noise_rate: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&noise_rate) {
            return Err(Error::Config(format!("noise_rate must lie in [0,1], got {noise_rate}")));
        }
        Ok(Self { w_true, noise_rate })
    }

    pub fn clean_label(&self, features: &[f64]) -> f64 {
        if dot(&self.w_true, features) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

impl LabelModel for LinearMargin {
    fn name(&self) -> &'static str {
        "linear-margin"
    }

    fn label(&self, features: &[f64], rng: &mut dyn rand::RngCore) -> f64 {
        let y = self.clean_label(features);
        if self.noise_rate > 0.0 && rng.random::<f64>() < self.noise_rate {
            -y
        } else {
            y
        }
    }

    fn dimension(&self) -> Option<usize> {
        Some(self.w_true.len())
    }

    fn describe(&self) -> Value {
        json!({ "kind": "linear-margin", "w_true": self.w_true, "noise_rate": self.noise_rate })
    }
}

/// Labels are fair coin flips in `{-1, +1}`, independent of the features.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformBall;

impl LabelModel for UniformBall {
    fn name(&self) -> &'static str {
        "uniform-ball"
    }

    fn label(&self, _: &[f64], rng: &mut dyn rand::RngCore) -> f64 {
        if rng.random::<bool>() {
            1.0
        } else {
            -1.0
        }
    }

    fn describe(&self) -> Value {
        json!({ "kind": "uniform-ball" })
    }
}

/// Real labels `<w_true, x>` plus optional Gaussian noise.
#[derive(Debug, Clone)]
pub struct LinearRegression {
    pub w_true: Vec<f64>,
    pub noise_std: f64,
}

impl LabelModel for LinearRegression {
    fn name(&self) -> &'static str {
        "linear-regression"
    }

    fn label(&self, features: &[f64], rng: &mut dyn rand::RngCore) -> f64 {
        let clean = dot(&self.w_true, features);
        if self.noise_std > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            clean + self.noise_std * z
        } else {
            clean
        }
    }

    fn dimension(&self) -> Option<usize> {
        Some(self.w_true.len())
    }

    fn describe(&self) -> Value {
        json!({ "kind": "linear-regression", "w_true": self.w_true, "noise_std": self.noise_std })
    }
}

fn default_direction(d: usize) -> Vec<f64> {
    vec![1.0 / (d as f64).sqrt(); d]
}

/// Registered label models. Parameters: `dimension`, `w_true`, `noise_rate`
/// (linear-margin) and `noise_std` (linear-regression).
pub fn generator_registry() -> Registry<dyn LabelModel> {
    let mut reg: Registry<dyn LabelModel> = Registry::new("population generator");
    reg.register("linear-margin", "sign(<w_true,x>) with label flips", |p| {
        let w = match p.vector("w_true")? {
            Some(w) => w,
            None => default_direction(p.require("dimension")?),
        };
        Ok(Arc::new(LinearMargin::new(w, p.get_or("noise_rate", 0.0)?)?))
    });
    reg.register("uniform-ball", "uniform features, random +-1 labels", |_| {
        Ok(Arc::new(UniformBall))
    });
    reg.register("linear-regression", "<w_true,x> + N(0, noise_std^2)", |p| {
        let w = match p.vector("w_true")? {
            Some(w) => w,
            None => default_direction(p.require("dimension")?),
        };
        let noise_std: f64 = p.get_or("noise_std", 0.0)?;
        if !(noise_std >= 0.0) {
            return Err(Error::Config("noise_std must be nonnegative".into()));
        }
        Ok(Arc::new(LinearRegression { w_true: w, noise_std }))
    });
    reg
}

/// The data distribution: features uniform in the radius-`feature_bound`
/// ball of `R^dimension`, labels from `generator`.
#[derive(Debug, Clone)]
pub struct PopulationSpec {
    pub generator: Arc<dyn LabelModel>,
    pub dimension: usize,
    pub feature_bound: f64,
    pub seed: u64,
}

impl PopulationSpec {
    pub fn new(
        generator: Arc<dyn LabelModel>,
        dimension: usize,
        feature_bound: f64,
        seed: u64,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        positive_bound(feature_bound)?;
        if let Some(d) = generator.dimension() {
            if d != dimension {
                return Err(Error::dim("population w_true", dimension, d));
            }
        }
        Ok(Self { generator, dimension, feature_bound, seed })
    }

    pub fn describe(&self) -> Value {
        json!({
            "generator": self.generator.describe(),
            "dimension": self.dimension,
            "feature_bound": self.feature_bound,
            "seed": self.seed,
        })
    }
}

fn uniform_in_ball<R: Rng + ?Sized>(d: usize, radius: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let r = norm(&g);
        if r > 0.0 {
            let u: f64 = rng.random();
            let s = radius * u.powf(1.0 / d as f64) / r;
            let mut x = scale(&g, s);
            // Guard against rounding pushing |x| a hair over the bound.
            let nx = norm(&x);
            if nx > radius {
                x = scale(&x, radius / nx);
            }
            return x;
        }
    }
}

pub fn draw_sample<R: Rng>(spec: &PopulationSpec, rng: &mut R) -> DataPoint {
    let features = uniform_in_ball(spec.dimension, spec.feature_bound, rng);
    let label = spec.generator.label(&features, rng);
    DataPoint { features, label }
}

pub fn draw_dataset<R: Rng>(spec: &PopulationSpec, n: usize, rng: &mut R) -> Result<Vec<DataPoint>> {
    if n == 0 {
        return Err(Error::Config("dataset size must be at least 1".into()));
    }
    Ok((0..n).map(|_| draw_sample(spec, rng)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetHeader {
    pub dim: usize,
    pub n: usize,
    pub seed: u64,
}

/// One record per line: features then label, comma-separated, after a
/// `# dim=<d> n=<n> seed=<s>` header.
pub fn write_dataset<W: Write>(mut out: W, data: &[DataPoint], seed: u64) -> Result<()> {
    let dim = data.first().map_or(0, DataPoint::dimension);
    writeln!(out, "# dim={dim} n={} seed={seed}", data.len())?;
    for p in data {
        for f in &p.features {
            write!(out, "{f:.16e},")?;
        }
        writeln!(out, "{:.16e}", p.label)?;
    }
    Ok(())
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<(DatasetHeader, Vec<DataPoint>)> {
    let mut lines = input.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Config("empty dataset file".into()))??;
    let header = parse_header(&first)?;
    let mut data = Vec::with_capacity(header.n);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = crate::registry::parse_list(&format!("dataset line {}", i + 2), &line)?;
        if vals.len() != header.dim + 1 {
            return Err(Error::dim(&format!("dataset line {}", i + 2), header.dim + 1, vals.len()));
        }
        let (f, y) = vals.split_at(header.dim);
        data.push(DataPoint { features: f.to_vec(), label: y[0] });
    }
    if data.len() != header.n {
        return Err(Error::Config(format!(
            "dataset header says n={} but found {} records",
            header.n,
            data.len()
        )));
    }
    Ok((header, data))
}

fn parse_header(line: &str) -> Result<DatasetHeader> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| Error::Config(format!("bad dataset header {line:?}")))?;
    let mut p = Params::new();
    for kv in body.split_whitespace() {
        if let Some((k, v)) = kv.split_once('=') {
            p.insert(k, v);
        }
    }
    Ok(DatasetHeader { dim: p.require("dim")?, n: p.require("n")?, seed: p.require("seed")? })
}

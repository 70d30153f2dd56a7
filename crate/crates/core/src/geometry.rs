//! Convex feasible sets, mirror-map potentials, and the mirror-descent step.

use std::fmt;
use std::sync::Arc;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{add_scaled, dist, dot, norm};
use crate::registry::Registry;

/// Absolute tolerance for set membership.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// A closed, bounded convex set `W` with a closed-form Euclidean projection.
pub trait ConvexSet: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;
    fn dimension(&self) -> usize;
    /// Euclidean-nearest point of the set. `point` has the set's dimension.
    fn project_unchecked(&self, point: &[f64]) -> Vec<f64>;
    fn contains(&self, point: &[f64]) -> bool;
    /// `sup_{w, v in W} |w - v|`
    fn diameter(&self) -> f64;
    /// `sup_{w in W} |w|`
    fn max_norm(&self) -> f64;
    /// The minimiser of `|w|^2 / 2` over the set, used as the default start.
    fn center(&self) -> Vec<f64>;
    fn describe(&self) -> Value;
}

pub type FeasibleSet = Arc<dyn ConvexSet>;

#[derive(Debug, Clone, PartialEq)]
pub struct L2Ball {
    radius: f64,
    center: Vec<f64>,
}

impl L2Ball {
    pub fn new(radius: f64, center: Vec<f64>) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!("l2ball radius must be positive, got {radius}")));
        }
        if center.is_empty() {
            return Err(Error::Config("l2ball dimension must be positive".into()));
        }
        Ok(Self { radius, center })
    }

    pub fn origin(radius: f64, dimension: usize) -> Result<Self> {
        Self::new(radius, vec![0.0; dimension])
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl ConvexSet for L2Ball {
    fn name(&self) -> &'static str {
        "l2ball"
    }

    fn dimension(&self) -> usize {
        self.center.len()
    }

    fn project_unchecked(&self, point: &[f64]) -> Vec<f64> {
        let r = dist(point, &self.center);
        if r <= self.radius {
            return point.to_vec();
        }
        let s = self.radius / r;
        self.center
            .iter()
            .zip(point)
            .map(|(c, p)| c + s * (p - c))
            .collect()
    }

    fn contains(&self, point: &[f64]) -> bool {
        dist(point, &self.center) <= self.radius + MEMBERSHIP_TOL
    }

    fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    fn max_norm(&self) -> f64 {
        norm(&self.center) + self.radius
    }

    fn center(&self) -> Vec<f64> {
        self.project_unchecked(&vec![0.0; self.dimension()])
    }

    fn describe(&self) -> Value {
        json!({ "kind": "l2ball", "radius": self.radius, "center": self.center })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::dim("box bounds", lower.len(), upper.len()));
        }
        if lower.is_empty() {
            return Err(Error::Config("box dimension must be positive".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::Config("box requires finite lower <= upper".into()));
        }
        let b = Self { lower, upper };
        if b.diameter() <= 0.0 {
            return Err(Error::Config("box is a single point".into()));
        }
        Ok(b)
    }
}

impl ConvexSet for BoxSet {
    fn name(&self) -> &'static str {
        "box"
    }

    fn dimension(&self) -> usize {
        self.lower.len()
    }

    fn project_unchecked(&self, point: &[f64]) -> Vec<f64> {
        point
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(p, (l, u))| p.clamp(*l, *u))
            .collect()
    }

    fn contains(&self, point: &[f64]) -> bool {
        point
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(p, (l, u))| *p >= l - MEMBERSHIP_TOL && *p <= u + MEMBERSHIP_TOL)
    }

    fn diameter(&self) -> f64 {
        dist(&self.lower, &self.upper)
    }

    fn max_norm(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| l.abs().max(u.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn center(&self) -> Vec<f64> {
        self.project_unchecked(&vec![0.0; self.dimension()])
    }

    fn describe(&self) -> Value {
        json!({ "kind": "box", "lower": self.lower, "upper": self.upper })
    }
}

fn check_dim(set: &dyn ConvexSet, what: &str, v: &[f64]) -> Result<()> {
    if v.len() != set.dimension() {
        return Err(Error::dim(what, set.dimension(), v.len()));
    }
    Ok(())
}

/// Euclidean projection onto `set`.
pub fn project(set: &dyn ConvexSet, point: &[f64]) -> Result<Vec<f64>> {
    check_dim(set, "project", point)?;
    Ok(set.project_unchecked(point))
}

/// A strongly convex mirror map `Phi` together with its convex conjugate.
pub trait Potential: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;
    /// Strong-convexity modulus `alpha` with respect to the l2 norm.
    fn strong_convexity(&self) -> f64;
    fn value(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64]) -> Vec<f64>;
    fn conjugate_value(&self, y: &[f64]) -> f64;
    fn conjugate_grad(&self, y: &[f64]) -> Vec<f64>;
    /// `argmin_{w in set} D_Phi(w || point)`
    fn bregman_project(&self, set: &dyn ConvexSet, point: &[f64]) -> Vec<f64>;

    /// `D_Phi(x || y) = Phi(x) - Phi(y) - <grad Phi(y), x - y>`
    fn divergence(&self, x: &[f64], y: &[f64]) -> f64 {
        let g = self.grad(y);
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        (self.value(x) - self.value(y) - dot(&g, &diff)).max(0.0)
    }

    /// Bregman divergence of the conjugate, `D_{Phi*}(x || y)`.
    fn conjugate_divergence(&self, x: &[f64], y: &[f64]) -> f64 {
        let g = self.conjugate_grad(y);
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        (self.conjugate_value(x) - self.conjugate_value(y) - dot(&g, &diff)).max(0.0)
    }
}

pub type SharedPotential = Arc<dyn Potential>;

/// `Phi(x) = |x|^2 / 2`. Self-conjugate, so both mirror maps are the identity
/// and the Bregman projection is the Euclidean one.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Euclidean;

impl Potential for Euclidean {
    fn name(&self) -> &'static str {
        "euclidean"
    }

    fn strong_convexity(&self) -> f64 {
        1.0
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * dot(x, x)
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn conjugate_value(&self, y: &[f64]) -> f64 {
        0.5 * dot(y, y)
    }

    fn conjugate_grad(&self, y: &[f64]) -> Vec<f64> {
        y.to_vec()
    }

    fn bregman_project(&self, set: &dyn ConvexSet, point: &[f64]) -> Vec<f64> {
        set.project_unchecked(point)
    }

    fn divergence(&self, x: &[f64], y: &[f64]) -> f64 {
        0.5 * x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    }

    fn conjugate_divergence(&self, x: &[f64], y: &[f64]) -> f64 {
        self.divergence(x, y)
    }
}

pub fn bregman(potential: &dyn Potential, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::dim("bregman", x.len(), y.len()));
    }
    Ok(potential.divergence(x, y))
}

/// One online mirror-descent update: map `w` to the dual space, step along
/// `-eta * g`, map back, then Bregman-project onto `set`.
pub fn mirror_step(
    potential: &dyn Potential,
    set: &dyn ConvexSet,
    w: &[f64],
    g: &[f64],
    eta: f64,
) -> Result<Vec<f64>> {
    check_dim(set, "mirror_step iterate", w)?;
    check_dim(set, "mirror_step gradient", g)?;
    if !(eta > 0.0) {
        return Err(Error::Config(format!("step size must be positive, got {eta}")));
    }
    Ok(mirror_step_unchecked(potential, set, w, g, eta))
}

pub(crate) fn mirror_step_unchecked(
    potential: &dyn Potential,
    set: &dyn ConvexSet,
    w: &[f64],
    g: &[f64],
    eta: f64,
) -> Vec<f64> {
    let dual = add_scaled(&potential.grad(w), -eta, g);
    let primal = potential.conjugate_grad(&dual);
    potential.bregman_project(set, &primal)
}

/// Registered feasible sets. Parameters: `dimension` plus
/// `radius` / `center` for `l2ball`, `lower` / `upper` for `box`.
pub fn set_registry() -> Registry<dyn ConvexSet> {
    let mut reg: Registry<dyn ConvexSet> = Registry::new("feasible set");
    reg.register("l2ball", "Euclidean ball (radius, center)", |p| {
        let center = match p.vector("center")? {
            Some(c) => c,
            None => vec![0.0; p.require("dimension")?],
        };
        if let Some(d) = p.get::<usize>("dimension")? {
            if d != center.len() {
                return Err(Error::dim("l2ball center", d, center.len()));
            }
        }
        Ok(Arc::new(L2Ball::new(p.get_or("radius", 1.0)?, center)?))
    });
    reg.register("box", "axis-aligned box (lower, upper)", |p| {
        let d: Option<usize> = p.get("dimension")?;
        let fill = |key: &str, default: f64| -> Result<Vec<f64>> {
            match p.vector(key)? {
                Some(v) if v.len() == 1 && d.is_some_and(|d| d > 1) => Ok(vec![v[0]; d.unwrap()]),
                Some(v) => Ok(v),
                None => Ok(vec![default; d.ok_or_else(|| Error::Config("box needs dimension".into()))?]),
            }
        };
        Ok(Arc::new(BoxSet::new(fill("lower", -1.0)?, fill("upper", 1.0)?)?))
    });
    reg
}

pub fn potential_registry() -> Registry<dyn Potential> {
    let mut reg: Registry<dyn Potential> = Registry::new("potential");
    reg.register("euclidean", "Phi = |x|^2 / 2", |_| Ok(Arc::new(Euclidean)));
    reg
}

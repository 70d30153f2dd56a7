//! Dense `f64` vector helpers. Vectors in this crate are plain `Vec<f64>`.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `a + s * b`
pub fn add_scaled(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// Dual norm of `h` with respect to the Euclidean norm, `max_{|w| <= 1} <h, w>`.
/// The l2 norm is self-dual.
pub fn dual_norm(h: &[f64]) -> f64 {
    norm(h)
}

/// Coordinatewise mean of a non-empty list of equal-length vectors.
pub fn mean(points: &[Vec<f64>]) -> Vec<f64> {
    let d = points[0].len();
    let mut acc = vec![0.0; d];
    for p in points {
        for (a, x) in acc.iter_mut().zip(p) {
            *a += x;
        }
    }
    let k = points.len() as f64;
    acc.iter_mut().for_each(|a| *a /= k);
    acc
}

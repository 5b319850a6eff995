//! Tropical-geometry primitives on the tropical projective torus.
//!
//! Points of `R^{n+1}/R1` are represented by their last-coordinate-zero
//! representative in `R^n`. All functions here work for any `n >= 1` and are
//! pure.

use crate::error::{Error, Result};

/// A point of the tropical projective torus, stored as its `R^n` representative.
#[derive(Debug, Clone, PartialEq)]
pub struct TropPoint(Vec<f64>);

/// A tangent or dual vector in `R^n` (a flux direction, a velocity, a gradient).
#[derive(Debug, Clone, PartialEq)]
pub struct TropVector(Vec<f64>);

fn check_finite(v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::invalid("tropical coordinates must have n >= 1"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("tropical coordinates must be finite"));
    }
    Ok(())
}

impl TropPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        check_finite(&coords)?;
        Ok(TropPoint(coords))
    }

    /// Builds the `R^n` representative of a point given in `R^{n+1}` coordinates.
    pub fn from_homogeneous(x: &[f64]) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::invalid("homogeneous coordinates need n + 1 >= 2 entries"));
        }
        let last = x[x.len() - 1];
        Self::new(x[..x.len() - 1].iter().map(|v| v - last).collect())
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dist(&self, other: &TropPoint) -> Result<f64> {
        trop_dist(&self.0, &other.0)
    }
}

impl TropVector {
    pub fn new(comps: Vec<f64>) -> Result<Self> {
        check_finite(&comps)?;
        Ok(TropVector(comps))
    }

    pub fn comps(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        trop_norm(&self.0)
    }

    pub fn zeta(&self) -> f64 {
        zeta(&self.0)
    }
}

/// Tropical metric between two `R^n` representatives.
///
/// Evaluated from the pairwise form: the largest of all `|d_i - d_j|` and all
/// `|d_i|`, where `d = x - y`.
pub fn trop_dist(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), actual: y.len() });
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let mut best = 0.0f64;
    for i in 0..d.len() {
        best = best.max(d[i].abs());
        for j in i + 1..d.len() {
            best = best.max((d[i] - d[j]).abs());
        }
    }
    Ok(best)
}

/// Tropical norm `max(max_i a_i, 0) - min(min_i a_i, 0)`.
pub fn trop_norm(a: &[f64]) -> f64 {
    let mut hi = 0.0f64;
    let mut lo = 0.0f64;
    for &v in a {
        hi = hi.max(v);
        lo = lo.min(v);
    }
    hi - lo
}

/// Largest absolute subset sum: the larger of the positive-part sum and the
/// magnitude of the negative-part sum.
pub fn zeta(b: &[f64]) -> f64 {
    let (pos, neg) = signed_sums(b);
    pos.max(-neg)
}

fn signed_sums(b: &[f64]) -> (f64, f64) {
    let mut pos = 0.0;
    let mut neg = 0.0;
    for &v in b {
        if v > 0.0 {
            pos += v;
        } else if v < 0.0 {
            neg += v;
        }
    }
    (pos, neg)
}

/// Index set (0-based, ascending) achieving [`zeta`].
///
/// Zero entries never belong to the set. When the positive and negative sums
/// tie in magnitude the positive indices are returned.
pub fn zeta_support(b: &[f64]) -> Result<Vec<usize>> {
    let (pos, neg) = signed_sums(b);
    if pos == 0.0 && neg == 0.0 {
        return Err(Error::DegenerateInput("zeta support of the zero vector is undefined"));
    }
    let take_positive = pos >= -neg;
    Ok(b.iter()
        .enumerate()
        .filter(|(_, &v)| if take_positive { v > 0.0 } else { v < 0.0 })
        .map(|(i, _)| i)
        .collect())
}

/// A real number or `+inf`, kept distinct from floating overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    PosInfinity,
}

impl ExtendedReal {
    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtendedReal::PosInfinity)
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::PosInfinity => None,
        }
    }

    /// Lossy conversion mapping `PosInfinity` to `f64::INFINITY`.
    pub fn to_f64(&self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

/// `H(b) = sup_a { a.b - (1/p) ||a||_tr^p }` in closed form.
pub fn hamiltonian(b: &[f64], p: f64) -> ExtendedReal {
    let z = zeta(b);
    if z == 0.0 {
        return ExtendedReal::Finite(0.0);
    }
    if p < 1.0 {
        return ExtendedReal::PosInfinity;
    }
    if p == 1.0 {
        return if z <= 1.0 { ExtendedReal::Finite(0.0) } else { ExtendedReal::PosInfinity };
    }
    ExtendedReal::Finite((p - 1.0) / p * z.powf(p / (p - 1.0)))
}

/// A maximiser of `a.b - (1/p) ||a||_tr^p`: entries `sign(b_i) * zeta(b)^{1/(p-1)}`
/// on the zeta support, zero elsewhere. Returns the zero vector for `b = 0`.
pub fn eta(b: &[f64], p: f64) -> Result<Vec<f64>> {
    if !(p > 1.0) {
        return Err(Error::invalid(format!("eta requires p > 1, got {p}")));
    }
    let mut out = vec![0.0; b.len()];
    let support = match zeta_support(b) {
        Ok(s) => s,
        Err(_) => return Ok(out),
    };
    let mag = zeta(b).powf(1.0 / (p - 1.0));
    for i in support {
        out[i] = b[i].signum() * mag;
    }
    Ok(out)
}

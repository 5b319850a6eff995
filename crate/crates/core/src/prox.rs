//! Closed-form proximal maps used by the PDHG loops.
//!
//! * [`shrink_tr`]: minimizer of `|a|^2/(2h) + ||a||_tr - b.a`, any dimension.
//! * [`flux_project_f`]: minimizer of `(mu/2)||m||_tr^2 + |m - c|^2/2` in 2-D.
//! * [`root_pos_cubic`]: largest nonnegative root of a monic cubic.

use crate::error::{Error, Result};
use crate::trop::trop_norm;

/// Tropical shrink. Returns `h * y` where `y` keeps `b` but clips its positive
/// entries to `t1` and its negative entries to `-t2`. The thresholds are the
/// water levels with `sum (b_i - t1)^+ = 1` over positive entries (and the
/// mirror for negatives), or zero when that side sums to at most one.
pub fn shrink_tr(b: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("shrink step h must be positive, got {h}")));
    }
    if b.is_empty() || b.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("shrink input must be a nonempty finite vector"));
    }
    let mut out = vec![0.0; b.len()];
    shrink_into(b, h, &mut out, &mut Vec::with_capacity(b.len()));
    Ok(out)
}

pub(crate) fn shrink_into(b: &[f64], h: f64, out: &mut [f64], scratch: &mut Vec<f64>) {
    let t1 = water_level(b.iter().copied().filter(|&v| v > 0.0), scratch);
    let t2 = water_level(b.iter().filter(|&&v| v < 0.0).map(|v| -v), scratch);
    for (o, &v) in out.iter_mut().zip(b) {
        *o = h * if v > 0.0 { v.min(t1) } else { v.max(-t2) };
    }
}

/// Threshold `t >= 0` with `sum (u_i - t)^+ = 1`, or 0 if `sum u <= 1`.
fn water_level(u: impl Iterator<Item = f64>, scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend(u);
    let total: f64 = scratch.iter().sum();
    if total <= 1.0 {
        return 0.0;
    }
    if scratch.len() == 1 {
        return scratch[0] - 1.0;
    }
    scratch.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut sum = 0.0;
    let mut t = 0.0;
    for (j, &uj) in scratch.iter().enumerate() {
        sum += uj;
        let cand = (sum - 1.0) / (j + 1) as f64;
        if uj > cand {
            t = cand;
        } else {
            break;
        }
    }
    t.max(0.0)
}

/// Objective minimized by [`flux_project_f`].
pub fn flux_objective(m: [f64; 2], c: [f64; 2], mu: f64) -> f64 {
    let n = trop_norm(&m);
    0.5 * mu * n * n + 0.5 * ((m[0] - c[0]).powi(2) + (m[1] - c[1]).powi(2))
}

fn between(hi: f64, mid: f64, lo: f64) -> bool {
    (hi >= mid && mid >= lo) || (hi <= mid && mid <= lo)
}

/// First row (1-based) of the six-branch case table whose region contains
/// `(c, mu)`, with boundaries included. `None` only when rounding leaves a
/// point in a sliver between regions.
pub fn flux_branch(c: [f64; 2], mu: f64) -> Option<usize> {
    let [c1, c2] = c;
    let a = 1.0 + mu;
    if between(c2, a * c1, 0.0) {
        Some(1)
    } else if between(c1, a * c2, 0.0) {
        Some(2)
    } else if between(-mu / a * c1, c2, -a / mu * c1) {
        Some(3)
    } else if between(-mu / a * c1, c2, 0.0) {
        Some(4)
    } else if between(c2, -a / mu * c1, 0.0) {
        Some(5)
    } else if between(a * c1, c2, c1 / a) {
        Some(6)
    } else {
        None
    }
}

fn flux_row(row: usize, c: [f64; 2], mu: f64) -> [f64; 2] {
    let [c1, c2] = c;
    let a = 1.0 + mu;
    match row {
        1 => [c1, c2 / a],
        2 => [c1 / a, c2],
        3 => {
            let d = 1.0 + 2.0 * mu;
            [(a * c1 + mu * c2) / d, (a * c2 + mu * c1) / d]
        }
        4 => [c1 / a, 0.0],
        5 => [0.0, c2 / a],
        _ => {
            let s = (c1 + c2) / (2.0 + mu);
            [s, s]
        }
    }
}

/// Proximal map of `(mu/2)||.||_tr^2` at `c` (two dimensions).
pub fn flux_project_f(c: [f64; 2], mu: f64) -> Result<[f64; 2]> {
    if !(mu > 0.0) || mu.is_nan() {
        return Err(Error::invalid(format!("mu must be positive, got {mu}")));
    }
    if !c[0].is_finite() || !c[1].is_finite() {
        return Err(Error::invalid("flux projection input must be finite"));
    }
    Ok(flux_project_unchecked(c, mu))
}

pub(crate) fn flux_project_unchecked(c: [f64; 2], mu: f64) -> [f64; 2] {
    if mu.is_infinite() {
        return [0.0, 0.0];
    }
    match flux_branch(c, mu) {
        Some(row) => flux_row(row, c, mu),
        None => (1..=6)
            .map(|r| flux_row(r, c, mu))
            .min_by(|x, y| flux_objective(*x, c, mu).total_cmp(&flux_objective(*y, c, mu)))
            .unwrap(),
    }
}

/// Six-branch evaluation of the 2-D tropical norm, kept independent of
/// [`trop_norm`] for cross-checking.
pub fn trop_norm_2d_cases(m: [f64; 2]) -> f64 {
    let [m1, m2] = m;
    if m1 >= m2 && m2 >= 0.0 {
        m1
    } else if m2 >= m1 && m1 >= 0.0 {
        m2
    } else if 0.0 >= m2 && m2 >= m1 {
        -m1
    } else if 0.0 >= m1 && m1 >= m2 {
        -m2
    } else if m1 >= 0.0 && 0.0 >= m2 {
        m1 - m2
    } else {
        m2 - m1
    }
}

fn cubic(a2: f64, a1: f64, a0: f64, x: f64) -> f64 {
    ((x + a2) * x + a1) * x + a0
}

fn polish(a2: f64, a1: f64, a0: f64, mut x: f64) -> f64 {
    let mut fx = cubic(a2, a1, a0, x);
    for _ in 0..8 {
        let d = (3.0 * x + 2.0 * a2) * x + a1;
        if d == 0.0 || fx == 0.0 {
            break;
        }
        let y = x - fx / d;
        let fy = cubic(a2, a1, a0, y);
        if !(fy.abs() < fx.abs()) {
            break;
        }
        x = y;
        fx = fy;
    }
    x
}

/// Real roots of `x^3 + a2 x^2 + a1 x + a0`, unordered.
fn real_roots(a2: f64, a1: f64, a0: f64) -> Vec<f64> {
    if a0 == 0.0 {
        // x (x^2 + a2 x + a1)
        let mut r = vec![0.0];
        let disc = a2 * a2 - 4.0 * a1;
        if disc >= 0.0 {
            let q = -0.5 * (a2 + disc.sqrt().copysign(a2));
            if q != 0.0 {
                r.push(q);
                r.push(a1 / q);
            } else {
                r.push(0.0);
            }
        }
        return r;
    }
    let shift = a2 / 3.0;
    let p = a1 - a2 * a2 / 3.0;
    let q = 2.0 * a2 * a2 * a2 / 27.0 - a2 * a1 / 3.0 + a0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let ts: Vec<f64> = if disc > 0.0 {
        let a = -(q.signum()) * ((q.abs() / 2.0) + disc.sqrt()).cbrt();
        let t = if a != 0.0 { a - p / (3.0 * a) } else { 0.0 };
        vec![t]
    } else if p == 0.0 {
        vec![(-q).cbrt()]
    } else {
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (2.0 * p) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| r * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos())
            .collect()
    };
    ts.into_iter().map(|t| polish(a2, a1, a0, t - shift)).collect()
}

/// Largest real root `>= 0` of `x^3 + a2 x^2 + a1 x + a0`.
pub fn root_pos_cubic(a2: f64, a1: f64, a0: f64) -> Result<f64> {
    if !(a2.is_finite() && a1.is_finite() && a0.is_finite()) {
        return Err(Error::invalid("cubic coefficients must be finite"));
    }
    real_roots(a2, a1, a0)
        .into_iter()
        .filter(|&x| x >= 0.0)
        .max_by(f64::total_cmp)
        .ok_or(Error::NoNonnegativeRoot { a2, a1, a0 })
}

/// Fast path for the density update `x^3 + a2 x^2 + a0` with `a0 <= 0`.
pub(crate) fn root_pos_density(a2: f64, a0: f64) -> f64 {
    if a0 == 0.0 {
        return (-a2).max(0.0);
    }
    root_pos_cubic(a2, 0.0, a0).unwrap_or(0.0)
}

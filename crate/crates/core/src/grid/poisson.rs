//! Neumann Poisson solves `-Lap(phi) = rhs` on rectangular boxes.
//!
//! The cell-centered Neumann Laplacian is diagonalized by the DCT-II along each
//! axis, with eigenvalues `(2 - 2 cos(pi k / N)) / h^2`. Conjugate gradients is
//! kept as an alternative satisfying the same residual contract. Both project
//! the right-hand side and the solution onto zero mean.

use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};
use serde::{Deserialize, Serialize};

use super::{laplacian_into, strides_of, subtract_mean, GridSpec, Potential};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoissonMethod {
    #[default]
    Auto,
    Dct,
    Cg,
}

/// Reusable solver for a fixed box shape and per-axis spacing.
pub struct PoissonSolver {
    shape: Vec<usize>,
    spacing: Vec<f64>,
    method: PoissonMethod,
    inv_eig: Vec<f64>,
    plans: Vec<Arc<dyn TransformType2And3<f64>>>,
    line: Vec<f64>,
    scratch: Vec<f64>,
    work: Vec<Vec<f64>>,
}

impl std::fmt::Debug for PoissonSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PoissonSolver")
            .field("shape", &self.shape)
            .field("spacing", &self.spacing)
            .field("method", &self.method)
            .finish()
    }
}

impl PoissonSolver {
    pub fn new(shape: &[usize], spacing: &[f64], method: PoissonMethod) -> Result<Self> {
        if shape.len() != spacing.len() {
            return Err(Error::DimensionMismatch { expected: shape.len(), actual: spacing.len() });
        }
        if shape.iter().any(|&n| n < 1) || spacing.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::invalid("poisson solver needs N >= 1 and positive spacing"));
        }
        let method = match method {
            PoissonMethod::Auto => PoissonMethod::Dct,
            m => m,
        };
        let total: usize = shape.iter().product();
        let mut s = PoissonSolver {
            shape: shape.to_vec(),
            spacing: spacing.to_vec(),
            method,
            inv_eig: Vec::new(),
            plans: Vec::new(),
            line: Vec::new(),
            scratch: Vec::new(),
            work: Vec::new(),
        };
        match method {
            PoissonMethod::Dct => {
                let mut planner = DctPlanner::new();
                s.plans = shape.iter().map(|&n| planner.plan_dct2(n)).collect();
                let scratch = s.plans.iter().map(|p| p.get_scratch_len()).max().unwrap_or(0);
                s.scratch = vec![0.0; scratch];
                s.line = vec![0.0; *shape.iter().max().unwrap()];
                s.inv_eig = inverse_eigenvalues(shape, spacing);
            }
            _ => {
                s.work = vec![vec![0.0; total]; 4];
            }
        }
        Ok(s)
    }

    pub fn method(&self) -> PoissonMethod {
        self.method
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes the zero-mean solution of `-Lap(x) = rhs - mean(rhs)` into `out`.
    pub fn solve_into(&mut self, rhs: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.len();
        if rhs.len() != n || out.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: rhs.len().min(out.len()) });
        }
        match self.method {
            PoissonMethod::Cg => self.solve_cg(rhs, out),
            _ => self.solve_dct(rhs, out),
        }
        Ok(())
    }

    pub fn solve(&mut self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; rhs.len()];
        self.solve_into(rhs, &mut out)?;
        Ok(out)
    }

    fn solve_dct(&mut self, rhs: &[f64], out: &mut [f64]) {
        out.copy_from_slice(rhs);
        for v in 0..self.shape.len() {
            self.transform_axis(out, v, false);
        }
        for (o, w) in out.iter_mut().zip(&self.inv_eig) {
            *o *= w;
        }
        for v in 0..self.shape.len() {
            self.transform_axis(out, v, true);
        }
        subtract_mean(out);
    }

    fn transform_axis(&mut self, data: &mut [f64], v: usize, inverse: bool) {
        let n = self.shape[v];
        if n == 1 {
            return;
        }
        let stride = strides_of(&self.shape)[v];
        let plan = &self.plans[v];
        let line = &mut self.line[..n];
        let block = stride * n;
        for start in (0..data.len()).step_by(block) {
            for off in 0..stride {
                let base = start + off;
                for k in 0..n {
                    line[k] = data[base + k * stride];
                }
                if inverse {
                    plan.process_dct3_with_scratch(line, &mut self.scratch);
                } else {
                    plan.process_dct2_with_scratch(line, &mut self.scratch);
                }
                for k in 0..n {
                    data[base + k * stride] = line[k];
                }
            }
        }
    }

    fn solve_cg(&mut self, rhs: &[f64], out: &mut [f64]) {
        let [r, p, ap, b] = &mut self.work[..] else { unreachable!() };
        b.copy_from_slice(rhs);
        subtract_mean(b);
        let tol = 1e-12 * inf_norm(b).max(1.0);
        out.iter_mut().for_each(|x| *x = 0.0);
        r.copy_from_slice(b);
        p.copy_from_slice(b);
        let mut rr = dot(r, r);
        let max_iter = 20 * out.len() + 100;
        for _ in 0..max_iter {
            if inf_norm(r) <= tol {
                break;
            }
            laplacian_into(&self.shape, &self.spacing, p, ap);
            ap.iter_mut().for_each(|x| *x = -*x);
            let pap = dot(p, ap);
            if pap <= 0.0 {
                break;
            }
            let alpha = rr / pap;
            for i in 0..out.len() {
                out[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            subtract_mean(r);
            let rr_new = dot(r, r);
            let beta = rr_new / rr;
            rr = rr_new;
            for i in 0..out.len() {
                p[i] = r[i] + beta * p[i];
            }
        }
        subtract_mean(out);
    }
}

/// `1 / lambda_k` for the eigenvalues of `-Lap`, with the DCT round-trip
/// scaling `prod_v 2 / N_v` folded in and the constant mode set to zero.
fn inverse_eigenvalues(shape: &[usize], spacing: &[f64]) -> Vec<f64> {
    let axis_eig: Vec<Vec<f64>> = shape
        .iter()
        .zip(spacing)
        .map(|(&n, &h)| {
            (0..n)
                .map(|k| (2.0 - 2.0 * (std::f64::consts::PI * k as f64 / n as f64).cos()) / (h * h))
                .collect()
        })
        .collect();
    let scale: f64 = shape.iter().map(|&n| if n > 1 { 2.0 / n as f64 } else { 1.0 }).product();
    let strides = strides_of(shape);
    let total: usize = shape.iter().product();
    (0..total)
        .map(|idx| {
            let lam: f64 = (0..shape.len())
                .map(|v| axis_eig[v][(idx / strides[v]) % shape[v]])
                .sum();
            if idx == 0 { 0.0 } else { scale / lam }
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// One-shot spatial Neumann solve on `grid`.
pub fn solve_neumann_poisson(grid: &GridSpec, rhs: &[f64]) -> Result<Potential> {
    let mut solver =
        PoissonSolver::new(grid.shape(), &vec![grid.dx(); grid.ndim()], PoissonMethod::Auto)?;
    let values = solver.solve(rhs)?;
    Potential::new(grid.clone(), values)
}

/// One-shot space-time solve of `-(d_tt + Lap) phi = rhs` with Neumann
/// conditions on every axis. `rhs` is slice-major: `nt` blocks of
/// `grid.num_cells()` values.
pub fn solve_spacetime_poisson(grid: &GridSpec, nt: usize, dt: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    let (shape, spacing) = spacetime_layout(grid, nt, dt);
    let mut solver = PoissonSolver::new(&shape, &spacing, PoissonMethod::Auto)?;
    solver.solve(rhs)
}

pub(crate) fn spacetime_layout(grid: &GridSpec, nt: usize, dt: f64) -> (Vec<usize>, Vec<f64>) {
    let mut shape = vec![nt];
    shape.extend_from_slice(grid.shape());
    let mut spacing = vec![dt];
    spacing.extend(std::iter::repeat(grid.dx()).take(grid.ndim()));
    (shape, spacing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn neg_lap(shape: &[usize], spacing: &[f64], x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        laplacian_into(shape, spacing, x, &mut out);
        out.iter().map(|v| -v).collect()
    }

    fn check_round_trip(shape: &[usize], spacing: &[f64], method: PoissonMethod, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n: usize = shape.iter().product();
        let mut psi: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        subtract_mean(&mut psi);
        let rhs = neg_lap(shape, spacing, &psi);
        let mut solver = PoissonSolver::new(shape, spacing, method).unwrap();
        let phi = solver.solve(&rhs).unwrap();
        let err = psi.iter().zip(&phi).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-9, "{shape:?} {method:?}: round trip error {err}");
        let res = neg_lap(shape, spacing, &phi);
        let r = res.iter().zip(&rhs).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(r <= 1e-10 * inf_norm(&rhs).max(1.0), "{shape:?} {method:?}: residual {r}");
    }

    #[test]
    fn round_trip_dct_and_cg() {
        for (shape, spacing) in [
            (vec![16, 16], vec![1.0 / 16.0; 2]),
            (vec![7, 12], vec![0.1, 0.1]),
            (vec![5, 9, 6], vec![0.2, 0.05, 0.05]),
            (vec![33], vec![0.03]),
        ] {
            check_round_trip(&shape, &spacing, PoissonMethod::Dct, 1);
            check_round_trip(&shape, &spacing, PoissonMethod::Cg, 2);
        }
    }

    #[test]
    fn zero_and_constant_rhs() {
        let g = GridSpec::unit(8, 2).unwrap();
        let phi = solve_neumann_poisson(&g, &vec![0.0; 64]).unwrap();
        assert!(phi.values().iter().all(|&v| v == 0.0));
        let phi = solve_neumann_poisson(&g, &vec![2.5; 64]).unwrap();
        assert!(phi.values().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn non_zero_mean_rhs_is_projected() {
        let shape = [6, 5];
        let spacing = [0.2, 0.2];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rhs: Vec<f64> = (0..30).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mut centered = rhs.clone();
        subtract_mean(&mut centered);
        let mut s = PoissonSolver::new(&shape, &spacing, PoissonMethod::Dct).unwrap();
        let phi = s.solve(&rhs).unwrap();
        assert!(phi.iter().sum::<f64>().abs() < 1e-12);
        let res = neg_lap(&shape, &spacing, &phi);
        for (a, b) in res.iter().zip(&centered) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn spacetime_eigenmode() {
        let g = GridSpec::unit(8, 2).unwrap();
        let (nt, dt) = (5usize, 0.25);
        let (k, l) = (2usize, 3usize);
        let n = g.num_cells();
        let mode: Vec<f64> = (0..nt * n)
            .map(|idx| {
                let (t, c) = (idx / n, idx % n);
                let x = g.unravel(c)[0];
                let pi = std::f64::consts::PI;
                (pi * k as f64 * (t as f64 + 0.5) / nt as f64).cos()
                    * (pi * l as f64 * (x as f64 + 0.5) / 8.0).cos()
            })
            .collect();
        let lam = (2.0 - 2.0 * (std::f64::consts::PI * k as f64 / nt as f64).cos()) / (dt * dt)
            + (2.0 - 2.0 * (std::f64::consts::PI * l as f64 / 8.0).cos()) / (g.dx() * g.dx());
        let phi = solve_spacetime_poisson(&g, nt, dt, &mode).unwrap();
        for (p, m) in phi.iter().zip(&mode) {
            assert!((p - m / lam).abs() < 1e-12, "{p} vs {}", m / lam);
        }
        check_round_trip(&[nt, 8, 8], &[dt, 0.125, 0.125], PoissonMethod::Dct, 5);
    }
}

//! Space-time Wasserstein-2 solver (two spatial dimensions).
//!
//! Unknowns live on `nt` slices at `t_n = n / (nt - 1)`: physical density
//! `rho` (end slices pinned), flux `m` and potential `phi`. With `D` the
//! three-branch time stencil, one iteration is
//!
//! ```text
//! rho <- root+(-(rho - tau D^T phi), 0, -tau ||m||_tr^2 / 2)    interior slices
//! m   <- F(m + tau grad phi, tau / rho)
//! phi <- phi + h (-(d_tt + Lap))^{-1} (D(2 rho_new - rho) + div(2 m_new - m))
//! ```
//!
//! The energy is `E = sum ||m||_tr^2 / (2 rho)` and the distance
//! `sqrt(2 E dx^d dt)`.

use crate::error::{Error, Result};
use crate::grid::{
    div_into, grad_into, zero_boundary, DensityField, GridSpec, PoissonSolver, TimeStencil,
};
use crate::prox::{flux_project_unchecked, root_pos_density};
use crate::solver::{power_iteration, relative_change, ConvergenceReport, IterationRecord, SolverConfig};
use crate::trop::{trop_norm, zeta};
use crate::w1::check_pair;

/// Largest `mu = tau / rho` passed to the flux projection; beyond it `m = 0`.
pub const MU_CAP: f64 = 1e12;

/// Slice-mass error (mass units) required before the energy test may stop.
pub const SLICE_MASS_TOLERANCE: f64 = 1e-7;

/// Density, relative to the largest one, above which a cell is active in the
/// Hamilton-Jacobi diagnostics.
pub const HJ_ACTIVITY: f64 = 1e-2;

/// Time stamps of the emitted snapshots.
pub const SNAPSHOT_TIMES: [f64; 6] = [0.0, 0.21, 0.42, 0.64, 0.86, 1.0];

#[derive(Debug, Clone)]
pub struct SpaceTimePath {
    grid: GridSpec,
    stencil: TimeStencil,
    /// Physical density, slice-major.
    pub rho: Vec<f64>,
    /// Cell-aligned flux components, each slice-major.
    pub m: Vec<Vec<f64>>,
    pub phi: Vec<f64>,
}

impl SpaceTimePath {
    /// Linear interpolation between `q0` and `q1`, zero flux and potential.
    pub fn interpolate(q0: &DensityField, q1: &DensityField, nt: usize) -> Result<Self> {
        check_pair(q0, q1)?;
        let grid = q0.grid().clone();
        let stencil = TimeStencil::new(nt, 1.0 / (nt - 1) as f64)?;
        let (r0, r1) = (q0.physical(), q1.physical());
        let n = grid.num_cells();
        let mut rho = Vec::with_capacity(nt * n);
        for s in 0..nt {
            let t = s as f64 / (nt - 1) as f64;
            rho.extend(r0.iter().zip(&r1).map(|(a, b)| (1.0 - t) * a + t * b));
        }
        Ok(SpaceTimePath {
            m: vec![vec![0.0; nt * n]; grid.ndim()],
            phi: vec![0.0; nt * n],
            rho,
            grid,
            stencil,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn nt(&self) -> usize {
        self.stencil.nt()
    }

    pub fn dt(&self) -> f64 {
        self.stencil.dt()
    }

    pub fn stencil(&self) -> &TimeStencil {
        &self.stencil
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    /// Slice nearest to time `t`.
    pub fn nearest_slice(&self, t: f64) -> usize {
        ((t.clamp(0.0, 1.0) * (self.nt() - 1) as f64).round() as usize).min(self.nt() - 1)
    }

    fn cells(&self) -> usize {
        self.grid.num_cells()
    }

    /// Per-cell masses of slice `n`.
    pub fn slice_masses(&self, n: usize) -> Vec<f64> {
        let c = self.cells();
        let vol = self.grid.cell_volume();
        self.rho[n * c..(n + 1) * c].iter().map(|r| r * vol).collect()
    }

    /// Slice `n` as a density field of cell masses. Tiny negative rounding is
    /// clamped to zero.
    pub fn slice_density(&self, n: usize) -> Result<DensityField> {
        let q = self.slice_masses(n).into_iter().map(|v| v.max(0.0)).collect();
        DensityField::new(self.grid.clone(), q)
    }

    pub fn slice_mass(&self, n: usize) -> f64 {
        self.slice_masses(n).iter().sum()
    }

    /// `sum ||m||_tr^2 / (2 rho)` with `0/0 = 0`.
    pub fn energy(&self) -> f64 {
        energy_of(&self.rho, &self.m, &mut vec![0.0; self.grid.ndim()])
    }

    /// `sqrt(2 E dx^d dt)`.
    pub fn distance(&self) -> f64 {
        (2.0 * self.energy() * self.grid.cell_volume() * self.dt()).sqrt()
    }
}

fn energy_of(rho: &[f64], m: &[Vec<f64>], buf: &mut [f64]) -> f64 {
    let mut e = 0.0;
    for (i, &r) in rho.iter().enumerate() {
        for (b, c) in buf.iter_mut().zip(m) {
            *b = c[i];
        }
        let n = trop_norm(buf);
        if n != 0.0 {
            e += if r > 0.0 { n * n / (2.0 * r) } else { f64::INFINITY };
        }
    }
    e
}

#[derive(Debug, Clone)]
pub struct W2Solution {
    pub path: SpaceTimePath,
    pub distance: f64,
    pub report: ConvergenceReport,
}

/// Per-slice spatial operators applied to slice-major data.
struct SpaceOps {
    shape: Vec<usize>,
    dx: f64,
    cells: usize,
    nt: usize,
    tmp_in: Vec<Vec<f64>>,
    tmp_out: Vec<Vec<f64>>,
}

impl SpaceOps {
    fn new(grid: &GridSpec, nt: usize) -> Self {
        let n = grid.num_cells();
        SpaceOps {
            shape: grid.shape().to_vec(),
            dx: grid.dx(),
            cells: n,
            nt,
            tmp_in: vec![vec![0.0; n]; grid.ndim()],
            tmp_out: vec![vec![0.0; n]; grid.ndim()],
        }
    }

    fn grad(&mut self, phi: &[f64], out: &mut [Vec<f64>]) {
        let c = self.cells;
        for s in 0..self.nt {
            let mut slices: Vec<&mut [f64]> = out.iter_mut().map(|o| &mut o[s * c..(s + 1) * c]).collect();
            grad_into(&self.shape, self.dx, &phi[s * c..(s + 1) * c], &mut self.tmp_out);
            for (dst, src) in slices.iter_mut().zip(&self.tmp_out) {
                dst.copy_from_slice(src);
            }
        }
    }

    fn div(&mut self, m: &[Vec<f64>], out: &mut [f64]) {
        let c = self.cells;
        for s in 0..self.nt {
            for (dst, src) in self.tmp_in.iter_mut().zip(m) {
                dst.copy_from_slice(&src[s * c..(s + 1) * c]);
            }
            div_into(&self.shape, self.dx, &self.tmp_in, &mut out[s * c..(s + 1) * c]);
        }
    }

    fn zero_boundary(&mut self, m: &mut [Vec<f64>]) {
        let c = self.cells;
        for s in 0..self.nt {
            for (dst, src) in self.tmp_in.iter_mut().zip(m.iter()) {
                dst.copy_from_slice(&src[s * c..(s + 1) * c]);
            }
            zero_boundary(&self.shape, &mut self.tmp_in);
            for (dst, src) in m.iter_mut().zip(&self.tmp_in) {
                dst[s * c..(s + 1) * c].copy_from_slice(src);
            }
        }
    }
}

fn spacetime_poisson(grid: &GridSpec, stencil: &TimeStencil, cfg: &SolverConfig) -> Result<PoissonSolver> {
    let mut shape = vec![stencil.nt()];
    shape.extend_from_slice(grid.shape());
    let mut spacing = vec![stencil.dt()];
    spacing.extend(std::iter::repeat(grid.dx()).take(grid.ndim()));
    PoissonSolver::new(&shape, &spacing, cfg.poisson)
}

/// Estimates `||(-Lap_{t,x})^{-1/2} K||^2` for `K(rho, m) = D rho + div m`,
/// with `rho` restricted to interior slices.
pub fn w2_operator_norm_sq(grid: &GridSpec, nt: usize, cfg: &SolverConfig) -> Result<f64> {
    let stencil = TimeStencil::new(nt, 1.0 / (nt - 1) as f64)?;
    let mut poisson = spacetime_poisson(grid, &stencil, cfg)?;
    let (c, d) = (grid.num_cells(), grid.ndim());
    let total = nt * c;
    let mut ops = SpaceOps::new(grid, nt);
    let mut rho = vec![0.0; total];
    let mut m = vec![vec![0.0; total]; d];
    let mut k = vec![0.0; total];
    let mut dv = vec![0.0; total];
    let mut u = vec![0.0; total];
    let mut g = vec![vec![0.0; total]; d];
    let mut err = None;
    let lambda = power_iteration(total * (d + 1), cfg.power_iterations, cfg.seed, |x, y| {
        rho.copy_from_slice(&x[..total]);
        rho[..c].iter_mut().for_each(|v| *v = 0.0);
        rho[total - c..].iter_mut().for_each(|v| *v = 0.0);
        for v in 0..d {
            m[v].copy_from_slice(&x[(v + 1) * total..(v + 2) * total]);
        }
        ops.zero_boundary(&mut m);
        stencil.apply(&rho, c, &mut k);
        ops.div(&m, &mut dv);
        k.iter_mut().zip(&dv).for_each(|(a, b)| *a += b);
        if let Err(e) = poisson.solve_into(&k, &mut u) {
            err.get_or_insert(e);
        }
        // K^T u = (D^T u on interior slices, -grad u)
        stencil.apply_transpose(&u, c, &mut y[..total]);
        y[..c].iter_mut().for_each(|v| *v = 0.0);
        y[total - c..total].iter_mut().for_each(|v| *v = 0.0);
        ops.grad(&u, &mut g);
        for v in 0..d {
            for (dst, src) in y[(v + 1) * total..(v + 2) * total].iter_mut().zip(&g[v]) {
                *dst = -src;
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(lambda),
    }
}

fn spread(shape: &[usize], from: &[bool], into: &mut [bool]) {
    let ny = shape[1];
    for (idx, _) in from.iter().enumerate().filter(|(_, &on)| on) {
        into[idx] = true;
        if idx / ny + 1 < shape[0] {
            into[idx + ny] = true;
        }
        if idx % ny + 1 < ny {
            into[idx + 1] = true;
        }
    }
}

/// Cells that can carry mass at the last slice when starting from `start`.
///
/// A flux entry at cell `c` is nonzero only where `rho > 0` and moves mass
/// across the `+x`/`+y` faces of `c`, so with the centered time stencil
/// `supp rho^{n+1}` lies in `S^{n-1} + S^n + (S^n + e_x) + (S^n + e_y)`.
fn reachable(shape: &[usize], start: &[bool], nt: usize) -> Vec<bool> {
    let mut prev = start.to_vec();
    let mut cur = start.to_vec();
    spread(shape, start, &mut cur);
    for _ in 2..nt {
        let mut next = prev.clone();
        spread(shape, &cur, &mut next);
        prev = std::mem::replace(&mut cur, next);
    }
    cur
}

/// Whether the discrete space-time problem with `nt` slices has a feasible
/// path: every target cell must be reachable forward from the source support
/// and every source cell backward from the target support. This is a
/// necessary condition. Both directions spread only towards `+x`/`+y`, so
/// distinct point masses never pass.
pub fn support_reachable(q0: &DensityField, q1: &DensityField, nt: usize) -> Result<bool> {
    check_pair(q0, q1)?;
    let grid = q0.grid();
    if grid.ndim() != 2 || nt < 2 {
        return Err(Error::invalid("support reachability needs a 2-D grid and nt >= 2"));
    }
    let s0: Vec<bool> = q0.values().iter().map(|&v| v > 0.0).collect();
    let s1: Vec<bool> = q1.values().iter().map(|&v| v > 0.0).collect();
    let fwd = reachable(grid.shape(), &s0, nt);
    if s1.iter().zip(&fwd).any(|(&t, &r)| t && !r) {
        return Ok(false);
    }
    // Backward in time the supports obey the same inclusion.
    let bwd = reachable(grid.shape(), &s1, nt);
    Ok(!s0.iter().zip(&bwd).any(|(&t, &r)| t && !r))
}

pub fn solve_w2(q0: &DensityField, q1: &DensityField, cfg: &SolverConfig) -> Result<W2Solution> {
    cfg.validate()?;
    if q0.grid().ndim() != 2 {
        return Err(Error::invalid("the Wasserstein-2 solver supports two spatial dimensions only"));
    }
    let nt = cfg.time_slices;
    let mut path = SpaceTimePath::interpolate(q0, q1, nt)?;
    if !support_reachable(q0, q1, nt)? {
        return Err(Error::Unreachable { slices: nt });
    }
    let grid = path.grid.clone();
    let stencil = path.stencil;
    let (c, d) = (grid.num_cells(), grid.ndim());
    let total = nt * c;
    let vol = grid.cell_volume();
    let mass = q0.mass();

    let op = w2_operator_norm_sq(&grid, nt, cfg)?;
    let (tau, h) = cfg.steps(op);
    let mut poisson = spacetime_poisson(&grid, &stencil, cfg)?;
    let mut ops = SpaceOps::new(&grid, nt);

    let mut dtphi = vec![0.0; total];
    let mut g = vec![vec![0.0; total]; d];
    let mut rho_new = path.rho.clone();
    let mut m_new = vec![vec![0.0; total]; d];
    let mut bar_rho = vec![0.0; total];
    let mut bar_m = vec![vec![0.0; total]; d];
    let mut rhs = vec![0.0; total];
    let mut dv = vec![0.0; total];
    let mut dphi = vec![0.0; total];
    let mut buf = vec![0.0; d];

    let mut history = Vec::new();
    let mut prev_energy = path.energy();
    let mut converged = false;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;

    for k in 1..=cfg.max_iter {
        iterations = k;
        stencil.apply_transpose(&path.phi, c, &mut dtphi);
        ops.grad(&path.phi, &mut g);

        for idx in c..total - c {
            for (b, comp) in buf.iter_mut().zip(&path.m) {
                *b = comp[idx];
            }
            let nm = trop_norm(&buf);
            let a2 = -(path.rho[idx] - tau * dtphi[idx]);
            rho_new[idx] = root_pos_density(a2, -0.5 * tau * nm * nm);
        }

        for idx in 0..total {
            let r = rho_new[idx];
            let cvec = [path.m[0][idx] + tau * g[0][idx], path.m[1][idx] + tau * g[1][idx]];
            let out = if r > 0.0 && tau / r <= MU_CAP {
                flux_project_unchecked(cvec, tau / r)
            } else {
                [0.0, 0.0]
            };
            m_new[0][idx] = out[0];
            m_new[1][idx] = out[1];
        }
        ops.zero_boundary(&mut m_new);

        for idx in 0..total {
            bar_rho[idx] = 2.0 * rho_new[idx] - path.rho[idx];
        }
        for v in 0..d {
            for idx in 0..total {
                bar_m[v][idx] = 2.0 * m_new[v][idx] - path.m[v][idx];
            }
        }
        stencil.apply(&bar_rho, c, &mut rhs);
        ops.div(&bar_m, &mut dv);
        rhs.iter_mut().zip(&dv).for_each(|(a, b)| *a += b);
        poisson.solve_into(&rhs, &mut dphi)?;
        path.phi.iter_mut().zip(&dphi).for_each(|(p, u)| *p += h * u);

        std::mem::swap(&mut path.rho, &mut rho_new);
        std::mem::swap(&mut path.m, &mut m_new);

        let energy = energy_of(&path.rho, &path.m, &mut buf);
        let rel = relative_change(energy, prev_energy);
        prev_energy = energy;
        let cont = continuity_with(&path, &mut ops, &mut rhs, &mut dv);
        let mass_err = (0..nt)
            .map(|s| (path.rho[s * c..(s + 1) * c].iter().sum::<f64>() * vol - mass).abs())
            .fold(0.0, f64::max);
        residual = cont;
        history.push(IterationRecord { iter: k, objective: energy, rel_err: rel, residual: cont });
        if !energy.is_finite() && k > 1 {
            break;
        }
        if rel <= cfg.tolerance && mass_err <= SLICE_MASS_TOLERANCE && (energy > 0.0 || cont == 0.0) {
            converged = true;
            break;
        }
    }

    let distance = (2.0 * prev_energy * vol * path.dt()).sqrt();
    Ok(W2Solution {
        path,
        distance,
        report: ConvergenceReport {
            iterations,
            converged,
            history,
            final_residual: residual,
            primal_step: tau,
            dual_step: h,
            operator_norm_sq: op,
        },
    })
}

fn continuity_with(path: &SpaceTimePath, ops: &mut SpaceOps, dtr: &mut [f64], dv: &mut [f64]) -> f64 {
    let c = path.cells();
    path.stencil.apply(&path.rho, c, dtr);
    ops.div(&path.m, dv);
    let vol = path.grid.cell_volume();
    dtr.iter().zip(dv.iter()).fold(0.0f64, |acc, (a, b)| acc.max(((a + b) * vol).abs()))
}

/// `max |D rho + div m| dx^d` over all slices and cells.
pub fn continuity_residual(path: &SpaceTimePath) -> f64 {
    let total = path.rho.len();
    let mut ops = SpaceOps::new(&path.grid, path.nt());
    continuity_with(path, &mut ops, &mut vec![0.0; total], &mut vec![0.0; total])
}

/// `-(D^T phi) + zeta(grad phi)^2 / 2` on interior slices at cells where
/// `rho > activity * max rho`; the discrete form of `d_t phi + zeta^2/2`.
fn hj_values(path: &SpaceTimePath, activity: f64) -> Vec<f64> {
    let c = path.cells();
    let nt = path.nt();
    let total = nt * c;
    let d = path.grid.ndim();
    let mut dtphi = vec![0.0; total];
    path.stencil.apply_transpose(&path.phi, c, &mut dtphi);
    let mut g = vec![vec![0.0; total]; d];
    SpaceOps::new(&path.grid, nt).grad(&path.phi, &mut g);
    let peak = path.rho[c..total - c].iter().cloned().fold(0.0, f64::max);
    let mut buf = vec![0.0; d];
    let mut out = Vec::new();
    for idx in c..total - c {
        if path.rho[idx] > activity * peak && peak > 0.0 {
            for (b, comp) in buf.iter_mut().zip(&g) {
                *b = comp[idx];
            }
            let z = zeta(&buf);
            out.push(-dtphi[idx] + 0.5 * z * z);
        }
    }
    out
}

/// Largest positive part of the Hamilton-Jacobi inequality on active cells.
pub fn hj_inequality_check_with(path: &SpaceTimePath, activity: f64) -> f64 {
    hj_values(path, activity).into_iter().fold(0.0, |a, v| a.max(v.max(0.0)))
}

pub fn hj_inequality_check(path: &SpaceTimePath) -> f64 {
    hj_inequality_check_with(path, HJ_ACTIVITY)
}

/// Largest absolute value of the Hamilton-Jacobi expression on active cells,
/// where equality holds at an optimum.
pub fn hj_equality_residual(path: &SpaceTimePath, activity: f64) -> f64 {
    hj_values(path, activity).into_iter().fold(0.0, |a, v| a.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stationary_path() {
        let g = GridSpec::unit(8, 2).unwrap();
        let q = DensityField::normalized(g, (0..64).map(|k| 1.0 + (k % 3) as f64).collect()).unwrap();
        let cfg = SolverConfig { time_slices: 5, ..SolverConfig::w2_default() };
        let sol = solve_w2(&q, &q, &cfg).unwrap();
        assert!(sol.report.converged);
        assert_eq!(sol.distance, 0.0);
        assert!(sol.path.m.iter().flatten().all(|&x| x == 0.0));
        assert!(continuity_residual(&sol.path) < 1e-12);
        assert!(hj_inequality_check(&sol.path) <= 1e-6);
        for n in 0..5 {
            assert!((sol.path.slice_mass(n) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_and_snapshots() {
        let g = GridSpec::unit(4, 2).unwrap();
        let q0 = DensityField::dirac(g.clone(), 0).unwrap();
        let q1 = DensityField::dirac(g.clone(), 15).unwrap();
        let p = SpaceTimePath::interpolate(&q0, &q1, 15).unwrap();
        assert_eq!(p.slice_masses(0)[0], 1.0);
        assert!((p.slice_masses(7)[0] - 0.5).abs() < 1e-12);
        let picks: Vec<usize> = SNAPSHOT_TIMES.iter().map(|&t| p.nearest_slice(t)).collect();
        assert_eq!(picks, vec![0, 3, 6, 9, 12, 14]);
        assert!(continuity_residual(&p) > 0.0);
    }

    #[test]
    fn rejects_three_dimensions_and_mismatch() {
        let g = GridSpec::unit(3, 3).unwrap();
        let q = DensityField::dirac(g, 0).unwrap();
        assert!(solve_w2(&q, &q, &SolverConfig::w2_default()).is_err());
        let g = GridSpec::unit(4, 2).unwrap();
        let a = DensityField::dirac(g.clone(), 0).unwrap();
        let b = DensityField::new(g, vec![0.5; 16]).unwrap();
        assert!(matches!(solve_w2(&a, &b, &SolverConfig::w2_default()), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn distinct_point_masses_are_unreachable() {
        let g = GridSpec::unit(16, 2).unwrap();
        let at = |i: usize, j: usize| DensityField::dirac(g.clone(), i * 16 + j).unwrap();
        let cfg = SolverConfig { time_slices: 9, ..SolverConfig::w2_default() };
        for (a, b) in [((6, 6), (9, 8)), ((6, 6), (7, 6)), ((6, 6), (5, 6))] {
            let (q0, q1) = (at(a.0, a.1), at(b.0, b.1));
            assert!(!support_reachable(&q0, &q1, 9).unwrap());
            assert!(matches!(solve_w2(&q0, &q1, &cfg), Err(Error::Unreachable { slices: 9 })));
        }
        assert!(support_reachable(&at(3, 3), &at(3, 3), 9).unwrap());
    }

    #[test]
    fn overlapping_supports_are_reachable() {
        let g = GridSpec::unit(8, 2).unwrap();
        let full = DensityField::normalized(g.clone(), vec![1.0; 64]).unwrap();
        let bump = DensityField::normalized(g.clone(), (0..64).map(|k| 1.0 + (k % 5) as f64).collect()).unwrap();
        assert!(support_reachable(&full, &bump, 3).unwrap());
        let corner = DensityField::dirac(g, 0).unwrap();
        assert!(support_reachable(&corner, &full, 15).unwrap());
        assert!(!support_reachable(&corner, &full, 14).unwrap());
        assert!(!support_reachable(&full, &corner, 14).unwrap());
    }
}

//! Minimal-flux Wasserstein-1 solver.
//!
//! Solves `min sum_i ||m_i||_tr  s.t.  div m + rho1 - rho0 = 0` with the
//! H^1-preconditioned primal-dual iteration
//!
//! ```text
//! m   <- prox_{h ||.||_tr}(m + h grad phi)          per cell
//! phi <- phi + tau (-Lap)^{-1} (div(2 m_new - m) + rho1 - rho0)
//! ```
//!
//! Densities are physical (`q / dx^d`), so `m` is a physical flux and the
//! distance is `sum_i ||m_i||_tr dx^d`.

use crate::error::{Error, Result};
use crate::grid::{
    div_into, grad_into, DensityField, FluxField, GridSpec, PoissonSolver, Potential,
};
use crate::prox::shrink_into;
use crate::solver::{power_iteration, relative_change, ConvergenceReport, IterationRecord, SolverConfig};
use crate::trop::{trop_norm, zeta};

/// Mass mismatch above which a transport problem is rejected.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Flux magnitude, relative to the largest one, above which a cell counts as
/// active in [`eikonal_residual`].
pub const EIKONAL_ACTIVITY: f64 = 1e-2;

#[derive(Debug, Clone)]
pub struct W1Problem {
    q0: DensityField,
    q1: DensityField,
}

impl W1Problem {
    pub fn new(q0: DensityField, q1: DensityField) -> Result<Self> {
        check_pair(&q0, &q1)?;
        Ok(W1Problem { q0, q1 })
    }

    pub fn grid(&self) -> &GridSpec {
        self.q0.grid()
    }

    pub fn source(&self) -> &DensityField {
        &self.q0
    }

    pub fn target(&self) -> &DensityField {
        &self.q1
    }
}

pub(crate) fn check_pair(q0: &DensityField, q1: &DensityField) -> Result<()> {
    if q0.grid() != q1.grid() {
        return Err(Error::invalid("source and target densities live on different grids"));
    }
    let (a, b) = (q0.mass(), q1.mass());
    if (a - b).abs() > MASS_TOLERANCE {
        return Err(Error::Infeasible { source_mass: a, target_mass: b });
    }
    if a <= 0.0 {
        return Err(Error::DegenerateInput("densities carry no mass"));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct W1Solution {
    pub m: FluxField,
    pub phi: Potential,
    pub distance: f64,
    pub report: ConvergenceReport,
}

impl W1Solution {
    /// `max_i |div m + q1 - q0|` in mass units.
    pub fn feasibility(&self, problem: &W1Problem) -> f64 {
        let grid = problem.grid();
        let mut d = vec![0.0; grid.num_cells()];
        div_into(grid.shape(), grid.dx(), self.m.components(), &mut d);
        feasibility_of(&d, problem.source().values(), problem.target().values(), grid.cell_volume())
    }
}

fn feasibility_of(div_m: &[f64], q0: &[f64], q1: &[f64], vol: f64) -> f64 {
    div_m
        .iter()
        .zip(q0.iter().zip(q1))
        .fold(0.0f64, |acc, (d, (a, b))| acc.max((d * vol + b - a).abs()))
}

/// Per-cell grouped tropical norm `sum_i ||m_i||_tr` over cell face vectors.
pub(crate) fn grouped_norm(comps: &[Vec<f64>], buf: &mut [f64]) -> f64 {
    let cells = comps[0].len();
    let mut total = 0.0;
    for i in 0..cells {
        for (b, c) in buf.iter_mut().zip(comps) {
            *b = c[i];
        }
        total += trop_norm(buf);
    }
    total
}

/// Estimates `||(-Lap)^{-1/2} div||^2` by power iteration on `grad (-Lap)^{-1} (-div)`.
pub fn w1_operator_norm_sq(grid: &GridSpec, cfg: &SolverConfig) -> Result<f64> {
    let (shape, dx) = (grid.shape().to_vec(), grid.dx());
    let d = grid.ndim();
    let n = grid.num_cells();
    let mut poisson = PoissonSolver::new(&shape, &vec![dx; d], cfg.poisson)?;
    let mut comps = vec![vec![0.0; n]; d];
    let mut out_comps = vec![vec![0.0; n]; d];
    let mut dv = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut first_err = None;
    let lambda = power_iteration(n * d, cfg.power_iterations, cfg.seed, |x, y| {
        for v in 0..d {
            comps[v].copy_from_slice(&x[v * n..(v + 1) * n]);
        }
        crate::grid::zero_boundary(&shape, &mut comps);
        div_into(&shape, dx, &comps, &mut dv);
        dv.iter_mut().for_each(|a| *a = -*a);
        if let Err(e) = poisson.solve_into(&dv, &mut u) {
            first_err.get_or_insert(e);
        }
        grad_into(&shape, dx, &u, &mut out_comps);
        for v in 0..d {
            y[v * n..(v + 1) * n].copy_from_slice(&out_comps[v]);
        }
    });
    match first_err {
        Some(e) => Err(e),
        None => Ok(lambda),
    }
}

pub fn solve_w1(problem: &W1Problem, cfg: &SolverConfig) -> Result<W1Solution> {
    cfg.validate()?;
    let grid = problem.grid().clone();
    let shape = grid.shape().to_vec();
    let (dx, d, n, vol) = (grid.dx(), grid.ndim(), grid.num_cells(), grid.cell_volume());
    let q0 = problem.source().values();
    let q1 = problem.target().values();
    let f: Vec<f64> = q0.iter().zip(q1).map(|(a, b)| (b - a) / vol).collect();

    let op = w1_operator_norm_sq(&grid, cfg)?;
    let (h, tau) = cfg.steps(op);
    let mut poisson = PoissonSolver::new(&shape, &vec![dx; d], cfg.poisson)?;

    let mut m = vec![vec![0.0; n]; d];
    let mut m_new = vec![vec![0.0; n]; d];
    let mut g = vec![vec![0.0; n]; d];
    let mut phi = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut dphi = vec![0.0; n];
    let mut bar = vec![vec![0.0; n]; d];
    let mut cell_in = vec![0.0; d];
    let mut cell_out = vec![0.0; d];
    let mut scratch = Vec::with_capacity(d);

    let mut history = Vec::new();
    let mut prev_norm = 0.0;
    let mut converged = false;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;

    for k in 1..=cfg.max_iter {
        iterations = k;
        grad_into(&shape, dx, &phi, &mut g);
        for i in 0..n {
            for v in 0..d {
                cell_in[v] = (m[v][i] + h * g[v][i]) / h;
            }
            shrink_into(&cell_in, h, &mut cell_out, &mut scratch);
            for v in 0..d {
                m_new[v][i] = cell_out[v];
            }
        }
        crate::grid::zero_boundary(&shape, &mut m_new);

        for v in 0..d {
            for i in 0..n {
                bar[v][i] = 2.0 * m_new[v][i] - m[v][i];
            }
        }
        div_into(&shape, dx, &bar, &mut rhs);
        rhs.iter_mut().zip(&f).for_each(|(r, fi)| *r += fi);
        poisson.solve_into(&rhs, &mut dphi)?;
        phi.iter_mut().zip(&dphi).for_each(|(p, u)| *p += tau * u);

        std::mem::swap(&mut m, &mut m_new);
        let norm = grouped_norm(&m, &mut cell_in);
        let rel = relative_change(norm, prev_norm);
        div_into(&shape, dx, &m, &mut rhs);
        residual = feasibility_of(&rhs, q0, q1, vol);
        history.push(IterationRecord { iter: k, objective: norm, rel_err: rel, residual });
        prev_norm = norm;
        if !norm.is_finite() {
            break;
        }
        if rel <= cfg.tolerance && residual <= 10.0 * cfg.tolerance {
            converged = true;
            break;
        }
    }

    let distance = prev_norm * vol;
    let m_field = FluxField::from_cell_aligned(&grid, m)?;
    let phi = Potential::new(grid, phi).map(Potential::centered).unwrap_or_else(|_| {
        Potential::zeros(m_field.grid())
    });
    Ok(W1Solution {
        m: m_field,
        phi,
        distance,
        report: ConvergenceReport {
            iterations,
            converged,
            history,
            final_residual: residual,
            primal_step: h,
            dual_step: tau,
            operator_norm_sq: op,
        },
    })
}

/// `max |zeta(grad phi_i) - 1|` over cells whose flux norm exceeds
/// `activity` times the largest flux norm. Zero when no cell is active.
pub fn eikonal_residual_with(sol: &W1Solution, activity: f64) -> f64 {
    let grid = sol.m.grid();
    let (n, d) = (grid.num_cells(), grid.ndim());
    let mut g = vec![vec![0.0; n]; d];
    grad_into(grid.shape(), grid.dx(), sol.phi.values(), &mut g);
    let norms: Vec<f64> = (0..n).map(|i| trop_norm(&sol.m.cell_vector(i))).collect();
    let peak = norms.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    let mut cell = vec![0.0; d];
    for i in 0..n {
        if norms[i] > activity * peak {
            for v in 0..d {
                cell[v] = g[v][i];
            }
            worst = worst.max((zeta(&cell) - 1.0).abs());
        }
    }
    worst
}

pub fn eikonal_residual(sol: &W1Solution) -> f64 {
    eikonal_residual_with(sol, EIKONAL_ACTIVITY)
}

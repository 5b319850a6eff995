//! Shared solver configuration, convergence reporting and step-size estimation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::PoissonMethod;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Stopping tolerance on the relative change of the objective.
    pub tolerance: f64,
    pub max_iter: usize,
    /// Step of the primal (flux, density) update. Derived from the operator
    /// norm when absent.
    pub primal_step: Option<f64>,
    /// Step of the preconditioned dual (potential) update.
    pub dual_step: Option<f64>,
    /// Safety factor applied to `1 / sqrt(L)` when steps are derived.
    pub step_safety: f64,
    /// Ratio primal/dual for derived steps; their product is fixed by
    /// `step_safety`.
    pub step_balance: f64,
    /// Number of time slices (W2 only).
    pub time_slices: usize,
    /// Seed for the power-iteration start vector.
    pub seed: u64,
    pub power_iterations: usize,
    pub poisson: PoissonMethod,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::w1_default()
    }
}

impl SolverConfig {
    pub fn w1_default() -> Self {
        SolverConfig {
            tolerance: 1e-6,
            max_iter: 100_000,
            primal_step: None,
            dual_step: None,
            step_safety: 0.9,
            step_balance: 1.0,
            time_slices: 15,
            seed: 0,
            power_iterations: 60,
            poisson: PoissonMethod::Auto,
        }
    }

    pub fn w2_default() -> Self {
        SolverConfig { tolerance: 1e-5, max_iter: 200_000, ..Self::w1_default() }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        pos("tolerance", self.tolerance)?;
        pos("step_safety", self.step_safety)?;
        pos("step_balance", self.step_balance)?;
        if let Some(s) = self.primal_step {
            pos("primal_step", s)?;
        }
        if let Some(s) = self.dual_step {
            pos("dual_step", s)?;
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if self.time_slices < 3 {
            return Err(Error::invalid("time_slices must be at least 3"));
        }
        Ok(())
    }

    /// Resolves `(primal, dual)` steps given `L = ||P^{-1/2} K||^2`.
    pub(crate) fn steps(&self, op_norm_sq: f64) -> (f64, f64) {
        let base = self.step_safety / op_norm_sq.sqrt();
        let s = self.step_balance.sqrt();
        match (self.primal_step, self.dual_step) {
            (Some(p), Some(d)) => (p, d),
            (Some(p), None) => (p, self.step_safety * self.step_safety / (op_norm_sq * p)),
            (None, Some(d)) => (self.step_safety * self.step_safety / (op_norm_sq * d), d),
            (None, None) => (base * s, base / s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// `||m||_tr` for W1, the energy for W2 (both unscaled sums over cells).
    pub objective: f64,
    pub rel_err: f64,
    /// Constraint violation in mass units.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IterationRecord>,
    pub final_residual: f64,
    pub primal_step: f64,
    pub dual_step: f64,
    /// Estimated `||P^{-1/2} K||^2`.
    pub operator_norm_sq: f64,
}

impl ConvergenceReport {
    pub fn last(&self) -> Option<&IterationRecord> {
        self.history.last()
    }

    /// History as CSV with header `iter,objective,rel_err,residual`.
    pub fn history_csv(&self) -> String {
        let mut s = String::from("iter,objective,rel_err,residual\n");
        for r in &self.history {
            s.push_str(&format!("{},{:.16e},{:.16e},{:.16e}\n", r.iter, r.objective, r.rel_err, r.residual));
        }
        s
    }
}

/// `|a - b| / |b|` with `0/0 = 0` and `x/0 = inf`.
pub(crate) fn relative_change(current: f64, previous: f64) -> f64 {
    let num = (current - previous).abs();
    if num == 0.0 {
        0.0
    } else if previous == 0.0 {
        f64::INFINITY
    } else {
        num / previous.abs()
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite operator by power
/// iteration from a seeded random start. Returns a slight overestimate.
pub(crate) fn power_iteration(
    n: usize,
    iterations: usize,
    seed: u64,
    mut apply: impl FnMut(&[f64], &mut [f64]),
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut y = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..iterations.max(1) {
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nx == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        apply(&x, &mut y);
        lambda = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
        std::mem::swap(&mut x, &mut y);
    }
    lambda * 1.01
}

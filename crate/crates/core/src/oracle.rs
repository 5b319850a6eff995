//! Brute-force references used by tests and the acceptance suite.
//!
//! Nothing here is on a solver's hot path. The transport LP is solved exactly
//! by successive shortest paths with a dual certificate, the prox maps by grid
//! scans, and `zeta` by subset enumeration.

use crate::error::{Error, Result};
use crate::grid::DensityField;
use crate::trop::{trop_dist, trop_norm};

/// Cells at or below this density are dropped by [`DiscreteTransportInstance::from_densities`].
pub const SUPPORT_THRESHOLD: f64 = 1e-12;
/// Largest support accepted by [`lp_wasserstein`].
pub const MAX_SUPPORT: usize = 400;
const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTransportInstance {
    sources: Vec<(Vec<f64>, f64)>,
    sinks: Vec<(Vec<f64>, f64)>,
    cost: Vec<Vec<f64>>,
    p: f64,
}

impl DiscreteTransportInstance {
    /// Builds the instance with cost `trop_dist(x_i, y_j)^p`. Masses must be
    /// nonnegative with equal totals.
    pub fn new(sources: Vec<(Vec<f64>, f64)>, sinks: Vec<(Vec<f64>, f64)>, p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::invalid(format!("p must be at least 1, got {p}")));
        }
        if sources.is_empty() || sinks.is_empty() {
            return Err(Error::DegenerateInput("transport instance needs at least one source and one sink"));
        }
        for (_, m) in sources.iter().chain(&sinks) {
            if !(*m >= 0.0 && m.is_finite()) {
                return Err(Error::invalid(format!("masses must be nonnegative and finite, got {m}")));
            }
        }
        let a: f64 = sources.iter().map(|s| s.1).sum();
        let b: f64 = sinks.iter().map(|s| s.1).sum();
        if (a - b).abs() > MASS_TOLERANCE * a.max(b).max(1.0) {
            return Err(Error::Infeasible { source_mass: a, target_mass: b });
        }
        let cost = sources
            .iter()
            .map(|(x, _)| sinks.iter().map(|(y, _)| Ok(trop_dist(x, y)?.powf(p))).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(DiscreteTransportInstance { sources, sinks, cost, p })
    }

    /// Support points at cell centers of cells with density above
    /// [`SUPPORT_THRESHOLD`], weighted by their cell masses.
    pub fn from_densities(q0: &DensityField, q1: &DensityField, p: f64) -> Result<Self> {
        let atoms = |q: &DensityField| -> Vec<(Vec<f64>, f64)> {
            q.values()
                .iter()
                .enumerate()
                .filter(|(_, &v)| v > SUPPORT_THRESHOLD)
                .map(|(i, &v)| (q.grid().cell_center(i), v))
                .collect()
        };
        Self::new(atoms(q0), atoms(q1), p)
    }

    pub fn sources(&self) -> &[(Vec<f64>, f64)] {
        &self.sources
    }

    pub fn sinks(&self) -> &[(Vec<f64>, f64)] {
        &self.sinks
    }

    pub fn cost(&self) -> &[Vec<f64>] {
        &self.cost
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Same instance with sources and sinks exchanged.
    pub fn transposed(&self) -> Self {
        DiscreteTransportInstance {
            sources: self.sinks.clone(),
            sinks: self.sources.clone(),
            cost: (0..self.sinks.len()).map(|j| self.cost.iter().map(|row| row[j]).collect()).collect(),
            p: self.p,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    /// `(sum c_ij pi_ij)^(1/p)`.
    pub value: f64,
    /// Optimal plan, `plan[i][j]` from source `i` to sink `j`.
    pub plan: Vec<Vec<f64>>,
    /// `sum c_ij pi_ij`.
    pub primal_cost: f64,
    /// Value of the dual certificate `sum b_j g_j + sum a_i f_i`.
    pub dual_cost: f64,
    /// `primal_cost - dual_cost`.
    pub duality_gap: f64,
    /// Largest violation of `f_i + g_j <= c_ij`.
    pub dual_violation: f64,
}

/// Exact Kantorovich problem by successive shortest paths (Dijkstra with
/// reduced costs) on the complete bipartite graph.
pub fn lp_wasserstein(inst: &DiscreteTransportInstance) -> Result<LpSolution> {
    let (n, m) = (inst.sources.len(), inst.sinks.len());
    if n > MAX_SUPPORT || m > MAX_SUPPORT {
        return Err(Error::invalid(format!("support sizes {n}x{m} exceed {MAX_SUPPORT}")));
    }
    let c = &inst.cost;
    let total: f64 = inst.sources.iter().map(|s| s.1).sum();
    let eps = 1e-15 * total.max(f64::MIN_POSITIVE);
    let mut supply: Vec<f64> = inst.sources.iter().map(|s| s.1).collect();
    let mut demand: Vec<f64> = inst.sinks.iter().map(|s| s.1).collect();
    let mut plan = vec![vec![0.0; m]; n];
    // nodes 0..n are sources, n..n+m sinks
    let mut pot = vec![0.0; n + m];
    let mut dist = vec![0.0; n + m];
    let mut prev = vec![usize::MAX; n + m];
    let mut done = vec![false; n + m];

    loop {
        if !supply.iter().any(|&s| s > eps) || !demand.iter().any(|&d| d > eps) {
            break;
        }
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        prev.iter_mut().for_each(|p| *p = usize::MAX);
        done.iter_mut().for_each(|d| *d = false);
        for i in 0..n {
            if supply[i] > eps {
                dist[i] = 0.0;
            }
        }
        // dense Dijkstra, O((n+m)^2)
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..n + m {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u < n {
                for j in 0..m {
                    let v = n + j;
                    let nd = best + c[u][j] + pot[u] - pot[v];
                    if !done[v] && nd < dist[v] {
                        dist[v] = nd;
                        prev[v] = u;
                    }
                }
            } else {
                let j = u - n;
                for i in 0..n {
                    if plan[i][j] > eps {
                        let nd = best - c[i][j] + pot[u] - pot[i];
                        if !done[i] && nd < dist[i] {
                            dist[i] = nd;
                            prev[i] = u;
                        }
                    }
                }
            }
        }
        let target = (0..m)
            .filter(|&j| demand[j] > eps && dist[n + j].is_finite())
            .min_by(|&a, &b| dist[n + a].total_cmp(&dist[n + b]))
            .ok_or(Error::DegenerateInput("no augmenting path in transport network"))?;
        let reach = dist.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max);
        for v in 0..n + m {
            pot[v] += if dist[v].is_finite() { dist[v] } else { reach };
        }
        // bottleneck along the path back to a source with supply
        let mut amount = demand[target];
        let mut v = n + target;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u >= n {
                amount = amount.min(plan[v][u - n]);
            }
            v = u;
        }
        amount = amount.min(supply[v]);
        let start = v;
        let mut v = n + target;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u < n {
                plan[u][v - n] += amount;
            } else {
                plan[v][u - n] -= amount;
                if plan[v][u - n] < eps {
                    plan[v][u - n] = 0.0;
                }
            }
            v = u;
        }
        supply[start] -= amount;
        demand[target] -= amount;
    }

    let primal_cost: f64 = (0..n).map(|i| (0..m).map(|j| c[i][j] * plan[i][j]).sum::<f64>()).sum();
    // f_i = -pot_i, g_j = pot_j
    let mut dual_violation = 0.0f64;
    for i in 0..n {
        for j in 0..m {
            dual_violation = dual_violation.max(pot[n + j] - pot[i] - c[i][j]);
        }
    }
    let dual_cost = inst.sinks.iter().zip(&pot[n..]).map(|(s, g)| s.1 * g).sum::<f64>()
        - inst.sources.iter().zip(&pot[..n]).map(|(s, f)| s.1 * f).sum::<f64>();
    Ok(LpSolution {
        value: primal_cost.max(0.0).powf(1.0 / inst.p),
        plan,
        primal_cost,
        dual_cost,
        duality_gap: primal_cost - dual_cost,
        dual_violation,
    })
}

/// Objectives accepted by [`brute_force_prox`].
#[derive(Debug, Clone, PartialEq)]
pub enum ProxObjective {
    /// `|a|^2/(2h) + ||a||_tr - b.a`, minimized by the tropical shrink.
    Shrink { b: Vec<f64>, h: f64 },
    /// `(mu/2)||m||_tr^2 + |m - c|^2/2`, 2-D.
    FluxProject { c: [f64; 2], mu: f64 },
    /// `|a|^2/(2h) - b.a`, minimized by `h b`.
    Quadratic { b: Vec<f64>, h: f64 },
    /// `||a||_tr^p / p - b.a`; its minimum is `-H(b)`.
    Legendre { b: Vec<f64>, p: f64 },
}

impl ProxObjective {
    pub fn dim(&self) -> usize {
        match self {
            ProxObjective::Shrink { b, .. } | ProxObjective::Quadratic { b, .. } | ProxObjective::Legendre { b, .. } => {
                b.len()
            }
            ProxObjective::FluxProject { .. } => 2,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let dot = |b: &[f64]| b.iter().zip(x).map(|(u, v)| u * v).sum::<f64>();
        let sq = x.iter().map(|v| v * v).sum::<f64>();
        match self {
            ProxObjective::Shrink { b, h } => sq / (2.0 * h) + trop_norm(x) - dot(b),
            ProxObjective::FluxProject { c, mu } => {
                let n = trop_norm(x);
                0.5 * mu * n * n + 0.5 * ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2))
            }
            ProxObjective::Quadratic { b, h } => sq / (2.0 * h) - dot(b),
            ProxObjective::Legendre { b, p } => trop_norm(x).powf(*p) / p - dot(b),
        }
    }

    /// A box guaranteed to contain the minimizer.
    pub fn default_box(&self) -> SearchBox {
        let inf = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let (d, r) = match self {
            ProxObjective::Shrink { b, h } | ProxObjective::Quadratic { b, h } => (b.len(), h * inf(b)),
            ProxObjective::FluxProject { c, .. } => (2, inf(c)),
            // the maximizer of b.a - ||a||^p/p has ||a||_tr = zeta(b)^(1/(p-1))
            ProxObjective::Legendre { b, p } => {
                let z: f64 = b.iter().map(|v| v.abs()).sum();
                (b.len(), z.powf(1.0 / (p - 1.0)))
            }
        };
        let half = 1.05 * r + 1e-3;
        SearchBox { center: vec![0.0; d], half_width: vec![half; d] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchBox {
    pub center: Vec<f64>,
    pub half_width: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxMinimum {
    pub point: Vec<f64>,
    pub value: f64,
}

/// Points per axis of the initial scan.
pub const SCAN_POINTS: usize = 201;
/// Refinement stops once the search step falls below this width.
pub const REFINE_WIDTH: f64 = 1e-6;

/// Minimizes `objective` over `search` (1 to 3 dimensions): a dense scan
/// with [`SCAN_POINTS`] per axis, zoomed scans around the incumbent, then a
/// compass/diagonal pattern search down to [`REFINE_WIDTH`].
pub fn brute_force_prox(objective: &ProxObjective, search: &SearchBox) -> Result<ProxMinimum> {
    let d = objective.dim();
    if !(1..=3).contains(&d) || search.center.len() != d || search.half_width.len() != d {
        return Err(Error::invalid(format!("brute-force search supports 1 to 3 dimensions, got {d}")));
    }
    if search.half_width.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::invalid("search box half-widths must be positive"));
    }
    if let ProxObjective::Legendre { p, .. } = objective {
        if !(*p > 1.0) {
            return Err(Error::invalid(format!("Legendre objective needs p > 1, got {p}")));
        }
    }
    let mut best = search.center.clone();
    let mut best_val = objective.eval(&best);
    let mut half = search.half_width.clone();
    let mut center = search.center.clone();
    let mut points = SCAN_POINTS;
    let mut x = vec![0.0; d];
    loop {
        let step: Vec<f64> = half.iter().map(|h| 2.0 * h / (points - 1) as f64).collect();
        let total = points.pow(d as u32);
        for flat in 0..total {
            let mut r = flat;
            for v in 0..d {
                x[v] = center[v] - half[v] + (r % points) as f64 * step[v];
                r /= points;
            }
            let val = objective.eval(&x);
            if val < best_val {
                best_val = val;
                best.copy_from_slice(&x);
            }
        }
        if step.iter().all(|s| *s < REFINE_WIDTH) {
            break;
        }
        center.copy_from_slice(&best);
        half = step.iter().map(|s| 2.0 * s).collect();
        points = 21;
    }
    // pattern search over all 3^d - 1 directions
    let dirs: Vec<Vec<f64>> = (0..3usize.pow(d as u32))
        .map(|k| (0..d).map(|v| ((k / 3usize.pow(v as u32)) % 3) as f64 - 1.0).collect::<Vec<f64>>())
        .filter(|dir| dir.iter().any(|c| *c != 0.0))
        .collect();
    let mut s = REFINE_WIDTH;
    while s > REFINE_WIDTH * 1e-3 {
        let mut moved = false;
        for dir in &dirs {
            for v in 0..d {
                x[v] = best[v] + s * dir[v];
            }
            let val = objective.eval(&x);
            if val < best_val {
                best_val = val;
                best.copy_from_slice(&x);
                moved = true;
            }
        }
        if !moved {
            s *= 0.5;
        }
    }
    Ok(ProxMinimum { point: best, value: best_val })
}

/// Largest enumerated dimension for [`zeta_enum`].
pub const ZETA_ENUM_MAX: usize = 20;

/// `max_S |sum_{i in S} b_i|` over all subsets, with a maximizing subset
/// (0-based indices). The first maximizer in mask order is returned.
pub fn zeta_enum(b: &[f64]) -> Result<(f64, Vec<usize>)> {
    let n = b.len();
    if n > ZETA_ENUM_MAX {
        return Err(Error::invalid(format!("subset enumeration limited to {ZETA_ENUM_MAX} entries, got {n}")));
    }
    let mut best = 0.0;
    let mut best_mask = 0usize;
    for mask in 1usize..(1 << n) {
        let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| b[i]).sum();
        if s.abs() > best {
            best = s.abs();
            best_mask = mask;
        }
    }
    Ok((best, (0..n).filter(|i| best_mask >> i & 1 == 1).collect()))
}

//! Uniform lattice discretization.
//!
//! Cells are stored row-major over `shape` (axis 0 slowest). A flux has one
//! scalar per interior face per axis. Internally every axis component is kept
//! cell-aligned: the entry at cell `i` holds the face `i + e_v/2`, and the slot
//! with `i_v = N_v - 1` (the boundary face) is always zero. The external face
//! layout used by [`FluxField::from_faces`] and [`FluxField::faces`] drops those
//! slots, giving arrays of shape `(N_0, .., N_v - 1, .., N_{d-1})`.
//!
//! Densities are per-cell masses `q_i`; the solvers convert to physical density
//! `q_i / dx^d` internally.

mod poisson;
mod time;

pub use poisson::{
    solve_neumann_poisson, solve_spacetime_poisson, PoissonMethod, PoissonSolver,
};
pub use time::TimeStencil;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    shape: Vec<usize>,
    dx: f64,
    origin: Vec<f64>,
}

impl GridSpec {
    /// Grid with `shape` cells of side `dx`, lower corner at the origin.
    pub fn new(shape: Vec<usize>, dx: f64) -> Result<Self> {
        let origin = vec![0.0; shape.len()];
        Self::with_origin(shape, dx, origin)
    }

    pub fn with_origin(shape: Vec<usize>, dx: f64, origin: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::invalid("grid needs at least one axis"));
        }
        if let Some(&n) = shape.iter().find(|&&n| n < 2) {
            return Err(Error::invalid(format!("every axis needs N >= 2 cells, got {n}")));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::invalid(format!("dx must be positive and finite, got {dx}")));
        }
        if origin.len() != shape.len() {
            return Err(Error::DimensionMismatch { expected: shape.len(), actual: origin.len() });
        }
        Ok(GridSpec { shape, dx, origin })
    }

    /// `n^d` cells covering the unit box `[0,1]^d`.
    pub fn unit(n: usize, d: usize) -> Result<Self> {
        Self::new(vec![n; d], 1.0 / n as f64)
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn num_cells(&self) -> usize {
        self.shape.iter().product()
    }

    /// `dx^d`.
    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.ndim() as i32)
    }

    /// Linear-index stride of each axis.
    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.shape)
    }

    pub fn index(&self, multi: &[usize]) -> Result<usize> {
        if multi.len() != self.ndim() {
            return Err(Error::DimensionMismatch { expected: self.ndim(), actual: multi.len() });
        }
        let mut idx = 0;
        for (&i, &n) in multi.iter().zip(&self.shape) {
            if i >= n {
                return Err(Error::invalid(format!("cell index {i} out of range 0..{n}")));
            }
            idx = idx * n + i;
        }
        Ok(idx)
    }

    pub fn unravel(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.ndim()];
        for v in (0..self.ndim()).rev() {
            out[v] = idx % self.shape[v];
            idx /= self.shape[v];
        }
        out
    }

    pub fn cell_center(&self, idx: usize) -> Vec<f64> {
        self.unravel(idx)
            .iter()
            .zip(&self.origin)
            .map(|(&i, &o)| o + (i as f64 + 0.5) * self.dx)
            .collect()
    }

    /// Upper corner of the domain box.
    pub fn extent(&self) -> Vec<f64> {
        self.shape.iter().zip(&self.origin).map(|(&n, &o)| o + n as f64 * self.dx).collect()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.num_cells() {
            return Err(Error::DimensionMismatch { expected: self.num_cells(), actual: len });
        }
        Ok(())
    }
}

pub(crate) fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for v in (0..shape.len().saturating_sub(1)).rev() {
        s[v] = s[v + 1] * shape[v + 1];
    }
    s
}

/// Per-cell masses `q_i >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl DensityField {
    /// Validates shape, finiteness and nonnegativity. Total mass is not forced
    /// to one here; the solvers check that both endpoints carry equal mass.
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("density values must be finite and nonnegative"));
        }
        Ok(DensityField { grid, values })
    }

    /// Like [`DensityField::new`] but rescales to unit mass.
    pub fn normalized(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        let mut f = Self::new(grid, values)?;
        let m = f.mass();
        if m <= 0.0 {
            return Err(Error::DegenerateInput("density has zero mass"));
        }
        f.values.iter_mut().for_each(|v| *v /= m);
        Ok(f)
    }

    /// A unit point mass in one cell.
    pub fn dirac(grid: GridSpec, cell: usize) -> Result<Self> {
        let mut values = vec![0.0; grid.num_cells()];
        *values
            .get_mut(cell)
            .ok_or_else(|| Error::invalid(format!("cell {cell} out of range")))? = 1.0;
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Physical density `q_i / dx^d`.
    pub fn physical(&self) -> Vec<f64> {
        let vol = self.grid.cell_volume();
        self.values.iter().map(|q| q / vol).collect()
    }
}

/// Face-centered vector field with zero flux through the domain boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxField {
    grid: GridSpec,
    comps: Vec<Vec<f64>>,
}

impl FluxField {
    pub fn zeros(grid: &GridSpec) -> Self {
        let comps = vec![vec![0.0; grid.num_cells()]; grid.ndim()];
        FluxField { grid: grid.clone(), comps }
    }

    /// Builds a flux from per-axis interior face arrays (external layout).
    pub fn from_faces(grid: &GridSpec, faces: Vec<Vec<f64>>) -> Result<Self> {
        if faces.len() != grid.ndim() {
            return Err(Error::DimensionMismatch { expected: grid.ndim(), actual: faces.len() });
        }
        let mut out = Self::zeros(grid);
        for (v, f) in faces.iter().enumerate() {
            let fshape = face_shape(grid.shape(), v);
            let expected: usize = fshape.iter().product();
            if f.len() != expected {
                return Err(Error::DimensionMismatch { expected, actual: f.len() });
            }
            if f.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid("flux values must be finite"));
            }
            for (k, &val) in f.iter().enumerate() {
                out.comps[v][face_to_cell(grid.shape(), &fshape, k)] = val;
            }
        }
        Ok(out)
    }

    /// Builds a flux from cell-aligned components; boundary slots are zeroed.
    pub fn from_cell_aligned(grid: &GridSpec, mut comps: Vec<Vec<f64>>) -> Result<Self> {
        if comps.len() != grid.ndim() {
            return Err(Error::DimensionMismatch { expected: grid.ndim(), actual: comps.len() });
        }
        for c in &comps {
            grid.check_len(c.len())?;
        }
        zero_boundary(grid.shape(), &mut comps);
        Ok(FluxField { grid: grid.clone(), comps })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Cell-aligned component along axis `v` (boundary slots are zero).
    pub fn component(&self, v: usize) -> &[f64] {
        &self.comps[v]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }

    /// Interior faces along axis `v` in the external layout.
    pub fn faces(&self, v: usize) -> Vec<f64> {
        let shape = self.grid.shape();
        let fshape = face_shape(shape, v);
        let n: usize = fshape.iter().product();
        (0..n).map(|k| self.comps[v][face_to_cell(shape, &fshape, k)]).collect()
    }

    /// The d-vector of faces `i + e_v/2` owned by cell `i`.
    pub fn cell_vector(&self, cell: usize) -> Vec<f64> {
        self.comps.iter().map(|c| c[cell]).collect()
    }

    /// Sets the face `cell + e_v/2`. Boundary faces are rejected.
    pub fn set(&mut self, v: usize, cell: usize, value: f64) -> Result<()> {
        if v >= self.grid.ndim() || cell >= self.grid.num_cells() {
            return Err(Error::invalid("face index out of range"));
        }
        if self.grid.unravel(cell)[v] + 1 == self.grid.shape()[v] {
            return Err(Error::invalid("boundary faces carry zero flux"));
        }
        self.comps[v][cell] = value;
        Ok(())
    }
}

fn face_shape(shape: &[usize], v: usize) -> Vec<usize> {
    let mut s = shape.to_vec();
    s[v] -= 1;
    s
}

fn face_to_cell(shape: &[usize], fshape: &[usize], mut k: usize) -> usize {
    let mut multi = vec![0; shape.len()];
    for a in (0..shape.len()).rev() {
        multi[a] = k % fshape[a];
        k /= fshape[a];
    }
    multi.iter().zip(shape).fold(0, |acc, (&i, &n)| acc * n + i)
}

pub(crate) fn zero_boundary(shape: &[usize], comps: &mut [Vec<f64>]) {
    let strides = strides_of(shape);
    for (v, c) in comps.iter_mut().enumerate() {
        for (idx, val) in c.iter_mut().enumerate() {
            if (idx / strides[v]) % shape[v] == shape[v] - 1 {
                *val = 0.0;
            }
        }
    }
}

/// Cell-centered scalar (Lagrange multiplier).
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Potential {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("potential values must be finite"));
        }
        Ok(Potential { grid, values })
    }

    pub fn zeros(grid: &GridSpec) -> Self {
        Potential { grid: grid.clone(), values: vec![0.0; grid.num_cells()] }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Canonical zero-mean representative.
    pub fn centered(mut self) -> Self {
        subtract_mean(&mut self.values);
        self
    }
}

pub(crate) fn subtract_mean(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
}

/// Forward difference onto faces, written into cell-aligned components.
pub(crate) fn grad_into(shape: &[usize], dx: f64, phi: &[f64], out: &mut [Vec<f64>]) {
    let strides = strides_of(shape);
    let inv = 1.0 / dx;
    for (v, o) in out.iter_mut().enumerate() {
        let (s, n) = (strides[v], shape[v]);
        for idx in 0..phi.len() {
            o[idx] = if (idx / s) % n + 1 < n { (phi[idx + s] - phi[idx]) * inv } else { 0.0 };
        }
    }
}

/// Backward-difference divergence of cell-aligned components.
pub(crate) fn div_into(shape: &[usize], dx: f64, comps: &[Vec<f64>], out: &mut [f64]) {
    let strides = strides_of(shape);
    let inv = 1.0 / dx;
    out.iter_mut().for_each(|o| *o = 0.0);
    for (v, c) in comps.iter().enumerate() {
        let (s, n) = (strides[v], shape[v]);
        for idx in 0..out.len() {
            let lower = if (idx / s) % n > 0 { c[idx - s] } else { 0.0 };
            out[idx] += (c[idx] - lower) * inv;
        }
    }
}

/// Neumann Laplacian with per-axis spacing.
pub(crate) fn laplacian_into(shape: &[usize], spacing: &[f64], x: &[f64], out: &mut [f64]) {
    let strides = strides_of(shape);
    out.iter_mut().for_each(|o| *o = 0.0);
    for v in 0..shape.len() {
        let (s, n) = (strides[v], shape[v]);
        let w = 1.0 / (spacing[v] * spacing[v]);
        for idx in 0..x.len() {
            let iv = (idx / s) % n;
            let mut acc = 0.0;
            if iv > 0 {
                acc += x[idx - s] - x[idx];
            }
            if iv + 1 < n {
                acc += x[idx + s] - x[idx];
            }
            out[idx] += w * acc;
        }
    }
}

/// Discrete gradient `(phi[i + e_v] - phi[i]) / dx` on interior faces.
pub fn grad(phi: &Potential) -> FluxField {
    let grid = phi.grid();
    let mut f = FluxField::zeros(grid);
    grad_into(grid.shape(), grid.dx(), phi.values(), &mut f.comps);
    f
}

/// Discrete divergence `sum_v (m[i + e_v/2] - m[i - e_v/2]) / dx`.
pub fn div(m: &FluxField) -> Vec<f64> {
    let grid = m.grid();
    let mut out = vec![0.0; grid.num_cells()];
    div_into(grid.shape(), grid.dx(), &m.comps, &mut out);
    out
}

/// `div(grad(x))` with zero-flux boundaries.
pub fn laplacian(grid: &GridSpec, x: &[f64]) -> Result<Vec<f64>> {
    grid.check_len(x.len())?;
    let mut out = vec![0.0; x.len()];
    laplacian_into(grid.shape(), &vec![grid.dx(); grid.ndim()], x, &mut out);
    Ok(out)
}

/// Face-wise inner product `sum_faces a * b` (no volume weight).
pub fn flux_dot(a: &FluxField, b: &FluxField) -> f64 {
    a.comps
        .iter()
        .zip(&b.comps)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(vec![1, 4], 0.1).is_err());
        assert!(GridSpec::new(vec![4, 4], 0.0).is_err());
        assert!(GridSpec::new(vec![], 0.1).is_err());
        let g = GridSpec::unit(4, 2).unwrap();
        assert_eq!(g.num_cells(), 16);
        assert_eq!(g.index(&[1, 2]).unwrap(), 6);
        assert_eq!(g.unravel(6), vec![1, 2]);
        assert_eq!(g.cell_center(6), vec![0.375, 0.625]);
        assert!(g.index(&[4, 0]).is_err());
    }

    #[test]
    fn density_validation() {
        let g = GridSpec::unit(2, 2).unwrap();
        assert!(DensityField::new(g.clone(), vec![0.5, -0.1, 0.3, 0.3]).is_err());
        assert!(DensityField::new(g.clone(), vec![0.5, 0.5]).is_err());
        let d = DensityField::normalized(g.clone(), vec![1.0, 1.0, 2.0, 0.0]).unwrap();
        assert_eq!(d.values(), &[0.25, 0.25, 0.5, 0.0]);
        assert!(DensityField::normalized(g, vec![0.0; 4]).is_err());
    }

    #[test]
    fn face_layout_round_trip() {
        let g = GridSpec::new(vec![3, 4], 0.25).unwrap();
        let fx: Vec<f64> = (0..8).map(|k| k as f64 + 1.0).collect();
        let fy: Vec<f64> = (0..9).map(|k| -(k as f64) - 1.0).collect();
        let m = FluxField::from_faces(&g, vec![fx.clone(), fy.clone()]).unwrap();
        assert_eq!(m.faces(0), fx);
        assert_eq!(m.faces(1), fy);
        // face (i0=1, i1=2) along axis 0 lives in cell (1,2)
        assert_eq!(m.component(0)[g.index(&[1, 2]).unwrap()], fx[1 * 4 + 2]);
        assert_eq!(m.component(0)[g.index(&[2, 2]).unwrap()], 0.0);
        let mut m2 = FluxField::zeros(&g);
        assert!(m2.set(1, g.index(&[0, 3]).unwrap(), 1.0).is_err());
        assert!(FluxField::from_faces(&g, vec![fx, vec![0.0; 8]]).is_err());
    }

    #[test]
    fn grad_of_constant_and_linear() {
        let g = GridSpec::unit(5, 2).unwrap();
        let m = grad(&Potential::new(g.clone(), vec![3.0; 25]).unwrap());
        assert!(m.components().iter().flatten().all(|&x| x == 0.0));
        let phi: Vec<f64> = (0..25).map(|k| g.unravel(k)[0] as f64 * g.dx()).collect();
        let m = grad(&Potential::new(g.clone(), phi).unwrap());
        assert!(m.faces(0).iter().all(|&x| (x - 1.0).abs() < 1e-12));
        assert!(m.faces(1).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_face_divergence() {
        let g = GridSpec::unit(4, 2).unwrap();
        let mut m = FluxField::zeros(&g);
        let a = g.index(&[1, 1]).unwrap();
        m.set(0, a, g.dx()).unwrap();
        let d = div(&m);
        assert!((d[a] - 1.0).abs() < 1e-12);
        assert!((d[g.index(&[2, 1]).unwrap()] + 1.0).abs() < 1e-12);
        assert_eq!(d.iter().filter(|x| **x != 0.0).count(), 2);
    }

    #[test]
    fn adjointness_and_zero_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for shape in [vec![6, 5], vec![4, 3, 5], vec![9]] {
            let g = GridSpec::new(shape, 0.13).unwrap();
            let n = g.num_cells();
            let phi = Potential::new(g.clone(), random_vec(&mut rng, n)).unwrap();
            let comps = (0..g.ndim()).map(|_| random_vec(&mut rng, n)).collect();
            let m = FluxField::from_cell_aligned(&g, comps).unwrap();
            let lhs = flux_dot(&grad(&phi), &m);
            let dm = div(&m);
            let rhs: f64 = -phi.values().iter().zip(&dm).map(|(a, b)| a * b).sum::<f64>();
            assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
            assert!(dm.iter().sum::<f64>().abs() < 1e-10);
            // q + div(m) * dx^d keeps total mass
            let q: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let before: f64 = q.iter().sum();
            let after: f64 = q.iter().zip(&dm).map(|(a, b)| a + b * g.cell_volume()).sum();
            assert!((before - after).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_matches_five_point_stencil() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = GridSpec::new(vec![7, 6], 0.2).unwrap();
        let x = random_vec(&mut rng, g.num_cells());
        let lap = laplacian(&g, &x).unwrap();
        let composed = div(&grad(&Potential::new(g.clone(), x.clone()).unwrap()));
        let h2 = g.dx() * g.dx();
        for i in 0..7usize {
            for j in 0..6usize {
                let c = x[g.index(&[i, j]).unwrap()];
                let mut acc = 0.0;
                for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if (0..7).contains(&a) && (0..6).contains(&b) {
                        acc += x[g.index(&[a as usize, b as usize]).unwrap()] - c;
                    }
                }
                let k = g.index(&[i, j]).unwrap();
                assert!((lap[k] - acc / h2).abs() < 1e-10);
                assert!((composed[k] - acc / h2).abs() < 1e-10);
            }
        }
    }
}

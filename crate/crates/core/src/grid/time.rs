//! Three-branch time derivative over `nt` slices: forward difference on the
//! first slice, centered on interior slices, backward on the last.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeStencil {
    nt: usize,
    dt: f64,
}

impl TimeStencil {
    pub fn new(nt: usize, dt: f64) -> Result<Self> {
        if nt < 2 {
            return Err(Error::invalid(format!("need at least 2 time slices, got {nt}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        Ok(TimeStencil { nt, dt })
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Nonzero entries `(column, weight)` of row `n`.
    fn row(&self, n: usize) -> [(usize, f64); 2] {
        let last = self.nt - 1;
        if n == 0 {
            [(1, 1.0 / self.dt), (0, -1.0 / self.dt)]
        } else if n == last {
            [(last, 1.0 / self.dt), (last - 1, -1.0 / self.dt)]
        } else {
            let w = 0.5 / self.dt;
            [(n + 1, w), (n - 1, -w)]
        }
    }

    /// Derivative at slice `n` (0-based), cell `i`, of slice-major data.
    pub fn at(&self, data: &[f64], cells: usize, n: usize, i: usize) -> Result<f64> {
        if n >= self.nt || i >= cells || data.len() != self.nt * cells {
            return Err(Error::invalid(format!(
                "time index ({n}, {i}) out of range for {} slices of {cells} cells",
                self.nt
            )));
        }
        Ok(self.row(n).iter().map(|&(c, w)| w * data[c * cells + i]).sum())
    }

    /// `out = D data` on slice-major arrays of `nt * cells` values.
    pub fn apply(&self, data: &[f64], cells: usize, out: &mut [f64]) {
        for n in 0..self.nt {
            let [(a, wa), (b, wb)] = self.row(n);
            let (sa, sb) = (&data[a * cells..(a + 1) * cells], &data[b * cells..(b + 1) * cells]);
            for ((o, x), y) in out[n * cells..(n + 1) * cells].iter_mut().zip(sa).zip(sb) {
                *o = wa * x + wb * y;
            }
        }
    }

    /// `out = D^T data`.
    pub fn apply_transpose(&self, data: &[f64], cells: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for n in 0..self.nt {
            let src = &data[n * cells..(n + 1) * cells];
            for (c, w) in self.row(n) {
                for (o, x) in out[c * cells..(c + 1) * cells].iter_mut().zip(src) {
                    *o += w * x;
                }
            }
        }
    }
}

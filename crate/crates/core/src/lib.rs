//! Tropical Wasserstein-1 and Wasserstein-2 distances on the tropical
//! projective torus, computed with preconditioned primal-dual iterations on a
//! staggered grid.

pub mod cli;
pub mod error;
pub mod grid;
pub mod io;
pub mod oracle;
pub mod prox;
pub mod solver;
pub mod trop;
pub mod w1;
pub mod w2;

pub use error::{Error, Result};

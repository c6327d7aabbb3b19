//! Pilot-wave (de Broglie–Bohm) dynamics on uniform grids.
//!
//! Modules, bottom up:
//! - [`grid`]: field containers, spectral/finite-difference derivatives, interpolation
//! - [`madelung`]: polar decomposition, quantum potential, vortices, stress tensor
//! - [`schrodinger`]: split-step evolution, quantum and classical
//! - [`trajectories`]: guided and second-order particle dynamics
//! - [`relaxation`]: Born sampling, f-ratio, coarse-grained H-function
//! - [`clebsch`]: Clebsch potentials and their effective fields
//! - [`rankine`]: the quantum Rankine vortex
//!
//! Units are natural (ħ = 1, unit charge).

pub mod bessel;
pub mod clebsch;
pub mod error;
pub mod grid;
pub mod io;
pub mod madelung;
pub mod rankine;
pub mod schrodinger;
pub mod spectral;
pub mod relaxation;
pub mod trajectories;

pub use error::{Error, Result};
pub use grid::{Boundary, ComplexField, GridSpec, Point, RealField};
pub use num_complex::Complex64;

/// Maps `f` over `items`, in parallel when the `parallel` feature is on.
/// Output order always matches input order.
pub(crate) fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

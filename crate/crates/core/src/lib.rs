//! Numerical kernels for the mixed moment of twisted L-functions
//!
//! `momentlab-core` is `no_std` (it needs `alloc`) and contains every
//! algorithm: exact integer arithmetic, Dirichlet character groups, Hecke
//! eigenvalue tables, special functions and quadrature, approximate
//! functional equations, the moment itself with its main term, Kloosterman
//! and shifted convolution sums, and a Voronoi summation check.
//!
//! File formats, parallel sweeps and the command line live in the `momentlab`
//! crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod arith;
pub mod characters;
pub mod eigenform;
mod error;
pub mod expsums;
pub mod lfunc;
pub mod moments;
pub mod special;
pub mod voronoi;

pub use error::{Error, Result};

pub use num_complex::Complex64;

//! Constrained reductions of the dispersionless 2D Toda hierarchy.
//!
//! The crate evolves polynomial, rational and logarithmic conformal-map pairs
//! `(z, zbar)` under the string equation `{z, zbar} = 1` (Laplacian growth in
//! the physical time `x`), under the commuting hierarchy flows, and checks the
//! conserved quantities and the bi-Hamiltonian structure of the 1D reduction.

// `!(a < b)` guards are deliberate: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bihamiltonian;
mod error;
pub mod fixtures;
pub mod flows;
pub mod laurent;
mod linalg;
pub mod maps;
pub mod moments;
pub mod quad;
pub mod string;
pub mod verify;
pub mod zero_curvature;

pub use error::{Error, Result};
pub use laurent::{lax_bracket, CertifiedSeries, LaurentSeries, Part};
pub use maps::{MapKind, MapOptions, MapPair};

/// Complex scalar used everywhere.
pub type C64 = num_complex::Complex64;

//! Exponential integrators for highly oscillatory conservative systems.
//!
//! The library covers four layers:
//!
//! * [`spectral`] — eigendecomposition of skew-Hermitian generators and
//!   spectral evaluation of matrix functions (exp, phi1, arbitrary scalar
//!   functions),
//! * [`system`] — conservative systems `y' = Q grad H(y)` with energy
//!   `H = y^T (M/eps) y / 2 + V(y)`, and their oscillatory form
//!   `y' = O y + g(y)`,
//! * [`integrators`] — one-step exponential integrators: the symmetric
//!   two-stage EI-T scheme, the one-stage implicit EI-O family, general
//!   tableaus, a symplectic-by-construction builder, and structural
//!   predicates (symplecticity condition, numeric symmetry test),
//! * [`analysis`] — resonance-module enumeration, the numerical
//!   non-resonance condition, assumption checks, and a least-squares modal
//!   amplitude diagnostic,
//! * [`harness`] — problem library, long-run energy-drift driver,
//!   convergence and drift-scaling studies, reference solutions.
//!
//! The [`cli`] module provides the `oscint` command that drives the harness
//! from JSON configs and emits CSV/JSON results.

// `!(x > 0.0)` rejects NaN along with nonpositive values; the suggested
// `x <= 0.0` silently accepts NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod harness;
pub mod integrators;
pub mod matrix;
pub mod spectral;
pub mod system;

pub use error::{Error, Result};

//! Jet arithmetic, CR model charts, symbol calculus, stationary phase and
//! kernel pipelines for the first two coefficients of Szegő and Toeplitz
//! kernels on strictly pseudoconvex CR manifolds.

// Index loops mirror the matrix formulas they implement.
#![allow(clippy::needless_range_loop)]

pub mod cr_models;
pub mod error;
pub mod jet;
pub mod kernel;
pub mod rng;
pub mod stationary_phase;
pub mod symbol;

pub use error::{JetError, KernelError, ModelError, PhaseError, SymbolError};
pub use jet::{Jet, Monomial, MultiIndex};
pub use num_complex::Complex64;

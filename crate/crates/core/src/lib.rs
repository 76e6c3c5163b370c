//! Numerical algebraic Bethe ansatz for U(1)-invariant N-state R-matrices.
//!
//! Modules:
//! - [`weights`]: R-matrix models, charge-block storage and relation checks.
//! - [`chain`]: Lax operators, monodromy elements, transfer matrix and reference state.
//! - [`amplitudes`]: exchange function, determinant families, off-shell amplitudes.
//! - [`bethe`]: Bethe vectors, Bethe equations, Newton solver, eigenvalues, off-shell expansion.
//! - [`verify`]: exact diagonalization, commutation-rule generator, identity suites.
//! - [`cli`]: configuration parsing, commands and reports behind the `bethe` binary.

pub mod amplitudes;
pub mod bethe;
pub mod chain;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod verify;
pub mod weights;

pub use error::{BetheError, Result};
pub use linalg::C64;

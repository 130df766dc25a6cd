//! Numerical laboratory for fourth-order Schrödinger operators `Δ² + V` and
//! their variable-coefficient generalizations on truncated periodic boxes.
//!
//! The crate is organized bottom-up:
//!
//! - [`grid`]: periodic lattices, discrete `L^p` norms and exact spectral
//!   differentiation.
//! - [`potential`]: potential families, the derivative growth certificate
//!   `|D^m V| <= c V^alpha`, mollification and the resolvent symbol
//!   `M = (mu + omega2 + V)^{-1}` with its first three derivatives.
//! - [`operator`]: the shifted bilaplacian, variable-coefficient operators,
//!   multiplication operators, sums, adjoints and resolvent solves.
//! - [`spectral`]: operator norms, sector scans, imaginary powers and
//!   exponent fitting.
//! - [`commutator`]: the resolvent commutator, its decomposition identities
//!   and decay sweeps.
//! - [`semigroup`]: evolution, analyticity and a-priori checks.
//!
//! Sweeps run on rayon when the `parallel` feature is enabled (the default);
//! see [`par::Exec`].

pub mod commutator;
pub mod csv;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod operator;
pub mod par;
pub mod potential;
pub mod rng;
pub mod semigroup;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{Field, Grid, MultiIndex};
pub use num_complex::Complex64 as C64;
pub use par::Exec;

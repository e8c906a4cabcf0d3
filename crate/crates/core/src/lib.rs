//! Bellman values, sharp bounds and extremal constructions for the maximal
//! operator on finite homogeneous measure trees.
//!
//! The crate has four layers:
//!
//! - [`bellman`] — pure numeric kernels: the kernel `H_p` and its inverse
//!   `omega_p`, the alpha-perturbed calibration root, the critical surface
//!   `F(f, A)`, the exact Bellman value on that surface, and the `h`-based
//!   upper bound valid on the whole constraint domain;
//! - [`tree`] — m-adic measure trees, step functions on their leaves, exact
//!   maximal-operator evaluation and compensated integration;
//! - [`extremal`] — the recursive residual-cell construction whose maximal
//!   integrals approach the Bellman value as alpha shrinks;
//! - [`harness`] — seeded randomized property suites (mixed-moment bound,
//!   weak-type inequalities, upper-bound domination, brute-force equivalence)
//!   and convergence studies.
//!
//! Every operation is pure and every type immutable after construction, so
//! the whole API is safe to drive from multiple threads.

pub mod bellman;
pub mod error;
pub mod extremal;
pub mod harness;
pub mod roots;
pub mod tree;
pub mod types;

pub use error::{Error, Result};
pub use types::{BoundReport, ConstraintTriple, Exponents};

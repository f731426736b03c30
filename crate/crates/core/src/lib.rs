//! Randomized rounding of orthogonal matrices to permutation matrices.
//!
//! An orthogonal `U` is rounded at a Gaussian point `x` to the permutation
//! that matches the rank order of `x` with the rank order of `Ux`. Averaging
//! rank-one weights `x ⊗ x` over many such roundings produces a
//! non-commutative convex combination `Σ A_σ σ` of permutation matrices
//! (positive semidefinite `A_σ` summing to the identity) that approximates
//! `U` entrywise within `O(ln n / √n)` and in Frobenius norm within
//! `O(ln n)`.
//!
//! Modules:
//!
//! * [`matrix`], [`permutation`]: dense matrices, orthogonal matrices,
//!   permutations, norms and file formats.
//! * [`gaussian`]: seeded streams, the normal CDF/ICDF, Haar sampling and
//!   Gaussian tail bounds.
//! * [`rounding`]: the rounding itself, residuals, distributions and moments.
//! * [`nconv`]: Monte Carlo non-commutative convex approximations.
//! * [`concentration`]: order-statistic tail bounds and their simulators.
//! * [`qap`]: quadratic assignment objective, eigenvalue bound and a
//!   rounding heuristic.

pub mod concentration;
pub mod error;
pub mod gaussian;
pub mod matrix;
pub mod nconv;
pub mod permutation;
pub mod qap;
pub mod rounding;

mod parallel;

pub use error::{Error, Result};
pub use gaussian::RandomStream;
pub use matrix::{OrthogonalMatrix, SquareMatrix};
pub use permutation::Permutation;

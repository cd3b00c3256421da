//! Perturbative solver for the elliptic Calogero-Sutherland model.
//!
//! The model is N quantum particles on a circle with an elliptic two-body
//! interaction,
//!
//! ```text
//!   H_N = -sum_j d^2/dx_j^2 + 2 lambda (lambda - 1) sum_{j<k} V(x_j - x_k),
//! ```
//!
//! where V is built from the odd Jacobi theta function with nome q.  At
//! q = 0 the model degenerates to the Sutherland model, whose eigenfunctions
//! are Jack polynomials times a known ground-state factor.  This crate
//! computes the q^2-expansion of the eigenvalues and symmetric eigenfunction
//! series around that limit: a triangular recursion determines the plane-wave
//! coefficients order by order, a kernel expansion produces the elliptic
//! deformation of the Jack polynomials, and a verification layer checks the
//! results against exact identities, quadrature, and a Galerkin
//! discretization.
//!
//! Modules:
//! - [`elliptic_core`]: theta functions, the pair potential, Weierstrass
//!   functions, plane-wave coefficient series.
//! - [`series_algebra`]: sparse Laurent polynomials with q^2-series
//!   coefficients and the coefficient-space Hamiltonian action.
//! - [`scalar`]: the coefficient field abstraction (f64 or exact rationals).
//! - [`error`]: the shared error type.

pub mod elliptic_core;
pub mod error;
pub mod scalar;
pub mod series_algebra;
pub mod spectrum_recursion;
pub mod verification;
pub mod wavefunction;

pub use error::{Error, Result};
pub use scalar::Scalar;

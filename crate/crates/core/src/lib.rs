//! Numerical tools for Dirichlet problems of anisotropic stable
//! integro-differential operators of order `2s`, `s ∈ (0, 1)`.
//!
//! The operator is determined by a spectral density `a` (or an atomic
//! spectral measure) on the unit sphere together with the order `s`:
//!
//! ```text
//! Lu(x) = ∫ (2u(x) − u(x+y) − u(x−y)) a(y/|y|) |y|^{−n−2s} dy
//! ```
//!
//! The crate provides
//!
//! * [`spectral`]: spectral densities, the Fourier symbol `A(ξ)`, its square
//!   root, and the kernel density of the half-order operator `L^{1/2}`;
//! * [`geometry`]: bounded C^{1,1} domains in 1-D/2-D with distance
//!   function, boundary quadrature and star-shapedness checks;
//! * [`nonlocal`]: pointwise singular quadrature for `Lu`, `L^{1/2}u` and
//!   the bilinear increment forms;
//! * [`solver`]: a symmetric Galerkin discretization of the anisotropic
//!   energy form with CG and damped Picard iterations;
//! * [`traces`]: boundary quotients `u/d^s`, weighted Hölder estimators and
//!   logarithmic boundary-singularity fits of `L^{1/2}u`;
//! * [`pohozaev`]: assembly of both sides of the Pohozaev-type identities
//!   and of the integration-by-parts formula, with defect reports;
//! * [`config`] / [`report`]: run configuration, artifact manifests and
//!   report emission for the CLI.

pub mod config;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod nonlocal;
pub mod numeric;
pub mod pohozaev;
pub mod report;
pub mod solver;
pub mod spectral;
pub mod traces;

pub use error::Error;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;

//! Dirichlet eigenvalues of the fractional Laplacian `(-Δ)^s` on intervals and planar
//! star-shaped domains.
//!
//! - [`geometry`]: domains, boundary quadrature, perturbation fields and composite maps.
//! - [`discretization`]: a weighted Jacobi basis on intervals, hat-function lattices in one
//!   and two dimensions, pulled-back forms of deformed domains, potentials and weights.
//! - [`spectrum`]: the generalized eigenproblem, clustering and overlap tracking.
//! - [`shape_calculus`]: boundary densities `u/δ^s`, the Pohozaev identity and splitting
//!   matrices for domain, potential and weight perturbations.
//! - [`genericity`]: a loop that makes the first `q` eigenvalues simple.
//! - [`io`]: experiment configuration and CSV/JSON output.
//!
//! ```
//! use fraclab::discretization::assemble_1d_spectral;
//! use fraclab::geometry::Domain;
//! use fraclab::spectrum::solve;
//!
//! let op = assemble_1d_spectral(0.5, 32, &Domain::interval(-1.0, 1.0)?)?;
//! let spec = solve(&op, 2)?;
//! assert!(spec.eigenvalues[0] < spec.eigenvalues[1]);
//! # Ok::<(), fraclab::Error>(())
//! ```

pub mod discretization;
mod error;
pub mod genericity;
pub mod geometry;
pub mod io;
pub mod quadrature;
pub mod shape_calculus;
pub mod special;
pub mod spectrum;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/discretization.md")]
    mod discretization {}
    #[doc = include_str!("../../../book/src/spectrum.md")]
    mod spectrum {}
    #[doc = include_str!("../../../book/src/shape_calculus.md")]
    mod shape_calculus {}
    #[doc = include_str!("../../../book/src/genericity.md")]
    mod genericity {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

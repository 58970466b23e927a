//! Numerical tools for valuations on Lipschitz functions on the unit sphere.
//!
//! * [`quadrature`]: grids approximating `H^{n-1}` on `S^{n-1}`.
//! * [`fields`]: Lipschitz functions as expression trees, their gradients,
//!   the `GL(n)` action, norms and the metric `d_τ`.
//! * [`bodies`]: convex bodies, support functions and surface area measures.
//! * [`valuations`]: the degree 0–2 functionals and property checkers.
//! * [`counterexample`]: the divergence witness for degree `n-1` odd
//!   extensions.

pub mod bodies;
pub mod counterexample;
pub mod descriptor;
pub mod error;
pub mod fields;
pub mod linalg;
pub mod quadrature;
pub mod sampling;
pub mod valuations;

pub use error::{Error, Result};
pub use fields::ScalarField;
pub use quadrature::{build_grid, GridSpec, QuadratureGrid};

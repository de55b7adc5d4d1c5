//! Whiskered tori of the quasiperiodically forced pendulum.
//!
//! The crate builds the invariant torus, its linearization and Lyapunov
//! exponent, the unstable/stable whiskers as analytic parametrizations, and
//! the order-by-order expansion of all of these in the coupling.

pub mod chebyshev;
pub mod collocation;
pub mod error;
pub mod fourier;
pub mod integrator;
pub mod jet;
pub mod kernel;
pub mod lindstedt;
pub mod linearization;
pub mod model;
pub mod separatrix;
pub mod torus;
pub mod trees;
pub mod whisker;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

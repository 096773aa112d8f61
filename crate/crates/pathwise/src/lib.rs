//! Pathwise integration and differential equations driven by Hoelder paths
//! with coefficients of bounded variation.
//!
//! The crate is organized bottom-up:
//!
//! - [`grid_paths`] samples fractional Brownian motion and deterministic
//!   paths on uniform time grids.
//! - [`measures`] builds occupation measures and evaluates Riesz potentials,
//!   mutual energies and upper-regularity exponents.
//! - [`bv_library`] provides coefficient functions of bounded variation with
//!   discretized gradient measures, matrix fields and their inverses.
//! - [`variability`] computes the variability statistic of a path against a
//!   coefficient and classifies it across resolutions.
//! - [`frac_calc`] implements fractional integrals, derivatives and the
//!   weighted Sobolev norms.
//! - [`gls_integral`] evaluates the generalized Lebesgue-Stieltjes integral
//!   and studies Riemann-Stieltjes convergence rates.
//! - [`doss`] solves `grad f = sigma(f)` and verifies candidate solutions
//!   `X_t = f(Y_t + g(x0))`.
//!
//! ```
//! use pathwise::gls_integral::gls_integrate;
//! use pathwise::grid_paths::{GridFunction, TimeGrid};
//!
//! let grid = TimeGrid::new(1.0, 1024)?;
//! let t = GridFunction::from_fn(grid, |t| t);
//! let r = gls_integrate(&t, &t, 0.5, 1.0)?;
//! assert!((r.value - 0.5).abs() < 1e-3);
//! # Ok::<(), pathwise::error::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bv_library;
pub mod doss;
pub mod error;
pub mod frac_calc;
pub mod gls_integral;
pub mod grid_paths;
pub mod measures;
pub mod numerics;
pub mod variability;

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

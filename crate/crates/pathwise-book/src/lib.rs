//! The chapters of the guide in `book/`, one module each. `cargo test --doc`
//! runs every snippet against the current library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/paths.md")]
pub mod paths {}
#[doc = include_str!("../../../book/src/measures.md")]
pub mod measures {}
#[doc = include_str!("../../../book/src/coefficients.md")]
pub mod coefficients {}
#[doc = include_str!("../../../book/src/variability.md")]
pub mod variability {}
#[doc = include_str!("../../../book/src/fractional.md")]
pub mod fractional {}
#[doc = include_str!("../../../book/src/integral.md")]
pub mod integral {}
#[doc = include_str!("../../../book/src/doss.md")]
pub mod doss {}
#[doc = include_str!("../../../book/src/harness.md")]
pub mod harness {}
#[doc = include_str!("../../../README.md")]
pub mod readme {}

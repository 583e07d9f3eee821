//! Numerical laboratory for coherent photon subtraction from a two-mode
//! squeezed vacuum.
//!
//! The crate carries two independent routes to the same physics:
//!
//! * [`dense`] builds the full four-mode state on a truncated Fock space,
//!   pushes it through the beamsplitter network and conditions on
//!   photon-number-resolving detection.
//! * [`analytic`] evaluates the closed-form subtraction coefficients and
//!   output states directly.
//!
//! Around them sit the loss and detection models ([`channels`]), the target
//! code states and error model ([`codes`]), phase-space and state metrics
//! ([`analysis`]) and the sweep/table machinery ([`planner`]).
//!
//! The crate is `no_std` and only needs `alloc`. All transcendental
//! functions go through `libm`, so results are bit-identical across
//! platforms and build configurations.
#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is the NaN-rejecting guard throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod analytic;
pub mod channels;
pub mod codes;
pub mod dense;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod math;
pub mod planner;
pub mod squeeze;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

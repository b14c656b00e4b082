//! Numerical laboratory for Orlicz N-functions.
//!
//! The crate evaluates N-functions and their complementary functions, decides
//! the integrability conditions that gate a priori estimates for complex
//! Monge-Ampère equations with Orlicz right-hand sides, computes the stability
//! modulus, runs the Green-function/volume-bound pipeline, and certifies the
//! closed-form asymptotics of the standard families.
//!
//! Start with [`nfunctions::NFunction`] and [`conjugate::ConjugatePair`];
//! the `examples/` directory has one runnable program per capability.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod conjugate;
pub mod error;
pub mod geometry;
pub mod ledger;
pub mod nfunctions;
pub mod orlicz_measure;
pub mod quadrature;
pub mod report;
pub mod roots;
pub mod special;
pub mod stability;

pub use conjugate::ConjugatePair;
pub use error::{Error, Result};
pub use ledger::Ledger;
pub use nfunctions::{Family, NFunction};

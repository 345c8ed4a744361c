//! Explicit approximate quantum (t,t)-designs.
//!
//! The crate builds weighted ensembles of pure states whose low-order moments
//! match the Haar measure, verifies them against exact rational Haar moments,
//! and uses the resulting POVMs to distinguish density matrices.

pub mod design;
pub mod distinction;
pub mod error;
pub mod field;
pub mod haar;
pub mod kwise;
pub mod povm;
pub mod quadrature;
pub mod reduce;
pub mod states;
pub mod verifier;

pub use error::{Error, Result};

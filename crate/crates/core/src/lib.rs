//! Type-complexity variable-to-fixed length universal codes for finite-alphabet
//! exponential families.
//!
//! The crate is organized bottom-up:
//!
//! - [`models`]: exponential-family sources, sampling and maximum likelihood.
//! - [`qtypes`]: quantized type classes and exact class-size counting.
//! - [`dictionary`]: the TC dictionary, the Tunstall baseline, parsing and file format.
//! - [`converse`]: the variable-to-fixed to fixed-to-variable transform.
//! - [`eval`]: epsilon-coding rates, asymptotic predictions and diagnostics.

pub mod error;
pub mod models;
pub mod qtypes;
pub mod dictionary;
pub mod converse;
pub mod eval;

pub use error::{Error, Result};
pub use models::{ExpFamilyModel, ParamVector, Sequence};
pub use qtypes::{CellIndex, Grid, TypeClassKey, TypeCounter};

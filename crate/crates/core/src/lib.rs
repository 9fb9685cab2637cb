//! Realizations, boundary regularity and desingularized models of
//! Schur-Agler functions on the polydisc.

// `!(x > 0.0)` style tests are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary;
pub mod derivative;
pub mod desingularize;
pub mod error;
pub mod function;
pub mod numerics;
pub mod pencil;
pub mod phi3;
pub mod realization;
pub mod sampling;
pub mod suite;

pub use error::{Error, Result};
pub use function::PolydiscFunction;

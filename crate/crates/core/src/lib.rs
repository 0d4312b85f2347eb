//! Swing option valuation on scenario lattices.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dual;
pub mod error;
pub mod model;
pub mod oracle;
pub mod policy;
pub mod stopping;
pub mod table;
pub mod value;

pub use error::{Result, SwingError};

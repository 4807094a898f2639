#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod oracles;
pub mod projections;
pub mod schedules;
pub mod sco;
pub mod solvers;
pub mod synthetic;
pub mod wdc;

pub use error::{Error, Result};

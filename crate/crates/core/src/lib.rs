#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN

pub mod cli;
pub mod error;
pub mod ideal_solver;
pub mod loss_family;
pub mod nn;
pub mod synth;
pub mod trainer;
pub mod verify;

pub use error::{Error, Result};

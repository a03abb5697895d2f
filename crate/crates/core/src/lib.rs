#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod env;
pub mod error;
pub mod model;
pub mod ppo;
pub mod protection;
pub mod sim;

pub use error::{Error, Result};

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod clustering;
pub mod data;
pub mod error;
pub mod experiment;
pub mod groups;
pub mod linalg;
pub mod metrics;
pub mod norms;
pub mod oracle;
pub mod ot;
pub mod solvers;
pub mod tuning;

pub use error::{GwglError, Result};
pub use groups::GroupStructure;

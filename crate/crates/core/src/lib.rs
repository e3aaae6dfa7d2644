// `!(x > 0.0)` is used on purpose so NaN settings are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dc_admm;
pub mod diagnostics;
pub mod error;
pub mod fmt;
pub mod netgraph;
pub mod oracle;
pub mod pdc_admm;
pub mod problem;
pub mod randomized;
pub mod subsolvers;

pub use error::{Error, Result};

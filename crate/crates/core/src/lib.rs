// Negated float comparisons are used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod codec;
pub mod baselines;
pub mod bench;
pub mod data;
pub mod encoding;
pub mod error;
pub mod gradcheck;
pub mod learner;
pub mod nn;
pub mod synthetic;
pub mod vector;

pub use error::{Error, Result};

#![no_std]
// `!(x > 0.0)` deliberately rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod comparison;
pub mod dwell;
pub mod error;
pub mod estimate;
pub mod expr;
pub mod lyapunov;
pub mod quadrature;
pub mod random;
pub mod system;

pub use error::{Error, Result};

//! Critical constants C_β of the attractive relativistic Vlasov-Poisson
//! system from Lane-Emden polytropes, with quadrature checks of every
//! identity along the way.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod critical;
pub mod error;
pub mod numerics;
pub mod polytrope;
pub mod verify;

pub use error::{Error, Result};
pub use numerics::Tolerances;

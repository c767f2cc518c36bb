//! Time-varying soft-maximum composite control barrier functions built from
//! periodic range scans, with a closed-form QP safety filter and a
//! deterministic closed-loop simulator.

pub mod barrier;
pub mod error;
pub mod filter;
pub mod homotopy;
pub mod jet;
pub mod perception;
pub mod plants;
pub mod sim;
pub mod soft_compose;

pub use error::{CbfError, Result};

//! Solver and numerical verifier for the monotone D1 equilibrium of a
//! competitive market where senders split a fixed resource budget between a
//! cognitive signal `m1` and a non-cognitive signal `m2`.

pub mod d1;
pub mod equilibrium;
pub mod error;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod riley_ode;
pub mod thresholds;
pub mod verifier;

pub use error::{Error, Result};

//! Scalar numerics shared by the solver: bracketing root finders, a
//! golden-section maximizer and adaptive Gauss–Kronrod quadrature.

mod quadrature;
mod roots;

pub use quadrature::{integrate, QuadOptions, QuadResult};
pub use roots::{bisect, golden_max, Bracket};

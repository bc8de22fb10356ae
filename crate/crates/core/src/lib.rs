//! Curvature, foliation and Weyl-entropy toolkit for analytic zero-shift spacetimes.

pub mod catalog;
pub mod curvature;
pub mod entropy;
pub mod error;
pub mod expr;
pub mod foliation;
pub mod jet;
pub mod numdiff;
pub mod point;
pub mod quadrature;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
pub use point::Point;

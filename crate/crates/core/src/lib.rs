#![no_std]
extern crate alloc;

pub mod aggregate;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod lp;
pub mod misspec;
pub mod monte_carlo;
pub mod normal;
pub mod panel;
pub mod rng;
pub mod selection;
pub mod spline;

pub use error::{Error, ErrorClass, Result};

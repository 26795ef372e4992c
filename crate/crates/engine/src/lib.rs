//! Option pricing under Heston, Bates and Bates-Hull-White dynamics with a
//! hybrid tree/finite-difference scheme, hybrid Monte Carlo and a
//! characteristic-function reference pricer.

pub mod error;
pub mod fd;
pub mod harness;
pub mod hybrid;
pub mod lattice;
pub mod model;
pub mod montecarlo;
pub mod reference;

pub use error::{Error, Result};

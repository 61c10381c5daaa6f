//! Numerical node-opening construction of stacked doubly periodic minimal
//! surfaces in `T x R`.

pub mod elliptic;
pub mod error;
pub mod config;
pub mod hecke;
pub mod opening;
pub mod solver;
pub mod immersion;
pub mod asymptotics;

pub use elliptic::{Lattice, TorusPoint, C64};
pub use error::{Error, Result};

//! Matrix product operator encodings of time-evolution operators.
pub mod bench;
mod chain;
pub mod compression;
pub mod driving;
pub mod dyson;
pub mod error;
pub mod exact;
pub mod extensive;
pub mod fdmpo;
pub mod integrals;
pub mod level;
pub mod magnus;
pub mod model;
pub mod mps;
mod power;
pub mod quantics;
pub mod taylor;
pub mod tensor;
#[cfg(test)]
mod testutil;
pub use error::{Error, Result};

//! Multiphoton resonances of a Δ-type qutrit coupled to two resonators, and
//! deterministic NOON-state preparation built on them.
//!
//! All quantities are dimensionless in units of the mode-a frequency `ω_a`
//! with `ħ = 1`.

pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod model;
pub mod perturb;
pub mod protocol;
pub mod spectrum;

pub use error::{Error, Result};

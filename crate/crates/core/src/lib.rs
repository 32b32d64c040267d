//! Photon statistics of a heralded single photon mixed with a weak coherent
//! state, computed three ways: closed-form models, an exact truncated-Fock
//! oracle, and Monte Carlo HBT coincidence counting.

pub mod analytic;
pub mod error;
pub mod estimators;
pub mod fock;
pub mod hbt;
pub mod oracle;

pub use error::{Error, Result};

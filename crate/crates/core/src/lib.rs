//! Stimulus-driven temporal point processes.
//!
//! The modelled process has no self-excitation: its intensity is a constant
//! baseline plus truncated-Gaussian bumps placed after the events of known
//! stimulus streams ("drivers"). The crate provides
//!
//! - [`model`]: domain types, kernel, intensity, likelihood and gradient,
//! - [`simulate`]: driver generation and thinning simulation,
//! - [`em`]: smart-start initialisation and the EM fitting loop,
//! - [`eval`]: recovery metrics, recovery experiment grid and the segment
//!   t-test of stimulus/event independence,
//! - [`ingest`]: CSV/JSON formats and activation binarisation,
//! - [`cli`]: the `driven-pp` command-line front end.

pub mod cli;
pub mod em;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod model;
pub mod simulate;

#[cfg(test)]
#[path = "../tests/common/quad.rs"]
mod quad;

pub use error::{Error, Result};

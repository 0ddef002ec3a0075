//! Exact Fock-space simulation of NOON-state entanglement concentration
//! assisted by a single auxiliary photon and cross-Kerr QND readout.
//!
//! Layers, bottom up:
//! - [`fock`]: sparse pure states over named bosonic modes.
//! - [`optics`]: beam splitters, detectors, phase flips and the ideal
//!   cross-Kerr/homodyne parity check.
//! - [`ecp`]: concentration rounds, recycling and the loss model.
//! - [`analytics`]: closed-form per-round and total success probabilities.
//! - [`cli`]: the command-line driver and its CSV formats.

pub mod analytics;
pub mod cli;
pub mod ecp;
pub mod error;
pub mod fock;
pub mod optics;

pub use error::{Error, Result};
pub use fock::{fidelity_up_to_global_phase, BasisKet, ModeId, PureState, Register};

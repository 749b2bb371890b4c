//! Lossy propagation of bounded-photon-number light.
//!
//! A medium is modeled as a dense chain of weak beam splitters, each scattering
//! a little of the signal into a vacuum port. In the continuum limit every mode
//! sees binomial photon loss at survival `exp(-optical depth)` together with a
//! phase rotation. This crate computes the exact output density matrices for
//! single-mode Fock inputs and arbitrary two-mode inputs with at most `N`
//! photons per mode, the finite-chain model used to check them, and the
//! coherence and entanglement measures used to analyze them.
//!
//! - [`fock`]: cutoffs, input states, density matrices, factorial tables.
//! - [`propagation`]: media profiles and the continuum loss channel.
//! - [`splitter`]: the discrete beam-splitter chain and its Kraus channel.
//! - [`metrics`]: coherence power, partial transpose, negativity, purity.
//! - [`ensemble`]: seeded random input ensembles and distance sweeps.
//! - [`experiment`]: the experiment runner behind the command-line tool.

pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod fock;
pub mod linalg;
pub mod metrics;
pub mod propagation;
pub mod splitter;

pub use error::{Error, Result};
pub use fock::{PhotonCutoff, TwoModeDensityMatrix, TwoModeState};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

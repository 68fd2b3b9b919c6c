//! Differentially private estimation by one-posterior sampling from
//! β-divergence generalized posteriors.
//!
//! The crate covers the likelihood models and priors ([`model`]), the βD loss
//! and privacy calibration ([`privacy`]), generalized posteriors
//! ([`posterior`]), an adaptive HMC sampler with convergence diagnostics
//! ([`hmc`], [`diagnostics`]), release mechanisms including the classical
//! baselines ([`mechanisms`]), a membership-inference audit harness
//! ([`audit`]), data handling and metrics ([`data`]) and the experiment
//! pipelines driven by the command-line tool ([`experiment`]).

pub mod audit;
pub mod data;
pub mod diagnostics;
pub mod erm;
pub mod hmc;
mod linalg;
pub mod error;
pub mod experiment;
pub mod mechanisms;
pub mod model;
pub mod posterior;
pub mod privacy;
pub mod rng;

pub use error::{Error, Result};

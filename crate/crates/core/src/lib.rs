//! Secrecy-rate analysis of a MIMOME wiretap channel with Gaussian-mixture
//! signaling.
//!
//! The transmitter encodes a confidential message as the index of one of K
//! Gaussian distributions; the receiver classifies, the eavesdropper is left
//! with vanishing mutual information. This crate provides:
//!
//! - [`numerics`]: dense-matrix primitives (Cayley transform, DCT rows,
//!   Cholesky log-determinants, symmetric eigen-analysis);
//! - [`signal`]: the K-class mixture codebook and the rotated-subspace
//!   covariance family;
//! - [`channel`]: legitimate/eavesdropper channels and the push-forward of a
//!   source mixture;
//! - [`info`]: Gaussian entropies, Monte-Carlo mutual information, MAP error
//!   rates and the secrecy/equivocation report;
//! - [`harness`]: seeded experiment sweeps, CDF assembly, CSV output and the
//!   validation suite.

pub mod channel;
pub mod error;
pub mod harness;
pub mod info;
pub mod numerics;
pub mod signal;

pub use channel::{ChannelPair, InducedGmm};
pub use error::{Error, Result};
pub use harness::{BobChannel, CdfResult, Metric, ScenarioConfig, ValidationReport};
pub use info::{Estimate, RateReport};
pub use signal::{CayleyFamilySpec, GaussianClass, GmmSource};

//! Sequential Bayesian experimental design under model misspecification.
//!
//! The crate provides nested Monte Carlo expected information gain, the
//! R-I and R-IDeA acquisition functions, an oracle-side error decomposition
//! with bound and region diagnostics, three simulated testbeds, and a seeded
//! experiment harness that writes CSV metrics.

// `!(x > 0.0)` guards deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod diagnostics;
pub mod eig;
pub mod error;
pub mod harness;
pub mod inference;
pub mod numerics;
pub mod testbeds;

pub use acquisition::{AcquisitionSpec, Method, ProxyConfig, ProxyFunction, Selection};
pub use diagnostics::{BestInClass, BoundInputs, DecompositionReport};
pub use eig::{EigConfig, EigEstimate};
pub use error::{BoedError, Result};
pub use harness::{ExperimentConfig, MetricsRow, RunManifest, RunResult};
pub use inference::{ConjugateState, FeatureMap, ParticleState, Posterior};
pub use numerics::{RngStream, SampleSet};
pub use testbeds::{Specification, Testbed, TestbedConfig, TestbedKind};

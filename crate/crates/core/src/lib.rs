//! Stress-aware training control.
//!
//! A scalar stress signal accumulates while training stalls and decays while
//! it improves. Past configurable thresholds the controller injects Gaussian
//! noise into the parameters or applies a plastic deformation to the last
//! layers, with a saved yield point to fall back on. The controller wraps any
//! of the optimizers in [`optim`] and only acts at epoch boundaries.
//!
//! The crate also carries the testbed used to study it: a small MLP
//! ([`nn`]), synthetic landscapes ([`landscape`]), datasets ([`data`]),
//! curvature and trajectory diagnostics ([`analysis`]) and a reproducible run
//! harness ([`harness`]).

pub mod analysis;
pub mod data;
pub mod error;
pub mod harness;
pub mod landscape;
pub mod nn;
pub mod optim;
pub mod params;
pub mod perturb;
pub mod rng;
pub mod sal;
pub mod stress;

pub use error::{Result, SalError};
pub use optim::{OptimizerConfig, OptimizerKind, OptimizerState};
pub use params::{ParamEntry, ParameterSet, Tensor};
pub use perturb::{EventKind, InterventionEvent};
pub use sal::{wrap_with_sal, EpochOutcome, SalController, SalOptimizer};
pub use stress::{EpochMetrics, Regime, SalConfig, StressState};

//! Boosting toward low conditional value-at-risk of the zero-one loss.
//!
//! The crate evaluates CVaR of per-sample losses, solves the linear and
//! entropy-regularized programs that pick sample and model weights, and runs
//! the boosting loops that build randomized ensembles of weak classifiers.

pub mod cvar;
pub mod data;
pub mod artifact;
pub mod boost;
pub mod error;
pub mod learner;
pub mod lp;
pub mod oracle;
pub mod types;

pub use error::{Error, Result};
pub use types::*;

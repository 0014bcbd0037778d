//! Global optimization by gradient ascent on a hierarchy of score-matching
//! objectives.
//!
//! A flow-matching model is trained on points drawn in proportion to their
//! fitness; its score, averaged over Gaussian perturbations, is the gradient
//! of a smoothed log-objective. Annealing the smoothing scale from coarse to
//! fine drives the incumbent towards the global optimum.

pub mod cli;
pub mod error;
pub mod optimizer;
pub mod problems;
pub mod rng;
pub mod sampling;
pub mod schedule;
pub mod scorefield;

pub use error::{Error, Result};

//! Hierarchical outer loop: initialization, Monte Carlo gradient ascent per
//! scale, parallel exploration, the Gaussian-homotopy baseline and 1-D
//! quadrature references.

pub mod explore;
pub mod gradient;
pub mod homotopy;
pub mod quadrature;
pub mod run;
pub mod trace;

pub use explore::{merge_and_prune, parallel_explore_step, Candidate, ExploreConfig};
pub use gradient::{
    ascend_at_scale, initialize_first_scale, mc_gradient, mc_gradient_with_noise, stable_mc_gradient,
    stable_mc_gradient_with_noise, AscentResult, AscentStep, GradConfig,
};
pub use homotopy::{gaussian_homotopy_gradient, HomotopyEstimate};
pub use quadrature::{gauss_hermite, quadrature_log_objective, GaussHermite, QuadratureDensity};
pub use run::{run_optimization, OptimizerConfig, RunResult, SolutionReport, TrajectoryPoint};
pub use trace::{NullSink, Phase, TraceRecord, TraceSink};

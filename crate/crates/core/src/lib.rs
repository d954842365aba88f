//! Location and scale estimation for box densities by semidiscrete optimal
//! transport.
//!
//! Given a density `alpha` that is piecewise constant on disjoint
//! axis-aligned boxes and weighted samples `y_j`, [`estimator::estimate_parameters`]
//! finds the `sigma` and `mu` minimizing the optimal transport cost
//! `int sum_j |sigma x - y_j - mu|^2 d pi`. The plan-dependent part of that
//! cost is recovered from the maximum of the concave dual energy over
//! Laguerre-cell weights ([`dual::solve_dual`]).
//!
//! [`sat`] contains a reduction showing that maximum likelihood for the
//! same model class is NP-hard, and [`oracle`] holds brute-force reference
//! solvers used for validation.

pub mod dual;
pub mod error;
pub mod estimator;
pub mod fixtures;
pub mod geometry;
pub mod io;
pub mod oracle;
pub mod sat;

pub use dual::{solve_dual, DualSolution, DualWeights, SolverConfig, SolverTrace, VolumeBackend};
pub use error::{Error, Result};
pub use estimator::{estimate_parameters, EstimationResult};
pub use geometry::{BoxDensity, Hyperrectangle, Instance, SampleSet, WeightedBox};

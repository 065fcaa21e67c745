//! Periodic smooth-spline Galerkin discretization of the Serre equations.

pub mod banded;
pub mod error;
pub mod functions;
pub mod galerkin;
pub mod manufactured;
pub mod picard;
pub mod quasiinterp;
pub mod rates;
pub mod quadrature;
pub mod serre;
pub mod spline;
pub mod studies;
pub mod trajectory;

pub use banded::{solve_banded_cyclic, BandedCyclicMatrix, CyclicLu};
pub use error::{Error, Result};
pub use functions::{SmoothFn, TrigPoly};
pub use galerkin::Galerkin;
pub use manufactured::{ExactSolution, Forcing, ManufacturedProblem, NoForcing, Still, TravelingWaves};
pub use picard::{consistency_residual, iterate_error, picard_iterate, run_picard, PicardReport, ResidualProbe};
pub use quasiinterp::{QiMask, QiProbe};
pub use quadrature::GaussRule;
pub use rates::{fit_rate, ConvergenceReport, RateFit, Status};
pub use serre::{EnergyDiag, SerreSolver, Simulation, SolverConfig, State};
pub use spline::{Norms, SplineFn, SplineSpace};
pub use trajectory::{TimeGrid, Trajectory};

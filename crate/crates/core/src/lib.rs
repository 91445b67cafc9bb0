//! Mean curvature flow of axially symmetric surfaces with Neumann ends.
//!
//! The surface is generated by rotating the graph of `rho` over `[a, b]` about the
//! `x1` axis. The crate evolves `rho` to the first pinch, audits the a priori
//! curvature estimates along the way and classifies the blow-up rate.

pub mod error;
pub mod evolution;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod monitors;
pub mod singularity;

pub use error::{Error, Result};
pub use evolution::{evolve, rhs, stable_dt, step, Event, Scheme, StepControls, StepOutcome, Trajectory};
pub use geometry::{derivatives, geometry_sample, laplace_beltrami, GeometrySample};
pub use grid::{make_grid, preset_profile, resample, EndCondition, FlowState, PresetSpec, ProfileGrid};

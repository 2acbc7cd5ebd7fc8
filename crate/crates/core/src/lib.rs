#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Two-scale crowd dynamics.
//!
//! Subpopulations are either collections of equal-weight point masses
//! (individuals) or piecewise-constant densities on a fixed rectangular grid
//! (crowds). Each step evaluates a nonlocal velocity field (desired velocity
//! plus a social term built from radial interaction kernels and an
//! anisotropic perception weight) and pushes every measure forward by one
//! explicit Euler step. Density transport is an exact overlap remap, so
//! positivity and total mass are preserved.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the
//! scenario layer and file formats use `f64`.

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod kernels;
pub mod population;
pub mod scalar;
pub mod scenario;
pub mod transport;
pub mod vec2;
pub mod velocity;

pub use error::SimError;
pub use grid::{overlap_area, CellIndex, Grid, Rect};
pub use kernels::{cos_angle, Anisotropy, InteractionKernel};
pub use population::{DensityField, DiscreteMeasure, InteractionMatrix, Measure, Population, SimState};
pub use scalar::Real;
pub use transport::{advect_density, push_particles, step, StepOptions, StepReport};
pub use vec2::Vec2;
pub use velocity::{build_velocity_plan, midpoint_velocity, social_velocity_at, VelocityPlan};

pub type Grid64 = Grid<f64>;
pub type Grid32 = Grid<f32>;
pub type SimState64 = SimState<f64>;
pub type SimState32 = SimState<f32>;
pub type Kernel64 = InteractionKernel<f64>;
pub type DensityField64 = DensityField<f64>;
pub type Vec2f64 = Vec2<f64>;

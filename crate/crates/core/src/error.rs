use thiserror::Error;

use crate::grid::GridError;
use crate::kernels::KernelError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("step {step}: particle {particle} of population '{population}' left the domain at ({x}, {y})")]
    ParticleLeftDomain { step: u64, population: String, particle: usize, x: f64, y: f64 },
    #[error("step {step}: population '{population}' lost mass {lost:e} across the domain boundary")]
    DensityLeftDomain { step: u64, population: String, lost: f64 },
    #[error("step {step}: particles {a} and {b} are {distance:e} apart (merge guard {guard:e})")]
    MergeGuard { step: u64, a: String, b: String, distance: f64, guard: f64 },
    #[error("step {step}: non-finite velocity for population '{population}' at ({x}, {y})")]
    NonFiniteVelocity { step: u64, population: String, x: f64, y: f64 },
    #[error("entropy functional unavailable: {0}")]
    EntropyGate(String),
    #[error("{0}")]
    Diagnostics(String),
}

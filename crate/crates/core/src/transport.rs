//! One explicit push-forward step: particles move by `dt * v`, each density
//! cell is translated rigidly and its mass is redistributed onto the fixed
//! grid in proportion to exact overlap areas.

use log::warn;

use crate::error::SimError;
use crate::grid::{overlap_area, CellIndex, Grid};
use crate::population::{DensityField, DiscreteMeasure, Measure, Population, SimState};
use crate::scalar::Real;
use crate::vec2::Vec2;
use crate::velocity::{build_velocity_plan, PlanEntry, VelocityPlan};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepOptions {
    /// Discard mass leaving the domain instead of failing.
    pub allow_boundary_loss: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationReport<T> {
    pub id: String,
    pub mass_before: T,
    pub mass_after: T,
    pub boundary_loss: T,
    /// `None` for particle populations.
    pub max_density: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport<T> {
    pub populations: Vec<PopulationReport<T>>,
    pub dt: T,
    pub max_speed: T,
    /// Some entry moved farther than one cell in this step.
    pub cfl_exceeded: bool,
}

/// A particle that would leave the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscapedParticle<T> {
    pub index: usize,
    pub position: Vec2<T>,
}

/// `x + dt * v` for every center. Fails on the first center that is not
/// strictly inside the domain afterwards.
pub fn push_particles<T: Real>(
    grid: &Grid<T>,
    centers: &[Vec2<T>],
    velocities: &[Vec2<T>],
    dt: T,
) -> Result<Vec<Vec2<T>>, EscapedParticle<T>> {
    assert_eq!(centers.len(), velocities.len(), "one velocity per particle");
    centers
        .iter()
        .zip(velocities)
        .enumerate()
        .map(|(index, (&x, &v))| {
            let position = x + v * dt;
            if grid.is_inside(position) {
                Ok(position)
            } else {
                Err(EscapedParticle { index, position })
            }
        })
        .collect()
}

/// Remaps `field` after translating every cell by `dt` times its velocity.
/// Returns the new field and the mass that left the domain.
pub fn advect_density<T: Real>(field: &DensityField<T>, velocities: &[Vec2<T>], dt: T) -> (DensityField<T>, T) {
    let grid = field.grid();
    assert_eq!(velocities.len(), grid.num_cells(), "one velocity per cell");
    let domain = grid.domain();
    let area = grid.cell_area();
    let mut mass = vec![T::zero(); grid.num_cells()];
    let mut lost = T::zero();
    for (i, (&rho, &v)) in field.values().iter().zip(velocities).enumerate() {
        if rho == T::zero() {
            continue;
        }
        let image = grid.cell_rect(grid.unflat(i)).translate(v * dt);
        if !domain.contains_rect(&image) {
            lost = lost + rho * (image.area() - overlap_area(&image, &domain));
        }
        let Some((xs, ys)) = grid.cell_range(&image) else {
            continue;
        };
        for k in ys {
            for j in xs.clone() {
                let dest = CellIndex::new(j, k);
                let ov = overlap_area(&grid.cell_rect(dest), &image);
                if ov > T::zero() {
                    mass[grid.flat(dest)] = mass[grid.flat(dest)] + rho * ov;
                }
            }
        }
    }
    let values = mass.into_iter().map(|m| m / area).collect();
    let out = DensityField::from_values(grid, values).expect("deposits are finite and nonnegative");
    (out, lost)
}

/// Losses at or below one unit in the last place of the population's mass
/// are roundoff from the exponentially small tails of the remap and never
/// abort a step; they are still removed and reported.
pub fn roundoff_floor<T: Real>(mass: T) -> T {
    T::epsilon() * mass
}

/// Moves every population with the given plan.
pub fn apply_plan<T: Real>(
    state: &SimState<T>,
    plan: &VelocityPlan<T>,
    opts: StepOptions,
) -> Result<(SimState<T>, StepReport<T>), SimError> {
    let dt = state.dt();
    let grid = state.grid();
    let mut next = Vec::with_capacity(state.populations().len());
    let mut reports = Vec::with_capacity(state.populations().len());
    for (p, entry) in state.populations().iter().zip(&plan.entries) {
        let mass_before = p.total_mass();
        let (measure, boundary_loss, max_density) = match (&p.measure, entry) {
            (Measure::Discrete(d), PlanEntry::Particles(v)) => {
                let (centers, lost) = move_particles(state, p, d, v, opts)?;
                let m = DiscreteMeasure::new(d.weight(), centers)?;
                (Measure::Discrete(m), lost, None)
            }
            (Measure::Density(f), PlanEntry::Cells(v)) => {
                let (out, lost) = advect_density(f, v, dt);
                if lost > roundoff_floor(mass_before) && !opts.allow_boundary_loss {
                    return Err(SimError::DensityLeftDomain {
                        step: state.step_index(),
                        population: p.id.clone(),
                        lost: lost.to_f64().unwrap_or(f64::NAN),
                    });
                }
                let max = out.max_density();
                (Measure::Density(out), lost, Some(max))
            }
            _ => panic!("velocity plan does not match population '{}'", p.id),
        };
        let moved = Population { measure, ..p.clone() };
        reports.push(PopulationReport {
            id: p.id.clone(),
            mass_before,
            mass_after: moved.total_mass(),
            boundary_loss,
            max_density,
        });
        next.push(moved);
    }
    let max_speed = plan.max_speed();
    let cfl_exceeded = dt * max_speed > grid.hx().min(grid.hy());
    if cfl_exceeded {
        warn!("step {}: dt * max|v| = {} exceeds the cell size", state.step_index(), dt * max_speed);
    }
    let mut out = state.clone();
    out.commit(next);
    out.check_merge_guard()?;
    Ok((out, StepReport { populations: reports, dt, max_speed, cfl_exceeded }))
}

fn move_particles<T: Real>(
    state: &SimState<T>,
    p: &Population<T>,
    d: &DiscreteMeasure<T>,
    v: &[Vec2<T>],
    opts: StepOptions,
) -> Result<(Vec<Vec2<T>>, T), SimError> {
    let dt = state.dt();
    let grid = state.grid();
    if !opts.allow_boundary_loss {
        return push_particles(grid, d.centers(), v, dt)
            .map(|c| (c, T::zero()))
            .map_err(|e| SimError::ParticleLeftDomain {
                step: state.step_index(),
                population: p.id.clone(),
                particle: e.index,
                x: e.position.x.to_f64().unwrap_or(f64::NAN),
                y: e.position.y.to_f64().unwrap_or(f64::NAN),
            });
    }
    let mut kept = Vec::with_capacity(d.len());
    let mut lost = T::zero();
    for (&x, &u) in d.centers().iter().zip(v) {
        let y = x + u * dt;
        if grid.is_inside(y) {
            kept.push(y);
        } else {
            warn!("step {}: dropping particle of '{}' at ({}, {})", state.step_index(), p.id, y.x, y.y);
            lost = lost + d.weight();
        }
    }
    Ok((kept, lost))
}

/// One full step: velocities from the current state, then push forward.
pub fn step<T: Real>(state: &SimState<T>, opts: StepOptions) -> Result<(SimState<T>, StepReport<T>), SimError> {
    let plan = build_velocity_plan(state)?;
    apply_plan(state, &plan, opts)
}

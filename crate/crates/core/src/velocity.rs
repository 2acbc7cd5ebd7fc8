//! Total velocity `v_des + v_soc` for every particle and every cell midpoint.
//!
//! Four source/observer combinations are handled:
//!
//! * particle observer, particle source: exact sum over the other centers;
//! * particle observer, density source: four-vertex trapezoid rule per cell,
//!   switching to the cell midpoint when the observer sits on a vertex;
//! * cell observer, particle source: direct evaluation at the midpoint,
//!   replaced by the average over the four cell vertices when a particle sits
//!   on the midpoint;
//! * cell observer, density source: four-vertex trapezoid rule. The result
//!   only depends on the cell offset, so it is tabulated once per pair of
//!   populations and applied as a scatter over occupied source cells.
//!
//! Every per-entry sum runs over sources in a fixed order (source population,
//! then particles or cells in row-major order), so results do not depend on
//! the number of worker threads.

use rayon::prelude::*;

use crate::error::SimError;
use crate::grid::{CellIndex, Grid, Rect};
use crate::kernels::{Anisotropy, InteractionKernel};
use crate::population::{DensityField, Measure, SimState};
use crate::scalar::Real;
use crate::vec2::Vec2;

/// Relative tolerance (in units of the smaller cell size) for deciding that a
/// point coincides with a cell vertex or midpoint.
pub const VERTEX_EPS_REL: f64 = 1e-9;

/// Distances below this are treated as a collapsed pair.
const MIN_DISTANCE: f64 = 1e-12;

/// Number of grid rows handled by one parallel work item.
const BAND_ROWS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum PlanEntry<T> {
    /// One velocity per particle, in particle order.
    Particles(Vec<Vec2<T>>),
    /// One velocity per cell midpoint, row-major.
    Cells(Vec<Vec2<T>>),
}

impl<T> PlanEntry<T> {
    pub fn velocities(&self) -> &[Vec2<T>] {
        match self {
            PlanEntry::Particles(v) | PlanEntry::Cells(v) => v,
        }
    }
}

/// Velocities for every population, computed from a single time level.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityPlan<T> {
    pub entries: Vec<PlanEntry<T>>,
}

impl<T: Real> VelocityPlan<T> {
    pub fn max_speed(&self) -> T {
        self.entries
            .iter()
            .flat_map(|e| e.velocities().iter())
            .fold(T::zero(), |m, v| m.max(v.norm()))
    }
}

pub fn vertex_eps<T: Real>(grid: &Grid<T>) -> T {
    T::lit(VERTEX_EPS_REL) * grid.hx().min(grid.hy())
}

/// `f(|y - x|) g (y - x)/|y - x|` for a source at `y` seen from `x`.
#[inline]
fn pair_term<T: Real>(k: &InteractionKernel<T>, a: &Anisotropy<T>, v_des: Vec2<T>, x: Vec2<T>, y: Vec2<T>) -> Vec2<T> {
    let d = y - x;
    let s = d.norm();
    if s >= k.support() {
        return Vec2::zero();
    }
    let f = k.eval(s);
    let g = a.weight(x, y, v_des);
    d * (f * g / s)
}

fn non_finite<T: Real>(state: &SimState<T>, pop: usize, x: Vec2<T>) -> SimError {
    SimError::NonFiniteVelocity {
        step: state.step_index(),
        population: state.populations()[pop].id.clone(),
        x: x.x.to_f64().unwrap_or(f64::NAN),
        y: x.y.to_f64().unwrap_or(f64::NAN),
    }
}

/// Cells that can interact with `x` under a kernel of the given support.
fn cells_near<T: Real>(grid: &Grid<T>, x: Vec2<T>, support: T) -> Option<(std::ops::RangeInclusive<usize>, std::ops::RangeInclusive<usize>)> {
    grid.cell_range(&Rect::new(x.x - support, x.y - support, x.x + support, x.y + support))
}

/// Particle-observer sum against a density source.
fn density_source_at_point<T: Real>(
    k: &InteractionKernel<T>,
    a: &Anisotropy<T>,
    v_des: Vec2<T>,
    field: &DensityField<T>,
    x: Vec2<T>,
) -> Vec2<T> {
    let grid = field.grid();
    let eps = vertex_eps(grid);
    let area = grid.cell_area();
    let quarter = area * T::lit(0.25);
    let mut acc = Vec2::zero();
    let Some((xs, ys)) = cells_near(grid, x, k.support()) else {
        return acc;
    };
    for kk in ys {
        for j in xs.clone() {
            let idx = CellIndex::new(j, kk);
            let rho = field.get(idx);
            if rho == T::zero() {
                continue;
            }
            let verts = grid.vertices(idx);
            let q = if verts.iter().any(|v| (*v - x).norm() < eps) {
                pair_term(k, a, v_des, x, grid.midpoint(idx)) * area
            } else {
                let mut s = Vec2::zero();
                for v in verts {
                    s += pair_term(k, a, v_des, x, v);
                }
                s * quarter
            };
            acc += q * rho;
        }
    }
    acc
}

/// Social velocity felt at point `x` by population `observer`, treating `x`
/// as a point observer (particle-style quadrature). Source particles located
/// exactly at `x` are skipped.
pub fn social_velocity_at<T: Real>(state: &SimState<T>, observer: usize, x: Vec2<T>) -> Result<Vec2<T>, SimError> {
    let pops = state.populations();
    let obs = &pops[observer];
    let mut v = Vec2::zero();
    for (beta, src) in pops.iter().enumerate() {
        let Some(k) = state.interactions().get(observer, beta) else {
            continue;
        };
        let part = match &src.measure {
            Measure::Discrete(d) => {
                let mut s = Vec2::zero();
                for &y in d.centers() {
                    if y == x {
                        continue;
                    }
                    if (y - x).norm() < T::lit(MIN_DISTANCE) {
                        return Err(non_finite(state, observer, x));
                    }
                    s += pair_term(k, &obs.anisotropy, obs.desired_velocity, x, y);
                }
                s * d.weight()
            }
            Measure::Density(f) => density_source_at_point(k, &obs.anisotropy, obs.desired_velocity, f, x),
        };
        v += part;
    }
    if v.is_finite() {
        Ok(v)
    } else {
        Err(non_finite(state, observer, x))
    }
}

/// Particle-source contribution at a cell midpoint (without the weight).
fn particle_source_at_midpoint<T: Real>(
    k: &InteractionKernel<T>,
    a: &Anisotropy<T>,
    v_des: Vec2<T>,
    centers: &[Vec2<T>],
    grid: &Grid<T>,
    idx: CellIndex,
    eps: T,
) -> Vec2<T> {
    let m = grid.midpoint(idx);
    let mut s = Vec2::zero();
    for &y in centers {
        if (y - m).norm() < eps {
            let mut avg = Vec2::zero();
            for v in grid.vertices(idx) {
                avg += pair_term(k, a, v_des, v, y);
            }
            s += avg * T::lit(0.25);
        } else {
            s += pair_term(k, a, v_des, m, y);
        }
    }
    s
}

/// Density-source contribution at a cell midpoint by direct summation.
fn density_source_at_midpoint<T: Real>(
    k: &InteractionKernel<T>,
    a: &Anisotropy<T>,
    v_des: Vec2<T>,
    field: &DensityField<T>,
    idx: CellIndex,
) -> Vec2<T> {
    let grid = field.grid();
    let m = grid.midpoint(idx);
    let quarter = grid.cell_area() * T::lit(0.25);
    let mut acc = Vec2::zero();
    let Some((xs, ys)) = cells_near(grid, m, k.support()) else {
        return acc;
    };
    for kk in ys {
        for j in xs.clone() {
            let src = CellIndex::new(j, kk);
            let rho = field.get(src);
            if rho == T::zero() {
                continue;
            }
            let mut s = Vec2::zero();
            for v in grid.vertices(src) {
                s += pair_term(k, a, v_des, m, v);
            }
            acc += s * quarter * rho;
        }
    }
    acc
}

/// Total velocity of density population `observer` at the midpoint of `idx`,
/// by direct summation over all sources.
pub fn midpoint_velocity<T: Real>(state: &SimState<T>, observer: usize, idx: CellIndex) -> Result<Vec2<T>, SimError> {
    let pops = state.populations();
    let obs = &pops[observer];
    assert!(obs.as_density().is_some(), "midpoint velocity requested for a particle population");
    let grid = state.grid();
    let eps = vertex_eps(grid);
    let mut v = obs.desired_velocity;
    for (beta, src) in pops.iter().enumerate() {
        let Some(k) = state.interactions().get(observer, beta) else {
            continue;
        };
        let part = match &src.measure {
            Measure::Discrete(d) => {
                particle_source_at_midpoint(k, &obs.anisotropy, obs.desired_velocity, d.centers(), grid, idx, eps) * d.weight()
            }
            Measure::Density(f) => density_source_at_midpoint(k, &obs.anisotropy, obs.desired_velocity, f, idx),
        };
        v += part;
    }
    if v.is_finite() {
        Ok(v)
    } else {
        Err(non_finite(state, observer, grid.midpoint(idx)))
    }
}

/// Trapezoid-rule interaction between a midpoint and a whole source cell,
/// tabulated by cell offset `(source - observer)`.
struct OffsetStencil<T> {
    taps: Vec<(isize, isize, Vec2<T>)>,
    dk_min: isize,
    dk_max: isize,
}

impl<T: Real> OffsetStencil<T> {
    fn new(grid: &Grid<T>, k: &InteractionKernel<T>, a: &Anisotropy<T>, v_des: Vec2<T>) -> Self {
        let (hx, hy) = (grid.hx(), grid.hy());
        let r = k.support();
        let rx = (r / hx).ceil().to_isize().unwrap_or(0) + 1;
        let ry = (r / hy).ceil().to_isize().unwrap_or(0) + 1;
        let quarter = grid.cell_area() * T::lit(0.25);
        let half = T::half();
        let origin = Vec2::zero();
        let mut taps = Vec::new();
        for dk in -ry..=ry {
            for dj in -rx..=rx {
                let (fj, fk) = (T::from_isize(dj).unwrap(), T::from_isize(dk).unwrap());
                let lo = Vec2::new((fj - half) * hx, (fk - half) * hy);
                let hi = Vec2::new((fj + half) * hx, (fk + half) * hy);
                let verts = [lo, Vec2::new(hi.x, lo.y), Vec2::new(lo.x, hi.y), hi];
                if verts.iter().all(|v| v.norm() >= r) {
                    continue;
                }
                let mut s = Vec2::zero();
                for v in verts {
                    s += pair_term(k, a, v_des, origin, v);
                }
                taps.push((dj, dk, s * quarter));
            }
        }
        let dk_min = taps.iter().map(|t| t.1).min().unwrap_or(0);
        let dk_max = taps.iter().map(|t| t.1).max().unwrap_or(0);
        OffsetStencil { taps, dk_min, dk_max }
    }

    /// Adds the contribution of every occupied source cell to the rows
    /// `band_lo..band_lo + band.len()/nx` of `band`.
    fn scatter_band(&self, grid: &Grid<T>, occupied: &[(usize, usize, T)], band_lo: usize, band: &mut [Vec2<T>]) {
        let nx = grid.nx();
        let rows = band.len() / nx;
        let band_hi = band_lo + rows; // exclusive
        // sources whose row can reach the band: ks - dk in [band_lo, band_hi)
        let ks_lo = band_lo as isize + self.dk_min;
        let ks_hi = band_hi as isize - 1 + self.dk_max;
        let start = occupied.partition_point(|&(_, ks, _)| (ks as isize) < ks_lo);
        for &(js, ks, rho) in &occupied[start..] {
            if ks as isize > ks_hi {
                break;
            }
            for &(dj, dk, w) in &self.taps {
                let kd = ks as isize - dk;
                let jd = js as isize - dj;
                if kd < band_lo as isize || kd >= band_hi as isize || jd < 0 || jd >= nx as isize {
                    continue;
                }
                let i = (kd as usize - band_lo) * nx + jd as usize;
                band[i] += w * rho;
            }
        }
    }
}

fn density_observer_plan<T: Real>(state: &SimState<T>, observer: usize) -> Result<Vec<Vec2<T>>, SimError> {
    let pops = state.populations();
    let obs = &pops[observer];
    let grid = state.grid();
    let eps = vertex_eps(grid);
    let nx = grid.nx();
    let n = grid.num_cells();
    let mut total = vec![obs.desired_velocity; n];
    for (beta, src) in pops.iter().enumerate() {
        let Some(k) = state.interactions().get(observer, beta) else {
            continue;
        };
        let mut acc = vec![Vec2::zero(); n];
        match &src.measure {
            Measure::Discrete(d) => {
                let w = d.weight();
                acc.par_iter_mut().enumerate().for_each(|(i, out)| {
                    let idx = grid.unflat(i);
                    *out = particle_source_at_midpoint(k, &obs.anisotropy, obs.desired_velocity, d.centers(), grid, idx, eps) * w;
                });
            }
            Measure::Density(f) => {
                let stencil = OffsetStencil::new(grid, k, &obs.anisotropy, obs.desired_velocity);
                let occupied: Vec<(usize, usize, T)> = f
                    .values()
                    .iter()
                    .enumerate()
                    .filter(|(_, &r)| r != T::zero())
                    .map(|(i, &r)| (i % nx, i / nx, r))
                    .collect();
                acc.par_chunks_mut(nx * BAND_ROWS).enumerate().for_each(|(b, band)| {
                    stencil.scatter_band(grid, &occupied, b * BAND_ROWS, band);
                });
            }
        }
        for (t, a) in total.iter_mut().zip(&acc) {
            *t += *a;
        }
    }
    if let Some(i) = total.iter().position(|v| !v.is_finite()) {
        return Err(non_finite(state, observer, grid.midpoint(grid.unflat(i))));
    }
    Ok(total)
}

/// Velocities for every particle and every cell of every population, from
/// the current state only.
pub fn build_velocity_plan<T: Real>(state: &SimState<T>) -> Result<VelocityPlan<T>, SimError> {
    let entries = state
        .populations()
        .iter()
        .enumerate()
        .map(|(alpha, p)| match &p.measure {
            Measure::Discrete(d) => d
                .centers()
                .par_iter()
                .map(|&x| social_velocity_at(state, alpha, x).map(|s| p.desired_velocity + s))
                .collect::<Result<Vec<_>, _>>()
                .map(PlanEntry::Particles),
            Measure::Density(_) => density_observer_plan(state, alpha).map(PlanEntry::Cells),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(VelocityPlan { entries })
}

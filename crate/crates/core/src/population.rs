//! Subpopulations, the interaction matrix and the whole simulation state.

use std::collections::HashSet;

use crate::error::SimError;
use crate::grid::{overlap_area, CellIndex, Grid, Rect};
use crate::kernels::{Anisotropy, InteractionKernel};
use crate::scalar::Real;
use crate::vec2::Vec2;

/// Smallest admissible distance between two particle centers.
pub const MERGE_GUARD: f64 = 1e-9;

/// Equal-weight point masses: `weight * sum_i delta(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure<T> {
    weight: T,
    centers: Vec<Vec2<T>>,
}

impl<T: Real> DiscreteMeasure<T> {
    pub fn new(weight: T, centers: Vec<Vec2<T>>) -> Result<Self, SimError> {
        if !(weight.is_finite() && weight > T::zero()) {
            return Err(SimError::InvalidState(format!("particle weight must be positive, got {weight}")));
        }
        Ok(DiscreteMeasure { weight, centers })
    }

    pub fn weight(&self) -> T {
        self.weight
    }

    pub fn centers(&self) -> &[Vec2<T>] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// Piecewise-constant density (mass per unit area) on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField<T> {
    grid: Grid<T>,
    values: Vec<T>,
}

impl<T: Real> DensityField<T> {
    pub fn zeros(grid: &Grid<T>) -> Self {
        DensityField { grid: grid.clone(), values: vec![T::zero(); grid.num_cells()] }
    }

    /// Values in row-major order (`k` outer). Rejects negative or
    /// non-finite entries.
    pub fn from_values(grid: &Grid<T>, values: Vec<T>) -> Result<Self, SimError> {
        if values.len() != grid.num_cells() {
            return Err(SimError::InvalidState(format!(
                "density has {} values, grid has {} cells",
                values.len(),
                grid.num_cells()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= T::zero())) {
            return Err(SimError::InvalidState(format!("density value {v} is not a finite nonnegative number")));
        }
        Ok(DensityField { grid: grid.clone(), values })
    }

    /// Uniform density `rho` on `block`, cells partially covered get the
    /// covered fraction so the total mass is exactly `rho * area(block ∩ Ω)`.
    pub fn from_block(grid: &Grid<T>, block: Rect<T>, rho: T) -> Result<Self, SimError> {
        let mut field = Self::zeros(grid);
        if let Some((xs, ys)) = grid.cell_range(&block) {
            let area = grid.cell_area();
            for k in ys {
                for j in xs.clone() {
                    let idx = CellIndex::new(j, k);
                    let cover = overlap_area(&grid.cell_rect(idx), &block);
                    field.values[grid.flat(idx)] = rho * cover / area;
                }
            }
        }
        Self::from_values(grid, field.values)
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn get(&self, idx: CellIndex) -> T {
        self.values[self.grid.flat(idx)]
    }

    pub fn mass(&self) -> T {
        let sum = self.values.iter().fold(T::zero(), |acc, &v| acc + v);
        sum * self.grid.cell_area()
    }

    pub fn max_density(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, &v| acc.max(v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Measure<T> {
    Discrete(DiscreteMeasure<T>),
    Density(DensityField<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population<T> {
    pub id: String,
    pub measure: Measure<T>,
    pub desired_velocity: Vec2<T>,
    pub anisotropy: Anisotropy<T>,
}

impl<T: Real> Population<T> {
    pub fn discrete(id: impl Into<String>, m: DiscreteMeasure<T>, v_des: Vec2<T>, a: Anisotropy<T>) -> Self {
        Population { id: id.into(), measure: Measure::Discrete(m), desired_velocity: v_des, anisotropy: a }
    }

    pub fn density(id: impl Into<String>, d: DensityField<T>, v_des: Vec2<T>, a: Anisotropy<T>) -> Self {
        Population { id: id.into(), measure: Measure::Density(d), desired_velocity: v_des, anisotropy: a }
    }

    pub fn total_mass(&self) -> T {
        match &self.measure {
            Measure::Discrete(d) => d.weight * T::from_usize_lossy(d.len()),
            Measure::Density(f) => f.mass(),
        }
    }

    pub fn as_discrete(&self) -> Option<&DiscreteMeasure<T>> {
        match &self.measure {
            Measure::Discrete(d) => Some(d),
            Measure::Density(_) => None,
        }
    }

    pub fn as_density(&self) -> Option<&DensityField<T>> {
        match &self.measure {
            Measure::Density(f) => Some(f),
            Measure::Discrete(_) => None,
        }
    }
}

/// Kernel `f^alpha_beta` for every ordered pair; `None` means no influence.
///
/// Indexed as `(observer, source)`: the kernel through which population
/// `source` changes the velocity of population `observer`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix<T> {
    n: usize,
    entries: Vec<Option<InteractionKernel<T>>>,
}

impl<T: Real> InteractionMatrix<T> {
    pub fn empty(n: usize) -> Self {
        InteractionMatrix { n, entries: vec![None; n * n] }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn set(&mut self, observer: usize, source: usize, k: Option<InteractionKernel<T>>) {
        assert!(observer < self.n && source < self.n);
        self.entries[observer * self.n + source] = k;
    }

    #[inline]
    pub fn get(&self, observer: usize, source: usize) -> Option<&InteractionKernel<T>> {
        self.entries[observer * self.n + source].as_ref()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|a| (0..self.n).all(|b| self.get(a, b) == self.get(b, a)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState<T> {
    step: u64,
    dt: T,
    grid: Grid<T>,
    populations: Vec<Population<T>>,
    interactions: InteractionMatrix<T>,
}

impl<T: Real> SimState<T> {
    /// Validates ids, shapes, particle placement and the merge guard.
    pub fn new(
        grid: Grid<T>,
        dt: T,
        populations: Vec<Population<T>>,
        interactions: InteractionMatrix<T>,
    ) -> Result<Self, SimError> {
        if !(dt.is_finite() && dt > T::zero()) {
            return Err(SimError::InvalidState(format!("time step must be positive, got {dt}")));
        }
        if interactions.len() != populations.len() {
            return Err(SimError::InvalidState(format!(
                "interaction matrix covers {} populations, state has {}",
                interactions.len(),
                populations.len()
            )));
        }
        let mut seen = HashSet::new();
        for p in &populations {
            if !seen.insert(p.id.as_str()) {
                return Err(SimError::InvalidState(format!("duplicate population id '{}'", p.id)));
            }
            if !p.desired_velocity.is_finite() {
                return Err(SimError::InvalidState(format!("population '{}' has a non-finite desired velocity", p.id)));
            }
            match &p.measure {
                Measure::Discrete(d) => {
                    for (i, c) in d.centers().iter().enumerate() {
                        if !grid.is_inside(*c) {
                            return Err(SimError::InvalidState(format!(
                                "particle {i} of '{}' at ({}, {}) is not strictly inside the domain",
                                p.id, c.x, c.y
                            )));
                        }
                    }
                }
                Measure::Density(f) => {
                    if f.grid() != &grid {
                        return Err(SimError::InvalidState(format!("density of '{}' lives on a different grid", p.id)));
                    }
                }
            }
        }
        let state = SimState { step: 0, dt, grid, populations, interactions };
        state.check_merge_guard()?;
        Ok(state)
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    /// `n * dt`, computed from the step index so it never drifts.
    pub fn time(&self) -> T {
        T::from_u64(self.step).expect("step fits") * self.dt
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn populations(&self) -> &[Population<T>] {
        &self.populations
    }

    pub fn interactions(&self) -> &InteractionMatrix<T> {
        &self.interactions
    }

    pub fn population_index(&self, id: &str) -> Option<usize> {
        self.populations.iter().position(|p| p.id == id)
    }

    /// Same state with a different time step; used for refinement studies.
    pub fn with_dt(mut self, dt: T) -> Result<Self, SimError> {
        if !(dt.is_finite() && dt > T::zero()) {
            return Err(SimError::InvalidState(format!("time step must be positive, got {dt}")));
        }
        self.dt = dt;
        Ok(self)
    }

    pub(crate) fn commit(&mut self, populations: Vec<Population<T>>) {
        debug_assert_eq!(populations.len(), self.populations.len());
        self.populations = populations;
        self.step += 1;
    }

    /// Smallest distance between any two particle centers over all
    /// discrete populations; `+inf` with fewer than two particles.
    pub fn min_pairwise_distance(&self) -> T {
        self.closest_pair().map_or(T::infinity(), |(d, _, _)| d)
    }

    fn closest_pair(&self) -> Option<(T, String, String)> {
        let pts: Vec<(Vec2<T>, usize, usize)> = self
            .populations
            .iter()
            .enumerate()
            .filter_map(|(pi, p)| p.as_discrete().map(|d| (pi, d)))
            .flat_map(|(pi, d)| d.centers().iter().enumerate().map(move |(i, c)| (*c, pi, i)))
            .collect();
        let mut best: Option<(T, usize, usize)> = None;
        for a in 0..pts.len() {
            for b in a + 1..pts.len() {
                let d = (pts[a].0 - pts[b].0).norm();
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, a, b));
                }
            }
        }
        best.map(|(d, a, b)| {
            let name = |i: usize| format!("{}[{}]", self.populations[pts[i].1].id, pts[i].2);
            (d, name(a), name(b))
        })
    }

    pub(crate) fn check_merge_guard(&self) -> Result<(), SimError> {
        let guard = T::lit(MERGE_GUARD);
        match self.closest_pair() {
            Some((d, a, b)) if !(d > guard) => Err(SimError::MergeGuard {
                step: self.step,
                a,
                b,
                distance: d.to_f64().unwrap_or(f64::NAN),
                guard: MERGE_GUARD,
            }),
            _ => Ok(()),
        }
    }
}

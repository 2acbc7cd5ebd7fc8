//! Read-only analyses of simulation states: the entropy functional and its
//! monotonicity audit, closed-form predictions for the reference
//! experiments, shape metrics of density fields and a Monte-Carlo overlap
//! estimator used as an independent check of the remap.

use rand::Rng;

use crate::error::SimError;
use crate::grid::{CellIndex, Grid, Rect};
use crate::kernels::InteractionKernel;
use crate::population::{DensityField, InteractionMatrix, Measure, SimState};
use crate::scalar::Real;
use crate::transport::{step, StepOptions};
use crate::vec2::Vec2;
use crate::velocity::vertex_eps;

/// Sub-cells per axis used to average the potential over a cell around its
/// own midpoint, where the midpoint rule would hit the singularity at 0.
const SELF_CELL_SUBDIV: usize = 8;

/// Potentials and confinement coefficients for the entropy functional.
///
/// Only exists for isotropic perception (`sigma = 1` everywhere) and a
/// symmetric kernel table, the setting in which the velocity is the gradient
/// of the functional.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyConfig<T> {
    /// `V_alpha(x) = a_alpha . x` with `a_alpha` the desired velocity.
    confinement: Vec<Vec2<T>>,
    kernels: InteractionMatrix<T>,
}

impl<T: Real> EntropyConfig<T> {
    pub fn from_state(state: &SimState<T>) -> Result<Self, SimError> {
        for p in state.populations() {
            if !p.anisotropy.is_isotropic() {
                return Err(SimError::EntropyGate(format!(
                    "population '{}' has sigma = {} (isotropic perception required)",
                    p.id,
                    p.anisotropy.sigma()
                )));
            }
        }
        let im = state.interactions();
        let n = im.len();
        for a in 0..n {
            for b in a + 1..n {
                if im.get(a, b) != im.get(b, a) {
                    let ids = state.populations();
                    return Err(SimError::EntropyGate(format!(
                        "interaction '{}' <- '{}' differs from '{}' <- '{}' (symmetric kernels required)",
                        ids[a].id, ids[b].id, ids[b].id, ids[a].id
                    )));
                }
            }
        }
        Ok(EntropyConfig {
            confinement: state.populations().iter().map(|p| p.desired_velocity).collect(),
            kernels: im.clone(),
        })
    }
}

/// Mean of `W(|y - m|)` over a cell centred at `m`.
fn self_cell_potential<T: Real>(k: &InteractionKernel<T>, grid: &Grid<T>) -> T {
    let n = SELF_CELL_SUBDIV;
    let fn_ = T::from_usize_lossy(n);
    let mut sum = T::zero();
    for b in 0..n {
        for a in 0..n {
            let ox = ((T::from_usize_lossy(a) + T::half()) / fn_ - T::half()) * grid.hx();
            let oy = ((T::from_usize_lossy(b) + T::half()) / fn_ - T::half()) * grid.hy();
            sum = sum + potential_at(k, Vec2::new(ox, oy).norm());
        }
    }
    sum / T::from_usize_lossy(n * n)
}

#[inline]
fn potential_at<T: Real>(k: &InteractionKernel<T>, s: T) -> T {
    if s >= k.support() {
        T::zero()
    } else {
        k.potential(s)
    }
}

/// `W` between midpoints, tabulated by cell offset; the zero offset holds the
/// self-cell average.
struct PotentialStencil<T> {
    taps: Vec<(isize, isize, T)>,
}

impl<T: Real> PotentialStencil<T> {
    fn new(grid: &Grid<T>, k: &InteractionKernel<T>) -> Self {
        let r = k.support();
        let rx = (r / grid.hx()).ceil().to_isize().unwrap_or(0);
        let ry = (r / grid.hy()).ceil().to_isize().unwrap_or(0);
        let mut taps = Vec::new();
        for dk in -ry..=ry {
            for dj in -rx..=rx {
                let w = if dj == 0 && dk == 0 {
                    self_cell_potential(k, grid)
                } else {
                    let d = Vec2::new(T::from_isize(dj).unwrap() * grid.hx(), T::from_isize(dk).unwrap() * grid.hy());
                    potential_at(k, d.norm())
                };
                if w != T::zero() {
                    taps.push((dj, dk, w));
                }
            }
        }
        PotentialStencil { taps }
    }

    /// `sum_c rho_a[c] sum_c' rho_b[c'] W(c' - c)`, without area factors.
    fn pair_sum(&self, a: &DensityField<T>, b: &DensityField<T>) -> T {
        let grid = a.grid();
        let (nx, ny) = (grid.nx() as isize, grid.ny() as isize);
        let mut total = T::zero();
        for (i, &ra) in a.values().iter().enumerate() {
            if ra == T::zero() {
                continue;
            }
            let c = grid.unflat(i);
            let mut s = T::zero();
            for &(dj, dk, w) in &self.taps {
                let (j, k) = (c.j as isize + dj, c.k as isize + dk);
                if j < 0 || k < 0 || j >= nx || k >= ny {
                    continue;
                }
                s = s + b.get(CellIndex::new(j as usize, k as usize)) * w;
            }
            total = total + ra * s;
        }
        total
    }
}

/// `(W * mu_beta)(x)` for a point `x`, skipping a source particle located
/// exactly at `x`.
fn convolve_at<T: Real>(k: &InteractionKernel<T>, src: &Measure<T>, x: Vec2<T>, self_w: T, eps: T) -> T {
    match src {
        Measure::Discrete(d) => {
            let mut s = T::zero();
            for &y in d.centers() {
                if y == x {
                    continue;
                }
                let dist = (y - x).norm();
                s = s + if dist < eps { self_w } else { potential_at(k, dist) };
            }
            s * d.weight()
        }
        Measure::Density(f) => {
            let grid = f.grid();
            let r = k.support();
            let Some((xs, ys)) = grid.cell_range(&Rect::new(x.x - r, x.y - r, x.x + r, x.y + r)) else {
                return T::zero();
            };
            let mut s = T::zero();
            for kk in ys {
                for j in xs.clone() {
                    let idx = CellIndex::new(j, kk);
                    let rho = f.get(idx);
                    if rho == T::zero() {
                        continue;
                    }
                    let dist = (grid.midpoint(idx) - x).norm();
                    s = s + rho * if dist < eps { self_w } else { potential_at(k, dist) };
                }
            }
            s * grid.cell_area()
        }
    }
}

/// `S = sum_alpha int (V_alpha + 1/2 sum_beta W_alpha_beta * mu_beta) d mu_alpha`,
/// with the cell-midpoint rule for densities.
pub fn entropy<T: Real>(state: &SimState<T>, cfg: &EntropyConfig<T>) -> T {
    let pops = state.populations();
    assert_eq!(pops.len(), cfg.confinement.len(), "entropy config built for a different state");
    let grid = state.grid();
    let eps = vertex_eps(grid);
    let area = grid.cell_area();
    let half = T::half();
    let mut total = T::zero();
    for (alpha, p) in pops.iter().enumerate() {
        let a = cfg.confinement[alpha];
        let mut s_alpha = T::zero();
        match &p.measure {
            Measure::Discrete(d) => {
                for &x in d.centers() {
                    let mut inner = a.dot(x);
                    for (beta, src) in pops.iter().enumerate() {
                        if let Some(k) = cfg.kernels.get(alpha, beta) {
                            let w0 = self_cell_potential(k, grid);
                            inner = inner + half * convolve_at(k, &src.measure, x, w0, eps);
                        }
                    }
                    s_alpha = s_alpha + inner;
                }
                s_alpha = s_alpha * d.weight();
            }
            Measure::Density(f) => {
                let mut linear = T::zero();
                for (i, &rho) in f.values().iter().enumerate() {
                    if rho != T::zero() {
                        linear = linear + rho * a.dot(grid.midpoint(grid.unflat(i)));
                    }
                }
                let mut pair = T::zero();
                for (beta, src) in pops.iter().enumerate() {
                    let Some(k) = cfg.kernels.get(alpha, beta) else {
                        continue;
                    };
                    pair = pair
                        + match &src.measure {
                            Measure::Density(g) => PotentialStencil::new(grid, k).pair_sum(f, g) * area,
                            Measure::Discrete(_) => {
                                let w0 = self_cell_potential(k, grid);
                                let mut s = T::zero();
                                for (i, &rho) in f.values().iter().enumerate() {
                                    if rho != T::zero() {
                                        let m = grid.midpoint(grid.unflat(i));
                                        s = s + rho * convolve_at(k, &src.measure, m, w0, eps);
                                    }
                                }
                                s
                            }
                        };
                }
                s_alpha = (linear + half * pair) * area;
            }
        }
        total = total + s_alpha;
    }
    total
}

/// `min_n (S_{n+1} - S_n)` over a trace; `+inf` for fewer than two states.
pub fn worst_increment<T: Real>(trace: &[SimState<T>], cfg: &EntropyConfig<T>) -> T {
    let s: Vec<T> = trace.iter().map(|st| entropy(st, cfg)).collect();
    s.windows(2).map(|w| w[1] - w[0]).fold(T::infinity(), |m, d| m.min(d))
}

/// Outcome of an entropy monotonicity audit at `dt` and `dt / 2` over the
/// same physical time.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyAudit<T> {
    pub dt: T,
    pub steps: usize,
    pub initial_entropy: T,
    pub final_entropy: T,
    /// `min_n (S_{n+1} - S_n)` at `dt`.
    pub worst_increment: T,
    /// Same quantity for the rerun at `dt / 2`.
    pub worst_increment_half: T,
}

impl<T: Real> EntropyAudit<T> {
    fn deficit(x: T) -> T {
        (-x).max(T::zero())
    }

    /// Empirical constant `K` with `S_{n+1} - S_n >= -K dt^2`.
    pub fn k_empirical(&self) -> T {
        Self::deficit(self.worst_increment) / (self.dt * self.dt)
    }

    /// Worst deficit at `dt` divided by the worst deficit at `dt / 2`
    /// (`inf` when the halved run has no deficit).
    pub fn shrink_ratio(&self) -> T {
        let d = Self::deficit(self.worst_increment);
        let h = Self::deficit(self.worst_increment_half);
        if h == T::zero() {
            T::infinity()
        } else {
            d / h
        }
    }

    /// Deficits (if any) shrink at least by half when `dt` is halved.
    pub fn consistent(&self) -> bool {
        let d = Self::deficit(self.worst_increment);
        let h = Self::deficit(self.worst_increment_half);
        h == T::zero() || h * T::two() <= d
    }
}

fn run_increments<T: Real>(mut state: SimState<T>, steps: usize, cfg: &EntropyConfig<T>) -> Result<(T, T, T), SimError> {
    let first = entropy(&state, cfg);
    let mut prev = first;
    let mut worst = T::infinity();
    for _ in 0..steps {
        state = step(&state, StepOptions::default())?.0;
        let s = entropy(&state, cfg);
        worst = worst.min(s - prev);
        prev = s;
    }
    Ok((first, prev, worst))
}

/// Runs `steps` steps from `initial` and `2 * steps` steps at half the time
/// step, recording the worst per-step entropy change of each run.
pub fn entropy_monotonicity_audit<T: Real>(initial: &SimState<T>, steps: usize) -> Result<EntropyAudit<T>, SimError> {
    let cfg = EntropyConfig::from_state(initial)?;
    let dt = initial.dt();
    let (s0, s1, worst) = run_increments(initial.clone(), steps, &cfg)?;
    let half = initial.clone().with_dt(dt * T::half())?;
    let (_, _, worst_half) = run_increments(half, 2 * steps, &cfg)?;
    Ok(EntropyAudit {
        dt,
        steps,
        initial_entropy: s0,
        final_entropy: s1,
        worst_increment: worst,
        worst_increment_half: worst_half,
    })
}

/// Separation at which two opposing individuals with repulsive interaction
/// come to rest: `F R_r / (speed + F)`.
pub fn predicted_equilibrium_distance<T: Real>(strength: T, r_rep: T, speed: T) -> T {
    strength * r_rep / (speed + strength)
}

/// Radius of the empty zone in front of an individual of weight `M` moving
/// head-on through a crowd: `M F R_r / (2 speed + M F)`.
pub fn predicted_empty_zone_radius<T: Real>(weight: T, strength: T, r_rep: T, speed: T) -> T {
    let mf = weight * strength;
    mf * r_rep / (T::two() * speed + mf)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeMetrics<T> {
    pub centroid: Vec2<T>,
    pub lambda_max: T,
    pub lambda_min: T,
    /// `lambda_min / lambda_max`, in `[0, 1]`.
    pub isotropy: T,
}

/// Mass-weighted centroid and principal second moments over the cells with
/// density at least `threshold`.
pub fn shape_metrics<T: Real>(field: &DensityField<T>, threshold: T) -> Result<ShapeMetrics<T>, SimError> {
    let grid = field.grid();
    let cells: Vec<(Vec2<T>, T)> = grid
        .cells()
        .filter_map(|c| {
            let rho = field.get(c);
            (rho >= threshold && rho > T::zero()).then(|| (grid.midpoint(c), rho))
        })
        .collect();
    let mass = cells.iter().fold(T::zero(), |m, &(_, r)| m + r);
    if mass == T::zero() {
        return Err(SimError::Diagnostics("shape metrics of a field without mass above threshold".into()));
    }
    let centroid = cells.iter().fold(Vec2::zero(), |c, &(p, r)| c + p * r) / mass;
    let (mut sxx, mut syy, mut sxy) = (T::zero(), T::zero(), T::zero());
    for &(p, r) in &cells {
        let d = p - centroid;
        sxx = sxx + r * d.x * d.x;
        syy = syy + r * d.y * d.y;
        sxy = sxy + r * d.x * d.y;
    }
    sxx = sxx / mass;
    syy = syy / mass;
    sxy = sxy / mass;
    let mean = (sxx + syy) * T::half();
    let rad = (((sxx - syy) * T::half()).powi(2) + sxy * sxy).sqrt();
    let lambda_max = mean + rad;
    let lambda_min = (mean - rad).max(T::zero());
    let isotropy = if lambda_max > T::zero() { lambda_min / lambda_max } else { T::one() };
    Ok(ShapeMetrics { centroid, lambda_max, lambda_min, isotropy })
}

/// Distance from `origin` along `direction` to the nearest midpoint (in
/// projection) of a cell with density at least `threshold` that the forward
/// ray passes through. `None` if no such cell.
pub fn front_gap<T: Real>(field: &DensityField<T>, threshold: T, origin: Vec2<T>, direction: Vec2<T>) -> Option<T> {
    let n = direction.norm();
    assert!(n > T::zero(), "front gap needs a direction");
    let d = direction / n;
    let grid = field.grid();
    grid.cells()
        .filter(|&c| {
            let rho = field.get(c);
            rho >= threshold && rho > T::zero()
        })
        .filter(|&c| ray_hits(&grid.cell_rect(c), origin, d))
        .map(|c| (grid.midpoint(c) - origin).dot(d))
        .filter(|&along| along > T::zero())
        .fold(None, |best: Option<T>, a| Some(best.map_or(a, |b| b.min(a))))
}

/// Slab test for the ray `origin + t d`, `t >= 0`, against a closed rect.
fn ray_hits<T: Real>(r: &Rect<T>, origin: Vec2<T>, d: Vec2<T>) -> bool {
    let mut t0 = T::zero();
    let mut t1 = T::infinity();
    for (o, v, lo, hi) in [(origin.x, d.x, r.x0, r.x1), (origin.y, d.y, r.y0, r.y1)] {
        if v == T::zero() {
            if o < lo || o > hi {
                return false;
            }
        } else {
            let (a, b) = ((lo - o) / v, (hi - o) / v);
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
    }
    t0 <= t1
}

/// Mean `|rho(j+1,k) - rho(j,k)|` over cells `(j,k)` with density at least
/// `threshold`; measures column-to-column oscillation.
pub fn horizontal_oscillation<T: Real>(field: &DensityField<T>, threshold: T) -> T {
    let grid = field.grid();
    let mut sum = T::zero();
    let mut count = 0usize;
    for c in grid.cells().filter(|c| c.j + 1 < grid.nx()) {
        let rho = field.get(c);
        if rho >= threshold && rho > T::zero() {
            sum = sum + (field.get(CellIndex::new(c.j + 1, c.k)) - rho).abs();
            count += 1;
        }
    }
    if count == 0 {
        T::zero()
    } else {
        sum / T::from_usize_lossy(count)
    }
}

/// Monte-Carlo estimate of `area(a ∩ b)`: uniform samples in `a`, hit
/// fraction times `area(a)`. Returns `(estimate, standard error)`.
pub fn mc_overlap_oracle<T: Real, R: Rng + ?Sized>(a: &Rect<T>, b: &Rect<T>, samples: usize, rng: &mut R) -> (T, T) {
    assert!(samples >= 1, "at least one sample");
    let area = a.area();
    if area == T::zero() {
        return (T::zero(), T::zero());
    }
    let mut hits = 0usize;
    for _ in 0..samples {
        let x = a.x0 + (a.x1 - a.x0) * T::lit(rng.gen::<f64>());
        let y = a.y0 + (a.y1 - a.y0) * T::lit(rng.gen::<f64>());
        if x >= b.x0 && x <= b.x1 && y >= b.y0 && y <= b.y1 {
            hits += 1;
        }
    }
    let n = T::from_usize_lossy(samples);
    let p = T::from_usize_lossy(hits) / n;
    (p * area, area * (p * (T::one() - p) / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Anisotropy;
    use crate::population::{DiscreteMeasure, Population};
    use rand::SeedableRng;

    fn grid() -> Grid<f64> {
        Grid::new(50.0, 50.0, 50, 50).unwrap()
    }

    fn particles(pts: &[(f64, f64)], v: (f64, f64)) -> Population<f64> {
        let m = DiscreteMeasure::new(1.0, pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect()).unwrap();
        Population::discrete("p", m, Vec2::new(v.0, v.1), Anisotropy::isotropic())
    }

    fn single(pop: Population<f64>, k: Option<InteractionKernel<f64>>) -> SimState<f64> {
        let mut im = InteractionMatrix::empty(1);
        im.set(0, 0, k);
        SimState::new(grid(), 0.01, vec![pop], im).unwrap()
    }

    #[test]
    fn entropy_simple_cases() {
        let s = SimState::new(grid(), 0.01, vec![], InteractionMatrix::empty(0)).unwrap();
        assert_eq!(entropy(&s, &EntropyConfig::from_state(&s).unwrap()), 0.0);

        let k = InteractionKernel::attract_repel(0.03, 1.5, 3.0).unwrap();
        let s = single(particles(&[(20.0, 20.0), (22.0, 20.0)], (0.0, 0.0)), Some(k));
        let e = entropy(&s, &EntropyConfig::from_state(&s).unwrap());
        assert!((e - k.potential(2.0)).abs() < 1e-15);

        let s = single(particles(&[(20.0, 30.0)], (0.5, -1.0)), None);
        let e = entropy(&s, &EntropyConfig::from_state(&s).unwrap());
        assert!((e - (0.5 * 20.0 - 30.0)).abs() < 1e-12);

        // separated beyond the support: exactly zero
        let s = single(particles(&[(10.0, 10.0), (20.0, 10.0)], (0.0, 0.0)), Some(k));
        assert_eq!(entropy(&s, &EntropyConfig::from_state(&s).unwrap()), 0.0);
    }

    #[test]
    fn entropy_gate() {
        let k = InteractionKernel::repel_only(0.03, 4.0).unwrap();
        let m = DiscreteMeasure::new(1.0, vec![Vec2::new(5.0, 5.0)]).unwrap();
        let p = Population::discrete("p", m, Vec2::zero(), Anisotropy::new(0.5).unwrap());
        assert!(matches!(EntropyConfig::from_state(&single(p, Some(k))), Err(SimError::EntropyGate(_))));

        let mut im = InteractionMatrix::empty(2);
        im.set(0, 1, Some(k));
        let s = SimState::new(
            grid(),
            0.01,
            vec![particles(&[(5.0, 5.0)], (0.0, 0.0)), {
                let mut q = particles(&[(9.0, 5.0)], (0.0, 0.0));
                q.id = "q".into();
                q
            }],
            im,
        )
        .unwrap();
        assert!(matches!(EntropyConfig::from_state(&s), Err(SimError::EntropyGate(_))));
        assert!(matches!(entropy_monotonicity_audit(&s, 3), Err(SimError::EntropyGate(_))));
    }

    #[test]
    fn static_trace_has_zero_increment() {
        let s = single(particles(&[(10.0, 10.0), (30.0, 10.0)], (0.0, 0.0)), None);
        let a = entropy_monotonicity_audit(&s, 5).unwrap();
        assert_eq!(a.worst_increment, 0.0);
        assert_eq!(a.worst_increment_half, 0.0);
        assert!(a.consistent());
        assert_eq!(a.k_empirical(), 0.0);
    }

    #[test]
    fn predictions() {
        assert!((predicted_equilibrium_distance(1.0f64, 4.0, 1.34) - 1.709402).abs() < 1e-6);
        assert_eq!(predicted_equilibrium_distance(1.0, 4.0, 0.0), 4.0);
        assert_eq!(predicted_equilibrium_distance(1.34, 4.0, 1.34), 2.0);
        assert!((predicted_empty_zone_radius(60.0f64, 0.03, 4.0, 1.34) - 1.607143).abs() < 1e-6);
        assert!((predicted_empty_zone_radius(60.0f64, 0.03, 2.0, 1.34) - 0.803571).abs() < 1e-6);
        assert_eq!(predicted_empty_zone_radius(60.0, 0.03, 4.0, 0.0), 4.0);
    }

    #[test]
    fn shapes() {
        let g = grid();
        let sq = DensityField::from_block(&g, Rect::new(20.0, 20.0, 30.0, 30.0), 2.0).unwrap();
        let m = shape_metrics(&sq, 0.5).unwrap();
        assert!((m.isotropy - 1.0).abs() < 1e-12);
        assert!((m.centroid - Vec2::new(25.0, 25.0)).norm() < 1e-12);

        let bar = DensityField::from_block(&g, Rect::new(10.0, 20.0, 40.0, 25.0), 1.0).unwrap();
        assert!(shape_metrics(&bar, 0.5).unwrap().isotropy < 0.1);

        assert!(shape_metrics(&DensityField::zeros(&g), 0.0).is_err());
    }

    #[test]
    fn gap_to_single_cell() {
        let g = grid();
        let mut vals = vec![0.0; g.num_cells()];
        vals[g.flat(CellIndex::new(10, 10))] = 1.0;
        let f = DensityField::from_values(&g, vals).unwrap();
        let probe = g.midpoint(CellIndex::new(11, 10));
        assert_eq!(front_gap(&f, 0.5, probe, Vec2::new(-1.0, 0.0)), Some(1.0));
        assert_eq!(front_gap(&f, 0.5, probe, Vec2::new(1.0, 0.0)), None);
        assert_eq!(front_gap(&f, 0.5, probe + Vec2::new(0.0, 3.0), Vec2::new(-1.0, 0.0)), None);
    }

    #[test]
    fn mc_oracle_cases() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let unit = Rect::new(0.0f64, 0.0, 1.0, 1.0);
        assert_eq!(mc_overlap_oracle(&unit, &unit.translate(Vec2::new(3.0, 0.0)), 1000, &mut rng), (0.0, 0.0));
        assert_eq!(mc_overlap_oracle(&unit, &unit, 1000, &mut rng), (1.0, 0.0));
        let (est, se) = mc_overlap_oracle(&unit, &unit.translate(Vec2::new(0.3, 0.4)), 1_000_000, &mut rng);
        assert!((est - 0.42).abs() <= 3.0 * se, "{est} ± {se}");
    }

    #[test]
    fn oscillation_metric() {
        let g = Grid::<f64>::new(4.0, 1.0, 4, 1).unwrap();
        let f = DensityField::from_values(&g, vec![1.0, 3.0, 1.0, 0.0]).unwrap();
        // pairs (0,1),(1,2),(2,3) from occupied cells 0,1,2
        assert!((horizontal_oscillation(&f, 0.5) - (2.0 + 2.0 + 1.0) / 3.0).abs() < 1e-15);
    }
}

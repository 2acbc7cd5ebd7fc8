//! Rectangular domain `[0, L] x [0, W]` split into `nx * ny` equal cells.
//!
//! Cells are indexed from zero: cell `(j, k)` covers
//! `[j*hx, (j+1)*hx] x [k*hy, (k+1)*hy]`. Storage of per-cell data is
//! row-major with `k` (the second axis) as the row, so flat index is
//! `k * nx + j`.

use crate::scalar::Real;
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub j: usize,
    pub k: usize,
}

impl CellIndex {
    pub const fn new(j: usize, k: usize) -> Self {
        CellIndex { j, k }
    }
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect<T> {
    pub x0: T,
    pub y0: T,
    pub x1: T,
    pub y1: T,
}

impl<T: Real> Rect<T> {
    /// Panics if a max corner lies below its min corner.
    pub fn new(x0: T, y0: T, x1: T, y1: T) -> Self {
        assert!(x0 <= x1 && y0 <= y1, "rect corners out of order");
        Rect { x0, y0, x1, y1 }
    }

    pub fn area(&self) -> T {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn translate(&self, d: Vec2<T>) -> Self {
        Rect {
            x0: self.x0 + d.x,
            y0: self.y0 + d.y,
            x1: self.x1 + d.x,
            y1: self.y1 + d.y,
        }
    }

    pub fn contains_rect(&self, other: &Rect<T>) -> bool {
        other.x0 >= self.x0 && other.x1 <= self.x1 && other.y0 >= self.y0 && other.y1 <= self.y1
    }
}

/// Exact area of the intersection of two rectangles; zero when disjoint.
#[inline]
pub fn overlap_area<T: Real>(a: &Rect<T>, b: &Rect<T>) -> T {
    let w = a.x1.min(b.x1) - a.x0.max(b.x0);
    let h = a.y1.min(b.y1) - a.y0.max(b.y0);
    w.max(T::zero()) * h.max(T::zero())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    length: T,
    width: T,
    nx: usize,
    ny: usize,
    hx: T,
    hy: T,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("domain extents must be positive and finite (got L={length}, W={width})")]
    BadExtent { length: f64, width: f64 },
    #[error("cell counts must be at least 1 (got nx={nx}, ny={ny})")]
    BadCount { nx: usize, ny: usize },
}

impl<T: Real> Grid<T> {
    pub fn new(length: T, width: T, nx: usize, ny: usize) -> Result<Self, GridError> {
        let finite_pos = |v: T| v.is_finite() && v > T::zero();
        if !finite_pos(length) || !finite_pos(width) {
            return Err(GridError::BadExtent {
                length: length.to_f64().unwrap_or(f64::NAN),
                width: width.to_f64().unwrap_or(f64::NAN),
            });
        }
        if nx == 0 || ny == 0 {
            return Err(GridError::BadCount { nx, ny });
        }
        Ok(Grid {
            length,
            width,
            nx,
            ny,
            hx: length / T::from_usize_lossy(nx),
            hy: width / T::from_usize_lossy(ny),
        })
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn width(&self) -> T {
        self.width
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> T {
        self.hx
    }

    pub fn hy(&self) -> T {
        self.hy
    }

    pub fn cell_area(&self) -> T {
        self.hx * self.hy
    }

    pub fn num_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn domain(&self) -> Rect<T> {
        Rect::new(T::zero(), T::zero(), self.length, self.width)
    }

    #[inline]
    pub fn flat(&self, idx: CellIndex) -> usize {
        debug_assert!(idx.j < self.nx && idx.k < self.ny, "cell index out of range");
        idx.k * self.nx + idx.j
    }

    #[inline]
    pub fn unflat(&self, i: usize) -> CellIndex {
        CellIndex::new(i % self.nx, i / self.nx)
    }

    /// Iterates all cells in row-major order (`k` outer, `j` inner).
    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        (0..self.ny).flat_map(move |k| (0..self.nx).map(move |j| CellIndex::new(j, k)))
    }

    /// Cell containing `p`, using half-open cells with the top and right
    /// domain edges closed. `None` outside the domain.
    pub fn cell_of(&self, p: Vec2<T>) -> Option<CellIndex> {
        if !(p.x >= T::zero() && p.x <= self.length && p.y >= T::zero() && p.y <= self.width) {
            return None;
        }
        let j = axis_index(p.x, self.hx, self.nx);
        let k = axis_index(p.y, self.hy, self.ny);
        Some(CellIndex::new(j, k))
    }

    pub fn is_inside(&self, p: Vec2<T>) -> bool {
        p.x > T::zero() && p.x < self.length && p.y > T::zero() && p.y < self.width
    }

    #[inline]
    pub fn midpoint(&self, idx: CellIndex) -> Vec2<T> {
        self.check(idx);
        let h = T::half();
        Vec2::new(
            (T::from_usize_lossy(idx.j) + h) * self.hx,
            (T::from_usize_lossy(idx.k) + h) * self.hy,
        )
    }

    /// Corners in the order min-min, max-min, min-max, max-max.
    #[inline]
    pub fn vertices(&self, idx: CellIndex) -> [Vec2<T>; 4] {
        self.check(idx);
        let x0 = T::from_usize_lossy(idx.j) * self.hx;
        let x1 = T::from_usize_lossy(idx.j + 1) * self.hx;
        let y0 = T::from_usize_lossy(idx.k) * self.hy;
        let y1 = T::from_usize_lossy(idx.k + 1) * self.hy;
        [
            Vec2::new(x0, y0),
            Vec2::new(x1, y0),
            Vec2::new(x0, y1),
            Vec2::new(x1, y1),
        ]
    }

    pub fn cell_rect(&self, idx: CellIndex) -> Rect<T> {
        let [lo, _, _, hi] = self.vertices(idx);
        Rect::new(lo.x, lo.y, hi.x, hi.y)
    }

    /// Inclusive cell index range along both axes touched by `r`,
    /// clipped to the grid. `None` if `r` misses the domain entirely.
    pub fn cell_range(&self, r: &Rect<T>) -> Option<(std::ops::RangeInclusive<usize>, std::ops::RangeInclusive<usize>)> {
        let xs = axis_range(r.x0, r.x1, self.hx, self.nx)?;
        let ys = axis_range(r.y0, r.y1, self.hy, self.ny)?;
        Some((xs, ys))
    }

    fn check(&self, idx: CellIndex) {
        assert!(
            idx.j < self.nx && idx.k < self.ny,
            "cell index ({}, {}) outside {}x{} grid",
            idx.j,
            idx.k,
            self.nx,
            self.ny
        );
    }
}

fn axis_index<T: Real>(x: T, h: T, n: usize) -> usize {
    let i = (x / h).floor().to_usize().unwrap_or(0);
    i.min(n - 1)
}

fn axis_range<T: Real>(lo: T, hi: T, h: T, n: usize) -> Option<std::ops::RangeInclusive<usize>> {
    let a = (lo / h).floor();
    let b = (hi / h).ceil() - T::one();
    let max = T::from_usize_lossy(n - 1);
    if b < T::zero() || a > max {
        return None;
    }
    let a = a.max(T::zero()).to_usize()?;
    let b = b.min(max).to_usize()?;
    (a <= b).then_some(a..=b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g50() -> Grid<f64> {
        Grid::new(50.0, 50.0, 50, 50).unwrap()
    }

    #[test]
    fn cell_lookup_conventions() {
        let g = g50();
        assert_eq!(g.cell_of(Vec2::new(0.0, 0.0)), Some(CellIndex::new(0, 0)));
        assert_eq!(g.cell_of(Vec2::new(50.0, 50.0)), Some(CellIndex::new(49, 49)));
        assert_eq!(g.cell_of(Vec2::new(-0.1, 25.0)), None);
        assert_eq!(g.cell_of(Vec2::new(25.0, 50.1)), None);
        // half-open: a shared edge belongs to the upper cell
        assert_eq!(g.cell_of(Vec2::new(1.0, 0.5)), Some(CellIndex::new(1, 0)));
    }

    #[test]
    fn midpoints_and_vertices() {
        let g = g50();
        assert_eq!(g.midpoint(CellIndex::new(0, 0)), Vec2::new(0.5, 0.5));
        assert_eq!(g.midpoint(CellIndex::new(49, 49)), Vec2::new(49.5, 49.5));
        let v = g.vertices(CellIndex::new(0, 0));
        assert_eq!(v, [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(1.0, 1.0)]);

        // h_L = 2, h_W = 0.5; 1-based (3,2) is 0-based (2,1)
        let g = Grid::new(10.0, 5.0, 5, 10).unwrap();
        assert_eq!(g.midpoint(CellIndex::new(2, 1)), Vec2::new(5.0, 0.75));

        // h_L = 1, h_W = 2; 1-based (2,3) is 0-based (1,2)
        let g = Grid::new(4.0, 8.0, 4, 4).unwrap();
        let v = g.vertices(CellIndex::new(1, 2));
        assert_eq!(v, [Vec2::new(1.0, 4.0), Vec2::new(2.0, 4.0), Vec2::new(1.0, 6.0), Vec2::new(2.0, 6.0)]);
        // top-right vertex is ((j+1) h_L, (k+1) h_W) in 0-based terms
        assert_eq!(v[3], Vec2::new(2.0 * 1.0, 3.0 * 2.0));
    }

    #[test]
    #[should_panic]
    fn midpoint_rejects_bad_index() {
        g50().midpoint(CellIndex::new(50, 0));
    }

    #[test]
    fn overlap_examples() {
        let unit = Rect::new(0.0f64, 0.0, 1.0, 1.0);
        assert_eq!(overlap_area(&unit, &unit), 1.0);
        let shifted = unit.translate(Vec2::new(0.3, 0.4));
        assert!((overlap_area(&unit, &shifted) - 0.42).abs() < 1e-15);
        let far = unit.translate(Vec2::new(2.0, 0.0));
        assert_eq!(overlap_area(&unit, &far), 0.0);
        // touching edges have zero area
        assert_eq!(overlap_area(&unit, &unit.translate(Vec2::new(1.0, 0.0))), 0.0);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid::<f64>::new(0.0, 1.0, 1, 1).is_err());
        assert!(Grid::<f64>::new(1.0, 1.0, 0, 1).is_err());
        assert!(Grid::<f64>::new(f64::NAN, 1.0, 1, 1).is_err());
    }

    #[test]
    fn cell_range_clips() {
        let g = g50();
        let (xs, ys) = g.cell_range(&Rect::new(-3.0, 2.5, 1.5, 3.0)).unwrap();
        assert_eq!((xs, ys), (0..=1, 2..=2));
        assert!(g.cell_range(&Rect::new(51.0, 0.0, 52.0, 1.0)).is_none());
        // exact edge alignment does not spill into the next cell
        let (xs, _) = g.cell_range(&Rect::new(3.0, 0.0, 4.0, 1.0)).unwrap();
        assert_eq!(xs, 3..=3);
    }

    #[test]
    fn generic_over_f32() {
        let g = Grid::<f32>::new(50.0, 50.0, 50, 50).unwrap();
        assert_eq!(g.midpoint(CellIndex::new(0, 0)), Vec2::new(0.5f32, 0.5));
    }
}

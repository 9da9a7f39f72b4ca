//! Object grids, shifts, blocks and pixel sets.
//!
//! Points are integer pairs `[k1, k2]`; `k1` indexes rows and `k2` columns of
//! every field stored in this crate. Under the torus boundary all points are
//! kept canonical, i.e. reduced into `[0, n)` componentwise.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{PtychoError, Result};

/// An integer pixel coordinate.
pub type Point = [i64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Periodic object domain; blocks wrap around.
    Torus,
    /// Blocks must stay inside the object domain; the object is zero outside.
    DirichletZero,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::Torus => f.write_str("torus"),
            Boundary::DirichletZero => f.write_str("dirichlet-zero"),
        }
    }
}

/// Object side `n`, mask side `m` and the boundary rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub m: usize,
    pub boundary: Boundary,
}

impl GridSpec {
    pub fn new(n: usize, m: usize, boundary: Boundary) -> Result<Self> {
        if m == 0 || m > n {
            return Err(PtychoError::InvalidParameter(format!(
                "grid requires 1 <= m <= n, got m={m}, n={n}"
            )));
        }
        Ok(Self { n, m, boundary })
    }

    pub fn torus(n: usize, m: usize) -> Result<Self> {
        Self::new(n, m, Boundary::Torus)
    }

    pub fn dirichlet(n: usize, m: usize) -> Result<Self> {
        Self::new(n, m, Boundary::DirichletZero)
    }

    /// Reduce a point into the fundamental domain (torus) or return it
    /// unchanged (dirichlet).
    pub fn canonical(&self, p: Point) -> Point {
        match self.boundary {
            Boundary::Torus => {
                let n = self.n as i64;
                [p[0].rem_euclid(n), p[1].rem_euclid(n)]
            }
            Boundary::DirichletZero => p,
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        let n = self.n as i64;
        (0..n).contains(&p[0]) && (0..n).contains(&p[1])
    }

    /// Shortest representative of a displacement: componentwise in
    /// `(-n/2, n/2]` on the torus, unchanged otherwise.
    pub fn min_image(&self, d: Point) -> Point {
        match self.boundary {
            Boundary::Torus => {
                let n = self.n as i64;
                let r = |x: i64| {
                    let mut y = x.rem_euclid(n);
                    if 2 * y > n {
                        y -= n;
                    }
                    y
                };
                [r(d[0]), r(d[1])]
            }
            Boundary::DirichletZero => d,
        }
    }

    /// Row-major linear index of a point inside the domain.
    pub fn linear(&self, p: Point) -> usize {
        let q = self.canonical(p);
        q[0] as usize * self.n + q[1] as usize
    }
}

/// A scan position in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Shift(pub Point);

impl Shift {
    pub const ZERO: Shift = Shift([0, 0]);

    pub fn new(k1: i64, k2: i64) -> Self {
        Shift([k1, k2])
    }

    pub fn canonical(self, grid: &GridSpec) -> Shift {
        Shift(grid.canonical(self.0))
    }
}

impl From<Point> for Shift {
    fn from(p: Point) -> Self {
        Shift(p)
    }
}

/// Axis-aligned rectangle `[start, start + extent)` in lifted coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub start: Point,
    pub extent: [usize; 2],
}

impl Rect {
    pub fn end_inclusive(&self) -> Point {
        [
            self.start[0] + self.extent[0] as i64 - 1,
            self.start[1] + self.extent[1] as i64 - 1,
        ]
    }

    pub fn area(&self) -> usize {
        self.extent[0] * self.extent[1]
    }

    pub fn contains(&self, p: Point) -> bool {
        (0..2).all(|a| p[a] >= self.start[a] && p[a] < self.start[a] + self.extent[a] as i64)
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        let [s0, s1] = self.start;
        let [e0, e1] = self.extent;
        (0..e0 as i64).flat_map(move |i| (0..e1 as i64).map(move |j| [s0 + i, s1 + j]))
    }
}

/// A set of pixels of one grid. Members are canonical.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelSet {
    grid: GridSpec,
    members: BTreeSet<Point>,
}

impl PixelSet {
    pub fn empty(grid: GridSpec) -> Self {
        Self {
            grid,
            members: BTreeSet::new(),
        }
    }

    /// Build a set, canonicalizing members. Under dirichlet-zero, points
    /// outside the domain are rejected.
    pub fn from_points<I: IntoIterator<Item = Point>>(grid: GridSpec, points: I) -> Result<Self> {
        let mut members = BTreeSet::new();
        for p in points {
            let q = grid.canonical(p);
            if !grid.contains(q) {
                return Err(PtychoError::OutOfDomain {
                    shift: p,
                    n: grid.n,
                });
            }
            members.insert(q);
        }
        Ok(Self { grid, members })
    }

    /// The whole object domain.
    pub fn full(grid: GridSpec) -> Self {
        let n = grid.n as i64;
        let members = (0..n).flat_map(|i| (0..n).map(move |j| [i, j])).collect();
        Self { grid, members }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, p: Point) -> bool {
        self.members.contains(&self.grid.canonical(p))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Point> {
        self.members.iter()
    }

    pub fn insert(&mut self, p: Point) -> Result<()> {
        let q = self.grid.canonical(p);
        if !self.grid.contains(q) {
            return Err(PtychoError::OutOfDomain {
                shift: p,
                n: self.grid.n,
            });
        }
        self.members.insert(q);
        Ok(())
    }

    pub fn intersection(&self, other: &PixelSet) -> PixelSet {
        PixelSet {
            grid: self.grid,
            members: self.members.intersection(&other.members).copied().collect(),
        }
    }

    pub fn union(&self, other: &PixelSet) -> PixelSet {
        PixelSet {
            grid: self.grid,
            members: self.members.union(&other.members).copied().collect(),
        }
    }

    pub fn is_subset(&self, other: &PixelSet) -> bool {
        self.members.is_subset(&other.members)
    }

    /// `self + d`. Under dirichlet-zero, members leaving the domain are
    /// dropped.
    pub fn translate(&self, d: Point) -> PixelSet {
        let members = self
            .members
            .iter()
            .map(|p| self.grid.canonical([p[0] + d[0], p[1] + d[1]]))
            .filter(|q| self.grid.contains(*q))
            .collect();
        PixelSet {
            grid: self.grid,
            members,
        }
    }

    /// Whether the set is exactly the whole object domain.
    pub fn is_full(&self) -> bool {
        self.members.len() == self.grid.n * self.grid.n
    }
}

/// The block `M^t = Z_m^2 + t`.
pub fn block_of(grid: &GridSpec, t: Shift) -> Result<PixelSet> {
    let m = grid.m as i64;
    if grid.boundary == Boundary::DirichletZero {
        let n = grid.n as i64;
        if t.0[0] < 0 || t.0[1] < 0 || t.0[0] + m > n || t.0[1] + m > n {
            return Err(PtychoError::OutOfDomain { shift: t.0, n: grid.n });
        }
    }
    let rect = Rect {
        start: t.0,
        extent: [grid.m, grid.m],
    };
    PixelSet::from_points(*grid, rect.points())
}

/// Smallest covering interval of a set of residues on `Z_n`, as a lifted
/// `(start, extent)`. `None` when every residue is present.
fn covering_arc(values: &BTreeSet<i64>, n: i64) -> Option<(i64, usize)> {
    let v: Vec<i64> = values.iter().copied().collect();
    if v.len() as i64 == n {
        return None;
    }
    // The arc starts right after the largest empty gap.
    let mut best_gap = -1;
    let mut best_start = v[0];
    for i in 0..v.len() {
        let cur = v[i];
        let next = if i + 1 < v.len() { v[i + 1] } else { v[0] + n };
        let gap = next - cur - 1;
        if gap > best_gap {
            best_gap = gap;
            best_start = next.rem_euclid(n);
        }
    }
    Some((best_start, (n - best_gap) as usize))
}

/// Box hull as a rectangle. On the torus the rectangle is described in the
/// lift where it fits one fundamental domain; its `start` is canonical.
pub fn box_hull_rect(s: &PixelSet) -> Result<Rect> {
    if s.is_empty() {
        return Err(PtychoError::EmptySet);
    }
    match s.grid.boundary {
        Boundary::DirichletZero => {
            let lo0 = s.iter().map(|p| p[0]).min().unwrap();
            let hi0 = s.iter().map(|p| p[0]).max().unwrap();
            let lo1 = s.iter().map(|p| p[1]).min().unwrap();
            let hi1 = s.iter().map(|p| p[1]).max().unwrap();
            Ok(Rect {
                start: [lo0, lo1],
                extent: [(hi0 - lo0 + 1) as usize, (hi1 - lo1 + 1) as usize],
            })
        }
        Boundary::Torus => {
            let n = s.grid.n as i64;
            let mut start = [0i64; 2];
            let mut extent = [0usize; 2];
            for axis in 0..2 {
                let values: BTreeSet<i64> = s.iter().map(|p| p[axis]).collect();
                match covering_arc(&values, n) {
                    Some((st, ex)) => {
                        start[axis] = st;
                        extent[axis] = ex;
                    }
                    None => {
                        start[axis] = 0;
                        extent[axis] = s.grid.n;
                    }
                }
            }
            Ok(Rect { start, extent })
        }
    }
}

/// Smallest axis-aligned rectangle containing `s`.
pub fn box_hull(s: &PixelSet) -> Result<PixelSet> {
    let rect = box_hull_rect(s)?;
    PixelSet::from_points(s.grid, rect.points())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(grid: GridSpec, pts: &[Point]) -> PixelSet {
        PixelSet::from_points(grid, pts.iter().copied()).unwrap()
    }

    #[test]
    fn block_identity_shift() {
        let g = GridSpec::torus(4, 2).unwrap();
        let b = block_of(&g, Shift::ZERO).unwrap();
        assert_eq!(b, set(g, &[[0, 0], [0, 1], [1, 0], [1, 1]]));
    }

    #[test]
    fn block_wraps_on_torus() {
        let g = GridSpec::torus(4, 2).unwrap();
        let b = block_of(&g, Shift::new(3, 0)).unwrap();
        assert_eq!(b, set(g, &[[3, 0], [3, 1], [0, 0], [0, 1]]));
    }

    #[test]
    fn block_out_of_domain_dirichlet() {
        let g = GridSpec::dirichlet(4, 2).unwrap();
        assert!(matches!(
            block_of(&g, Shift::new(3, 0)),
            Err(PtychoError::OutOfDomain { .. })
        ));
    }

    #[test]
    fn block_has_m_squared_pixels_on_torus() {
        let g = GridSpec::torus(7, 5).unwrap();
        for i in -8..8 {
            for j in -8..8 {
                assert_eq!(block_of(&g, Shift::new(i, j)).unwrap().len(), 25);
            }
        }
    }

    #[test]
    fn hull_of_two_points() {
        let g = GridSpec::dirichlet(4, 2).unwrap();
        let s = set(g, &[[0, 0], [2, 1]]);
        let h = box_hull(&s).unwrap();
        // enumeration oracle: every point of [0,2]x[0,1]
        let mut expect = vec![];
        for i in 0..=2 {
            for j in 0..=1 {
                expect.push([i, j]);
            }
        }
        assert_eq!(h, set(g, &expect));
        assert_eq!(h.len(), 6);
    }

    #[test]
    fn hull_singleton_and_empty() {
        let g = GridSpec::torus(4, 2).unwrap();
        let s = set(g, &[[1, 1]]);
        assert_eq!(box_hull(&s).unwrap(), s);
        assert!(matches!(
            box_hull(&PixelSet::empty(g)),
            Err(PtychoError::EmptySet)
        ));
    }

    #[test]
    fn hull_on_torus_uses_wrapping_lift() {
        let g = GridSpec::torus(8, 2).unwrap();
        let s = set(g, &[[7, 0], [0, 0]]);
        let r = box_hull_rect(&s).unwrap();
        assert_eq!(r.start, [7, 0]);
        assert_eq!(r.extent, [2, 1]);
        assert_eq!(box_hull(&s).unwrap(), s);
    }

    #[test]
    fn hull_of_block_is_block() {
        let g = GridSpec::torus(8, 3).unwrap();
        let b = block_of(&g, Shift::new(6, 7)).unwrap();
        let r = box_hull_rect(&b).unwrap();
        assert_eq!(r.start, [6, 7]);
        assert_eq!(r.extent, [3, 3]);
    }

    #[test]
    fn min_image_range() {
        let g = GridSpec::torus(8, 2).unwrap();
        assert_eq!(g.min_image([7, 4]), [-1, 4]);
        assert_eq!(g.min_image([-4, 5]), [4, -3]);
    }
}

//! Cube partition of `ℝ^d`, regions as finite unions of cubes, and the
//! dilute/dense indicators.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::{math, Point, MAX_DIM};

pub type CubeIndex = [i64; MAX_DIM];

/// Half-open cubes `∏ [a(r_i - 1/2), a(r_i + 1/2))` of edge `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubeGrid {
    a: f64,
    dim: usize,
}

impl CubeGrid {
    pub fn new(a: f64, dim: usize) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Domain(format!("cube edge a = {a} must be positive")));
        }
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Domain(format!(
                "dimension {dim} outside 1..={MAX_DIM}"
            )));
        }
        Ok(Self { a, dim })
    }

    pub fn edge(&self) -> f64 {
        self.a
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cube_volume(&self) -> f64 {
        math::powi(self.a, self.dim as i32)
    }

    pub fn cube_of(&self, x: &Point) -> CubeIndex {
        let mut r = [0; MAX_DIM];
        for i in 0..self.dim {
            r[i] = math::floor(x[i] / self.a + 0.5) as i64;
        }
        r
    }

    /// Lower corner of the cube.
    pub fn lower_corner(&self, r: &CubeIndex) -> Point {
        let mut x = [0.0; MAX_DIM];
        for i in 0..self.dim {
            x[i] = self.a * (r[i] as f64 - 0.5);
        }
        x
    }

    pub fn center(&self, r: &CubeIndex) -> Point {
        let mut x = [0.0; MAX_DIM];
        for i in 0..self.dim {
            x[i] = self.a * r[i] as f64;
        }
        x
    }

    /// Smallest and largest distance between points of two closed cubes.
    pub fn distance_range(&self, r: &CubeIndex, s: &CubeIndex) -> (f64, f64) {
        let (mut lo, mut hi) = (0.0, 0.0);
        for i in 0..self.dim {
            let k = (r[i] - s[i]).unsigned_abs() as f64;
            let gap = (k - 1.0).max(0.0);
            lo += gap * gap;
            hi += (k + 1.0) * (k + 1.0);
        }
        (self.a * math::sqrt(lo), self.a * math::sqrt(hi))
    }

    /// Cubes sharing at least a corner.
    pub fn touching(&self, r: &CubeIndex, s: &CubeIndex) -> bool {
        (0..self.dim).all(|i| (r[i] - s[i]).abs() <= 1)
    }
}

/// A finite union of grid cubes, stored as a sorted index set.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    grid: CubeGrid,
    cubes: Vec<CubeIndex>,
}

impl Region {
    pub fn from_cubes(grid: CubeGrid, mut cubes: Vec<CubeIndex>) -> Result<Self> {
        for c in &cubes {
            if c[grid.dim..].iter().any(|&v| v != 0) {
                return Err(Error::Domain(format!(
                    "cube index {c:?} has components beyond dimension {}",
                    grid.dim
                )));
            }
        }
        cubes.sort_unstable();
        cubes.dedup();
        Ok(Self { grid, cubes })
    }

    /// Cubes `0..n_i` along each axis.
    pub fn boxed(grid: CubeGrid, counts: &[usize]) -> Result<Self> {
        if counts.len() != grid.dim {
            return Err(Error::Domain(format!(
                "box has {} extents for dimension {}",
                counts.len(),
                grid.dim
            )));
        }
        let total: usize = counts.iter().product();
        let mut cubes = Vec::with_capacity(total);
        for flat in 0..total {
            let mut r = [0; MAX_DIM];
            let mut rest = flat;
            for i in (0..grid.dim).rev() {
                r[i] = (rest % counts[i]) as i64;
                rest /= counts[i];
            }
            cubes.push(r);
        }
        Self::from_cubes(grid, cubes)
    }

    /// Box of physical side lengths `lengths`, each a whole multiple of `a`.
    pub fn with_extent(grid: CubeGrid, lengths: &[f64]) -> Result<Self> {
        let counts = lengths
            .iter()
            .map(|&l| {
                let n = l / grid.a;
                let k = libm::round(n);
                if k >= 1.0 && (n - k).abs() <= 1e-9 * n.max(1.0) {
                    Ok(k as usize)
                } else {
                    Err(Error::Domain(format!(
                        "extent {l} is not a whole number of cubes of edge {}",
                        grid.a
                    )))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::boxed(grid, &counts)
    }

    pub fn grid(&self) -> &CubeGrid {
        &self.grid
    }

    pub fn cubes(&self) -> &[CubeIndex] {
        &self.cubes
    }

    /// `N_Λ`.
    pub fn n_cubes(&self) -> usize {
        self.cubes.len()
    }

    /// `|Λ|`.
    pub fn volume(&self) -> f64 {
        self.cubes.len() as f64 * self.grid.cube_volume()
    }

    pub fn index_of(&self, c: &CubeIndex) -> Option<usize> {
        self.cubes.binary_search(c).ok()
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.index_of(&self.grid.cube_of(x)).is_some()
    }

    /// All `k`-subsets of the region's cubes in lexicographic index order.
    pub fn cube_subsets(&self, k: usize) -> CubeSubsets<'_> {
        CubeSubsets::new(&self.cubes, k)
    }
}

/// Lexicographic `k`-combinations of a cube list.
#[derive(Debug, Clone)]
pub struct CubeSubsets<'a> {
    cubes: &'a [CubeIndex],
    idx: Vec<usize>,
    done: bool,
}

impl<'a> CubeSubsets<'a> {
    fn new(cubes: &'a [CubeIndex], k: usize) -> Self {
        Self {
            cubes,
            idx: (0..k).collect(),
            done: k > cubes.len(),
        }
    }
}

impl Iterator for CubeSubsets<'_> {
    type Item = CubeConfiguration;

    fn next(&mut self) -> Option<CubeConfiguration> {
        if self.done {
            return None;
        }
        let out = CubeConfiguration {
            cubes: self.idx.iter().map(|&i| self.cubes[i]).collect(),
        };
        let (n, k) = (self.cubes.len(), self.idx.len());
        // advance to the next combination
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// A finite set of pairwise distinct points.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    dim: usize,
    points: Vec<Point>,
}

impl Configuration {
    pub fn new(dim: usize, points: Vec<Point>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Domain(format!(
                "dimension {dim} outside 1..={MAX_DIM}"
            )));
        }
        for (i, p) in points.iter().enumerate() {
            if p[..dim].iter().any(|v| !v.is_finite()) || p[dim..].iter().any(|&v| v != 0.0) {
                return Err(Error::Domain(format!(
                    "point {p:?} is not a finite point of R^{dim}"
                )));
            }
            if points[..i].contains(p) {
                return Err(Error::Domain(format!("coincident points at {p:?}")));
            }
        }
        Ok(Self { dim, points })
    }

    /// One-dimensional configuration from coordinates.
    pub fn line(xs: &[f64]) -> Result<Self> {
        Self::new(1, xs.iter().map(|&x| [x, 0.0, 0.0]).collect())
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            points: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `η ∪ γ`; the sets must be disjoint.
    pub fn union(&self, other: &Configuration) -> Result<Configuration> {
        let mut pts = self.points.clone();
        pts.extend_from_slice(&other.points);
        Configuration::new(self.dim, pts)
    }
}

/// A finite set of distinct cube indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CubeConfiguration {
    cubes: Vec<CubeIndex>,
}

impl CubeConfiguration {
    pub fn new(mut cubes: Vec<CubeIndex>) -> Result<Self> {
        let n = cubes.len();
        cubes.sort_unstable();
        cubes.dedup();
        if cubes.len() != n {
            return Err(Error::Domain(
                "cube configuration has repeated cubes".into(),
            ));
        }
        Ok(Self { cubes })
    }

    pub fn cubes(&self) -> &[CubeIndex] {
        &self.cubes
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Density {
    Dilute,
    Dense,
    Mixed,
}

pub fn occupancy(grid: &CubeGrid, gamma: &Configuration) -> BTreeMap<CubeIndex, usize> {
    let mut occ = BTreeMap::new();
    for x in gamma.points() {
        *occ.entry(grid.cube_of(x)).or_insert(0) += 1;
    }
    occ
}

/// `χ₋`: every cube of the region holds at most one point of `γ`.
pub fn chi_minus(grid: &CubeGrid, region: &Region, gamma: &Configuration) -> bool {
    occupancy(grid, gamma)
        .iter()
        .all(|(c, &n)| n <= 1 || region.index_of(c).is_none())
}

/// `χ₊^Δ`: cube `c` holds at least two points.
pub fn chi_plus(grid: &CubeGrid, cube: &CubeIndex, gamma: &Configuration) -> bool {
    gamma
        .points()
        .iter()
        .filter(|x| grid.cube_of(x) == *cube)
        .count()
        >= 2
}

pub fn classify(grid: &CubeGrid, region: &Region, gamma: &Configuration) -> Result<Density> {
    if let Some(x) = gamma.points().iter().find(|x| !region.contains(x)) {
        return Err(Error::Precondition(format!(
            "point {x:?} lies outside the region"
        )));
    }
    let occ = occupancy(grid, gamma);
    let dilute = occ.values().all(|&n| n <= 1);
    let dense = occ.values().all(|&n| n >= 2);
    Ok(match (dilute, dense) {
        (true, _) => Density::Dilute,
        (false, true) => Density::Dense,
        _ => Density::Mixed,
    })
}

/// True if two of `cubes` coincide (small slices, quadratic scan).
#[inline]
pub(crate) fn has_repeat(cubes: &[CubeIndex]) -> bool {
    cubes
        .iter()
        .enumerate()
        .any(|(i, c)| cubes[..i].contains(c))
}

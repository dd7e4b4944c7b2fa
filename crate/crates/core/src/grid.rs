//! Periodic grids standing in for continuum space, and windows of grid sites.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A `d`-dimensional periodic grid with `M` sites per axis and spacing `h`.
///
/// Sites are numbered row-major, the last axis varying fastest. Every
/// quadrature over one coordinate carries the cell volume `h^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(rename = "d")]
    dimension: usize,
    #[serde(rename = "M")]
    sites_per_axis: usize,
    #[serde(rename = "h")]
    spacing: f64,
}

impl GridSpec {
    pub fn new(dimension: usize, sites_per_axis: usize, spacing: f64) -> Result<Self> {
        let grid = Self {
            dimension,
            sites_per_axis,
            spacing,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// A grid of `sites_per_axis` cells covering the box `[0, extent)^d`.
    pub fn with_extent(dimension: usize, sites_per_axis: usize, extent: f64) -> Result<Self> {
        Self::new(dimension, sites_per_axis, extent / sites_per_axis as f64)
    }

    /// Re-checks the invariants; needed after deserialization.
    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return invalid("grid dimension must be at least 1");
        }
        if self.sites_per_axis < 2 {
            return invalid("grid needs at least 2 sites per axis");
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return invalid(format!("grid spacing must be positive, got {}", self.spacing));
        }
        let total = (self.sites_per_axis as u128).checked_pow(self.dimension as u32);
        match total {
            Some(n) if n <= u32::MAX as u128 => Ok(()),
            _ => Err(Error::Capacity("grid site count overflows".into())),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn sites_per_axis(&self) -> usize {
        self.sites_per_axis
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Box side length `M h`.
    pub fn extent(&self) -> f64 {
        self.sites_per_axis as f64 * self.spacing
    }

    /// Total number of sites `M^d`.
    pub fn site_count(&self) -> usize {
        self.sites_per_axis.pow(self.dimension as u32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dimension as i32)
    }

    pub fn volume(&self) -> f64 {
        self.extent().powi(self.dimension as i32)
    }

    pub fn coords(&self, site: usize) -> Vec<usize> {
        let mut out = vec![0; self.dimension];
        let mut rest = site;
        for c in out.iter_mut().rev() {
            *c = rest % self.sites_per_axis;
            rest /= self.sites_per_axis;
        }
        out
    }

    pub fn site(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.dimension);
        coords
            .iter()
            .fold(0, |acc, &c| acc * self.sites_per_axis + c % self.sites_per_axis)
    }

    /// Periodic difference `x - y` as a displacement site index.
    pub fn sub(&self, x: usize, y: usize) -> usize {
        let m = self.sites_per_axis;
        let (mut x, mut y) = (x, y);
        let mut out = 0;
        let mut place = 1;
        for _ in 0..self.dimension {
            let d = (x % m + m - y % m) % m;
            out += d * place;
            place *= m;
            x /= m;
            y /= m;
        }
        out
    }

    /// Periodic sum `x + delta`.
    pub fn add(&self, x: usize, delta: usize) -> usize {
        let m = self.sites_per_axis;
        let (mut x, mut delta) = (x, delta);
        let mut out = 0;
        let mut place = 1;
        for _ in 0..self.dimension {
            out += ((x % m + delta % m) % m) * place;
            place *= m;
            x /= m;
            delta /= m;
        }
        out
    }

    /// The displacement `-delta`.
    pub fn neg(&self, delta: usize) -> usize {
        self.sub(0, delta)
    }

    /// Minimal-image displacement vector of a displacement site, in cells.
    pub fn signed_offset(&self, delta: usize) -> Vec<i64> {
        let m = self.sites_per_axis as i64;
        self.coords(delta)
            .into_iter()
            .map(|c| {
                let c = c as i64;
                if 2 * c > m {
                    c - m
                } else {
                    c
                }
            })
            .collect()
    }

    /// Euclidean length of the minimal-image displacement.
    pub fn offset_length(&self, delta: usize) -> f64 {
        self.signed_offset(delta)
            .iter()
            .map(|&c| (c as f64 * self.spacing).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Centre of a cell in continuum coordinates.
    pub fn cell_center(&self, site: usize) -> Vec<f64> {
        self.coords(site)
            .into_iter()
            .map(|c| (c as f64 + 0.5) * self.spacing)
            .collect()
    }

    /// Cell containing a continuum point of the box.
    pub fn cell_of(&self, point: &[f64]) -> usize {
        let m = self.sites_per_axis;
        point.iter().fold(0, |acc, &x| {
            let c = ((x / self.spacing).floor().max(0.0) as usize).min(m - 1);
            acc * m + c
        })
    }
}

/// A finite set of grid sites, kept sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    grid: GridSpec,
    sites: Vec<usize>,
}

impl Window {
    pub fn full(grid: GridSpec) -> Self {
        Self {
            grid,
            sites: (0..grid.site_count()).collect(),
        }
    }

    pub fn new(grid: GridSpec, mut sites: Vec<usize>) -> Result<Self> {
        sites.sort_unstable();
        if sites.windows(2).any(|w| w[0] == w[1]) {
            return invalid("window sites must be distinct");
        }
        if let Some(&s) = sites.last() {
            if s >= grid.site_count() {
                return invalid(format!("window site {s} is outside the grid"));
            }
        }
        Ok(Self { grid, sites })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.sites.len() == self.grid.site_count()
    }

    /// Position of a grid site inside the window.
    pub fn local_index(&self, site: usize) -> Option<usize> {
        if self.is_full() {
            return (site < self.sites.len()).then_some(site);
        }
        self.sites.binary_search(&site).ok()
    }

    pub fn is_subset_of(&self, other: &Window) -> bool {
        self.grid == other.grid && self.sites.iter().all(|&s| other.local_index(s).is_some())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_grids() {
        assert!(GridSpec::new(0, 4, 1.0).is_err());
        assert!(GridSpec::new(1, 1, 1.0).is_err());
        assert!(GridSpec::new(1, 4, 0.0).is_err());
        assert!(GridSpec::new(1, 4, f64::NAN).is_err());
    }

    #[test]
    fn periodic_arithmetic_2d() {
        let g = GridSpec::new(2, 5, 0.2).unwrap();
        let x = g.site(&[4, 1]);
        let y = g.site(&[1, 3]);
        let d = g.sub(x, y);
        assert_eq!(g.coords(d), vec![3, 3]);
        assert_eq!(g.add(y, d), x);
        assert_eq!(g.add(d, g.neg(d)), 0);
        assert_eq!(g.signed_offset(d), vec![-2, -2]);
        assert_eq!(g.cell_volume(), 0.2f64.powi(2));
    }

    #[test]
    fn cell_lookup_clamps_to_box() {
        let g = GridSpec::with_extent(1, 8, 1.0).unwrap();
        assert_eq!(g.cell_of(&[0.0]), 0);
        assert_eq!(g.cell_of(&[0.99999]), 7);
        assert_eq!(g.cell_of(&[1.0]), 7);
    }

    #[test]
    fn window_sorted_and_distinct() {
        let g = GridSpec::new(1, 8, 1.0).unwrap();
        let w = Window::new(g, vec![5, 1, 3]).unwrap();
        assert_eq!(w.sites(), &[1, 3, 5]);
        assert_eq!(w.local_index(3), Some(1));
        assert_eq!(w.local_index(2), None);
        assert!(Window::new(g, vec![1, 1]).is_err());
        assert!(Window::new(g, vec![8]).is_err());
        assert!(w.is_subset_of(&Window::full(g)));
    }
}

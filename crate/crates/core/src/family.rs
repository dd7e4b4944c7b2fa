//! Truncated functions on finite configurations, stored as symmetric grid tensors.
//!
//! A [`Family`] holds components `G^(0), ..., G^(N)` over a [`Window`] of `m`
//! grid sites. Component `n` is a flat row-major tensor of `m^n` entries; the
//! first coordinate varies slowest. Order 0 is a single scalar.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::grid::{GridSpec, Window};

/// Default cap on the number of entries of a single component.
pub const DEFAULT_ENTRY_CAP: usize = 1 << 26;

#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    window: Window,
    components: Vec<Vec<f64>>,
}

/// Number of entries of an order-`n` component over `m` sites, if within `cap`.
pub fn component_len(m: usize, n: usize, cap: usize) -> Result<usize> {
    let len = (m as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if len > cap as u128 {
        return Err(Error::Capacity(format!(
            "order-{n} component over {m} sites has {len} entries, cap is {cap}"
        )));
    }
    Ok(len as usize)
}

/// Lebesgue–Poisson weight `e^{-theta n} h^{dn} / n!` of order `n`.
pub fn order_weight(grid: &GridSpec, n: usize, theta: f64) -> f64 {
    let factorial: f64 = (1..=n).map(|i| i as f64).product();
    (-theta * n as f64).exp() * grid.cell_volume().powi(n as i32) / factorial
}

/// Calls `f(flat, tuple)` for every tuple of `[0, m)^n` in storage order.
pub fn for_each_tuple(m: usize, n: usize, mut f: impl FnMut(usize, &[usize])) {
    if n == 0 {
        f(0, &[]);
        return;
    }
    if m == 0 {
        return;
    }
    let mut tuple = vec![0usize; n];
    let mut flat = 0usize;
    loop {
        f(flat, &tuple);
        flat += 1;
        let mut axis = n;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            tuple[axis] += 1;
            if tuple[axis] < m {
                break;
            }
            tuple[axis] = 0;
        }
    }
}

fn flat_index(m: usize, tuple: &[usize]) -> usize {
    tuple.iter().fold(0, |acc, &i| acc * m + i)
}

impl Family {
    pub fn zeros(window: Window, order: usize) -> Result<Self> {
        Self::zeros_with_cap(window, order, DEFAULT_ENTRY_CAP)
    }

    pub fn zeros_with_cap(window: Window, order: usize, cap: usize) -> Result<Self> {
        let m = window.len();
        let components = (0..=order)
            .map(|n| component_len(m, n, cap).map(|len| vec![0.0; len]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { window, components })
    }

    pub fn from_components(window: Window, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.is_empty() {
            return invalid("a family needs at least the order-0 component");
        }
        let m = window.len();
        for (n, c) in components.iter().enumerate() {
            let expected = component_len(m, n, usize::MAX)?;
            if c.len() != expected {
                return invalid(format!(
                    "order-{n} component has {} entries, expected {expected}",
                    c.len()
                ));
            }
        }
        Ok(Self { window, components })
    }

    /// Builds a family by evaluating `f(n, tuple)` on every tuple of local indices.
    pub fn from_fn(
        window: Window,
        order: usize,
        mut f: impl FnMut(usize, &[usize]) -> f64,
    ) -> Result<Self> {
        let mut out = Self::zeros(window, order)?;
        let m = out.window.len();
        for (n, comp) in out.components.iter_mut().enumerate() {
            for_each_tuple(m, n, |flat, t| comp[flat] = f(n, t));
        }
        Ok(out)
    }

    /// A family with only the order-0 component set.
    pub fn constant(window: Window, order: usize, value: f64) -> Result<Self> {
        let mut out = Self::zeros(window, order)?;
        out.components[0][0] = value;
        Ok(out)
    }

    /// Random symmetric components; entries drawn uniformly from `[lo, hi)`.
    ///
    /// Tuples that are permutations of one another share a value, and tuples
    /// with a repeated site are set to zero when `off_diagonal` is true.
    pub fn random_symmetric<R: Rng + ?Sized>(
        window: Window,
        order: usize,
        lo: f64,
        hi: f64,
        off_diagonal: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let mut out = Self::zeros(window, order)?;
        let m = out.window.len();
        for (n, comp) in out.components.iter_mut().enumerate() {
            let raw: Vec<f64> = (0..comp.len()).map(|_| rng.random_range(lo..hi)).collect();
            let mut sorted = vec![0; n];
            for_each_tuple(m, n, |flat, t| {
                sorted.copy_from_slice(t);
                sorted.sort_unstable();
                let repeated = sorted.windows(2).any(|w| w[0] == w[1]);
                comp[flat] = if off_diagonal && repeated {
                    0.0
                } else {
                    raw[flat_index(m, &sorted)]
                };
            });
        }
        Ok(out)
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn grid(&self) -> &GridSpec {
        self.window.grid()
    }

    /// Truncation order `N`.
    pub fn order(&self) -> usize {
        self.components.len() - 1
    }

    pub fn component(&self, n: usize) -> &[f64] {
        &self.components[n]
    }

    pub fn component_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.components[n]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub(crate) fn components_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.components
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.components
    }

    /// Value at a tuple of local (window) indices.
    pub fn value(&self, tuple: &[usize]) -> f64 {
        let n = tuple.len();
        if n > self.order() {
            return 0.0;
        }
        self.components[n][flat_index(self.window.len(), tuple)]
    }

    /// Value at a tuple of grid sites; zero when any site lies outside the window.
    pub fn value_at_sites(&self, sites: &[usize]) -> f64 {
        if sites.len() > self.order() {
            return 0.0;
        }
        let mut flat = 0;
        for &s in sites {
            match self.window.local_index(s) {
                Some(i) => flat = flat * self.window.len() + i,
                None => return 0.0,
            }
        }
        self.components[sites.len()][flat]
    }

    pub fn max_abs(&self, n: usize) -> f64 {
        self.components[n].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.components.iter().flatten().all(|v| v.is_finite())
    }

    /// Largest deviation from permutation symmetry over all transpositions.
    pub fn symmetry_defect(&self) -> f64 {
        let m = self.window.len();
        let mut worst = 0.0f64;
        for (n, comp) in self.components.iter().enumerate().skip(2) {
            let mut swapped = vec![0; n];
            for_each_tuple(m, n, |flat, t| {
                for i in 0..n {
                    for j in i + 1..n {
                        swapped.copy_from_slice(t);
                        swapped.swap(i, j);
                        let d = (comp[flat] - comp[flat_index(m, &swapped)]).abs();
                        worst = worst.max(d);
                    }
                }
            });
        }
        worst
    }

    /// `self += scale * other`; both families must share window and order.
    pub fn add_scaled(&mut self, scale: f64, other: &Family) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.components.iter_mut().zip(&other.components) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Family {
        Family {
            window: self.window.clone(),
            components: self
                .components
                .iter()
                .map(|c| c.iter().map(|&v| f(v)).collect())
                .collect(),
        }
    }

    /// Sup distance per order between two compatible families.
    pub fn sup_diff_by_order(&self, other: &Family) -> Result<Vec<f64>> {
        self.check_compatible(other)?;
        Ok(self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.iter().zip(b).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs())))
            .collect())
    }

    pub fn sup_diff(&self, other: &Family) -> Result<f64> {
        Ok(self
            .sup_diff_by_order(other)?
            .into_iter()
            .fold(0.0, f64::max))
    }

    pub(crate) fn check_compatible(&self, other: &Family) -> Result<()> {
        if self.window != other.window {
            return Err(Error::GridMismatch("families live on different windows".into()));
        }
        if self.order() != other.order() {
            return invalid(format!(
                "truncation orders differ: {} vs {}",
                self.order(),
                other.order()
            ));
        }
        Ok(())
    }
}

/// A family with `k^(0) = 1`: the correlation function of a state, truncated at order `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationFamily(Family);

impl CorrelationFamily {
    pub fn new(family: Family) -> Result<Self> {
        let k0 = family.component(0)[0];
        if (k0 - 1.0).abs() > 1e-12 {
            return Err(Error::Normalization(k0));
        }
        if !family.all_finite() {
            return invalid("correlation family has non-finite entries");
        }
        Ok(Self(family))
    }

    pub fn family(&self) -> &Family {
        &self.0
    }

    pub fn into_family(self) -> Family {
        self.0
    }

    pub fn order(&self) -> usize {
        self.0.order()
    }

    pub fn window(&self) -> &Window {
        self.0.window()
    }

    pub fn grid(&self) -> &GridSpec {
        self.0.grid()
    }
}

impl TryFrom<Family> for CorrelationFamily {
    type Error = Error;

    fn try_from(family: Family) -> Result<Self> {
        Self::new(family)
    }
}

impl AsRef<Family> for CorrelationFamily {
    fn as_ref(&self) -> &Family {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn window(m: usize) -> Window {
        Window::full(GridSpec::new(1, m, 0.5).unwrap())
    }

    #[test]
    fn tuple_iteration_is_row_major() {
        let mut seen = Vec::new();
        for_each_tuple(3, 2, |flat, t| seen.push((flat, t.to_vec())));
        assert_eq!(seen.len(), 9);
        assert_eq!(seen[5], (5, vec![1, 2]));
        let mut count = 0;
        for_each_tuple(4, 0, |_, t| {
            assert!(t.is_empty());
            count += 1
        });
        assert_eq!(count, 1);
    }

    #[test]
    fn capacity_cap_enforced() {
        let err = Family::zeros_with_cap(window(16), 3, 1000).unwrap_err();
        assert!(matches!(err, Error::Capacity(_)));
        assert!(Family::zeros_with_cap(window(16), 2, 1000).is_ok());
    }

    #[test]
    fn random_symmetric_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = Family::random_symmetric(window(5), 3, -1.0, 1.0, false, &mut rng).unwrap();
        assert_eq!(f.symmetry_defect(), 0.0);
        let g = Family::random_symmetric(window(5), 3, 0.0, 1.0, true, &mut rng).unwrap();
        assert_eq!(g.value(&[2, 2]), 0.0);
        assert_eq!(g.value(&[1, 4, 1]), 0.0);
        assert!(g.value(&[1, 4, 3]) > 0.0);
        assert_eq!(g.value(&[1, 4, 3]), g.value(&[3, 1, 4]));
    }

    #[test]
    fn outside_window_reads_zero() {
        let g = GridSpec::new(1, 8, 1.0).unwrap();
        let w = Window::new(g, vec![2, 5]).unwrap();
        let f = Family::from_fn(w, 2, |_, _| 1.0).unwrap();
        assert_eq!(f.value_at_sites(&[2, 5]), 1.0);
        assert_eq!(f.value_at_sites(&[2, 6]), 0.0);
        assert_eq!(f.value_at_sites(&[2, 5, 2]), 0.0);
    }

    #[test]
    fn correlation_requires_unit_order_zero() {
        let f = Family::constant(window(4), 2, 0.5).unwrap();
        assert!(matches!(CorrelationFamily::new(f), Err(Error::Normalization(_))));
        let f = Family::constant(window(4), 2, 1.0).unwrap();
        assert!(CorrelationFamily::new(f).is_ok());
    }
}

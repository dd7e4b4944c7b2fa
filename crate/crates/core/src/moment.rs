//! The finite-window moment problem.
//!
//! On a window of `m` sites a state is a probability vector `mu(gamma)` over
//! the `2^m` sub-configurations. Its correlation function is
//! `k(eta) = h^{-d|eta|} sum_{gamma >= eta} mu(gamma)`, and inclusion–exclusion
//! recovers `mu` from `k`. A candidate `k` is a correlation function exactly
//! when the recovered weights are nonnegative.
//!
//! Subset-indexed arrays use bit `j` of the mask for `window.sites()[j]`.

use serde::Serialize;

use crate::configuration::FiniteConfiguration;
use crate::error::{invalid, Error, Result};
use crate::family::{for_each_tuple, CorrelationFamily, Family};
use crate::grid::Window;

/// Largest window handled by exhaustive enumeration.
pub const MAX_WINDOW_SITES: usize = 20;

/// Relative tolerance of the positivity certificate.
pub const POSITIVITY_RTOL: f64 = 1e-9;

/// A real function on all sub-configurations of a window.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetFunction {
    window: Window,
    values: Vec<f64>,
}

/// Probability weights `mu(gamma)` of every sub-configuration of a window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowDensity {
    window: Window,
    weights: Vec<f64>,
}

/// Outcome of [`density_from_correlation`].
#[derive(Debug, Clone, PartialEq)]
pub enum MomentCertificate {
    Certified(WindowDensity),
    Rejected(MomentRejection),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentViolation {
    pub subset: Vec<usize>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentRejection {
    /// The signed weights that failed certification.
    pub weights: Vec<f64>,
    pub tolerance: f64,
    /// Every sub-configuration with weight below `-tolerance`, most negative first.
    pub violations: Vec<MomentViolation>,
}

fn check_window(window: &Window) -> Result<usize> {
    let m = window.len();
    if m > MAX_WINDOW_SITES {
        return Err(Error::Capacity(format!(
            "window has {m} sites, exhaustive enumeration supports at most {MAX_WINDOW_SITES}"
        )));
    }
    Ok(m)
}

fn check_len(window: &Window, len: usize) -> Result<()> {
    let m = check_window(window)?;
    if len != 1 << m {
        return invalid(format!("expected {} subset values, got {len}", 1usize << m));
    }
    Ok(())
}

/// `f(eta) <- sum_{gamma >= eta} f(gamma)`.
pub fn superset_sum(values: &mut [f64]) {
    let size = values.len();
    let mut bit = 1;
    while bit < size {
        for mask in 0..size {
            if mask & bit == 0 {
                values[mask] += values[mask | bit];
            }
        }
        bit <<= 1;
    }
}

/// Inverse of [`superset_sum`]: `f(gamma) <- sum_{eta >= gamma} (-1)^{|eta \ gamma|} f(eta)`.
pub fn superset_mobius(values: &mut [f64]) {
    let size = values.len();
    let mut bit = 1;
    while bit < size {
        for mask in 0..size {
            if mask & bit == 0 {
                values[mask] -= values[mask | bit];
            }
        }
        bit <<= 1;
    }
}

/// `f(gamma) <- sum_{eta <= gamma} f(eta)`.
pub fn subset_sum(values: &mut [f64]) {
    let size = values.len();
    let mut bit = 1;
    while bit < size {
        for mask in 0..size {
            if mask & bit != 0 {
                values[mask] += values[mask ^ bit];
            }
        }
        bit <<= 1;
    }
}

fn cell_power(window: &Window, mask: usize) -> f64 {
    window.grid().cell_volume().powi(mask.count_ones() as i32)
}

impl SubsetFunction {
    pub fn new(window: Window, values: Vec<f64>) -> Result<Self> {
        check_len(&window, values.len())?;
        Ok(Self { window, values })
    }

    pub fn from_fn(window: Window, f: impl Fn(&FiniteConfiguration) -> f64) -> Result<Self> {
        let m = check_window(&window)?;
        let all = FiniteConfiguration::new(window.sites().to_vec())?;
        let values = (0..1u64 << m).map(|mask| f(&all.subset(mask))).collect();
        Ok(Self { window, values })
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, mask: usize) -> f64 {
        self.values[mask]
    }

    /// Value at a sub-configuration given by grid sites.
    pub fn at(&self, eta: &FiniteConfiguration) -> Option<f64> {
        let mut mask = 0;
        for &s in eta.points() {
            mask |= 1 << self.window.sites().binary_search(&s).ok()?;
        }
        Some(self.values[mask])
    }

    /// Reads the subset values of a correlation family whose order covers the whole window.
    pub fn from_correlation(k: &CorrelationFamily) -> Result<Self> {
        let window = k.window().clone();
        let m = check_window(&window)?;
        if k.order() < m {
            return invalid(format!(
                "family truncated at order {} cannot describe all subsets of {m} sites",
                k.order()
            ));
        }
        let values = (0..1usize << m)
            .map(|mask| {
                let tuple: Vec<usize> = (0..m).filter(|j| mask >> j & 1 == 1).collect();
                k.family().value(&tuple)
            })
            .collect();
        Ok(Self { window, values })
    }
}

impl WindowDensity {
    pub fn new(window: Window, weights: Vec<f64>) -> Result<Self> {
        check_len(&window, weights.len())?;
        if weights.iter().any(|w| !w.is_finite()) {
            return invalid("density weights must be finite");
        }
        Ok(Self { window, weights })
    }

    /// All mass on one sub-configuration (bitmask over the window).
    pub fn point_mass(window: Window, mask: usize) -> Result<Self> {
        let m = check_window(&window)?;
        let mut weights = vec![0.0; 1 << m];
        *weights
            .get_mut(mask)
            .ok_or_else(|| Error::InvalidInput(format!("mask {mask} outside window")))? = 1.0;
        Ok(Self { window, weights })
    }

    /// Independent occupation of each site with probability `p`.
    pub fn bernoulli(window: Window, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return invalid(format!("occupation probability {p} outside [0, 1]"));
        }
        let m = check_window(&window)?;
        let weights = (0..1usize << m)
            .map(|mask| {
                let j = mask.count_ones() as i32;
                p.powi(j) * (1.0 - p).powi(m as i32 - j)
            })
            .collect();
        Ok(Self { window, weights })
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Correlation values `k(eta)` on every sub-configuration of the window.
    pub fn correlation_subsets(&self) -> SubsetFunction {
        let mut values = self.weights.clone();
        superset_sum(&mut values);
        for (mask, v) in values.iter_mut().enumerate() {
            *v /= cell_power(&self.window, mask);
        }
        SubsetFunction {
            window: self.window.clone(),
            values,
        }
    }
}

/// The correlation family of a window state, truncated at order `order`.
///
/// Entries at tuples with a repeated site are zero; a configuration never holds
/// the same point twice.
pub fn correlation_from_density(mu: &WindowDensity, order: usize) -> Result<CorrelationFamily> {
    let k = mu.correlation_subsets();
    let window = mu.window.clone();
    let m = window.len();
    let mut family = Family::zeros(window, order)?;
    for n in 0..=order {
        let comp = family.component_mut(n);
        for_each_tuple(m, n, |flat, t| {
            let mut mask = 0usize;
            for &i in t {
                if mask >> i & 1 == 1 {
                    return;
                }
                mask |= 1 << i;
            }
            comp[flat] = k.values[mask];
        });
    }
    CorrelationFamily::new(family)
}

/// Recovers the window state from its correlation values by inclusion–exclusion
/// and certifies it: accepted iff every weight is at least `-1e-9 max|k|`, with
/// `k` measured in probability units `h^{d|eta|} k(eta)`.
pub fn density_from_correlation(k: &SubsetFunction) -> Result<MomentCertificate> {
    let k0 = k.values[0];
    if (k0 - 1.0).abs() > 1e-12 {
        return Err(Error::Normalization(k0));
    }
    if k.values.iter().any(|v| !v.is_finite()) {
        return invalid("correlation values must be finite");
    }
    let mut weights: Vec<f64> = k
        .values
        .iter()
        .enumerate()
        .map(|(mask, v)| v * cell_power(&k.window, mask))
        .collect();
    let scale = weights.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tolerance = POSITIVITY_RTOL * scale;
    superset_mobius(&mut weights);

    let mut violations: Vec<MomentViolation> = weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w < -tolerance)
        .map(|(mask, &weight)| MomentViolation {
            subset: (0..k.window.len())
                .filter(|j| mask >> j & 1 == 1)
                .map(|j| k.window.sites()[j])
                .collect(),
            weight,
        })
        .collect();
    if violations.is_empty() {
        return Ok(MomentCertificate::Certified(WindowDensity {
            window: k.window.clone(),
            weights,
        }));
    }
    violations.sort_by(|a, b| a.weight.total_cmp(&b.weight));
    Ok(MomentCertificate::Rejected(MomentRejection {
        weights,
        tolerance,
        violations,
    }))
}

/// `(KG)(gamma)` for every sub-configuration `gamma` of `G`'s window.
pub fn k_transform_on_window(g: &Family) -> Result<SubsetFunction> {
    let window = g.window().clone();
    let m = check_window(&window)?;
    let mut values: Vec<f64> = (0..1usize << m)
        .map(|mask| {
            let tuple: Vec<usize> = (0..m).filter(|j| mask >> j & 1 == 1).collect();
            g.value(&tuple)
        })
        .collect();
    subset_sum(&mut values);
    Ok(SubsetFunction { window, values })
}

/// Membership of `G` in the cone `{G : KG >= 0}`, decided exhaustively on its window.
pub fn in_positive_cone(g: &Family, tol: f64) -> Result<bool> {
    Ok(k_transform_on_window(g)?.values.iter().all(|&v| v >= -tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{k_transform, pairing};
    use crate::grid::GridSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_window(m: usize) -> Window {
        let g = GridSpec::new(1, m.max(2), 1.0).unwrap();
        Window::new(g, (0..m).collect()).unwrap()
    }

    /// Oracle: direct enumeration of supersets.
    fn superset_oracle(values: &[f64], mask: usize, sign: bool) -> f64 {
        (0..values.len())
            .filter(|&s| s & mask == mask)
            .map(|s| {
                let extra = (s ^ mask).count_ones();
                if sign && extra % 2 == 1 {
                    -values[s]
                } else {
                    values[s]
                }
            })
            .sum()
    }

    #[test]
    fn fast_transforms_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let values: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut zeta = values.clone();
        superset_sum(&mut zeta);
        let mut mobius = values.clone();
        superset_mobius(&mut mobius);
        for mask in 0..64 {
            assert!((zeta[mask] - superset_oracle(&values, mask, false)).abs() < 1e-13);
            assert!((mobius[mask] - superset_oracle(&values, mask, true)).abs() < 1e-13);
        }
    }

    #[test]
    fn point_mass_on_whole_window() {
        let w = unit_window(4);
        let mu = WindowDensity::point_mass(w, 0b1111).unwrap();
        let k = mu.correlation_subsets();
        assert!(k.values().iter().all(|&v| v == 1.0));
        let fam = correlation_from_density(&mu, 2).unwrap();
        assert_eq!(fam.family().value(&[0, 3]), 1.0);
        assert_eq!(fam.family().value(&[3, 3]), 0.0);
    }

    #[test]
    fn point_mass_on_empty_configuration() {
        let w = unit_window(3);
        let mu = WindowDensity::point_mass(w, 0).unwrap();
        let k = mu.correlation_subsets();
        assert_eq!(k.get(0), 1.0);
        assert!(k.values()[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bernoulli_product_factorizes() {
        let w = unit_window(6);
        let mu = WindowDensity::bernoulli(w, 0.3).unwrap();
        let k = mu.correlation_subsets();
        for mask in 0..64usize {
            let want = 0.3f64.powi(mask.count_ones() as i32);
            assert!((k.get(mask) - want).abs() < 1e-14);
        }
    }

    #[test]
    fn two_site_fixture_certified() {
        let k = SubsetFunction::new(unit_window(2), vec![1.0, 0.5, 0.5, 0.4]).unwrap();
        let MomentCertificate::Certified(mu) = density_from_correlation(&k).unwrap() else {
            panic!("expected certification");
        };
        let want = [0.4, 0.1, 0.1, 0.4];
        for (w, e) in mu.weights().iter().zip(want) {
            assert!((w - e).abs() < 1e-15);
        }
        assert!((mu.total_mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_site_fixture_rejected() {
        let k = SubsetFunction::new(unit_window(2), vec![1.0, 0.5, 0.5, 0.6]).unwrap();
        let MomentCertificate::Rejected(r) = density_from_correlation(&k).unwrap() else {
            panic!("expected rejection");
        };
        // mu({1}) = mu({2}) = -0.1; mu(empty) = 0.6 and mu({1,2}) = 0.6.
        assert_eq!(r.violations.len(), 2);
        assert_eq!(r.violations[0].subset.len(), 1);
        assert!((r.violations[0].weight + 0.1).abs() < 1e-15);
        let subsets: Vec<_> = r.violations.iter().map(|v| v.subset.clone()).collect();
        assert!(subsets.contains(&vec![0]) && subsets.contains(&vec![1]));
    }

    #[test]
    fn normalization_and_capacity_errors() {
        let k = SubsetFunction::new(unit_window(1), vec![0.9, 0.1]).unwrap();
        assert!(matches!(density_from_correlation(&k), Err(Error::Normalization(_))));
        let g = GridSpec::new(1, 32, 1.0).unwrap();
        let big = Window::new(g, (0..21).collect()).unwrap();
        assert!(matches!(WindowDensity::point_mass(big, 0), Err(Error::Capacity(_))));
        assert!(SubsetFunction::new(unit_window(2), vec![1.0; 3]).is_err());
    }

    #[test]
    fn kappa_power_family_certified_with_binomial_weights() {
        let m = 7;
        for kappa in [0.0, 0.25, 0.5, 1.0] {
            let k = SubsetFunction::from_fn(unit_window(m), |eta| {
                f64::powi(kappa, eta.len() as i32)
            })
            .unwrap();
            let MomentCertificate::Certified(mu) = density_from_correlation(&k).unwrap() else {
                panic!("kappa = {kappa} rejected");
            };
            for (mask, w) in mu.weights().iter().enumerate() {
                let j = mask.count_ones() as i32;
                let want = kappa.powi(j) * (1.0 - kappa).powi(m as i32 - j);
                assert!((w - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn spacing_enters_as_density_scale() {
        let g = GridSpec::new(1, 4, 0.5).unwrap();
        let w = Window::new(g, vec![0, 2]).unwrap();
        let mu = WindowDensity::bernoulli(w.clone(), 0.5).unwrap();
        let k = mu.correlation_subsets();
        assert!((k.get(0b01) - 0.5 / 0.5).abs() < 1e-15);
        assert!((k.get(0b11) - 0.25 / 0.25).abs() < 1e-15);
        let MomentCertificate::Certified(back) = density_from_correlation(&k).unwrap() else {
            panic!()
        };
        assert!(back.weights().iter().zip(mu.weights()).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn cone_membership_and_pairing_positivity() {
        let g = GridSpec::new(1, 5, 0.5).unwrap();
        let w = Window::full(g);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mu_weights: Vec<f64> = (0..32).map(|_| rng.random_range(0.0..1.0)).collect();
        let total: f64 = mu_weights.iter().sum();
        let mu =
            WindowDensity::new(w.clone(), mu_weights.iter().map(|v| v / total).collect()).unwrap();
        let k = correlation_from_density(&mu, 5).unwrap();
        // (KG)(gamma) = 1 - |gamma| is negative once gamma has two points.
        let g_bad = Family::from_fn(w.clone(), 2, |n, _| match n {
            0 => 1.0,
            1 => -1.0,
            _ => 0.0,
        })
        .unwrap();
        assert!(!in_positive_cone(&g_bad, 0.0).unwrap());
        let g_good = Family::from_fn(w.clone(), 2, |n, t| match n {
            0 => 0.0,
            1 => 0.0,
            _ if t[0] != t[1] => 1.0,
            _ => 0.0,
        })
        .unwrap();
        assert!(in_positive_cone(&g_good, 0.0).unwrap());
        assert!(pairing(&g_good, &k).unwrap() >= -1e-12);

        let kg = k_transform_on_window(&g_bad).unwrap();
        let all = FiniteConfiguration::new(w.sites().to_vec()).unwrap();
        for mask in 0..32u64 {
            let gamma = all.subset(mask);
            assert!((kg.get(mask as usize) - k_transform(&g_bad, &gamma).unwrap()).abs() < 1e-13);
        }
    }
}

//! Lebesgue–Poisson calculus on the grid: integrals, pairings, the K-transform
//! and its inverse, and the weighted norms of correlation and test functions.

use crate::configuration::FiniteConfiguration;
use crate::error::{invalid, Error, Result};
use crate::family::{for_each_tuple, order_weight, CorrelationFamily, Family};
use crate::grid::{GridSpec, Window};

/// Largest configuration accepted by the subset enumerations.
pub const MAX_ENUMERATED_POINTS: usize = 30;

/// `G^(0) + sum_n e^{-theta n} h^{dn}/n! sum G^(n)`.
pub fn lp_integral(g: &Family, theta: f64) -> Result<f64> {
    if !g.all_finite() {
        return invalid("family has non-finite entries");
    }
    Ok(weighted_sum(g, theta, |_, v| v))
}

/// Weighted `L^1` norm `||v||_{theta,1}`: the Lebesgue–Poisson integral of `|v| e^{-theta|eta|}`.
pub fn norm_l1(v: &Family, theta: f64) -> f64 {
    weighted_sum(v, theta, |_, x| x.abs())
}

/// `||k||_{theta,inf} = max_n e^{theta n} max |k^(n)|`.
pub fn norm_sup(k: &Family, theta: f64) -> f64 {
    (0..=k.order())
        .map(|n| (theta * n as f64).exp() * k.max_abs(n))
        .fold(0.0, f64::max)
}

/// `sum_n w_n(theta) sum_tuples f(n, value)`.
pub(crate) fn weighted_sum(g: &Family, theta: f64, f: impl Fn(usize, f64) -> f64) -> f64 {
    g.components()
        .iter()
        .enumerate()
        .map(|(n, comp)| {
            let s: f64 = comp.iter().map(|&v| f(n, v)).sum();
            order_weight(g.grid(), n, theta) * s
        })
        .sum()
}

/// `<<G, k>> = sum_n h^{dn}/n! sum G^(n) k^(n)`, over orders both families carry.
///
/// `G` may live on any window contained in the window of `k`.
pub fn pairing(g: &Family, k: &CorrelationFamily) -> Result<f64> {
    let kf = k.family();
    if !g.window().is_subset_of(kf.window()) {
        return Err(Error::GridMismatch(
            "test function window is not contained in the correlation window".into(),
        ));
    }
    let map: Vec<usize> = g
        .window()
        .sites()
        .iter()
        .map(|&s| kf.window().local_index(s).expect("checked subset"))
        .collect();
    let (m, mk) = (g.window().len(), kf.window().len());
    let mut total = 0.0;
    for n in 0..=g.order().min(kf.order()) {
        let (gc, kc) = (g.component(n), kf.component(n));
        let mut s = 0.0;
        for_each_tuple(m, n, |flat, t| {
            let kidx = t.iter().fold(0, |acc, &i| acc * mk + map[i]);
            s += gc[flat] * kc[kidx];
        });
        total += order_weight(g.grid(), n, 0.0) * s;
    }
    if !total.is_finite() {
        return invalid("pairing is not finite");
    }
    Ok(total)
}

/// `(KG)(gamma) = sum_{eta subset gamma, |eta| <= N} G(eta)`.
pub fn k_transform(g: &Family, gamma: &FiniteConfiguration) -> Result<f64> {
    // Points outside the support window contribute nothing.
    let local: Vec<usize> = gamma
        .points()
        .iter()
        .filter_map(|&s| g.window().local_index(s))
        .collect();
    if local.len() > MAX_ENUMERATED_POINTS {
        return Err(Error::Capacity(format!(
            "configuration with {} points in the window is too large to enumerate",
            local.len()
        )));
    }
    let mut total = 0.0;
    let mut chosen = Vec::with_capacity(g.order());
    sum_subsets(g, &local, 0, &mut chosen, &mut total);
    Ok(total)
}

fn sum_subsets(g: &Family, points: &[usize], start: usize, chosen: &mut Vec<usize>, acc: &mut f64) {
    *acc += g.value(chosen);
    if chosen.len() == g.order() {
        return;
    }
    for i in start..points.len() {
        chosen.push(points[i]);
        sum_subsets(g, points, i + 1, chosen, acc);
        chosen.pop();
    }
}

/// `(K^{-1}F)(eta) = sum_{xi subset eta} (-1)^{|eta \ xi|} F(xi)`.
///
/// `f` must supply a value for every sub-configuration of `eta`.
pub fn k_inverse(
    eta: &FiniteConfiguration,
    f: impl Fn(&FiniteConfiguration) -> Option<f64>,
) -> Result<f64> {
    let n = eta.len();
    if n > MAX_ENUMERATED_POINTS {
        return Err(Error::Capacity(format!("|eta| = {n} is too large to enumerate")));
    }
    let mut total = 0.0;
    for mask in 0..1u64 << n {
        let xi = eta.subset(mask);
        let value = f(&xi).ok_or_else(|| {
            Error::InvalidInput(format!("missing value for sub-configuration {xi}"))
        })?;
        if (n - mask.count_ones() as usize).is_multiple_of(2) {
            total += value;
        } else {
            total -= value;
        }
    }
    Ok(total)
}

/// Correlation family of the Poisson state with density `rho`: `k^(n) = prod rho(x_j)`.
pub fn poisson_family(grid: GridSpec, rho: &[f64], order: usize) -> Result<CorrelationFamily> {
    if rho.len() != grid.site_count() {
        return invalid(format!(
            "density has {} values for {} grid sites",
            rho.len(),
            grid.site_count()
        ));
    }
    if let Some(bad) = rho.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return invalid(format!("density must be finite and nonnegative, found {bad}"));
    }
    let mut out = Family::zeros(Window::full(grid), order)?;
    out.component_mut(0)[0] = 1.0;
    for n in 1..=order {
        // k^(n)(x_1..x_n) = k^(n-1)(x_1..x_{n-1}) rho(x_n)
        let prev = out.component(n - 1).to_vec();
        let comp = out.component_mut(n);
        let s = rho.len();
        for (i, p) in prev.iter().enumerate() {
            for (j, r) in rho.iter().enumerate() {
                comp[i * s + j] = p * r;
            }
        }
    }
    CorrelationFamily::new(out)
}

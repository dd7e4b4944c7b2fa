//! Numerical counterparts of the stochastic-semigroup estimates: mass
//! functionals, the bound `||B v|| <= ||A v||`, the operator-power bound and the
//! sub-Poissonian constant.

use serde::Serialize;

use crate::algebra::{norm_l1, weighted_sum};
use crate::error::{invalid, Result};
use crate::family::Family;
use crate::generator::Generator;
use crate::kernel::JumpKernel;

/// Relative slack of the inequality checks.
pub const CHECK_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassFunctionals {
    /// `sum_n e^{-theta n} h^{dn}/n! sum v^(n)`.
    pub phi: f64,
    /// Same with an extra factor `n`.
    pub phi_beta: f64,
}

pub fn mass_functionals(v: &Family, theta: f64) -> MassFunctionals {
    MassFunctionals {
        phi: weighted_sum(v, theta, |_, x| x),
        phi_beta: weighted_sum(v, theta, |n, x| n as f64 * x),
    }
}

/// Smallest `C` with `k^(n) <= C^n` on the grid for `1 <= n <= N`.
pub fn sub_poissonian_constant(k: &Family) -> Result<f64> {
    if k.order() == 0 {
        return invalid("sub-Poissonian constant needs truncation order at least 1");
    }
    let mut c = 0.0f64;
    for n in 1..=k.order() {
        let comp = k.component(n);
        let max = comp.iter().fold(0.0f64, |m, &v| m.max(v));
        // Spectral rounding may leave entries a few ulps below zero.
        let floor = -1e-12 * max.max(f64::MIN_POSITIVE);
        if let Some(bad) = comp.iter().find(|&&v| v < floor || v.is_nan()) {
            return invalid(format!("order-{n} component has negative value {bad}"));
        }
        c = c.max(max.powf(1.0 / n as f64));
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// `||L^n v||_theta <= (2 alpha n / (e (theta - theta')))^n ||v||_theta'`.
pub fn power_bound_check(
    generator: &mut Generator<'_>,
    v: &Family,
    n: usize,
    theta_prime: f64,
    theta: f64,
) -> Result<BoundCheck> {
    if theta_prime >= theta {
        return invalid(format!("need theta' < theta, got {theta_prime} >= {theta}"));
    }
    if n == 0 {
        return invalid("power must be at least 1");
    }
    let mut w = v.clone();
    let mut next = v.clone();
    for _ in 0..n {
        generator.apply_into(&w, &mut next)?;
        std::mem::swap(&mut w, &mut next);
    }
    let lhs = norm_l1(&w, theta);
    let alpha = generator.kernel().alpha();
    let base = 2.0 * alpha * n as f64 / (std::f64::consts::E * (theta - theta_prime));
    let rhs = base.powi(n as i32) * norm_l1(v, theta_prime);
    Ok(BoundCheck {
        lhs,
        rhs,
        ok: lhs <= rhs * (1.0 + CHECK_RTOL),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominationCheck {
    /// `||B v||_theta`.
    pub b: f64,
    /// `||A v||_theta = alpha sum_n n (weighted mass of |v^(n)|)`.
    pub a: f64,
    pub ok: bool,
}

pub fn b_dominated_by_a_check(
    generator: &mut Generator<'_>,
    v: &Family,
    theta: f64,
) -> Result<DominationCheck> {
    let (av, bv) = generator.apply_parts(v)?;
    let a = norm_l1(&av, theta);
    let b = norm_l1(&bv, theta);
    Ok(DominationCheck {
        b,
        a,
        ok: b <= a * (1.0 + CHECK_RTOL),
    })
}

/// Convenience for one-off checks with a fresh generator.
pub fn b_dominated_by_a(kernel: &JumpKernel, v: &Family, theta: f64) -> Result<DominationCheck> {
    b_dominated_by_a_check(&mut Generator::new(kernel), v, theta)
}

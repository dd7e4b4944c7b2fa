//! Time evolution of correlation hierarchies: explicit RK4 and the exact
//! spectral propagator.

use crate::error::{invalid, Error, Result};
use crate::family::{CorrelationFamily, Family};
use crate::generator::Generator;
use crate::kernel::JumpKernel;
use crate::spectral::AxisConvolver;
use crate::symmetric::SymmetricGenerator;

/// RK4 refuses steps with `dt * alpha` above this value.
pub const MAX_STEP_RATE: f64 = 0.5;

/// Relative symmetry defect below which a family is integrated as symmetric.
const SYMMETRY_RTOL: f64 = 1e-13;

/// A correlation hierarchy at a point in time.
///
/// `theta` only tags the weighted norms reported for the state; the dynamics
/// do not depend on it.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyState {
    time: f64,
    family: Family,
    theta: f64,
}

impl HierarchyState {
    pub fn new(k: CorrelationFamily, theta: f64) -> Self {
        Self {
            time: 0.0,
            family: k.into_family(),
            theta,
        }
    }

    /// Any family over the whole grid, e.g. a test function evolved by the same generator.
    pub fn from_family(family: Family, time: f64, theta: f64) -> Self {
        Self {
            time,
            family,
            theta,
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn into_family(self) -> Family {
        self.family
    }

    pub fn correlation(&self) -> Result<CorrelationFamily> {
        CorrelationFamily::new(self.family.clone())
    }
}

/// Step sizes covering `[0, duration]`: all `dt` except a final partial step.
pub fn step_schedule(duration: f64, dt: f64) -> Vec<f64> {
    if duration <= 0.0 {
        return Vec::new();
    }
    let steps = ((duration / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut out = vec![dt; steps];
    out[steps - 1] = duration - (steps - 1) as f64 * dt;
    out
}

/// Advances `state` by `duration` with classical fourth-order Runge–Kutta.
pub fn evolve_rk4(
    state: &HierarchyState,
    kernel: &JumpKernel,
    duration: f64,
    dt: f64,
) -> Result<HierarchyState> {
    let mut generator = Generator::new(kernel);
    evolve_rk4_with(&mut generator, state, duration, dt)
}

pub fn evolve_rk4_with(
    generator: &mut Generator<'_>,
    state: &HierarchyState,
    duration: f64,
    dt: f64,
) -> Result<HierarchyState> {
    if !(duration.is_finite() && duration >= 0.0) {
        return invalid(format!("duration must be finite and nonnegative, got {duration}"));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return invalid(format!("time step must be positive, got {dt}"));
    }
    let alpha = generator.kernel().alpha();
    if dt * alpha > MAX_STEP_RATE {
        return invalid(format!(
            "dt * alpha = {} exceeds the stability guard {MAX_STEP_RATE}",
            dt * alpha
        ));
    }
    if duration == 0.0 {
        return Ok(state.clone());
    }

    // Symmetric families stay symmetric and are integrated in packed form.
    let family = &state.family;
    let scale = (0..=family.order()).map(|n| family.max_abs(n)).fold(0.0, f64::max);
    let (final_time, y) = if family.symmetry_defect() <= SYMMETRY_RTOL * scale {
        let mut sym = SymmetricGenerator::new(generator, family.order())?;
        let mut y = sym.pack(family);
        let t = rk4_loop(&mut y, state.time, duration, dt, |x, out| {
            sym.apply(x, out);
            Ok(())
        })?;
        (t, sym.unpack(&y, family.window().clone())?)
    } else {
        let window = family.window().clone();
        let mut y = family.components().to_vec();
        let t = rk4_loop(&mut y, state.time, duration, dt, |x, out| {
            let lk = generator.apply(&Family::from_components(window.clone(), x.to_vec())?)?;
            for (o, c) in out.iter_mut().zip(lk.components()) {
                o.copy_from_slice(c);
            }
            Ok(())
        })?;
        (t, Family::from_components(window, y)?)
    };
    Ok(HierarchyState {
        time: final_time,
        family: y,
        theta: state.theta,
    })
}

/// Classical RK4 for `y' = L y` on raw components; returns the final time.
fn rk4_loop(
    y: &mut [Vec<f64>],
    start: f64,
    duration: f64,
    dt: f64,
    mut apply: impl FnMut(&[Vec<f64>], &mut [Vec<f64>]) -> Result<()>,
) -> Result<f64> {
    let mut k1 = y.to_vec();
    let mut k2 = y.to_vec();
    let mut k3 = y.to_vec();
    let mut k4 = y.to_vec();
    let mut stage = y.to_vec();
    let mut t = start;
    let schedule = step_schedule(duration, dt);
    let last = schedule.len() - 1;
    for (step, &h) in schedule.iter().enumerate() {
        apply(y, &mut k1)?;
        lincomb(&mut stage, y, 0.5 * h, &k1);
        apply(&stage, &mut k2)?;
        lincomb(&mut stage, y, 0.5 * h, &k2);
        apply(&stage, &mut k3)?;
        lincomb(&mut stage, y, h, &k3);
        apply(&stage, &mut k4)?;
        let w = h / 6.0;
        let mut finite = true;
        for n in 0..y.len() {
            let (a, b, c, d) = (&k1[n], &k2[n], &k3[n], &k4[n]);
            for (i, v) in y[n].iter_mut().enumerate() {
                *v += w * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]);
                finite &= v.is_finite();
            }
        }
        t = if step == last { start + duration } else { t + h };
        if !finite {
            return Err(Error::Divergence { step, time: t });
        }
    }
    Ok(t)
}

/// `dst <- base + scale * dir`, componentwise.
fn lincomb(dst: &mut [Vec<f64>], base: &[Vec<f64>], scale: f64, dir: &[Vec<f64>]) {
    for ((d, b), r) in dst.iter_mut().zip(base).zip(dir) {
        for ((v, &x), &y) in d.iter_mut().zip(b).zip(r) {
            *v = x + scale * y;
        }
    }
}

/// Exact solution of the discretized hierarchy after time `t`: the one-particle
/// propagator `exp(t (a_hat - alpha))` applied along every coordinate.
pub fn exact_propagate(
    state: &HierarchyState,
    kernel: &JumpKernel,
    t: f64,
) -> Result<HierarchyState> {
    if !(t.is_finite() && t >= 0.0) {
        return invalid(format!("propagation time must be finite and nonnegative, got {t}"));
    }
    let family = &state.family;
    if family.grid() != kernel.grid() || !family.window().is_full() {
        return Err(Error::GridMismatch(
            "state must cover the kernel's whole grid".into(),
        ));
    }
    if t == 0.0 {
        return Ok(state.clone());
    }
    let mult = kernel.propagator_multiplier(t);
    let mut conv = AxisConvolver::new(kernel.grid());
    let mut out = family.clone();
    for n in 1..=family.order() {
        let mut cur = family.component(n).to_vec();
        let mut next = vec![0.0; cur.len()];
        for axis in 0..n {
            conv.apply(&cur, n, axis, &mult, &mut next, false);
            std::mem::swap(&mut cur, &mut next);
        }
        out.component_mut(n).copy_from_slice(&cur);
    }
    Ok(HierarchyState {
        time: state.time + t,
        family: out,
        theta: state.theta,
    })
}

/// The order-1 propagation of a density: `rho_t = exp(t (a * . - alpha)) rho`.
pub fn propagate_density(kernel: &JumpKernel, rho: &[f64], t: f64) -> Result<Vec<f64>> {
    let s = kernel.grid().site_count();
    if rho.len() != s {
        return invalid(format!("density has {} values for {s} sites", rho.len()));
    }
    let mult = kernel.propagator_multiplier(t);
    let mut out = vec![0.0; s];
    AxisConvolver::new(kernel.grid()).apply(rho, 1, 0, &mult, &mut out, false);
    Ok(out)
}

//! Discretized symmetric jump kernels.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::GridSpec;
use crate::spectral;

/// Gaussian tails beyond this many standard deviations must fit in half the box.
pub const GAUSSIAN_SUPPORT_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelShape {
    Gaussian { sigma: f64 },
    UniformBall { radius: f64 },
    /// Raw values per displacement site, in grid site order.
    Custom { table: Vec<f64> },
}

impl KernelShape {
    /// Characteristic width in continuum units, when the shape has one.
    pub fn width(&self) -> Option<f64> {
        match self {
            Self::Gaussian { sigma } => Some(*sigma),
            Self::UniformBall { radius } => Some(*radius),
            Self::Custom { .. } => None,
        }
    }
}

/// A symmetric nonnegative kernel `a(delta)` on the displacement sites of a grid.
///
/// `alpha = h^d sum a` is the total jump rate of one particle, and the
/// multiplier is the DFT of `h^d a`, so that `multiplier[0] = alpha`.
#[derive(Debug, Clone)]
pub struct JumpKernel {
    grid: GridSpec,
    values: Vec<f64>,
    alpha: f64,
    multiplier: Vec<Complex64>,
    multiplier_re: Vec<f64>,
}

pub fn make_kernel(shape: &KernelShape, alpha_target: f64, grid: GridSpec) -> Result<JumpKernel> {
    if !(alpha_target.is_finite() && alpha_target > 0.0) {
        return invalid(format!("alpha must be positive, got {alpha_target}"));
    }
    let half_box = 0.5 * grid.extent();
    let s = grid.site_count();
    let raw: Vec<f64> = match shape {
        KernelShape::Gaussian { sigma } => {
            if !(sigma.is_finite() && *sigma > 0.0) {
                return invalid(format!("gaussian sigma must be positive, got {sigma}"));
            }
            if GAUSSIAN_SUPPORT_SIGMAS * sigma > half_box {
                return Err(Error::Aliasing(format!(
                    "gaussian with sigma {sigma} does not fit in half the box ({half_box})"
                )));
            }
            (0..s)
                .map(|d| (-grid.offset_length(d).powi(2) / (2.0 * sigma * sigma)).exp())
                .collect()
        }
        KernelShape::UniformBall { radius } => {
            if !(radius.is_finite() && *radius > 0.0) {
                return invalid(format!("ball radius must be positive, got {radius}"));
            }
            if *radius > half_box {
                return Err(Error::Aliasing(format!(
                    "ball of radius {radius} is wider than half the box ({half_box})"
                )));
            }
            let tol = 1e-12 * grid.spacing();
            (0..s)
                .map(|d| f64::from(u8::from(grid.offset_length(d) <= radius + tol)))
                .collect()
        }
        KernelShape::Custom { table } => {
            if table.len() != s {
                return invalid(format!("custom table has {} entries for {s} sites", table.len()));
            }
            table.clone()
        }
    };
    if raw.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return invalid("kernel values must be finite and nonnegative");
    }
    let symmetric: Vec<f64> = (0..s)
        .map(|d| 0.5 * (raw[d] + raw[grid.neg(d)]))
        .collect();
    let mass = grid.cell_volume() * symmetric.iter().sum::<f64>();
    if mass <= 0.0 {
        return invalid("kernel is identically zero");
    }
    let scale = alpha_target / mass;
    JumpKernel::from_table(grid, symmetric.into_iter().map(|v| v * scale).collect())
}

impl JumpKernel {
    /// Wraps a table that is already symmetric and nonnegative.
    pub fn from_table(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        let s = grid.site_count();
        if values.len() != s {
            return invalid(format!("kernel table has {} entries for {s} sites", values.len()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return invalid("kernel values must be finite and nonnegative");
        }
        if (0..s).any(|d| values[d] != values[grid.neg(d)]) {
            return invalid("kernel table is not symmetric under negation");
        }
        let alpha = grid.cell_volume() * values.iter().sum::<f64>();
        if alpha <= 0.0 {
            return invalid("kernel is identically zero");
        }
        let weighted: Vec<f64> = values.iter().map(|v| v * grid.cell_volume()).collect();
        let multiplier = spectral::dft(&grid, &weighted);
        let multiplier_re = multiplier.iter().map(|c| c.re).collect();
        Ok(Self {
            grid,
            values,
            alpha,
            multiplier,
            multiplier_re,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn multiplier(&self) -> &[Complex64] {
        &self.multiplier
    }

    /// Real part of the multiplier; the imaginary part vanishes up to rounding.
    pub fn multiplier_re(&self) -> &[f64] {
        &self.multiplier_re
    }

    /// Dense periodic convolution matrix `C[x][y] = h^d a(x - y)`, row-major.
    pub fn convolution_matrix(&self) -> Vec<f64> {
        let s = self.grid.site_count();
        let hd = self.grid.cell_volume();
        let mut out = vec![0.0; s * s];
        for x in 0..s {
            for y in 0..s {
                out[x * s + y] = hd * self.values[self.grid.sub(x, y)];
            }
        }
        out
    }

    /// One-particle propagator multiplier `exp(t (a_hat - alpha))`.
    pub fn propagator_multiplier(&self, t: f64) -> Vec<f64> {
        self.multiplier_re
            .iter()
            .map(|&a| (t * (a - self.alpha)).exp())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_ball_is_flat_and_normalized() {
        let grid = GridSpec::with_extent(1, 32, 1.0).unwrap();
        let k = make_kernel(&KernelShape::UniformBall { radius: 0.1 }, 1.0, grid).unwrap();
        let inside: Vec<f64> = k.values().iter().copied().filter(|&v| v > 0.0).collect();
        // offsets -3..=3 cells of width 1/32 lie within 0.1
        assert_eq!(inside.len(), 7);
        assert!(inside.iter().all(|&v| v == inside[0]));
        assert!((inside.iter().sum::<f64>() * grid.cell_volume() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_zero_frequency_is_alpha() {
        let grid = GridSpec::with_extent(1, 64, 1.0).unwrap();
        let k = make_kernel(&KernelShape::Gaussian { sigma: 0.1 }, 2.0, grid).unwrap();
        assert!((k.multiplier()[0].re - 2.0).abs() < 1e-14);
        assert!((k.alpha() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn multiplier_real_and_peaked_at_zero() {
        let grid = GridSpec::with_extent(2, 8, 1.0).unwrap();
        let table: Vec<f64> = (0..64).map(|i| ((i * 7919) % 13) as f64).collect();
        for shape in [
            KernelShape::Gaussian { sigma: 0.1 },
            KernelShape::UniformBall { radius: 0.3 },
            KernelShape::Custom { table },
        ] {
            let k = make_kernel(&shape, 1.5, grid).unwrap();
            let peak = k.multiplier()[0].re;
            assert!((peak - k.alpha()).abs() < 1e-13);
            for c in k.multiplier() {
                assert!(c.im.abs() < 1e-12);
                assert!(c.re <= peak + 1e-12);
                assert!(c.norm() <= k.alpha() + 1e-12);
            }
            for d in 0..64 {
                assert_eq!(k.values()[d], k.values()[grid.neg(d)]);
            }
        }
    }

    #[test]
    fn rejects_aliasing_and_bad_parameters() {
        let grid = GridSpec::with_extent(1, 64, 1.0).unwrap();
        let wide = make_kernel(&KernelShape::Gaussian { sigma: 0.2 }, 1.0, grid);
        assert!(matches!(wide, Err(Error::Aliasing(_))));
        let wide = make_kernel(&KernelShape::UniformBall { radius: 0.6 }, 1.0, grid);
        assert!(matches!(wide, Err(Error::Aliasing(_))));
        assert!(make_kernel(&KernelShape::Gaussian { sigma: 0.1 }, 0.0, grid).is_err());
        let zero = KernelShape::Custom { table: vec![0.0; 64] };
        assert!(make_kernel(&zero, 1.0, grid).is_err());
    }

    #[test]
    fn custom_table_is_symmetrized() {
        let grid = GridSpec::new(1, 4, 1.0).unwrap();
        let k = make_kernel(&KernelShape::Custom { table: vec![0.0, 2.0, 0.0, 0.0] }, 2.0, grid)
            .unwrap();
        assert_eq!(k.values(), &[0.0, 1.0, 0.0, 1.0]);
    }
}

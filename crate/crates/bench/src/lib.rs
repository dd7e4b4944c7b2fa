//! Fixtures shared by the benchmarks.

use freejump::{make_kernel, poisson_family, GridSpec, HierarchyState, JumpKernel, KernelShape};

/// Unit box with `m^d` sites and a Gaussian kernel of width 0.05, `alpha = 1`.
pub fn unit_box(d: usize, m: usize) -> (GridSpec, JumpKernel) {
    let grid = GridSpec::with_extent(d, m, 1.0).expect("valid grid");
    let kernel = make_kernel(&KernelShape::Gaussian { sigma: 0.05 }, 1.0, grid).expect("kernel fits");
    (grid, kernel)
}

/// `kappa (1 + 3 exp(-(x - 1/2)^2 / (2 * 0.08^2)))` along the first axis.
pub fn bump_density(grid: GridSpec, kappa: f64) -> Vec<f64> {
    (0..grid.site_count())
        .map(|s| {
            let x = grid.cell_center(s)[0];
            kappa * (1.0 + 3.0 * (-(x - 0.5).powi(2) / (2.0 * 0.08f64.powi(2))).exp())
        })
        .collect()
}

pub fn bump_state(grid: GridSpec, kappa: f64, order: usize) -> HierarchyState {
    let family = poisson_family(grid, &bump_density(grid, kappa), order).expect("state fits");
    HierarchyState::new(family, 0.0)
}

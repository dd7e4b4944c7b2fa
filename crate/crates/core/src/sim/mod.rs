//! Kinetic Monte Carlo for the free jump process in a periodic box.
//!
//! With `N` particles the next jump happens after an `Exp(N alpha)` waiting
//! time; a uniformly chosen particle then moves by a displacement drawn from
//! the kernel table `a / alpha`. The particle lands uniformly inside the target
//! cell, so binned counts follow exactly the lattice dynamics the hierarchy
//! solver integrates.

mod ensemble;
mod estimate;

pub use ensemble::{replica_seed, EnsembleSpec};
pub use estimate::{compare_with_hierarchy, estimate_correlations, ComparisonReport, EmpiricalCorrelation};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Exp, Poisson};

use crate::error::{invalid, Error, Result};
use crate::grid::GridSpec;
use crate::kernel::JumpKernel;

/// Finite configuration of continuum points in `[0, L)^d` with its own clock and generator.
#[derive(Debug, Clone)]
pub struct ParticleSystem {
    grid: GridSpec,
    /// Flat coordinates, `d` per particle.
    positions: Vec<f64>,
    jump_counts: Vec<u64>,
    clock: f64,
    rng: ChaCha8Rng,
}

impl ParticleSystem {
    pub fn new(grid: GridSpec, positions: Vec<f64>, seed: u64) -> Result<Self> {
        let d = grid.dimension();
        if !positions.len().is_multiple_of(d) {
            return invalid("position list length is not a multiple of the dimension");
        }
        let extent = grid.extent();
        if positions.iter().any(|x| !(0.0..extent).contains(x)) {
            return invalid("positions must lie in the box [0, L)");
        }
        let count = positions.len() / d;
        Ok(Self {
            grid,
            positions,
            jump_counts: vec![0; count],
            clock: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.jump_counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jump_counts.is_empty()
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn position(&self, i: usize) -> &[f64] {
        let d = self.grid.dimension();
        &self.positions[i * d..(i + 1) * d]
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Number of jumps each particle has made so far.
    pub fn jump_counts(&self) -> &[u64] {
        &self.jump_counts
    }

    pub fn total_jumps(&self) -> u64 {
        self.jump_counts.iter().sum()
    }

    /// Particle count per grid cell.
    pub fn cell_counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.grid.site_count()];
        for i in 0..self.len() {
            counts[self.grid.cell_of(self.position(i))] += 1;
        }
        counts
    }

    /// Runs the jump chain until the clock reads `horizon`.
    pub fn simulate(&mut self, sampler: &JumpSampler, horizon: f64) -> Result<()> {
        if sampler.grid != self.grid {
            return Err(Error::GridMismatch("kernel and particle box differ".into()));
        }
        if !(horizon.is_finite() && horizon >= self.clock) {
            return invalid(format!(
                "horizon {horizon} precedes the current clock {}",
                self.clock
            ));
        }
        let count = self.len();
        if count > 0 {
            let waiting = Exp::new(count as f64 * sampler.alpha)
                .map_err(|e| Error::InvalidInput(format!("jump rate: {e}")))?;
            loop {
                let tau: f64 = waiting.sample(&mut self.rng);
                if self.clock + tau > horizon {
                    break;
                }
                self.clock += tau;
                let i = self.rng.random_range(0..count);
                self.jump(sampler, i);
            }
        }
        self.clock = horizon;
        Ok(())
    }

    fn jump(&mut self, sampler: &JumpSampler, i: usize) {
        let d = self.grid.dimension();
        let m = self.grid.sites_per_axis() as i64;
        let h = self.grid.spacing();
        let offset = &sampler.offsets[sampler.alias.sample(&mut self.rng)];
        let point = &mut self.positions[i * d..(i + 1) * d];
        for (x, &delta) in point.iter_mut().zip(offset) {
            let cell = ((*x / h).floor() as i64).clamp(0, m - 1);
            let target = (cell + delta).rem_euclid(m);
            let u: f64 = self.rng.random();
            *x = ((target as f64 + u) * h).min(self.grid.extent() * (1.0 - f64::EPSILON));
        }
        self.jump_counts[i] += 1;
    }
}

/// Displacement sampler built from a kernel table.
#[derive(Debug, Clone)]
pub struct JumpSampler {
    grid: GridSpec,
    alpha: f64,
    offsets: Vec<Vec<i64>>,
    alias: WeightedAliasIndex<f64>,
}

impl JumpSampler {
    pub fn new(kernel: &JumpKernel) -> Result<Self> {
        let grid = *kernel.grid();
        let (offsets, weights): (Vec<_>, Vec<_>) = kernel
            .values()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(site, &v)| (grid.signed_offset(site), v))
            .unzip();
        let alias = WeightedAliasIndex::new(weights)
            .map_err(|e| Error::InvalidInput(format!("kernel table: {e}")))?;
        Ok(Self {
            grid,
            alpha: kernel.alpha(),
            offsets,
            alias,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Samples a Poisson configuration of intensity `rho` (one value per cell).
///
/// The count is Poisson with mean `h^d sum rho`; each point picks a cell with
/// probability proportional to `rho` and a uniform position inside it.
pub fn sample_initial_poisson(grid: GridSpec, rho: &[f64], seed: u64) -> Result<ParticleSystem> {
    if rho.len() != grid.site_count() {
        return invalid(format!(
            "density has {} values for {} cells",
            rho.len(),
            grid.site_count()
        ));
    }
    if rho.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return invalid("density must be finite and nonnegative");
    }
    let mut system = ParticleSystem::new(grid, Vec::new(), seed)?;
    let mean = grid.cell_volume() * rho.iter().sum::<f64>();
    if mean <= 0.0 {
        return Ok(system);
    }
    let rng = &mut system.rng;
    let poisson = Poisson::new(mean).map_err(|e| Error::InvalidInput(format!("{e}")))?;
    let count = poisson.sample(rng) as usize;
    let cells = WeightedAliasIndex::new(rho.to_vec())
        .map_err(|e| Error::InvalidInput(format!("density: {e}")))?;
    let h = grid.spacing();
    let mut positions = Vec::with_capacity(count * grid.dimension());
    for _ in 0..count {
        let cell = cells.sample(rng);
        for c in grid.coords(cell) {
            let u: f64 = rng.random();
            positions.push(((c as f64 + u) * h).min(grid.extent() * (1.0 - f64::EPSILON)));
        }
    }
    system.jump_counts = vec![0; count];
    system.positions = positions;
    Ok(system)
}

use rayon::prelude::*;

use super::{sample_initial_poisson, JumpSampler, ParticleSystem};
use crate::error::{invalid, Result};
use crate::kernel::JumpKernel;

/// Independent replicas of the jump process started from a Poisson state.
#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub replicas: usize,
    pub base_seed: u64,
    pub initial_density: Vec<f64>,
    pub kernel: JumpKernel,
    pub horizon: f64,
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replica `index`, a fixed function of the base seed.
pub fn replica_seed(base_seed: u64, index: u64) -> u64 {
    mix64(base_seed.wrapping_add(mix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15))))
}

impl EnsembleSpec {
    /// Runs all replicas to the horizon; the result is ordered by replica index
    /// whatever the thread count.
    pub fn run(&self) -> Result<Vec<ParticleSystem>> {
        if self.replicas == 0 {
            return invalid("an ensemble needs at least one replica");
        }
        let sampler = JumpSampler::new(&self.kernel)?;
        let grid = *self.kernel.grid();
        (0..self.replicas as u64)
            .into_par_iter()
            .map(|i| {
                let mut system = sample_initial_poisson(
                    grid,
                    &self.initial_density,
                    replica_seed(self.base_seed, i),
                )?;
                system.simulate(&sampler, self.horizon)?;
                Ok(system)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::kernel::{make_kernel, KernelShape};

    #[test]
    fn seeds_are_distinct_and_stable() {
        let seeds: Vec<u64> = (0..1000).map(|i| replica_seed(42, i)).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 1000);
        assert_eq!(replica_seed(42, 7), seeds[7]);
        assert_ne!(replica_seed(43, 7), seeds[7]);
    }

    #[test]
    fn zero_replicas_rejected() {
        let grid = GridSpec::with_extent(1, 8, 1.0).unwrap();
        let kernel = make_kernel(&KernelShape::Gaussian { sigma: 0.1 }, 1.0, grid).unwrap();
        let spec = EnsembleSpec {
            replicas: 0,
            base_seed: 1,
            initial_density: vec![1.0; 8],
            kernel,
            horizon: 1.0,
        };
        assert!(spec.run().is_err());
    }
}

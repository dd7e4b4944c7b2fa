//! Free jump dynamics of point configurations on a periodic grid.
//!
//! The crate discretizes the continuum to a torus grid and provides the
//! configuration algebra (Lebesgue–Poisson integrals, the K-transform, a
//! finite-window moment problem), an integrator for the hierarchy of
//! correlation functions under the free jump generator with a spectral exact
//! propagator, and a kinetic Monte Carlo simulator with empirical correlation
//! estimators.

pub mod algebra;
pub mod checks;
pub mod configuration;
pub mod error;
pub mod evolve;
pub mod family;
pub mod generator;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod moment;
pub mod sim;
mod spectral;
mod symmetric;

pub use algebra::{k_inverse, k_transform, lp_integral, norm_l1, norm_sup, pairing, poisson_family};
pub use checks::{
    b_dominated_by_a, b_dominated_by_a_check, mass_functionals, power_bound_check, sub_poissonian_constant,
    BoundCheck, DominationCheck, MassFunctionals,
};
pub use configuration::FiniteConfiguration;
pub use error::{Error, Result};
pub use evolve::{evolve_rk4, evolve_rk4_with, exact_propagate, propagate_density, HierarchyState};
pub use family::{CorrelationFamily, Family};
pub use generator::{apply_generator, ConvolutionBackend, Generator};
pub use grid::{GridSpec, Window};
pub use kernel::{make_kernel, JumpKernel, KernelShape};
pub use moment::{
    correlation_from_density, density_from_correlation, MomentCertificate, MomentRejection, MomentViolation,
    SubsetFunction, WindowDensity,
};
pub use sim::{
    compare_with_hierarchy, estimate_correlations, replica_seed, sample_initial_poisson, ComparisonReport,
    EmpiricalCorrelation, EnsembleSpec, JumpSampler, ParticleSystem,
};

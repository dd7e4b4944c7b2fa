use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ParticleSystem;
use crate::error::{invalid, Error, Result};
use crate::evolve::HierarchyState;
use crate::grid::GridSpec;

/// Pass threshold on the fraction of bins with `|z| <= 4`.
pub const PASS_FRACTION: f64 = 0.95;

/// Binned estimate of `k^(n)` over an ensemble, `n` in {1, 2}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCorrelation {
    pub grid: GridSpec,
    pub order: usize,
    pub replicas: usize,
    pub time: f64,
    /// Sum over replicas of the per-bin point or ordered-pair counts.
    pub counts: Vec<u64>,
    pub estimate: Vec<f64>,
    pub stderr: Vec<f64>,
}

#[derive(Clone, Copy)]
struct Moments {
    sum: u64,
    sum_sq: u128,
}

fn add_moments(mut acc: Vec<Moments>, other: Vec<Moments>) -> Vec<Moments> {
    for (a, b) in acc.iter_mut().zip(other) {
        a.sum += b.sum;
        a.sum_sq += b.sum_sq;
    }
    acc
}

/// Estimates `k^(order)` from the final states of an ensemble.
///
/// Bin statistics are accumulated in integers, so the result does not depend
/// on how the reduction is scheduled.
pub fn estimate_correlations(systems: &[ParticleSystem], order: usize) -> Result<EmpiricalCorrelation> {
    if !(1..=2).contains(&order) {
        return Err(Error::Unsupported(format!(
            "empirical correlations of order {order}; only 1 and 2 are available"
        )));
    }
    let Some(first) = systems.first() else {
        return invalid("no replicas to estimate from");
    };
    let grid = *first.grid();
    let time = first.clock();
    if systems.iter().any(|s| *s.grid() != grid || s.clock() != time) {
        return Err(Error::GridMismatch(
            "replicas differ in box or clock".into(),
        ));
    }
    let sites = grid.site_count();
    let bins = sites.pow(order as u32);
    let zero = vec![Moments { sum: 0, sum_sq: 0 }; bins];
    let totals = systems
        .par_iter()
        .fold(
            || zero.clone(),
            |mut acc, system| {
                let counts = system.cell_counts();
                let mut record = |bin: usize, c: u64| {
                    acc[bin].sum += c;
                    acc[bin].sum_sq += u128::from(c) * u128::from(c);
                };
                if order == 1 {
                    for (a, &n) in counts.iter().enumerate() {
                        record(a, u64::from(n));
                    }
                } else {
                    let occupied: Vec<usize> = (0..sites).filter(|&a| counts[a] > 0).collect();
                    for &a in &occupied {
                        for &b in &occupied {
                            let (na, nb) = (u64::from(counts[a]), u64::from(counts[b]));
                            let pairs = if a == b { na * (na - 1) } else { na * nb };
                            record(a * sites + b, pairs);
                        }
                    }
                }
                acc
            },
        )
        .reduce(|| zero.clone(), add_moments);

    let r = systems.len() as u128;
    let scale = grid.cell_volume().powi(order as i32);
    let mut estimate = Vec::with_capacity(bins);
    let mut stderr = Vec::with_capacity(bins);
    for m in &totals {
        estimate.push(m.sum as f64 / r as f64 / scale);
        if r < 2 {
            stderr.push(0.0);
        } else {
            // R * sum_sq - sum^2 is exact in integers and never negative.
            let spread = r * m.sum_sq - u128::from(m.sum) * u128::from(m.sum);
            let var_of_mean = spread as f64 / (r * r * (r - 1)) as f64;
            stderr.push(var_of_mean.sqrt() / scale);
        }
    }
    Ok(EmpiricalCorrelation {
        grid,
        order,
        replicas: systems.len(),
        time,
        counts: totals.iter().map(|m| m.sum).collect(),
        estimate,
        stderr,
    })
}

/// Per-bin z-scores of an estimate against a reference tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub order: usize,
    pub time: f64,
    pub replicas: usize,
    pub bins: usize,
    pub max_abs_z: f64,
    pub frac_within_2: f64,
    pub frac_within_4: f64,
    pub pass: bool,
    #[serde(skip)]
    pub reference: Vec<f64>,
    #[serde(skip)]
    pub z_scores: Vec<f64>,
}

fn z_score(estimate: f64, reference: f64, stderr: f64) -> f64 {
    let diff = estimate - reference;
    if stderr > 0.0 {
        diff / stderr
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

impl ComparisonReport {
    /// Compares against a reference tensor laid out like `emp.estimate`.
    pub fn against(emp: &EmpiricalCorrelation, reference: &[f64]) -> Result<Self> {
        if reference.len() != emp.estimate.len() {
            return Err(Error::GridMismatch(format!(
                "reference has {} bins, estimate has {}",
                reference.len(),
                emp.estimate.len()
            )));
        }
        let z_scores: Vec<f64> = emp
            .estimate
            .iter()
            .zip(reference)
            .zip(&emp.stderr)
            .map(|((&e, &k), &s)| z_score(e, k, s))
            .collect();
        let bins = z_scores.len();
        let within = |c: f64| z_scores.iter().filter(|z| z.abs() <= c).count() as f64 / bins as f64;
        let frac_within_4 = within(4.0);
        Ok(Self {
            order: emp.order,
            time: emp.time,
            replicas: emp.replicas,
            bins,
            max_abs_z: z_scores.iter().fold(0.0, |m: f64, z| m.max(z.abs())),
            frac_within_2: within(2.0),
            frac_within_4,
            pass: frac_within_4 >= PASS_FRACTION,
            reference: reference.to_vec(),
            z_scores,
        })
    }

    /// CSV with one row per bin: cell indices, estimate, stderr, reference, z.
    pub fn to_csv(&self, emp: &EmpiricalCorrelation) -> String {
        let sites = emp.grid.site_count();
        let mut out = String::from(if emp.order == 1 {
            "cell,estimate,stderr,reference,z\n"
        } else {
            "cell_a,cell_b,estimate,stderr,reference,z\n"
        });
        for (bin, z) in self.z_scores.iter().enumerate() {
            let cells = if emp.order == 1 {
                bin.to_string()
            } else {
                format!("{},{}", bin / sites, bin % sites)
            };
            out.push_str(&format!(
                "{cells},{:e},{:e},{:e},{:e}\n",
                emp.estimate[bin], emp.stderr[bin], self.reference[bin], z
            ));
        }
        out
    }
}

/// Compares an estimate with the hierarchy solution at the same time.
pub fn compare_with_hierarchy(emp: &EmpiricalCorrelation, state: &HierarchyState) -> Result<ComparisonReport> {
    let family = state.family();
    if *family.grid() != emp.grid || !family.window().is_full() {
        return Err(Error::GridMismatch(
            "hierarchy state is not on the estimator grid".into(),
        ));
    }
    if family.order() < emp.order {
        return Err(Error::GridMismatch(format!(
            "hierarchy truncated at order {} below estimator order {}",
            family.order(),
            emp.order
        )));
    }
    let tol = 1e-9 * emp.time.abs().max(1.0);
    if (state.time() - emp.time).abs() > tol {
        return Err(Error::GridMismatch(format!(
            "hierarchy time {} differs from ensemble time {}",
            state.time(),
            emp.time
        )));
    }
    ComparisonReport::against(emp, family.component(emp.order))
}

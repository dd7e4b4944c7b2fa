//! The four subcommands. Each writes its artifacts through [`Run`], which keeps
//! the output inventory and stage timings for the manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use freejump::checks::{b_dominated_by_a_check, mass_functionals, power_bound_check};
use freejump::io::{EstimateRecord, Nested, SnapshotRecord};
use freejump::moment::POSITIVITY_RTOL;
use freejump::{
    compare_with_hierarchy, estimate_correlations, evolve_rk4, exact_propagate, norm_l1, norm_sup, poisson_family,
    ComparisonReport, EnsembleSpec, Error, Family, Generator, GridSpec, HierarchyState, KernelShape, MomentCertificate,
    SubsetFunction, Window,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{CompareMode, ConfigError, ExperimentConfig};

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Divergence(String),
    Verdict(String),
    Checks(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Io(_) => 1,
            Self::Config(_) => 2,
            Self::Divergence(_) => 3,
            Self::Verdict(_) => 4,
            Self::Checks(_) => 5,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Self::Config(m) | Self::Divergence(m) | Self::Verdict(m) | Self::Checks(m) | Self::Io(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::Config(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Divergence { .. } => Self::Divergence(e.to_string()),
            Error::Json(_) => Self::Io(e.to_string()),
            other => Self::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

type Result<T> = std::result::Result<T, Failure>;

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

/// Output directory, written files in order, and stage timings.
pub struct Run {
    pub out: PathBuf,
    pub quiet: bool,
    pub outputs: Vec<String>,
    pub timings: Vec<Timing>,
}

impl Run {
    pub fn new(out: PathBuf, quiet: bool) -> Self {
        Self {
            out,
            quiet,
            outputs: Vec::new(),
            timings: Vec::new(),
        }
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        fs::write(self.out.join(name), contents)
            .map_err(|e| Failure::Io(format!("writing {}: {e}", self.out.join(name).display())))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f(self);
        self.timings.push(Timing {
            stage: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    pub fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn json_line(value: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string(value).map_err(|e| Failure::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn evolve(cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let grid = cfg.grid()?;
    let (kernel, _) = cfg.kernel()?;
    let rho = cfg.initial_density()?;
    let hier = cfg.hierarchy()?;
    let time = cfg.time()?;
    let state0 = HierarchyState::new(poisson_family(grid, &rho, hier.n)?, hier.theta);
    let times: Vec<f64> = (0..=time.snapshots)
        .map(|j| time.t * j as f64 / time.snapshots as f64)
        .collect();

    let mut rk_lines = String::new();
    let mut exact_lines = String::new();
    let mut divergence = String::from("t,order,sup_error\n");
    let mut norms = String::from("t,method,norm_sup,norm_l1\n");
    run.stage("integrate", |run| {
        let mut rk = state0.clone();
        for (j, &t) in times.iter().enumerate() {
            if j > 0 {
                rk = evolve_rk4(&rk, &kernel, t - times[j - 1], time.dt)?;
            }
            let exact = exact_propagate(&state0, &kernel, t)?;
            rk_lines.push_str(&json_line(&SnapshotRecord::new(j, t, rk.family())?)?);
            exact_lines.push_str(&json_line(&SnapshotRecord::new(j, t, exact.family())?)?);
            let by_order = rk.family().sup_diff_by_order(exact.family())?;
            for (n, err) in by_order.iter().enumerate().skip(1) {
                writeln!(divergence, "{t},{n},{err:e}").unwrap();
            }
            for (method, s) in [("rk4", &rk), ("exact", &exact)] {
                let f = s.family();
                writeln!(norms, "{t},{method},{:e},{:e}", norm_sup(f, hier.theta), norm_l1(f, hier.theta)).unwrap();
            }
            run.note(format!("t = {t}: max sup error {:e}", by_order.iter().cloned().fold(0.0, f64::max)));
        }
        Ok(())
    })?;
    run.stage("write", |run| {
        run.write("trajectory_rk4.jsonl", &rk_lines)?;
        run.write("trajectory_exact.jsonl", &exact_lines)?;
        run.write("divergence.csv", &divergence)?;
        run.write("norms.csv", &norms)
    })
}

pub fn simulate(cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let grid = cfg.grid()?;
    let (kernel, _) = cfg.kernel()?;
    let rho = cfg.initial_density()?;
    let sim = cfg.sim()?;
    let mut orders = sim.orders.clone();
    orders.sort_unstable();
    orders.dedup();
    let max_order = *orders.last().expect("validated nonempty");

    let spec = EnsembleSpec {
        replicas: sim.replicas,
        base_seed: sim.seed,
        initial_density: rho.clone(),
        kernel: kernel.clone(),
        horizon: sim.t,
    };
    let systems = run.stage("ensemble", |run| {
        run.note(format!("running {} replicas to T = {}", sim.replicas, sim.t));
        Ok(spec.run()?)
    })?;
    let reference = match sim.compare {
        CompareMode::Exact => Some(run.stage("reference", |_| {
            let s0 = HierarchyState::new(poisson_family(grid, &rho, max_order)?, 0.0);
            Ok(exact_propagate(&s0, &kernel, sim.t)?)
        })?),
        _ => None,
    };

    let mut failed = Vec::new();
    run.stage("estimate", |run| {
        for &n in &orders {
            let emp = estimate_correlations(&systems, n)?;
            run.write(&format!("estimate_k{n}.json"), json_line(&EstimateRecord::from_estimate(&emp))?)?;
            let report = match (sim.compare, &reference) {
                (CompareMode::Exact, Some(state)) => compare_with_hierarchy(&emp, state)?,
                (CompareMode::SelfCheck, _) => ComparisonReport::against(&emp, &emp.estimate)?,
                _ => continue,
            };
            run.note(format!(
                "order {n}: {:.1}% of {} bins within 4 se, max |z| = {:.3}, {}",
                100.0 * report.frac_within_4,
                report.bins,
                report.max_abs_z,
                if report.pass { "pass" } else { "FAIL" }
            ));
            if !report.pass {
                failed.push(n);
            }
            run.write(&format!("comparison_k{n}.json"), json_line(&report)?)?;
            run.write(&format!("zscores_k{n}.csv"), report.to_csv(&emp))?;
        }
        if sim.trajectory_summaries {
            let mut csv = String::from("replica,particles,jumps,clock\n");
            for (i, s) in systems.iter().enumerate() {
                writeln!(csv, "{i},{},{},{}", s.len(), s.total_jumps(), s.clock()).unwrap();
            }
            run.write("replicas.csv", csv)?;
        }
        Ok(())
    })?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verdict(format!("comparison verdict failed for orders {failed:?}")))
    }
}

struct Row {
    name: String,
    lhs: f64,
    rhs: f64,
    ok: bool,
}

fn window_of(m: usize) -> Result<Window> {
    let grid = GridSpec::new(1, m.max(2), 1.0)?;
    Ok(Window::new(grid, (0..m).collect())?)
}

fn certify(name: String, k: &SubsetFunction) -> Result<Row> {
    let scale = k.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let row = match freejump::density_from_correlation(k)? {
        MomentCertificate::Certified(mu) => Row {
            name,
            lhs: mu.weights().iter().cloned().fold(f64::INFINITY, f64::min),
            rhs: -POSITIVITY_RTOL * scale,
            ok: true,
        },
        MomentCertificate::Rejected(r) => {
            let subsets: Vec<String> = r
                .violations
                .iter()
                .map(|v| format!("{{{}}}", v.subset.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")))
                .collect();
            Row {
                name: format!("{name}/violating={}", subsets.join("")),
                lhs: r.violations[0].weight,
                rhs: -r.tolerance,
                ok: false,
            }
        }
    };
    Ok(row)
}

pub fn checks(cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let grid = cfg.grid()?;
    let (kernel, _) = cfg.kernel()?;
    let c = cfg.checks()?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut generator = Generator::new(&kernel);
    let window = Window::full(grid);
    let mut rows = Vec::new();

    run.stage("checks", |run| {
        for battery in &c.battery {
            run.note(format!("battery {battery}"));
            match battery.as_str() {
                "mass" => {
                    for trial in 0..c.trials {
                        let v = Family::random_symmetric(window.clone(), c.max_order, -1.0, 1.0, false, &mut rng)?;
                        let lv = generator.apply(&v)?;
                        let (av, _) = generator.apply_parts(&v)?;
                        for theta in [-1.0, 0.0, 1.0] {
                            let m = mass_functionals(&lv, theta);
                            let bound = 1e-12 * norm_l1(&av, theta);
                            for (what, value) in [("phi", m.phi), ("phi_beta", m.phi_beta)] {
                                rows.push(Row {
                                    name: format!("mass_{what}/{trial}/theta={theta}"),
                                    lhs: value.abs(),
                                    rhs: bound,
                                    ok: value.abs() <= bound,
                                });
                            }
                        }
                    }
                }
                "domination" => {
                    for trial in 0..c.trials {
                        let v = Family::random_symmetric(window.clone(), c.max_order, -1.0, 1.0, false, &mut rng)?;
                        for theta in [-1.0, 0.0, 1.0] {
                            let d = b_dominated_by_a_check(&mut generator, &v, theta)?;
                            rows.push(Row {
                                name: format!("domination/{trial}/theta={theta}"),
                                lhs: d.b,
                                rhs: d.a,
                                ok: d.ok,
                            });
                            let e = b_dominated_by_a_check(&mut generator, &v.map(f64::abs), theta)?;
                            let gap = (e.b - e.a).abs();
                            rows.push(Row {
                                name: format!("domination_equality/{trial}/theta={theta}"),
                                lhs: gap,
                                rhs: 1e-12 * e.a,
                                ok: gap <= 1e-12 * e.a,
                            });
                        }
                    }
                }
                "power" => {
                    for trial in 0..c.trials {
                        let v = Family::random_symmetric(window.clone(), c.max_order, -1.0, 1.0, false, &mut rng)?;
                        for n in 1..=5 {
                            for gap in [0.5, 1.0] {
                                let b = power_bound_check(&mut generator, &v, n, 0.0, gap)?;
                                rows.push(Row {
                                    name: format!("power/{trial}/n={n}/gap={gap}"),
                                    lhs: b.lhs,
                                    rhs: b.rhs,
                                    ok: b.ok,
                                });
                            }
                        }
                    }
                }
                "moment" => {
                    for m in 1..=12 {
                        for i in 1..=9 {
                            let kappa = i as f64 / 10.0;
                            let k = SubsetFunction::from_fn(window_of(m)?, |eta| kappa.powi(eta.len() as i32))?;
                            rows.push(certify(format!("moment_product/m={m}/kappa={kappa}"), &k)?);
                        }
                    }
                }
                _ => unreachable!("battery names are validated"),
            }
        }
        for (i, fixture) in c.moment_fixtures.iter().enumerate() {
            let m = fixture.values.len().trailing_zeros() as usize;
            let k = SubsetFunction::new(window_of(m)?, fixture.values.clone())?;
            rows.push(certify(format!("moment_fixture/{i}"), &k)?);
        }
        Ok(())
    })?;

    let mut csv = String::from("name,lhs,rhs,ok\n");
    for r in &rows {
        writeln!(csv, "{},{:e},{:e},{}", r.name, r.lhs, r.rhs, r.ok).unwrap();
    }
    run.write("checks.csv", csv)?;
    let failed: Vec<&str> = rows.iter().filter(|r| !r.ok).map(|r| r.name.as_str()).collect();
    run.note(format!("{} checks, {} failed", rows.len(), failed.len()));
    match failed.as_slice() {
        [] => Ok(()),
        [first, ..] => Err(Failure::Checks(format!("{} checks failed, first: {first}", failed.len()))),
    }
}

#[derive(Serialize)]
struct KernelRecord<'a> {
    grid: GridSpec,
    #[serde(flatten)]
    shape: &'a KernelShape,
    alpha: f64,
    values: Nested,
}

pub fn kernel_make(cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let (kernel, shape) = cfg.kernel()?;
    let grid = *kernel.grid();
    let record = KernelRecord {
        grid,
        shape: &shape,
        alpha: kernel.alpha(),
        values: Nested::from_flat(kernel.values(), grid.sites_per_axis(), grid.dimension()),
    };
    run.note(format!("kernel with alpha = {}", kernel.alpha()));
    run.write("kernel.json", json_line(&record)?)
}

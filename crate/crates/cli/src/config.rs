//! Experiment configuration: a TOML document with typed, validated sections.

use std::path::PathBuf;

use freejump::family::{component_len, DEFAULT_ENTRY_CAP};
use freejump::{make_kernel, GridSpec, JumpKernel, KernelShape};
use serde::{Deserialize, Serialize};

/// The box must be at least this many kernel widths across.
pub const MIN_BOX_WIDTHS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hierarchy: Option<HierarchyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<ChecksConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub d: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    /// `gaussian`, `uniform-ball` or `custom`.
    pub shape: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<f64>>,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    /// `uniform` or `gaussian-bump`.
    pub shape: String,
    pub kappa: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    /// Bump center; defaults to the middle of the box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default = "default_width")]
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchyConfig {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default)]
    pub theta: f64,
    #[serde(default = "default_max_entries")]
    pub max_entries: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub t: f64,
    pub dt: f64,
    /// Number of equal intervals between recorded snapshots.
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompareMode {
    /// Against the exact propagation of the Poisson initial state.
    Exact,
    /// Against the estimate itself; a smoke test of the pipeline.
    #[serde(rename = "self")]
    SelfCheck,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub replicas: usize,
    pub seed: u64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(default = "default_orders")]
    pub orders: Vec<usize>,
    #[serde(default = "default_compare")]
    pub compare: CompareMode,
    #[serde(default)]
    pub trajectory_summaries: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    /// Any of `mass`, `domination`, `power`, `moment`.
    #[serde(default = "default_battery")]
    pub battery: Vec<String>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_max_order")]
    pub max_order: usize,
    #[serde(default)]
    pub moment_fixtures: Vec<MomentFixture>,
}

/// A correlation table on an `m`-site window, indexed by subset bitmask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentFixture {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_output")]
    pub path: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { path: default_output() }
    }
}

fn default_amplitude() -> f64 {
    3.0
}
fn default_width() -> f64 {
    0.08
}
fn default_max_entries() -> usize {
    DEFAULT_ENTRY_CAP
}
fn default_snapshots() -> usize {
    10
}
fn default_orders() -> Vec<usize> {
    vec![1, 2]
}
fn default_compare() -> CompareMode {
    CompareMode::Exact
}
fn default_battery() -> Vec<String> {
    ["mass", "domination", "power", "moment"].map(String::from).to_vec()
}
fn default_trials() -> usize {
    100
}
fn default_max_order() -> usize {
    3
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

pub const BATTERIES: [&str; 4] = ["mass", "domination", "power", "moment"];

/// A configuration problem; maps to exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

type Result<T> = std::result::Result<T, ConfigError>;

fn bad<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError(msg.into()))
}

fn section<'a, T>(value: &'a Option<T>, name: &str) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| ConfigError(format!("config section [{name}] is required for this command")))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ConfigError(format!("invalid config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let g = section(&self.grid, "grid")?;
        GridSpec::new(g.d, g.m, g.h).map_err(|e| ConfigError(format!("[grid]: {e}")))
    }

    pub fn kernel(&self) -> Result<(JumpKernel, KernelShape)> {
        let grid = self.grid()?;
        let k = section(&self.kernel, "kernel")?;
        let shape = k.shape()?;
        if let Some(width) = shape.width() {
            if grid.extent() < MIN_BOX_WIDTHS * width {
                return bad(format!(
                    "[kernel]: box extent {} is below {MIN_BOX_WIDTHS} kernel widths ({width})",
                    grid.extent()
                ));
            }
        }
        let kernel = make_kernel(&shape, k.alpha, grid).map_err(|e| ConfigError(format!("[kernel]: {e}")))?;
        Ok((kernel, shape))
    }

    pub fn initial_density(&self) -> Result<Vec<f64>> {
        let grid = self.grid()?;
        section(&self.initial, "initial")?.density(grid)
    }

    pub fn hierarchy(&self) -> Result<HierarchyConfig> {
        let h = *section(&self.hierarchy, "hierarchy")?;
        if h.n == 0 {
            return bad("[hierarchy]: N must be at least 1");
        }
        if !h.theta.is_finite() {
            return bad("[hierarchy]: theta must be finite");
        }
        let sites = self.grid()?.site_count();
        component_len(sites, h.n, h.max_entries).map_err(|e| ConfigError(format!("[hierarchy]: {e}")))?;
        Ok(h)
    }

    pub fn time(&self) -> Result<TimeConfig> {
        let t = *section(&self.time, "time")?;
        if !(t.t.is_finite() && t.t >= 0.0) {
            return bad(format!("[time]: T must be finite and nonnegative, got {}", t.t));
        }
        if !(t.dt.is_finite() && t.dt > 0.0) {
            return bad(format!("[time]: dt must be positive, got {}", t.dt));
        }
        if t.snapshots == 0 {
            return bad("[time]: snapshots must be at least 1");
        }
        Ok(t)
    }

    pub fn sim(&self) -> Result<SimConfig> {
        let s = section(&self.sim, "sim")?.clone();
        if s.replicas == 0 {
            return bad("[sim]: replicas must be at least 1");
        }
        if s.replicas < 2 {
            return bad("[sim]: standard errors need at least 2 replicas");
        }
        if !(s.t.is_finite() && s.t >= 0.0) {
            return bad(format!("[sim]: T must be finite and nonnegative, got {}", s.t));
        }
        if s.orders.is_empty() || s.orders.iter().any(|&n| !(1..=2).contains(&n)) {
            return bad("[sim]: orders must be a nonempty subset of [1, 2]");
        }
        Ok(s)
    }

    pub fn checks(&self) -> Result<ChecksConfig> {
        let c = section(&self.checks, "checks")?.clone();
        if let Some(b) = c.battery.iter().find(|b| !BATTERIES.contains(&b.as_str())) {
            return bad(format!("[checks]: unknown battery {b:?}, expected one of {BATTERIES:?}"));
        }
        if c.max_order == 0 {
            return bad("[checks]: max_order must be at least 1");
        }
        for (i, f) in c.moment_fixtures.iter().enumerate() {
            let n = f.values.len();
            if n < 2 || !n.is_power_of_two() {
                return bad(format!("[checks]: moment fixture {i} needs 2^m values, got {n}"));
            }
        }
        Ok(c)
    }

    /// Applies the `--seed` override to every seeded section.
    pub fn override_seed(&mut self, seed: u64) {
        if let Some(s) = &mut self.sim {
            s.seed = seed;
        }
        if let Some(c) = &mut self.checks {
            c.seed = seed;
        }
    }
}

impl KernelConfig {
    fn shape(&self) -> Result<KernelShape> {
        let extra = |allowed: &str| {
            let given = [("sigma", self.sigma.is_some()), ("radius", self.radius.is_some()), ("table", self.table.is_some())];
            given
                .iter()
                .find(|(name, set)| *set && *name != allowed)
                .map(|(name, _)| ConfigError(format!("[kernel]: key {name} does not apply to shape {:?}", self.shape)))
        };
        let missing = |key: &str| ConfigError(format!("[kernel]: shape {:?} needs key {key}", self.shape));
        let shape = match self.shape.as_str() {
            "gaussian" => KernelShape::Gaussian { sigma: self.sigma.ok_or_else(|| missing("sigma"))? },
            "uniform-ball" => KernelShape::UniformBall { radius: self.radius.ok_or_else(|| missing("radius"))? },
            "custom" => KernelShape::Custom { table: self.table.clone().ok_or_else(|| missing("table"))? },
            other => return bad(format!("[kernel]: unknown shape {other:?}")),
        };
        let key = match shape {
            KernelShape::Gaussian { .. } => "sigma",
            KernelShape::UniformBall { .. } => "radius",
            KernelShape::Custom { .. } => "table",
        };
        match extra(key) {
            Some(e) => Err(e),
            None => Ok(shape),
        }
    }
}

impl InitialConfig {
    /// `rho(x) = kappa (1 + amplitude exp(-|x - center|^2 / (2 width^2)))`,
    /// with the minimum-image distance on the torus.
    pub fn density(&self, grid: GridSpec) -> Result<Vec<f64>> {
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return bad(format!("[initial]: kappa must be finite and nonnegative, got {}", self.kappa));
        }
        let sites = grid.site_count();
        match self.shape.as_str() {
            "uniform" => Ok(vec![self.kappa; sites]),
            "gaussian-bump" => {
                if !(self.width.is_finite() && self.width > 0.0) {
                    return bad("[initial]: width must be positive");
                }
                if !(self.amplitude.is_finite() && self.amplitude >= -1.0) {
                    return bad("[initial]: amplitude below -1 gives a negative density");
                }
                let l = grid.extent();
                let center = self.center.clone().unwrap_or_else(|| vec![0.5 * l; grid.dimension()]);
                if center.len() != grid.dimension() {
                    return bad(format!("[initial]: center has {} coordinates for d = {}", center.len(), grid.dimension()));
                }
                Ok((0..sites)
                    .map(|s| {
                        let r2: f64 = grid
                            .cell_center(s)
                            .iter()
                            .zip(&center)
                            .map(|(x, c)| {
                                let d = (x - c).rem_euclid(l);
                                d.min(l - d).powi(2)
                            })
                            .sum();
                        self.kappa * (1.0 + self.amplitude * (-r2 / (2.0 * self.width * self.width)).exp())
                    })
                    .collect())
            }
            other => bad(format!("[initial]: unknown shape {other:?}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[grid]
d = 1
M = 16
h = 0.0625

[kernel]
shape = "gaussian"
sigma = 0.05
alpha = 1.0
"#;

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::parse(&format!("{BASE}\n[extra]\nx = 1\n")).is_err());
        assert!(ExperimentConfig::parse(&BASE.replace("alpha", "beta")).is_err());
    }

    #[test]
    fn kernel_keys_must_match_shape() {
        let cfg = ExperimentConfig::parse(&BASE.replace("sigma = 0.05", "sigma = 0.05\nradius = 0.1")).unwrap();
        assert!(cfg.kernel().unwrap_err().0.contains("radius"));
    }

    #[test]
    fn narrow_box_rejected() {
        let cfg = ExperimentConfig::parse(&BASE.replace("sigma = 0.05", "sigma = 0.11")).unwrap();
        assert!(cfg.kernel().unwrap_err().0.contains("kernel widths"));
    }

    #[test]
    fn resolved_echo_round_trips() {
        let cfg = ExperimentConfig::parse(&format!("{BASE}\n[hierarchy]\nN = 2\n")).unwrap();
        let echo = cfg.to_toml();
        assert!(echo.contains("max_entries"));
        assert_eq!(ExperimentConfig::parse(&echo).unwrap(), cfg);
    }

    #[test]
    fn bump_peaks_at_center() {
        let init = InitialConfig {
            shape: "gaussian-bump".into(),
            kappa: 2.0,
            amplitude: 3.0,
            center: None,
            width: 0.1,
        };
        let grid = GridSpec::new(1, 16, 0.0625).unwrap();
        let rho = init.density(grid).unwrap();
        let peak = rho.iter().cloned().fold(0.0, f64::max);
        assert!(peak < 8.0 && peak > 7.0);
        assert!((rho[0] - 2.0 * (1.0 + 3.0 * (-(0.5f64 - 0.03125).powi(2) / 0.02).exp())).abs() < 1e-12);
    }
}

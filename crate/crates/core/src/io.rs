//! JSON records for families, densities and estimator tensors.
//!
//! A tensor of order `n` over `m` sites is written as arrays nested `n` deep,
//! outermost index first; order 0 is a bare number. Window sites are grid
//! indices. Floats are written in shortest round-trip form, so reading a
//! record back reproduces every 64-bit value exactly.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::family::Family;
use crate::grid::{GridSpec, Window};
use crate::moment::WindowDensity;
use crate::sim::EmpiricalCorrelation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Nested {
    Scalar(f64),
    Array(Vec<Nested>),
}

impl Nested {
    /// Nests a flat row-major tensor of `m^depth` entries.
    pub fn from_flat(flat: &[f64], m: usize, depth: usize) -> Self {
        if depth == 0 {
            return Nested::Scalar(flat[0]);
        }
        let stride = flat.len() / m.max(1);
        Nested::Array(
            (0..m)
                .map(|i| Nested::from_flat(&flat[i * stride..(i + 1) * stride], m, depth - 1))
                .collect(),
        )
    }

    /// Flattens, checking that every level has exactly `m` entries.
    pub fn to_flat(&self, m: usize, depth: usize) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        self.flatten_into(m, depth, &mut out)?;
        Ok(out)
    }

    fn flatten_into(&self, m: usize, depth: usize, out: &mut Vec<f64>) -> Result<()> {
        match (self, depth) {
            (Nested::Scalar(v), 0) => {
                out.push(*v);
                Ok(())
            }
            (Nested::Array(items), d) if d > 0 && items.len() == m => {
                items.iter().try_for_each(|item| item.flatten_into(m, d - 1, out))
            }
            _ => invalid(format!("tensor shape does not match {m} sites at depth {depth}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyRecord {
    pub grid: GridSpec,
    pub order: usize,
    pub window: Vec<usize>,
    pub components: Vec<Nested>,
}

impl FamilyRecord {
    pub fn from_family(family: &Family) -> Result<Self> {
        if !family.all_finite() {
            return invalid("cannot serialize a family with non-finite entries");
        }
        let m = family.window().len();
        Ok(Self {
            grid: *family.grid(),
            order: family.order(),
            window: family.window().sites().to_vec(),
            components: family
                .components()
                .iter()
                .enumerate()
                .map(|(n, c)| Nested::from_flat(c, m, n))
                .collect(),
        })
    }

    pub fn to_family(&self) -> Result<Family> {
        self.grid.validate()?;
        if self.components.len() != self.order + 1 {
            return invalid(format!(
                "order {} needs {} components, found {}",
                self.order,
                self.order + 1,
                self.components.len()
            ));
        }
        let window = Window::new(self.grid, self.window.clone())?;
        if window.sites() != self.window.as_slice() {
            return invalid("window sites must be listed in increasing order");
        }
        let m = window.len();
        let components = self
            .components
            .iter()
            .enumerate()
            .map(|(n, c)| c.to_flat(m, n))
            .collect::<Result<Vec<_>>>()?;
        Family::from_components(window, components)
    }
}

pub fn family_to_json(family: &Family) -> Result<String> {
    Ok(serde_json::to_string(&FamilyRecord::from_family(family)?)?)
}

pub fn family_from_json(text: &str) -> Result<Family> {
    serde_json::from_str::<FamilyRecord>(text)?.to_family()
}

/// One trajectory snapshot, written one per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotRecord {
    pub index: usize,
    pub t: f64,
    pub order: usize,
    pub tensor: FamilyRecord,
}

impl SnapshotRecord {
    pub fn new(index: usize, t: f64, family: &Family) -> Result<Self> {
        Ok(Self {
            index,
            t,
            order: family.order(),
            tensor: FamilyRecord::from_family(family)?,
        })
    }
}

/// Weights of a window density; entry `j` of `weights` belongs to the
/// sub-configuration whose bit `i` is set iff `window[i]` is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityRecord {
    pub grid: GridSpec,
    pub window: Vec<usize>,
    pub weights: Vec<f64>,
}

impl DensityRecord {
    pub fn from_density(density: &WindowDensity) -> Self {
        let window = density.window();
        Self {
            grid: *window.grid(),
            window: window.sites().to_vec(),
            weights: density.weights().to_vec(),
        }
    }

    pub fn to_density(&self) -> Result<WindowDensity> {
        let window = Window::new(self.grid, self.window.clone())?;
        WindowDensity::new(window, self.weights.clone())
    }
}

/// Estimator tensors of an ensemble in nested form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateRecord {
    pub grid: GridSpec,
    pub order: usize,
    pub replicas: usize,
    pub t: f64,
    pub estimate: Nested,
    pub stderr: Nested,
}

impl EstimateRecord {
    pub fn from_estimate(emp: &EmpiricalCorrelation) -> Self {
        let m = emp.grid.site_count();
        Self {
            grid: emp.grid,
            order: emp.order,
            replicas: emp.replicas,
            t: emp.time,
            estimate: Nested::from_flat(&emp.estimate, m, emp.order),
            stderr: Nested::from_flat(&emp.stderr, m, emp.order),
        }
    }

    /// Flat `(estimate, stderr)` tensors.
    pub fn tensors(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = self.grid.site_count();
        Ok((self.estimate.to_flat(m, self.order)?, self.stderr.to_flat(m, self.order)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_layout() {
        let n = Nested::from_flat(&[1.0, 2.0, 3.0, 4.0], 2, 2);
        assert_eq!(serde_json::to_string(&n).unwrap(), "[[1.0,2.0],[3.0,4.0]]");
        assert_eq!(n.to_flat(2, 2).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert!(n.to_flat(2, 1).is_err());
        assert!(n.to_flat(3, 2).is_err());
    }

    #[test]
    fn scalar_order_zero() {
        let n = Nested::from_flat(&[0.5], 7, 0);
        assert_eq!(serde_json::to_string(&n).unwrap(), "0.5");
    }

    #[test]
    fn family_round_trip() {
        let grid = GridSpec::new(1, 5, 0.3).unwrap();
        let window = Window::new(grid, vec![1, 3, 4]).unwrap();
        let f = Family::from_fn(window, 2, |n, t| 0.1 + n as f64 / 3.0 + t.iter().sum::<usize>() as f64 / 7.0).unwrap();
        let text = family_to_json(&f).unwrap();
        assert_eq!(family_from_json(&text).unwrap(), f);
    }

    #[test]
    fn rejects_wrong_component_count() {
        let text = r#"{"grid":{"d":1,"M":2,"h":1.0},"order":1,"window":[0,1],"components":[1.0]}"#;
        assert!(family_from_json(text).is_err());
        let bad = r#"{"grid":{"d":1,"M":2,"h":1.0},"order":0,"window":[0],"components":[1.0],"x":1}"#;
        assert!(family_from_json(bad).is_err());
    }
}

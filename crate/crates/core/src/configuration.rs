use std::fmt;

use crate::error::{invalid, Result};

/// A finite configuration of distinct grid sites in canonical (increasing) order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FiniteConfiguration(Vec<usize>);

impl FiniteConfiguration {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn new(mut points: Vec<usize>) -> Result<Self> {
        points.sort_unstable();
        if points.windows(2).any(|w| w[0] == w[1]) {
            return invalid("configuration points must be pairwise distinct");
        }
        Ok(Self(points))
    }

    pub fn points(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, site: usize) -> bool {
        self.0.binary_search(&site).is_ok()
    }

    /// The sub-configuration selected by the bits of `mask`.
    pub fn subset(&self, mask: u64) -> Self {
        Self(
            self.0
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &p)| p)
                .collect(),
        )
    }

    /// All `2^n` sub-configurations, indexed by bitmask.
    pub fn subsets(&self) -> impl Iterator<Item = FiniteConfiguration> + '_ {
        (0..1u64 << self.0.len()).map(move |mask| self.subset(mask))
    }
}

impl fmt::Display for FiniteConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order_and_distinctness() {
        let a = FiniteConfiguration::new(vec![3, 1, 2]).unwrap();
        let b = FiniteConfiguration::new(vec![2, 3, 1]).unwrap();
        assert_eq!(a, b);
        assert!(FiniteConfiguration::new(vec![1, 1]).is_err());
        assert_eq!(a.to_string(), "{1,2,3}");
    }

    #[test]
    fn subsets_enumerated_by_mask() {
        let a = FiniteConfiguration::new(vec![4, 7]).unwrap();
        let subs: Vec<_> = a.subsets().collect();
        assert_eq!(subs.len(), 4);
        assert!(subs[0].is_empty());
        assert_eq!(subs[1].points(), &[4]);
        assert_eq!(subs[2].points(), &[7]);
        assert_eq!(subs[3].points(), &[4, 7]);
    }
}

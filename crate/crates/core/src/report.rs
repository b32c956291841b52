//! Named numeric checks with tolerances, and a cheap content fingerprint for
//! grids so exported per-node tables can be matched to the grid that made them.

use crate::grid::SurfaceGrid;
use serde::{Deserialize, Serialize};

/// One verified quantity: the measured value, the tolerance it was held to,
/// and whether it passed. `kind` records the comparison direction so a report
/// reader can re-derive `pass`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckEntry {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    /// "below" (value <= tolerance) or "at_least" (value >= tolerance).
    pub kind: String,
    pub pass: bool,
}

impl CheckEntry {
    pub fn below(name: &str, value: f64, tolerance: f64) -> CheckEntry {
        CheckEntry {
            name: name.into(),
            value,
            tolerance,
            kind: "below".into(),
            pass: value.is_finite() && value <= tolerance,
        }
    }

    pub fn at_least(name: &str, value: f64, tolerance: f64) -> CheckEntry {
        CheckEntry {
            name: name.into(),
            value,
            tolerance,
            kind: "at_least".into(),
            pass: value.is_finite() && value >= tolerance,
        }
    }
}

/// Accumulates check entries and tracks the combined verdict.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CheckList {
    pub entries: Vec<CheckEntry>,
}

impl CheckList {
    pub fn new() -> CheckList {
        CheckList::default()
    }

    pub fn below(&mut self, name: &str, value: f64, tolerance: f64) -> &mut Self {
        self.entries.push(CheckEntry::below(name, value, tolerance));
        self
    }

    pub fn at_least(&mut self, name: &str, value: f64, tolerance: f64) -> &mut Self {
        self.entries
            .push(CheckEntry::at_least(name, value, tolerance));
        self
    }

    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn failures(&self) -> Vec<&CheckEntry> {
        self.entries.iter().filter(|e| !e.pass).collect()
    }
}

/// FNV-1a over the grid's defining data: spacing and node coordinates.
/// Stable across runs and platforms with identical IEEE doubles.
pub fn grid_fingerprint(grid: &SurfaceGrid) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    let mut eat = |bits: u64| {
        for byte in bits.to_le_bytes() {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        }
    };
    eat(grid.h().to_bits());
    eat(grid.n_interior() as u64);
    for z in grid.nodes() {
        eat(z.re.to_bits());
        eat(z.im.to_bits());
    }
    format!("{hash:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::grid_002 as grid;

    #[test]
    fn bounds_comparisons_have_the_stated_direction() {
        assert!(CheckEntry::below("a", 0.5, 1.0).pass);
        assert!(!CheckEntry::below("a", 2.0, 1.0).pass);
        assert!(!CheckEntry::below("a", f64::NAN, 1.0).pass);
        assert!(CheckEntry::at_least("b", 2.0, 1.8).pass);
        assert!(!CheckEntry::at_least("b", 1.0, 1.8).pass);
        let mut list = CheckList::new();
        list.below("ok", 0.0, 1.0).at_least("bad", 0.0, 1.0);
        assert!(!list.all_pass());
        assert_eq!(list.failures().len(), 1);
    }

    #[test]
    fn fingerprint_is_stable_and_grid_specific() {
        let a = grid_fingerprint(grid());
        let b = grid_fingerprint(grid());
        assert_eq!(a, b);
        assert_eq!(a.len(), 16);
        let grp = crate::group::FuchsianGroup::bolza().unwrap();
        let other = SurfaceGrid::build(&grp, 0.018).unwrap();
        assert_ne!(a, grid_fingerprint(&other));
    }
}

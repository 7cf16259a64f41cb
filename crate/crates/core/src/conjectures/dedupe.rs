//! Merging per-configuration violations into unique findings.

use std::collections::{BTreeMap, BTreeSet};

use super::{IdentityKey, Violation};
use crate::buildmatrix::OptLevel;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dedupe {
    pub unique: Vec<Violation>,
    /// Optimization levels at which each unique violation was seen.
    pub level_matrix: BTreeMap<IdentityKey, BTreeSet<OptLevel>>,
}

/// Collapse violations sharing an identity key, keeping the first
/// occurrence and merging configurations.
pub fn dedupe(per_config: impl IntoIterator<Item = Violation>) -> Dedupe {
    let mut order: Vec<IdentityKey> = Vec::new();
    let mut merged: BTreeMap<IdentityKey, Violation> = BTreeMap::new();
    for v in per_config {
        let key = v.key();
        match merged.get_mut(&key) {
            Some(existing) => existing.configs.extend(v.configs),
            None => {
                order.push(key.clone());
                merged.insert(key, v);
            }
        }
    }
    let mut out = Dedupe::default();
    for key in order {
        let v = merged.remove(&key).expect("merged key");
        out.level_matrix
            .insert(key, v.configs.iter().map(|c| c.opt_level).collect());
        out.unique.push(v);
    }
    out
}

/// Number of unique violations observed at each level.
pub fn per_level_counts(
    matrix: &BTreeMap<IdentityKey, BTreeSet<OptLevel>>,
) -> BTreeMap<OptLevel, usize> {
    let mut counts = BTreeMap::new();
    for levels in matrix.values() {
        for l in levels {
            *counts.entry(*l).or_insert(0) += 1;
        }
    }
    counts
}

/// Exact Venn regions: each distinct level set and how many violations have it.
pub fn venn_regions(
    matrix: &BTreeMap<IdentityKey, BTreeSet<OptLevel>>,
) -> BTreeMap<BTreeSet<OptLevel>, usize> {
    let mut regions = BTreeMap::new();
    for levels in matrix.values() {
        *regions.entry(levels.clone()).or_insert(0) += 1;
    }
    regions
}

//! Stratified partitioning: 5 construction/test divisions, each carrying 5
//! train/validation splits of its construction subset.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::manifest::{DatasetManifest, Label};
use crate::error::{Error, Result};
use crate::rng::seeded_rng;

pub const DIVISIONS: usize = 5;
pub const SPLITS_PER_DIVISION: usize = 5;
const CONSTRUCTION_FRACTION: f64 = 0.70;
const TRAIN_FRACTION: f64 = 0.80;

/// One train/validation split of a construction subset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPair {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// One construction/test division with its splits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Division {
    pub construction: Vec<usize>,
    pub test: Vec<usize>,
    pub splits: Vec<SplitPair>,
}

/// The full 5x5 partition plan for an experiment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub seed: u64,
    pub divisions: Vec<Division>,
}

/// Splits `indices` into (partA, partB) with `|partA| = round(fraction * N)`,
/// preserving per-class proportions to within one sample.
///
/// Each class is shuffled with the seeded RNG and contributes
/// `floor(fraction * class_count)` items; leftover slots up to the overall
/// target go to the classes with the largest rounding remainders (ties by
/// class index). Both parts are returned sorted.
pub fn stratified_split(
    indices: &[usize],
    labels: &[Label],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&fraction) || fraction == 0.0 {
        return Err(Error::Partition(format!("fraction {fraction} outside (0,1)")));
    }
    let mut per_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for &idx in indices {
        per_class[labels[idx].index()].push(idx);
    }
    for (c, members) in per_class.iter().enumerate() {
        if members.len() < 2 {
            return Err(Error::Partition(format!(
                "class {c} has {} member(s); need at least 2 to split",
                members.len()
            )));
        }
    }

    let mut rng = seeded_rng(seed, &[]);
    for members in per_class.iter_mut() {
        members.shuffle(&mut rng);
    }

    let target = (fraction * indices.len() as f64).round() as usize;
    let mut takes = [0usize; 2];
    let mut remainders = [0f64; 2];
    for c in 0..2 {
        let exact = fraction * per_class[c].len() as f64;
        takes[c] = exact.floor() as usize;
        remainders[c] = exact - exact.floor();
    }
    let mut leftover = target.saturating_sub(takes[0] + takes[1]);
    let mut order = [0usize, 1];
    order.sort_by(|&a, &b| remainders[b].partial_cmp(&remainders[a]).unwrap().then(a.cmp(&b)));
    for &c in &order {
        if leftover > 0 && takes[c] < per_class[c].len() {
            takes[c] += 1;
            leftover -= 1;
        }
    }

    let mut part_a = Vec::with_capacity(target);
    let mut part_b = Vec::with_capacity(indices.len() - target);
    for c in 0..2 {
        part_a.extend_from_slice(&per_class[c][..takes[c]]);
        part_b.extend_from_slice(&per_class[c][takes[c]..]);
    }
    part_a.sort_unstable();
    part_b.sort_unstable();
    Ok((part_a, part_b))
}

/// Builds the full plan: 5 stratified construction/test divisions, each with
/// 5 stratified train/validation splits of the same construction subset.
pub fn build_partition_plan(manifest: &DatasetManifest, seed: u64) -> Result<PartitionPlan> {
    let labels = manifest.labels();
    let all: Vec<usize> = (0..manifest.len()).collect();
    let mut divisions = Vec::with_capacity(DIVISIONS);
    for d in 0..DIVISIONS {
        let div_seed = crate::rng::derive_seed(seed, &[0xD1F, d as u64]);
        let (construction, test) =
            stratified_split(&all, &labels, CONSTRUCTION_FRACTION, div_seed)?;
        let mut splits = Vec::with_capacity(SPLITS_PER_DIVISION);
        for s in 0..SPLITS_PER_DIVISION {
            let split_seed = crate::rng::derive_seed(seed, &[0x5B1, d as u64, s as u64]);
            let (train, validation) =
                stratified_split(&construction, &labels, TRAIN_FRACTION, split_seed)?;
            splits.push(SplitPair { train, validation });
        }
        divisions.push(Division {
            construction,
            test,
            splits,
        });
    }
    Ok(PartitionPlan { seed, divisions })
}

impl PartitionPlan {
    /// Serializes the plan (seed plus explicit index lists) as JSON.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Partition(format!("serialize plan: {e}")))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Partition(format!("{}: {e}", path.display())))
    }

    /// Verifies every set identity the plan promises. Cheap enough to run on
    /// load in tools that replay experiments.
    pub fn check_invariants(&self, total: usize) -> Result<()> {
        for (d, div) in self.divisions.iter().enumerate() {
            let mut union: Vec<usize> = div.construction.iter().chain(&div.test).copied().collect();
            union.sort_unstable();
            union.dedup();
            if union.len() != div.construction.len() + div.test.len() || union.len() != total {
                return Err(Error::Partition(format!(
                    "division {d}: construction/test do not partition 0..{total}"
                )));
            }
            for (s, split) in div.splits.iter().enumerate() {
                let mut u: Vec<usize> = split.train.iter().chain(&split.validation).copied().collect();
                u.sort_unstable();
                u.dedup();
                if u.len() != split.train.len() + split.validation.len() || u != div.construction {
                    return Err(Error::Partition(format!(
                        "division {d} split {s}: train/validation do not partition the construction set"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::manifest::ManifestEntry;

    fn toy_manifest(n0: usize, n1: usize) -> DatasetManifest {
        let mut entries = Vec::new();
        for i in 0..n0 {
            entries.push(ManifestEntry {
                path: format!("n{i}.png").into(),
                label: Label::NonConsolidation,
            });
        }
        for i in 0..n1 {
            entries.push(ManifestEntry {
                path: format!("c{i}.png").into(),
                label: Label::Consolidation,
            });
        }
        DatasetManifest::new(entries).unwrap()
    }

    #[test]
    fn ten_items_split_seventy_percent() {
        let m = toy_manifest(5, 5);
        let labels = m.labels();
        let all: Vec<usize> = (0..10).collect();
        let (a, b) = stratified_split(&all, &labels, 0.7, 1).unwrap();
        assert_eq!(a.len(), 7);
        assert_eq!(b.len(), 3);
        let a0 = a.iter().filter(|&&i| labels[i].index() == 0).count();
        assert!((3..=4).contains(&a0), "class-0 take was {a0}");
    }

    #[test]
    fn same_seed_same_partition() {
        let m = toy_manifest(20, 15);
        let labels = m.labels();
        let all: Vec<usize> = (0..m.len()).collect();
        let (a1, b1) = stratified_split(&all, &labels, 0.7, 9).unwrap();
        let (a2, b2) = stratified_split(&all, &labels, 0.7, 9).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
    }

    #[test]
    fn full_dataset_arithmetic() {
        // 950 items at 70% -> 665/285
        let m = toy_manifest(547, 403);
        let labels = m.labels();
        let all: Vec<usize> = (0..950).collect();
        let (a, b) = stratified_split(&all, &labels, 0.7, 4).unwrap();
        assert_eq!(a.len(), 665);
        assert_eq!(b.len(), 285);
    }

    #[test]
    fn tiny_class_is_rejected() {
        let m = toy_manifest(10, 1);
        let labels = m.labels();
        let all: Vec<usize> = (0..11).collect();
        assert!(stratified_split(&all, &labels, 0.7, 0).is_err());
    }

    #[test]
    fn plan_has_five_by_five_structure() {
        let m = toy_manifest(12, 8);
        let plan = build_partition_plan(&m, 77).unwrap();
        assert_eq!(plan.divisions.len(), 5);
        for div in &plan.divisions {
            assert_eq!(div.splits.len(), 5);
        }
        plan.check_invariants(m.len()).unwrap();
    }

    #[test]
    fn splits_share_their_division_test_set() {
        let m = toy_manifest(12, 8);
        let plan = build_partition_plan(&m, 3).unwrap();
        for div in &plan.divisions {
            for split in &div.splits {
                for idx in split.train.iter().chain(&split.validation) {
                    assert!(!div.test.contains(idx), "test index leaked into a split");
                }
            }
        }
    }

    #[test]
    fn plan_is_deterministic() {
        let m = toy_manifest(12, 8);
        let p1 = build_partition_plan(&m, 5).unwrap();
        let p2 = build_partition_plan(&m, 5).unwrap();
        assert_eq!(p1, p2);
        let p3 = build_partition_plan(&m, 6).unwrap();
        assert_ne!(p1, p3);
    }

    #[test]
    fn plan_round_trips_through_json() {
        let m = toy_manifest(12, 8);
        let plan = build_partition_plan(&m, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plan.json");
        plan.save(&path).unwrap();
        let back = PartitionPlan::load(&path).unwrap();
        assert_eq!(plan, back);
    }
}

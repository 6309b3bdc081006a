use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::manifest::{SceneRecord, Split};
use crate::error::{Error, Result};
use crate::synth::SplitMix64;

/// Reach id → split.
pub type SplitAssignment = BTreeMap<String, Split>;

#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub assignment: SplitAssignment,
    /// One message per scene whose reaches had to be moved to a common split.
    pub warnings: Vec<String>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Seeded reach-exclusive split.
///
/// Reaches are sorted by id, shuffled, then each goes to the split furthest below its
/// scene-count target. A scene whose reaches end up in different splits pulls every reach
/// connected to it through shared scenes into the split of its first reach.
pub fn split_by_reach(records: &[SceneRecord], fractions: [f64; 3], seed: u64) -> Result<SplitOutcome> {
    if fractions.iter().any(|f| !(*f >= 0.0 && f.is_finite())) {
        return Err(Error::Split(format!(
            "fractions must be non-negative, got {fractions:?}"
        )));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Split(format!("fractions must sum to 1, got {total}")));
    }

    let mut scene_counts: BTreeMap<&str, u64> = BTreeMap::new();
    for r in records {
        for reach in r.reach_ids.iter().collect::<BTreeSet<_>>() {
            *scene_counts.entry(reach.as_str()).or_default() += 1;
        }
    }
    let active = fractions.iter().filter(|&&f| f > 0.0).count();
    if scene_counts.len() < active {
        return Err(Error::Split(format!(
            "{} reach(es) cannot fill {active} non-empty splits",
            scene_counts.len()
        )));
    }

    let mut reaches: Vec<&str> = scene_counts.keys().copied().collect();
    SplitMix64::new(seed).shuffle(&mut reaches);

    let total_scenes: u64 = scene_counts.values().sum();
    let targets: Vec<f64> = fractions.iter().map(|f| f * total_scenes as f64).collect();
    let mut filled = [0u64; 3];
    let mut assignment = SplitAssignment::new();
    for reach in reaches {
        let mut best = None;
        for i in 0..3 {
            if fractions[i] <= 0.0 {
                continue;
            }
            let deficit = targets[i] - filled[i] as f64;
            if best.is_none_or(|(_, d)| deficit > d) {
                best = Some((i, deficit));
            }
        }
        let (i, _) = best.expect("at least one split has a positive fraction");
        filled[i] += scene_counts[reach];
        assignment.insert(reach.to_string(), Split::ASSIGNABLE[i]);
    }

    let warnings = resolve_conflicts(records, &mut assignment);
    Ok(SplitOutcome { assignment, warnings })
}

fn resolve_conflicts(records: &[SceneRecord], assignment: &mut SplitAssignment) -> Vec<String> {
    let index: BTreeMap<String, usize> = assignment.keys().cloned().zip(0..).collect();
    let names: Vec<String> = assignment.keys().cloned().collect();
    let mut uf = UnionFind::new(index.len());
    for r in records {
        for pair in r.reach_ids.windows(2) {
            uf.union(index[&pair[0]], index[&pair[1]]);
        }
    }

    let mut order: Vec<&SceneRecord> = records.iter().collect();
    order.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));
    let mut warnings = Vec::new();
    for scene in order {
        let splits: BTreeSet<Split> = scene.reach_ids.iter().map(|r| assignment[r]).collect();
        if splits.len() <= 1 {
            continue;
        }
        let target = assignment[&scene.reach_ids[0]];
        let root = uf.find(index[&scene.reach_ids[0]]);
        let mut moved = Vec::new();
        for (i, name) in names.iter().enumerate() {
            if uf.find(i) == root && assignment[name] != target {
                assignment.insert(name.clone(), target);
                moved.push(name.as_str());
            }
        }
        warnings.push(format!(
            "scene {} spans splits {}; moved reach(es) {} to {target}",
            scene.scene_id,
            splits.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("/"),
            moved.join(", ")
        ));
    }
    warnings
}

/// Assignment taken from the manifest's explicit `split` column: each reach gets the split of
/// the first scene (by scene id) that names it with a split.
pub fn assignment_from_manifest(records: &[SceneRecord]) -> SplitAssignment {
    let mut order: Vec<&SceneRecord> = records.iter().collect();
    order.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));
    let mut assignment = SplitAssignment::new();
    for r in order {
        for reach in &r.reach_ids {
            let slot = assignment.entry(reach.clone()).or_insert(Split::Unassigned);
            if *slot == Split::Unassigned {
                *slot = r.split;
            }
        }
    }
    assignment
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub reach_id: String,
    pub splits: Vec<Split>,
    /// Scenes referencing the reach, sorted.
    pub scene_ids: Vec<String>,
}

/// The split a scene ends up in: its explicit split, or else that of its first reach.
pub fn scene_split(record: &SceneRecord, assignment: &SplitAssignment) -> Split {
    if record.split != Split::Unassigned {
        return record.split;
    }
    record
        .reach_ids
        .first()
        .and_then(|r| assignment.get(r))
        .copied()
        .unwrap_or(Split::Unassigned)
}

/// Reaches that appear in more than one split, counting both the assignment itself and the
/// split of every scene referencing the reach. Empty means the split is reach-exclusive.
pub fn validate_exclusivity(records: &[SceneRecord], assignment: &SplitAssignment) -> Vec<Violation> {
    let mut seen: BTreeMap<&str, (BTreeSet<Split>, BTreeSet<&str>)> = BTreeMap::new();
    for r in records {
        let split = scene_split(r, assignment);
        for reach in &r.reach_ids {
            let entry = seen.entry(reach.as_str()).or_default();
            entry.0.insert(split);
            entry.1.insert(r.scene_id.as_str());
            entry
                .0
                .insert(assignment.get(reach).copied().unwrap_or(Split::Unassigned));
        }
    }
    seen.into_iter()
        .filter(|(_, (splits, _))| splits.len() > 1)
        .map(|(reach, (splits, scenes))| Violation {
            reach_id: reach.to_string(),
            splits: splits.into_iter().collect(),
            scene_ids: scenes.into_iter().map(String::from).collect(),
        })
        .collect()
}

/// Writes `reach_id,split` rows sorted by reach id.
pub fn write_split_csv(path: &Path, assignment: &SplitAssignment) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["reach_id", "split"]).map_err(csv_err)?;
    for (reach, split) in assignment {
        w.write_record([reach.as_str(), split.as_str()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

//! Dataset manifests and reach-exclusive train/val/test splits.

mod manifest;
mod split;

pub use manifest::{load_manifest, DanglingPath, Manifest, NodeRef, SceneRecord, Split};
pub use split::{
    assignment_from_manifest, scene_split, split_by_reach, validate_exclusivity, write_split_csv, SplitAssignment,
    SplitOutcome, Violation,
};

use rivwidth_core::ingest::{
    assignment_from_manifest, load_manifest, scene_split, split_by_reach, validate_exclusivity, write_split_csv,
    SceneRecord, Split, Violation,
};

use super::out_or_default;
use crate::config::{required, set, SplitConfig};
use crate::provenance;
use crate::{internal, CmdResult, SplitArgs};

fn describe(v: &Violation) -> String {
    let splits: Vec<&str> = v.splits.iter().map(|s| s.as_str()).collect();
    format!(
        "reach {} spans splits {} (scenes {})",
        v.reach_id,
        splits.join(", "),
        v.scene_ids.join(", ")
    )
}

pub fn run(args: SplitArgs, mut cfg: SplitConfig) -> CmdResult {
    set(&mut cfg.manifest, args.manifest.map(Some));
    if !args.fractions.is_empty() {
        cfg.fractions = args
            .fractions
            .as_slice()
            .try_into()
            .map_err(|_| anyhow::anyhow!("--fractions takes exactly 3 values"))?;
    }
    set(&mut cfg.seed, args.seed);
    cfg.use_manifest_splits |= args.use_manifest_splits;
    set(&mut cfg.out, args.out.map(Some));

    let manifest_path = required(&cfg.manifest, "--manifest")?;
    let out = out_or_default(&cfg.out, "split.csv");
    let (sidecar, _) = provenance::resolve("split", &cfg)?;
    let manifest = load_manifest(manifest_path)?;
    for d in &manifest.dangling {
        eprintln!(
            "warning: scene {}: {} {} does not exist",
            d.scene_id,
            d.field,
            d.path.display()
        );
    }

    let (assignment, records) = if cfg.use_manifest_splits {
        let assignment = assignment_from_manifest(&manifest.records);
        if let Some(r) = assignment.iter().find(|(_, s)| **s == Split::Unassigned) {
            return Err(anyhow::anyhow!("reach {} has no split in the manifest", r.0).into());
        }
        let violations = validate_exclusivity(&manifest.records, &assignment);
        if !violations.is_empty() {
            for v in &violations {
                eprintln!("{}", describe(v));
            }
            return Err(anyhow::anyhow!("manifest split is not reach-exclusive ({} reaches)", violations.len()).into());
        }
        (assignment, manifest.records)
    } else {
        let outcome = split_by_reach(&manifest.records, cfg.fractions, cfg.seed)?;
        for w in &outcome.warnings {
            eprintln!("warning: {w}");
        }
        // the drawn split replaces whatever the manifest said
        let records: Vec<SceneRecord> = manifest
            .records
            .into_iter()
            .map(|r| SceneRecord {
                split: Split::Unassigned,
                ..r
            })
            .collect();
        let violations = validate_exclusivity(&records, &outcome.assignment);
        if let Some(v) = violations.first() {
            return Err(internal(format!(
                "drawn split is not reach-exclusive: {} ({} reaches)",
                describe(v),
                violations.len()
            )));
        }
        (outcome.assignment, records)
    };

    write_split_csv(&out, &assignment)?;
    provenance::write_sidecar(&out, &sidecar)?;
    for split in Split::ASSIGNABLE {
        let reaches = assignment.values().filter(|&&s| s == split).count();
        let scenes = records.iter().filter(|r| scene_split(r, &assignment) == split).count();
        eprintln!("{split}: {reaches} reaches, {scenes} scenes");
    }
    Ok(())
}

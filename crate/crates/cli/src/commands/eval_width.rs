use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::Serialize;

use rivwidth_core::ingest::{load_manifest, NodeRef};
use rivwidth_core::width::{read_width_table, width_error_stats, WidthErrorStats, WidthFlags};

use super::out_or_default;
use crate::config::{required, set, EvalWidthConfig};
use crate::provenance::{self, Provenance};
use crate::{internal, CmdResult, EvalWidthArgs};

/// One width from either source. Manifest rows also carry their scene.
struct Entry {
    scene_id: Option<String>,
    node_id: String,
    width_m: f64,
    flags: WidthFlags,
}

const NODE_REF_FIELDS: [&str; 3] = ["sword_landsat_width", "swot_width", "sentinel_width"];

fn node_ref_field(n: &NodeRef, field: &str) -> Option<f64> {
    match field {
        "sword_landsat_width" => n.sword_landsat_width,
        "swot_width" => n.swot_width,
        "sentinel_width" => n.sentinel_width,
        _ => None,
    }
}

fn load_entries(path: &Path, field: Option<&str>) -> anyhow::Result<Vec<Entry>> {
    let Some(field) = field else {
        return Ok(read_width_table(path)?
            .into_iter()
            .map(|r| Entry {
                scene_id: None,
                node_id: r.node_id,
                width_m: r.width_m,
                flags: r.flags,
            })
            .collect());
    };
    if !NODE_REF_FIELDS.contains(&field) {
        anyhow::bail!("unknown node reference field {field:?} (expected one of {NODE_REF_FIELDS:?})");
    }
    let manifest = load_manifest(path)?;
    let mut entries = Vec::new();
    for record in &manifest.records {
        for n in &record.node_refs {
            if let Some(w) = node_ref_field(n, field) {
                entries.push(Entry {
                    scene_id: Some(record.scene_id.clone()),
                    node_id: n.node_id.clone(),
                    width_m: w,
                    flags: WidthFlags::default(),
                });
            }
        }
    }
    Ok(entries)
}

/// Node widths join on `node_id`, or on `(scene_id, node_id)` when both sides come from a
/// manifest.
fn join_key(e: &Entry, by_scene: bool) -> String {
    match (&e.scene_id, by_scene) {
        (Some(s), true) => format!("{s}\u{1f}{}", e.node_id),
        _ => e.node_id.clone(),
    }
}

fn index<'a>(entries: &'a [Entry], by_scene: bool, what: &str) -> anyhow::Result<HashMap<String, &'a Entry>> {
    let mut map = HashMap::with_capacity(entries.len());
    for e in entries {
        if map.insert(join_key(e, by_scene), e).is_some() {
            anyhow::bail!("{what}: node {} appears more than once", e.node_id);
        }
    }
    Ok(map)
}

#[derive(Serialize)]
struct EvalWidthReport {
    method: String,
    #[serde(flatten)]
    provenance: Provenance,
    max_width_m: f64,
    #[serde(flatten)]
    stats: WidthErrorStats,
    /// Predictions dropped by `exclude_flagged`.
    n_flagged: usize,
    /// Reference nodes without a prediction.
    n_missing_pred: usize,
}

pub fn run(args: EvalWidthArgs, mut cfg: EvalWidthConfig) -> CmdResult {
    set(&mut cfg.pred, args.pred.map(Some));
    set(&mut cfg.gt, args.gt.map(Some));
    set(&mut cfg.pred_field, args.pred_field.map(Some));
    set(&mut cfg.gt_field, args.gt_field.map(Some));
    set(&mut cfg.max_width, args.max_width);
    cfg.exclude_flagged |= args.exclude_flagged;
    set(&mut cfg.method, args.method.map(Some));
    set(&mut cfg.out, args.out.map(Some));

    let pred_path = required(&cfg.pred, "--pred")?;
    let gt_path = required(&cfg.gt, "--gt")?;
    if !(cfg.max_width > 0.0) {
        return Err(anyhow::anyhow!("max_width must be positive, got {}", cfg.max_width).into());
    }
    let out = out_or_default(&cfg.out, "eval_width.json");
    let method = cfg.method.clone().unwrap_or_else(|| {
        pred_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "prediction".into())
    });
    let (sidecar, prov) = provenance::resolve("eval-width", &cfg)?;

    let pred = load_entries(pred_path, cfg.pred_field.as_deref())?;
    let gt = load_entries(gt_path, cfg.gt_field.as_deref())?;
    let by_scene = cfg.pred_field.is_some() && cfg.gt_field.is_some();
    let pred_index = index(&pred, by_scene, "predictions")?;
    index(&gt, by_scene, "reference")?;

    let mut pairs = Vec::with_capacity(gt.len());
    let (mut n_flagged, mut n_missing) = (0, 0);
    let mut used = HashSet::new();
    for g in &gt {
        let key = join_key(g, by_scene);
        let Some(p) = pred_index.get(&key) else {
            n_missing += 1;
            continue;
        };
        used.insert(key);
        if cfg.exclude_flagged && (p.flags.truncated_at_boundary || p.flags.contains_nodata) {
            n_flagged += 1;
            continue;
        }
        pairs.push((p.width_m, g.width_m));
    }
    if used.len() + n_missing != gt.len() {
        return Err(internal("join bookkeeping does not add up"));
    }
    let unmatched = pred.len() - used.len();
    if unmatched > 0 {
        eprintln!("{unmatched} predicted nodes have no reference width and were ignored");
    }
    let stats = width_error_stats(&pairs, cfg.max_width)?;
    eprintln!(
        "{method}: {} nodes, bias {} m, median abs {} m",
        stats.n_nodes,
        rivwidth_core::numfmt::sig6(stats.bias_m),
        rivwidth_core::numfmt::sig6(stats.median_abs_m)
    );
    provenance::write_json_report(
        &out,
        &EvalWidthReport {
            method,
            provenance: prov,
            max_width_m: cfg.max_width,
            stats,
            n_flagged,
            n_missing_pred: n_missing,
        },
    )?;
    provenance::write_sidecar(&out, &sidecar)?;
    Ok(())
}

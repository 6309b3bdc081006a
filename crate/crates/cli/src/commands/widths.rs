use anyhow::Context;

use rivwidth_core::centerline::{make_transect, node_tangent, parse_centerlines, transects_to_geojson};
use rivwidth_core::raster::load_mask;
use rivwidth_core::width::{widths_for_scene, write_widths_csv};

use crate::config::{required, set, WidthsConfig};
use crate::provenance;
use crate::{internal, CmdResult, WidthsArgs};

pub fn run(args: WidthsArgs, mut cfg: WidthsConfig) -> CmdResult {
    set(&mut cfg.mask, args.mask.map(Some));
    set(&mut cfg.centerlines, args.centerlines.map(Some));
    set(&mut cfg.half_length, args.half_length);
    set(&mut cfg.width_mode, args.width_mode);
    set(&mut cfg.out, args.out.map(Some));
    set(&mut cfg.transects_geojson, args.transects_geojson.map(Some));

    let mask_path = required(&cfg.mask, "--mask")?;
    let centerlines_path = required(&cfg.centerlines, "--centerlines")?;
    let out = required(&cfg.out, "--out")?;
    if !(cfg.half_length > 0.0 && cfg.half_length.is_finite()) {
        return Err(anyhow::anyhow!("half_length must be positive, got {}", cfg.half_length).into());
    }
    let (sidecar, _) = provenance::resolve("widths", &cfg)?;

    let mask = load_mask(mask_path)?;
    let reaches = parse_centerlines(centerlines_path)?;
    let scene = widths_for_scene(&mask, &reaches, cfg.half_length, cfg.width_mode)?;

    let n_nodes: usize = reaches.iter().map(|r| r.nodes.len()).sum();
    if scene.estimates.len() + scene.skipped.len() != n_nodes {
        return Err(internal(format!(
            "{} estimates + {} skipped nodes != {n_nodes} input nodes",
            scene.estimates.len(),
            scene.skipped.len()
        )));
    }
    for s in &scene.skipped {
        eprintln!("skipped node {} (reach {}): {}", s.node_id, s.reach_id, s.reason);
    }
    write_widths_csv(out, &scene.estimates)?;

    if let Some(path) = &cfg.transects_geojson {
        let transects: Vec<_> = reaches
            .iter()
            .flat_map(|reach| {
                (0..reach.nodes.len()).filter_map(move |i| {
                    let tangent = node_tangent(reach, i).ok()?;
                    Some(make_transect(&reach.nodes[i], tangent, cfg.half_length))
                })
            })
            .collect();
        let text = serde_json::to_string_pretty(&transects_to_geojson(&transects)).context("serializing transects")?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    provenance::write_sidecar(out, &sidecar)?;
    eprintln!(
        "{} node widths written to {} ({} skipped)",
        scene.estimates.len(),
        out.display(),
        scene.skipped.len()
    );
    Ok(())
}

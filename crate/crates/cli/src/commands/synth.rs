use anyhow::Context;
use serde::Serialize;

use rivwidth_core::centerline::centerlines_to_geojson;
use rivwidth_core::numfmt::sig6;
use rivwidth_core::raster::{write_mask_geotiff, write_npy_stack, write_raster_geotiff};
use rivwidth_core::synth::{gen_scene, sweep, uniform_orientations, SynthSpec, SWEEP_HEADER};

use super::create_dir;
use crate::config::{required, set, set_list, SynthSceneConfig, SynthSweepConfig};
use crate::provenance::{self, Provenance};
use crate::{CmdResult, SynthSceneArgs, SynthSweepArgs};

#[derive(Serialize)]
struct SceneSummary<'a> {
    #[serde(flatten)]
    provenance: Provenance,
    spec: &'a SynthSpec,
    analytic_width_m: f64,
    n_nodes: usize,
    water_px: usize,
}

pub fn run_scene(args: SynthSceneArgs, mut cfg: SynthSceneConfig) -> CmdResult {
    set(&mut cfg.out_dir, args.out_dir.map(Some));
    let spec = &mut cfg.spec;
    set(&mut spec.river.kind, args.kind);
    set(&mut spec.river.width_m, args.width);
    set(&mut spec.river.orientation_rad, args.orientation);
    set(&mut spec.river.amplitude_m, args.amplitude);
    set(&mut spec.river.wavelength_m, args.wavelength);
    set(&mut spec.river.axis_offset_m, args.axis_offset);
    set(&mut spec.pixel_size, args.pixel_size);
    set(&mut spec.scene_px, args.scene_px);
    set(&mut spec.radiometry.noise_sd, args.noise_sd);
    set(&mut spec.seed, args.seed);

    let out_dir = required(&cfg.out_dir, "--out-dir")?.clone();
    let (sidecar, prov) = provenance::resolve("synth scene", &cfg)?;
    let scene = gen_scene(&cfg.spec)?;

    create_dir(&out_dir)?;
    write_npy_stack(&out_dir.join("image"), &scene.raster, None)?;
    write_raster_geotiff(&out_dir.join("image.tif"), &scene.raster)?;
    write_mask_geotiff(&out_dir.join("gt_mask.tif"), &scene.gt)?;
    let geojson = centerlines_to_geojson(std::slice::from_ref(&scene.reach));
    let path = out_dir.join("centerline.geojson");
    let text = serde_json::to_string_pretty(&geojson).context("serializing centerline")?;
    std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    provenance::write_json_report(
        &out_dir.join("scene.json"),
        &SceneSummary {
            provenance: prov,
            spec: &scene.spec,
            analytic_width_m: scene.analytic_width(),
            n_nodes: scene.reach.nodes.len(),
            water_px: scene.gt.water_count(),
        },
    )?;
    provenance::write_sidecar(&out_dir, &sidecar)?;
    eprintln!(
        "scene with {} nodes written to {}",
        scene.reach.nodes.len(),
        out_dir.display()
    );
    Ok(())
}

pub fn run_sweep(args: SynthSweepArgs, mut cfg: SynthSweepConfig) -> CmdResult {
    set(&mut cfg.out, args.out.map(Some));
    let spec = &mut cfg.spec;
    set_list(&mut spec.widths_m, args.widths);
    set(&mut spec.orientations_rad, args.orientations.map(uniform_orientations));
    set(&mut spec.pixel_size, args.pixel_size);
    set(&mut spec.trials, args.trials);
    set(&mut spec.seed, args.seed);
    set(&mut spec.scene_extent_m, args.scene_extent);
    set(&mut spec.half_length_m, args.half_length);

    let out = required(&cfg.out, "--out")?.clone();
    let (sidecar, _) = provenance::resolve("synth sweep", &cfg)?;
    let rows = sweep(&cfg.spec)?;

    let mut w = csv::Writer::from_path(&out).with_context(|| format!("writing {}", out.display()))?;
    w.write_record(SWEEP_HEADER)?;
    for r in &rows {
        w.write_record([
            sig6(r.width_m),
            sig6(r.orientation_rad),
            sig6(r.pixel_size),
            r.n_nodes.to_string(),
            r.n_excluded.to_string(),
            sig6(r.max_abs_err_m),
            sig6(r.mean_abs_err_m),
            sig6(r.median_abs_err_m),
            sig6(r.centered_err_m),
        ])?;
    }
    w.flush().with_context(|| format!("writing {}", out.display()))?;
    provenance::write_sidecar(&out, &sidecar)?;
    let worst = rows.iter().map(|r| r.max_abs_err_m).fold(0.0, f64::max);
    eprintln!("{} sweep cells, worst node error {} m", rows.len(), sig6(worst));
    Ok(())
}

use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::Context;
use rayon::prelude::*;
use serde::Serialize;

use rivwidth_core::raster::{load_raster, minmax_normalize, write_field_geotiff, write_mask_geotiff, RasterFormat};
use rivwidth_core::segmentation::{ndwi_from_raster, otsu_from_values, otsu_threshold, threshold_mask, ScalarField};

use super::{create_dir, input_stem, out_or_default};
use crate::config::{set, set_list, InputFormat, SegmentConfig};
use crate::provenance::{self, Provenance};
use crate::{CmdResult, SegmentArgs};

#[derive(Serialize)]
struct SceneSummary {
    input: PathBuf,
    mask: PathBuf,
    ndwi: PathBuf,
    threshold: f64,
    /// "otsu", "global-otsu" or "fixed".
    threshold_source: &'static str,
    valid_px: usize,
    water_px: usize,
}

#[derive(Serialize)]
struct Summary {
    #[serde(flatten)]
    provenance: Provenance,
    method: &'static str,
    scenes: Vec<SceneSummary>,
}

pub fn run(args: SegmentArgs, mut cfg: SegmentConfig) -> CmdResult {
    set_list(&mut cfg.rasters, args.rasters);
    set(&mut cfg.format, args.format.map(Some));
    set(&mut cfg.method, args.method);
    set(&mut cfg.green_band, args.green_band);
    set(&mut cfg.nir_band, args.nir_band);
    set(&mut cfg.threshold, args.threshold.map(Some));
    set(&mut cfg.otsu_bins, args.otsu_bins);
    cfg.global_otsu |= args.global_otsu;
    cfg.normalize |= args.normalize;
    set(&mut cfg.out_dir, args.out_dir.map(Some));

    if cfg.rasters.is_empty() {
        return Err(anyhow::anyhow!("no input rasters").into());
    }
    let stems: BTreeSet<String> = cfg.rasters.iter().map(|p| input_stem(p)).collect();
    if stems.len() != cfg.rasters.len() {
        return Err(anyhow::anyhow!("input rasters must have distinct names").into());
    }
    let out_dir = out_or_default(&cfg.out_dir, ".");
    let (sidecar, prov) = provenance::resolve("segment", &cfg)?;

    let fields: Vec<ScalarField> = cfg
        .rasters
        .par_iter()
        .map(|path| {
            let format = match cfg.format {
                Some(InputFormat::Geotiff) => RasterFormat::GeoTiff,
                Some(InputFormat::NpyStack) => RasterFormat::NpyStack,
                None => RasterFormat::infer(path),
            };
            let mut raster = load_raster(path, format)?;
            if cfg.normalize {
                raster = minmax_normalize(&raster)?;
            }
            let field = ndwi_from_raster(&raster, &cfg.green_band, &cfg.nir_band)?;
            if field.valid_values().next().is_none() {
                anyhow::bail!("{}: no valid NDWI pixels (all nodata?)", path.display());
            }
            Ok(field)
        })
        .collect::<anyhow::Result<_>>()?;

    let pooled = match (cfg.threshold, cfg.global_otsu) {
        (None, true) => Some(otsu_from_values(
            fields.iter().flat_map(|f| f.valid_values()),
            cfg.otsu_bins,
        )?),
        _ => None,
    };

    create_dir(&out_dir)?;
    let scenes = cfg
        .rasters
        .par_iter()
        .zip(&fields)
        .map(|(path, field)| {
            let (threshold, source) = match (cfg.threshold, &pooled) {
                (Some(t), _) => (t, "fixed"),
                (None, Some(p)) => (p.threshold, "global-otsu"),
                (None, None) => (
                    otsu_threshold(field, cfg.otsu_bins)
                        .with_context(|| format!("thresholding {}", path.display()))?
                        .threshold,
                    "otsu",
                ),
            };
            let mask = threshold_mask(field, threshold)?;
            let stem = input_stem(path);
            let mask_path = out_dir.join(format!("{stem}_mask.tif"));
            let ndwi_path = out_dir.join(format!("{stem}_ndwi.tif"));
            write_mask_geotiff(&mask_path, &mask)?;
            write_field_geotiff(&ndwi_path, field)?;
            Ok(SceneSummary {
                input: path.clone(),
                mask: mask_path,
                ndwi: ndwi_path,
                threshold,
                threshold_source: source,
                valid_px: field.validity().as_slice().iter().filter(|&&v| v).count(),
                water_px: mask.water_count(),
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;

    for s in &scenes {
        eprintln!(
            "{}: threshold {} ({}), {} water of {} valid pixels",
            s.input.display(),
            rivwidth_core::numfmt::sig6(s.threshold),
            s.threshold_source,
            s.water_px,
            s.valid_px
        );
    }
    provenance::write_json_report(
        &out_dir.join("segment.json"),
        &Summary {
            provenance: prov,
            method: "ndwi",
            scenes,
        },
    )?;
    provenance::write_sidecar(&out_dir, &sidecar)?;
    Ok(())
}

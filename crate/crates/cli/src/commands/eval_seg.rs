use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use rivwidth_core::raster::{
    load_classes, load_field, load_mask, load_raster, resample_band, resample_classes, resample_mask, RasterFormat,
    ResampleMethod, ScalarField, WaterMask,
};
use rivwidth_core::segmentation::{bce_loss, fp_attribution, seg_metrics, FpAttribution, SegMetrics};

use super::out_or_default;
use crate::config::{set, set_list, EvalSegConfig};
use crate::provenance::{self, Provenance};
use crate::{CmdResult, EvalSegArgs};

#[derive(Serialize)]
struct SceneEval {
    pred: PathBuf,
    gt: PathBuf,
    /// The prediction was resampled onto the ground-truth grid.
    resampled: bool,
    metrics: SegMetrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    bce: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fp_attribution: Option<FpAttribution>,
}

#[derive(Serialize)]
struct EvalSegReport {
    #[serde(flatten)]
    provenance: Provenance,
    n_scenes: usize,
    /// Confusion counts pooled over all scenes.
    overall: SegMetrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_bce: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fp_attribution: Option<FpAttribution>,
    scenes: Vec<SceneEval>,
}

fn on_grid(mask: WaterMask, gt: &WaterMask) -> anyhow::Result<(WaterMask, bool)> {
    if mask.geometry().same_grid(gt.geometry()) {
        Ok((mask, false))
    } else {
        Ok((resample_mask(&mask, gt.geometry())?, true))
    }
}

fn load_prob(path: &Path, gt: &WaterMask) -> anyhow::Result<ScalarField> {
    let field = load_field(path)?;
    if field.geometry().same_grid(gt.geometry()) {
        return Ok(field);
    }
    let raster = load_raster(path, RasterFormat::infer(path))?;
    let band = raster.band_names()[0].to_string();
    Ok(resample_band(&raster, &band, gt.geometry(), ResampleMethod::Bilinear)?)
}

fn check_len(name: &str, list: &[PathBuf], n: usize) -> anyhow::Result<()> {
    if !list.is_empty() && list.len() != n {
        anyhow::bail!("{} {name} files given for {n} predictions", list.len());
    }
    Ok(())
}

pub fn run(args: EvalSegArgs, mut cfg: EvalSegConfig) -> CmdResult {
    set_list(&mut cfg.pred, args.pred);
    set_list(&mut cfg.gt, args.gt);
    set_list(&mut cfg.prob, args.prob);
    set_list(&mut cfg.lulc, args.lulc);
    set(&mut cfg.out, args.out.map(Some));

    let n = cfg.pred.len();
    if n == 0 {
        return Err(anyhow::anyhow!("no predicted masks given (--pred)").into());
    }
    if cfg.gt.len() != n {
        return Err(anyhow::anyhow!("{} ground-truth masks given for {n} predictions", cfg.gt.len()).into());
    }
    check_len("probability", &cfg.prob, n)?;
    check_len("land-cover", &cfg.lulc, n)?;
    let out = out_or_default(&cfg.out, "eval_seg.json");
    let (sidecar, prov) = provenance::resolve("eval-seg", &cfg)?;

    let scenes = (0..n)
        .into_par_iter()
        .map(|i| {
            let gt = load_mask(&cfg.gt[i])?;
            let (pred, resampled) = on_grid(load_mask(&cfg.pred[i])?, &gt)?;
            let metrics = seg_metrics(&pred, &gt)?;
            let bce = match cfg.prob.get(i) {
                Some(p) => Some(bce_loss(&load_prob(p, &gt)?, &gt)?),
                None => None,
            };
            let fp = match cfg.lulc.get(i) {
                Some(p) => {
                    let classes = load_classes(p)?;
                    let classes = if classes.geometry().same_grid(gt.geometry()) {
                        classes
                    } else {
                        resample_classes(&classes, gt.geometry())?
                    };
                    Some(fp_attribution(&pred, &gt, &classes)?)
                }
                None => None,
            };
            Ok(SceneEval {
                pred: cfg.pred[i].clone(),
                gt: cfg.gt[i].clone(),
                resampled,
                metrics,
                bce,
                fp_attribution: fp,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;

    let overall = scenes
        .iter()
        .skip(1)
        .fold(scenes[0].metrics, |acc, s| acc.merge(&s.metrics));
    let bces: Vec<f64> = scenes.iter().filter_map(|s| s.bce).collect();
    let mean_bce = (!bces.is_empty()).then(|| bces.iter().sum::<f64>() / bces.len() as f64);
    let fp = scenes
        .iter()
        .filter_map(|s| s.fp_attribution.clone())
        .reduce(|a, b| a.merge(&b));

    eprintln!(
        "F1 {} precision {} recall {} over {n} scenes",
        rivwidth_core::numfmt::sig6(overall.f1),
        rivwidth_core::numfmt::sig6(overall.precision),
        rivwidth_core::numfmt::sig6(overall.recall)
    );
    provenance::write_json_report(
        &out,
        &EvalSegReport {
            provenance: prov,
            n_scenes: n,
            overall,
            mean_bce,
            fp_attribution: fp,
            scenes,
        },
    )?;
    provenance::write_sidecar(&out, &sidecar)?;
    Ok(())
}

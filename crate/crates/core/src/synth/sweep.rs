use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng::SplitMix64;
use super::scene::{gen_scene, RiverSpec, SynthSpec};
use crate::centerline::{make_transect, node_tangent, DEFAULT_HALF_LENGTH};
use crate::error::{Error, Result};
use crate::width::{median, node_width, WidthMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub widths_m: Vec<f64>,
    pub orientations_rad: Vec<f64>,
    pub pixel_size: f64,
    /// Scenes per (width, orientation). Trial 0 puts the river axis on the scene center;
    /// later trials shift it by a random fraction of a pixel across the river.
    pub trials: usize,
    pub seed: u64,
    /// Side length of the square scenes, in meters.
    pub scene_extent_m: f64,
    pub half_length_m: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            widths_m: vec![30.0, 90.0, 150.0, 300.0, 450.0],
            orientations_rad: uniform_orientations(16),
            pixel_size: 3.0,
            trials: 4,
            seed: 0,
            scene_extent_m: 1500.0,
            half_length_m: DEFAULT_HALF_LENGTH,
        }
    }
}

/// `n` orientations `k·π/n`, `k = 0..n`.
pub fn uniform_orientations(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 * std::f64::consts::PI / n as f64).collect()
}

/// Width errors of one (width, orientation) cell of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub width_m: f64,
    pub orientation_rad: f64,
    pub pixel_size: f64,
    pub n_nodes: usize,
    /// Nodes whose river crossing comes within two pixels of the scene edge.
    pub n_excluded: usize,
    pub max_abs_err_m: f64,
    pub mean_abs_err_m: f64,
    pub median_abs_err_m: f64,
    /// Error of the axis-centered trial at the node nearest the scene center.
    pub centered_err_m: f64,
}

pub const SWEEP_HEADER: [&str; 9] = [
    "width_m",
    "orientation_rad",
    "pixel_size",
    "n_nodes",
    "n_excluded",
    "max_abs_err_m",
    "mean_abs_err_m",
    "median_abs_err_m",
    "centered_err_m",
];

/// Runs noiseless straight-river scenes over every (width, orientation) pair and measures
/// pixel-count node widths against the true width.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    if spec.trials == 0 {
        return Err(Error::Synth("sweep needs at least one trial".into()));
    }
    if let Some(w) = spec.widths_m.iter().find(|&&w| !(w > 0.0 && w <= 500.0)) {
        return Err(Error::Synth(format!("sweep widths must lie in (0, 500] m, got {w}")));
    }
    if !(spec.pixel_size > 0.0) || !(spec.scene_extent_m >= spec.pixel_size) {
        return Err(Error::Synth(format!(
            "invalid pixel size {} for a {} m scene",
            spec.pixel_size, spec.scene_extent_m
        )));
    }
    let scene_px = (spec.scene_extent_m / spec.pixel_size).round() as usize;

    let mut rng = SplitMix64::new(spec.seed);
    let mut cells = Vec::new();
    for &w in &spec.widths_m {
        for &theta in &spec.orientations_rad {
            let offsets: Vec<f64> = (0..spec.trials)
                .map(|i| if i == 0 { 0.0 } else { rng.next_f64() * spec.pixel_size })
                .collect();
            cells.push((w, theta, offsets));
        }
    }

    cells
        .par_iter()
        .map(|(w, theta, offsets)| sweep_cell(spec, scene_px, *w, *theta, offsets))
        .collect()
}

fn sweep_cell(spec: &SweepSpec, scene_px: usize, w: f64, theta: f64, offsets: &[f64]) -> Result<SweepRow> {
    let mut errors = Vec::new();
    let mut excluded = 0;
    let mut centered = None;
    for (trial, &offset) in offsets.iter().enumerate() {
        let scene = gen_scene(&SynthSpec {
            scene_px,
            pixel_size: spec.pixel_size,
            river: RiverSpec {
                width_m: w,
                orientation_rad: theta,
                axis_offset_m: offset,
                ..RiverSpec::default()
            },
            seed: spec.seed,
            ..SynthSpec::default()
        })?;
        let extent = scene.spec.extent_m();
        let margin = w / 2.0 + 2.0 * spec.pixel_size;
        let mid = extent / 2.0;
        let mut best_center = f64::INFINITY;
        for i in 0..scene.reach.nodes.len() {
            let node = &scene.reach.nodes[i];
            let t = make_transect(node, node_tangent(&scene.reach, i)?, spec.half_length_m);
            let inside = [-margin, margin].iter().all(|&m| {
                let p = node.position + t.direction * m;
                p.x >= 0.0 && p.x <= extent && p.y >= 0.0 && p.y <= extent
            });
            if !inside || margin > spec.half_length_m {
                excluded += 1;
                continue;
            }
            let err = node_width(&scene.gt, &t, WidthMode::PixelCount).width_m - w;
            errors.push(err.abs());
            let d = (node.position.x - mid).hypot(node.position.y - mid);
            if trial == 0 && d < best_center {
                best_center = d;
                centered = Some(err);
            }
        }
    }
    let n = errors.len();
    Ok(SweepRow {
        width_m: w,
        orientation_rad: theta,
        pixel_size: spec.pixel_size,
        n_nodes: n,
        n_excluded: excluded,
        max_abs_err_m: errors.iter().copied().fold(0.0, f64::max),
        mean_abs_err_m: if n > 0 {
            errors.iter().sum::<f64>() / n as f64
        } else {
            0.0
        },
        median_abs_err_m: median(&mut errors).unwrap_or(0.0),
        centered_err_m: centered.unwrap_or(f64::NAN),
    })
}

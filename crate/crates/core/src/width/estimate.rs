use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::centerline::{make_transect, node_tangent, transect_pixels, transect_walk, Reach, Transect, TransectWalk};
use crate::error::{Error, Result};
use crate::raster::WaterMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WidthMode {
    /// All water samples along the transect.
    #[default]
    PixelCount,
    /// Only the run of consecutive water samples containing, or nearest to, the node.
    ContiguousRun,
}

impl WidthMode {
    pub fn as_str(self) -> &'static str {
        match self {
            WidthMode::PixelCount => "pixel-count",
            WidthMode::ContiguousRun => "contiguous-run",
        }
    }
}

impl fmt::Display for WidthMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WidthMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pixel-count" => Ok(WidthMode::PixelCount),
            "contiguous-run" => Ok(WidthMode::ContiguousRun),
            other => Err(Error::InvalidValue(format!(
                "unknown width mode {other:?} (expected pixel-count or contiguous-run)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WidthFlags {
    pub truncated_at_boundary: bool,
    pub contains_nodata: bool,
    pub no_water: bool,
}

impl WidthFlags {
    pub fn any(self) -> bool {
        self.truncated_at_boundary || self.contains_nodata || self.no_water
    }

    fn names(self) -> impl Iterator<Item = &'static str> {
        [
            (self.truncated_at_boundary, "truncated_at_boundary"),
            (self.contains_nodata, "contains_nodata"),
            (self.no_water, "no_water"),
        ]
        .into_iter()
        .filter_map(|(set, name)| set.then_some(name))
    }
}

/// `|`-separated flag names, empty when no flag is set.
impl fmt::Display for WidthFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.names().collect();
        f.write_str(&names.join("|"))
    }
}

impl FromStr for WidthFlags {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut flags = WidthFlags::default();
        for name in s.split(['|', ';']).map(str::trim).filter(|n| !n.is_empty()) {
            match name {
                "truncated_at_boundary" => flags.truncated_at_boundary = true,
                "contains_nodata" => flags.contains_nodata = true,
                "no_water" => flags.no_water = true,
                other => return Err(Error::InvalidValue(format!("unknown width flag {other:?}"))),
            }
        }
        Ok(flags)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthEstimate {
    pub node_id: String,
    pub reach_id: String,
    pub width_m: f64,
    pub water_px: u64,
    /// Transect length represented by one sample; equals the pixel size when the transect is
    /// axis-aligned and grows to `√2·Δ` at 45°.
    pub step_m: f64,
    pub mode: WidthMode,
    pub flags: WidthFlags,
}

/// Water pixels of the longest-relevant run: the run containing the center sample, or the
/// nearest run to it (earlier run on ties).
fn contiguous_run(water: &[bool], center: usize) -> u64 {
    let mut best: Option<(usize, usize)> = None; // (distance, length)
    let mut i = 0;
    while i < water.len() {
        if !water[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < water.len() && water[i] {
            i += 1;
        }
        let end = i - 1;
        let distance = if center < start {
            start - center
        } else {
            center.saturating_sub(end)
        };
        if best.is_none_or(|(d, _)| distance < d) {
            best = Some((distance, end - start + 1));
        }
    }
    best.map_or(0, |(_, len)| len as u64)
}

fn estimate_from_walk(mask: &WaterMask, t: &Transect, walk: &TransectWalk, mode: WidthMode) -> WidthEstimate {
    let water: Vec<bool> = walk
        .cells
        .iter()
        .map(|c| c.in_bounds && mask.is_water(c.row as usize, c.col as usize))
        .collect();
    let water_px = match mode {
        WidthMode::PixelCount => water.iter().filter(|&&w| w).count() as u64,
        WidthMode::ContiguousRun => contiguous_run(&water, walk.center_index),
    };

    let mut flags = WidthFlags {
        no_water: water_px == 0,
        ..WidthFlags::default()
    };
    for c in transect_pixels(t, mask.geometry()) {
        if !c.in_bounds {
            flags.truncated_at_boundary = true;
        } else if !mask.is_valid(c.row as usize, c.col as usize) {
            flags.contains_nodata = true;
        }
    }
    WidthEstimate {
        node_id: t.node_id.clone(),
        reach_id: t.reach_id.clone(),
        width_m: water_px as f64 * walk.step_m,
        water_px,
        step_m: walk.step_m,
        mode,
        flags,
    }
}

/// Width of the water crossed by a transect.
///
/// Samples are taken once per row or column along the transect's dominant axis, so each
/// sample stands for `step_m` meters of transect; width is the water sample count times
/// `step_m`. Flags come from the full supercover of the transect.
pub fn node_width(mask: &WaterMask, t: &Transect, mode: WidthMode) -> WidthEstimate {
    estimate_from_walk(mask, t, &transect_walk(t, mask.geometry()), mode)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedNode {
    pub node_id: String,
    pub reach_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SceneWidths {
    /// Ordered by reach, then node order.
    pub estimates: Vec<WidthEstimate>,
    pub skipped: Vec<SkippedNode>,
}

/// Widths for every node whose transect touches the mask. Nodes whose transect misses the
/// grid, or whose tangent is undefined, are skipped.
pub fn widths_for_scene(mask: &WaterMask, reaches: &[Reach], half_length: f64, mode: WidthMode) -> Result<SceneWidths> {
    if !(half_length > 0.0 && half_length.is_finite()) {
        return Err(Error::InvalidValue(format!(
            "transect half length must be > 0, got {half_length}"
        )));
    }
    let jobs: Vec<(&Reach, usize)> = reaches
        .iter()
        .flat_map(|r| (0..r.nodes.len()).map(move |i| (r, i)))
        .collect();
    let results: Vec<std::result::Result<WidthEstimate, SkippedNode>> = jobs
        .par_iter()
        .map(|&(reach, i)| {
            let node = &reach.nodes[i];
            let skip = |reason: String| SkippedNode {
                node_id: node.node_id.clone(),
                reach_id: node.reach_id.clone(),
                reason,
            };
            let tangent = node_tangent(reach, i).map_err(|e| skip(e.to_string()))?;
            let t = make_transect(node, tangent, half_length);
            let walk = transect_walk(&t, mask.geometry());
            let touches = walk.cells.iter().any(|c| c.in_bounds)
                || transect_pixels(&t, mask.geometry()).iter().any(|c| c.in_bounds);
            if !touches {
                return Err(skip("transect does not intersect the mask".into()));
            }
            Ok(estimate_from_walk(mask, &t, &walk, mode))
        })
        .collect();

    let mut out = SceneWidths::default();
    for r in results {
        match r {
            Ok(e) => out.estimates.push(e),
            Err(s) => out.skipped.push(s),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alignment {
    /// Transect runs along a grid axis.
    Edge,
    /// Transect cuts pixels diagonally.
    Diagonal,
}

/// Worst-case width error of a transect count: one pixel per bank, measured along the
/// transect.
pub fn pixel_error_bound(pixel_size: f64, alignment: Alignment) -> f64 {
    match alignment {
        Alignment::Edge => 2.0 * pixel_size,
        Alignment::Diagonal => 2.0 * std::f64::consts::SQRT_2 * pixel_size,
    }
}

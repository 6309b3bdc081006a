use serde_json::{json, Value};

use super::reach::{Node, Reach, Vec2};
use crate::error::{Error, Result};
use crate::raster::GridGeometry;

/// Default transect half length in meters.
pub const DEFAULT_HALF_LENGTH: f64 = 500.0;

/// Grid coordinates closer than this (in pixels) to a grid line count as lying on it.
const EDGE_TOL: f64 = 1e-9;

/// Unit tangent of the node polyline at `idx`: central difference for interior nodes,
/// one-sided at the ends.
pub fn node_tangent(reach: &Reach, idx: usize) -> Result<Vec2> {
    let n = reach.nodes.len();
    if n < 2 {
        return Err(Error::Centerline(format!(
            "reach {} has {n} node(s); a tangent needs at least 2",
            reach.reach_id
        )));
    }
    if idx >= n {
        return Err(Error::Centerline(format!(
            "node index {idx} out of range for reach {} with {n} nodes",
            reach.reach_id
        )));
    }
    let prev = idx.saturating_sub(1);
    let next = (idx + 1).min(n - 1);
    let d = reach.nodes[next].position - reach.nodes[prev].position;
    let len = d.norm();
    if len == 0.0 || !len.is_finite() {
        return Err(Error::Centerline(format!(
            "reach {}: nodes {} and {} coincide, tangent undefined at {}",
            reach.reach_id, reach.nodes[prev].node_id, reach.nodes[next].node_id, reach.nodes[idx].node_id
        )));
    }
    Ok(d * (1.0 / len))
}

/// A line segment through a node, orthogonal to the local tangent.
#[derive(Debug, Clone, PartialEq)]
pub struct Transect {
    pub node_id: String,
    pub reach_id: String,
    pub center: Vec2,
    /// Unit vector: the tangent rotated by +90°.
    pub direction: Vec2,
    pub half_length: f64,
}

impl Transect {
    pub fn endpoints(&self) -> (Vec2, Vec2) {
        let h = self.direction * self.half_length;
        (self.center - h, self.center + h)
    }

    /// Endpoints in continuous grid coordinates `(v, u)`.
    fn grid_endpoints(&self, g: &GridGeometry) -> ((f64, f64), (f64, f64)) {
        let (a, b) = self.endpoints();
        (g.map_to_grid(a.x, a.y), g.map_to_grid(b.x, b.y))
    }
}

pub fn make_transect(node: &Node, tangent: Vec2, half_length: f64) -> Transect {
    Transect {
        node_id: node.node_id.clone(),
        reach_id: node.reach_id.clone(),
        center: node.position,
        direction: tangent.perp(),
        half_length,
    }
}

/// Transects for every node of a reach; fails on the first node whose tangent is undefined.
pub fn reach_transects(reach: &Reach, half_length: f64) -> Result<Vec<Transect>> {
    (0..reach.nodes.len())
        .map(|i| Ok(make_transect(&reach.nodes[i], node_tangent(reach, i)?, half_length)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransectCell {
    pub row: i64,
    pub col: i64,
    pub in_bounds: bool,
}

impl TransectCell {
    fn new(row: i64, col: i64, g: &GridGeometry) -> Self {
        TransectCell {
            row,
            col,
            in_bounds: g.contains_cell(row, col),
        }
    }
}

fn candidate_indices(x: f64) -> (i64, Option<i64>) {
    let r = x.round();
    if (x - r).abs() < EDGE_TOL {
        (r as i64 - 1, Some(r as i64))
    } else {
        (x.floor() as i64, None)
    }
}

/// Parameters in `[0, 1]` where `a + t·d` crosses an integer.
fn crossings(a: f64, d: f64, out: &mut Vec<f64>) {
    if d == 0.0 {
        return;
    }
    let (lo, hi) = if d > 0.0 { (a, a + d) } else { (a + d, a) };
    let mut k = lo.ceil();
    while k <= hi {
        out.push(((k - a) / d).clamp(0.0, 1.0));
        k += 1.0;
    }
}

/// Supercover of the transect segment on `g`: every cell whose closed square the segment
/// touches, once each, in order of first contact along the segment.
pub fn transect_pixels(t: &Transect, g: &GridGeometry) -> Vec<TransectCell> {
    supercover_with_params(t, g).into_iter().map(|(c, _)| c).collect()
}

pub(crate) fn supercover_with_params(t: &Transect, g: &GridGeometry) -> Vec<(TransectCell, f64)> {
    let ((v0, u0), (v1, u1)) = t.grid_endpoints(g);
    let (dv, du) = (v1 - v0, u1 - u0);

    let mut events = vec![0.0, 1.0];
    crossings(u0, du, &mut events);
    crossings(v0, dv, &mut events);
    events.sort_by(f64::total_cmp);
    events.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

    // probe each event point and the midpoint of each interval between events
    let mut probes = Vec::with_capacity(2 * events.len());
    for (i, &t0) in events.iter().enumerate() {
        probes.push(t0);
        if let Some(&t1) = events.get(i + 1) {
            probes.push(0.5 * (t0 + t1));
        }
    }

    let mut out: Vec<(TransectCell, f64)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for s in probes {
        let (rows, cols) = (candidate_indices(v0 + s * dv), candidate_indices(u0 + s * du));
        let rows = [Some(rows.0), rows.1];
        let cols = [Some(cols.0), cols.1];
        for r in rows.iter().flatten() {
            for c in cols.iter().flatten() {
                if seen.insert((*r, *c)) {
                    out.push((TransectCell::new(*r, *c, g), s));
                }
            }
        }
    }
    out
}

/// One sample per row or column crossed along the transect's dominant axis.
#[derive(Debug, Clone, PartialEq)]
pub struct TransectWalk {
    pub cells: Vec<TransectCell>,
    /// Segment length in meters between consecutive samples.
    pub step_m: f64,
    /// Sample closest to the transect center.
    pub center_index: usize,
}

/// Samples the segment where it crosses the center line of each column (if it runs more
/// across columns than rows) or of each row, so each sample represents `step_m` of segment.
pub fn transect_walk(t: &Transect, g: &GridGeometry) -> TransectWalk {
    let ((v0, u0), (v1, u1)) = t.grid_endpoints(g);
    let (dv, du) = (v1 - v0, u1 - u0);
    let along_cols = du.abs() >= dv.abs();
    let (a0, da) = if along_cols { (u0, du) } else { (v0, dv) };
    let length_px = du.hypot(dv);

    let mut cells = Vec::new();
    let mut params = Vec::new();
    if da != 0.0 {
        let (lo, hi) = if da > 0.0 { (a0, a0 + da) } else { (a0 + da, a0) };
        let first = (lo - 0.5).floor() as i64 + 1;
        let last = (hi - 0.5).floor() as i64;
        let mut ks: Vec<i64> = (first..=last).collect();
        if da < 0.0 {
            ks.reverse();
        }
        for k in ks {
            let s = (k as f64 + 0.5 - a0) / da;
            let cell = if along_cols {
                TransectCell::new((v0 + s * dv).floor() as i64, k, g)
            } else {
                TransectCell::new(k, (u0 + s * du).floor() as i64, g)
            };
            cells.push(cell);
            params.push(s);
        }
    }
    if cells.is_empty() {
        let (v, u) = g.map_to_grid(t.center.x, t.center.y);
        return TransectWalk {
            cells: vec![TransectCell::new(v.floor() as i64, u.floor() as i64, g)],
            step_m: g.pixel_size,
            center_index: 0,
        };
    }
    let center_index = params
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 0.5).abs().total_cmp(&(b.1 - 0.5).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    TransectWalk {
        cells,
        step_m: g.pixel_size * length_px / da.abs(),
        center_index,
    }
}

/// Debug output: one LineString feature per transect.
pub fn transects_to_geojson(transects: &[Transect]) -> Value {
    let features: Vec<Value> = transects
        .iter()
        .map(|t| {
            let (a, b) = t.endpoints();
            json!({
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": [[a.x, a.y], [b.x, b.y]]},
                "properties": {
                    "node_id": t.node_id,
                    "reach_id": t.reach_id,
                    "half_length": t.half_length,
                }
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

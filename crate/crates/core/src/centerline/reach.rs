use std::collections::{BTreeMap, HashSet};
use std::ops::{Add, Mul, Neg, Sub};
use std::path::Path;

use serde_json::{json, Value};

use crate::error::{Error, Result};

/// A point or displacement in map coordinates (meters).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Rotation by +90° (counter-clockwise).
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// A centerline node at which width is measured.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub node_id: String,
    pub reach_id: String,
    pub order: i64,
    pub position: Vec2,
    /// Reference widths in meters keyed by source, e.g. `sword_landsat`, `swot`.
    pub ref_widths: BTreeMap<String, f64>,
}

/// Ordered nodes of one reach; node order is the along-stream direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Reach {
    pub reach_id: String,
    pub nodes: Vec<Node>,
}

impl Reach {
    /// Same nodes in reverse order (orders negated so they stay increasing).
    pub fn reversed(&self) -> Reach {
        let nodes = self
            .nodes
            .iter()
            .rev()
            .map(|n| Node {
                order: -n.order,
                ..n.clone()
            })
            .collect();
        Reach {
            reach_id: self.reach_id.clone(),
            nodes,
        }
    }
}

fn id_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn centerline_err(msg: impl Into<String>) -> Error {
    Error::Centerline(msg.into())
}

pub fn parse_centerlines(path: &Path) -> Result<Vec<Reach>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    parse_centerlines_value(&value)
}

/// Assembles reaches from a GeoJSON FeatureCollection of node Points with properties
/// `node_id`, `reach_id`, `order` and optional `ref_widths` (object of name → meters).
///
/// Reaches are returned sorted by `reach_id`, nodes by `order`.
pub fn parse_centerlines_value(value: &Value) -> Result<Vec<Reach>> {
    if value.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(centerline_err("expected a GeoJSON FeatureCollection"));
    }
    let features = value
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| centerline_err("FeatureCollection has no features array"))?;

    let mut reaches: BTreeMap<String, Vec<Node>> = BTreeMap::new();
    let mut seen_nodes = HashSet::new();
    for (i, feature) in features.iter().enumerate() {
        let geometry = feature
            .get("geometry")
            .ok_or_else(|| centerline_err(format!("feature {i} has no geometry")))?;
        if geometry.get("type").and_then(Value::as_str) != Some("Point") {
            return Err(centerline_err(format!("feature {i} is not a Point")));
        }
        let coords = geometry
            .get("coordinates")
            .and_then(Value::as_array)
            .filter(|c| c.len() >= 2)
            .ok_or_else(|| centerline_err(format!("feature {i} has no coordinates")))?;
        let position = Vec2::new(
            coords[0].as_f64().unwrap_or(f64::NAN),
            coords[1].as_f64().unwrap_or(f64::NAN),
        );
        if !position.is_finite() {
            return Err(centerline_err(format!("feature {i} has non-numeric coordinates")));
        }
        let props = feature
            .get("properties")
            .and_then(Value::as_object)
            .ok_or_else(|| centerline_err(format!("feature {i} has no properties")))?;
        let required = |key: &str| {
            props
                .get(key)
                .ok_or_else(|| centerline_err(format!("feature {i} is missing property {key:?}")))
        };
        let node_id = id_string(required("node_id")?)
            .ok_or_else(|| centerline_err(format!("feature {i}: node_id must be a string or number")))?;
        let reach_id = id_string(required("reach_id")?)
            .ok_or_else(|| centerline_err(format!("node {node_id}: reach_id must be a string or number")))?;
        let order = required("order")?
            .as_i64()
            .ok_or_else(|| centerline_err(format!("node {node_id}: order must be an integer")))?;
        let mut ref_widths = BTreeMap::new();
        if let Some(widths) = props.get("ref_widths") {
            let widths = widths
                .as_object()
                .ok_or_else(|| centerline_err(format!("node {node_id}: ref_widths must be an object")))?;
            for (name, w) in widths {
                if w.is_null() {
                    continue;
                }
                let w = w
                    .as_f64()
                    .ok_or_else(|| centerline_err(format!("node {node_id}: ref_widths.{name} is not a number")))?;
                ref_widths.insert(name.clone(), w);
            }
        }
        if !seen_nodes.insert(node_id.clone()) {
            return Err(centerline_err(format!("duplicate node_id {node_id}")));
        }
        reaches.entry(reach_id.clone()).or_default().push(Node {
            node_id,
            reach_id,
            order,
            position,
            ref_widths,
        });
    }

    let mut out = Vec::with_capacity(reaches.len());
    for (reach_id, mut nodes) in reaches {
        nodes.sort_by_key(|n| n.order);
        if let Some(pair) = nodes.windows(2).find(|w| w[0].order == w[1].order) {
            return Err(centerline_err(format!(
                "reach {reach_id}: nodes {} and {} share order {}",
                pair[0].node_id, pair[1].node_id, pair[1].order
            )));
        }
        out.push(Reach { reach_id, nodes });
    }
    Ok(out)
}

/// GeoJSON FeatureCollection of node Points, the inverse of [`parse_centerlines_value`].
pub fn centerlines_to_geojson(reaches: &[Reach]) -> Value {
    let features: Vec<Value> = reaches
        .iter()
        .flat_map(|r| &r.nodes)
        .map(|n| {
            json!({
                "type": "Feature",
                "geometry": { "type": "Point", "coordinates": [n.position.x, n.position.y] },
                "properties": {
                    "node_id": n.node_id,
                    "reach_id": n.reach_id,
                    "order": n.order,
                    "ref_widths": n.ref_widths,
                }
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(node: &str, reach: &str, order: i64, x: f64, y: f64) -> Value {
        json!({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [x, y]},
            "properties": {"node_id": node, "reach_id": reach, "order": order}
        })
    }

    fn collection(features: Vec<Value>) -> Value {
        json!({"type": "FeatureCollection", "features": features})
    }

    #[test]
    fn three_point_reach_in_order() {
        let fc = collection(vec![
            point("n2", "r1", 2, 400.0, 0.0),
            point("n0", "r1", 0, 0.0, 0.0),
            point("n1", "r1", 1, 200.0, 0.0),
        ]);
        let reaches = parse_centerlines_value(&fc).unwrap();
        assert_eq!(reaches.len(), 1);
        let ids: Vec<_> = reaches[0].nodes.iter().map(|n| n.node_id.as_str()).collect();
        assert_eq!(ids, ["n0", "n1", "n2"]);
    }

    #[test]
    fn interleaved_reaches_are_grouped() {
        let fc = collection(vec![
            point("a1", "A", 1, 0.0, 0.0),
            point("b0", "B", 0, 0.0, 0.0),
            point("a0", "A", 0, 0.0, 0.0),
            point("b1", "B", 1, 0.0, 0.0),
        ]);
        let reaches = parse_centerlines_value(&fc).unwrap();
        assert_eq!(reaches.len(), 2);
        assert_eq!(reaches[0].reach_id, "A");
        assert_eq!(reaches[0].nodes[0].node_id, "a0");
        assert_eq!(reaches[1].nodes[1].node_id, "b1");
    }

    #[test]
    fn duplicate_order_names_the_node() {
        let fc = collection(vec![point("x", "A", 3, 0.0, 0.0), point("y", "A", 3, 1.0, 0.0)]);
        let err = parse_centerlines_value(&fc).unwrap_err().to_string();
        assert!(
            err.contains("x") && err.contains("y") && err.contains("order 3"),
            "{err}"
        );
    }

    #[test]
    fn missing_property_is_reported() {
        let fc = collection(vec![json!({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [0.0, 0.0]},
            "properties": {"node_id": 7, "order": 0}
        })]);
        let err = parse_centerlines_value(&fc).unwrap_err().to_string();
        assert!(err.contains("reach_id"), "{err}");
    }

    #[test]
    fn numeric_ids_and_ref_widths() {
        let fc = collection(vec![json!({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [1.5, 2.5]},
            "properties": {"node_id": 81240100010011i64, "reach_id": 81240100011i64, "order": 0,
                           "ref_widths": {"swot": 41.9, "sword_landsat": null}}
        })]);
        let reaches = parse_centerlines_value(&fc).unwrap();
        let n = &reaches[0].nodes[0];
        assert_eq!(n.node_id, "81240100010011");
        assert_eq!(n.ref_widths.get("swot"), Some(&41.9));
        assert!(!n.ref_widths.contains_key("sword_landsat"));
    }

    #[test]
    fn geojson_round_trip() {
        let fc = collection(vec![point("n0", "r", 0, 1.0, 2.0), point("n1", "r", 1, 3.0, 4.0)]);
        let reaches = parse_centerlines_value(&fc).unwrap();
        let back = parse_centerlines_value(&centerlines_to_geojson(&reaches)).unwrap();
        assert_eq!(back, reaches);
    }
}

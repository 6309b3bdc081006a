use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::rng::SplitMix64;
use crate::centerline::{Node, Reach, Vec2};
use crate::error::{Error, Result};
use crate::raster::{Band, GridGeometry, Plane, Raster, WaterMask};

/// Node spacing along the river axis, in meters.
pub const NODE_SPACING_M: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiverKind {
    #[default]
    Straight,
    Sine,
}

impl std::str::FromStr for RiverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "straight" => Ok(RiverKind::Straight),
            "sine" => Ok(RiverKind::Sine),
            other => Err(Error::InvalidValue(format!(
                "unknown river kind {other:?} (straight, sine)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiverSpec {
    pub kind: RiverKind,
    pub width_m: f64,
    /// Direction of flow, counter-clockwise from map east.
    pub orientation_rad: f64,
    pub amplitude_m: f64,
    pub wavelength_m: f64,
    /// Shift of the river axis from the scene center along the axis normal.
    pub axis_offset_m: f64,
}

impl Default for RiverSpec {
    fn default() -> Self {
        RiverSpec {
            kind: RiverKind::Straight,
            width_m: 30.0,
            orientation_rad: 0.0,
            amplitude_m: 0.0,
            wavelength_m: 1000.0,
            axis_offset_m: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Radiometry {
    pub water_green: f64,
    pub water_nir: f64,
    pub land_green: f64,
    pub land_nir: f64,
    pub noise_sd: f64,
}

impl Default for Radiometry {
    fn default() -> Self {
        Radiometry {
            water_green: 0.10,
            water_nir: 0.02,
            land_green: 0.25,
            land_nir: 0.45,
            noise_sd: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub scene_px: usize,
    pub pixel_size: f64,
    pub river: RiverSpec,
    pub radiometry: Radiometry,
    pub seed: u64,
    pub crs_id: String,
    pub reach_id: String,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            scene_px: 500,
            pixel_size: 3.0,
            river: RiverSpec::default(),
            radiometry: Radiometry::default(),
            seed: 0,
            crs_id: "EPSG:32615".into(),
            reach_id: "synth".into(),
        }
    }
}

impl SynthSpec {
    pub fn extent_m(&self) -> f64 {
        self.scene_px as f64 * self.pixel_size
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Synth(msg));
        if self.scene_px == 0 {
            return bad("scene_px must be positive".into());
        }
        if !(self.pixel_size > 0.0 && self.pixel_size.is_finite()) {
            return bad(format!("pixel_size must be positive, got {}", self.pixel_size));
        }
        let r = &self.river;
        if !(r.width_m > 0.0 && r.width_m.is_finite()) {
            return bad(format!("river width must be positive, got {}", r.width_m));
        }
        if r.width_m > self.extent_m() {
            return bad(format!(
                "river width {} m exceeds the scene extent {} m",
                r.width_m,
                self.extent_m()
            ));
        }
        if !r.orientation_rad.is_finite() || !r.axis_offset_m.is_finite() {
            return bad("orientation and axis offset must be finite".into());
        }
        if r.kind == RiverKind::Sine {
            if !(r.amplitude_m >= 0.0 && r.amplitude_m.is_finite()) {
                return bad(format!("amplitude must be non-negative, got {}", r.amplitude_m));
            }
            if !(r.wavelength_m > 0.0 && r.wavelength_m.is_finite()) {
                return bad(format!("wavelength must be positive, got {}", r.wavelength_m));
            }
            let k = TAU / r.wavelength_m;
            if r.amplitude_m * k * k * r.width_m / 2.0 >= 1.0 {
                return bad(format!(
                    "meander radius {:.1} m is tighter than the half width {} m",
                    1.0 / (r.amplitude_m * k * k),
                    r.width_m / 2.0
                ));
            }
        }
        let q = &self.radiometry;
        for (name, v) in [
            ("water_green", q.water_green),
            ("water_nir", q.water_nir),
            ("land_green", q.land_green),
            ("land_nir", q.land_nir),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(q.noise_sd >= 0.0 && q.noise_sd.is_finite()) {
            return bad(format!("noise_sd must be non-negative, got {}", q.noise_sd));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<GridGeometry> {
        GridGeometry::new(
            0.0,
            self.extent_m(),
            self.pixel_size,
            self.scene_px,
            self.scene_px,
            self.crs_id.clone(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct SynthScene {
    pub spec: SynthSpec,
    /// Bands `green` and `nir`, all pixels valid.
    pub raster: Raster,
    pub gt: WaterMask,
    pub reach: Reach,
}

impl SynthScene {
    /// True perpendicular river width at any node.
    pub fn analytic_width(&self) -> f64 {
        self.spec.river.width_m
    }
}

/// River axis in a frame centered on the scene: `s` along the flow direction, `l` to its left.
struct Axis {
    tangent: Vec2,
    normal: Vec2,
    offset: f64,
    amplitude: f64,
    k: f64,
    half_width: f64,
}

impl Axis {
    fn new(r: &RiverSpec) -> Axis {
        let (sin, cos) = r.orientation_rad.sin_cos();
        let (amplitude, k) = match r.kind {
            RiverKind::Straight => (0.0, 0.0),
            RiverKind::Sine => (r.amplitude_m, TAU / r.wavelength_m),
        };
        Axis {
            tangent: Vec2::new(cos, sin),
            normal: Vec2::new(-sin, cos),
            offset: r.axis_offset_m,
            amplitude,
            k,
            half_width: r.width_m / 2.0,
        }
    }

    fn lateral(&self, s: f64) -> f64 {
        self.offset + self.amplitude * (self.k * s).sin()
    }

    fn slope(&self, s: f64) -> f64 {
        self.amplitude * self.k * (self.k * s).cos()
    }

    fn point(&self, s: f64) -> Vec2 {
        self.tangent * s + self.normal * self.lateral(s)
    }

    /// Whether `p` (relative to the scene center) lies within half a width of the axis curve.
    fn is_water(&self, p: Vec2) -> bool {
        let s_p = p.dot(self.tangent);
        let l_p = p.dot(self.normal);
        let gap = l_p - self.lateral(s_p);
        if self.amplitude == 0.0 {
            return gap.abs() <= self.half_width;
        }
        if gap.abs() <= self.half_width {
            return true;
        }
        // the curve is a graph with |slope| ≤ A·k, which bounds the distance from below
        let max_slope = self.amplitude * self.k;
        if gap.abs() / (1.0 + max_slope * max_slope).sqrt() > self.half_width {
            return false;
        }
        self.distance_sq(s_p, l_p) <= self.half_width * self.half_width
    }

    /// Squared distance from `(s_p, l_p)` to the curve, searched over `|s − s_p| ≤ half_width`.
    fn distance_sq(&self, s_p: f64, l_p: f64) -> f64 {
        let g = |s: f64| {
            let dl = self.lateral(s) - l_p;
            (s - s_p) * (s - s_p) + dl * dl
        };
        let h = self.half_width;
        let samples = 64;
        let step = 2.0 * h / samples as f64;
        let (mut best_s, mut best) = (s_p, g(s_p));
        for i in 0..=samples {
            let s = s_p - h + i as f64 * step;
            let v = g(s);
            if v < best {
                best = v;
                best_s = s;
            }
        }
        // Newton on g'(s) = 0, kept inside the bracketing samples
        let (lo, hi) = (best_s - step, best_s + step);
        let mut s = best_s;
        for _ in 0..20 {
            let f = self.lateral(s) - l_p;
            let fp = self.slope(s);
            let fpp = -self.amplitude * self.k * self.k * (self.k * s).sin();
            let d1 = (s - s_p) + f * fp;
            let d2 = 1.0 + fp * fp + f * fpp;
            if d2 <= 0.0 {
                break;
            }
            let next = (s - d1 / d2).clamp(lo, hi);
            if (next - s).abs() < 1e-12 {
                s = next;
                break;
            }
            s = next;
        }
        best.min(g(s))
    }
}

/// Pixel-center offset from the scene center, exact for half-integer multiples of Δ so that
/// mirrored pixels get exactly negated coordinates.
fn center_offset(n: usize, pixel: f64, row: usize, col: usize) -> Vec2 {
    let half = n as f64 / 2.0;
    Vec2::new((col as f64 + 0.5 - half) * pixel, (half - row as f64 - 0.5) * pixel)
}

fn axis_nodes(spec: &SynthSpec, axis: &Axis) -> Vec<Vec2> {
    let extent = spec.extent_m();
    let center = Vec2::new(extent / 2.0, extent / 2.0);
    let inside = |p: Vec2| p.x > 0.0 && p.x < extent && p.y > 0.0 && p.y < extent;
    let reach_s = extent * std::f64::consts::SQRT_2 / 2.0 + axis.offset.abs() + axis.amplitude + NODE_SPACING_M;

    let mut params = vec![0.0];
    if axis.amplitude == 0.0 {
        let k_max = (reach_s / NODE_SPACING_M).ceil() as i64;
        params = (-k_max..=k_max).map(|k| k as f64 * NODE_SPACING_M).collect();
    } else {
        // march along the curve, placing a node every NODE_SPACING_M of arc length
        let ds = 0.25;
        for dir in [1.0, -1.0] {
            let (mut s, mut arc) = (0.0f64, 0.0);
            let mut next = NODE_SPACING_M;
            while s.abs() < reach_s {
                let s_next = s + dir * ds;
                let mid = 0.5 * (s + s_next);
                arc += ds * (1.0 + axis.slope(mid).powi(2)).sqrt();
                s = s_next;
                if arc >= next {
                    params.push(s);
                    next += NODE_SPACING_M;
                }
            }
        }
        params.sort_by(f64::total_cmp);
    }
    params
        .into_iter()
        .map(|s| center + axis.point(s))
        .filter(|&p| inside(p))
        .collect()
}

/// Renders a synthetic river scene: labels by pixel-center sampling of the river region,
/// class reflectances plus seeded Gaussian noise clamped to `[0, 1]`, and centerline nodes
/// every 200 m along the river.
pub fn gen_scene(spec: &SynthSpec) -> Result<SynthScene> {
    spec.validate()?;
    let geometry = spec.geometry()?;
    let n = spec.scene_px;
    let axis = Axis::new(&spec.river);
    let water = Plane::from_fn(n, n, |r, c| axis.is_water(center_offset(n, spec.pixel_size, r, c)));

    let q = &spec.radiometry;
    let mut rng = SplitMix64::new(spec.seed);
    let mut render = |water_value: f64, land_value: f64| {
        let mut values = water.map(|&w| if w { water_value } else { land_value });
        if q.noise_sd > 0.0 {
            for v in values.as_mut_slice() {
                *v = (*v + q.noise_sd * rng.next_normal()).clamp(0.0, 1.0);
            }
        }
        values
    };
    let green = render(q.water_green, q.land_green);
    let nir = render(q.water_nir, q.land_nir);

    let raster = Raster::new(
        geometry.clone(),
        vec![
            Band {
                name: "green".into(),
                values: green,
            },
            Band {
                name: "nir".into(),
                values: nir,
            },
        ],
        Plane::filled(n, n, true),
    )?;
    let gt = WaterMask::all_valid(geometry, water)?;

    let nodes = axis_nodes(spec, &axis)
        .into_iter()
        .enumerate()
        .map(|(i, position)| Node {
            node_id: format!("{}_{:03}", spec.reach_id, i),
            reach_id: spec.reach_id.clone(),
            order: i as i64,
            position,
            ref_widths: BTreeMap::from([("analytic".to_string(), spec.river.width_m)]),
        })
        .collect();
    Ok(SynthScene {
        spec: spec.clone(),
        raster,
        gt,
        reach: Reach {
            reach_id: spec.reach_id.clone(),
            nodes,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::ndwi_from_raster;
    use proptest::prelude::*;

    fn straight(width: f64, theta: f64, pixel: f64, n: usize) -> SynthSpec {
        SynthSpec {
            scene_px: n,
            pixel_size: pixel,
            river: RiverSpec {
                width_m: width,
                orientation_rad: theta,
                ..RiverSpec::default()
            },
            ..SynthSpec::default()
        }
    }

    #[test]
    fn straight_30m_has_ten_pixel_columns_of_water() {
        let s = gen_scene(&straight(30.0, 0.0, 3.0, 500)).unwrap();
        for c in [0, 123, 499] {
            let rows: Vec<usize> = (0..500).filter(|&r| s.gt.is_water(r, c)).collect();
            assert_eq!(rows, (245..255).collect::<Vec<_>>());
        }
        let f = ndwi_from_raster(&s.raster, "green", "nir").unwrap();
        let expected = (0.10 - 0.02) / (0.10 + 0.02);
        assert_eq!(f.values().at(250, 7), expected);
        assert!(f.values().at(10, 7) < 0.0);
    }

    #[test]
    fn nodes_every_200m_inside_scene() {
        let s = gen_scene(&straight(30.0, 0.0, 3.0, 500)).unwrap();
        let xs: Vec<f64> = s.reach.nodes.iter().map(|n| n.position.x).collect();
        assert_eq!(xs, vec![150.0, 350.0, 550.0, 750.0, 950.0, 1150.0, 1350.0]);
        assert!(s.reach.nodes.iter().all(|n| n.position.y == 750.0));
        assert_eq!(s.reach.nodes[0].ref_widths["analytic"], 30.0);
        assert_eq!(s.analytic_width(), 30.0);
    }

    #[test]
    fn too_wide_is_rejected() {
        assert!(matches!(
            gen_scene(&straight(1501.0, 0.0, 3.0, 500)),
            Err(Error::Synth(_))
        ));
    }

    #[test]
    fn tight_meander_is_rejected() {
        let mut spec = straight(100.0, 0.0, 3.0, 100);
        spec.river.kind = RiverKind::Sine;
        spec.river.amplitude_m = 200.0;
        spec.river.wavelength_m = 200.0;
        assert!(gen_scene(&spec).is_err());
    }

    #[test]
    fn same_seed_same_bits() {
        let mut spec = straight(60.0, 0.4, 3.0, 120);
        spec.radiometry.noise_sd = 0.03;
        spec.seed = 9;
        let a = gen_scene(&spec).unwrap();
        let b = gen_scene(&spec).unwrap();
        for (x, y) in a.raster.bands().iter().zip(b.raster.bands()) {
            let xb: Vec<u64> = x.values.as_slice().iter().map(|v| v.to_bits()).collect();
            let yb: Vec<u64> = y.values.as_slice().iter().map(|v| v.to_bits()).collect();
            assert_eq!(xb, yb);
        }
        spec.seed = 10;
        let c = gen_scene(&spec).unwrap();
        assert_ne!(a.raster.bands()[0].values, c.raster.bands()[0].values);
    }

    #[test]
    fn noisy_bands_stay_in_unit_interval() {
        let mut spec = straight(60.0, 0.4, 3.0, 120);
        spec.radiometry.noise_sd = 0.5;
        let s = gen_scene(&spec).unwrap();
        for b in s.raster.bands() {
            assert!(b.values.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn sine_river_contains_its_axis_and_nodes_are_200m_apart_along_the_curve() {
        let mut spec = straight(40.0, 0.3, 3.0, 400);
        spec.river.kind = RiverKind::Sine;
        spec.river.amplitude_m = 60.0;
        spec.river.wavelength_m = 900.0;
        let s = gen_scene(&spec).unwrap();
        let g = s.gt.geometry();
        for node in &s.reach.nodes {
            let (r, c) = g.map_to_pixel(node.position.x, node.position.y);
            assert!(s.gt.is_water(r.round() as usize, c.round() as usize));
        }
        for w in s.reach.nodes.windows(2) {
            let chord = (w[1].position - w[0].position).norm();
            assert!(
                chord <= NODE_SPACING_M + 1e-6 && chord > 0.95 * NODE_SPACING_M,
                "{chord}"
            );
        }
    }

    #[test]
    fn sine_with_zero_amplitude_matches_straight() {
        let base = straight(45.0, 0.7, 3.0, 150);
        let mut sine = base.clone();
        sine.river.kind = RiverKind::Sine;
        assert_eq!(gen_scene(&base).unwrap().gt, gen_scene(&sine).unwrap().gt);
    }

    #[test]
    fn sine_tube_matches_brute_force_distance() {
        let r = RiverSpec {
            kind: RiverKind::Sine,
            width_m: 50.0,
            orientation_rad: 0.0,
            amplitude_m: 80.0,
            wavelength_m: 700.0,
            axis_offset_m: 0.0,
        };
        let axis = Axis::new(&r);
        let mut mismatches = 0;
        for i in 0..24 {
            for j in 0..24 {
                let p = Vec2::new(-300.0 + i as f64 * 25.3, -120.0 + j as f64 * 10.1);
                let brute = (0..24_000)
                    .map(|k| {
                        let s = p.x - 60.0 + k as f64 * 120.0 / 24_000.0;
                        (axis.point(s) - p).norm()
                    })
                    .fold(f64::INFINITY, f64::min);
                if (brute <= 25.0) != axis.is_water(p) && (brute - 25.0).abs() > 1e-3 {
                    mismatches += 1;
                }
            }
        }
        assert_eq!(mismatches, 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn mirrored_orientation_mirrors_the_mask(w in 3.0f64..200.0, theta in -3.2f64..3.2) {
            let n = 90;
            let a = gen_scene(&straight(w, theta, 3.0, n)).unwrap();
            let b = gen_scene(&straight(w, -theta, 3.0, n)).unwrap();
            for r in 0..n {
                for c in 0..n {
                    prop_assert_eq!(a.gt.is_water(r, c), b.gt.is_water(n - 1 - r, c));
                }
            }
        }

        #[test]
        fn straight_water_fraction(w in 6.0f64..240.0, axis_vertical in any::<bool>()) {
            let n = 100;
            let pixel = 3.0;
            let theta = if axis_vertical { std::f64::consts::FRAC_PI_2 } else { 0.0 };
            let s = gen_scene(&straight(w, theta, pixel, n)).unwrap();
            let extent = n as f64 * pixel;
            let fraction = s.gt.water_count() as f64 / (n * n) as f64;
            prop_assert!((fraction - w / extent).abs() <= 2.0 * pixel / extent + 1e-12);
        }
    }
}

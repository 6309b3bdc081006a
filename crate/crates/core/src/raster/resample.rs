//! Same-CRS grid-to-grid resampling.

use super::{ClassMap, GridGeometry, Plane, Raster, ScalarField, WaterMask};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleMethod {
    Nearest,
    Bilinear,
}

/// Index of the nearest source center along one axis; an exact tie goes to the smaller index.
fn nearest_index(frac: f64, len: usize) -> usize {
    let idx = (frac - 0.5).ceil();
    idx.clamp(0.0, (len - 1) as f64) as usize
}

/// Where a target pixel center falls on the source grid, if inside the source extent.
fn locate(source: &GridGeometry, target: &GridGeometry, row: usize, col: usize) -> Option<(f64, f64)> {
    let (x, y) = target.pixel_center(row as f64, col as f64);
    let (v, u) = source.map_to_grid(x, y);
    let inside = v >= 0.0 && u >= 0.0 && v < source.height_px as f64 && u < source.width_px as f64;
    inside.then_some((v - 0.5, u - 0.5))
}

fn nearest_plane<T: Copy>(
    source: &GridGeometry,
    values: &Plane<T>,
    target: &GridGeometry,
    fill: T,
) -> (Plane<T>, Plane<bool>) {
    let mut out = Plane::filled(target.width_px, target.height_px, fill);
    let mut validity = Plane::filled(target.width_px, target.height_px, false);
    for row in 0..target.height_px {
        for col in 0..target.width_px {
            if let Some((rf, cf)) = locate(source, target, row, col) {
                let sr = nearest_index(rf, source.height_px);
                let sc = nearest_index(cf, source.width_px);
                out.set(row, col, values.at(sr, sc));
                validity.set(row, col, true);
            }
        }
    }
    (out, validity)
}

/// Nearest-neighbor resampling of a mask onto `target`.
///
/// Target pixels whose center falls outside the source extent are invalid.
pub fn resample_mask(m: &WaterMask, target: &GridGeometry) -> Result<WaterMask> {
    target.validate()?;
    m.geometry().ensure_same_crs(target)?;
    let g = m.geometry();
    let (water, inside) = nearest_plane(g, m.water(), target, false);
    let (src_valid, _) = nearest_plane(g, m.validity(), target, false);
    let validity = Plane::from_fn(target.width_px, target.height_px, |r, c| {
        inside.at(r, c) && src_valid.at(r, c)
    });
    WaterMask::new(target.clone(), water, validity)
}

/// Nearest-neighbor resampling of a class-id plane; pixels outside the source get id 0.
pub fn resample_classes(m: &ClassMap, target: &GridGeometry) -> Result<ClassMap> {
    target.validate()?;
    m.geometry().ensure_same_crs(target)?;
    let (ids, _) = nearest_plane(m.geometry(), m.ids(), target, 0u16);
    ClassMap::new(target.clone(), ids)
}

/// Resamples one band of `r` onto `target`.
///
/// Bilinear interpolation uses the four surrounding source centers and falls back to nearest
/// when any neighbor with nonzero weight is invalid or off-grid.
pub fn resample_band(r: &Raster, band: &str, target: &GridGeometry, method: ResampleMethod) -> Result<ScalarField> {
    target.validate()?;
    let g = r.geometry();
    g.ensure_same_crs(target)?;
    let values = r.band(band)?;
    let src_valid = r.validity();
    let mut out = Plane::filled(target.width_px, target.height_px, 0.0);
    let mut validity = Plane::filled(target.width_px, target.height_px, false);

    let sample = |ri: i64, ci: i64| -> Option<f64> {
        if g.contains_cell(ri, ci) && src_valid.at(ri as usize, ci as usize) {
            Some(values.at(ri as usize, ci as usize))
        } else {
            None
        }
    };

    for row in 0..target.height_px {
        for col in 0..target.width_px {
            let Some((rf, cf)) = locate(g, target, row, col) else {
                continue;
            };
            let nearest = || {
                let sr = nearest_index(rf, g.height_px);
                let sc = nearest_index(cf, g.width_px);
                sample(sr as i64, sc as i64)
            };
            let value = match method {
                ResampleMethod::Nearest => nearest(),
                ResampleMethod::Bilinear => bilinear(rf, cf, &sample).or_else(nearest),
            };
            if let Some(v) = value {
                out.set(row, col, v);
                validity.set(row, col, true);
            }
        }
    }
    ScalarField::new(target.clone(), out, validity)
}

fn bilinear(rf: f64, cf: f64, sample: &impl Fn(i64, i64) -> Option<f64>) -> Option<f64> {
    let r0 = rf.floor();
    let c0 = cf.floor();
    let fr = rf - r0;
    let fc = cf - c0;
    let (r0, c0) = (r0 as i64, c0 as i64);
    let taps = [
        (r0, c0, (1.0 - fr) * (1.0 - fc)),
        (r0, c0 + 1, (1.0 - fr) * fc),
        (r0 + 1, c0, fr * (1.0 - fc)),
        (r0 + 1, c0 + 1, fr * fc),
    ];
    let mut acc = 0.0;
    for (r, c, w) in taps {
        if w == 0.0 {
            continue;
        }
        acc += w * sample(r, c)?;
    }
    Some(acc)
}

use crate::error::{Error, Result};
use crate::raster::{GridGeometry, Plane, Raster, ScalarField};

/// Normalized difference water index `(green − nir) / (green + nir)`.
///
/// Pixels that are invalid on input, have a negative reflectance, or have `green + nir = 0` are
/// set to 0 and marked invalid.
pub fn ndwi(
    geometry: &GridGeometry,
    green: &Plane<f64>,
    nir: &Plane<f64>,
    validity: &Plane<bool>,
) -> Result<ScalarField> {
    let (w, h) = (geometry.width_px, geometry.height_px);
    for (name, dims) in [
        ("green", (green.width(), green.height())),
        ("nir", (nir.width(), nir.height())),
        ("validity", (validity.width(), validity.height())),
    ] {
        if dims != (w, h) {
            return Err(Error::GeometryMismatch(format!(
                "{name} plane is {}x{}, grid is {w}x{h}",
                dims.0, dims.1
            )));
        }
    }
    let mut values = Plane::filled(w, h, 0.0);
    let mut valid = Plane::filled(w, h, false);
    let inputs = green.as_slice().iter().zip(nir.as_slice()).zip(validity.as_slice());
    for (i, ((&g, &n), &ok)) in inputs.enumerate() {
        let denom = g + n;
        if ok && g >= 0.0 && n >= 0.0 && denom > 0.0 {
            values.as_mut_slice()[i] = ((g - n) / denom).clamp(-1.0, 1.0);
            valid.as_mut_slice()[i] = true;
        }
    }
    ScalarField::new(geometry.clone(), values, valid)
}

/// NDWI from two named bands of a raster.
pub fn ndwi_from_raster(r: &Raster, green_band: &str, nir_band: &str) -> Result<ScalarField> {
    ndwi(r.geometry(), r.band(green_band)?, r.band(nir_band)?, r.validity())
}

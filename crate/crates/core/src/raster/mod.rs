//! Georeferenced rasters, binary masks and scalar fields on a shared pixel grid.

mod geometry;
pub mod io;
mod normalize;
pub mod npy;
mod resample;

pub use geometry::GridGeometry;
pub use io::{
    load_classes, load_field, load_mask, load_raster, write_field_geotiff, write_mask_geotiff, write_npy_stack,
    write_raster_geotiff, RasterFormat, StackGeometry,
};
pub use normalize::minmax_normalize;
pub use resample::{resample_band, resample_classes, resample_mask, ResampleMethod};

use crate::error::{Error, Result};

/// Row-major 2-D plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Plane<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Plane {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Plane<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::GeometryMismatch(format!(
                "plane data has {} values, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Plane { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col));
            }
        }
        Plane { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> &T {
        &self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[row * self.width + col] = value;
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Plane<U> {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    fn matches(&self, g: &GridGeometry) -> bool {
        self.width == g.width_px && self.height == g.height_px
    }
}

impl<T: Copy> Plane<T> {
    pub fn at(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }
}

fn check_dims<T>(plane: &Plane<T>, geometry: &GridGeometry, what: &str) -> Result<()> {
    if plane.matches(geometry) {
        Ok(())
    } else {
        Err(Error::GeometryMismatch(format!(
            "{what} is {}x{}, grid is {}x{}",
            plane.width, plane.height, geometry.width_px, geometry.height_px
        )))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub name: String,
    pub values: Plane<f64>,
}

/// Multiband raster. Invalid pixels carry no measurement in any band.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    geometry: GridGeometry,
    bands: Vec<Band>,
    validity: Plane<bool>,
}

impl Raster {
    pub fn new(geometry: GridGeometry, bands: Vec<Band>, validity: Plane<bool>) -> Result<Self> {
        geometry.validate()?;
        check_dims(&validity, &geometry, "validity plane")?;
        for band in &bands {
            check_dims(&band.values, &geometry, &format!("band {:?}", band.name))?;
            if band.values.as_slice().iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidGeometry(format!(
                    "band {:?} contains non-finite values",
                    band.name
                )));
            }
        }
        Ok(Raster {
            geometry,
            bands,
            validity,
        })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn band_names(&self) -> Vec<&str> {
        self.bands.iter().map(|b| b.name.as_str()).collect()
    }

    pub fn band(&self, name: &str) -> Result<&Plane<f64>> {
        self.bands
            .iter()
            .find(|b| b.name == name)
            .map(|b| &b.values)
            .ok_or_else(|| Error::MissingBand(name.to_string()))
    }

    pub fn validity(&self) -> &Plane<bool> {
        &self.validity
    }

    /// Renames bands positionally. `names` must have one entry per band.
    pub fn with_band_names<S: AsRef<str>>(mut self, names: &[S]) -> Result<Self> {
        if names.len() != self.bands.len() {
            return Err(Error::InvalidGeometry(format!(
                "{} band names given for {} bands",
                names.len(),
                self.bands.len()
            )));
        }
        for (band, name) in self.bands.iter_mut().zip(names) {
            band.name = name.as_ref().to_string();
        }
        Ok(self)
    }

    pub fn valid_count(&self) -> usize {
        self.validity.as_slice().iter().filter(|&&v| v).count()
    }
}

/// Binary water mask. A nodata pixel is never water.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterMask {
    geometry: GridGeometry,
    water: Plane<bool>,
    validity: Plane<bool>,
}

impl WaterMask {
    /// Builds a mask, clearing `water` wherever `validity` is false.
    pub fn new(geometry: GridGeometry, water: Plane<bool>, validity: Plane<bool>) -> Result<Self> {
        geometry.validate()?;
        check_dims(&water, &geometry, "water plane")?;
        check_dims(&validity, &geometry, "validity plane")?;
        let mut water = water;
        for (w, v) in water.as_mut_slice().iter_mut().zip(validity.as_slice()) {
            *w &= *v;
        }
        Ok(WaterMask {
            geometry,
            water,
            validity,
        })
    }

    pub fn all_valid(geometry: GridGeometry, water: Plane<bool>) -> Result<Self> {
        let validity = Plane::filled(geometry.width_px, geometry.height_px, true);
        WaterMask::new(geometry, water, validity)
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn water(&self) -> &Plane<bool> {
        &self.water
    }

    pub fn validity(&self) -> &Plane<bool> {
        &self.validity
    }

    pub fn is_water(&self, row: usize, col: usize) -> bool {
        self.water.at(row, col)
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.validity.at(row, col)
    }

    pub fn water_count(&self) -> usize {
        self.water.as_slice().iter().filter(|&&w| w).count()
    }

    /// Encoding used on disk: 0 land, 1 water, 255 nodata.
    pub fn to_codes(&self) -> Plane<u8> {
        Plane::from_fn(self.geometry.width_px, self.geometry.height_px, |r, c| {
            if !self.validity.at(r, c) {
                255
            } else if self.water.at(r, c) {
                1
            } else {
                0
            }
        })
    }

    /// Inverse of [`WaterMask::to_codes`]; any nonzero code other than 255 is water.
    pub fn from_codes(geometry: GridGeometry, codes: &Plane<u8>) -> Result<Self> {
        let validity = codes.map(|&c| c != 255);
        let water = codes.map(|&c| c != 0 && c != 255);
        WaterMask::new(geometry, water, validity)
    }
}

/// Real-valued field with per-pixel validity, e.g. NDWI or a probability map.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    geometry: GridGeometry,
    values: Plane<f64>,
    validity: Plane<bool>,
}

impl ScalarField {
    pub fn new(geometry: GridGeometry, values: Plane<f64>, validity: Plane<bool>) -> Result<Self> {
        geometry.validate()?;
        check_dims(&values, &geometry, "value plane")?;
        check_dims(&validity, &geometry, "validity plane")?;
        Ok(ScalarField {
            geometry,
            values,
            validity,
        })
    }

    pub fn all_valid(geometry: GridGeometry, values: Plane<f64>) -> Result<Self> {
        let validity = Plane::filled(geometry.width_px, geometry.height_px, true);
        ScalarField::new(geometry, values, validity)
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &Plane<f64> {
        &self.values
    }

    pub fn validity(&self) -> &Plane<bool> {
        &self.validity
    }

    /// Values of valid pixels in row-major order.
    pub fn valid_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .as_slice()
            .iter()
            .zip(self.validity.as_slice())
            .filter(|(_, &ok)| ok)
            .map(|(&v, _)| v)
    }
}

/// Land-cover class ids on a grid (0 conventionally means no data).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMap {
    geometry: GridGeometry,
    ids: Plane<u16>,
}

impl ClassMap {
    pub fn new(geometry: GridGeometry, ids: Plane<u16>) -> Result<Self> {
        geometry.validate()?;
        check_dims(&ids, &geometry, "class plane")?;
        Ok(ClassMap { geometry, ids })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn ids(&self) -> &Plane<u16> {
        &self.ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(w: usize, h: usize) -> GridGeometry {
        GridGeometry::new(0.0, 0.0, 1.0, w, h, "c").unwrap()
    }

    #[test]
    fn mask_clears_water_on_nodata() {
        let water = Plane::filled(2, 1, true);
        let validity = Plane::from_vec(2, 1, vec![true, false]).unwrap();
        let m = WaterMask::new(geom(2, 1), water, validity).unwrap();
        assert!(m.is_water(0, 0));
        assert!(!m.is_water(0, 1));
        assert_eq!(m.to_codes().as_slice(), &[1, 255]);
    }

    #[test]
    fn codes_round_trip() {
        let codes = Plane::from_vec(4, 1, vec![0, 1, 255, 0]).unwrap();
        let m = WaterMask::from_codes(geom(4, 1), &codes).unwrap();
        assert_eq!(m.to_codes(), codes);
    }

    #[test]
    fn raster_rejects_dimension_mismatch() {
        let band = Band {
            name: "green".into(),
            values: Plane::filled(3, 3, 0.0),
        };
        let err = Raster::new(geom(2, 2), vec![band], Plane::filled(2, 2, true));
        assert!(matches!(err, Err(Error::GeometryMismatch(_))));
    }

    #[test]
    fn missing_band_is_named() {
        let r = Raster::new(geom(1, 1), vec![], Plane::filled(1, 1, true)).unwrap();
        match r.band("nir") {
            Err(Error::MissingBand(name)) => assert_eq!(name, "nir"),
            other => panic!("unexpected {other:?}"),
        }
    }
}

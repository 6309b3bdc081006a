use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// North-up grid of square pixels in a projected CRS.
///
/// Pixel `(row, col)` covers map x in `[origin_x + col·Δ, origin_x + (col+1)·Δ)` and map y in
/// `(origin_y − (row+1)·Δ, origin_y − row·Δ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub origin_x: f64,
    pub origin_y: f64,
    pub pixel_size: f64,
    pub width_px: usize,
    pub height_px: usize,
    pub crs_id: String,
}

impl GridGeometry {
    pub fn new(
        origin_x: f64,
        origin_y: f64,
        pixel_size: f64,
        width_px: usize,
        height_px: usize,
        crs_id: impl Into<String>,
    ) -> Result<Self> {
        let g = GridGeometry {
            origin_x,
            origin_y,
            pixel_size,
            width_px,
            height_px,
            crs_id: crs_id.into(),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pixel_size.is_finite() && self.pixel_size > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "pixel_size must be positive, got {}",
                self.pixel_size
            )));
        }
        if self.width_px == 0 || self.height_px == 0 {
            return Err(Error::InvalidGeometry(format!(
                "grid must be at least 1x1, got {}x{}",
                self.width_px, self.height_px
            )));
        }
        if !(self.origin_x.is_finite() && self.origin_y.is_finite()) {
            return Err(Error::InvalidGeometry("origin must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.width_px * self.height_px
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Map coordinates of the center of pixel `(row, col)`.
    pub fn pixel_center(&self, row: f64, col: f64) -> (f64, f64) {
        (
            self.origin_x + (col + 0.5) * self.pixel_size,
            self.origin_y - (row + 0.5) * self.pixel_size,
        )
    }

    /// Fractional `(row, col)` such that integer values land on pixel centers.
    pub fn map_to_pixel(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (self.origin_y - y) / self.pixel_size - 0.5,
            (x - self.origin_x) / self.pixel_size - 0.5,
        )
    }

    /// Continuous grid coordinates measured from the top-left corner, in pixels:
    /// `(v, u)` with `u` along columns and `v` along rows. Cell `(r, c)` is `[r, r+1) × [c, c+1)`.
    pub fn map_to_grid(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (self.origin_y - y) / self.pixel_size,
            (x - self.origin_x) / self.pixel_size,
        )
    }

    pub fn extent_x(&self) -> (f64, f64) {
        (self.origin_x, self.origin_x + self.width_px as f64 * self.pixel_size)
    }

    pub fn extent_y(&self) -> (f64, f64) {
        (self.origin_y - self.height_px as f64 * self.pixel_size, self.origin_y)
    }

    pub fn contains_cell(&self, row: i64, col: i64) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.height_px && (col as usize) < self.width_px
    }

    /// Same dimensions, CRS and (to a tiny fraction of a pixel) placement.
    pub fn same_grid(&self, other: &GridGeometry) -> bool {
        let tol = 1e-9 * self.pixel_size.max(other.pixel_size);
        self.width_px == other.width_px
            && self.height_px == other.height_px
            && self.crs_id == other.crs_id
            && (self.pixel_size - other.pixel_size).abs() <= tol
            && (self.origin_x - other.origin_x).abs() <= tol
            && (self.origin_y - other.origin_y).abs() <= tol
    }

    pub(crate) fn ensure_same(&self, other: &GridGeometry, what: &str) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "{what}: {}x{} @ {} m ({}) vs {}x{} @ {} m ({})",
                self.width_px,
                self.height_px,
                self.pixel_size,
                self.crs_id,
                other.width_px,
                other.height_px,
                other.pixel_size,
                other.crs_id
            )))
        }
    }

    pub(crate) fn ensure_same_crs(&self, target: &GridGeometry) -> Result<()> {
        if self.crs_id == target.crs_id {
            Ok(())
        } else {
            Err(Error::CrsMismatch {
                source_crs: self.crs_id.clone(),
                target_crs: target.crs_id.clone(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_geometry() {
        assert!(GridGeometry::new(0.0, 0.0, 0.0, 1, 1, "x").is_err());
        assert!(GridGeometry::new(0.0, 0.0, 3.0, 0, 1, "x").is_err());
        assert!(GridGeometry::new(0.0, 0.0, -3.0, 1, 1, "x").is_err());
        assert!(GridGeometry::new(0.0, 0.0, 3.0, 1, 1, "x").is_ok());
    }

    #[test]
    fn center_of_first_pixel() {
        let g = GridGeometry::new(100.0, 200.0, 3.0, 4, 4, "EPSG:32615").unwrap();
        assert_eq!(g.pixel_center(0.0, 0.0), (101.5, 198.5));
        assert_eq!(g.map_to_pixel(101.5, 198.5), (0.0, 0.0));
    }

    proptest! {
        #[test]
        fn pixel_map_round_trip(
            ox in -1e6f64..1e6,
            oy in -1e6f64..1e6,
            px in 0.1f64..100.0,
            row in 0usize..2000,
            col in 0usize..2000,
        ) {
            let g = GridGeometry::new(ox, oy, px, 2000, 2000, "c").unwrap();
            let (x, y) = g.pixel_center(row as f64, col as f64);
            let (r, c) = g.map_to_pixel(x, y);
            prop_assert!((r - row as f64).abs() < 1e-9);
            prop_assert!((c - col as f64).abs() < 1e-9);
        }
    }
}

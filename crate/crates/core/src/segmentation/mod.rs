//! Classical water segmentation (NDWI + Otsu) and mask evaluation.

mod attribution;
mod metrics;
mod ndwi;
mod otsu;

pub use crate::raster::ScalarField;
pub use attribution::{fp_attribution, FpAttribution, LandCover};
pub use metrics::{bce_loss, seg_metrics, SegMetrics, BCE_EPSILON};
pub use ndwi::{ndwi, ndwi_from_raster};
pub use otsu::{otsu_from_values, otsu_threshold, threshold_mask, OtsuThreshold, DEFAULT_BINS};

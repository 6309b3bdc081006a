//! Attribution of false-positive water pixels to land-cover classes.

use serde::ser::{Serialize, SerializeMap, Serializer};

use crate::error::Result;
use crate::raster::{ClassMap, WaterMask};

/// Land-cover classes reported for false positives, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LandCover {
    TreeCover,
    Shrubland,
    Grassland,
    Cropland,
    BuiltUp,
    BareSparseVegetation,
    SnowAndIce,
    HerbaceousWetland,
    Mangroves,
    MossAndLichen,
    InvalidNoData,
}

impl LandCover {
    pub const ALL: [LandCover; 11] = [
        LandCover::TreeCover,
        LandCover::Shrubland,
        LandCover::Grassland,
        LandCover::Cropland,
        LandCover::BuiltUp,
        LandCover::BareSparseVegetation,
        LandCover::SnowAndIce,
        LandCover::HerbaceousWetland,
        LandCover::Mangroves,
        LandCover::MossAndLichen,
        LandCover::InvalidNoData,
    ];

    /// ESA WorldCover code. Anything outside the land classes (including 80, permanent water,
    /// and 0, no data) falls under [`LandCover::InvalidNoData`].
    pub fn from_worldcover(code: u16) -> LandCover {
        match code {
            10 => LandCover::TreeCover,
            20 => LandCover::Shrubland,
            30 => LandCover::Grassland,
            40 => LandCover::Cropland,
            50 => LandCover::BuiltUp,
            60 => LandCover::BareSparseVegetation,
            70 => LandCover::SnowAndIce,
            90 => LandCover::HerbaceousWetland,
            95 => LandCover::Mangroves,
            100 => LandCover::MossAndLichen,
            _ => LandCover::InvalidNoData,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LandCover::TreeCover => "Tree Cover",
            LandCover::Shrubland => "Shrubland",
            LandCover::Grassland => "Grassland",
            LandCover::Cropland => "Cropland",
            LandCover::BuiltUp => "Built-up",
            LandCover::BareSparseVegetation => "Bare / sparse vegetation",
            LandCover::SnowAndIce => "Snow and Ice",
            LandCover::HerbaceousWetland => "Herbaceous Wetland",
            LandCover::Mangroves => "Mangroves",
            LandCover::MossAndLichen => "Moss and lichen",
            LandCover::InvalidNoData => "Invalid / no data",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpAttribution {
    pub counts: [u64; 11],
    pub false_positives: u64,
    /// Per-class share of false positives; all zero when there are none.
    pub shares: [f64; 11],
}

impl FpAttribution {
    pub fn from_counts(counts: [u64; 11]) -> FpAttribution {
        let false_positives: u64 = counts.iter().sum();
        let mut shares = [0.0; 11];
        if false_positives > 0 {
            for (s, &c) in shares.iter_mut().zip(&counts) {
                *s = c as f64 / false_positives as f64;
            }
        }
        FpAttribution {
            counts,
            false_positives,
            shares,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.false_positives == 0
    }

    pub fn share(&self, class: LandCover) -> f64 {
        self.shares[class.index()]
    }

    pub fn merge(&self, other: &FpAttribution) -> FpAttribution {
        let mut counts = self.counts;
        for (c, o) in counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
        FpAttribution::from_counts(counts)
    }
}

/// Serialized as `{class label: share}` in report order.
impl Serialize for FpAttribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(LandCover::ALL.len()))?;
        for class in LandCover::ALL {
            map.serialize_entry(class.label(), &self.share(class))?;
        }
        map.end()
    }
}

/// Histogram of land-cover classes under false-positive pixels (predicted water, valid
/// non-water in ground truth). `lulc` must already be on the prediction grid.
pub fn fp_attribution(pred: &WaterMask, gt: &WaterMask, lulc: &ClassMap) -> Result<FpAttribution> {
    pred.geometry()
        .ensure_same(gt.geometry(), "prediction vs ground truth")?;
    pred.geometry()
        .ensure_same(lulc.geometry(), "prediction vs land cover")?;
    let mut counts = [0u64; 11];
    let pixels = pred
        .water()
        .as_slice()
        .iter()
        .zip(gt.water().as_slice().iter().zip(gt.validity().as_slice()))
        .zip(lulc.ids().as_slice());
    for ((&p, (&g, &gv)), &id) in pixels {
        if p && gv && !g {
            counts[LandCover::from_worldcover(id).index()] += 1;
        }
    }
    Ok(FpAttribution::from_counts(counts))
}

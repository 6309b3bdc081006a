use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{ScalarField, WaterMask};

/// Clamp applied to predicted probabilities before taking logs.
pub const BCE_EPSILON: f64 = 1e-7;

/// Confusion counts over pixels valid in both masks, plus the derived scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegMetrics {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl SegMetrics {
    /// Scores from raw counts.
    ///
    /// When neither mask has water, precision, recall and F1 are all 1. Otherwise an empty
    /// denominator scores 0.
    pub fn from_counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> SegMetrics {
        let (precision, recall, f1) = if tp + fp == 0 && tp + fn_ == 0 {
            (1.0, 1.0, 1.0)
        } else {
            let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
            let recall = if tp + fn_ > 0 {
                tp as f64 / (tp + fn_) as f64
            } else {
                0.0
            };
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            (precision, recall, f1)
        };
        SegMetrics {
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Accumulates counts of another scene and recomputes the scores.
    pub fn merge(&self, other: &SegMetrics) -> SegMetrics {
        SegMetrics::from_counts(
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn_ + other.fn_,
            self.tn + other.tn,
        )
    }
}

pub fn seg_metrics(pred: &WaterMask, gt: &WaterMask) -> Result<SegMetrics> {
    pred.geometry()
        .ensure_same(gt.geometry(), "prediction vs ground truth")?;
    let (mut tp, mut fp, mut fn_, mut tn) = (0u64, 0u64, 0u64, 0u64);
    let pixels = pred
        .water()
        .as_slice()
        .iter()
        .zip(pred.validity().as_slice())
        .zip(gt.water().as_slice().iter().zip(gt.validity().as_slice()));
    for ((&p, &pv), (&g, &gv)) in pixels {
        if !(pv && gv) {
            continue;
        }
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(SegMetrics::from_counts(tp, fp, fn_, tn))
}

/// Mean binary cross-entropy of a probability map against a mask, over jointly valid pixels.
pub fn bce_loss(prob: &ScalarField, gt: &WaterMask) -> Result<f64> {
    prob.geometry()
        .ensure_same(gt.geometry(), "probabilities vs ground truth")?;
    let mut total = 0.0;
    let mut n = 0u64;
    let pixels = prob
        .values()
        .as_slice()
        .iter()
        .zip(prob.validity().as_slice())
        .zip(gt.water().as_slice().iter().zip(gt.validity().as_slice()));
    for ((&p, &pv), (&y, &gv)) in pixels {
        if !(pv && gv) {
            continue;
        }
        let p = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
        total -= if y { p.ln() } else { (1.0 - p).ln() };
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyEvaluation(
            "no pixel is valid in both the probability map and the mask".into(),
        ));
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{GridGeometry, Plane};
    use proptest::prelude::*;

    fn geom(n: usize) -> GridGeometry {
        GridGeometry::new(0.0, 0.0, 3.0, n, 1, "c").unwrap()
    }

    fn mask(bits: &[bool]) -> WaterMask {
        WaterMask::all_valid(geom(bits.len()), Plane::from_vec(bits.len(), 1, bits.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn identical_masks_score_one() {
        let m = mask(&[true, false, true, false]);
        let s = seg_metrics(&m, &m).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        assert_eq!(s.total(), 4);
    }

    #[test]
    fn complement_scores_zero() {
        let gt = mask(&[true, false, true, false]);
        let pred = mask(&[false, true, false, true]);
        assert_eq!(seg_metrics(&pred, &gt).unwrap().f1, 0.0);
    }

    #[test]
    fn counts_80_20_20() {
        let s = SegMetrics::from_counts(80, 20, 20, 0);
        assert!((s.precision - 0.8).abs() < 1e-15);
        assert!((s.recall - 0.8).abs() < 1e-15);
        assert!((s.f1 - 0.8).abs() < 1e-15);
    }

    #[test]
    fn all_land_scene_predicted_as_land() {
        let m = mask(&[false; 5]);
        let s = seg_metrics(&m, &m).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn missed_water_scores_zero() {
        let s = seg_metrics(&mask(&[false, false]), &mask(&[true, false])).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn nodata_pixels_are_skipped() {
        let gt = WaterMask::new(
            geom(3),
            Plane::from_vec(3, 1, vec![true, true, false]).unwrap(),
            Plane::from_vec(3, 1, vec![true, false, true]).unwrap(),
        )
        .unwrap();
        let s = seg_metrics(&mask(&[true, false, true]), &gt).unwrap();
        assert_eq!((s.tp, s.fp, s.fn_, s.tn), (1, 1, 0, 0));
    }

    #[test]
    fn geometry_mismatch_rejected() {
        assert!(seg_metrics(&mask(&[true]), &mask(&[true, false])).is_err());
    }

    #[test]
    fn bce_of_uniform_half_is_ln2() {
        let gt = mask(&[true, false, false, true, false]);
        let prob = ScalarField::all_valid(geom(5), Plane::filled(5, 1, 0.5)).unwrap();
        let loss = bce_loss(&prob, &gt).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn bce_of_perfect_prediction_is_clamp_level() {
        let bits = [true, false, false, true];
        let prob = ScalarField::all_valid(
            geom(4),
            Plane::from_vec(4, 1, bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()).unwrap(),
        )
        .unwrap();
        let loss = bce_loss(&prob, &mask(&bits)).unwrap();
        assert!(loss > 0.0 && loss < 2e-6);
    }

    fn masks() -> impl Strategy<Value = (Vec<bool>, Vec<bool>)> {
        (1usize..80).prop_flat_map(|n| {
            (
                prop::collection::vec(any::<bool>(), n),
                prop::collection::vec(any::<bool>(), n),
            )
        })
    }

    proptest! {
        #[test]
        fn swapping_masks_swaps_precision_and_recall((a, b) in masks()) {
            let ab = seg_metrics(&mask(&a), &mask(&b)).unwrap();
            let ba = seg_metrics(&mask(&b), &mask(&a)).unwrap();
            prop_assert_eq!(ab.precision, ba.recall);
            prop_assert_eq!(ab.recall, ba.precision);
            prop_assert!((ab.f1 - ba.f1).abs() < 1e-15);
            prop_assert_eq!(ab.total(), a.len() as u64);
        }

        #[test]
        fn bce_moving_toward_label_never_increases(
            probs in prop::collection::vec(0.0f64..=1.0, 1..40),
            labels in prop::collection::vec(any::<bool>(), 40),
            idx in 0usize..40,
            step in 0.0f64..=1.0,
        ) {
            let n = probs.len();
            let idx = idx % n;
            let gt = mask(&labels[..n]);
            let before = ScalarField::all_valid(geom(n), Plane::from_vec(n, 1, probs.clone()).unwrap()).unwrap();
            let mut moved = probs.clone();
            let target = if labels[idx] { 1.0 } else { 0.0 };
            moved[idx] += step * (target - moved[idx]);
            let after = ScalarField::all_valid(geom(n), Plane::from_vec(n, 1, moved).unwrap()).unwrap();
            let (lb, la) = (bce_loss(&before, &gt).unwrap(), bce_loss(&after, &gt).unwrap());
            prop_assert!(la <= lb + 1e-12);
            let floor = -(1.0 - BCE_EPSILON).ln();
            prop_assert!(la >= floor - 1e-15);
        }
    }
}

//! Otsu threshold selection over an equal-width histogram of the valid values.

use crate::error::{Error, Result};
use crate::raster::{Plane, ScalarField, WaterMask};

pub const DEFAULT_BINS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OtsuThreshold {
    /// Upper edge of the last bin of the lower class. Water ⇔ value > threshold.
    pub threshold: f64,
    /// Number of bins in the lower class, in `1..nbins`.
    pub split: usize,
    /// ω₀ω₁(μ₀−μ₁)² of the chosen split, with class means of the raw values.
    pub between_class_variance: f64,
    pub min: f64,
    pub max: f64,
    pub nbins: usize,
}

/// Bin `j` holds `(edge_j, edge_{j+1}]`; bin 0 also holds `min`. Consistent with `v > threshold`.
fn bin_index(v: f64, min: f64, range: f64, nbins: usize) -> usize {
    let pos = (v - min) / range * nbins as f64;
    let idx = pos.ceil() as i64 - 1;
    idx.clamp(0, nbins as i64 - 1) as usize
}

/// Otsu threshold of the valid values of `f`.
pub fn otsu_threshold(f: &ScalarField, nbins: usize) -> Result<OtsuThreshold> {
    otsu_from_values(f.valid_values(), nbins)
}

/// Otsu threshold of an arbitrary value set (e.g. pooled over several scenes).
///
/// Splits are scanned in increasing order and only a strictly larger variance replaces the
/// current best, so ties resolve to the smallest threshold.
pub fn otsu_from_values(values: impl IntoIterator<Item = f64>, nbins: usize) -> Result<OtsuThreshold> {
    if nbins < 2 {
        return Err(Error::DegenerateField(format!("need at least 2 bins, got {nbins}")));
    }
    let values: Vec<f64> = values.into_iter().filter(|v| v.is_finite()).collect();
    let (min, max) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if values.is_empty() {
        return Err(Error::DegenerateField("no valid values".into()));
    }
    if min == max {
        return Err(Error::DegenerateField(format!("all valid values equal {min}")));
    }
    let range = max - min;
    let mut counts = vec![0u64; nbins];
    let mut sums = vec![0.0f64; nbins];
    for &v in &values {
        let b = bin_index(v, min, range, nbins);
        counts[b] += 1;
        sums[b] += v;
    }

    // suffix sums keep the upper-class mean free of cancellation
    let mut upper_count = vec![0u64; nbins + 1];
    let mut upper_sum = vec![0.0f64; nbins + 1];
    for b in (0..nbins).rev() {
        upper_count[b] = upper_count[b + 1] + counts[b];
        upper_sum[b] = upper_sum[b + 1] + sums[b];
    }
    let total = values.len() as f64;

    let mut best_split = 0;
    let mut best_var = f64::NEG_INFINITY;
    let mut lower_count = 0u64;
    let mut lower_sum = 0.0;
    for k in 1..nbins {
        lower_count += counts[k - 1];
        lower_sum += sums[k - 1];
        let n1 = upper_count[k];
        let var = if lower_count == 0 || n1 == 0 {
            0.0
        } else {
            let w0 = lower_count as f64 / total;
            let w1 = n1 as f64 / total;
            let mu0 = lower_sum / lower_count as f64;
            let mu1 = upper_sum[k] / n1 as f64;
            w0 * w1 * (mu0 - mu1) * (mu0 - mu1)
        };
        if var > best_var {
            best_var = var;
            best_split = k;
        }
    }
    Ok(OtsuThreshold {
        threshold: min + best_split as f64 * range / nbins as f64,
        split: best_split,
        between_class_variance: best_var,
        min,
        max,
        nbins,
    })
}

/// Water wherever the field is valid and strictly above `t`.
pub fn threshold_mask(f: &ScalarField, t: f64) -> Result<WaterMask> {
    let water: Plane<bool> = {
        let g = f.geometry();
        Plane::from_fn(g.width_px, g.height_px, |r, c| {
            f.validity().at(r, c) && f.values().at(r, c) > t
        })
    };
    WaterMask::new(f.geometry().clone(), water, f.validity().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GridGeometry;
    use proptest::prelude::*;

    fn field(values: Vec<f64>) -> ScalarField {
        let n = values.len();
        let g = GridGeometry::new(0.0, 0.0, 1.0, n, 1, "c").unwrap();
        ScalarField::all_valid(g, Plane::from_vec(n, 1, values).unwrap()).unwrap()
    }

    #[test]
    fn bimodal_separates_exactly() {
        let mut v = vec![0.9; 100];
        v.extend(vec![-0.9; 100]);
        let f = field(v);
        let t = otsu_threshold(&f, DEFAULT_BINS).unwrap();
        assert!(t.threshold > -0.9 && t.threshold < 0.9);
        // every split separates the modes perfectly; ties go to the smallest threshold
        assert_eq!(t.split, 1);
        let m = threshold_mask(&f, t.threshold).unwrap();
        for (i, &w) in m.water().as_slice().iter().enumerate() {
            assert_eq!(w, i < 100);
        }
    }

    #[test]
    fn single_value_has_no_threshold() {
        assert!(matches!(
            otsu_threshold(&field(vec![0.3; 10]), DEFAULT_BINS),
            Err(Error::DegenerateField(_))
        ));
    }

    #[test]
    fn empty_field_has_no_threshold() {
        let g = GridGeometry::new(0.0, 0.0, 1.0, 2, 1, "c").unwrap();
        let f = ScalarField::new(g, Plane::filled(2, 1, 0.5), Plane::filled(2, 1, false)).unwrap();
        assert!(otsu_threshold(&f, DEFAULT_BINS).is_err());
    }

    #[test]
    fn threshold_mask_bounds() {
        let f = field(vec![-0.9, -0.2, 0.4, 1.0]);
        assert_eq!(threshold_mask(&f, -1.0).unwrap().water_count(), 4);
        assert_eq!(threshold_mask(&f, 1.0).unwrap().water_count(), 0);
    }

    #[test]
    fn bin_edges_match_threshold_rule() {
        // a value exactly on an upper edge belongs to the lower bin, i.e. is not > threshold
        assert_eq!(bin_index(0.0, 0.0, 1.0, 4), 0);
        assert_eq!(bin_index(0.25, 0.0, 1.0, 4), 0);
        assert_eq!(bin_index(0.2500001, 0.0, 1.0, 4), 1);
        assert_eq!(bin_index(1.0, 0.0, 1.0, 4), 3);
    }

    proptest! {
        // dyadic values and power-of-two scales keep every bin computation exact
        #[test]
        fn split_bin_invariant_under_affine_maps(
            ks in prop::collection::vec(-64i32..=64, 8..200),
            scale_exp in -3i32..4,
            shift in -16i32..16,
        ) {
            let values: Vec<f64> = ks.iter().map(|&k| k as f64 / 64.0).collect();
            let a = 2f64.powi(scale_exp);
            let b = shift as f64 / 8.0;
            let Ok(base) = otsu_from_values(values.iter().copied(), DEFAULT_BINS) else {
                return Ok(());
            };
            let moved = otsu_from_values(values.iter().map(|v| a * v + b), DEFAULT_BINS).unwrap();
            // skip near-ties between different partitions, where rounding in the class means
            // may legitimately flip the argmax
            let lower = |k: usize| values.iter().filter(|&&v| v <= edge(&base, k)).count();
            let chosen = lower(base.split);
            let runner_up = (1..DEFAULT_BINS)
                .filter(|&k| lower(k) != chosen)
                .map(|k| split_variance(&values, &base, k))
                .fold(0.0, f64::max);
            prop_assume!(base.between_class_variance - runner_up > 1e-9 * base.between_class_variance);
            prop_assert_eq!(base.split, moved.split);
        }
    }

    fn edge(base: &OtsuThreshold, k: usize) -> f64 {
        base.min + k as f64 * (base.max - base.min) / base.nbins as f64
    }

    fn split_variance(values: &[f64], base: &OtsuThreshold, k: usize) -> f64 {
        let t = edge(base, k);
        let (lo, hi): (Vec<f64>, Vec<f64>) = values.iter().partition(|&&v| v <= t);
        if lo.is_empty() || hi.is_empty() {
            return 0.0;
        }
        let n = values.len() as f64;
        let m0 = lo.iter().sum::<f64>() / lo.len() as f64;
        let m1 = hi.iter().sum::<f64>() / hi.len() as f64;
        (lo.len() as f64 / n) * (hi.len() as f64 / n) * (m0 - m1).powi(2)
    }
}

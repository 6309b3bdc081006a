use super::{Band, Raster};
use crate::error::{Error, Result};

/// Per-band min-max scaling of valid pixels to `[0, 1]`.
///
/// Invalid pixels are written as 0 and stay invalid. A constant band maps to 0.
pub fn minmax_normalize(r: &Raster) -> Result<Raster> {
    let validity = r.validity();
    let mut bands = Vec::with_capacity(r.bands().len());
    for band in r.bands() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (&v, &ok) in band.values.as_slice().iter().zip(validity.as_slice()) {
            if ok {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if lo > hi {
            return Err(Error::EmptyBand(band.name.clone()));
        }
        let range = hi - lo;
        let mut values = band.values.clone();
        for (v, &ok) in values.as_mut_slice().iter_mut().zip(validity.as_slice()) {
            *v = if ok && range > 0.0 {
                ((*v - lo) / range).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
        bands.push(Band {
            name: band.name.clone(),
            values,
        });
    }
    Raster::new(r.geometry().clone(), bands, validity.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{GridGeometry, Plane};
    use proptest::prelude::*;

    fn raster(bands: Vec<(&str, Vec<f64>)>, validity: Vec<bool>) -> Raster {
        let n = validity.len();
        let g = GridGeometry::new(0.0, 0.0, 3.0, n, 1, "c").unwrap();
        let bands = bands
            .into_iter()
            .map(|(name, v)| Band {
                name: name.into(),
                values: Plane::from_vec(n, 1, v).unwrap(),
            })
            .collect();
        Raster::new(g, bands, Plane::from_vec(n, 1, validity).unwrap()).unwrap()
    }

    #[test]
    fn affine_band() {
        let r = raster(vec![("g", vec![2.0, 4.0, 6.0])], vec![true; 3]);
        let n = minmax_normalize(&r).unwrap();
        assert_eq!(n.band("g").unwrap().as_slice(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_band_maps_to_zero() {
        let r = raster(vec![("g", vec![5.0, 5.0])], vec![true; 2]);
        let n = minmax_normalize(&r).unwrap();
        assert_eq!(n.band("g").unwrap().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn nodata_filled_with_zero_and_ignored_for_range() {
        let r = raster(vec![("g", vec![1000.0, 2.0, 4.0])], vec![false, true, true]);
        let n = minmax_normalize(&r).unwrap();
        assert_eq!(n.band("g").unwrap().as_slice(), &[0.0, 0.0, 1.0]);
        assert!(!n.validity().at(0, 0));
    }

    #[test]
    fn all_nodata_band_is_named_in_error() {
        let r = raster(vec![("nir", vec![1.0, 2.0])], vec![false, false]);
        match minmax_normalize(&r) {
            Err(Error::EmptyBand(name)) => assert_eq!(name, "nir"),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn four_band() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<bool>)> {
        (1usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(prop::collection::vec(-1e4f64..1e4, n), 4),
                prop::collection::vec(prop::bool::weighted(0.8), n),
            )
        })
    }

    proptest! {
        #[test]
        fn valid_pixels_land_in_unit_interval((bands, mut validity) in four_band()) {
            validity[0] = true;
            let names = ["blue", "green", "red", "nir"];
            let r = raster(names.iter().copied().zip(bands).collect(), validity.clone());
            let n = minmax_normalize(&r).unwrap();
            for band in n.bands() {
                for (&v, &ok) in band.values.as_slice().iter().zip(&validity) {
                    if ok {
                        prop_assert!((0.0..=1.0).contains(&v));
                    } else {
                        prop_assert_eq!(v, 0.0);
                    }
                }
            }
        }

        #[test]
        fn idempotent((bands, mut validity) in four_band()) {
            validity[0] = true;
            let names = ["blue", "green", "red", "nir"];
            let r = raster(names.iter().copied().zip(bands).collect(), validity);
            let once = minmax_normalize(&r).unwrap();
            let twice = minmax_normalize(&once).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}

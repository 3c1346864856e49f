//! Spherical-earth geodetic primitives.
//!
//! All distances are great-circle distances on a sphere of radius
//! [`EARTH_RADIUS_M`]. Angles are in degrees at the API boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Mean earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Points closer than this (in degrees, per component) have no defined bearing.
pub const COINCIDENT_DEG: f64 = 1e-12;

/// A WGS84 latitude/longitude pair in degrees.
///
/// Latitude is checked to lie in `[-90, 90]`; longitude is wrapped into
/// `[-180, 180)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint<T = f64> {
    lat: T,
    lon: T,
}

impl<T: Scalar> GeoPoint<T> {
    pub fn new(lat: T, lon: T) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(Error::NonFinite);
        }
        if lat < T::lit(-90.0) || lat > T::lit(90.0) {
            return Err(Error::LatitudeOutOfRange(lat.as_f64()));
        }
        Ok(Self {
            lat,
            lon: normalize_lon(lon),
        })
    }

    /// Builds a point from components already known to be in range.
    pub(crate) fn from_raw(lat: T, lon: T) -> Self {
        debug_assert!(lat >= T::lit(-90.0) && lat <= T::lit(90.0));
        Self {
            lat,
            lon: normalize_lon(lon),
        }
    }

    #[inline]
    pub fn lat(&self) -> T {
        self.lat
    }

    #[inline]
    pub fn lon(&self) -> T {
        self.lon
    }

    /// Converts the components to another scalar type.
    pub fn cast<U: Scalar>(&self) -> GeoPoint<U> {
        GeoPoint::from_raw(U::lit(self.lat.as_f64()), U::lit(self.lon.as_f64()))
    }
}

fn normalize_lon<T: Scalar>(lon: T) -> T {
    let full = T::lit(360.0);
    let half = T::lit(180.0);
    if lon >= -half && lon < half {
        return lon;
    }
    let mut wrapped = (lon + half) % full;
    if wrapped < T::zero() {
        wrapped = wrapped + full;
    }
    let out = wrapped - half;
    // rounding in the modulo can land exactly on +180
    if out >= half {
        -half
    } else {
        out
    }
}

/// Compass heading in degrees, clockwise from true north, in `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Heading<T = f64>(T);

impl<T: Scalar> Heading<T> {
    /// Wraps any finite angle into `[0, 360)`.
    pub fn from_degrees(deg: T) -> Result<Self> {
        if !deg.is_finite() {
            return Err(Error::NonFinite);
        }
        let full = T::lit(360.0);
        let mut d = deg % full;
        if d < T::zero() {
            d = d + full;
        }
        if d >= full {
            d = T::zero();
        }
        Ok(Self(d))
    }

    #[inline]
    pub fn degrees(&self) -> T {
        self.0
    }
}

/// Great-circle distance in meters.
pub fn haversine_distance<T: Scalar>(a: &GeoPoint<T>, b: &GeoPoint<T>) -> T {
    let two = T::lit(2.0);
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let half_dphi = (phi2 - phi1) / two;
    let half_dlambda = (b.lon - a.lon).to_radians() / two;
    let sin_dphi = half_dphi.sin();
    let sin_dlambda = half_dlambda.sin();
    let h = sin_dphi * sin_dphi + phi1.cos() * phi2.cos() * sin_dlambda * sin_dlambda;
    let h = h.max(T::zero()).min(T::one());
    let central = two * h.sqrt().atan2((T::one() - h).sqrt());
    T::lit(EARTH_RADIUS_M) * central
}

/// Initial great-circle bearing from `from` toward `to`.
pub fn initial_bearing<T: Scalar>(from: &GeoPoint<T>, to: &GeoPoint<T>) -> Result<Heading<T>> {
    let eps = T::lit(COINCIDENT_DEG);
    let dlon_deg = normalize_lon(to.lon - from.lon);
    if (to.lat - from.lat).abs() < eps && dlon_deg.abs() < eps {
        return Err(Error::UndefinedBearing);
    }
    let phi1 = from.lat.to_radians();
    let phi2 = to.lat.to_radians();
    let dlambda = dlon_deg.to_radians();
    let y = dlambda.sin() * phi2.cos();
    let x = phi1.cos() * phi2.sin() - phi1.sin() * phi2.cos() * dlambda.cos();
    Heading::from_degrees(y.atan2(x).to_degrees())
}

/// Smallest absolute difference between two headings, in `[0, 180]`.
pub fn angular_separation<T: Scalar>(a: Heading<T>, b: Heading<T>) -> T {
    let full = T::lit(360.0);
    let d = (a.0 - b.0).abs() % full;
    d.min(full - d)
}

/// Linear interpolation of latitude and longitude.
///
/// Only meant for the short hops between consecutive GPS fixes; it does
/// not follow the great circle.
pub fn interpolate_along<T: Scalar>(
    a: &GeoPoint<T>,
    b: &GeoPoint<T>,
    fraction: T,
) -> Result<GeoPoint<T>> {
    if !(fraction >= T::zero() && fraction <= T::one()) {
        return Err(Error::FractionOutOfRange(fraction.as_f64()));
    }
    if fraction == T::zero() {
        return Ok(*a);
    }
    if fraction == T::one() {
        return Ok(*b);
    }
    let lat = a.lat + (b.lat - a.lat) * fraction;
    let lon = a.lon + (b.lon - a.lon) * fraction;
    Ok(GeoPoint::from_raw(lat, lon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn p(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn h(deg: f64) -> Heading {
        Heading::from_degrees(deg).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(haversine_distance(&p(0.0, 0.0), &p(0.0, 0.0)), 0.0);
        // R * pi / 180
        assert_abs_diff_eq!(
            haversine_distance(&p(0.0, 0.0), &p(0.0, 1.0)),
            111_194.93,
            epsilon = 0.01
        );
        // pi * R
        assert_abs_diff_eq!(
            haversine_distance(&p(0.0, 0.0), &p(0.0, -180.0)),
            20_015_086.8,
            epsilon = 0.1
        );
    }

    #[test]
    fn longitude_normalization() {
        assert_eq!(p(0.0, 180.0).lon(), -180.0);
        assert_eq!(p(0.0, 190.0).lon(), -170.0);
        assert_eq!(p(0.0, -540.0).lon(), -180.0);
        assert_eq!(p(0.0, 359.5).lon(), -0.5);
        assert!(GeoPoint::new(90.5, 0.0).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn bearing_cardinals() {
        let b = |a: GeoPoint, c: GeoPoint| initial_bearing(&a, &c).unwrap().degrees();
        assert_abs_diff_eq!(b(p(0.0, 0.0), p(1.0, 0.0)), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(b(p(0.0, 0.0), p(0.0, 1.0)), 90.0, epsilon = 1e-9);
        assert_abs_diff_eq!(b(p(10.0, 20.0), p(9.0, 20.0)), 180.0, epsilon = 1e-9);
        assert_abs_diff_eq!(b(p(0.0, 0.0), p(0.0, -1.0)), 270.0, epsilon = 1e-9);
        assert!(matches!(
            initial_bearing(&p(1.0, 1.0), &p(1.0, 1.0)),
            Err(Error::UndefinedBearing)
        ));
    }

    #[test]
    fn separation_examples() {
        assert_eq!(angular_separation(h(0.0), h(90.0)), 90.0);
        assert_abs_diff_eq!(angular_separation(h(350.0), h(10.0)), 20.0, epsilon = 1e-12);
        assert_eq!(angular_separation(h(123.4), h(123.4)), 0.0);
        assert_eq!(angular_separation(h(0.0), h(180.0)), 180.0);
    }

    #[test]
    fn interpolation_examples() {
        let a = p(0.0, 0.0);
        let b = p(0.0, 2.0);
        assert_eq!(interpolate_along(&a, &b, 0.0).unwrap(), a);
        assert_eq!(interpolate_along(&a, &b, 1.0).unwrap(), b);
        assert_eq!(interpolate_along(&a, &b, 0.5).unwrap(), p(0.0, 1.0));
        let q = interpolate_along(&a, &p(0.0002, 0.0), 0.25).unwrap();
        assert_abs_diff_eq!(q.lat(), 0.00005, epsilon = 1e-18);
        assert!(interpolate_along(&a, &b, 1.5).is_err());
        assert!(interpolate_along(&a, &b, -0.1).is_err());
        assert!(interpolate_along(&a, &b, f64::NAN).is_err());
    }

    #[test]
    fn single_precision_agrees() {
        let a = GeoPoint::<f32>::new(32.88, -117.23).unwrap();
        let b = GeoPoint::<f32>::new(32.89, -117.22).unwrap();
        let d32 = haversine_distance(&a, &b) as f64;
        let d64 = haversine_distance(&a.cast::<f64>(), &b.cast::<f64>());
        assert!((d32 - d64).abs() / d64 < 1e-4);
    }

    fn point() -> impl Strategy<Value = GeoPoint> {
        (-90.0f64..=90.0, -180.0f64..180.0).prop_map(|(la, lo)| p(la, lo))
    }

    fn nearby_pair() -> impl Strategy<Value = (GeoPoint, GeoPoint)> {
        (-80.0f64..80.0, -179.0f64..179.0, -0.0006f64..0.0006, -0.0006f64..0.0006)
            .prop_map(|(la, lo, dla, dlo)| (p(la, lo), p(la + dla, lo + dlo)))
    }

    proptest! {
        #[test]
        fn distance_symmetric_and_bounded(a in point(), b in point()) {
            let d = haversine_distance(&a, &b);
            prop_assert_eq!(d, haversine_distance(&b, &a));
            prop_assert!(d >= 0.0);
            prop_assert!(d <= std::f64::consts::PI * EARTH_RADIUS_M + 1e-6);
            prop_assert_eq!(haversine_distance(&a, &a), 0.0);
            if a != b {
                prop_assert!(d > 0.0);
            }
        }

        #[test]
        fn separation_range_and_periodicity(x in 0.0f64..360.0, y in 0.0f64..360.0) {
            let s = angular_separation(h(x), h(y));
            prop_assert!((0.0..=180.0).contains(&s));
            prop_assert_eq!(s, angular_separation(h(y), h(x)));
            let shifted = angular_separation(h(x + 360.0), h(y));
            prop_assert!((s - shifted).abs() < 1e-9);
        }

        #[test]
        fn interpolation_distance_monotone((a, b) in nearby_pair(), f1 in 0.0f64..=1.0, f2 in 0.0f64..=1.0) {
            let (lo, hi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
            let d_lo = haversine_distance(&a, &interpolate_along(&a, &b, lo).unwrap());
            let d_hi = haversine_distance(&a, &interpolate_along(&a, &b, hi).unwrap());
            prop_assert!(d_lo <= d_hi + 1e-9);
        }
    }

    #[test]
    fn triangle_inequality_random_triples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut rp = || p(rng.gen_range(-90.0..=90.0), rng.gen_range(-180.0..180.0));
        for _ in 0..10_000 {
            let (a, b, c) = (rp(), rp(), rp());
            let ab = haversine_distance(&a, &b);
            let bc = haversine_distance(&b, &c);
            let ac = haversine_distance(&a, &c);
            assert!(ac <= ab + bc + 1e-6, "{ac} > {ab} + {bc}");
        }
    }
}

//! Spherical geodesy on the mean Earth sphere.

use serde::{Deserialize, Serialize};

/// IUGG mean Earth radius, meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;
/// Meters per international nautical mile.
pub const METERS_PER_NMI: f64 = 1852.0;
/// Earth radius expressed in nautical miles.
pub const EARTH_RADIUS_NMI: f64 = EARTH_RADIUS_M / METERS_PER_NMI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub const fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }

    fn to_unit(self) -> [f64; 3] {
        let (phi, lam) = (self.lat.to_radians(), self.lon.to_radians());
        [phi.cos() * lam.cos(), phi.cos() * lam.sin(), phi.sin()]
    }

    fn from_unit(v: [f64; 3]) -> Self {
        let h = (v[0] * v[0] + v[1] * v[1]).sqrt();
        Self { lat: v[2].atan2(h).to_degrees(), lon: v[1].atan2(v[0]).to_degrees() }
    }
}

/// Central angle between two points in radians (haversine form).
pub fn central_angle(a: LatLon, b: LatLon) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlam = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlam / 2.0).sin().powi(2);
    2.0 * h.sqrt().min(1.0).asin()
}

/// Great-circle distance in nautical miles.
pub fn great_circle_nmi(a: LatLon, b: LatLon) -> f64 {
    EARTH_RADIUS_NMI * central_angle(a, b)
}

/// Point at fraction `t` along the great circle from `a` to `b`.
pub fn interpolate(a: LatLon, b: LatLon, t: f64) -> LatLon {
    let omega = central_angle(a, b);
    if omega < 1e-12 {
        return a;
    }
    let (ua, ub) = (a.to_unit(), b.to_unit());
    let s = omega.sin();
    if s.abs() < 1e-12 {
        // antipodal endpoints: no unique great circle, fall back to linear
        return LatLon::new(a.lat + (b.lat - a.lat) * t, a.lon + (b.lon - a.lon) * t);
    }
    let wa = ((1.0 - t) * omega).sin() / s;
    let wb = (t * omega).sin() / s;
    LatLon::from_unit([wa * ua[0] + wb * ub[0], wa * ua[1] + wb * ub[1], wa * ua[2] + wb * ub[2]])
}

/// Wrap a longitude difference into [-180, 180).
pub fn wrap_lon_delta(d: f64) -> f64 {
    (d + 180.0).rem_euclid(360.0) - 180.0
}

/// Mean position of a set of points (normalized vector mean).
pub fn centroid(points: &[LatLon]) -> Option<LatLon> {
    if points.is_empty() {
        return None;
    }
    let mut acc = [0.0; 3];
    for p in points {
        let u = p.to_unit();
        acc[0] += u[0];
        acc[1] += u[1];
        acc[2] += u[2];
    }
    let norm = (acc[0] * acc[0] + acc[1] * acc[1] + acc[2] * acc[2]).sqrt();
    if norm < 1e-12 {
        return None;
    }
    Some(LatLon::from_unit([acc[0] / norm, acc[1] / norm, acc[2] / norm]))
}

/// Simple polygon with optional holes, coordinates as (lon, lat) rings.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub outer: Vec<LatLon>,
    pub holes: Vec<Vec<LatLon>>,
}

impl Polygon {
    pub fn new(outer: Vec<LatLon>) -> Self {
        Self { outer, holes: Vec::new() }
    }

    pub fn contains(&self, p: LatLon) -> bool {
        winding_number(&self.outer, p) != 0 && self.holes.iter().all(|h| winding_number(h, p) == 0)
    }

    /// Parse a GeoJSON `Polygon` geometry, a `Feature` wrapping one, or the
    /// first feature of a `FeatureCollection`.
    pub fn from_geojson(value: &serde_json::Value) -> Option<Self> {
        match value.get("type")?.as_str()? {
            "FeatureCollection" => Self::from_geojson(value.get("features")?.as_array()?.first()?),
            "Feature" => Self::from_geojson(value.get("geometry")?),
            "Polygon" => {
                let rings = value.get("coordinates")?.as_array()?;
                let mut parsed = rings.iter().map(|ring| {
                    ring.as_array()?
                        .iter()
                        .map(|pt| {
                            let pt = pt.as_array()?;
                            Some(LatLon::new(pt.get(1)?.as_f64()?, pt.first()?.as_f64()?))
                        })
                        .collect::<Option<Vec<_>>>()
                });
                let outer = parsed.next()??;
                let holes = parsed.collect::<Option<Vec<_>>>()?;
                if outer.len() < 3 {
                    return None;
                }
                Some(Self { outer, holes })
            }
            _ => None,
        }
    }
}

/// Winding number of `ring` around `p` in the plate carrée plane.
fn winding_number(ring: &[LatLon], p: LatLon) -> i32 {
    let n = ring.len();
    if n < 3 {
        return 0;
    }
    let mut wn = 0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        let cross = (b.lon - a.lon) * (p.lat - a.lat) - (p.lon - a.lon) * (b.lat - a.lat);
        if a.lat <= p.lat {
            if b.lat > p.lat && cross > 0.0 {
                wn += 1;
            }
        } else if b.lat <= p.lat && cross < 0.0 {
            wn -= 1;
        }
    }
    wn
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_is_zero() {
        assert_eq!(great_circle_nmi(LatLon::new(0.0, 0.0), LatLon::new(0.0, 0.0)), 0.0);
    }

    #[test]
    fn one_degree_of_meridian() {
        // analytic arc: R * pi/180 / 1852
        let expected = EARTH_RADIUS_M * std::f64::consts::PI / 180.0 / METERS_PER_NMI;
        let d = great_circle_nmi(LatLon::new(0.0, 0.0), LatLon::new(1.0, 0.0));
        assert!((d - expected).abs() < 1e-9);
        assert!((d - 60.04).abs() < 0.005, "{d}");
    }

    #[test]
    fn quarter_great_circle() {
        let expected = EARTH_RADIUS_M * std::f64::consts::FRAC_PI_2 / METERS_PER_NMI;
        let d = great_circle_nmi(LatLon::new(0.0, 0.0), LatLon::new(0.0, 90.0));
        assert!((d - expected).abs() < 1e-9);
        assert!((d - 5403.65).abs() < 0.005, "{d}");
    }

    #[test]
    fn interpolation_stays_on_the_arc() {
        let a = LatLon::new(1.3, 103.8);
        let b = LatLon::new(51.9, 4.5);
        let total = great_circle_nmi(a, b);
        let m = interpolate(a, b, 0.3);
        let sum = great_circle_nmi(a, m) + great_circle_nmi(m, b);
        assert!((sum - total).abs() < 1e-6);
        assert!((great_circle_nmi(a, m) - 0.3 * total).abs() < 1e-6);
    }

    #[test]
    fn centroid_of_symmetric_points() {
        let c = centroid(&[LatLon::new(10.0, 20.0), LatLon::new(-10.0, 20.0)]).unwrap();
        assert!(c.lat.abs() < 1e-12 && (c.lon - 20.0).abs() < 1e-12);
        assert!(centroid(&[]).is_none());
    }

    #[test]
    fn polygon_with_hole() {
        let square =
            |lo: f64, hi: f64| vec![LatLon::new(lo, lo), LatLon::new(lo, hi), LatLon::new(hi, hi), LatLon::new(hi, lo)];
        let poly = Polygon { outer: square(0.0, 10.0), holes: vec![square(4.0, 6.0)] };
        assert!(poly.contains(LatLon::new(2.0, 2.0)));
        assert!(!poly.contains(LatLon::new(5.0, 5.0)));
        assert!(!poly.contains(LatLon::new(11.0, 5.0)));
    }

    #[test]
    fn geojson_polygon_parse() {
        let v: serde_json::Value = serde_json::from_str(
            r#"{"type":"Feature","properties":{},"geometry":{"type":"Polygon",
                "coordinates":[[[30,29],[34,29],[34,32],[30,32],[30,29]]]}}"#,
        )
        .unwrap();
        let poly = Polygon::from_geojson(&v).unwrap();
        assert!(poly.contains(LatLon::new(30.5, 32.3)));
        assert!(!poly.contains(LatLon::new(28.0, 32.3)));
    }

    fn coord() -> impl Strategy<Value = LatLon> {
        (-89.9f64..89.9, -180.0f64..180.0).prop_map(|(lat, lon)| LatLon::new(lat, lon))
    }

    proptest! {
        #[test]
        fn metric_axioms(a in coord(), b in coord(), c in coord()) {
            let ab = great_circle_nmi(a, b);
            let ba = great_circle_nmi(b, a);
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() < 1e-9);
            let ac = great_circle_nmi(a, c);
            let cb = great_circle_nmi(c, b);
            prop_assert!(ab <= ac + cb + 1e-6);
        }

        #[test]
        fn zero_only_for_identical(a in coord(), b in coord()) {
            if a != b {
                prop_assert!(great_circle_nmi(a, b) > 0.0);
            }
        }
    }
}

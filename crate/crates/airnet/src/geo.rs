//! Spherical and locally projected distances in nautical miles.

use serde::{Deserialize, Serialize};

pub const EARTH_RADIUS_NM: f64 = 3440.065;
/// Nautical miles per degree of latitude.
pub const NM_PER_DEG: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        LatLon { lat, lon }
    }
}

/// Haversine distance.
pub fn great_circle_nm(a: LatLon, b: LatLon) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_NM * h.sqrt().min(1.0).asin()
}

/// Equirectangular projection about a reference point. Good to a fraction of
/// a percent over a few hundred miles, which is all the clustering needs.
#[derive(Debug, Clone, Copy)]
pub struct LocalProjection {
    origin: LatLon,
    cos_lat: f64,
}

impl LocalProjection {
    pub fn new(origin: LatLon) -> Self {
        LocalProjection { origin, cos_lat: origin.lat.to_radians().cos() }
    }

    pub fn project(&self, p: LatLon) -> (f64, f64) {
        ((p.lon - self.origin.lon) * self.cos_lat * NM_PER_DEG, (p.lat - self.origin.lat) * NM_PER_DEG)
    }

    pub fn unproject(&self, x: f64, y: f64) -> LatLon {
        LatLon { lat: self.origin.lat + y / NM_PER_DEG, lon: self.origin.lon + x / (self.cos_lat * NM_PER_DEG) }
    }
}

/// Distance from `p` to segment `a`-`b` in a plane, with the segment parameter
/// of the closest point.
pub fn point_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let s = if len2 == 0.0 { 0.0 } else { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) };
    let (cx, cy) = (a.0 + s * dx, a.1 + s * dy);
    (((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt(), s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_degree_of_latitude_is_sixty_miles() {
        let d = great_circle_nm(LatLon::new(10.0, 20.0), LatLon::new(11.0, 20.0));
        assert!((d - 60.04).abs() < 0.1, "{d}");
    }

    #[test]
    fn projection_round_trips() {
        let pr = LocalProjection::new(LatLon::new(30.0, 110.0));
        let p = LatLon::new(31.2, 108.7);
        let (x, y) = pr.project(p);
        let q = pr.unproject(x, y);
        assert!((q.lat - p.lat).abs() < 1e-12 && (q.lon - p.lon).abs() < 1e-12);
    }

    #[test]
    fn segment_distance() {
        let (d, s) = point_segment((1.0, 1.0), (0.0, 0.0), (2.0, 0.0));
        assert_eq!((d, s), (1.0, 0.5));
        let (d, s) = point_segment((-3.0, 4.0), (0.0, 0.0), (2.0, 0.0));
        assert_eq!((d, s), (5.0, 0.0));
    }
}

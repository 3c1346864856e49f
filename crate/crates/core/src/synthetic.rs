//! Synthetic routes for fixtures and demos: a polyline in local meters
//! around an origin, driven at constant speed to produce training logs and
//! test traces.

use crate::advisory::{DriveTrace, TraceFix};
use crate::error::Result;
use crate::geodesy::{haversine_distance, GeoPoint, EARTH_RADIUS_M};
use crate::ingest::DetectionRecord;

/// Moves `origin` by `north_m` and `east_m` on the local tangent plane.
pub fn offset(origin: &GeoPoint, north_m: f64, east_m: f64) -> GeoPoint {
    let deg_per_m = 180.0 / (std::f64::consts::PI * EARTH_RADIUS_M);
    let lat = origin.lat() + north_m * deg_per_m;
    let lon = origin.lon() + east_m * deg_per_m / origin.lat().to_radians().cos();
    GeoPoint::new(lat, lon).expect("offset stays in range")
}

/// A polyline route given as waypoints in local meters `(north, east)`.
#[derive(Debug, Clone)]
pub struct Route {
    vertices: Vec<GeoPoint>,
    cumulative: Vec<f64>,
}

impl Route {
    pub fn new(origin: GeoPoint, waypoints: &[(f64, f64)]) -> Self {
        assert!(waypoints.len() >= 2, "a route needs two waypoints");
        let vertices: Vec<_> = waypoints.iter().map(|&(n, e)| offset(&origin, n, e)).collect();
        let mut cumulative = vec![0.0];
        for w in vertices.windows(2) {
            let last = *cumulative.last().unwrap();
            cumulative.push(last + haversine_distance(&w[0], &w[1]));
        }
        Self { vertices, cumulative }
    }

    /// Straight route of `length_m` meters along `bearing_deg`.
    pub fn straight(origin: GeoPoint, bearing_deg: f64, length_m: f64) -> Self {
        let b = bearing_deg.to_radians();
        Self::new(origin, &[(0.0, 0.0), (length_m * b.cos(), length_m * b.sin())])
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Point `arc` meters along the route, clamped to its ends.
    pub fn point_at(&self, arc: f64) -> GeoPoint {
        let arc = arc.clamp(0.0, self.length());
        let seg = (self.cumulative.partition_point(|&c| c <= arc).max(1) - 1).min(self.vertices.len() - 2);
        let len = self.cumulative[seg + 1] - self.cumulative[seg];
        let f = if len > 0.0 { ((arc - self.cumulative[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        let (a, b) = (&self.vertices[seg], &self.vertices[seg + 1]);
        GeoPoint::new(a.lat() + (b.lat() - a.lat()) * f, a.lon() + (b.lon() - a.lon()) * f)
            .expect("interpolated point in range")
    }

    /// The same route driven in the opposite direction.
    pub fn reversed(&self) -> Self {
        let vertices: Vec<_> = self.vertices.iter().rev().copied().collect();
        let total = self.length();
        let cumulative = self.cumulative.iter().rev().map(|c| total - c).collect();
        Self { vertices, cumulative }
    }

    /// The part of the route between two arc positions.
    pub fn slice(&self, from: f64, to: f64) -> Self {
        let mut vertices = vec![self.point_at(from)];
        for (v, &c) in self.vertices.iter().zip(&self.cumulative) {
            if c > from && c < to {
                vertices.push(*v);
            }
        }
        vertices.push(self.point_at(to));
        let mut cumulative = vec![0.0];
        for w in vertices.windows(2) {
            let last = *cumulative.last().unwrap();
            cumulative.push(last + haversine_distance(&w[0], &w[1]));
        }
        Self { vertices, cumulative }
    }

    /// Arc positions of fixes sampled at `hz` while driving at `speed_kmh`,
    /// with their timestamps. The final fix lands on the route end.
    fn samples(&self, speed_kmh: f64, hz: f64, start_ms: i64) -> Vec<(i64, f64)> {
        let step_m = speed_kmh / 3.6 / hz;
        let step_ms = 1000.0 / hz;
        let mut out = Vec::new();
        let mut i = 0usize;
        loop {
            let arc = i as f64 * step_m;
            if arc >= self.length() {
                let t = start_ms + (self.length() / step_m * step_ms).round() as i64;
                if out.last().is_none_or(|&(lt, _)| t > lt) {
                    out.push((t, self.length()));
                }
                break;
            }
            out.push((start_ms + (i as f64 * step_ms).round() as i64, arc));
            i += 1;
        }
        out
    }

    /// GPS trace of one constant-speed pass.
    pub fn drive(&self, clip_id: &str, speed_kmh: f64, hz: f64, start_ms: i64) -> Result<DriveTrace> {
        let fixes = self
            .samples(speed_kmh, hz, start_ms)
            .into_iter()
            .map(|(t, arc)| TraceFix {
                timestamp_ms: t,
                position: self.point_at(arc),
            })
            .collect();
        DriveTrace::new(clip_id, fixes)
    }

    /// Training log of one constant-speed pass. `count_at` gives the
    /// pedestrian count seen at each arc position.
    pub fn training_log(
        &self,
        clip_id: &str,
        speed_kmh: f64,
        hz: f64,
        start_ms: i64,
        count_at: impl Fn(f64) -> u32,
    ) -> Vec<DetectionRecord> {
        self.samples(speed_kmh, hz, start_ms)
            .into_iter()
            .map(|(t, arc)| DetectionRecord {
                timestamp_ms: t,
                position: self.point_at(arc),
                pedestrian_count: count_at(arc),
                clip_id: clip_id.to_string(),
            })
            .collect()
    }
}

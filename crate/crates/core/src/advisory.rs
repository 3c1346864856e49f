//! Drive replay: checkpoints every `K` meters along a test trace, the
//! stopping-distance search radius, and the in-front test that decides
//! whether an advisory is shown.

use std::io::Read;

use crate::error::{Error, Result};
use crate::geodesy::{angular_separation, haversine_distance, initial_bearing, interpolate_along, GeoPoint, Heading};
use crate::ingest::{parse_field, parse_position, read_csv, HotspotMap};
use crate::scalar::Scalar;

pub const TRACE_HEADER: [&str; 4] = ["timestamp", "latitude", "longitude", "clip_id"];

/// Nodes closer than this to the vehicle count as in front of it.
pub const COINCIDENT_M: f64 = 1e-6;

/// Stopping-distance and sampling parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvisoryConfig<T = f64> {
    /// Perception-reaction time in seconds.
    pub reaction_time: T,
    /// Coefficient of friction.
    pub friction: T,
    /// Road grade (rise over run, signed).
    pub grade: T,
    /// Multiplier applied to the whole stopping distance.
    pub safety_factor: T,
    /// Meters between consecutive checkpoints.
    pub sampling_distance: T,
    /// Largest bearing offset, in degrees, at which a hotspot is in front.
    pub heading_threshold: T,
    /// Hotspots with fewer pedestrians are ignored.
    pub min_count: u32,
}

impl<T: Scalar> Default for AdvisoryConfig<T> {
    fn default() -> Self {
        Self {
            reaction_time: T::lit(2.5),
            friction: T::lit(0.7),
            grade: T::zero(),
            safety_factor: T::one(),
            sampling_distance: T::lit(2.0),
            heading_threshold: T::lit(90.0),
            min_count: 1,
        }
    }
}

impl<T: Scalar> AdvisoryConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        let finite = [
            self.reaction_time,
            self.friction,
            self.grade,
            self.safety_factor,
            self.sampling_distance,
            self.heading_threshold,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("all parameters must be finite");
        }
        if self.friction + self.grade <= T::zero() {
            return Err(Error::NonPositiveBraking((self.friction + self.grade).as_f64()));
        }
        if self.reaction_time <= T::zero() {
            return bad("reaction time must be positive");
        }
        if self.safety_factor <= T::zero() {
            return bad("safety factor must be positive");
        }
        if self.sampling_distance <= T::zero() {
            return bad("sampling distance must be positive");
        }
        if self.heading_threshold <= T::zero() || self.heading_threshold > T::lit(180.0) {
            return bad("heading threshold must lie in (0, 180]");
        }
        if self.min_count == 0 {
            return bad("min count must be at least 1");
        }
        Ok(())
    }
}

/// Perception-reaction distance plus braking distance, scaled by the safety
/// factor. Speed in km/h, result in meters.
pub fn stopping_distance<T: Scalar>(speed_kmh: T, cfg: &AdvisoryConfig<T>) -> Result<T> {
    let braking = cfg.friction + cfg.grade;
    if !(braking > T::zero()) {
        return Err(Error::NonPositiveBraking(braking.as_f64()));
    }
    if !(speed_kmh >= T::zero()) || !speed_kmh.is_finite() {
        return Err(Error::InvalidSpeed(speed_kmh.as_f64()));
    }
    let reaction = T::lit(0.278) * cfg.reaction_time * speed_kmh;
    let brake = speed_kmh * speed_kmh / (T::lit(254.0) * braking);
    Ok(cfg.safety_factor * (reaction + brake))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceFix<T = f64> {
    pub timestamp_ms: i64,
    pub position: GeoPoint<T>,
}

/// A test drive: GPS fixes with strictly increasing timestamps.
#[derive(Debug, Clone)]
pub struct DriveTrace<T = f64> {
    clip_id: String,
    fixes: Vec<TraceFix<T>>,
    /// Arc length from the first fix to each fix.
    cumulative: Vec<T>,
    /// Bearing of each segment, carried over zero-length segments from the
    /// last segment that moved.
    headings: Vec<Option<Heading<T>>>,
}

impl<T: Scalar> DriveTrace<T> {
    pub fn new(clip_id: impl Into<String>, fixes: Vec<TraceFix<T>>) -> Result<Self> {
        let clip_id = clip_id.into();
        for (i, w) in fixes.windows(2).enumerate() {
            if w[1].timestamp_ms <= w[0].timestamp_ms {
                return Err(Error::InvalidTrace(format!(
                    "clip `{clip_id}`: timestamp {} at fix {} does not increase",
                    w[1].timestamp_ms,
                    i + 1
                )));
            }
            if (w[1].position.lon() - w[0].position.lon()).abs() >= T::lit(180.0) {
                return Err(Error::InvalidTrace(format!(
                    "clip `{clip_id}`: longitude jumps 180 degrees or more at fix {}",
                    i + 1
                )));
            }
        }
        let mut cumulative = Vec::with_capacity(fixes.len());
        let mut headings = Vec::with_capacity(fixes.len().saturating_sub(1));
        let mut total = T::zero();
        let mut carried = None;
        if !fixes.is_empty() {
            cumulative.push(total);
        }
        for w in fixes.windows(2) {
            let len = haversine_distance(&w[0].position, &w[1].position);
            total = total + len;
            cumulative.push(total);
            if len > T::zero() {
                if let Ok(h) = initial_bearing(&w[0].position, &w[1].position) {
                    carried = Some(h);
                }
            }
            headings.push(carried);
        }
        Ok(Self {
            clip_id,
            fixes,
            cumulative,
            headings,
        })
    }

    pub fn clip_id(&self) -> &str {
        &self.clip_id
    }

    pub fn fixes(&self) -> &[TraceFix<T>] {
        &self.fixes
    }

    /// Total arc length in meters.
    pub fn length(&self) -> T {
        self.cumulative.last().copied().unwrap_or_else(T::zero)
    }

    pub fn segment_count(&self) -> usize {
        self.fixes.len().saturating_sub(1)
    }

    /// Heading and speed (km/h) over segment `i`. A segment that does not
    /// move has speed 0 and keeps the heading of the last segment that did;
    /// if no earlier segment moved the trace is degenerate.
    pub fn segment_kinematics(&self, i: usize) -> Result<(Heading<T>, T)> {
        assert!(i < self.segment_count(), "segment {i} out of range");
        let heading = self.headings[i].ok_or_else(|| {
            Error::DegenerateTrace(format!(
                "clip `{}`: no movement up to segment {i}, heading undefined",
                self.clip_id
            ))
        })?;
        let len = self.cumulative[i + 1] - self.cumulative[i];
        let dt_s = T::from_i64(self.fixes[i + 1].timestamp_ms - self.fixes[i].timestamp_ms)
            .expect("duration fits scalar")
            / T::lit(1000.0);
        Ok((heading, len / dt_s * T::lit(3.6)))
    }
}

/// Parses a test-drive CSV into one trace per clip, ordered by clip id.
pub fn parse_drive_log<T: Scalar, R: Read>(reader: R) -> Result<Vec<DriveTrace<T>>> {
    let mut rows: Vec<(String, TraceFix<T>)> = Vec::new();
    read_csv(reader, &TRACE_HEADER, |line, rec| {
        let timestamp_ms = parse_field(line, "timestamp", &rec[0])?;
        let position = parse_position(line, &rec[1], &rec[2])?;
        rows.push((
            rec[3].to_string(),
            TraceFix {
                timestamp_ms,
                position,
            },
        ));
        Ok(())
    })?;
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.timestamp_ms.cmp(&b.1.timestamp_ms)));
    let mut traces = Vec::new();
    let mut rows = rows.into_iter().peekable();
    while let Some((clip, fix)) = rows.next() {
        let mut fixes = vec![fix];
        while let Some((_, next)) = rows.next_if(|(c, _)| *c == clip) {
            fixes.push(next);
        }
        traces.push(DriveTrace::new(clip, fixes)?);
    }
    Ok(traces)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics<T = f64> {
    pub position: GeoPoint<T>,
    pub heading: Heading<T>,
    pub speed_kmh: T,
    pub timestamp_ms: i64,
}

/// Vehicle state at `arc_position` meters along the trace, taken from the
/// segment the vehicle occupies there. At a segment boundary the later
/// segment wins.
pub fn estimate_kinematics<T: Scalar>(trace: &DriveTrace<T>, arc_position: T) -> Result<Kinematics<T>> {
    if trace.fixes.len() < 2 {
        return Err(Error::InvalidTrace(format!(
            "clip `{}`: need at least 2 fixes, found {}",
            trace.clip_id,
            trace.fixes.len()
        )));
    }
    let total = trace.length();
    if !(arc_position >= T::zero() && arc_position <= total) {
        return Err(Error::ArcOutOfRange {
            arc: arc_position.as_f64(),
            total: total.as_f64(),
        });
    }
    let seg = (trace.cumulative.partition_point(|&c| c <= arc_position) - 1).min(trace.segment_count() - 1);
    let (heading, speed_kmh) = trace.segment_kinematics(seg)?;
    let (a, b) = (&trace.fixes[seg], &trace.fixes[seg + 1]);
    let len = trace.cumulative[seg + 1] - trace.cumulative[seg];
    let fraction = if len > T::zero() {
        ((arc_position - trace.cumulative[seg]) / len).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    let position = interpolate_along(&a.position, &b.position, fraction)?;
    let dt = T::from_i64(b.timestamp_ms - a.timestamp_ms).expect("duration fits scalar");
    let timestamp_ms = a.timestamp_ms + (fraction * dt).round().to_i64().unwrap_or(0);
    Ok(Kinematics {
        position,
        heading,
        speed_kmh,
        timestamp_ms,
    })
}

/// An evaluation point on the arc-length grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint<T = f64> {
    pub arc_position: T,
    pub position: GeoPoint<T>,
    pub heading: Heading<T>,
    pub speed_kmh: T,
    pub timestamp_ms: i64,
}

/// Checkpoints at arc positions `0, K, 2K, ...` not beyond the trace end.
///
/// Positions are computed as `i * K` rather than accumulated, so grids for
/// `K` and integer multiples of `K` share points exactly whenever `K` and the
/// multiple are exactly representable.
pub fn checkpoints<T: Scalar>(trace: &DriveTrace<T>, sampling_distance: T) -> Result<Vec<Checkpoint<T>>> {
    if !(sampling_distance > T::zero()) || !sampling_distance.is_finite() {
        return Err(Error::InvalidConfig("sampling distance must be positive".into()));
    }
    if trace.fixes.len() < 2 {
        return Err(Error::InvalidTrace(format!(
            "clip `{}`: need at least 2 fixes, found {}",
            trace.clip_id,
            trace.fixes.len()
        )));
    }
    let total = trace.length();
    let mut out = Vec::new();
    for i in 0usize.. {
        let arc = T::from_usize(i).expect("checkpoint index fits scalar") * sampling_distance;
        if arc > total {
            break;
        }
        let k = estimate_kinematics(trace, arc)?;
        out.push(Checkpoint {
            arc_position: arc,
            position: k.position,
            heading: k.heading,
            speed_kmh: k.speed_kmh,
            timestamp_ms: k.timestamp_ms,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvisoryDecision<T = f64> {
    pub checkpoint: Checkpoint<T>,
    pub active: bool,
    pub stopping_distance: T,
    /// Distance to the closest qualifying hotspot, if any.
    pub nearest_front_distance: Option<T>,
    /// Bearing offset of that hotspot from the vehicle heading.
    pub nearest_front_heading_sep: Option<T>,
    /// Map index of that hotspot.
    pub nearest_front_node: Option<usize>,
}

/// A checkpoint is active when some hotspot with at least `min_count`
/// pedestrians lies within the stopping distance and no more than the
/// heading threshold off the direction of travel.
pub fn evaluate_checkpoint<T: Scalar>(
    cp: &Checkpoint<T>,
    map: &HotspotMap<T>,
    cfg: &AdvisoryConfig<T>,
) -> Result<AdvisoryDecision<T>> {
    let s = stopping_distance(cp.speed_kmh, cfg)?;
    let nodes = map.nodes();
    let front = map
        .index()
        .within_radius(&cp.position, s)
        .into_iter()
        .filter(|n| nodes[n.node_index].count >= cfg.min_count)
        .find_map(|n| {
            let sep = if n.distance < T::lit(COINCIDENT_M) {
                T::zero()
            } else {
                match initial_bearing(&cp.position, &nodes[n.node_index].position) {
                    Ok(b) => angular_separation(cp.heading, b),
                    Err(_) => T::zero(),
                }
            };
            (sep <= cfg.heading_threshold).then_some((n, sep))
        });
    Ok(AdvisoryDecision {
        checkpoint: *cp,
        active: front.is_some(),
        stopping_distance: s,
        nearest_front_distance: front.map(|(n, _)| n.distance),
        nearest_front_heading_sep: front.map(|(_, sep)| sep),
        nearest_front_node: front.map(|(n, _)| n.node_index),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionKind {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition<T = f64> {
    pub arc_position: T,
    pub position: GeoPoint<T>,
    pub kind: TransitionKind,
}

/// Advisory decisions for every checkpoint of one replayed drive.
#[derive(Debug, Clone)]
pub struct AdvisoryTimeline<T = f64> {
    pub clip_id: String,
    pub sampling_distance: T,
    pub decisions: Vec<AdvisoryDecision<T>>,
}

impl<T: Scalar> AdvisoryTimeline<T> {
    /// Changes of the active flag, starting from an inactive state.
    pub fn transitions(&self) -> Vec<Transition<T>> {
        let mut prev = false;
        let mut out = Vec::new();
        for d in &self.decisions {
            if d.active != prev {
                out.push(Transition {
                    arc_position: d.checkpoint.arc_position,
                    position: d.checkpoint.position,
                    kind: if d.active { TransitionKind::On } else { TransitionKind::Off },
                });
                prev = d.active;
            }
        }
        out
    }

    /// Maximal runs of active checkpoints, as `(first, last)` arc positions.
    pub fn active_spans(&self) -> Vec<(T, T)> {
        self.active_runs()
            .into_iter()
            .map(|run| (run[0].checkpoint.arc_position, run[run.len() - 1].checkpoint.arc_position))
            .collect()
    }

    /// Maximal runs of consecutive active decisions.
    pub fn active_runs(&self) -> Vec<&[AdvisoryDecision<T>]> {
        self.decisions
            .split(|d| !d.active)
            .filter(|run| !run.is_empty())
            .collect()
    }
}

/// Replays `trace` against `map`, evaluating every checkpoint in order.
pub fn run_replay<T: Scalar>(
    trace: &DriveTrace<T>,
    map: &HotspotMap<T>,
    cfg: &AdvisoryConfig<T>,
) -> Result<AdvisoryTimeline<T>> {
    cfg.validate()?;
    let decisions = checkpoints(trace, cfg.sampling_distance)?
        .iter()
        .map(|cp| evaluate_checkpoint(cp, map, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(AdvisoryTimeline {
        clip_id: trace.clip_id.clone(),
        sampling_distance: cfg.sampling_distance,
        decisions,
    })
}

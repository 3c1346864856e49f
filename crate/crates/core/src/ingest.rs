//! Training-log ingestion: CSV parsing, one-second interval binning, and
//! aggregation of each interval into a hotspot node.

use std::cmp::Ordering;
use std::fmt;
use std::io::Read;
use std::num::NonZeroUsize;
use std::str::FromStr;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::geodesy::GeoPoint;
use crate::scalar::Scalar;
use crate::spatial_index::{BallTree, DEFAULT_LEAF_SIZE};

pub const TRAINING_HEADER: [&str; 5] =
    ["timestamp", "latitude", "longitude", "pedestrian_count", "clip_id"];

pub const INTERVAL_MS: i64 = 1000;

/// One row of a training log: an ego-vehicle GPS fix and the number of
/// pedestrians annotated in the matching frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord<T = f64> {
    pub timestamp_ms: i64,
    pub position: GeoPoint<T>,
    pub pedestrian_count: u32,
    pub clip_id: String,
}

/// Fixes from one clip falling into the same wall-clock second.
#[derive(Debug, Clone, PartialEq)]
pub struct Interval<T = f64> {
    pub clip_id: String,
    /// `floor(timestamp / 1000)` shared by every fix in the interval.
    pub index: i64,
    pub start_ms: i64,
    /// Exclusive.
    pub end_ms: i64,
    pub fixes: Vec<GeoPoint<T>>,
    pub counts: Vec<u32>,
}

/// Median vehicle position of an interval and the pedestrians seen there.
#[derive(Debug, Clone, PartialEq)]
pub struct HotspotNode<T = f64> {
    pub position: GeoPoint<T>,
    pub count: u32,
    /// Start of the source interval.
    pub timestamp_ms: i64,
    pub clip_id: String,
}

/// How per-fix pedestrian counts inside one interval combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CountMode {
    /// Largest per-fix count; approximates distinct simultaneous pedestrians.
    #[default]
    Max,
    /// Sum of per-fix counts.
    Sum,
}

impl FromStr for CountMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "max" => Ok(Self::Max),
            "sum" => Ok(Self::Sum),
            other => Err(format!("unknown count mode `{other}` (expected max or sum)")),
        }
    }
}

impl fmt::Display for CountMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Max => "max",
            Self::Sum => "sum",
        })
    }
}

/// The trained artifact: every hotspot node plus a lazily built ball tree
/// over their positions.
#[derive(Debug, Clone, Default)]
pub struct HotspotMap<T = f64> {
    nodes: Vec<HotspotNode<T>>,
    index: OnceLock<BallTree<T>>,
}

impl<T: Scalar> HotspotMap<T> {
    pub fn new(nodes: Vec<HotspotNode<T>>) -> Self {
        Self {
            nodes,
            index: OnceLock::new(),
        }
    }

    pub fn nodes(&self) -> &[HotspotNode<T>] {
        &self.nodes
    }

    pub fn into_nodes(self) -> Vec<HotspotNode<T>> {
        self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// The ball tree over node positions, built with the default leaf size
    /// on first use.
    pub fn index(&self) -> &BallTree<T> {
        self.build_index(DEFAULT_LEAF_SIZE)
    }

    /// Builds the index with `leaf_size` unless one already exists.
    pub fn build_index(&self, leaf_size: NonZeroUsize) -> &BallTree<T> {
        self.index.get_or_init(|| {
            BallTree::new(self.nodes.iter().map(|n| n.position).collect(), leaf_size)
        })
    }

    pub fn has_index(&self) -> bool {
        self.index.get().is_some()
    }
}

impl<T: Scalar> PartialEq for HotspotMap<T> {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
    }
}

impl<T: Scalar> FromIterator<HotspotNode<T>> for HotspotMap<T> {
    fn from_iter<I: IntoIterator<Item = HotspotNode<T>>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

/// Reads a headered CSV, checking the header field-for-field, and hands each
/// data row with its 1-based line number to `row`.
pub(crate) fn read_csv<R: Read>(
    reader: R,
    header: &[&str],
    mut row: impl FnMut(u64, &csv::StringRecord) -> Result<()>,
) -> Result<()> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let expected = header.join(",");
    match records.next() {
        None => {
            return Err(Error::Header {
                expected,
                found: String::new(),
            })
        }
        Some(first) => {
            let first = first?;
            if first.iter().ne(header.iter().copied()) {
                return Err(Error::Header {
                    expected,
                    found: first.iter().collect::<Vec<_>>().join(","),
                });
            }
        }
    }
    for rec in records {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        row(line, &rec)?;
    }
    Ok(())
}

pub(crate) fn parse_field<F: FromStr>(line: u64, name: &str, raw: &str) -> Result<F> {
    raw.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {name} `{raw}`"),
    })
}

/// Parses and range-checks a latitude/longitude pair from CSV text.
pub(crate) fn parse_position<T: Scalar>(line: u64, lat: &str, lon: &str) -> Result<GeoPoint<T>> {
    let lat: f64 = parse_field(line, "latitude", lat)?;
    let lon: f64 = parse_field(line, "longitude", lon)?;
    let bad = |message: String| Error::Parse { line, message };
    if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
        return Err(bad(format!("latitude {lat} outside [-90, 90]")));
    }
    if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
        return Err(bad(format!("longitude {lon} outside [-180, 180]")));
    }
    GeoPoint::new(T::lit(lat), T::lit(lon)).map_err(|e| bad(e.to_string()))
}

fn record_order<T>(a: &DetectionRecord<T>, b: &DetectionRecord<T>) -> Ordering {
    a.clip_id
        .cmp(&b.clip_id)
        .then(a.timestamp_ms.cmp(&b.timestamp_ms))
}

/// Parses a training CSV. The result is sorted by clip, then timestamp.
pub fn parse_detection_log<T: Scalar, R: Read>(reader: R) -> Result<Vec<DetectionRecord<T>>> {
    let mut out = Vec::new();
    read_csv(reader, &TRAINING_HEADER, |line, rec| {
        let timestamp_ms = parse_field(line, "timestamp", &rec[0])?;
        let position = parse_position(line, &rec[1], &rec[2])?;
        let raw_count: i64 = parse_field(line, "pedestrian_count", &rec[3])?;
        let pedestrian_count = u32::try_from(raw_count).map_err(|_| Error::Parse {
            line,
            message: format!("pedestrian_count {raw_count} is not a non-negative 32-bit integer"),
        })?;
        out.push(DetectionRecord {
            timestamp_ms,
            position,
            pedestrian_count,
            clip_id: rec[4].to_string(),
        });
        Ok(())
    })?;
    out.sort_by(record_order);
    Ok(out)
}

/// Bins records into per-clip, wall-clock-aligned one-second intervals.
/// Expects records sorted by clip, then timestamp.
pub fn split_intervals<T: Scalar>(records: &[DetectionRecord<T>]) -> Vec<Interval<T>> {
    let mut out: Vec<Interval<T>> = Vec::new();
    for rec in records {
        let index = rec.timestamp_ms.div_euclid(INTERVAL_MS);
        match out.last_mut() {
            Some(iv) if iv.index == index && iv.clip_id == rec.clip_id => {
                iv.fixes.push(rec.position);
                iv.counts.push(rec.pedestrian_count);
            }
            _ => out.push(Interval {
                clip_id: rec.clip_id.clone(),
                index,
                start_ms: index * INTERVAL_MS,
                end_ms: (index + 1) * INTERVAL_MS,
                fixes: vec![rec.position],
                counts: vec![rec.pedestrian_count],
            }),
        }
    }
    out
}

fn median<T: Scalar>(mut values: Vec<T>) -> T {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / T::lit(2.0)
    }
}

/// Collapses an interval into a hotspot node at the component-wise median
/// position. Returns `None` when no pedestrian was seen.
pub fn aggregate_interval<T: Scalar>(iv: &Interval<T>, mode: CountMode) -> Option<HotspotNode<T>> {
    if iv.fixes.is_empty() {
        return None;
    }
    let count = match mode {
        CountMode::Max => iv.counts.iter().copied().max().unwrap_or(0),
        CountMode::Sum => iv.counts.iter().fold(0u32, |acc, &c| acc.saturating_add(c)),
    };
    if count == 0 {
        return None;
    }
    let lat = median(iv.fixes.iter().map(|p| p.lat()).collect());
    let lon = median(iv.fixes.iter().map(|p| p.lon()).collect());
    Some(HotspotNode {
        position: GeoPoint::from_raw(lat, lon),
        count,
        timestamp_ms: iv.start_ms,
        clip_id: iv.clip_id.clone(),
    })
}

/// Aggregates every interval with at least one pedestrian. Nodes come out
/// ordered by clip, then interval start.
pub fn build_map<T: Scalar>(records: &[DetectionRecord<T>], mode: CountMode) -> HotspotMap<T> {
    let mut sorted = records.to_vec();
    sorted.sort_by(record_order);
    split_intervals(&sorted)
        .iter()
        .filter_map(|iv| aggregate_interval(iv, mode))
        .collect()
}

/// Multiset union of two maps. Nodes of `a` come first; nothing is
/// deduplicated.
pub fn merge_maps<T: Scalar>(a: &HotspotMap<T>, b: &HotspotMap<T>) -> HotspotMap<T> {
    a.nodes.iter().chain(b.nodes.iter()).cloned().collect()
}

//! File formats: the JSON map file, GeoJSON export, JSONL advisory
//! timelines and ground-truth JSON.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::advisory::AdvisoryTimeline;
use crate::error::{Error, Result};
use crate::evaluation::GroundTruthWindow;
use crate::geodesy::GeoPoint;
use crate::ingest::{HotspotMap, HotspotNode};
use crate::scalar::Scalar;

pub const MAP_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct MapFile {
    schema_version: u32,
    nodes: Vec<MapFileNode>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MapFileNode {
    lat: f64,
    lon: f64,
    count: u32,
    timestamp_ms: i64,
    clip_id: String,
}

fn node_from_parts<T: Scalar>(lat: f64, lon: f64, count: u32, timestamp_ms: i64, clip_id: String) -> Result<HotspotNode<T>> {
    if count == 0 {
        return Err(Error::InvalidMap(format!("node from clip `{clip_id}` has zero count")));
    }
    let position = GeoPoint::new(T::lit(lat), T::lit(lon)).map_err(|e| Error::InvalidMap(e.to_string()))?;
    Ok(HotspotNode {
        position,
        count,
        timestamp_ms,
        clip_id,
    })
}

pub fn write_map<T: Scalar, W: Write>(map: &HotspotMap<T>, mut out: W) -> Result<()> {
    let file = MapFile {
        schema_version: MAP_SCHEMA_VERSION,
        nodes: map
            .nodes()
            .iter()
            .map(|n| MapFileNode {
                lat: n.position.lat().as_f64(),
                lon: n.position.lon().as_f64(),
                count: n.count,
                timestamp_ms: n.timestamp_ms,
                clip_id: n.clip_id.clone(),
            })
            .collect(),
    };
    serde_json::to_writer_pretty(&mut out, &file)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_map<T: Scalar, R: Read>(input: R) -> Result<HotspotMap<T>> {
    let file: MapFile = serde_json::from_reader(input)?;
    if file.schema_version != MAP_SCHEMA_VERSION {
        return Err(Error::SchemaVersion(file.schema_version));
    }
    file.nodes
        .into_iter()
        .map(|n| node_from_parts(n.lat, n.lon, n.count, n.timestamp_ms, n.clip_id))
        .collect::<Result<Vec<_>>>()
        .map(HotspotMap::new)
}

#[derive(Debug, Serialize, Deserialize)]
struct FeatureCollection {
    #[serde(rename = "type")]
    kind: String,
    features: Vec<Feature>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Feature {
    #[serde(rename = "type")]
    kind: String,
    geometry: PointGeometry,
    properties: FeatureProperties,
}

#[derive(Debug, Serialize, Deserialize)]
struct PointGeometry {
    #[serde(rename = "type")]
    kind: String,
    /// `[lon, lat]`
    coordinates: [f64; 2],
}

#[derive(Debug, Serialize, Deserialize)]
struct FeatureProperties {
    count: u32,
    timestamp_ms: i64,
    clip_id: String,
}

/// Writes every node as a GeoJSON Point feature.
pub fn write_geojson<T: Scalar, W: Write>(map: &HotspotMap<T>, mut out: W) -> Result<()> {
    let collection = FeatureCollection {
        kind: "FeatureCollection".into(),
        features: map
            .nodes()
            .iter()
            .map(|n| Feature {
                kind: "Feature".into(),
                geometry: PointGeometry {
                    kind: "Point".into(),
                    coordinates: [n.position.lon().as_f64(), n.position.lat().as_f64()],
                },
                properties: FeatureProperties {
                    count: n.count,
                    timestamp_ms: n.timestamp_ms,
                    clip_id: n.clip_id.clone(),
                },
            })
            .collect(),
    };
    serde_json::to_writer_pretty(&mut out, &collection)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Reads a map back from the GeoJSON written by [`write_geojson`].
pub fn read_geojson<T: Scalar, R: Read>(input: R) -> Result<HotspotMap<T>> {
    let collection: FeatureCollection = serde_json::from_reader(input)?;
    if collection.kind != "FeatureCollection" {
        return Err(Error::InvalidMap(format!("expected FeatureCollection, found {}", collection.kind)));
    }
    collection
        .features
        .into_iter()
        .map(|f| {
            if f.geometry.kind != "Point" {
                return Err(Error::InvalidMap(format!("expected Point geometry, found {}", f.geometry.kind)));
            }
            let [lon, lat] = f.geometry.coordinates;
            let p = f.properties;
            node_from_parts(lat, lon, p.count, p.timestamp_ms, p.clip_id)
        })
        .collect::<Result<Vec<_>>>()
        .map(HotspotMap::new)
}

#[derive(Debug, Serialize)]
struct TimelineLine {
    arc_m: f64,
    lat: f64,
    lon: f64,
    speed_kmh: f64,
    heading_deg: f64,
    stopping_distance_m: f64,
    active: bool,
    nearest_front_m: Option<f64>,
    nearest_front_sep_deg: Option<f64>,
}

/// One JSON object per checkpoint decision.
pub fn write_timeline_jsonl<T: Scalar, W: Write>(timeline: &AdvisoryTimeline<T>, mut out: W) -> Result<()> {
    for d in &timeline.decisions {
        let cp = &d.checkpoint;
        let line = TimelineLine {
            arc_m: cp.arc_position.as_f64(),
            lat: cp.position.lat().as_f64(),
            lon: cp.position.lon().as_f64(),
            speed_kmh: cp.speed_kmh.as_f64(),
            heading_deg: cp.heading.degrees().as_f64(),
            stopping_distance_m: d.stopping_distance.as_f64(),
            active: d.active,
            nearest_front_m: d.nearest_front_distance.map(Scalar::as_f64),
            nearest_front_sep_deg: d.nearest_front_heading_sep.map(Scalar::as_f64),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a ground-truth array of `{clip_id, start_m, end_m, label}`.
pub fn read_ground_truth<T: Scalar, R: Read>(input: R) -> Result<Vec<GroundTruthWindow<T>>> {
    let raw: Vec<GroundTruthWindow<f64>> = serde_json::from_reader(input)?;
    Ok(raw
        .into_iter()
        .map(|w| GroundTruthWindow {
            clip_id: w.clip_id,
            start_m: T::lit(w.start_m),
            end_m: T::lit(w.end_m),
            label: w.label,
        })
        .collect())
}

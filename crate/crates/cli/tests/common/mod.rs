#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pedmap::synthetic::Route;
use pedmap::{DetectionRecord, DriveTrace, GeoPoint, GroundTruthWindow};

pub fn origin() -> GeoPoint {
    GeoPoint::new(32.8801, -117.2340).unwrap()
}

pub fn pedmap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pedmap"))
        .args(args)
        .output()
        .expect("run pedmap")
}

pub fn training_csv(records: &[DetectionRecord]) -> String {
    let mut s = String::from("timestamp,latitude,longitude,pedestrian_count,clip_id\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.timestamp_ms,
            r.position.lat(),
            r.position.lon(),
            r.pedestrian_count,
            r.clip_id
        );
    }
    s
}

pub fn trace_csv(trace: &DriveTrace) -> String {
    let mut s = String::from("timestamp,latitude,longitude,clip_id\n");
    for f in trace.fixes() {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            f.timestamp_ms,
            f.position.lat(),
            f.position.lon(),
            trace.clip_id()
        );
    }
    s
}

pub fn ground_truth_json(windows: &[GroundTruthWindow]) -> String {
    let items: Vec<String> = windows
        .iter()
        .map(|w| {
            format!(
                r#"{{"clip_id": "{}", "start_m": {}, "end_m": {}, "label": "{}"}}"#,
                w.clip_id, w.start_m, w.end_m, w.label
            )
        })
        .collect();
    format!("[{}]\n", items.join(",\n"))
}

/// Files for a straight northbound road with one crossing hotspot at
/// 120 m: a training log, a 50 km/h test drive and its ground truth.
pub struct SingleHotspot {
    pub dir: tempfile::TempDir,
    pub training: PathBuf,
    pub trace: PathBuf,
    pub ground_truth: PathBuf,
}

impl SingleHotspot {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let route = Route::straight(origin(), 0.0, 220.0);
        let log = route.training_log("train", 30.0, 10.0, 0, |arc| u32::from((119.0..121.5).contains(&arc)));
        let trace = route.drive("test", 50.0, 10.0, 0).unwrap();
        let windows = [GroundTruthWindow {
            clip_id: "test".into(),
            start_m: 110.0,
            end_m: 130.0,
            label: "crossing".into(),
        }];
        let training = write(dir.path(), "train.csv", &training_csv(&log));
        let trace = write(dir.path(), "test.csv", &trace_csv(&trace));
        let ground_truth = write(dir.path(), "truth.json", &ground_truth_json(&windows));
        Self {
            dir,
            training,
            trace,
            ground_truth,
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

pub fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

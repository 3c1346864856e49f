//! Scoring replayed advisories against hand-labelled pedestrian windows.
//!
//! Each maximal run of active checkpoints is one advisory. An advisory is
//! correct when one of its checkpoints lies within a window widened by the
//! onset margin on both sides, and false otherwise. A window that no
//! advisory reaches is missed.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::advisory::{run_replay, AdvisoryConfig, AdvisoryTimeline, DriveTrace};
use crate::error::{Error, Result};
use crate::ingest::HotspotMap;
use crate::scalar::Scalar;

/// Onset credit, in meters, used when none is given.
pub const DEFAULT_ONSET_MARGIN_M: f64 = 2.0;

/// Stretch of a test trace, in arc meters, where pedestrians were present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthWindow<T = f64> {
    pub clip_id: String,
    pub start_m: T,
    pub end_m: T,
    #[serde(default)]
    pub label: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalCounts {
    pub correct: usize,
    pub false_advisories: usize,
    pub missed: usize,
}

impl EvalCounts {
    pub fn precision(&self) -> Option<f64> {
        precision(self)
    }

    pub fn recall(&self) -> Option<f64> {
        recall(self)
    }
}

/// correct / (correct + false); `None` when no advisory was issued.
pub fn precision(c: &EvalCounts) -> Option<f64> {
    let denom = c.correct + c.false_advisories;
    (denom > 0).then(|| c.correct as f64 / denom as f64)
}

/// correct / (correct + missed); `None` when there was nothing to find.
pub fn recall(c: &EvalCounts) -> Option<f64> {
    let denom = c.correct + c.missed;
    (denom > 0).then(|| c.correct as f64 / denom as f64)
}

/// Checks that windows have `0 <= start < end` and, within each clip, are
/// sorted and non-overlapping.
pub fn validate_windows<T: Scalar>(windows: &[GroundTruthWindow<T>]) -> Result<()> {
    for (i, w) in windows.iter().enumerate() {
        if !(w.start_m.is_finite() && w.end_m.is_finite()) || w.start_m < T::zero() || w.start_m >= w.end_m {
            return Err(Error::InvalidGroundTruth(format!(
                "window {i} ({}): need 0 <= start_m < end_m, got [{}, {}]",
                w.clip_id, w.start_m, w.end_m
            )));
        }
        if let Some(prev) = windows[..i].iter().rev().find(|p| p.clip_id == w.clip_id) {
            if prev.end_m > w.start_m {
                return Err(Error::InvalidGroundTruth(format!(
                    "window {i} ({}): overlaps or precedes the previous window of the clip",
                    w.clip_id
                )));
            }
        }
    }
    Ok(())
}

/// Keeps only the windows for `clip_id`, failing if none exist.
pub fn windows_for_clip<T: Scalar>(
    windows: &[GroundTruthWindow<T>],
    clip_id: &str,
) -> Result<Vec<GroundTruthWindow<T>>> {
    let own: Vec<_> = windows.iter().filter(|w| w.clip_id == clip_id).cloned().collect();
    if own.is_empty() {
        let window = windows.first().map_or_else(|| "<none>".to_string(), |w| w.clip_id.clone());
        return Err(Error::ClipMismatch {
            timeline: clip_id.to_string(),
            window,
        });
    }
    Ok(own)
}

fn reaches<T: Scalar>(arc: T, w: &GroundTruthWindow<T>, margin: T) -> bool {
    arc >= w.start_m - margin && arc <= w.end_m + margin
}

/// Counts correct, false and missed advisories for one clip.
pub fn match_advisories<T: Scalar>(
    timeline: &AdvisoryTimeline<T>,
    windows: &[GroundTruthWindow<T>],
    onset_margin: T,
) -> Result<EvalCounts> {
    if let Some(w) = windows.iter().find(|w| w.clip_id != timeline.clip_id) {
        return Err(Error::ClipMismatch {
            timeline: timeline.clip_id.clone(),
            window: w.clip_id.clone(),
        });
    }
    if !(onset_margin >= T::zero()) {
        return Err(Error::InvalidGroundTruth("onset margin must be non-negative".into()));
    }
    validate_windows(windows)?;

    let mut counts = EvalCounts::default();
    let mut matched = BTreeSet::new();
    for run in timeline.active_runs() {
        let mut hit = false;
        for (wi, w) in windows.iter().enumerate() {
            if run.iter().any(|d| reaches(d.checkpoint.arc_position, w, onset_margin)) {
                matched.insert(wi);
                hit = true;
            }
        }
        if hit {
            counts.correct += 1;
        } else {
            counts.false_advisories += 1;
        }
    }
    counts.missed = windows.len() - matched.len();
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow<T = f64> {
    pub sampling_distance: T,
    pub counts: EvalCounts,
}

impl<T> EvalRow<T> {
    pub fn precision(&self) -> Option<f64> {
        precision(&self.counts)
    }

    pub fn recall(&self) -> Option<f64> {
        recall(&self.counts)
    }
}

/// Precision and recall per sampling distance for one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport<T = f64> {
    pub clip_id: String,
    pub rows: Vec<EvalRow<T>>,
}

pub const TSV_HEADER: &str = "K_m\tprecision\trecall\tcorrect\tfalse\tmissed";

/// Marker for a ratio whose denominator is zero.
pub const UNDEFINED: &str = "—";

impl<T: Scalar> EvalReport<T> {
    /// Tab-separated rows; an undefined ratio prints as [`UNDEFINED`].
    pub fn to_tsv(&self) -> String {
        let ratio = |r: Option<f64>| r.map_or_else(|| UNDEFINED.to_string(), |v| format!("{v:.4}"));
        let mut out = String::from(TSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let c = row.counts;
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                row.sampling_distance,
                ratio(row.precision()),
                ratio(row.recall()),
                c.correct,
                c.false_advisories,
                c.missed
            );
        }
        out
    }

    /// Three-column table of sampling distance, precision and recall. An
    /// undefined ratio prints as 0 with the undefined marker beside it.
    pub fn to_markdown(&self) -> String {
        let ratio = |r: Option<f64>| r.map_or_else(|| format!("0 ({UNDEFINED})"), |v| format!("{v:.2}"));
        let mut out = format!("Precision and Recall by Sampling Distance: {}\n\n", self.clip_id);
        out.push_str("| Sampling Distance (m) | Precision | Recall |\n");
        out.push_str("|---|---|---|\n");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "| {} | {} | {} |",
                row.sampling_distance,
                ratio(row.precision()),
                ratio(row.recall())
            );
        }
        out
    }
}

/// Replays `trace` once per sampling distance and scores each replay.
/// Rows come out in ascending `K`, duplicates removed.
pub fn sweep_sampling_distance<T: Scalar>(
    trace: &DriveTrace<T>,
    map: &HotspotMap<T>,
    cfg: &AdvisoryConfig<T>,
    sampling_distances: &[T],
    windows: &[GroundTruthWindow<T>],
    onset_margin: T,
) -> Result<EvalReport<T>> {
    if sampling_distances.is_empty() {
        return Err(Error::InvalidSweep("no sampling distances given".into()));
    }
    if let Some(k) = sampling_distances.iter().find(|k| !(**k > T::zero() && k.is_finite())) {
        return Err(Error::InvalidSweep(format!("sampling distance {k} is not positive")));
    }
    let mut ks = sampling_distances.to_vec();
    ks.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    ks.dedup();

    // build once before the parallel replays share it
    map.index();
    let rows = ks
        .par_iter()
        .map(|&k| {
            let cfg = AdvisoryConfig {
                sampling_distance: k,
                ..*cfg
            };
            let timeline = run_replay(trace, map, &cfg)?;
            Ok(EvalRow {
                sampling_distance: k,
                counts: match_advisories(&timeline, windows, onset_margin)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        clip_id: trace.clip_id().to_string(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::advisory::{AdvisoryDecision, Checkpoint};
    use crate::geodesy::{GeoPoint, Heading};

    fn window(start: f64, end: f64) -> GroundTruthWindow {
        GroundTruthWindow {
            clip_id: "c".into(),
            start_m: start,
            end_m: end,
            label: String::new(),
        }
    }

    /// Timeline on a 2 m grid whose active checkpoints are `active` (indices).
    fn timeline(len: usize, active: &[usize]) -> AdvisoryTimeline {
        let decisions = (0..len)
            .map(|i| AdvisoryDecision {
                checkpoint: Checkpoint {
                    arc_position: 2.0 * i as f64,
                    position: GeoPoint::new(0.0, 0.0).unwrap(),
                    heading: Heading::from_degrees(0.0).unwrap(),
                    speed_kmh: 30.0,
                    timestamp_ms: 0,
                },
                active: active.contains(&i),
                stopping_distance: 10.0,
                nearest_front_distance: None,
                nearest_front_heading_sep: None,
                nearest_front_node: None,
            })
            .collect();
        AdvisoryTimeline {
            clip_id: "c".into(),
            sampling_distance: 2.0,
            decisions,
        }
    }

    #[test]
    fn span_inside_window() {
        let c = match_advisories(&timeline(20, &[5, 6, 7]), &[window(8.0, 16.0)], 2.0).unwrap();
        assert_eq!((c.correct, c.false_advisories, c.missed), (1, 0, 0));
    }

    #[test]
    fn span_outside_window() {
        let c = match_advisories(&timeline(40, &[2, 3]), &[window(50.0, 60.0)], 2.0).unwrap();
        assert_eq!((c.correct, c.false_advisories, c.missed), (0, 1, 1));
    }

    #[test]
    fn three_hits_one_false_one_miss() {
        // spans at 4-6, 20-22, 40, 60-62; windows 0-8, 18-24, 38-44, 80-90
        let t = timeline(50, &[2, 3, 10, 11, 20, 30, 31]);
        let ws = [window(0.0, 8.0), window(18.0, 24.0), window(38.0, 44.0), window(80.0, 90.0)];
        let c = match_advisories(&t, &ws, 2.0).unwrap();
        assert_eq!((c.correct, c.false_advisories, c.missed), (3, 1, 1));
        assert_eq!(c.precision(), Some(0.75));
        assert_eq!(c.recall(), Some(0.75));
    }

    #[test]
    fn onset_margin_credits_early_advisory() {
        // advisory ends at 10 m, window starts at 11 m
        let t = timeline(20, &[3, 4, 5]);
        let strict = match_advisories(&t, &[window(11.0, 20.0)], 0.0).unwrap();
        assert_eq!(strict.correct, 0);
        let lenient = match_advisories(&t, &[window(11.0, 20.0)], 2.0).unwrap();
        assert_eq!(lenient.correct, 1);
    }

    #[test]
    fn one_advisory_covering_two_windows() {
        let t = timeline(20, &[1, 2, 3, 4, 5, 6, 7]);
        let c = match_advisories(&t, &[window(2.0, 4.0), window(10.0, 12.0)], 0.0).unwrap();
        assert_eq!((c.correct, c.false_advisories, c.missed), (1, 0, 0));
    }

    #[test]
    fn clip_mismatch_is_an_error() {
        let mut w = window(0.0, 1.0);
        w.clip_id = "other".into();
        assert!(matches!(
            match_advisories(&timeline(3, &[]), &[w.clone()], 2.0),
            Err(Error::ClipMismatch { .. })
        ));
        assert!(windows_for_clip(&[w], "c").is_err());
    }

    #[test]
    fn invalid_windows() {
        assert!(validate_windows(&[window(-1.0, 2.0)]).is_err());
        assert!(validate_windows(&[window(3.0, 3.0)]).is_err());
        assert!(validate_windows(&[window(5.0, 9.0), window(8.0, 12.0)]).is_err());
        assert!(validate_windows(&[window(5.0, 9.0), window(1.0, 2.0)]).is_err());
        assert!(validate_windows(&[window(1.0, 2.0), window(2.0, 3.0)]).is_ok());
    }

    #[test]
    fn ratio_examples() {
        let c = |correct, false_advisories, missed| EvalCounts { correct, false_advisories, missed };
        assert_eq!(precision(&c(3, 1, 1)), Some(0.75));
        assert_eq!(recall(&c(3, 1, 1)), Some(0.75));
        assert_eq!(precision(&c(0, 0, 4)), None);
        assert_eq!(recall(&c(0, 0, 4)), Some(0.0));
        assert_eq!(precision(&c(0, 3, 2)), Some(0.0));
        assert_eq!(recall(&c(0, 3, 2)), Some(0.0));
        assert_eq!(recall(&c(0, 0, 0)), None);
    }

    #[test]
    fn report_rendering() {
        let report = EvalReport {
            clip_id: "c".into(),
            rows: vec![
                EvalRow { sampling_distance: 2.0, counts: EvalCounts { correct: 3, false_advisories: 1, missed: 1 } },
                EvalRow { sampling_distance: 5.0, counts: EvalCounts { correct: 0, false_advisories: 0, missed: 2 } },
            ],
        };
        assert_eq!(
            report.to_tsv(),
            "K_m\tprecision\trecall\tcorrect\tfalse\tmissed\n2\t0.7500\t0.7500\t3\t1\t1\n5\t—\t0.0000\t0\t0\t2\n"
        );
        let md = report.to_markdown();
        assert!(md.contains("| 2 | 0.75 | 0.75 |"));
        assert!(md.contains("| 5 | 0 (—) | 0.00 |"));
    }
}

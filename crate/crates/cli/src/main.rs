use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pedmap::evaluation::{windows_for_clip, DEFAULT_ONSET_MARGIN_M};
use pedmap::{io as formats, AdvisoryConfig, CountMode, DriveTrace, EvalReport, HotspotMap, TransitionKind};

#[derive(Parser)]
#[command(name = "pedmap", version, about = "Pedestrian hotspot maps and driver advisories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a hotspot map from training CSVs.
    Build {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value = "max")]
        count_mode: CountMode,
    },
    /// Concatenate map files.
    Merge {
        #[arg(required = true)]
        maps: Vec<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Replay a test drive and write the advisory timeline as JSONL.
    Replay {
        #[command(flatten)]
        input: DriveInput,
        /// Output file; stdout when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[command(flatten)]
        advisory: AdvisoryArgs,
    },
    /// Score one replay against ground truth.
    Eval {
        #[command(flatten)]
        input: DriveInput,
        #[command(flatten)]
        scoring: ScoringArgs,
        #[command(flatten)]
        advisory: AdvisoryArgs,
    },
    /// Score replays over several sampling distances.
    Sweep {
        #[command(flatten)]
        input: DriveInput,
        /// Sampling distances in meters.
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
        ks: Vec<f64>,
        #[command(flatten)]
        scoring: ScoringArgs,
        #[command(flatten)]
        advisory: AdvisoryArgs,
    },
    /// Export a map as a GeoJSON FeatureCollection.
    Export {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DriveInput {
    #[arg(long)]
    map: PathBuf,
    /// Test-drive CSV.
    #[arg(long)]
    trace: PathBuf,
    /// Clip to replay when the trace file holds several.
    #[arg(long)]
    clip_id: Option<String>,
}

#[derive(Args)]
struct ScoringArgs {
    /// Ground-truth windows (JSON).
    #[arg(long)]
    ground_truth: PathBuf,
    /// Meters of credit on each side of a window.
    #[arg(long, default_value_t = DEFAULT_ONSET_MARGIN_M)]
    onset_margin: f64,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Tsv,
    Markdown,
}

#[derive(Args)]
struct AdvisoryArgs {
    /// Seconds.
    #[arg(long, default_value_t = 2.5, allow_negative_numbers = true)]
    reaction_time: f64,
    #[arg(long, default_value_t = 0.7, allow_negative_numbers = true)]
    friction: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    grade: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    safety_factor: f64,
    /// Meters between checkpoints.
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    sampling_distance: f64,
    /// Degrees.
    #[arg(long, default_value_t = 90.0, allow_negative_numbers = true)]
    heading_threshold: f64,
    #[arg(long, default_value_t = 1)]
    min_count: u32,
}

impl AdvisoryArgs {
    fn config(&self) -> Result<AdvisoryConfig> {
        let cfg = AdvisoryConfig {
            reaction_time: self.reaction_time,
            friction: self.friction,
            grade: self.grade,
            safety_factor: self.safety_factor,
            sampling_distance: self.sampling_distance,
            heading_threshold: self.heading_threshold,
            min_count: self.min_count,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
    ))
}

/// Renders everything in memory first so a failure leaves no output file.
fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => {
            let mut f = BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?);
            f.write_all(bytes)?;
            f.flush()?;
        }
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn read_map(path: &Path) -> Result<HotspotMap> {
    formats::read_map(open(path)?).with_context(|| format!("reading map {}", path.display()))
}

fn read_trace(input: &DriveInput) -> Result<DriveTrace> {
    let traces: Vec<DriveTrace> = pedmap::parse_drive_log(open(&input.trace)?)
        .with_context(|| format!("reading trace {}", input.trace.display()))?;
    match &input.clip_id {
        Some(id) => traces
            .into_iter()
            .find(|t| t.clip_id() == id)
            .with_context(|| format!("clip `{id}` not found in {}", input.trace.display())),
        None => match <[DriveTrace; 1]>::try_from(traces) {
            Ok([t]) => Ok(t),
            Err(traces) => bail!(
                "{} holds {} clips; choose one with --clip-id",
                input.trace.display(),
                traces.len()
            ),
        },
    }
}

fn render(report: &EvalReport, format: Format) -> String {
    match format {
        Format::Tsv => report.to_tsv(),
        Format::Markdown => report.to_markdown(),
    }
}

fn score(input: &DriveInput, scoring: &ScoringArgs, cfg: &AdvisoryConfig, ks: &[f64]) -> Result<()> {
    let map = read_map(&input.map)?;
    let trace = read_trace(input)?;
    let windows = formats::read_ground_truth(open(&scoring.ground_truth)?)
        .with_context(|| format!("reading ground truth {}", scoring.ground_truth.display()))?;
    let windows = windows_for_clip(&windows, trace.clip_id())?;
    let report = pedmap::sweep_sampling_distance(&trace, &map, cfg, ks, &windows, scoring.onset_margin)?;
    write_output(None, render(&report, scoring.format).as_bytes())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Build { csv, out, count_mode } => {
            let mut map = HotspotMap::<f64>::default();
            for path in &csv {
                let records = pedmap::parse_detection_log(open(path)?)
                    .with_context(|| format!("parsing {}", path.display()))?;
                map = pedmap::merge_maps(&map, &pedmap::build_map(&records, count_mode));
            }
            let mut buf = Vec::new();
            formats::write_map(&map, &mut buf)?;
            write_output(Some(&out), &buf)?;
            println!("nodes: {}", map.len());
        }
        Command::Merge { maps, out } => {
            let mut merged = HotspotMap::<f64>::default();
            for path in &maps {
                merged = pedmap::merge_maps(&merged, &read_map(path)?);
            }
            let mut buf = Vec::new();
            formats::write_map(&merged, &mut buf)?;
            write_output(Some(&out), &buf)?;
            println!("nodes: {}", merged.len());
        }
        Command::Replay { input, out, advisory } => {
            let cfg = advisory.config()?;
            let map = read_map(&input.map)?;
            let trace = read_trace(&input)?;
            let timeline = pedmap::run_replay(&trace, &map, &cfg)?;
            let mut buf = Vec::new();
            formats::write_timeline_jsonl(&timeline, &mut buf)?;
            write_output(out.as_deref(), &buf)?;
            eprintln!("checkpoints: {}", timeline.decisions.len());
            for t in timeline.transitions() {
                let kind = match t.kind {
                    TransitionKind::On => "ON",
                    TransitionKind::Off => "OFF",
                };
                eprintln!("{kind} at {:.1} m ({:.7}, {:.7})", t.arc_position, t.position.lat(), t.position.lon());
            }
        }
        Command::Eval { input, scoring, advisory } => {
            let cfg = advisory.config()?;
            score(&input, &scoring, &cfg, &[cfg.sampling_distance])?;
        }
        Command::Sweep { input, ks, scoring, advisory } => {
            let cfg = advisory.config()?;
            score(&input, &scoring, &cfg, &ks)?;
        }
        Command::Export { map, out } => {
            let map = read_map(&map)?;
            let mut buf = Vec::new();
            formats::write_geojson(&map, &mut buf)?;
            write_output(out.as_deref(), &buf)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when some input failed validation or
//! processing, 2 for usage errors (bad flags, missing input roots, an
//! output location whose parent does not exist).

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::cascade::{
    fuse, Analysis, CascadeDecision, CascadeParams, DisagreementRecord, Granularity,
    ObjectDecision, ObjectNoise, RecordKind,
};
use crate::contour::ContourMode;
use crate::error::Error;
use crate::io::{
    list_videos, read_sequence, to_versioned_json, write_json, write_report, write_sequence,
    SequenceLayout,
};
use crate::manifest::{build_manifest, write_manifest};
use crate::mask::VideoPrediction;
use crate::metrics::{aggregate, score_video, EvalOptions};
use crate::synth::parse_scripts;

pub const THREADS_ENV: &str = "VOSCASCADE_THREADS";
pub const SUMMARY_FILE: &str = "fuse_summary.json";
pub const REPORT_SUFFIX: &str = ".report.json";
pub const MANIFEST_ERRORS_FILE: &str = "manifest_errors.json";

#[derive(Debug, Parser)]
#[command(
    name = "voscascade",
    version,
    about = "Cascaded selection between two video object segmentation streams",
    long_about = "Cascaded selection between two video object segmentation streams.\n\n\
        Stream A is the primary tracker (kept unless a rule fires); stream B is the \
        secondary one. Mask roots use the DAVIS/MOSE layout <root>/<video>/<frame>.png \
        with 8-bit indexed PNGs whose pixel values are object ids."
)]
pub struct Cli {
    /// Worker threads (defaults to VOSCASCADE_THREADS, then the CPU count).
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fuse two prediction roots into one, with a JSON report per video.
    Fuse(FuseArgs),
    /// Score a prediction root against ground truth (J, F, J&F).
    Evaluate(EvaluateArgs),
    /// Print disagreement records and the decision preview without fusing.
    Diagnose(DiagnoseArgs),
    /// Render ground truth and two failing prediction streams from a script.
    Synth(SynthArgs),
    /// Build a training manifest from annotated and pseudo-labelled roots.
    Manifest(ManifestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GranularityArg {
    Video,
    Object,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ContoursArg {
    WithHoles,
    ExternalOnly,
}

#[derive(Debug, Args)]
pub struct CascadeArgs {
    /// Masks with IoU at or below this disagree.
    #[arg(long, default_value_t = 0.1)]
    pub iou_threshold: f64,
    /// Miss-tracking fires when more frames than this are missed.
    #[arg(long = "miss-frames", default_value_t = 10)]
    pub miss_frames: u32,
    /// Wrong-tracking fires when more frames than this disagree.
    #[arg(long = "wrong-frames", default_value_t = 10)]
    pub wrong_frames: u32,
    /// A mask with more contours than this is high-noise.
    #[arg(long = "noise-contours", default_value_t = 6)]
    pub noise_contours: u32,
    /// Smallest foreground area that counts as a valid mask.
    #[arg(long, default_value_t = 1)]
    pub min_pixels: u64,
    #[arg(long, value_enum, default_value_t = GranularityArg::Video)]
    pub granularity: GranularityArg,
    /// Whether hole borders count as contours.
    #[arg(long, value_enum, default_value_t = ContoursArg::WithHoles)]
    pub contours: ContoursArg,
}

impl CascadeArgs {
    pub fn params(&self) -> CascadeParams {
        CascadeParams {
            iou_threshold: self.iou_threshold,
            miss_frame_threshold: self.miss_frames,
            wrong_frame_threshold: self.wrong_frames,
            contour_noise_threshold: self.noise_contours,
            min_pixels: self.min_pixels,
            granularity: match self.granularity {
                GranularityArg::Video => Granularity::Video,
                GranularityArg::Object => Granularity::Object,
            },
            contour_mode: match self.contours {
                ContoursArg::WithHoles => ContourMode::WithHoles,
                ContoursArg::ExternalOnly => ContourMode::ExternalOnly,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Root of the primary stream.
    #[arg(long)]
    pub pred_a: PathBuf,
    /// Root of the secondary stream.
    #[arg(long)]
    pub pred_b: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Only process this video.
    #[arg(long)]
    pub video: Option<String>,
    #[command(flatten)]
    pub cascade: CascadeArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Also write the scores JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Boundary tolerance in pixels (default: ceil(0.008 * diagonal)).
    #[arg(long)]
    pub tolerance: Option<u32>,
    #[arg(long)]
    pub include_first_frame: bool,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub pred_a: PathBuf,
    #[arg(long)]
    pub pred_b: PathBuf,
    /// Only report this video.
    #[arg(long)]
    pub video: Option<String>,
    /// Also write the diagnosis JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub cascade: CascadeArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub script: PathBuf,
    /// Receives gt/, predA/ and predB/ mask roots.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ManifestArgs {
    #[arg(long)]
    pub annotated: PathBuf,
    #[arg(long)]
    pub pseudo: PathBuf,
    /// Manifest path; validation failures go to manifest_errors.json next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Invalid(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return 2;
        }
    };
    let result = pool.install(|| match &cli.command {
        Command::Fuse(a) => cmd_fuse(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Manifest(a) => cmd_manifest(a),
    });
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn require_dir(path: &Path, what: &str) -> CmdResult {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{what} {} is not a directory", path.display())))
    }
}

fn require_parent(path: &Path) -> CmdResult {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    require_dir(parent, "output parent")
}

fn require_params(params: &CascadeParams) -> CmdResult {
    params.validate().map_err(|e| Failure::Usage(e.to_string()))
}

/// Writes into a hidden sibling directory, then renames it into place.
fn write_atomically(video: &VideoPrediction, root: &Path, video_id: &str) -> crate::Result<()> {
    let tmp_id = format!(".{video_id}.partial");
    let tmp = root.join(&tmp_id);
    let _ = fs::remove_dir_all(&tmp);
    let result = write_sequence(video, &SequenceLayout::new(root, tmp_id)).and_then(|()| {
        let dst = root.join(video_id);
        let io_err = |source| Error::Write {
            path: dst.clone(),
            source,
        };
        if dst.exists() {
            fs::remove_dir_all(&dst).map_err(io_err)?;
        }
        fs::rename(&tmp, &dst).map_err(io_err)
    });
    if result.is_err() {
        let _ = fs::remove_dir_all(&tmp);
    }
    result
}

fn create_dir(path: &Path) -> CmdResult {
    fs::create_dir_all(path).map_err(|source| {
        Failure::from(Error::Write {
            path: path.to_path_buf(),
            source,
        })
    })
}

fn emit(json: &str, out: Option<&Path>) -> CmdResult {
    print!("{json}");
    if let Some(path) = out {
        fs::write(path, json).map_err(|source| {
            Failure::from(Error::Write {
                path: path.to_path_buf(),
                source,
            })
        })?;
    }
    Ok(())
}

fn select_videos(a: &Path, b: &Path, only: Option<&str>) -> Result<Vec<(String, bool, bool)>, Failure> {
    let ids_a: BTreeSet<String> = list_videos(a)?.into_iter().collect();
    let ids_b: BTreeSet<String> = list_videos(b)?.into_iter().collect();
    let mut all: Vec<(String, bool, bool)> = ids_a
        .union(&ids_b)
        .map(|v| (v.clone(), ids_a.contains(v), ids_b.contains(v)))
        .collect();
    if let Some(only) = only {
        all.retain(|(v, _, _)| v == only);
        if all.is_empty() {
            return Err(Failure::Invalid(format!("video {only} not found in either root")));
        }
    }
    Ok(all)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VideoStatus {
    Fused,
    OnlyA,
    OnlyB,
    Error,
}

#[derive(Debug, Clone, Serialize)]
struct FuseEntry {
    video_id: String,
    status: VideoStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    decision: Option<CascadeDecision>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct FuseSummary {
    parameters: CascadeParams,
    videos: Vec<FuseEntry>,
    errors: usize,
}

fn fuse_video(args: &FuseArgs, params: &CascadeParams, id: &str, in_a: bool, in_b: bool) -> FuseEntry {
    let outcome = (|| -> crate::Result<(VideoStatus, Option<CascadeDecision>)> {
        match (in_a, in_b) {
            (true, true) => {
                let a = read_sequence(&SequenceLayout::new(&args.pred_a, id))?;
                let b = read_sequence(&SequenceLayout::new(&args.pred_b, id))?;
                let (fused, report) = fuse(&a, &b, params)?;
                write_atomically(&fused, &args.out, id)?;
                write_report(&report, &args.out.join(format!("{id}{REPORT_SUFFIX}")))?;
                Ok((VideoStatus::Fused, Some(report.decision)))
            }
            (true, false) | (false, true) => {
                let (root, status) = if in_a {
                    (&args.pred_a, VideoStatus::OnlyA)
                } else {
                    (&args.pred_b, VideoStatus::OnlyB)
                };
                let v = read_sequence(&SequenceLayout::new(root, id))?;
                write_atomically(&v, &args.out, id)?;
                Ok((status, None))
            }
            (false, false) => unreachable!("video listed in neither root"),
        }
    })();
    match outcome {
        Ok((status, decision)) => FuseEntry {
            video_id: id.to_string(),
            status,
            decision,
            error: None,
        },
        Err(e) => FuseEntry {
            video_id: id.to_string(),
            status: VideoStatus::Error,
            decision: None,
            error: Some(e.to_string()),
        },
    }
}

fn cmd_fuse(args: &FuseArgs) -> CmdResult {
    let params = args.cascade.params();
    require_params(&params)?;
    require_dir(&args.pred_a, "stream A root")?;
    require_dir(&args.pred_b, "stream B root")?;
    require_parent(&args.out)?;
    let videos = select_videos(&args.pred_a, &args.pred_b, args.video.as_deref())?;
    create_dir(&args.out)?;

    let entries: Vec<FuseEntry> = videos
        .par_iter()
        .map(|(id, in_a, in_b)| fuse_video(args, &params, id, *in_a, *in_b))
        .collect();
    let errors: Vec<&FuseEntry> = entries.iter().filter(|e| e.status == VideoStatus::Error).collect();
    for e in &errors {
        eprintln!("{}: {}", e.video_id, e.error.as_deref().unwrap_or_default());
    }
    let n_errors = errors.len();
    for e in &entries {
        if let Some(d) = &e.decision {
            eprintln!("{}: stream {:?} ({:?})", e.video_id, d.source, d.reason);
        }
    }
    write_json(
        &FuseSummary {
            parameters: params,
            videos: entries,
            errors: n_errors,
        },
        &args.out.join(SUMMARY_FILE),
    )?;
    if n_errors > 0 {
        return Err(Failure::Invalid(format!("{n_errors} video(s) failed")));
    }
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> CmdResult {
    require_dir(&args.pred, "prediction root")?;
    require_dir(&args.gt, "ground-truth root")?;
    if let Some(out) = &args.out {
        require_parent(out)?;
    }
    let opts = EvalOptions {
        tolerance: args.tolerance,
        include_first_frame: args.include_first_frame,
        per_frame: false,
    };
    let videos = list_videos(&args.gt)?;
    if videos.is_empty() {
        return Err(Failure::Invalid(format!(
            "no videos under {}",
            args.gt.display()
        )));
    }
    let results: Vec<(String, crate::Result<_>)> = videos
        .par_iter()
        .map(|id| {
            let scored = (|| {
                let gt = read_sequence(&SequenceLayout::new(&args.gt, id))?;
                let pred = read_sequence(&SequenceLayout::new(&args.pred, id))?;
                score_video(&pred, &gt, &opts)
            })();
            (id.clone(), scored)
        })
        .collect();

    let mut scored = Vec::with_capacity(results.len());
    let mut errors = Vec::new();
    for (id, r) in results {
        match r {
            Ok(s) => scored.push((id, s)),
            Err(e) => errors.push(format!("{id}: {e}")),
        }
    }
    if !errors.is_empty() {
        for e in &errors {
            eprintln!("{e}");
        }
        return Err(Failure::Invalid(format!("{} video(s) could not be scored", errors.len())));
    }
    let scores = aggregate(&scored)?;
    eprintln!(
        "J {:.4}  F {:.4}  J&F {:.4}  ({} videos)",
        scores.global.j,
        scores.global.f,
        scores.global.jf,
        scored.len()
    );
    emit(&to_versioned_json(&scores), args.out.as_deref())
}

#[derive(Debug, Default, Serialize)]
struct KindCounts {
    agree: u32,
    miss_a: u32,
    miss_b: u32,
    wrong: u32,
}

#[derive(Debug, Serialize)]
struct VideoDiagnosis {
    video_id: String,
    decision: CascadeDecision,
    /// Record counts by kind (per frame and object, not collapsed).
    counts: KindCounts,
    object_noise: Vec<ObjectNoise>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    object_decisions: Vec<ObjectDecision>,
    records: Vec<DisagreementRecord>,
}

#[derive(Debug, Serialize)]
struct Diagnosis {
    parameters: CascadeParams,
    videos: Vec<VideoDiagnosis>,
    unpaired: Vec<String>,
}

fn diagnose_video(args: &DiagnoseArgs, params: &CascadeParams, id: &str) -> crate::Result<VideoDiagnosis> {
    let a = read_sequence(&SequenceLayout::new(&args.pred_a, id))?;
    let b = read_sequence(&SequenceLayout::new(&args.pred_b, id))?;
    let analysis = Analysis::run(&a, &b, params)?;
    let mut counts = KindCounts::default();
    for r in &analysis.records {
        match r.kind {
            RecordKind::Agree => counts.agree += 1,
            RecordKind::MissA => counts.miss_a += 1,
            RecordKind::MissB => counts.miss_b += 1,
            RecordKind::Wrong => counts.wrong += 1,
        }
    }
    let object_decisions = match params.granularity {
        Granularity::Video => Vec::new(),
        Granularity::Object => analysis.object_decisions(params),
    };
    Ok(VideoDiagnosis {
        video_id: id.to_string(),
        decision: analysis.decide(params),
        counts,
        object_noise: analysis.object_noise(params),
        object_decisions,
        records: analysis.records,
    })
}

fn cmd_diagnose(args: &DiagnoseArgs) -> CmdResult {
    let params = args.cascade.params();
    require_params(&params)?;
    require_dir(&args.pred_a, "stream A root")?;
    require_dir(&args.pred_b, "stream B root")?;
    if let Some(out) = &args.out {
        require_parent(out)?;
    }
    let videos = select_videos(&args.pred_a, &args.pred_b, args.video.as_deref())?;
    let unpaired: Vec<String> = videos
        .iter()
        .filter(|(_, a, b)| !(*a && *b))
        .map(|(v, _, _)| v.clone())
        .collect();
    let results: Vec<(String, crate::Result<VideoDiagnosis>)> = videos
        .par_iter()
        .filter(|(_, a, b)| *a && *b)
        .map(|(id, _, _)| (id.clone(), diagnose_video(args, &params, id)))
        .collect();

    let mut diagnosed = Vec::new();
    let mut errors = Vec::new();
    for (id, r) in results {
        match r {
            Ok(d) => {
                let dec = &d.decision;
                eprintln!(
                    "{id}: miss_a {} miss_b {} wrong {} noise {}/{} -> stream {:?} ({:?})",
                    dec.miss_count_a,
                    dec.miss_count_b,
                    dec.wrong_count,
                    dec.noise_frames_a,
                    dec.noise_frames_b,
                    dec.source,
                    dec.reason
                );
                diagnosed.push(d);
            }
            Err(e) => errors.push(format!("{id}: {e}")),
        }
    }
    for v in &unpaired {
        eprintln!("{v}: present in only one root");
    }
    if !errors.is_empty() {
        for e in &errors {
            eprintln!("{e}");
        }
        return Err(Failure::Invalid(format!("{} video(s) failed", errors.len())));
    }
    emit(
        &to_versioned_json(&Diagnosis {
            parameters: params,
            videos: diagnosed,
            unpaired,
        }),
        args.out.as_deref(),
    )
}

pub const SYNTH_DIRS: [&str; 3] = ["gt", "predA", "predB"];

fn cmd_synth(args: &SynthArgs) -> CmdResult {
    if !args.script.is_file() {
        return Err(Failure::Usage(format!(
            "script {} does not exist",
            args.script.display()
        )));
    }
    require_parent(&args.out)?;
    let text = fs::read_to_string(&args.script).map_err(|source| {
        Failure::from(Error::Read {
            path: args.script.clone(),
            source,
        })
    })?;
    let scripts = parse_scripts(&text, &args.script)?;
    let videos = scripts
        .par_iter()
        .map(|s| s.generate())
        .collect::<crate::Result<Vec<_>>>()?;

    for dir in SYNTH_DIRS {
        create_dir(&args.out.join(dir))?;
    }
    videos.par_iter().try_for_each(|v| -> crate::Result<()> {
        let id = v.gt.video_id();
        write_atomically(&v.gt, &args.out.join(SYNTH_DIRS[0]), id)?;
        write_atomically(&v.a, &args.out.join(SYNTH_DIRS[1]), id)?;
        write_atomically(&v.b, &args.out.join(SYNTH_DIRS[2]), id)
    })?;
    eprintln!("wrote {} video(s) under {}", videos.len(), args.out.display());
    Ok(())
}

fn cmd_manifest(args: &ManifestArgs) -> CmdResult {
    require_dir(&args.annotated, "annotated root")?;
    require_dir(&args.pseudo, "pseudo-label root")?;
    require_parent(&args.out)?;
    let build = build_manifest(&args.annotated, &args.pseudo)?;
    let errors_path = args
        .out
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .join(MANIFEST_ERRORS_FILE);
    write_manifest(&build, &args.out, &errors_path)?;
    for f in &build.failures {
        eprintln!("{} ({:?}): {}", f.video_id, f.source, f.error);
    }
    eprintln!(
        "{} sequence(s) in manifest, {} rejected",
        build.manifest.entries.len(),
        build.failures.len()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_cascade_defaults() {
        let cli = Cli::try_parse_from(["voscascade", "diagnose", "--pred-a", "a", "--pred-b", "b"])
            .unwrap();
        let Command::Diagnose(d) = cli.command else {
            panic!("wrong subcommand")
        };
        assert_eq!(d.cascade.params(), CascadeParams::default());
    }

    #[test]
    fn flags_override_params() {
        let cli = Cli::try_parse_from([
            "voscascade",
            "fuse",
            "--pred-a",
            "a",
            "--pred-b",
            "b",
            "--out",
            "o",
            "--iou-threshold",
            "0.2",
            "--miss-frames",
            "3",
            "--granularity",
            "object",
            "--contours",
            "external-only",
        ])
        .unwrap();
        let Command::Fuse(f) = cli.command else {
            panic!("wrong subcommand")
        };
        let p = f.cascade.params();
        assert_eq!(p.iou_threshold, 0.2);
        assert_eq!(p.miss_frame_threshold, 3);
        assert_eq!(p.granularity, Granularity::Object);
        assert_eq!(p.contour_mode, ContourMode::ExternalOnly);
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["voscascade", "frobnicate"]), 2);
        assert_eq!(run(["voscascade", "fuse", "--pred-a", "x"]), 2);
        assert_eq!(run(["voscascade", "--help"]), 0);
    }
}

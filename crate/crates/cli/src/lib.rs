//! Subcommands of the `rmot` binary.
//!
//! Exit codes are a stable contract: 0 success, 1 usage error, 2 data or
//! validation error (which also covers runtime failures such as a busy port).

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use rmot::annotator::{propagate, ClickPair};
use rmot::data_model::{
    compute_stats, load_annotation, load_annotation_dir, load_predictions, prediction_file_name, save_annotation,
    save_predictions, write_atomic, PredictionSet,
};
use rmot::hota::{evaluate_dataset, render_report, EvalConfig, ReferentGroundTruth, ReportFormat};
use rmot::lifecycle::{gt_detections, iou_associate, run, IouAssociatorConfig, OracleNoise, OracleScorer, TrackerConfig};
use rmot::refer_kitti::{load_refer_kitti, KittiOptions};
use rmot::synthetic::jitter_box;
use rmot::{AnnotateError, DataError, EvalError, TrackError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Annotate(#[from] AnnotateError),
    #[error(transparent)]
    Service(#[from] rmot_service::ServiceError),
    #[error("unmatched files:\n{}", .0.join("\n"))]
    Unmatched(Vec<String>),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rmot", version, about = "Referring multi-object tracking toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score prediction CSVs against referent ground truth.
    Eval(EvalArgs),
    /// Produce a prediction CSV for one expression.
    Track(TrackArgs),
    /// Apply one start/end click pair to an annotation file.
    Propagate(PropagateArgs),
    /// Dataset statistics per expression.
    Stats(StatsArgs),
    /// Run the labeling HTTP API over a directory of annotations.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of annotation JSON files.
    #[arg(long)]
    pub gt: PathBuf,
    /// Directory of `<sequence>_<expression>.csv` prediction files.
    #[arg(long)]
    pub pred: PathBuf,
    /// Report JSON path.
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated localization thresholds, each in (0, 1).
    #[arg(long, value_parser = parse_alpha_grid)]
    pub alpha_grid: Option<Vec<f64>>,
    /// Keep only rows with referring score at or above this value.
    #[arg(long)]
    pub ref_threshold: Option<f64>,
    /// Also print the summary row to standard output.
    #[arg(long)]
    pub table: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Query-based tracker fed with ground-truth scores.
    Oracle,
    /// Frame-to-frame IoU association of ground-truth referent boxes.
    Iou,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[arg(long)]
    pub ann: PathBuf,
    #[arg(long)]
    pub expression: u32,
    #[arg(long, value_enum)]
    pub method: Method,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = TrackerConfig::default().class_threshold)]
    pub class_threshold: f64,
    #[arg(long, default_value_t = TrackerConfig::default().ref_threshold)]
    pub ref_threshold: f64,
    #[arg(long, default_value_t = TrackerConfig::default().detect_slots)]
    pub detect_slots: usize,
    /// Frames a missed track is kept alive.
    #[arg(long, default_value_t = 0)]
    pub patience: u32,
    /// IoU needed to extend a track (iou method).
    #[arg(long, default_value_t = IouAssociatorConfig::default().iou_threshold)]
    pub iou_threshold: f64,
    /// Gaussian box jitter in pixels.
    #[arg(long, default_value_t = 0.0)]
    pub jitter: f64,
    /// Probability of flipping a referring score (oracle method).
    #[arg(long, default_value_t = 0.0)]
    pub flip: f64,
}

#[derive(Debug, Args)]
pub struct PropagateArgs {
    #[arg(long)]
    pub ann: PathBuf,
    #[arg(long)]
    pub expression: u32,
    #[arg(long)]
    pub object: u32,
    #[arg(long)]
    pub start: u32,
    #[arg(long)]
    pub end: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatsFormat {
    /// A directory of annotation JSON files.
    Json,
    /// A Refer-KITTI tree (KITTI tracking labels plus expression files).
    ReferKitti,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub ann: PathBuf,
    /// Stats JSON path; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = StatsFormat::Json)]
    pub format: StatsFormat,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub ann: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: String,
}

fn parse_alpha_grid(s: &str) -> Result<Vec<f64>, String> {
    let alphas = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
        return Err("every alpha must lie strictly between 0 and 1".into());
    }
    Ok(alphas)
}

/// Run a parsed command, writing human output to `stdout`.
pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Eval(a) => eval(a, stdout),
        Command::Track(a) => track(a),
        Command::Propagate(a) => propagate_cmd(a),
        Command::Stats(a) => stats(a, stdout),
        Command::Serve(a) => serve(a, stdout),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn eval(args: EvalArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut gts: BTreeMap<(String, u32), ReferentGroundTruth> = BTreeMap::new();
    for ann in load_annotation_dir(&args.gt)? {
        for gt in ReferentGroundTruth::all_from_annotation(&ann) {
            gts.insert((gt.sequence_id.clone(), gt.expression_id), gt);
        }
    }
    let mut preds: BTreeMap<(String, u32), PredictionSet> = BTreeMap::new();
    let mut unmatched = Vec::new();
    let entries = std::fs::read_dir(&args.pred).map_err(io_err(&args.pred))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    for path in files {
        let set = load_predictions(&path)?;
        let key = (set.sequence_id.clone(), set.expression_id);
        if !gts.contains_key(&key) {
            unmatched.push(format!("  {}: no ground truth for sequence {} expression {}", path.display(), key.0, key.1));
        }
        preds.insert(key, set);
    }
    for (seq, eid) in gts.keys() {
        if !preds.contains_key(&(seq.clone(), *eid)) {
            unmatched.push(format!("  {}: missing prediction file", args.pred.join(prediction_file_name(seq, *eid)).display()));
        }
    }
    if !unmatched.is_empty() {
        return Err(CliError::Unmatched(unmatched));
    }
    let pairs: Vec<_> = gts.into_iter().map(|(k, gt)| (gt, preds.remove(&k).expect("matched above"))).collect();
    let mut cfg = EvalConfig { ref_threshold: args.ref_threshold, ..EvalConfig::default() };
    if let Some(alphas) = args.alpha_grid {
        cfg.alphas = alphas;
    }
    let report = evaluate_dataset(&pairs, &cfg)?;
    write_atomic(&args.out, render_report(&report, ReportFormat::Json).as_bytes())?;
    if args.table {
        let _ = stdout.write_all(render_report(&report, ReportFormat::Table).as_bytes());
    }
    Ok(())
}

fn track(args: TrackArgs) -> Result<(), CliError> {
    let ann = load_annotation(&args.ann)?;
    let set = match args.method {
        Method::Oracle => {
            let cfg = TrackerConfig {
                class_threshold: args.class_threshold,
                ref_threshold: args.ref_threshold,
                detect_slots: args.detect_slots,
                patience: args.patience,
            };
            let noise = OracleNoise { box_sigma: args.jitter, flip_ref: args.flip, seed: args.seed };
            let mut scorer = OracleScorer::with_noise(&ann, args.expression, cfg.detect_slots, noise)?;
            run(&ann.sequence_id, args.expression, ann.frame_count, &mut scorer, cfg)?.predictions
        }
        Method::Iou => {
            if args.flip > 0.0 {
                return Err(CliError::Usage("--flip applies to the oracle method only".into()));
            }
            let mut frames = gt_detections(&ann, args.expression)?;
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            for d in frames.iter_mut().flatten() {
                d.bbox = jitter_box(d.bbox, args.jitter, f64::from(ann.frame_w), f64::from(ann.frame_h), &mut rng);
            }
            let cfg = IouAssociatorConfig { iou_threshold: args.iou_threshold, patience: args.patience };
            iou_associate(&ann.sequence_id, args.expression, &frames, cfg).referent_only(args.ref_threshold)
        }
    };
    save_predictions(&set, &args.out)?;
    Ok(())
}

fn propagate_cmd(args: PropagateArgs) -> Result<(), CliError> {
    let ann = load_annotation(&args.ann)?;
    let click = ClickPair {
        expression_id: args.expression,
        object_id: args.object,
        start_frame: args.start,
        end_frame: args.end,
    };
    save_annotation(&propagate(&ann, &click)?, &args.out)?;
    Ok(())
}

fn stats(args: StatsArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let anns = match args.format {
        StatsFormat::Json => load_annotation_dir(&args.ann)?,
        StatsFormat::ReferKitti => load_refer_kitti(&args.ann, KittiOptions::default())?,
    };
    let ids: BTreeSet<&str> = anns.iter().map(|a| a.sequence_id.as_str()).collect();
    if ids.len() != anns.len() {
        return Err(DataError::Validation("duplicate sequence ids".into()).into());
    }
    let mut text = serde_json::to_string_pretty(&compute_stats(&anns)).expect("stats serialize");
    text.push('\n');
    match args.out {
        Some(out) => write_atomic(&out, text.as_bytes())?,
        None => {
            let _ = stdout.write_all(text.as_bytes());
        }
    }
    Ok(())
}

fn serve(args: ServeArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(io_err(Path::new("<runtime>")))?;
    runtime.block_on(rmot_service::serve(&args.ann, &args.bind, args.port, |addr| {
        let _ = writeln!(stdout, "listening on http://{addr}");
        let _ = stdout.flush();
    }))?;
    Ok(())
}

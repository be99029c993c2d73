//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for usage or configuration errors, 2 for bad
//! input data or I/O failures. Diagnostics go to stderr; results go to files
//! or stdout.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::anonymizer::{self, AnonymizeConfig, RedactMode};
use crate::error::{AnonymizeError, ConfigError, StreamError};
use crate::evaluation::{self, DEFAULT_IOU_THRESHOLD};
use crate::selftest;
use crate::smoother::{self, SmootherConfig, DEFAULT_LINK_IOU};
use crate::streams::{self, DetectionStream};
use crate::synth::{self, SynthConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "vidanon",
    version,
    about = "Fill detection gaps, score detections, and redact faces in video frames"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Pixelate,
    Blur,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Insert averaged boxes where a track briefly loses its detection
    Smooth {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Odd kernel size, at least 3
        #[arg(long)]
        k: u32,
        #[arg(long, default_value_t = DEFAULT_LINK_IOU)]
        link_iou: f64,
        /// Also fill frames with support on one side only
        #[arg(long)]
        unilateral: bool,
    },
    /// Score detections against ground truth at one IoU threshold
    Eval {
        #[arg(long)]
        dets: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
        iou: f64,
        #[arg(long, default_value_t = 0.0)]
        min_score: f64,
    },
    /// Score detections over a range of IoU thresholds and write CSV
    Sweep {
        #[arg(long)]
        dets: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// start:stop:step, stop inclusive
        #[arg(long, default_value = "0.1:0.9:0.1")]
        thresholds: String,
        /// Output file; stdout when omitted
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        min_score: f64,
    },
    /// Redact boxes in a directory of frame_NNNNNN.ppm files
    Anonymize {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        dets: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Pixelate)]
        mode: Mode,
        #[arg(long, default_value_t = anonymizer::DEFAULT_BLOCK)]
        block: u32,
        #[arg(long, default_value_t = anonymizer::DEFAULT_RADIUS)]
        radius: u32,
        #[arg(long, default_value_t = anonymizer::DEFAULT_PASSES)]
        passes: u32,
        #[arg(long, default_value_t = anonymizer::DEFAULT_MARGIN)]
        margin: f64,
    },
    /// Generate a synthetic ground truth, degraded detections, and a drop log
    Synth {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        frames: u64,
        #[arg(long)]
        tracks: usize,
        #[arg(long)]
        drop_rate: f64,
        #[arg(long)]
        fp_rate: f64,
        #[arg(long)]
        out_gt: PathBuf,
        #[arg(long)]
        out_dets: PathBuf,
        #[arg(long)]
        out_log: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        #[arg(long, default_value_t = 1)]
        max_consecutive_drops: u32,
        #[arg(long, default_value_t = 1920)]
        width: u32,
        #[arg(long, default_value_t = 1080)]
        height: u32,
        #[arg(long, default_value_t = 0.0)]
        fp_persistence: f64,
    },
    /// Run the numeric self-checks of the proposal-network math
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Data(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_USAGE,
            Self::Data(_) => EXIT_DATA,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Config(m) | Self::Data(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<AnonymizeError> for Failure {
    fn from(e: AnonymizeError) -> Self {
        match e {
            AnonymizeError::Config(c) => c.into(),
            other => Self::Data(other.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

fn load(path: &Path, err: &mut dyn Write) -> Result<DetectionStream, Failure> {
    let parsed = streams::read_stream_file(path).map_err(|e| match e {
        StreamError::Io(io) => io_failure(path, io),
        other => Failure::Data(format!("{}: {other}", path.display())),
    })?;
    if parsed.merged_duplicates > 0 {
        let _ = writeln!(
            err,
            "warning: {}: merged {} duplicate frame record(s)",
            path.display(),
            parsed.merged_duplicates
        );
    }
    Ok(parsed.stream)
}

/// Runs the tool with `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            f.code()
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    match cmd {
        Command::Smooth {
            input,
            out: target,
            k,
            link_iou,
            unilateral,
        } => {
            let mut cfg = SmootherConfig::new(k)?.with_link_iou(link_iou)?;
            if unilateral {
                cfg = cfg.unilateral();
            }
            let s = load(&input, err)?;
            let smoothed = smoother::smooth(&s, &cfg);
            streams::write_stream_file(&smoothed, &target).map_err(|e| io_failure(&target, e))?;
            let _ = writeln!(
                err,
                "inserted {} box(es) across {} frame(s)",
                smoothed.synthesized_count() - s.synthesized_count(),
                smoothed.frame_count()
            );
        }
        Command::Eval {
            dets,
            gt,
            iou,
            min_score,
        } => {
            evaluation::validate_threshold(iou)?;
            let d = load(&dets, err)?.filter_min_score(min_score);
            let g = load(&gt, err)?;
            let c = evaluation::count_activations(&d, &g, iou)?;
            let r = evaluation::prf(&c, iou);
            let _ = writeln!(out, "threshold={iou} tp={} fp={} fn={}", c.tp, c.fp, c.fn_);
            let _ = writeln!(
                out,
                "precision={:.6} recall={:.6} f1={:.6}",
                r.precision, r.recall, r.f1
            );
        }
        Command::Sweep {
            dets,
            gt,
            thresholds,
            csv,
            min_score,
        } => {
            let ts = evaluation::parse_threshold_range(&thresholds)?;
            let d = load(&dets, err)?.filter_min_score(min_score);
            let g = load(&gt, err)?;
            let points = evaluation::sweep_points(&d, &g, &ts)?;
            let reports: Vec<_> = points.iter().map(|p| p.report).collect();
            let counts: Vec<_> = points.iter().map(|p| p.counts).collect();
            let text = evaluation::emit_report(&reports, &counts)?;
            match csv {
                Some(path) => fs::write(&path, text).map_err(|e| io_failure(&path, e))?,
                None => {
                    let _ = out.write_all(text.as_bytes());
                }
            }
        }
        Command::Anonymize {
            frames,
            dets,
            out: target,
            mode,
            block,
            radius,
            passes,
            margin,
        } => {
            let cfg = AnonymizeConfig {
                mode: match mode {
                    Mode::Pixelate => RedactMode::Pixelate { block },
                    Mode::Blur => RedactMode::BoxBlur { radius, passes },
                },
                margin_frac: margin,
            };
            cfg.validate()?;
            let boxes = load(&dets, err)?;
            let summary = anonymizer::anonymize_video(&frames, &boxes, &cfg, &target)?;
            for e in &summary.errors {
                let _ = writeln!(err, "warning: {e}");
            }
            let _ = writeln!(out, "{}", summary.to_json_line());
        }
        Command::Synth {
            seed,
            frames,
            tracks,
            drop_rate,
            fp_rate,
            out_gt,
            out_dets,
            out_log,
            jitter,
            max_consecutive_drops,
            width,
            height,
            fp_persistence,
        } => {
            let cfg = SynthConfig {
                seed,
                n_frames: frames,
                n_tracks: tracks,
                frame_w: width,
                frame_h: height,
                drop_rate,
                fp_rate,
                jitter,
                max_consecutive_drops,
                fp_persistence,
                ..SynthConfig::default()
            };
            let g = synth::generate(&cfg)?;
            streams::write_stream_file(&g.gt, &out_gt).map_err(|e| io_failure(&out_gt, e))?;
            streams::write_stream_file(&g.degraded, &out_dets)
                .map_err(|e| io_failure(&out_dets, e))?;
            g.log
                .write_file(&out_log)
                .map_err(|e| io_failure(&out_log, e))?;
            let _ = writeln!(
                err,
                "{} ground-truth boxes, {} dropped ({} bilateral), {} false positives",
                g.gt.box_count(),
                g.log.len(),
                g.log.bilateral_count(),
                g.injected_fps
            );
        }
        Command::Selftest { seed } => {
            let checks = selftest::run(seed);
            let mut failed = 0;
            for c in &checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                let _ = writeln!(out, "{tag}  {}  ({})", c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                return Err(Failure::Data(format!("{failed} self-check(s) failed")));
            }
        }
    }
    Ok(())
}

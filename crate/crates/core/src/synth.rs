//! Deterministic synthetic sequences: moving ground-truth faces, a degraded
//! "detector output" with dropouts and false positives, and a log of every
//! dropout. The log is the oracle for gap-filling and scoring checks.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::geometry::{iou, BBox};
use crate::streams::DetectionStream;

pub const MIN_BOX: f64 = 40.0;
pub const MAX_BOX: f64 = 120.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_frames: u64,
    pub n_tracks: usize,
    pub frame_w: u32,
    pub frame_h: u32,
    /// Probability that a ground-truth box is missing from the detections.
    pub drop_rate: f64,
    /// Expected false positives per frame.
    pub fp_rate: f64,
    /// Standard deviation of per-box positional noise, in pixels.
    pub jitter: f64,
    /// Longest run of consecutive dropouts within one track.
    pub max_consecutive_drops: u32,
    /// Per-axis speed bound, pixels per frame.
    pub max_speed: f64,
    /// Probability that a false positive persists to the next frame at the
    /// same place. Zero gives independent false positives every frame; higher
    /// values model static clutter the detector keeps firing on, flickering
    /// with the same visibility as real faces.
    pub fp_persistence: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_frames: 1000,
            n_tracks: 10,
            frame_w: 1920,
            frame_h: 1080,
            drop_rate: 0.2,
            fp_rate: 0.0,
            jitter: 0.0,
            max_consecutive_drops: 1,
            max_speed: 2.0,
            fp_persistence: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::new(m));
        if self.frame_w == 0 || self.frame_h == 0 {
            return bad("frame dimensions must be positive".into());
        }
        if !(0.0..1.0).contains(&self.drop_rate) {
            return bad(format!(
                "drop rate must be in [0, 1), got {}",
                self.drop_rate
            ));
        }
        if !(self.fp_rate >= 0.0 && self.fp_rate.is_finite()) {
            return bad(format!("fp rate must be >= 0, got {}", self.fp_rate));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return bad(format!("jitter must be >= 0, got {}", self.jitter));
        }
        if self.max_consecutive_drops < 1 {
            return bad("max consecutive drops must be at least 1".into());
        }
        if !(self.max_speed >= 0.0 && self.max_speed.is_finite()) {
            return bad(format!("max speed must be >= 0, got {}", self.max_speed));
        }
        if !(0.0..1.0).contains(&self.fp_persistence) {
            return bad(format!(
                "fp persistence must be in [0, 1), got {}",
                self.fp_persistence
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropEntry {
    pub track: usize,
    pub frame: u64,
    #[serde(rename = "box")]
    pub bbox: BBox,
    /// The same track is detected at both `frame - 1` and `frame + 1`.
    pub bilateral_k3: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DropLog {
    pub entries: Vec<DropEntry>,
}

impl DropLog {
    pub fn bilateral_count(&self) -> usize {
        self.entries.iter().filter(|e| e.bilateral_k3).count()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.entries {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write(&mut out)?;
        out.flush()
    }

    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        let entries = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(Self { entries })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub gt: DetectionStream,
    pub degraded: DetectionStream,
    pub log: DropLog,
    /// Number of false-positive boxes emitted into `degraded`.
    pub injected_fps: usize,
}

struct Mover {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    vx: f64,
    vy: f64,
}

/// Advances one axis and reflects off `[0, hi]`.
fn reflect(pos: &mut f64, vel: &mut f64, hi: f64) {
    if hi <= 0.0 {
        *pos = 0.0;
        return;
    }
    *pos += *vel;
    loop {
        if *pos < 0.0 {
            *pos = -*pos;
            *vel = -*vel;
        } else if *pos > hi {
            *pos = 2.0 * hi - *pos;
            *vel = -*vel;
        } else {
            break;
        }
    }
}

fn random_size(rng: &mut ChaCha8Rng, limit: u32) -> f64 {
    let hi = MAX_BOX.min(f64::from(limit));
    let lo = MIN_BOX.min(hi);
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        hi
    }
}

fn random_box(rng: &mut ChaCha8Rng, fw: u32, fh: u32) -> BBox {
    let w = random_size(rng, fw);
    let h = random_size(rng, fh);
    let x = rng.gen_range(0.0..=f64::from(fw) - w);
    let y = rng.gen_range(0.0..=f64::from(fh) - h);
    BBox::new(x, y, w, h)
}

/// A false-positive box that does not touch any ground-truth box, or `None`
/// when none turns up within a bounded number of tries.
fn background_box(rng: &mut ChaCha8Rng, cfg: &SynthConfig, truths: &[BBox]) -> Option<BBox> {
    (0..100)
        .map(|_| random_box(rng, cfg.frame_w, cfg.frame_h))
        .find(|b| truths.iter().all(|t| iou(b, t) == 0.0))
}

struct Clutter {
    bbox: BBox,
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput, ConfigError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_frames as usize;
    let (fw, fh) = (f64::from(cfg.frame_w), f64::from(cfg.frame_h));

    // Ground-truth trajectories, track-major.
    let mut paths: Vec<Vec<BBox>> = Vec::with_capacity(cfg.n_tracks);
    for _ in 0..cfg.n_tracks {
        let w = random_size(&mut rng, cfg.frame_w);
        let h = random_size(&mut rng, cfg.frame_h);
        let speed = |rng: &mut ChaCha8Rng| {
            if cfg.max_speed > 0.0 {
                rng.gen_range(-cfg.max_speed..=cfg.max_speed)
            } else {
                0.0
            }
        };
        let mut m = Mover {
            x: rng.gen_range(0.0..=fw - w),
            y: rng.gen_range(0.0..=fh - h),
            w,
            h,
            vx: speed(&mut rng),
            vy: speed(&mut rng),
        };
        let mut path = Vec::with_capacity(n);
        for _ in 0..n {
            path.push(BBox::new(m.x, m.y, m.w, m.h));
            reflect(&mut m.x, &mut m.vx, fw - m.w);
            reflect(&mut m.y, &mut m.vy, fh - m.h);
        }
        paths.push(path);
    }

    // Dropouts, capped per run.
    let mut dropped: Vec<Vec<bool>> = Vec::with_capacity(cfg.n_tracks);
    for _ in 0..cfg.n_tracks {
        let mut run = 0;
        let flags = (0..n)
            .map(|_| {
                let drop = run < cfg.max_consecutive_drops && rng.gen_bool(cfg.drop_rate);
                run = if drop { run + 1 } else { 0 };
                drop
            })
            .collect();
        dropped.push(flags);
    }

    let mut log = DropLog::default();
    for (track, flags) in dropped.iter().enumerate() {
        for (f, _) in flags.iter().enumerate().filter(|(_, d)| **d) {
            let bilateral = f > 0 && f + 1 < n && !flags[f - 1] && !flags[f + 1];
            log.entries.push(DropEntry {
                track,
                frame: f as u64,
                bbox: paths[track][f],
                bilateral_k3: bilateral,
            });
        }
    }
    log.entries.sort_by_key(|e| (e.frame, e.track));

    let noise = (cfg.jitter > 0.0).then(|| Normal::new(0.0, cfg.jitter).expect("jitter is finite"));
    let jitter = |rng: &mut ChaCha8Rng, b: BBox| match &noise {
        Some(d) => BBox::new(b.x + d.sample(rng), b.y + d.sample(rng), b.w, b.h),
        None => b,
    };

    let visibility = 1.0 - cfg.drop_rate;
    // Persistent clutter is spawned less often so that, after flicker, the
    // expected number shown per frame is still fp_rate.
    let spawn_rate = if cfg.fp_persistence == 0.0 {
        cfg.fp_rate
    } else {
        cfg.fp_rate * (1.0 - cfg.fp_persistence) / visibility
    };
    let spawner = (spawn_rate > 0.0).then(|| Poisson::new(spawn_rate).expect("rate is positive"));
    let mut clutter: Vec<Clutter> = Vec::new();
    let mut injected_fps = 0;

    let mut gt_frames = Vec::with_capacity(n);
    let mut det_frames = Vec::with_capacity(n);
    for f in 0..n {
        let truths: Vec<BBox> = paths.iter().map(|p| p[f]).collect();
        let mut dets: Vec<BBox> = Vec::with_capacity(truths.len() + 2);
        for (track, b) in truths.iter().enumerate() {
            if !dropped[track][f] {
                dets.push(jitter(&mut rng, *b));
            }
        }

        if let Some(p) = &spawner {
            let spawned = p.sample(&mut rng) as usize;
            for _ in 0..spawned {
                if let Some(bbox) = background_box(&mut rng, cfg, &truths) {
                    clutter.push(Clutter { bbox });
                }
            }
        }
        if cfg.fp_persistence == 0.0 {
            for c in clutter.drain(..) {
                dets.push(jitter(&mut rng, c.bbox));
                injected_fps += 1;
            }
        } else {
            for c in &clutter {
                if rng.gen_bool(visibility) {
                    dets.push(jitter(&mut rng, c.bbox));
                    injected_fps += 1;
                }
            }
            clutter.retain(|_| rng.gen_bool(cfg.fp_persistence));
        }

        gt_frames.push(truths);
        det_frames.push(dets);
    }

    Ok(SynthOutput {
        gt: DetectionStream::from_frames(gt_frames),
        degraded: DetectionStream::from_frames(det_frames),
        log,
        injected_fps,
    })
}

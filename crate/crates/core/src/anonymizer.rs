//! Redaction of detected regions in raster frames.
//!
//! Boxes are grown by a safety margin, clipped to the frame, and rasterized
//! outward (any partly covered pixel is redacted). Filters only ever read and
//! write pixels inside the region they redact. All rounding is integer
//! half-up, so output is bit-exact across platforms.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{AnonymizeError, ConfigError, ImageError};
use crate::geometry::{expand_and_clip, BBox};
use crate::image::FrameImage;
use crate::streams::{Detection, DetectionStream};

pub const DEFAULT_MARGIN: f64 = 0.1;
pub const DEFAULT_BLOCK: u32 = 16;
pub const DEFAULT_RADIUS: u32 = 8;
pub const DEFAULT_PASSES: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RedactMode {
    Pixelate { block: u32 },
    BoxBlur { radius: u32, passes: u32 },
}

impl Default for RedactMode {
    fn default() -> Self {
        Self::Pixelate {
            block: DEFAULT_BLOCK,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnonymizeConfig {
    pub mode: RedactMode,
    pub margin_frac: f64,
}

impl Default for AnonymizeConfig {
    fn default() -> Self {
        Self {
            mode: RedactMode::default(),
            margin_frac: DEFAULT_MARGIN,
        }
    }
}

impl AnonymizeConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        match self.mode {
            RedactMode::Pixelate { block } if block < 2 => {
                return Err(ConfigError::new(format!("block must be at least 2, got {block}")))
            }
            RedactMode::BoxBlur { radius, passes } if radius < 1 || passes < 1 => {
                return Err(ConfigError::new(format!(
                    "blur radius and passes must be at least 1, got radius {radius}, passes {passes}"
                )))
            }
            _ => {}
        }
        if !(self.margin_frac >= 0.0 && self.margin_frac.is_finite()) {
            return Err(ConfigError::new(format!(
                "margin must be a non-negative number, got {}",
                self.margin_frac
            )));
        }
        Ok(())
    }
}

/// Half-open pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl PixelRect {
    /// Every pixel the box touches, clipped to the image. `None` for a
    /// zero-area box or one that misses the image.
    pub fn covering(b: &BBox, width: u32, height: u32) -> Option<Self> {
        if b.is_degenerate() {
            return None;
        }
        let clamp = |v: f64, hi: u32| v.clamp(0.0, f64::from(hi)) as u32;
        let rect = Self {
            x0: clamp(b.x.floor(), width),
            y0: clamp(b.y.floor(), height),
            x1: clamp(b.right().ceil(), width),
            y1: clamp(b.bottom().ceil(), height),
        };
        (rect.x1 > rect.x0 && rect.y1 > rect.y0).then_some(rect)
    }

    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }
}

#[inline]
fn rounded_mean(sum: u64, n: u64) -> u8 {
    ((sum + n / 2) / n) as u8
}

/// Replaces each `block × block` cell of the region (anchored at the region's
/// top-left, edge cells may be smaller) with its per-channel mean.
pub fn pixelate_region(img: &mut FrameImage, b: &BBox, block: u32) {
    let Some(r) = PixelRect::covering(b, img.width(), img.height()) else {
        return;
    };
    let block = block.max(1);
    let stride = img.width() as usize * 3;
    let px = img.pixels_mut();

    for cy0 in (r.y0..r.y1).step_by(block as usize) {
        let cy1 = (cy0 + block).min(r.y1);
        for cx0 in (r.x0..r.x1).step_by(block as usize) {
            let cx1 = (cx0 + block).min(r.x1);
            let n = u64::from((cx1 - cx0) * (cy1 - cy0));
            let mut sum = [0u64; 3];
            for y in cy0..cy1 {
                let row = y as usize * stride;
                for x in cx0..cx1 {
                    let o = row + x as usize * 3;
                    for c in 0..3 {
                        sum[c] += u64::from(px[o + c]);
                    }
                }
            }
            let mean = sum.map(|s| rounded_mean(s, n));
            for y in cy0..cy1 {
                let row = y as usize * stride;
                for x in cx0..cx1 {
                    let o = row + x as usize * 3;
                    px[o..o + 3].copy_from_slice(&mean);
                }
            }
        }
    }
}

/// Box blur confined to the region: each pass sets every region pixel to the
/// rounded mean of its `(2r+1)²` window intersected with the region.
pub fn blur_region(img: &mut FrameImage, b: &BBox, radius: u32, passes: u32) {
    let Some(r) = PixelRect::covering(b, img.width(), img.height()) else {
        return;
    };
    let (rw, rh) = (r.width() as usize, r.height() as usize);
    let stride = img.width() as usize * 3;
    let rad = radius as usize;
    // Summed-area table with a zero border row and column.
    let sw = rw + 1;
    let mut table = vec![[0u64; 3]; sw * (rh + 1)];

    for _ in 0..passes {
        let px = img.pixels_mut();
        for y in 0..rh {
            let row = (r.y0 as usize + y) * stride + r.x0 as usize * 3;
            let mut acc = [0u64; 3];
            for x in 0..rw {
                let o = row + x * 3;
                for c in 0..3 {
                    acc[c] += u64::from(px[o + c]);
                    table[(y + 1) * sw + x + 1][c] = table[y * sw + x + 1][c] + acc[c];
                }
            }
        }
        for y in 0..rh {
            let (ya, yb) = (y.saturating_sub(rad), (y + rad + 1).min(rh));
            let row = (r.y0 as usize + y) * stride + r.x0 as usize * 3;
            for x in 0..rw {
                let (xa, xb) = (x.saturating_sub(rad), (x + rad + 1).min(rw));
                let n = ((yb - ya) * (xb - xa)) as u64;
                let o = row + x * 3;
                for c in 0..3 {
                    let s = table[yb * sw + xb][c] + table[ya * sw + xa][c]
                        - table[ya * sw + xb][c]
                        - table[yb * sw + xa][c];
                    px[o + c] = rounded_mean(s, n);
                }
            }
        }
    }
}

/// Expands, clips and redacts each box in order. Returns how many boxes
/// covered at least one pixel.
pub fn redact_frame(img: &mut FrameImage, boxes: &[Detection], cfg: &AnonymizeConfig) -> usize {
    let (w, h) = (img.width(), img.height());
    let mut redacted = 0;
    for d in boxes {
        let region = expand_and_clip(&d.bbox, cfg.margin_frac, w, h);
        if PixelRect::covering(&region, w, h).is_none() {
            continue;
        }
        match cfg.mode {
            RedactMode::Pixelate { block } => pixelate_region(img, &region, block),
            RedactMode::BoxBlur { radius, passes } => blur_region(img, &region, radius, passes),
        }
        redacted += 1;
    }
    redacted
}

/// Redacts one encoded P6 frame. Returns `None` when there is nothing to do,
/// meaning the input bytes should be passed through untouched.
pub fn redact_encoded(
    data: &[u8],
    boxes: &[Detection],
    cfg: &AnonymizeConfig,
) -> Result<Option<(Vec<u8>, usize)>, ImageError> {
    if boxes.is_empty() {
        return Ok(None);
    }
    let mut img = FrameImage::decode_ppm(data)?;
    let n = redact_frame(&mut img, boxes, cfg);
    Ok(Some((img.encode_ppm(), n)))
}

pub fn frame_file_name(frame: u64) -> String {
    format!("frame_{frame:06}.ppm")
}

pub fn parse_frame_file_name(name: &str) -> Option<u64> {
    let digits = name.strip_prefix("frame_")?.strip_suffix(".ppm")?;
    if digits.len() < 6 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct AnonymizeSummary {
    pub frames: usize,
    pub redacted_regions: usize,
    pub errors: Vec<String>,
}

impl AnonymizeSummary {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("summary always serializes")
    }
}

/// Lists `frame_NNNNNN.ppm` files in `dir`, sorted by frame index.
pub fn list_frames(dir: &Path) -> io::Result<Vec<(u64, PathBuf)>> {
    let mut frames = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name();
        if let Some(idx) = name.to_str().and_then(parse_frame_file_name) {
            frames.push((idx, entry.path()));
        }
    }
    frames.sort();
    Ok(frames)
}

/// Redacts every frame in `frames_in` and writes results to `frames_out`.
///
/// Frames without boxes are copied byte for byte. A frame that cannot be
/// read or decoded is recorded in the summary and skipped; failing to write
/// output is fatal.
pub fn anonymize_video(
    frames_in: &Path,
    boxes: &DetectionStream,
    cfg: &AnonymizeConfig,
    frames_out: &Path,
) -> Result<AnonymizeSummary, AnonymizeError> {
    cfg.validate()?;
    let frames = list_frames(frames_in).map_err(|source| AnonymizeError::InputUnreadable {
        path: frames_in.to_path_buf(),
        source,
    })?;
    fs::create_dir_all(frames_out).map_err(|source| AnonymizeError::OutputNotWritable {
        path: frames_out.to_path_buf(),
        source,
    })?;

    let mut summary = AnonymizeSummary::default();
    for (idx, path) in frames {
        let name = frame_file_name(idx);
        let data = match fs::read(&path) {
            Ok(d) => d,
            Err(e) => {
                summary.errors.push(format!("{}: {e}", path.display()));
                continue;
            }
        };
        let out = match redact_encoded(&data, boxes.boxes_at(idx), cfg) {
            Ok(Some((bytes, n))) => {
                summary.redacted_regions += n;
                bytes
            }
            Ok(None) => data,
            Err(e) => {
                summary.errors.push(format!("{}: {e}", path.display()));
                continue;
            }
        };
        let target = frames_out.join(&name);
        fs::write(&target, out).map_err(|source| AnonymizeError::OutputNotWritable {
            path: target,
            source,
        })?;
        summary.frames += 1;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(w: u32, h: u32, v: u8) -> FrameImage {
        FrameImage::filled(w, h, [v, v, v])
    }

    #[test]
    fn uniform_region_is_unchanged() {
        let mut img = gray(20, 20, 77);
        let before = img.clone();
        pixelate_region(&mut img, &BBox::new(2.0, 3.0, 11.0, 9.0), 4);
        assert_eq!(img, before);
        blur_region(&mut img, &BBox::new(2.0, 3.0, 11.0, 9.0), 3, 2);
        assert_eq!(img, before);
    }

    #[test]
    fn pixelate_rounds_half_up() {
        let mut img = gray(2, 2, 0);
        img.set_pixel(1, 1, [4, 4, 4]);
        pixelate_region(&mut img, &BBox::new(0.0, 0.0, 2.0, 2.0), 2);
        assert!(img.pixels().iter().all(|&v| v == 1));
    }

    #[test]
    fn zero_area_is_identity() {
        let mut img = gray(4, 4, 0);
        img.set_pixel(1, 1, [200, 10, 3]);
        let before = img.clone();
        pixelate_region(&mut img, &BBox::new(1.5, 1.0, 0.0, 2.0), 2);
        blur_region(&mut img, &BBox::new(1.0, 1.0, 2.0, 0.0), 1, 1);
        assert_eq!(img, before);
    }

    #[test]
    fn blur_clamps_to_region() {
        // 3x3 region inside a 5x5 white border; centre pixel white.
        let mut img = gray(5, 5, 255);
        for y in 1..4 {
            for x in 1..4 {
                img.set_pixel(x, y, [0, 0, 0]);
            }
        }
        img.set_pixel(2, 2, [255, 255, 255]);
        blur_region(&mut img, &BBox::new(1.0, 1.0, 3.0, 3.0), 1, 1);
        assert_eq!(img.pixel(2, 2), [28; 3]);
        for (x, y) in [(1, 1), (3, 1), (1, 3), (3, 3)] {
            assert_eq!(img.pixel(x, y), [64; 3]);
        }
        // edge-centre windows hold 6 pixels: (255 + 3) / 6 = 43
        assert_eq!(img.pixel(2, 1), [43; 3]);
        // border untouched
        assert_eq!(img.pixel(0, 0), [255; 3]);
        assert_eq!(img.pixel(4, 2), [255; 3]);
    }

    #[test]
    fn wide_blur_gives_region_mean() {
        let mut img = gray(4, 3, 0);
        let vals = [10u8, 20, 30, 40, 50, 60, 70, 80, 90, 100, 110, 120];
        for (i, v) in vals.iter().enumerate() {
            img.set_pixel(i as u32 % 4, i as u32 / 4, [*v, 0, 255]);
        }
        blur_region(&mut img, &BBox::new(0.0, 0.0, 4.0, 3.0), 10, 1);
        // mean 65
        assert!(img.pixels().chunks(3).all(|p| p == [65, 0, 255]));
    }

    #[test]
    fn covering_rounds_outward() {
        let r = PixelRect::covering(&BBox::new(1.2, 0.5, 2.0, 1.0), 10, 10).unwrap();
        assert_eq!((r.x0, r.y0, r.x1, r.y1), (1, 0, 4, 2));
        assert!(PixelRect::covering(&BBox::new(20.0, 0.0, 2.0, 2.0), 10, 10).is_none());
    }

    #[test]
    fn config_validation() {
        let mut cfg = AnonymizeConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.mode = RedactMode::Pixelate { block: 1 };
        assert!(cfg.validate().is_err());
        cfg.mode = RedactMode::BoxBlur {
            radius: 0,
            passes: 1,
        };
        assert!(cfg.validate().is_err());
        cfg.mode = RedactMode::BoxBlur {
            radius: 1,
            passes: 1,
        };
        cfg.margin_frac = -0.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn overlapping_boxes_apply_in_order() {
        let mut img = gray(16, 16, 0);
        for y in 0..16 {
            for x in 0..16 {
                img.set_pixel(x, y, [(x * 16) as u8, (y * 16) as u8, ((x + y) * 8) as u8]);
            }
        }
        let a = BBox::new(2.0, 2.0, 8.0, 8.0);
        let b = BBox::new(6.0, 5.0, 8.0, 8.0);
        let cfg = AnonymizeConfig {
            mode: RedactMode::Pixelate { block: 3 },
            margin_frac: 0.0,
        };
        let mut expected = img.clone();
        pixelate_region(&mut expected, &a, 3);
        pixelate_region(&mut expected, &b, 3);
        let n = redact_frame(&mut img, &[a.into(), b.into()], &cfg);
        assert_eq!(n, 2);
        assert_eq!(img, expected);
    }

    #[test]
    fn frame_names() {
        assert_eq!(frame_file_name(7), "frame_000007.ppm");
        assert_eq!(parse_frame_file_name("frame_000007.ppm"), Some(7));
        assert_eq!(parse_frame_file_name("frame_1234567.ppm"), Some(1_234_567));
        assert_eq!(parse_frame_file_name("frame_7.ppm"), None);
        assert_eq!(parse_frame_file_name("frame_00000a.ppm"), None);
        assert_eq!(parse_frame_file_name("other_000001.ppm"), None);
    }

    #[test]
    fn summary_json() {
        let s = AnonymizeSummary {
            frames: 3,
            redacted_regions: 2,
            errors: vec!["x".into()],
        };
        assert_eq!(
            s.to_json_line(),
            r#"{"frames":3,"redacted_regions":2,"errors":["x"]}"#
        );
    }
}

//! Axis-aligned box arithmetic.
//!
//! Boxes are `(x, y, w, h)` in pixels with the origin at the top-left corner
//! and y growing downward. A box covers the half-open region
//! `[x, x + w) × [y, y + h)`. Coordinates are real-valued; rasterization only
//! happens when regions are redacted.

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// An axis-aligned box with an optional detector confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl BBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self {
            x,
            y,
            w,
            h,
            score: None,
        }
    }

    pub const fn with_score(mut self, score: f64) -> Self {
        self.score = Some(score);
        self
    }

    #[inline]
    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    #[inline]
    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    /// Computed from the edges so that a box's area and its self-intersection
    /// round identically.
    #[inline]
    pub fn area(&self) -> f64 {
        (self.right() - self.x).max(0.0) * (self.bottom() - self.y).max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + 0.5 * self.w, self.y + 0.5 * self.h)
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.w > 0.0 && self.h > 0.0)
    }

    /// Same box geometry, ignoring the score.
    pub fn same_extent(&self, other: &BBox) -> bool {
        self.x == other.x && self.y == other.y && self.w == other.w && self.h == other.h
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let iw = self.right().min(other.right()) - self.x.max(other.x);
        let ih = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        iou(self, other)
    }
}

/// Intersection over union. Zero when the union has no area.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Per-coordinate mean of a nonempty set of boxes.
///
/// The score is the mean of whichever scores are present, and absent when no
/// input carries one.
pub fn average_boxes(boxes: &[BBox]) -> Result<BBox, GeometryError> {
    if boxes.is_empty() {
        return Err(GeometryError::EmptyAverage);
    }
    let n = boxes.len() as f64;
    let (mut x, mut y, mut w, mut h) = (0.0, 0.0, 0.0, 0.0);
    let mut score_sum = 0.0;
    let mut scored = 0usize;
    for b in boxes {
        x += b.x;
        y += b.y;
        w += b.w;
        h += b.h;
        if let Some(s) = b.score {
            score_sum += s;
            scored += 1;
        }
    }
    Ok(BBox {
        x: x / n,
        y: y / n,
        w: w / n,
        h: h / n,
        score: (scored > 0).then(|| score_sum / scored as f64),
    })
}

/// Grows each side by `margin_frac` of the box size, then clips to the frame
/// `[0, frame_w) × [0, frame_h)`.
///
/// A box lying entirely outside the frame comes back with zero area.
pub fn expand_and_clip(b: &BBox, margin_frac: f64, frame_w: u32, frame_h: u32) -> BBox {
    let mx = margin_frac * b.w;
    let my = margin_frac * b.h;
    let (fw, fh) = (f64::from(frame_w), f64::from(frame_h));

    let x0 = (b.x - mx).clamp(0.0, fw);
    let y0 = (b.y - my).clamp(0.0, fh);
    let x1 = (b.right() + mx).clamp(x0, fw);
    let y1 = (b.bottom() + my).clamp(y0, fh);

    BBox {
        x: x0,
        y: y0,
        w: x1 - x0,
        h: y1 - y0,
        score: b.score,
    }
}

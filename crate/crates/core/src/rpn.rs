//! Reference math for a region proposal network: anchor grids, IoU label
//! assignment, balanced minibatch sampling, box deltas, the two-part
//! classification/regression loss, and greedy non-maximum suppression.
//!
//! Nothing here learns. These functions exist so the arithmetic can be
//! checked against closed forms, finite differences and brute force.

use std::cmp::Ordering;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{ConfigError, RpnError};
use crate::geometry::{iou, BBox};

pub const POSITIVE_IOU: f64 = 0.7;
pub const NEGATIVE_IOU: f64 = 0.3;
pub const SAMPLES_PER_CLASS: usize = 256;
pub const DEFAULT_LAMBDA: f64 = 10.0;
pub const NMS_IOU: f64 = 0.7;
pub const NMS_PRE_TOP: usize = 12_000;
pub const NMS_POST_TOP: usize = 2_000;

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorGrid {
    pub anchors: Vec<BBox>,
    pub stride: u32,
    pub scales: Vec<f64>,
    pub ratios: Vec<f64>,
    pub image_w: u32,
    pub image_h: u32,
}

impl AnchorGrid {
    pub fn cells_x(&self) -> u32 {
        self.image_w.div_ceil(self.stride)
    }

    pub fn cells_y(&self) -> u32 {
        self.image_h.div_ceil(self.stride)
    }
}

/// Places one anchor per (cell, scale, ratio), centred on each stride cell.
///
/// An anchor of scale `s` and ratio `r` has area `s²` and `w / h = r`.
/// Ordering is row-major over cells, then scale, then ratio.
pub fn generate_anchors(
    image_w: u32,
    image_h: u32,
    stride: u32,
    scales: &[f64],
    ratios: &[f64],
) -> Result<AnchorGrid, ConfigError> {
    if image_w == 0 || image_h == 0 || stride == 0 {
        return Err(ConfigError::new("image size and stride must be positive"));
    }
    if scales.is_empty() || ratios.is_empty() {
        return Err(ConfigError::new("need at least one scale and one ratio"));
    }
    if scales.iter().chain(ratios).any(|v| !(*v > 0.0)) {
        return Err(ConfigError::new("scales and ratios must be positive"));
    }

    let shapes: Vec<(f64, f64)> = scales
        .iter()
        .flat_map(|&s| ratios.iter().map(move |&r| (s * r.sqrt(), s / r.sqrt())))
        .collect();
    let (nx, ny) = (image_w.div_ceil(stride), image_h.div_ceil(stride));
    let half = f64::from(stride) / 2.0;
    let mut anchors = Vec::with_capacity(nx as usize * ny as usize * shapes.len());
    for cy in 0..ny {
        for cx in 0..nx {
            let ctr_x = f64::from(cx * stride) + half;
            let ctr_y = f64::from(cy * stride) + half;
            for &(w, h) in &shapes {
                anchors.push(BBox::new(ctr_x - w / 2.0, ctr_y - h / 2.0, w, h));
            }
        }
    }
    Ok(AnchorGrid {
        anchors,
        stride,
        scales: scales.to_vec(),
        ratios: ratios.to_vec(),
        image_w,
        image_h,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorLabel {
    Positive,
    Negative,
    Ignore,
}

/// Labels anchors by their best IoU against the ground truth: positive at or
/// above `pos_iou`, negative at or below `neg_iou`, ignored in between.
///
/// Each truth's best-overlapping anchor (lowest index on ties) is forced
/// positive as long as that overlap is nonzero.
pub fn assign_labels(
    grid: &AnchorGrid,
    gts: &[BBox],
    pos_iou: f64,
    neg_iou: f64,
) -> Result<Vec<AnchorLabel>, ConfigError> {
    if !(0.0 <= neg_iou && neg_iou < pos_iou && pos_iou <= 1.0) {
        return Err(ConfigError::new(format!(
            "need 0 <= neg_iou < pos_iou <= 1, got neg {neg_iou}, pos {pos_iou}"
        )));
    }
    let mut best_for_gt: Vec<(usize, f64)> = vec![(0, 0.0); gts.len()];
    let mut labels = Vec::with_capacity(grid.anchors.len());
    for (ai, anchor) in grid.anchors.iter().enumerate() {
        let mut max_iou = 0.0f64;
        for (gi, gt) in gts.iter().enumerate() {
            let v = iou(anchor, gt);
            max_iou = max_iou.max(v);
            if v > best_for_gt[gi].1 {
                best_for_gt[gi] = (ai, v);
            }
        }
        labels.push(if max_iou >= pos_iou {
            AnchorLabel::Positive
        } else if max_iou <= neg_iou {
            AnchorLabel::Negative
        } else {
            AnchorLabel::Ignore
        });
    }
    for &(ai, v) in &best_for_gt {
        if v > 0.0 {
            labels[ai] = AnchorLabel::Positive;
        }
    }
    Ok(labels)
}

/// Anchors chosen for one training step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Minibatch {
    /// Sampled anchor indices, ascending.
    pub indices: Vec<usize>,
    /// 1 for a positive anchor, 0 for a negative one, aligned with `indices`.
    pub p_star: Vec<u8>,
}

impl Minibatch {
    pub fn positives(&self) -> usize {
        self.p_star.iter().filter(|&&p| p == 1).count()
    }

    pub fn negatives(&self) -> usize {
        self.p_star.len() - self.positives()
    }
}

/// Draws up to `n_per_class` positives and up to `n_per_class` negatives
/// uniformly without replacement.
pub fn sample_minibatch(
    labels: &[AnchorLabel],
    n_per_class: usize,
    seed: u64,
) -> Result<Minibatch, RpnError> {
    if n_per_class == 0 {
        return Err(ConfigError::new("samples per class must be at least 1").into());
    }
    let pick = |want: AnchorLabel| -> Vec<usize> {
        labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == want)
            .map(|(i, _)| i)
            .collect()
    };
    let (pos, neg) = (pick(AnchorLabel::Positive), pick(AnchorLabel::Negative));
    if pos.is_empty() && neg.is_empty() {
        return Err(RpnError::NothingToSample);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<(usize, u8)> = Vec::with_capacity(2 * n_per_class);
    for (pool, p) in [(&pos, 1u8), (&neg, 0u8)] {
        let take = n_per_class.min(pool.len());
        chosen.extend(
            index::sample(&mut rng, pool.len(), take)
                .into_iter()
                .map(|i| (pool[i], p)),
        );
    }
    chosen.sort_unstable();
    Ok(Minibatch {
        indices: chosen.iter().map(|c| c.0).collect(),
        p_star: chosen.iter().map(|c| c.1).collect(),
    })
}

/// Centre offsets scaled by anchor size, and log size ratios.
pub fn encode_box(anchor: &BBox, gt: &BBox) -> Result<[f64; 4], RpnError> {
    for b in [anchor, gt] {
        if !(b.w > 0.0 && b.h > 0.0) {
            return Err(RpnError::NonPositiveBox { w: b.w, h: b.h });
        }
    }
    let (ax, ay) = anchor.center();
    let (gx, gy) = gt.center();
    Ok([
        (gx - ax) / anchor.w,
        (gy - ay) / anchor.h,
        (gt.w / anchor.w).ln(),
        (gt.h / anchor.h).ln(),
    ])
}

pub fn decode_box(anchor: &BBox, t: &[f64; 4]) -> BBox {
    let (ax, ay) = anchor.center();
    let cx = ax + t[0] * anchor.w;
    let cy = ay + t[1] * anchor.h;
    let w = anchor.w * t[2].exp();
    let h = anchor.h * t[3].exp();
    BBox::new(cx - w / 2.0, cy - h / 2.0, w, h)
}

/// Quadratic below |x| = 1, linear above; both branches give 0.5 at the joint.
pub fn smooth_l1(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        0.5 * x * x
    } else {
        a - 0.5
    }
}

pub fn smooth_l1_grad(x: f64) -> f64 {
    if x.abs() < 1.0 {
        x
    } else {
        x.signum()
    }
}

/// Sum of [`smooth_l1`] over the four coordinate differences.
pub fn box_regression_loss(t: &[f64; 4], t_star: &[f64; 4]) -> f64 {
    t.iter().zip(t_star).map(|(a, b)| smooth_l1(a - b)).sum()
}

/// Two-class prediction, either as probabilities or as raw scores that still
/// need a softmax. Index 0 is background, 1 is face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassScores {
    Probabilities([f64; 2]),
    Logits([f64; 2]),
}

pub fn softmax2(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e = [(logits[0] - m).exp(), (logits[1] - m).exp()];
    let s = e[0] + e[1];
    [e[0] / s, e[1] / s]
}

/// Negative log-likelihood of `label`.
///
/// Returns `f64::INFINITY` when the labelled class has probability zero;
/// callers can test for that with `is_infinite`.
pub fn cls_loss(scores: ClassScores, label: u8) -> Result<f64, RpnError> {
    let label = match label {
        0 | 1 => usize::from(label),
        _ => {
            return Err(RpnError::BadProbabilities(format!(
                "label {label} is not 0 or 1"
            )))
        }
    };
    match scores {
        ClassScores::Probabilities(p) => {
            if p.iter().any(|v| !(*v >= 0.0)) || (p[0] + p[1] - 1.0).abs() > 1e-9 {
                return Err(RpnError::BadProbabilities(format!(
                    "{p:?} is not a distribution"
                )));
            }
            Ok(if p[label] == 0.0 {
                f64::INFINITY
            } else {
                -p[label].ln()
            })
        }
        ClassScores::Logits(f) => {
            // log-sum-exp form stays finite for large logits
            let m = f[0].max(f[1]);
            let lse = m + ((f[0] - m).exp() + (f[1] - m).exp()).ln();
            Ok(lse - f[label])
        }
    }
}

/// Gradient of the logit-form [`cls_loss`]: `softmax(f) - onehot(label)`.
pub fn cls_loss_logit_grad(logits: [f64; 2], label: u8) -> [f64; 2] {
    let mut g = softmax2(logits);
    g[usize::from(label)] -= 1.0;
    g
}

/// One sampled anchor's prediction and target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorSample {
    pub scores: ClassScores,
    pub p_star: u8,
    /// Predicted deltas; only read when `p_star == 1`.
    pub t: [f64; 4],
    pub t_star: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RpnBatch {
    pub samples: Vec<AnchorSample>,
    /// Classification normalizer, by default the number of samples.
    pub n_cls: usize,
    /// Regression normalizer: the number of non-ignored anchors.
    pub n_reg: usize,
    pub lambda: f64,
}

impl RpnBatch {
    pub fn new(samples: Vec<AnchorSample>, n_reg: usize) -> Self {
        Self {
            n_cls: samples.len(),
            samples,
            n_reg,
            lambda: DEFAULT_LAMBDA,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_n_cls(mut self, n_cls: usize) -> Self {
        self.n_cls = n_cls;
        self
    }

    /// Builds the batch for a sampled minibatch. Each positive anchor regresses
    /// toward the truth it overlaps most; `predict` supplies the network output
    /// for an anchor index.
    pub fn assemble(
        grid: &AnchorGrid,
        gts: &[BBox],
        labels: &[AnchorLabel],
        minibatch: &Minibatch,
        mut predict: impl FnMut(usize) -> (ClassScores, [f64; 4]),
    ) -> Result<Self, RpnError> {
        let n_reg = labels.iter().filter(|l| **l != AnchorLabel::Ignore).count();
        let mut samples = Vec::with_capacity(minibatch.indices.len());
        for (&ai, &p_star) in minibatch.indices.iter().zip(&minibatch.p_star) {
            let anchor = &grid.anchors[ai];
            let (scores, t) = predict(ai);
            let t_star = if p_star == 1 {
                let target = gts
                    .iter()
                    .max_by(|a, b| iou(anchor, a).total_cmp(&iou(anchor, b)))
                    .ok_or(RpnError::NothingToSample)?;
                encode_box(anchor, target)?
            } else {
                [0.0; 4]
            };
            samples.push(AnchorSample {
                scores,
                p_star,
                t,
                t_star,
            });
        }
        Ok(Self::new(samples, n_reg))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpnLoss {
    pub total: f64,
    pub cls_term: f64,
    pub reg_term: f64,
}

/// Mean classification loss over the sampled anchors plus `lambda` times the
/// normalized regression loss over positive anchors.
pub fn rpn_loss(batch: &RpnBatch) -> Result<RpnLoss, RpnError> {
    if batch.n_cls == 0 {
        return Err(RpnError::ZeroNormalizer { name: "N_cls" });
    }
    if batch.n_reg == 0 {
        return Err(RpnError::ZeroNormalizer { name: "N_reg" });
    }
    let mut cls_sum = 0.0;
    let mut reg_sum = 0.0;
    for s in &batch.samples {
        cls_sum += cls_loss(s.scores, s.p_star)?;
        if s.p_star == 1 {
            reg_sum += box_regression_loss(&s.t, &s.t_star);
        }
    }
    let cls_term = cls_sum / batch.n_cls as f64;
    let reg_term = batch.lambda * reg_sum / batch.n_reg as f64;
    Ok(RpnLoss {
        total: cls_term + reg_term,
        cls_term,
        reg_term,
    })
}

/// Greedy non-maximum suppression, returning kept indices in descending
/// score order.
///
/// Only the `pre_top` highest scores are considered (ties: lower index
/// first). A box is dropped when its IoU with an already kept box is strictly
/// greater than `iou_thresh`. At most `post_top` boxes are returned.
pub fn nms_indices(
    boxes: &[BBox],
    iou_thresh: f64,
    pre_top: usize,
    post_top: usize,
) -> Result<Vec<usize>, RpnError> {
    if !(iou_thresh > 0.0 && iou_thresh <= 1.0) {
        return Err(
            ConfigError::new(format!("NMS threshold must be in (0, 1], got {iou_thresh}")).into(),
        );
    }
    let mut scored: Vec<(usize, f64)> = boxes
        .iter()
        .enumerate()
        .map(|(i, b)| {
            b.score
                .map(|s| (i, s))
                .ok_or(RpnError::MissingScore { index: i })
        })
        .collect::<Result<_, _>>()?;
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    scored.truncate(pre_top);

    let mut suppressed = vec![false; scored.len()];
    let mut keep = Vec::new();
    for i in 0..scored.len() {
        if suppressed[i] {
            continue;
        }
        let kept = &boxes[scored[i].0];
        keep.push(scored[i].0);
        if keep.len() == post_top {
            break;
        }
        for j in i + 1..scored.len() {
            if !suppressed[j] && iou(kept, &boxes[scored[j].0]) > iou_thresh {
                suppressed[j] = true;
            }
        }
    }
    Ok(keep)
}

pub fn nms(
    boxes: &[BBox],
    iou_thresh: f64,
    pre_top: usize,
    post_top: usize,
) -> Result<Vec<BBox>, RpnError> {
    Ok(nms_indices(boxes, iou_thresh, pre_top, post_top)?
        .into_iter()
        .map(|i| boxes[i])
        .collect())
}

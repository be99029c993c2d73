//! Runtime numeric checks of the proposal-network math: analytic gradients
//! against central differences, loss gating, box-delta round trips, and
//! greedy suppression against a quadratic reference.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{iou, BBox};
use crate::rpn::{
    cls_loss, cls_loss_logit_grad, decode_box, encode_box, nms_indices, rpn_loss, smooth_l1,
    smooth_l1_grad, AnchorSample, ClassScores, RpnBatch,
};

pub const FD_STEP: f64 = 1e-6;
pub const GRAD_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Worst relative gradient error of smooth-L1 over `n` random points in
/// `[-3, 3]`, skipping a small band around the kinks at ±1.
pub fn smooth_l1_gradient_error(rng: &mut impl Rng, n: usize) -> f64 {
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < n {
        let x: f64 = rng.gen_range(-3.0..3.0);
        if (x.abs() - 1.0).abs() <= 1e-4 {
            continue;
        }
        let fd = central_difference(smooth_l1, x, FD_STEP);
        worst = worst.max(rel_err(fd, smooth_l1_grad(x)));
        done += 1;
    }
    worst
}

/// Worst relative gradient error of the logit-form classification loss.
pub fn cls_loss_gradient_error(rng: &mut impl Rng, n: usize) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..n {
        let logits = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
        let label: u8 = rng.gen_range(0..2);
        let analytic = cls_loss_logit_grad(logits, label);
        for k in 0..2 {
            let f = |v: f64| {
                let mut l = logits;
                l[k] = v;
                cls_loss(ClassScores::Logits(l), label).expect("valid label")
            };
            let fd = central_difference(f, logits[k], FD_STEP);
            worst = worst.max(rel_err(fd, analytic[k]));
        }
    }
    worst
}

/// Quadratic reference: walk boxes in score order and keep a box unless it
/// overlaps something already kept by more than the threshold.
pub fn reference_nms(boxes: &[BBox], thresh: f64, pre_top: usize, post_top: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    // insertion sort keeps equal scores in index order
    for i in 1..order.len() {
        let mut j = i;
        while j > 0 && boxes[order[j - 1]].score.unwrap() < boxes[order[j]].score.unwrap() {
            order.swap(j - 1, j);
            j -= 1;
        }
    }
    order.truncate(pre_top);
    let mut kept: Vec<usize> = Vec::new();
    for &cand in &order {
        if kept.len() == post_top {
            break;
        }
        if kept.iter().all(|&k| iou(&boxes[k], &boxes[cand]) <= thresh) {
            kept.push(cand);
        }
    }
    kept
}

pub fn random_scored_boxes(rng: &mut impl Rng, n: usize, extent: f64) -> Vec<BBox> {
    (0..n)
        .map(|_| {
            let w = rng.gen_range(4.0..60.0);
            let h = rng.gen_range(4.0..60.0);
            // Coarse scores so ties actually occur.
            let score = f64::from(rng.gen_range(0..200u32)) / 200.0;
            BBox::new(rng.gen_range(0.0..extent), rng.gen_range(0.0..extent), w, h)
                .with_score(score)
        })
        .collect()
}

pub fn run(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    let e = smooth_l1_gradient_error(&mut rng, 200);
    checks.push(Check {
        name: "smooth_l1 gradient",
        passed: e <= GRAD_TOLERANCE,
        detail: format!("max relative error {e:.3e} over 200 points"),
    });

    let e = cls_loss_gradient_error(&mut rng, 200);
    checks.push(Check {
        name: "classification loss gradient",
        passed: e <= GRAD_TOLERANCE,
        detail: format!("max relative error {e:.3e} over 200 points"),
    });

    let perfect = RpnBatch::new(
        vec![
            AnchorSample {
                scores: ClassScores::Probabilities([0.0, 1.0]),
                p_star: 1,
                t: [0.3, -0.2, 0.1, 0.0],
                t_star: [0.3, -0.2, 0.1, 0.0],
            },
            AnchorSample {
                scores: ClassScores::Probabilities([1.0, 0.0]),
                p_star: 0,
                t: [9.0; 4],
                t_star: [0.0; 4],
            },
        ],
        2,
    );
    let loss = rpn_loss(&perfect).expect("valid batch");
    checks.push(Check {
        name: "perfect predictions give zero loss",
        passed: loss.total == 0.0,
        detail: format!("total {}", loss.total),
    });

    let negatives_only = RpnBatch::new(
        (0..8)
            .map(|_| AnchorSample {
                scores: ClassScores::Probabilities([0.6, 0.4]),
                p_star: 0,
                t: [rng.gen_range(-4.0..4.0); 4],
                t_star: [0.0; 4],
            })
            .collect(),
        8,
    );
    let loss = rpn_loss(&negatives_only).expect("valid batch");
    checks.push(Check {
        name: "regression term gated by positive labels",
        passed: loss.reg_term == 0.0,
        detail: format!("reg term {}", loss.reg_term),
    });

    let mut worst = 0.0f64;
    for _ in 0..200 {
        let a = BBox::new(
            rng.gen_range(-100.0..100.0),
            rng.gen_range(-100.0..100.0),
            rng.gen_range(1.0..200.0),
            rng.gen_range(1.0..200.0),
        );
        let g = BBox::new(
            rng.gen_range(-100.0..100.0),
            rng.gen_range(-100.0..100.0),
            rng.gen_range(1.0..200.0),
            rng.gen_range(1.0..200.0),
        );
        let back = decode_box(&a, &encode_box(&a, &g).expect("positive boxes"));
        for (u, v) in [(back.x, g.x), (back.y, g.y), (back.w, g.w), (back.h, g.h)] {
            worst = worst.max((u - v).abs() / (1.0 + v.abs()));
        }
    }
    checks.push(Check {
        name: "box delta round trip",
        passed: worst <= 1e-12,
        detail: format!("max error {worst:.3e}"),
    });

    let mut mismatches = 0;
    let instances = 20;
    for _ in 0..instances {
        let n = rng.gen_range(1..400);
        let boxes = random_scored_boxes(&mut rng, n, 300.0);
        let thresh = rng.gen_range(0.1..0.9);
        let post = rng.gen_range(1..=n);
        let got = nms_indices(&boxes, thresh, n, post).expect("scored boxes");
        if got != reference_nms(&boxes, thresh, n, post) {
            mismatches += 1;
        }
    }
    checks.push(Check {
        name: "nms matches quadratic reference",
        passed: mismatches == 0,
        detail: format!("{mismatches} of {instances} instances differ"),
    });

    checks
}

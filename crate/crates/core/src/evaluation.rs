//! Detection scoring under an IoU threshold.
//!
//! Each frame is matched once, without a threshold (see
//! [`match_frame`](crate::association::match_frame)), then every threshold is
//! applied to that fixed matching:
//!
//! | outcome                                   | tp | fp | fn |
//! |-------------------------------------------|----|----|----|
//! | matched pair with IoU ≥ t                 | +1 |    |    |
//! | truth with no overlapping detection       |    |    | +1 |
//! | detection with no overlapping truth       |    | +1 |    |
//! | matched pair with IoU < t                 |    | +1 | +1 |
//!
//! The last row is the double count: a poorly placed box is both a miss and a
//! spurious detection.

use std::fmt::Write as _;

use crate::association::{match_frame, FrameMatching};
use crate::error::ConfigError;
use crate::geometry::BBox;
use crate::streams::DetectionStream;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ActivationCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl std::ops::AddAssign for ActivationCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
    }
}

/// Counts per outcome. `tp`, `fp` and `fn` follow from these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CaseBreakdown {
    /// Matched with IoU at or above the threshold.
    pub hit: u64,
    /// Truth with no overlapping detection.
    pub missed: u64,
    /// Detection with no overlapping truth.
    pub spurious: u64,
    /// Matched, but with IoU below the threshold.
    pub misaligned: u64,
}

impl CaseBreakdown {
    pub fn counts(&self) -> ActivationCounts {
        ActivationCounts {
            tp: self.hit,
            fp: self.spurious + self.misaligned,
            fn_: self.missed + self.misaligned,
        }
    }
}

impl std::ops::AddAssign for CaseBreakdown {
    fn add_assign(&mut self, rhs: Self) {
        self.hit += rhs.hit;
        self.missed += rhs.missed;
        self.spurious += rhs.spurious;
        self.misaligned += rhs.misaligned;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrfReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub threshold: f64,
}

pub fn validate_threshold(t: f64) -> Result<(), ConfigError> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(ConfigError::new(format!(
            "IoU threshold must be in (0, 1], got {t}"
        )))
    }
}

fn classify(m: &FrameMatching, t: f64) -> CaseBreakdown {
    let hit = m.pairs.iter().filter(|p| p.2 >= t).count() as u64;
    CaseBreakdown {
        hit,
        missed: m.unmatched_truths.len() as u64,
        spurious: m.unmatched_detections.len() as u64,
        misaligned: m.pairs.len() as u64 - hit,
    }
}

/// Threshold-free matchings for every frame that has a detection or a truth.
#[derive(Debug, Clone, Default)]
pub struct StreamMatching {
    frames: Vec<(u64, FrameMatching)>,
}

impl StreamMatching {
    pub fn compute(dets: &DetectionStream, gts: &DetectionStream) -> Self {
        let (d, g) = (dets.records(), gts.records());
        let (mut i, mut j) = (0, 0);
        let mut frames = Vec::with_capacity(d.len().max(g.len()));
        let mut dbuf: Vec<BBox> = Vec::new();
        let mut gbuf: Vec<BBox> = Vec::new();
        while i < d.len() || j < g.len() {
            let frame = match (d.get(i), g.get(j)) {
                (Some(a), Some(b)) => a.frame.min(b.frame),
                (Some(a), None) => a.frame,
                (None, Some(b)) => b.frame,
                (None, None) => unreachable!(),
            };
            dbuf.clear();
            gbuf.clear();
            if d.get(i).is_some_and(|r| r.frame == frame) {
                dbuf.extend(d[i].boxes.iter().map(|b| b.bbox));
                i += 1;
            }
            if g.get(j).is_some_and(|r| r.frame == frame) {
                gbuf.extend(g[j].boxes.iter().map(|b| b.bbox));
                j += 1;
            }
            frames.push((frame, match_frame(&dbuf, &gbuf)));
        }
        Self { frames }
    }

    pub fn frames(&self) -> &[(u64, FrameMatching)] {
        &self.frames
    }

    pub fn cases_at(&self, t: f64) -> CaseBreakdown {
        let mut total = CaseBreakdown::default();
        for (_, m) in &self.frames {
            total += classify(m, t);
        }
        total
    }

    pub fn counts_at(&self, t: f64) -> ActivationCounts {
        self.cases_at(t).counts()
    }
}

/// Tallies tp/fp/fn over all frames at IoU threshold `t`.
pub fn count_activations(
    dets: &DetectionStream,
    gts: &DetectionStream,
    t: f64,
) -> Result<ActivationCounts, ConfigError> {
    validate_threshold(t)?;
    Ok(StreamMatching::compute(dets, gts).counts_at(t))
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Precision, recall and F1. Empty denominators give 0.
pub fn prf(c: &ActivationCounts, t: f64) -> PrfReport {
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    PrfReport {
        precision,
        recall,
        f1: f1_score(precision, recall),
        threshold: t,
    }
}

/// One sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub counts: ActivationCounts,
    pub report: PrfReport,
}

fn check_thresholds(thresholds: &[f64]) -> Result<(), ConfigError> {
    for &t in thresholds {
        validate_threshold(t)?;
    }
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(ConfigError::new("thresholds must be sorted ascending"));
    }
    Ok(())
}

/// Scores every threshold against one shared matching.
pub fn sweep_points(
    dets: &DetectionStream,
    gts: &DetectionStream,
    thresholds: &[f64],
) -> Result<Vec<SweepPoint>, ConfigError> {
    check_thresholds(thresholds)?;
    let matching = StreamMatching::compute(dets, gts);
    Ok(thresholds
        .iter()
        .map(|&t| {
            let counts = matching.counts_at(t);
            SweepPoint {
                counts,
                report: prf(&counts, t),
            }
        })
        .collect())
}

pub fn sweep(
    dets: &DetectionStream,
    gts: &DetectionStream,
    thresholds: &[f64],
) -> Result<Vec<PrfReport>, ConfigError> {
    Ok(sweep_points(dets, gts, thresholds)?
        .into_iter()
        .map(|p| p.report)
        .collect())
}

pub const REPORT_HEADER: &str = "threshold,tp,fp,fn,precision,recall,f1";

/// Renders sweep results as CSV with six decimals for real-valued columns.
pub fn emit_report(
    reports: &[PrfReport],
    counts: &[ActivationCounts],
) -> Result<String, ConfigError> {
    if reports.len() != counts.len() {
        return Err(ConfigError::new(format!(
            "{} reports but {} count rows",
            reports.len(),
            counts.len()
        )));
    }
    let mut out = String::with_capacity(64 * (reports.len() + 1));
    out.push_str(REPORT_HEADER);
    out.push('\n');
    for (r, c) in reports.iter().zip(counts) {
        writeln!(
            out,
            "{:.6},{},{},{},{:.6},{:.6},{:.6}",
            r.threshold, c.tp, c.fp, c.fn_, r.precision, r.recall, r.f1
        )
        .expect("writing to a String cannot fail");
    }
    Ok(out)
}

/// Parses `start:stop:step`, inclusive of `stop` within 1e-9.
pub fn parse_threshold_range(spec: &str) -> Result<Vec<f64>, ConfigError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, stop, step] = parts[..] else {
        return Err(ConfigError::new(format!(
            "threshold range must look like start:stop:step, got {spec:?}"
        )));
    };
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| ConfigError::new(format!("not a number in threshold range: {s:?}")))
    };
    let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
    if !(step > 0.0) || !(stop >= start) {
        return Err(ConfigError::new(format!(
            "threshold range needs step > 0 and stop >= start, got {spec:?}"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    let values: Vec<f64> = (0..=n).map(|i| start + i as f64 * step).collect();
    check_thresholds(&values)?;
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(b: BBox) -> DetectionStream {
        DetectionStream::from_frames(vec![vec![b]])
    }

    fn counts(tp: u64, fp: u64, fn_: u64) -> ActivationCounts {
        ActivationCounts { tp, fp, fn_ }
    }

    /// Box with IoU `v` against (0,0,100,10): same height, width 100·v.
    fn at_iou(v: f64) -> BBox {
        BBox::new(0.0, 0.0, 100.0 * v, 10.0)
    }

    const TRUTH: BBox = BBox::new(0.0, 0.0, 100.0, 10.0);

    #[test]
    fn four_cases() {
        let gt = one(TRUTH);
        assert_eq!(
            count_activations(&one(at_iou(0.5)), &gt, 0.3).unwrap(),
            counts(1, 0, 0)
        );
        assert_eq!(
            count_activations(&one(at_iou(0.2)), &gt, 0.3).unwrap(),
            counts(0, 1, 1)
        );
        let none = DetectionStream::empty(1);
        assert_eq!(count_activations(&none, &gt, 0.3).unwrap(), counts(0, 0, 1));
        assert_eq!(count_activations(&gt, &none, 0.3).unwrap(), counts(0, 1, 0));
    }

    #[test]
    fn threshold_is_validated() {
        let s = one(TRUTH);
        assert!(count_activations(&s, &s, 0.0).is_err());
        assert!(count_activations(&s, &s, 1.01).is_err());
        assert!(count_activations(&s, &s, 1.0).is_ok());
    }

    #[test]
    fn prf_empty_is_zero() {
        let r = prf(&counts(0, 0, 0), 0.3);
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn prf_from_counts() {
        let r = prf(&counts(3, 1, 2), 0.5);
        assert_eq!(r.precision, 0.75);
        assert_eq!(r.recall, 0.6);
        assert!((r.f1 - 2.0 * 0.75 * 0.6 / 1.35).abs() < 1e-15);
    }

    #[test]
    fn sweep_single_pair() {
        let pts = sweep_points(&one(at_iou(0.45)), &one(TRUTH), &[0.3, 0.5]).unwrap();
        assert_eq!(pts[0].counts, counts(1, 0, 0));
        assert_eq!(
            (
                pts[0].report.precision,
                pts[0].report.recall,
                pts[0].report.f1
            ),
            (1.0, 1.0, 1.0)
        );
        assert_eq!(pts[1].counts, counts(0, 1, 1));
        assert_eq!(
            (
                pts[1].report.precision,
                pts[1].report.recall,
                pts[1].report.f1
            ),
            (0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn sweep_rejects_unsorted() {
        let s = one(TRUTH);
        assert!(sweep(&s, &s, &[0.5, 0.3]).is_err());
    }

    #[test]
    fn frames_in_only_one_stream() {
        let d = DetectionStream::from_frames(vec![vec![TRUTH], vec![]]);
        let g = DetectionStream::from_frames(vec![vec![], vec![TRUTH]]);
        assert_eq!(count_activations(&d, &g, 0.3).unwrap(), counts(0, 1, 1));
    }

    #[test]
    fn report_csv() {
        assert_eq!(emit_report(&[], &[]).unwrap(), format!("{REPORT_HEADER}\n"));
        let c = counts(2, 1, 1);
        let text = emit_report(&[prf(&c, 0.3)], &[c]).unwrap();
        assert_eq!(
            text,
            "threshold,tp,fp,fn,precision,recall,f1\n0.300000,2,1,1,0.666667,0.666667,0.666667\n"
        );
        assert!(emit_report(&[prf(&c, 0.3)], &[]).is_err());
    }

    #[test]
    fn threshold_range() {
        let v = parse_threshold_range("0.1:0.9:0.1").unwrap();
        assert_eq!(v.len(), 9);
        assert!((v[8] - 0.9).abs() < 1e-12);
        assert_eq!(parse_threshold_range("0.3:0.3:0.1").unwrap(), vec![0.3]);
        assert!(parse_threshold_range("0.1:0.9").is_err());
        assert!(parse_threshold_range("0.0:0.5:0.1").is_err());
        assert!(parse_threshold_range("0.5:0.1:0.1").is_err());
        assert!(parse_threshold_range("0.1:0.5:0").is_err());
    }
}

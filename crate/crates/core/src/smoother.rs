//! Sliding-average gap filling.
//!
//! Boxes are linked into tracks, and every frame inside a track's lifetime
//! where the track has no box gets the mean of the track's detected boxes
//! within `[t - h, t + h]`, where `h = (k - 1) / 2` for an odd kernel size `k`.
//! No pixel data is consulted.

use crate::association::{build_tracks, Track};
use crate::error::ConfigError;
use crate::geometry::{average_boxes, BBox};
use crate::streams::{Detection, DetectionStream, FrameRecord, Provenance};

pub const DEFAULT_LINK_IOU: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmootherConfig {
    k: u32,
    pub link_iou: f64,
    /// Only fill a frame when the window holds detections on both sides of it.
    pub require_bilateral: bool,
}

impl SmootherConfig {
    pub fn new(k: u32) -> Result<Self, ConfigError> {
        if k < 3 || k.is_multiple_of(2) {
            return Err(ConfigError::new(format!(
                "k must be odd and at least 3, got {k}"
            )));
        }
        Ok(Self {
            k,
            link_iou: DEFAULT_LINK_IOU,
            require_bilateral: true,
        })
    }

    pub fn with_link_iou(mut self, link_iou: f64) -> Result<Self, ConfigError> {
        if !(link_iou > 0.0 && link_iou <= 1.0) {
            return Err(ConfigError::new(format!(
                "link IoU must be in (0, 1], got {link_iou}"
            )));
        }
        self.link_iou = link_iou;
        Ok(self)
    }

    pub fn unilateral(mut self) -> Self {
        self.require_bilateral = false;
        self
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn half_window(&self) -> u64 {
        u64::from((self.k - 1) / 2)
    }

    /// Association keeps a track alive across exactly the gaps the kernel
    /// can bridge.
    pub fn max_gap(&self) -> u64 {
        u64::from(self.k - 1)
    }
}

/// A box the smoother wants to insert.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fill {
    pub track: usize,
    pub frame: u64,
    pub bbox: BBox,
}

/// Computes fills for already-built tracks. Only `Detected` entries feed the
/// average, so fills never feed further fills.
pub fn fill_tracks(tracks: &[Track], half_window: u64, require_bilateral: bool) -> Vec<Fill> {
    let mut fills = Vec::new();
    let mut window: Vec<BBox> = Vec::new();
    for track in tracks {
        for t in track.holes() {
            window.clear();
            let (mut left, mut right) = (false, false);
            let lo = t.saturating_sub(half_window);
            for (&f, (bbox, prov)) in track.entries.range(lo..=t + half_window) {
                if *prov != Provenance::Detected {
                    continue;
                }
                left |= f < t;
                right |= f > t;
                window.push(*bbox);
            }
            if window.is_empty() || (require_bilateral && !(left && right)) {
                continue;
            }
            let bbox = average_boxes(&window).expect("window is nonempty");
            fills.push(Fill {
                track: track.id,
                frame: t,
                bbox,
            });
        }
    }
    fills
}

/// Returns the input stream plus synthesized boxes for every fillable hole.
///
/// Original boxes keep their order and values. Within a frame, synthesized
/// boxes follow the originals in ascending track id.
pub fn smooth(s: &DetectionStream, cfg: &SmootherConfig) -> DetectionStream {
    let tracks = build_tracks(s, cfg.link_iou, cfg.max_gap())
        .expect("link IoU is validated by SmootherConfig");
    let fills = fill_tracks(&tracks, cfg.half_window(), cfg.require_bilateral);
    merge_fills(s, fills)
}

fn merge_fills(s: &DetectionStream, mut fills: Vec<Fill>) -> DetectionStream {
    if fills.is_empty() {
        return s.clone();
    }
    fills.sort_by_key(|f| (f.frame, f.track));
    let extra = fills.into_iter().map(|f| FrameRecord {
        frame: f.frame,
        boxes: vec![Detection::synthesized(f.bbox)],
    });
    let (merged, _) =
        DetectionStream::from_records(s.records().iter().cloned().chain(extra), s.frame_count());
    merged
}

/// Removes every synthesized box.
pub fn strip_synthesized(s: &DetectionStream) -> DetectionStream {
    let records = s.records().iter().map(|r| FrameRecord {
        frame: r.frame,
        boxes: r
            .boxes
            .iter()
            .filter(|d| !d.is_synthesized())
            .copied()
            .collect(),
    });
    DetectionStream::from_records(records, s.frame_count()).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(k: u32) -> SmootherConfig {
        SmootherConfig::new(k).unwrap()
    }

    #[test]
    fn k_must_be_odd_and_at_least_three() {
        assert!(SmootherConfig::new(4).is_err());
        assert!(SmootherConfig::new(1).is_err());
        assert!(SmootherConfig::new(0).is_err());
        assert_eq!(cfg(7).half_window(), 3);
        assert_eq!(cfg(7).max_gap(), 6);
    }

    #[test]
    fn fills_single_frame_gap_with_midpoint() {
        let s = DetectionStream::from_frames(vec![
            vec![BBox::new(10.0, 10.0, 20.0, 20.0)],
            vec![],
            vec![BBox::new(14.0, 10.0, 20.0, 20.0)],
        ]);
        let out = smooth(&s, &cfg(3));
        let filled = out.boxes_at(1);
        assert_eq!(filled.len(), 1);
        assert_eq!(
            filled[0],
            Detection::synthesized(BBox::new(12.0, 10.0, 20.0, 20.0))
        );
        assert_eq!(out.boxes_at(0), s.boxes_at(0));
        assert_eq!(out.boxes_at(2), s.boxes_at(2));
    }

    #[test]
    fn window_of_five_averages_four_neighbours() {
        // Box moves 2 px per frame; frame 2 missing.
        let b = |x: f64| vec![BBox::new(x, 0.0, 20.0, 20.0).with_score(0.5)];
        let s = DetectionStream::from_frames(vec![b(0.0), b(2.0), vec![], b(6.0), b(8.0)]);
        let out = smooth(&s, &cfg(5));
        let f = out.boxes_at(2)[0];
        assert_eq!(f.bbox.x, 4.0);
        assert_eq!(f.bbox.score, Some(0.5));
    }

    #[test]
    fn no_gaps_means_no_change() {
        let s = DetectionStream::from_frames(
            (0..6).map(|i| vec![BBox::new(f64::from(i), 0.0, 20.0, 20.0)]),
        );
        assert_eq!(smooth(&s, &cfg(3)), s);
    }

    #[test]
    fn never_extrapolates_past_track_end() {
        let b = vec![BBox::new(10.0, 10.0, 20.0, 20.0)];
        let mut frames = vec![vec![]; 5];
        frames.extend([b.clone(), b.clone(), b]);
        frames.push(vec![]);
        let s = DetectionStream::from_frames(frames);
        let out = smooth(&s, &cfg(3));
        assert!(out.boxes_at(8).is_empty());
        assert!(out.boxes_at(4).is_empty());
        assert_eq!(out.synthesized_count(), 0);
    }

    #[test]
    fn bilateral_rule_on_long_gap() {
        // Gap of 2 frames (2,3): with k=3 neither frame sees both sides.
        let b = vec![BBox::new(10.0, 10.0, 20.0, 20.0)];
        let s =
            DetectionStream::from_frames(vec![b.clone(), b.clone(), vec![], vec![], b.clone(), b]);
        assert_eq!(smooth(&s, &cfg(3)).synthesized_count(), 0);
        assert_eq!(smooth(&s, &cfg(5)).synthesized_count(), 2);
        assert_eq!(smooth(&s, &cfg(3).unilateral()).synthesized_count(), 2);
    }

    #[test]
    fn strip_counts() {
        // Two tracks; three detections and two holes that get filled.
        let a = BBox::new(0.0, 0.0, 20.0, 20.0);
        let c = BBox::new(100.0, 0.0, 20.0, 20.0);
        let s = DetectionStream::from_frames(vec![vec![a, c], vec![], vec![a]]);
        let smoothed = smooth(&s, &cfg(3));
        // Track c has only one detection, so only track a fills.
        assert_eq!(smoothed.synthesized_count(), 1);
        assert_eq!(smoothed.box_count(), 4);
        let stripped = strip_synthesized(&smoothed);
        assert_eq!(stripped.box_count(), 3);
        assert_eq!(stripped, s);

        let s2 = DetectionStream::from_frames(vec![vec![a, c], vec![], vec![a, c]]);
        let sm2 = smooth(&s2, &cfg(3));
        assert_eq!(sm2.box_count(), 6);
        assert_eq!(sm2.synthesized_count(), 2);
        assert_eq!(strip_synthesized(&sm2).box_count(), 4);
    }

    #[test]
    fn strip_without_synthesized_is_identity() {
        let s = DetectionStream::from_frames(vec![vec![BBox::new(0.0, 0.0, 1.0, 1.0)], vec![]]);
        assert_eq!(strip_synthesized(&s), s);
    }

    #[test]
    fn synthesized_inputs_do_not_feed_averages() {
        let d = |x: f64| Detection::detected(BBox::new(x, 0.0, 20.0, 20.0));
        let syn = Detection::synthesized(BBox::new(1.0, 0.0, 20.0, 20.0));
        // Track: frame0 detected, frame1 synthesized, frame2 hole, frame3 detected.
        let s = DetectionStream::from_frames(vec![vec![d(0.0)], vec![syn], vec![], vec![d(2.0)]]);
        let tracks = build_tracks(&s, 0.01, 2).unwrap();
        assert_eq!(tracks.len(), 1);
        let fills = fill_tracks(&tracks, 1, true);
        // Window [1,3] has only the right-side detection -> not bilateral.
        assert!(fills.is_empty());
        let fills = fill_tracks(&tracks, 1, false);
        assert_eq!(fills.len(), 1);
        assert_eq!(fills[0].bbox.x, 2.0);
    }

    fn arb_stream() -> impl Strategy<Value = DetectionStream> {
        // A few slow-moving faces with random dropouts.
        (1usize..4, 5usize..40, any::<u64>()).prop_map(|(tracks, frames, seed)| {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let starts: Vec<(f64, f64)> = (0..tracks)
                .map(|i| (200.0 * i as f64, rng.gen_range(0.0..100.0)))
                .collect();
            DetectionStream::from_frames((0..frames).map(|f| {
                let mut boxes = Vec::new();
                for &(x, y) in &starts {
                    if rng.gen_bool(0.7) {
                        boxes.push(
                            BBox::new(x + f as f64, y, 40.0, 40.0)
                                .with_score(rng.gen_range(0.0..1.0)),
                        );
                    }
                }
                boxes
            }))
        })
    }

    proptest! {
        #[test]
        fn output_is_superset_and_strip_inverts(s in arb_stream(), k in prop::sample::select(vec![3u32, 5, 7])) {
            let out = smooth(&s, &cfg(k));
            for rec in s.records() {
                let after = out.boxes_at(rec.frame);
                prop_assert_eq!(&after[..rec.boxes.len()], &rec.boxes[..]);
            }
            prop_assert_eq!(strip_synthesized(&out), s.clone());
            prop_assert_eq!(smooth(&s, &cfg(k)), out);
        }

        #[test]
        fn fill_coverage_grows_with_k(s in arb_stream()) {
            // Links fixed at the widest gap so only the window changes.
            let tracks = build_tracks(&s, DEFAULT_LINK_IOU, 6).unwrap();
            let slots = |h: u64| {
                fill_tracks(&tracks, h, true).into_iter().map(|f| (f.track, f.frame)).collect::<std::collections::BTreeSet<_>>()
            };
            let (s3, s5, s7) = (slots(1), slots(2), slots(3));
            prop_assert!(s3.is_subset(&s5));
            prop_assert!(s5.is_subset(&s7));
        }

        #[test]
        fn short_bilateral_gaps_fill_completely(
            gap in 1u64..4, k in prop::sample::select(vec![3u32, 5, 7]), x0 in 0.0..50.0f64
        ) {
            let c = cfg(k);
            prop_assume!(gap <= c.half_window());
            let b = BBox::new(x0, 0.0, 40.0, 40.0);
            let mut frames = vec![vec![b]; 3];
            frames.extend(vec![vec![]; gap as usize]);
            frames.extend(vec![vec![b]; 3]);
            let out = smooth(&DetectionStream::from_frames(frames), &c);
            for f in 3..3 + gap {
                prop_assert_eq!(out.boxes_at(f).len(), 1);
                prop_assert!(out.boxes_at(f)[0].is_synthesized());
            }
        }
    }
}

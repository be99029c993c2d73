//! Cross-frame linking of boxes into tracklets, and one-to-one pairing of
//! detections with ground truth inside a single frame.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::error::ConfigError;
use crate::geometry::{iou, BBox};
use crate::streams::{DetectionStream, Provenance};

/// Boxes believed to belong to one face, keyed by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: usize,
    pub entries: BTreeMap<u64, (BBox, Provenance)>,
}

impl Track {
    fn new(id: usize, frame: u64, bbox: BBox, provenance: Provenance) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(frame, (bbox, provenance));
        Self { id, entries }
    }

    pub fn first_frame(&self) -> u64 {
        *self.entries.keys().next().expect("tracks are never empty")
    }

    pub fn last_frame(&self) -> u64 {
        *self
            .entries
            .keys()
            .next_back()
            .expect("tracks are never empty")
    }

    pub fn last_box(&self) -> &BBox {
        &self
            .entries
            .values()
            .next_back()
            .expect("tracks are never empty")
            .0
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Frames inside `[first, last]` with no entry.
    pub fn holes(&self) -> impl Iterator<Item = u64> + '_ {
        (self.first_frame()..=self.last_frame()).filter(|f| !self.entries.contains_key(f))
    }
}

/// Greedy frame-by-frame linking.
///
/// Frames are visited in order and, within a frame, boxes in list order. Each
/// box joins the still-unclaimed track whose most recent box has the highest
/// IoU with it, provided that IoU is at least `link_iou` and the track was last
/// seen no more than `max_gap` missing frames ago. Ties go to the lower track
/// id. A box that joins nothing starts a new track.
///
/// Provenance is carried over from the stream unchanged.
pub fn build_tracks(
    s: &DetectionStream,
    link_iou: f64,
    max_gap: u64,
) -> Result<Vec<Track>, ConfigError> {
    if !(link_iou > 0.0 && link_iou <= 1.0) {
        return Err(ConfigError::new(format!(
            "link IoU must be in (0, 1], got {link_iou}"
        )));
    }

    let mut tracks: Vec<Track> = Vec::new();
    // Indices into `tracks` that can still be extended.
    let mut open: Vec<usize> = Vec::new();

    for rec in s.records() {
        let frame = rec.frame;
        open.retain(|&ti| frame - tracks[ti].last_frame() - 1 <= max_gap);
        let mut claimed = vec![false; open.len()];

        for det in &rec.boxes {
            let mut best: Option<(usize, f64)> = None;
            for (slot, &ti) in open.iter().enumerate() {
                if claimed[slot] {
                    continue;
                }
                let overlap = iou(tracks[ti].last_box(), &det.bbox);
                if overlap < link_iou {
                    continue;
                }
                // `open` is in ascending id order, so strict > keeps the lower id on ties.
                if best.is_none_or(|(_, b)| overlap > b) {
                    best = Some((slot, overlap));
                }
            }
            match best {
                Some((slot, _)) => {
                    claimed[slot] = true;
                    tracks[open[slot]]
                        .entries
                        .insert(frame, (det.bbox, det.provenance));
                }
                None => {
                    let id = tracks.len();
                    tracks.push(Track::new(id, frame, det.bbox, det.provenance));
                    open.push(id);
                    claimed.push(true);
                }
            }
        }
    }
    Ok(tracks)
}

/// One-to-one pairing of a frame's detections with its ground truth.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameMatching {
    /// `(detection index, truth index, iou)`, by descending IoU.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_detections: Vec<usize>,
    pub unmatched_truths: Vec<usize>,
}

/// Greedy matching over every detection/truth pair with positive IoU, taken in
/// descending IoU order (ties: lower detection index, then lower truth index).
///
/// No threshold is applied here; a single matching serves any IoU threshold.
pub fn match_frame(detections: &[BBox], truths: &[BBox]) -> FrameMatching {
    let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
    for (di, d) in detections.iter().enumerate() {
        for (ti, t) in truths.iter().enumerate() {
            let overlap = iou(d, t);
            if overlap > 0.0 {
                candidates.push((di, ti, overlap));
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .unwrap_or(Ordering::Equal)
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });

    let mut det_used = vec![false; detections.len()];
    let mut gt_used = vec![false; truths.len()];
    let mut pairs = Vec::new();
    for (di, ti, overlap) in candidates {
        if det_used[di] || gt_used[ti] {
            continue;
        }
        det_used[di] = true;
        gt_used[ti] = true;
        pairs.push((di, ti, overlap));
    }

    FrameMatching {
        pairs,
        unmatched_detections: (0..detections.len()).filter(|&i| !det_used[i]).collect(),
        unmatched_truths: (0..truths.len()).filter(|&i| !gt_used[i]).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::Detection;
    use proptest::prelude::*;

    fn stationary(frames: &[u64]) -> DetectionStream {
        let n = *frames.iter().max().unwrap() as usize + 1;
        DetectionStream::from_frames((0..n).map(|f| {
            if frames.contains(&(f as u64)) {
                vec![BBox::new(10.0, 10.0, 20.0, 20.0)]
            } else {
                vec![]
            }
        }))
    }

    #[test]
    fn stationary_box_forms_one_track() {
        let tracks = build_tracks(&stationary(&[0, 1, 2, 3, 4]), 0.3, 0).unwrap();
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].len(), 5);
    }

    #[test]
    fn disjoint_boxes_form_two_tracks() {
        let s = DetectionStream::from_frames((0..4).map(|_| {
            vec![
                BBox::new(0.0, 0.0, 10.0, 10.0),
                BBox::new(50.0, 50.0, 10.0, 10.0),
            ]
        }));
        let tracks = build_tracks(&s, 0.3, 1).unwrap();
        assert_eq!(tracks.len(), 2);
        assert!(tracks.iter().all(|t| t.len() == 4));
        assert_eq!(tracks[1].last_box().x, 50.0);
    }

    #[test]
    fn gap_bridging_depends_on_max_gap() {
        let s = stationary(&[0, 1, 3, 4]);
        let bridged = build_tracks(&s, 0.3, 2).unwrap();
        assert_eq!(bridged.len(), 1);
        assert_eq!(bridged[0].holes().collect::<Vec<_>>(), vec![2]);

        let split = build_tracks(&s, 0.3, 0).unwrap();
        assert_eq!(split.len(), 2);
        assert_eq!(
            split[0].entries.keys().copied().collect::<Vec<_>>(),
            vec![0, 1]
        );
        assert_eq!(
            split[1].entries.keys().copied().collect::<Vec<_>>(),
            vec![3, 4]
        );
    }

    #[test]
    fn ties_go_to_lower_track_id() {
        // Two identical boxes open tracks 0 and 1; the next frame's single box
        // overlaps both equally.
        let s = DetectionStream::from_frames(vec![
            vec![
                BBox::new(0.0, 0.0, 10.0, 10.0),
                BBox::new(0.0, 0.0, 10.0, 10.0),
            ],
            vec![BBox::new(1.0, 0.0, 10.0, 10.0)],
        ]);
        let tracks = build_tracks(&s, 0.3, 0).unwrap();
        assert_eq!(tracks.len(), 2);
        assert_eq!(tracks[0].len(), 2);
        assert_eq!(tracks[1].len(), 1);
    }

    #[test]
    fn link_iou_is_validated() {
        let s = stationary(&[0]);
        assert!(build_tracks(&s, 0.0, 0).is_err());
        assert!(build_tracks(&s, 1.5, 0).is_err());
    }

    #[test]
    fn provenance_is_preserved() {
        let s = DetectionStream::from_frames(vec![
            vec![Detection::detected(BBox::new(0.0, 0.0, 10.0, 10.0))],
            vec![Detection::synthesized(BBox::new(0.0, 0.0, 10.0, 10.0))],
        ]);
        let t = build_tracks(&s, 0.3, 0).unwrap();
        assert_eq!(t[0].entries[&1].1, Provenance::Synthesized);
    }

    #[test]
    fn exact_match() {
        let b = BBox::new(0.0, 0.0, 10.0, 10.0);
        let m = match_frame(&[b], &[b]);
        assert_eq!(m.pairs, vec![(0, 0, 1.0)]);
        assert!(m.unmatched_detections.is_empty() && m.unmatched_truths.is_empty());
    }

    #[test]
    fn missing_detection_leaves_truth_unmatched() {
        let m = match_frame(&[], &[BBox::new(0.0, 0.0, 10.0, 10.0)]);
        assert!(m.pairs.is_empty());
        assert_eq!(m.unmatched_truths, vec![0]);
    }

    #[test]
    fn greedy_takes_highest_iou_first() {
        // A: IoU 0.9 with T1; B: IoU 0.8 with T1.
        let t1 = BBox::new(0.0, 0.0, 100.0, 10.0);
        let a = BBox::new(0.0, 0.0, 90.0, 10.0);
        let b = BBox::new(0.0, 0.0, 80.0, 10.0);
        assert!((iou(&a, &t1) - 0.9).abs() < 1e-12);
        assert!((iou(&b, &t1) - 0.8).abs() < 1e-12);

        // T2 overlaps A but not B.
        let t2 = BBox::new(85.0, 0.0, 5.0, 10.0);
        assert!(iou(&a, &t2) > 0.0);
        assert_eq!(iou(&b, &t2), 0.0);
        let m = match_frame(&[a, b], &[t1, t2]);
        assert_eq!(m.pairs, vec![(0, 0, 0.9)]);
        assert_eq!(m.unmatched_detections, vec![1]);
        assert_eq!(m.unmatched_truths, vec![1]);

        // Once T2 also overlaps B, B takes it.
        let t2 = BBox::new(75.0, 0.0, 10.0, 10.0);
        let m = match_frame(&[a, b], &[t1, t2]);
        assert_eq!(m.pairs.len(), 2);
        assert_eq!((m.pairs[0].0, m.pairs[0].1), (0, 0));
        assert_eq!((m.pairs[1].0, m.pairs[1].1), (1, 1));
        assert!(m.unmatched_detections.is_empty());
    }

    #[test]
    fn better_new_detection_does_not_unmatch_strong_pair() {
        let t = BBox::new(0.0, 0.0, 10.0, 10.0);
        let strong = BBox::new(0.0, 0.0, 10.0, 9.0);
        let weak = BBox::new(3.0, 0.0, 10.0, 10.0);
        let before = match_frame(&[strong], &[t]);
        let after = match_frame(&[strong, weak], &[t]);
        assert_eq!(before.unmatched_truths, after.unmatched_truths);
        assert_eq!(after.pairs[0].0, 0);
        assert_eq!(after.unmatched_detections, vec![1]);
    }

    fn arb_boxes(max: usize) -> impl Strategy<Value = Vec<BBox>> {
        proptest::collection::vec(
            (0.0..200.0f64, 0.0..200.0f64, 1.0..80.0f64, 1.0..80.0f64)
                .prop_map(|(x, y, w, h)| BBox::new(x, y, w, h)),
            0..max,
        )
    }

    proptest! {
        #[test]
        fn matching_is_one_to_one(dets in arb_boxes(12), gts in arb_boxes(12)) {
            let m = match_frame(&dets, &gts);
            let mut ds: Vec<usize> = m.pairs.iter().map(|p| p.0).chain(m.unmatched_detections.iter().copied()).collect();
            let mut ts: Vec<usize> = m.pairs.iter().map(|p| p.1).chain(m.unmatched_truths.iter().copied()).collect();
            ds.sort_unstable();
            ts.sort_unstable();
            prop_assert_eq!(ds, (0..dets.len()).collect::<Vec<_>>());
            prop_assert_eq!(ts, (0..gts.len()).collect::<Vec<_>>());
            prop_assert!(m.pairs.iter().all(|p| p.2 > 0.0));
            prop_assert!(m.pairs.windows(2).all(|w| w[0].2 >= w[1].2));
        }

        #[test]
        fn matching_is_permutation_stable(
            dets in arb_boxes(8), gts in arb_boxes(8), seed in any::<u64>()
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            // Only meaningful when all candidate IoUs are distinct.
            let mut ious: Vec<f64> = dets.iter().flat_map(|d| gts.iter().map(move |t| iou(d, t))).filter(|v| *v > 0.0).collect();
            ious.sort_by(f64::total_cmp);
            prop_assume!(ious.windows(2).all(|w| w[0] != w[1]));

            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut dp: Vec<usize> = (0..dets.len()).collect();
            let mut tp: Vec<usize> = (0..gts.len()).collect();
            dp.shuffle(&mut rng);
            tp.shuffle(&mut rng);
            let pd: Vec<BBox> = dp.iter().map(|&i| dets[i]).collect();
            let pt: Vec<BBox> = tp.iter().map(|&i| gts[i]).collect();

            let key = |m: &FrameMatching, dmap: &dyn Fn(usize) -> usize, tmap: &dyn Fn(usize) -> usize| {
                let mut v: Vec<(usize, usize)> = m.pairs.iter().map(|p| (dmap(p.0), tmap(p.1))).collect();
                v.sort_unstable();
                v
            };
            let orig = key(&match_frame(&dets, &gts), &|i| i, &|i| i);
            let perm = key(&match_frame(&pd, &pt), &|i| dp[i], &|i| tp[i]);
            prop_assert_eq!(orig, perm);
        }

        #[test]
        fn tracks_partition_boxes(
            frames in proptest::collection::vec(arb_boxes(5), 1..30),
            link in 0.05..1.0f64,
            gap in 0u64..4,
        ) {
            let s = DetectionStream::from_frames(frames);
            let tracks = build_tracks(&s, link, gap).unwrap();
            let total: usize = tracks.iter().map(Track::len).sum();
            prop_assert_eq!(total, s.box_count());
            for t in &tracks {
                prop_assert!(t.entries.values().all(|e| e.1 == Provenance::Detected));
            }
        }
    }
}

//! Linking per-frame boxes into tracks, and one-to-one matching within a frame.

use vidanon::association::{build_tracks, match_frame};
use vidanon::{BBox, DetectionStream};

fn main() {
    // Two faces; the left one is missed at frame 2, the right one at frame 3.
    let left = |x: f64| BBox::new(x, 100.0, 60.0, 70.0);
    let right = |x: f64| BBox::new(x, 90.0, 55.0, 65.0);
    let s = DetectionStream::from_frames(vec![
        vec![left(100.0), right(600.0)],
        vec![left(104.0), right(596.0)],
        vec![right(592.0)],
        vec![left(112.0)],
        vec![left(116.0), right(584.0)],
    ]);

    let tracks = build_tracks(&s, 0.3, 2).expect("valid linking parameters");
    for t in &tracks {
        let holes: Vec<u64> = t.holes().collect();
        println!(
            "track {}: frames {}..={}, {} boxes, holes {holes:?}",
            t.id,
            t.first_frame(),
            t.last_frame(),
            t.len()
        );
    }

    let m = match_frame(
        &[left(101.0), BBox::new(0.0, 0.0, 5.0, 5.0)],
        &[left(100.0), right(600.0)],
    );
    println!("\nframe matching:");
    for (d, g, v) in &m.pairs {
        println!("  detection {d} <-> truth {g}  iou {v:.3}");
    }
    println!(
        "  unmatched detections {:?}, unmatched truths {:?}",
        m.unmatched_detections, m.unmatched_truths
    );
}

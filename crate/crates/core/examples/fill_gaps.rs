//! The sliding-average smoother: fill frames where a track lost its face.

use vidanon::smoother::{smooth, strip_synthesized, SmootherConfig};
use vidanon::{BBox, DetectionStream};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let face = |x: f64| BBox::new(x, 50.0, 40.0, 40.0).with_score(0.9);
    // missed at frame 2 (one frame) and frames 5-6 (two frames)
    let s = DetectionStream::from_frames(vec![
        vec![face(10.0)],
        vec![face(12.0)],
        vec![],
        vec![face(16.0)],
        vec![face(18.0)],
        vec![],
        vec![],
        vec![face(24.0)],
    ]);

    for k in [3, 5] {
        let cfg = SmootherConfig::new(k)?;
        let out = smooth(&s, &cfg);
        println!("k={k}: inserted {} box(es)", out.synthesized_count());
        for r in out.records() {
            for d in r.boxes.iter().filter(|d| d.is_synthesized()) {
                println!(
                    "  frame {}: x={:.2} score={:?}",
                    r.frame, d.bbox.x, d.bbox.score
                );
            }
        }
        assert_eq!(strip_synthesized(&out), s);
    }

    // A two-frame gap under k=3: each missing frame sees support on one side
    // only, so it is filled only when one-sided support is allowed.
    let edge = DetectionStream::from_frames(vec![
        vec![face(0.0)],
        vec![face(2.0)],
        vec![],
        vec![],
        vec![face(8.0)],
    ]);
    let cfg = SmootherConfig::new(3)?;
    println!(
        "two-frame gap, k=3: {} fill(s) bilateral, {} unilateral",
        smooth(&edge, &cfg).synthesized_count(),
        smooth(&edge, &cfg.unilateral()).synthesized_count()
    );

    println!(
        "SmootherConfig::new(4) -> {}",
        SmootherConfig::new(4).unwrap_err()
    );
    Ok(())
}

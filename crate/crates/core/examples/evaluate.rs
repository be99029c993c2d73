//! Scoring detections against ground truth with the four activation cases.

use vidanon::evaluation::{count_activations, prf, StreamMatching};
use vidanon::{BBox, DetectionStream};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sq = |x: f64| BBox::new(x, 0.0, 10.0, 10.0);
    let gt = DetectionStream::from_frames(vec![
        vec![sq(0.0)], // hit
        vec![sq(0.0)], // missed
        vec![],        // spurious detection
        vec![sq(0.0)], // loose box: iou 1/3
    ]);
    let dets =
        DetectionStream::from_frames(vec![vec![sq(0.5)], vec![], vec![sq(40.0)], vec![sq(5.0)]]);

    let cases = StreamMatching::compute(&dets, &gt).cases_at(0.5);
    println!("at t=0.5: {cases:?}");

    for t in [0.3, 0.5] {
        let c = count_activations(&dets, &gt, t)?;
        let r = prf(&c, t);
        println!(
            "t={t}: tp={} fp={} fn={}  precision={:.4} recall={:.4} f1={:.4}",
            c.tp, c.fp, c.fn_, r.precision, r.recall, r.f1
        );
    }
    Ok(())
}

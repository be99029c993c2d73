//! Precision and recall across IoU thresholds, written as CSV.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vidanon::evaluation::{emit_report, parse_threshold_range, sweep_points};
use vidanon::{BBox, DetectionStream};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Detections that find every face but localise it loosely.
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (mut gts, mut dets) = (Vec::new(), Vec::new());
    for _ in 0..200 {
        let g = BBox::new(
            rng.gen_range(0.0..500.0),
            rng.gen_range(0.0..300.0),
            60.0,
            70.0,
        );
        let shift = rng.gen_range(0.0..0.35);
        dets.push(vec![BBox::new(
            g.x + shift * g.w,
            g.y,
            g.w * rng.gen_range(0.9..1.2),
            g.h,
        )]);
        gts.push(vec![g]);
    }
    let (dets, gts) = (
        DetectionStream::from_frames(dets),
        DetectionStream::from_frames(gts),
    );

    let ts = parse_threshold_range("0.1:0.9:0.1")?;
    let pts = sweep_points(&dets, &gts, &ts)?;
    let reports: Vec<_> = pts.iter().map(|p| p.report).collect();
    let counts: Vec<_> = pts.iter().map(|p| p.counts).collect();
    print!("{}", emit_report(&reports, &counts)?);
    Ok(())
}

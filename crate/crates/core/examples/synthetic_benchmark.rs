//! A synthetic benchmark: known ground truth, degraded detections, and a drop
//! log, then how much smoothing recovers at each kernel size.

use vidanon::evaluation::{count_activations, prf};
use vidanon::smoother::{smooth, SmootherConfig};
use vidanon::synth::{generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SynthConfig {
        seed: 1,
        drop_rate: 0.15,
        fp_rate: 0.5,
        fp_persistence: 0.95,
        jitter: 1.0,
        ..SynthConfig::default()
    };
    let out = generate(&cfg)?;
    println!(
        "{} true boxes, {} dropped ({} with a detection on both sides), {} false positives",
        out.gt.box_count(),
        out.log.len(),
        out.log.bilateral_count(),
        out.injected_fps
    );

    let score =
        |label: &str, s: &vidanon::DetectionStream| -> Result<(), Box<dyn std::error::Error>> {
            let r = prf(&count_activations(s, &out.gt, 0.3)?, 0.3);
            println!(
                "{label:<8} precision {:.4}  recall {:.4}  f1 {:.4}",
                r.precision, r.recall, r.f1
            );
            Ok(())
        };
    score("raw", &out.degraded)?;
    for k in [3, 5, 7] {
        score(
            &format!("k={k}"),
            &smooth(&out.degraded, &SmootherConfig::new(k)?),
        )?;
    }
    Ok(())
}

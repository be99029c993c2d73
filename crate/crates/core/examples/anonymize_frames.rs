//! Redacting faces in a directory of PPM frames.
//!
//!     cargo run --example anonymize_frames -- [out_dir]

use std::path::PathBuf;

use vidanon::anonymizer::{anonymize_video, frame_file_name, AnonymizeConfig, RedactMode};
use vidanon::image::FrameImage;
use vidanon::{BBox, DetectionStream};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("vidanon-demo"));
    let (frames_dir, out_dir) = (root.join("frames"), root.join("redacted"));
    std::fs::create_dir_all(&frames_dir)?;

    // A diagonal colour ramp so the redaction is visible.
    for f in 0..4u32 {
        let mut img = FrameImage::filled(160, 120, [0, 0, 0]);
        for y in 0..120 {
            for x in 0..160 {
                img.set_pixel(
                    x,
                    y,
                    [(x + f * 10) as u8, (y * 2) as u8, ((x + y) / 2) as u8],
                );
            }
        }
        img.write_ppm(frames_dir.join(frame_file_name(f.into())))?;
    }
    let face = |x: f64| BBox::new(x, 30.0, 40.0, 48.0);
    let dets = DetectionStream::from_frames(vec![
        vec![face(20.0)],
        vec![face(26.0), face(100.0)],
        vec![],
        vec![face(38.0)],
    ]);

    let pixelate = AnonymizeConfig::default();
    let summary = anonymize_video(&frames_dir, &dets, &pixelate, &out_dir)?;
    println!("pixelate: {}", summary.to_json_line());

    let blur = AnonymizeConfig {
        mode: RedactMode::BoxBlur {
            radius: 6,
            passes: 3,
        },
        ..pixelate
    };
    let summary = anonymize_video(&frames_dir, &dets, &blur, &root.join("blurred"))?;
    println!("blur:     {}", summary.to_json_line());
    println!("frames written under {}", root.display());
    Ok(())
}

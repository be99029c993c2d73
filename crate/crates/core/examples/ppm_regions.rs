//! The P6 codec and the two region filters on an in-memory image.

use vidanon::anonymizer::{blur_region, pixelate_region};
use vidanon::image::FrameImage;
use vidanon::BBox;

fn distinct_reds(img: &FrameImage, r: &BBox) -> usize {
    let mut seen = std::collections::BTreeSet::new();
    for y in r.y as u32..r.bottom() as u32 {
        for x in r.x as u32..r.right() as u32 {
            seen.insert(img.pixel(x, y)[0]);
        }
    }
    seen.len()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut img = FrameImage::filled(64, 64, [0, 0, 0]);
    for y in 0..64 {
        for x in 0..64 {
            img.set_pixel(x, y, [(x * 4) as u8, (y * 4) as u8, 128]);
        }
    }
    let bytes = img.encode_ppm();
    println!(
        "encoded {} bytes, header {:?}",
        bytes.len(),
        String::from_utf8_lossy(&bytes[..13])
    );
    let back = FrameImage::decode_ppm(&bytes)?;
    assert_eq!(back, img);

    let region = BBox::new(8.0, 8.0, 32.0, 32.0);
    println!(
        "distinct red values in region: {}",
        distinct_reds(&img, &region)
    );

    let mut pix = img.clone();
    pixelate_region(&mut pix, &region, 8);
    println!(
        "after 8px pixelation:          {}",
        distinct_reds(&pix, &region)
    );

    let mut blur = img.clone();
    blur_region(&mut blur, &region, 4, 2);
    println!(
        "after radius-4 box blur:       {}",
        distinct_reds(&blur, &region)
    );

    println!(
        "pixel outside region untouched: {}",
        pix.pixel(50, 50) == img.pixel(50, 50)
    );

    match FrameImage::decode_ppm(b"P3\n1 1\n255\n0 0 0\n") {
        Ok(_) => unreachable!(),
        Err(e) => println!("P3 input rejected: {e}"),
    }
    Ok(())
}

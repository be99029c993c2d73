//! Box arithmetic: IoU, averaging, and the margin used before redaction.

use vidanon::geometry::{average_boxes, expand_and_clip, iou, BBox};

fn main() {
    let a = BBox::new(0.0, 0.0, 10.0, 10.0);
    let b = BBox::new(5.0, 0.0, 10.0, 10.0);
    println!("iou(a, b)          = {:.4}", iou(&a, &b));
    println!("iou(a, a)          = {}", iou(&a, &a));
    println!(
        "iou(a, far away)   = {}",
        iou(&a, &BBox::new(100.0, 100.0, 5.0, 5.0))
    );

    let mid = average_boxes(&[a, b]).expect("nonempty");
    println!("average(a, b)      = {mid:?}");

    // 10% margin on each side, clipped to a 12x12 frame
    let grown = expand_and_clip(&b, 0.1, 12, 12);
    println!("expand_and_clip(b) = {grown:?}");
}

//! Greedy non-maximum suppression over scored proposals.

use vidanon::geometry::BBox;
use vidanon::rpn::{nms, nms_indices, NMS_IOU, NMS_POST_TOP, NMS_PRE_TOP};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let boxes = [
        BBox::new(10.0, 10.0, 50.0, 50.0).with_score(0.95),
        BBox::new(12.0, 11.0, 50.0, 50.0).with_score(0.90), // near-duplicate of 0
        BBox::new(200.0, 40.0, 40.0, 40.0).with_score(0.80),
        BBox::new(20.0, 20.0, 50.0, 50.0).with_score(0.75), // iou 0.47 with 0
        BBox::new(205.0, 42.0, 40.0, 40.0).with_score(0.60), // near-duplicate of 2
    ];
    for thresh in [0.3, NMS_IOU] {
        let kept = nms_indices(&boxes, thresh, NMS_PRE_TOP, NMS_POST_TOP)?;
        println!("threshold {thresh}: keep {kept:?}");
    }
    let top = nms(&boxes, NMS_IOU, NMS_PRE_TOP, 1)?;
    println!("best proposal: {:?}", top[0]);
    Ok(())
}

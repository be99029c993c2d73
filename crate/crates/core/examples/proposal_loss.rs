//! Proposal-network training math: anchors, labels, minibatch, and the loss.

use vidanon::geometry::BBox;
use vidanon::rpn::{
    assign_labels, decode_box, encode_box, generate_anchors, rpn_loss, sample_minibatch,
    AnchorLabel, ClassScores, RpnBatch, NEGATIVE_IOU, POSITIVE_IOU, SAMPLES_PER_CLASS,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = generate_anchors(320, 240, 16, &[32.0, 64.0, 128.0], &[0.5, 1.0, 2.0])?;
    println!(
        "{} anchors on a {}x{} grid",
        grid.anchors.len(),
        grid.cells_x(),
        grid.cells_y()
    );

    let faces = [
        BBox::new(40.0, 30.0, 50.0, 60.0),
        BBox::new(200.0, 120.0, 70.0, 70.0),
    ];
    let labels = assign_labels(&grid, &faces, POSITIVE_IOU, NEGATIVE_IOU)?;
    let count = |l| labels.iter().filter(|&&x| x == l).count();
    println!(
        "labels: {} positive, {} negative, {} ignored",
        count(AnchorLabel::Positive),
        count(AnchorLabel::Negative),
        count(AnchorLabel::Ignore)
    );

    let mb = sample_minibatch(&labels, SAMPLES_PER_CLASS, 7)?;
    println!(
        "minibatch: {} positives, {} negatives",
        mb.positives(),
        mb.negatives()
    );

    let t = encode_box(&grid.anchors[mb.indices[0]], &faces[0])?;
    println!(
        "encode/decode: {:?} -> {:?}",
        t,
        decode_box(&grid.anchors[mb.indices[0]], &t)
    );

    // An untrained network: even scores, zero regression.
    let untrained = RpnBatch::assemble(&grid, &faces, &labels, &mb, |_| {
        (ClassScores::Logits([0.0, 0.0]), [0.0; 4])
    })?;
    let loss = rpn_loss(&untrained)?;
    println!(
        "untrained: total {:.4} (cls {:.4}, reg {:.4})",
        loss.total, loss.cls_term, loss.reg_term
    );

    // A perfect one: confident and exact.
    let perfect = RpnBatch::assemble(&grid, &faces, &labels, &mb, |i| {
        let pos = labels[i] == AnchorLabel::Positive;
        let target = faces
            .iter()
            .max_by(|a, b| grid.anchors[i].iou(a).total_cmp(&grid.anchors[i].iou(b)))
            .unwrap();
        let t = if pos {
            encode_box(&grid.anchors[i], target).unwrap()
        } else {
            [0.0; 4]
        };
        (
            ClassScores::Probabilities(if pos { [0.0, 1.0] } else { [1.0, 0.0] }),
            t,
        )
    })?;
    println!("perfect:   total {}", rpn_loss(&perfect)?.total);
    Ok(())
}

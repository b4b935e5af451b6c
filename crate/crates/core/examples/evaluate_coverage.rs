//! Coverage and adjusted coverage on a small hand-made case.
//!
//! One building appears in 10 frames. The prediction holds its mask in 6 of
//! them; in 2 frames the detector found nothing usable.

use masklift::evaluation::{evaluate, GtBox};
use masklift::masks::{BBox, DetectionSet, ImageDetections, InstanceMask};
use masklift::predictions::{PredictedInstance, PredictionFile};

fn square(x0: u32) -> InstanceMask {
    let bits: Vec<bool> = (0..40 * 10).map(|i| (x0..x0 + 5).contains(&(i % 40)) && i / 40 < 5).collect();
    InstanceMask::from_bitmap(0, "building", 0.9, 40, 10, &bits).unwrap()
}

fn main() -> masklift::error::Result<()> {
    let mut dets = DetectionSet::default();
    let mut gt = Vec::new();
    let mut masks = Vec::new();
    for f in 0..10 {
        let name = format!("frame_{f:02}.jpg");
        // the last two frames only have a mask somewhere else
        let x0 = if f < 8 { 0 } else { 20 };
        dets.images.insert(name.clone(), ImageDetections { width: 40, height: 10, masks: vec![square(x0)] });
        gt.push(GtBox { frame: name.clone(), gt_id: 1, bbox: BBox::new(0.0, 0.0, 4.0, 4.0) });
        if f < 6 {
            masks.push((name, 0));
        }
    }
    let preds =
        PredictionFile { instances: vec![PredictedInstance { id: 0, masks, num_points: 0 }], ..Default::default() };
    let report = evaluate(&preds, &dets, &gt, 0.5)?;
    print!("{}", report.to_table());
    Ok(())
}

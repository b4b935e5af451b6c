use std::fmt::Write as _;

use masklift::baseline::{track_detections, tracks_to_predictions};
use masklift::evaluation::{evaluate, parse_gt, GtBox};
use masklift::masks::{BBox, DetectionSet, ImageDetections, InstanceMask};

fn block(w: u32, h: u32) -> InstanceMask {
    let bits: Vec<bool> = (0..w * h).map(|i| i % w < 8 && i / w < 8).collect();
    InstanceMask::from_bitmap(0, "building", 0.9, w, h, &bits).unwrap()
}

#[test]
fn sequence_local_tracker_is_capped_by_longest_sequence() {
    // 8 sequences of 5 frames, one static building in every frame
    let mut dets = DetectionSet::default();
    let mut gt = Vec::new();
    let mut order = Vec::new();
    for s in 0..8 {
        let mut seq = Vec::new();
        for f in 0..5 {
            let name = format!("s{s}_f{f}.jpg");
            dets.images.insert(name.clone(), ImageDetections { width: 16, height: 16, masks: vec![block(16, 16)] });
            gt.push(GtBox { frame: name.clone(), gt_id: 0, bbox: BBox::new(0.0, 0.0, 7.0, 7.0) });
            seq.push(name);
        }
        order.push(seq);
    }
    let tracks = track_detections(&dets, &order, 0.5).unwrap();
    assert_eq!(tracks.len(), 8);
    let report = evaluate(&tracks_to_predictions(&tracks), &dets, &gt, 0.5).unwrap();
    assert_eq!(report.per_instance[0].coverage, 0.125);
    assert_eq!(report.per_instance[0].adjusted_coverage, 0.125);

    // one track over every frame is perfect
    let all: Vec<Vec<String>> = vec![order.concat()];
    let tracks = track_detections(&dets, &all, 0.5).unwrap();
    let report = evaluate(&tracks_to_predictions(&tracks), &dets, &gt, 0.5).unwrap();
    assert_eq!((report.mean_coverage, report.mean_adjusted_coverage), (1.0, 1.0));
}

#[test]
fn large_gt_file_shape() {
    let mut csv = String::from("frame,gt_id,x_min,y_min,x_max,y_max\n");
    for row in 0..1503 {
        let _ = writeln!(csv, "frame_{:04}.jpg,{},10,20,{},{}", row / 30, row % 30, 30 + row % 7, 40 + row % 5);
    }
    let boxes = parse_gt(&csv).unwrap();
    assert_eq!(boxes.len(), 1503);
    let ids: std::collections::BTreeSet<u64> = boxes.iter().map(|b| b.gt_id).collect();
    assert_eq!(ids.len(), 30);
}

#[test]
fn empty_detections_are_vacuous() {
    let gt = vec![
        GtBox { frame: "a.jpg".into(), gt_id: 1, bbox: BBox::new(0.0, 0.0, 3.0, 3.0) },
        GtBox { frame: "b.jpg".into(), gt_id: 1, bbox: BBox::new(0.0, 0.0, 3.0, 3.0) },
    ];
    let report = evaluate(&Default::default(), &DetectionSet::default(), &gt, 0.5).unwrap();
    let s = &report.per_instance[0];
    assert_eq!((s.missed_seg_frames, s.coverage, s.adjusted_coverage, s.vacuous), (2, 0.0, 1.0, true));
    assert_eq!(report.warnings.len(), 3);
}

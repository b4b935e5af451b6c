//! One building seen from two groups of sequences that share only part of
//! its facade. Clustering alone yields two instances for it; the merge stage
//! joins them.

use masklift::association::{build_supports, cluster_masks, jaccard, merge_instances};
use masklift::synth::{generate, SceneSpec, SplitSpec};

fn main() -> masklift::error::Result<()> {
    let spec =
        SceneSpec { split_building: Some(SplitSpec { building: 4, shared_fraction: 0.3 }), ..Default::default() };
    let scene = generate(&spec)?;
    let supports = build_supports(&scene.recon, &scene.detections);

    let clusters = cluster_masks(&supports, 0.20);
    println!("after clustering: {} instances", clusters.len());
    let mut best = (0.0, 0, 0);
    for (i, a) in clusters.iter().enumerate() {
        for b in &clusters[i + 1..] {
            let j = jaccard(&a.points, &b.points);
            if j > best.0 {
                best = (j, a.instance_id, b.instance_id);
            }
        }
    }
    println!("most similar pair: {} and {} with Jaccard {:.3}", best.1, best.2, best.0);

    let merged = merge_instances(&clusters, 0.15);
    println!("after merging at 0.15: {} instances", merged.len());
    println!("after merging at 0.20: {} instances", merge_instances(&clusters, 0.20).len());
    Ok(())
}

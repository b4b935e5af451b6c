//! Label accuracy as more keypoints are linked to points of the wrong building.

use masklift::association::{associate, AssociationConfig};
use masklift::synth::{generate, SceneSpec};

fn main() -> masklift::error::Result<()> {
    println!("{:>6} {:>10} {:>9}", "rate", "instances", "accuracy");
    for rate in [0.0, 0.02, 0.05, 0.1, 0.15, 0.2, 0.3] {
        let scene = generate(&SceneSpec { wrong_track_rate: rate, keypoint_noise_sigma: 1.0, ..Default::default() })?;
        let result = associate(&scene.recon, &scene.detections, &AssociationConfig::default())?;
        println!(
            "{rate:>6.2} {:>10} {:>9.4}",
            result.instances.len(),
            scene.truth.label_accuracy(&result, &scene.recon)
        );
    }
    Ok(())
}

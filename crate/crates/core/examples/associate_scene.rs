//! Full association on a synthetic scene, checked against its ground truth.
//!
//! cargo run --release --example associate_scene -- [noise_sigma] [wrong_track_rate]

use masklift::association::{associate, AssociationConfig};
use masklift::synth::{generate, SceneSpec};

fn main() -> masklift::error::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<f64>().expect("numeric argument"));
    let sigma = args.next().unwrap_or(0.0);
    let wrong = args.next().unwrap_or(0.0);
    let spec = SceneSpec { keypoint_noise_sigma: sigma, wrong_track_rate: wrong, ..Default::default() };
    let scene = generate(&spec)?;

    let t = std::time::Instant::now();
    let result = associate(&scene.recon, &scene.detections, &AssociationConfig::default())?;
    println!("associated {} masks in {:?}", scene.detections.num_masks(), t.elapsed());

    let buildings = scene.truth.instance_buildings(&result, &scene.recon);
    for b in &result.instances {
        println!(
            "instance {:2}: {:3} masks, {:4} points -> building {}",
            b.instance_id,
            b.members.len(),
            b.points.len(),
            buildings[&b.instance_id]
        );
    }
    println!("unassigned masks: {}", result.unassigned_masks.len());
    println!("label accuracy: {:.4}", scene.truth.label_accuracy(&result, &scene.recon));
    let diffs = scene.truth.partition_mismatches(&result, &scene.recon);
    println!("exact partition: {}", diffs.is_empty());
    Ok(())
}

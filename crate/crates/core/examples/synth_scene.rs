//! Generates a synthetic street scene and writes it to disk.
//!
//! cargo run --example synth_scene -- [out_dir] [seed]

use masklift::synth::{generate, write_scene, SceneSpec};

fn main() -> masklift::error::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "scene".into());
    let seed = args.next().map_or(0, |s| s.parse().expect("seed must be an integer"));

    let spec = SceneSpec { rng_seed: seed, keypoint_noise_sigma: 0.5, ..Default::default() };
    let scene = generate(&spec)?;
    write_scene(&scene, &out)?;

    println!(
        "{} images, {} points, {} masks",
        scene.recon.images.len(),
        scene.recon.points3d.len(),
        scene.detections.num_masks()
    );
    for (s, names) in scene.truth.sequences.iter().enumerate() {
        println!("sequence {s}: {} .. {} ({} frames)", names[0], names[names.len() - 1], names.len());
    }
    println!("written to {out}/");
    Ok(())
}

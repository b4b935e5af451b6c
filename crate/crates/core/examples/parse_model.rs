//! Reads a COLMAP text model and reports its size and consistency.
//!
//! cargo run --example parse_model -- path/to/model
//!
//! Without an argument a small synthetic model is written to a temp dir first.

use masklift::colmap::{parse_model, parse_points, validate, write_model, Reconstruction};
use masklift::synth::{generate, SceneSpec};

fn main() -> masklift::error::Result<()> {
    let dir = match std::env::args().nth(1) {
        Some(d) => d.into(),
        None => {
            let dir = std::env::temp_dir().join("masklift-parse-example");
            let scene = generate(&SceneSpec { num_buildings: 3, num_frames: 12, ..Default::default() })?;
            write_model(&scene.recon, &dir)?;
            dir
        }
    };
    let recon: Reconstruction = parse_model(&dir)?;
    let linked: usize =
        recon.images.values().map(|i| i.keypoints.iter().filter(|k| k.point3d_id.is_some()).count()).sum();
    let total: usize = recon.images.values().map(|i| i.keypoints.len()).sum();
    println!("{}: {} images, {} points", dir.display(), recon.images.len(), recon.points3d.len());
    println!("keypoints: {total}, with a 3D point: {linked}");
    println!("mean track length: {:.2}", recon.num_observations() as f64 / recon.points3d.len().max(1) as f64);
    println!("violations: {}", validate(&recon).len());

    // errors carry file and line
    let bad = "# header\n1 0.5 0.5 0.5 10 20 30 0.1 1 0\n2 oops 0 0 1 2 3 0.1\n";
    if let Err(e) = parse_points(bad, "points3D.txt") {
        println!("corrupt input: {e}");
    }
    Ok(())
}

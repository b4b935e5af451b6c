//! Writes labeled point clouds: palette colors per instance, and one
//! instance highlighted in red over the original colors.
//!
//! cargo run --example export_ply -- [out_dir]

use masklift::association::{associate, AssociationConfig};
use masklift::export::{export_ply, export_tracks, ColorMode};
use masklift::synth::{generate, SceneSpec};

fn main() -> masklift::error::Result<()> {
    let out = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "ply-out".into()));
    std::fs::create_dir_all(&out).map_err(|e| masklift::error::Error::io(&out, e))?;

    let scene = generate(&SceneSpec { num_buildings: 5, ..Default::default() })?;
    let result = associate(&scene.recon, &scene.detections, &AssociationConfig::default())?;

    export_ply(&scene.recon, &result, out.join("instances.ply"), ColorMode::InstancePalette)?;
    export_ply(&scene.recon, &result, out.join("building_2.ply"), ColorMode::SingleInstance(2))?;
    export_tracks(&result.to_predictions(&scene.recon), &scene.detections, out.join("tracks.json"))?;
    println!(
        "{} points, {} labeled, written to {}/",
        scene.recon.points3d.len(),
        result.point_labels.len(),
        out.display()
    );
    Ok(())
}

//! Builds a POM from a short prior trajectory past two cars and writes the
//! sample file.
//!
//! Usage: `cargo run --example build_pom [out_dir]`

use std::path::PathBuf;

use pomloc::builder::{build_samples, BuilderConfig, PriorDetection, PriorTrajectoryNode};
use pomloc::{io, MapParams, ObjectMap, Pose2};

fn main() -> pomloc::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/example_out/build_pom".into())
        .into();
    let cars = [Pose2::new(3.0, 2.5, 1.57), Pose2::new(6.0, 2.5, 1.57)];

    let nodes: Vec<PriorTrajectoryNode> = (0..10)
        .map(|i| {
            let pose = Pose2::new(i as f64, 0.0, 0.0);
            let detections = cars
                .iter()
                .filter(|c| c.distance(&pose) < 5.0)
                .map(|c| PriorDetection {
                    pose: pose.between(c),
                    variance: 0.25,
                })
                .collect();
            PriorTrajectoryNode {
                id: i,
                pose,
                detections,
                free_space_radius: 4.0,
            }
        })
        .collect();

    let cfg = BuilderConfig {
        off_detection_samples_per_node: 6,
        ..BuilderConfig::default()
    };
    let samples = build_samples(&nodes, &cfg)?;
    let positive = samples.iter().filter(|s| s.value > 0.0).count();
    println!("{} samples, {positive} with positive latent value", samples.len());

    let path = io::pom_path(&out, "car");
    io::write_text(&path, &io::format_pom_samples("car", &samples))?;
    println!("wrote {}", path.display());

    let (_, loaded) = io::read_pom_file(&path)?;
    let map = ObjectMap::with_samples("car", MapParams::default(), loaded)?;
    for probe in [
        cars[0],
        Pose2::new(4.5, 2.5, 1.57),
        Pose2::new(3.0, 2.5, 0.0),
        Pose2::new(3.0, -3.0, 1.57),
    ] {
        println!("p at {probe}: {:.3}", map.evaluate(&probe)?);
    }
    Ok(())
}

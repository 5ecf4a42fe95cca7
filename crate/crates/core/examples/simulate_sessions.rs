//! Samples parking configurations and simulates drives through them with
//! noisy odometry and detections.

use pomloc::experiments::{dead_reckoned_trajectory, lot_session, ConsistencyConfig};
use pomloc::sim::{self, SensorModel, SessionConfig, SpotLayout};
use pomloc::{metrics, Pose2};

fn main() -> pomloc::Result<()> {
    let layout = SpotLayout::default_lot(0.5);
    for seed in 0..3 {
        let cars = sim::sample_configuration(&SessionConfig {
            layout: layout.clone(),
            placement_noise_std: 0.3,
            rng_seed: seed,
        })?;
        println!("configuration {seed}: {} of {} spots occupied", cars.len(), layout.spots.len());
    }

    // A straight drive past a row of objects.
    let route = [Pose2::new(0.0, 0.0, 0.0), Pose2::new(30.0, 0.0, 0.0)];
    let objects: Vec<sim::SceneObject> = (0..6)
        .map(|k| sim::SceneObject {
            pose: Pose2::new(4.0 + 5.0 * k as f64, 3.0, -1.57),
            class_label: "car".into(),
        })
        .collect();
    let sensor = SensorModel::default();
    let s = sim::simulate_session(&route, &objects, &sensor, 5)?;
    println!(
        "\nstraight drive: {} nodes, {} detections of {} objects, dead-reckoning ATE {:.3} m",
        s.ground_truth_poses.len(),
        s.detections.len(),
        s.observed_objects().len(),
        metrics::ate(&dead_reckoned_trajectory(&s), &s.ground_truth_poses, false)?
    );

    // Lot drives share waypoints even though their routes are jittered.
    let cfg = ConsistencyConfig::default();
    println!("\nlot sessions (waypoint 5 ground truth):");
    for k in 0..3u64 {
        let s = lot_session(&cfg, 100 + k, 200 + k, &cfg.sensor)?;
        let w = s.ground_truth_poses[s.waypoint_indices[5]];
        println!(
            "  session {k}: {} nodes, {} cars, waypoint 5 at {w}",
            s.ground_truth_poses.len(),
            s.objects.len()
        );
    }
    Ok(())
}

//! Localizes a drive through a re-parked lot, then folds its detections back
//! into the map at the optimized poses.

use std::collections::BTreeMap;

use pomloc::builder::{self, PriorDetection, PriorTrajectoryNode};
use pomloc::experiments::{bootstrap_lot_map, localize_session, lot_study_session, ConsistencyConfig, OBJECT_CLASS};
use pomloc::localizer::IncrementalOptions;
use pomloc::{metrics, ObjectMap, Pose2};

fn mean_likelihood(map: &ObjectMap, poses: &[Pose2]) -> pomloc::Result<f64> {
    let mut sum = 0.0;
    for p in poses {
        sum += map.evaluate(p)?;
    }
    Ok(sum / poses.len() as f64)
}

fn main() -> pomloc::Result<()> {
    let cfg = ConsistencyConfig {
        bootstrap_configurations: 2,
        incremental: IncrementalOptions {
            final_batch: false,
            ..ConsistencyConfig::default().incremental
        },
        ..ConsistencyConfig::default()
    };
    let map = bootstrap_lot_map(&cfg)?;
    let session = lot_study_session(&cfg, 0)?;
    let cars: Vec<Pose2> = session.observed_objects().iter().map(|&i| session.objects[i].pose).collect();

    let maps = BTreeMap::from([(OBJECT_CLASS.to_string(), map)]);
    let mut estimate = vec![session.anchor()];
    estimate.extend(localize_session(&session, &maps, &cfg.optimizer, &cfg.incremental)?);
    println!("session ATE {:.3} m", metrics::ate(&estimate, &session.ground_truth_poses, false)?);

    let nodes: Vec<PriorTrajectoryNode> = estimate
        .iter()
        .enumerate()
        .step_by(cfg.prior_node_stride)
        .map(|(i, pose)| PriorTrajectoryNode {
            id: 1 << 40 | i as u64,
            pose: *pose,
            detections: session
                .detections
                .iter()
                .filter(|d| d.node_index == i)
                .map(|d| PriorDetection {
                    pose: d.relative_pose,
                    variance: cfg.sensor.prior_detection_variance,
                })
                .collect(),
            free_space_radius: cfg.free_space_radius,
        })
        .collect();

    let mut map = maps.into_values().next().expect("one map");
    let before = (map.len(), mean_likelihood(&map, &cars)?);
    builder::update_map(&mut map, &nodes, &cfg.builder)?;
    let after = (map.len(), mean_likelihood(&map, &cars)?);
    println!("{} cars seen this session", cars.len());
    println!("before update: {:5} samples, mean p at those cars {:.3}", before.0, before.1);
    println!("after update:  {:5} samples, mean p at those cars {:.3}", after.0, after.1);
    Ok(())
}

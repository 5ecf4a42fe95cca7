//! Localizes one simulated drive against a map built from exact prior
//! detections, first in one batch and then with the sliding window.

use std::collections::BTreeMap;
use std::time::Instant;

use pomloc::builder::{build_samples, BuilderConfig};
use pomloc::experiments::{dead_reckoned_trajectory, sweep_session, SweepConfig, OBJECT_CLASS};
use pomloc::localizer::{localize_incremental, optimize, IncrementalOptions, Problem};
use pomloc::metrics::ate;
use pomloc::sim::PriorCorrectness;
use pomloc::ObjectMap;

fn main() -> pomloc::Result<()> {
    let cfg = SweepConfig {
        nodes: 120,
        objects: 24,
        ..SweepConfig::default()
    };
    let (session, prior) = sweep_session(&cfg, 7, PriorCorrectness::Exact)?;
    let samples = build_samples(
        &prior.nodes,
        &BuilderConfig {
            rng_seed: 7,
            ..cfg.builder.clone()
        },
    )?;
    let map = ObjectMap::with_samples(OBJECT_CLASS, cfg.map.clone(), samples)?;
    println!(
        "{} poses, {} detections, {} map samples",
        session.ground_truth_poses.len(),
        session.detections.len(),
        map.len()
    );

    let anchor = session.anchor();
    let problem = Problem::new(
        anchor,
        Problem::dead_reckoning(&anchor, &session.odometry),
        session.odometry.clone(),
        session.detections.clone(),
        BTreeMap::from([(OBJECT_CLASS.to_string(), map)]),
        cfg.optimizer.clone(),
    )?;

    let truth = &session.ground_truth_poses;
    let with_anchor = |poses: &[pomloc::Pose2]| {
        let mut t = vec![anchor];
        t.extend_from_slice(poses);
        t
    };
    println!(
        "dead reckoning    ATE {:.3} m",
        ate(&dead_reckoned_trajectory(&session), truth, false)?
    );

    let start = Instant::now();
    let batch = optimize(&problem)?;
    println!(
        "batch             ATE {:.3} m  ({} iterations, {:?}, {:.1} s)",
        ate(&with_anchor(&batch.poses), truth, false)?,
        batch.iterations.len() - 1,
        batch.termination,
        start.elapsed().as_secs_f64()
    );

    let start = Instant::now();
    let inc = IncrementalOptions {
        window: 30,
        step: 10,
        final_batch: false,
    };
    let windowed = localize_incremental(&problem, &inc)?;
    println!(
        "sliding window    ATE {:.3} m  ({:.1} s)",
        ate(&with_anchor(&windowed.poses), truth, false)?,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

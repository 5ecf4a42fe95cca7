//! The two synthetic studies: a sweep over how correct the map prior is, and
//! the multi-session waypoint-consistency study over a parking lot.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::builder::{self, BuilderConfig, PriorTrajectoryNode};
use crate::error::Result;
use crate::localizer::{localize_incremental, IncrementalOptions, OptimizerOptions, Problem};
use crate::map::{MapParams, ObjectMap};
use crate::metrics::{self, Deviation, WaypointEstimates};
use crate::rng;
use crate::se2::Pose2;
use crate::sim::{self, Bounds, PriorCorrectness, SceneObject, SensorModel, SessionConfig, SimulatedSession, SpotLayout, XyPomInputs};

pub const OBJECT_CLASS: &str = "car";

/// Localizes a session against `maps`, starting from dead reckoning.
pub fn localize_session(
    session: &SimulatedSession,
    maps: &BTreeMap<String, ObjectMap>,
    options: &OptimizerOptions,
    inc: &IncrementalOptions,
) -> Result<Vec<Pose2>> {
    let init = Problem::dead_reckoning(&session.anchor(), &session.odometry);
    let problem = Problem::new(
        session.anchor(),
        init,
        session.odometry.clone(),
        session.detections.clone(),
        maps.clone(),
        options.clone(),
    )?;
    Ok(localize_incremental(&problem, inc)?.poses)
}

/// Full estimated trajectory (anchor included) from dead reckoning.
pub fn dead_reckoned_trajectory(session: &SimulatedSession) -> Vec<Pose2> {
    let mut t = vec![session.anchor()];
    t.extend(Problem::dead_reckoning(&session.anchor(), &session.odometry));
    t
}

fn with_anchor(anchor: Pose2, rest: Vec<Pose2>) -> Vec<Pose2> {
    let mut t = Vec::with_capacity(rest.len() + 1);
    t.push(anchor);
    t.extend(rest);
    t
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub nodes: usize,
    pub objects: usize,
    pub seeds: usize,
    pub base_seed: u64,
    pub levels: Vec<PriorCorrectness>,
    /// Lateral distance band of objects from the route, in metres.
    pub object_offset: (f64, f64),
    pub sensor: SensorModel,
    pub free_space_radius: f64,
    pub map: MapParams,
    pub builder: BuilderConfig,
    pub optimizer: OptimizerOptions,
    pub incremental: IncrementalOptions,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            nodes: 200,
            objects: 40,
            seeds: 10,
            base_seed: 0,
            levels: vec![
                PriorCorrectness::Percent(0.0),
                PriorCorrectness::Percent(20.0),
                PriorCorrectness::Percent(50.0),
                PriorCorrectness::Percent(80.0),
                PriorCorrectness::Exact,
            ],
            object_offset: (2.5, 4.0),
            sensor: SensorModel {
                odometry_noise_std: [0.02, 0.004, 0.004],
                detection_noise_std: [0.1, 0.1, 0.05],
                detection_range: 8.0,
                ..SensorModel::default()
            },
            free_space_radius: 6.0,
            map: MapParams {
                query_radius: 4.0,
                ..MapParams::default()
            },
            // Detection-anchored samples only: free-space samples around the
            // true route would mark the true cars as free whenever the prior
            // is partly wrong.
            builder: BuilderConfig {
                off_detection_samples_per_node: 0,
                ..BuilderConfig::default()
            },
            optimizer: OptimizerOptions {
                samples_per_detection: 10,
                detection_stride: 5,
                ..OptimizerOptions::default()
            },
            incremental: IncrementalOptions {
                window: 30,
                step: 10,
                final_batch: false,
            },
        }
    }
}

/// A closed rectangular loop sized so that interpolation yields `nodes`
/// steps, plus objects scattered along both sides of it.
pub fn sweep_scene(cfg: &SweepConfig, seed: u64) -> (Vec<Pose2>, Vec<SceneObject>) {
    let perimeter = cfg.nodes as f64 * cfg.sensor.spacing;
    let (w, h) = (0.3 * perimeter, 0.2 * perimeter);
    let corners = [(0.0, 0.0), (w, 0.0), (w, h), (0.0, h), (0.0, 0.0)];
    let route: Vec<Pose2> = corners.iter().map(|&(x, y)| Pose2::new(x, y, 0.0)).collect();

    let mut rng = rng::stream(seed, &[0x5ce]);
    let objects = (0..cfg.objects)
        .map(|_| {
            let s = rng.random_range(0.0..perimeter);
            let (px, py, heading) = point_on_polyline(&corners, s);
            let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let off = side * rng.random_range(cfg.object_offset.0..=cfg.object_offset.1);
            let (sn, cs) = heading.sin_cos();
            let flip = if rng.random::<bool>() { PI } else { 0.0 };
            SceneObject {
                pose: Pose2::new(px - sn * off, py + cs * off, heading + flip + rng.random_range(-0.2..0.2)),
                class_label: OBJECT_CLASS.into(),
            }
        })
        .collect();
    (route, objects)
}

/// Position and direction at arc length `s` along a polyline, clamped to
/// its ends.
fn point_on_polyline(pts: &[(f64, f64)], mut s: f64) -> (f64, f64, f64) {
    let segments = pts.len().saturating_sub(1);
    for (i, w) in pts.windows(2).enumerate() {
        let (dx, dy) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
        let len = dx.hypot(dy);
        if s <= len || i + 1 == segments {
            let t = if len > 0.0 { (s / len).clamp(0.0, 1.0) } else { 0.0 };
            return (w[0].0 + t * dx, w[0].1 + t * dy, dy.atan2(dx));
        }
        s -= len;
    }
    (pts[0].0, pts[0].1, 0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub seed: u64,
    /// `"odometry"` or the prior-correctness label.
    pub label: String,
    pub ate: f64,
    pub ate_aligned: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Mean unaligned and aligned ATE per label, in first-seen order.
    pub fn means(&self) -> Vec<(String, f64, f64)> {
        let mut out: Vec<(String, f64, f64, usize)> = Vec::new();
        for r in &self.rows {
            match out.iter_mut().find(|o| o.0 == r.label) {
                Some(o) => {
                    o.1 += r.ate;
                    o.2 += r.ate_aligned;
                    o.3 += 1;
                }
                None => out.push((r.label.clone(), r.ate, r.ate_aligned, 1)),
            }
        }
        out.into_iter().map(|(l, a, b, n)| (l, a / n as f64, b / n as f64)).collect()
    }

    pub fn mean_ate(&self, label: &str) -> Option<f64> {
        self.means().into_iter().find(|m| m.0 == label).map(|m| m.1)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("seed,configuration,ate,ate_aligned\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{}\n", r.seed, r.label, r.ate, r.ate_aligned));
        }
        s
    }
}

/// The session and map-building inputs of one sweep seed at one level.
pub fn sweep_session(cfg: &SweepConfig, seed: u64, level: PriorCorrectness) -> Result<(SimulatedSession, XyPomInputs)> {
    let (route, objects) = sweep_scene(cfg, seed);
    let session = sim::simulate_session(&route, &objects, &cfg.sensor, rng::derive_seed(seed, &[1]))?;
    let arena = Bounds::around(&session.ground_truth_poses, cfg.sensor.detection_range);
    // One prior seed for all levels, so they share their random cars.
    let inputs = sim::make_xy_pom_inputs(
        &session,
        level,
        &arena,
        &cfg.sensor,
        cfg.free_space_radius,
        rng::derive_seed(seed, &[2]),
    )?;
    Ok((session, inputs))
}

/// One seed of the sweep: odometry alone, then one map per level.
pub fn sweep_trial(cfg: &SweepConfig, seed: u64) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for (k, level) in cfg.levels.iter().enumerate() {
        let (session, inputs) = sweep_session(cfg, seed, *level)?;
        let truth = &session.ground_truth_poses;
        if k == 0 {
            let dr = dead_reckoned_trajectory(&session);
            rows.push(SweepRow {
                seed,
                label: "odometry".into(),
                ate: metrics::ate(&dr, truth, false)?,
                ate_aligned: metrics::ate(&dr, truth, true)?,
            });
        }
        let mut map = ObjectMap::new(OBJECT_CLASS, cfg.map.clone())?;
        let bcfg = BuilderConfig {
            rng_seed: rng::derive_seed(seed, &[3]),
            ..cfg.builder.clone()
        };
        builder::update_map(&mut map, &inputs.nodes, &bcfg)?;
        let maps = BTreeMap::from([(OBJECT_CLASS.to_string(), map)]);
        let est = with_anchor(
            session.anchor(),
            localize_session(&session, &maps, &cfg.optimizer, &cfg.incremental)?,
        );
        rows.push(SweepRow {
            seed,
            label: level.label(),
            ate: metrics::ate(&est, truth, false)?,
            ate_aligned: metrics::ate(&est, truth, true)?,
        });
    }
    Ok(rows)
}

pub fn run_correctness_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    let mut rows = Vec::new();
    for k in 0..cfg.seeds {
        rows.extend(sweep_trial(cfg, cfg.base_seed + k as u64)?);
    }
    Ok(SweepReport { rows })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyConfig {
    pub sessions: usize,
    pub bootstrap_configurations: usize,
    pub waypoints: usize,
    pub occupancy: f64,
    pub placement_noise_std: f64,
    /// Standard deviation of the lateral offset of the via point inserted
    /// between consecutive route points; clipped at twice this value.
    pub route_jitter: f64,
    pub seed: u64,
    pub sensor: SensorModel,
    /// Sensing used when simulating the bootstrap trajectories.
    pub prior_sensor: SensorModel,
    pub prior_node_stride: usize,
    pub free_space_radius: f64,
    pub map: MapParams,
    pub builder: BuilderConfig,
    pub optimizer: OptimizerOptions,
    pub incremental: IncrementalOptions,
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        let sensor = SensorModel {
            odometry_noise_std: [0.005, 0.005, 0.006],
            detection_noise_std: [0.1, 0.1, 0.05],
            detection_range: 8.0,
            ..SensorModel::default()
        };
        ConsistencyConfig {
            sessions: 8,
            bootstrap_configurations: 5,
            waypoints: 32,
            occupancy: 0.5,
            placement_noise_std: 0.3,
            route_jitter: 0.5,
            seed: 0,
            prior_sensor: SensorModel {
                odometry_noise_std: [0.0; 3],
                detection_range: 6.0,
                ..sensor.clone()
            },
            sensor,
            prior_node_stride: 2,
            free_space_radius: 5.0,
            map: MapParams {
                query_radius: 3.0,
                ..MapParams::default()
            },
            builder: BuilderConfig {
                off_detection_samples_per_node: 0,
                ..BuilderConfig::default()
            },
            optimizer: OptimizerOptions {
                samples_per_detection: 10,
                detection_stride: 2,
                ..OptimizerOptions::default()
            },
            incremental: IncrementalOptions {
                window: 30,
                step: 10,
                final_batch: true,
            },
        }
    }
}

const LEAD: f64 = 1.0;

/// The aisle loop through the default lot: along the bottom aisle, up and
/// back along the middle aisle, along the top aisle, and back down the
/// right-hand cross aisle to the bottom one.
pub fn lot_base_route() -> Vec<(f64, f64)> {
    vec![
        (4.0, 5.0),
        (47.0, 5.0),
        (47.0, 15.0),
        (4.0, 15.0),
        (4.0, 25.0),
        (47.0, 25.0),
        (47.0, 5.0),
        (4.0, 5.0),
    ]
}

/// A session route through the lot. Waypoints sit at equal arc length along
/// the base loop and are the same for every session, as is a short straight
/// stretch either side of each; the corners are kept unless a waypoint is
/// right next to them, and a randomly displaced via point is inserted
/// between consecutive route points. Returns the route and, for each waypoint, its index in the route.
pub fn lot_session_route(cfg: &ConsistencyConfig, seed: u64) -> (Vec<Pose2>, Vec<usize>) {
    let base = lot_base_route();
    let lens: Vec<f64> = base.windows(2).map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1)).collect();
    let total: f64 = lens.iter().sum();
    let step = total / cfg.waypoints as f64;

    // (arc length, point, is waypoint)
    let mut marks: Vec<(f64, (f64, f64), bool)> = Vec::new();
    for k in 0..cfg.waypoints {
        let s = k as f64 * step;
        let (x, y, _) = point_on_polyline(&base, s);
        marks.push((s, (x, y), true));
        // Straight lead-in and lead-out keep the true heading at the
        // waypoint the same in every session.
        for ds in [-LEAD, LEAD] {
            if s + ds > 0.0 && s + ds < total {
                let (x, y, _) = point_on_polyline(&base, s + ds);
                marks.push((s + ds, (x, y), false));
            }
        }
    }
    let mut acc = 0.0;
    for (i, l) in lens.iter().enumerate() {
        acc += l;
        let near = marks.iter().any(|m| (m.0 - acc).abs() <= LEAD);
        if !near {
            marks.push((acc, base[i + 1], false));
        }
    }
    marks.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut rng = rng::stream(seed, &[0x7a7]);
    let jitter = Normal::new(0.0, cfg.route_jitter.max(0.0)).expect("finite std");
    let clip = 2.0 * cfg.route_jitter;
    let mut route = Vec::new();
    let mut wp_idx = Vec::new();
    for (i, m) in marks.iter().enumerate() {
        if i > 0 {
            let (a, b) = (marks[i - 1].1, m.1);
            let (dx, dy) = (b.0 - a.0, b.1 - a.1);
            let len = dx.hypot(dy);
            let off = jitter.sample(&mut rng).clamp(-clip, clip);
            if len > 2.0 * LEAD && cfg.route_jitter > 0.0 {
                let mid = (0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1));
                route.push(Pose2::new(mid.0 - dy / len * off, mid.1 + dx / len * off, 0.0));
            }
        }
        if m.2 {
            wp_idx.push(route.len());
        }
        route.push(Pose2::new(m.1 .0, m.1 .1, 0.0));
    }
    (route, wp_idx)
}

/// A simulated session plus the node index of each waypoint.
pub fn lot_session(cfg: &ConsistencyConfig, configuration_seed: u64, route_seed: u64, sensor: &SensorModel) -> Result<SimulatedSession> {
    let cars = sim::sample_configuration(&SessionConfig {
        layout: SpotLayout::default_lot(cfg.occupancy),
        placement_noise_std: cfg.placement_noise_std,
        rng_seed: configuration_seed,
    })?;
    let objects: Vec<SceneObject> = cars
        .into_iter()
        .map(|pose| SceneObject {
            pose,
            class_label: OBJECT_CLASS.into(),
        })
        .collect();
    let (route, wp) = lot_session_route(cfg, route_seed);
    let mut s = sim::simulate_session(&route, &objects, sensor, rng::derive_seed(route_seed, &[0x5e5]))?;
    s.waypoint_indices = wp.iter().map(|&r| s.waypoint_indices[r]).collect();
    Ok(s)
}

/// Prior trajectory nodes from drives through several independent parking
/// configurations. Node ids carry the configuration in their high bits.
pub fn lot_prior_nodes(cfg: &ConsistencyConfig) -> Result<Vec<PriorTrajectoryNode>> {
    let mut nodes = Vec::new();
    for c in 0..cfg.bootstrap_configurations {
        let s = lot_session(
            cfg,
            rng::derive_seed(cfg.seed, &[0xb00, c as u64]),
            rng::derive_seed(cfg.seed, &[0xb01, c as u64]),
            &cfg.prior_sensor,
        )?;
        nodes.extend(sim::prior_nodes_from_session(
            &s,
            OBJECT_CLASS,
            cfg.prior_sensor.prior_detection_variance,
            cfg.free_space_radius,
            cfg.prior_node_stride,
            (c as u64) << 32,
        ));
    }
    Ok(nodes)
}

pub fn bootstrap_lot_map(cfg: &ConsistencyConfig) -> Result<ObjectMap> {
    let bcfg = BuilderConfig {
        rng_seed: rng::derive_seed(cfg.seed, &[0xb02]),
        ..cfg.builder.clone()
    };
    let samples = builder::build_samples(&lot_prior_nodes(cfg)?, &bcfg)?;
    ObjectMap::with_samples(OBJECT_CLASS, cfg.map.clone(), samples)
}

/// Session `k` of the study: its own parking configuration and route jitter.
pub fn lot_study_session(cfg: &ConsistencyConfig, k: usize) -> Result<SimulatedSession> {
    lot_session(
        cfg,
        rng::derive_seed(cfg.seed, &[0x5e0, k as u64]),
        rng::derive_seed(cfg.seed, &[0x5e1, k as u64]),
        &cfg.sensor,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyReport {
    pub odometry: WaypointEstimates,
    pub pom: WaypointEstimates,
    pub odometry_position: Vec<Deviation>,
    pub pom_position: Vec<Deviation>,
    pub odometry_orientation: Vec<Deviation>,
    pub pom_orientation: Vec<Deviation>,
    /// Per-session unaligned ATE of (odometry, POM) estimates.
    pub ate: Vec<(f64, f64)>,
    pub map_samples: usize,
}

pub fn run_consistency_study(cfg: &ConsistencyConfig) -> Result<ConsistencyReport> {
    let map = bootstrap_lot_map(cfg)?;
    let map_samples = map.len();
    let maps = BTreeMap::from([(OBJECT_CLASS.to_string(), map)]);
    let mut odo_wp = Vec::new();
    let mut pom_wp = Vec::new();
    let mut ate = Vec::new();
    for k in 0..cfg.sessions {
        let s = lot_study_session(cfg, k)?;
        let dr = dead_reckoned_trajectory(&s);
        let est = with_anchor(s.anchor(), localize_session(&s, &maps, &cfg.optimizer, &cfg.incremental)?);
        odo_wp.push(s.waypoint_indices.iter().map(|&i| dr[i]).collect::<Vec<_>>());
        pom_wp.push(s.waypoint_indices.iter().map(|&i| est[i]).collect::<Vec<_>>());
        ate.push((
            metrics::ate(&dr, &s.ground_truth_poses, false)?,
            metrics::ate(&est, &s.ground_truth_poses, false)?,
        ));
    }
    let odometry = WaypointEstimates::from_sessions(&odo_wp)?;
    let pom = WaypointEstimates::from_sessions(&pom_wp)?;
    Ok(ConsistencyReport {
        odometry_position: metrics::position_consistency(&odometry),
        pom_position: metrics::position_consistency(&pom),
        odometry_orientation: metrics::orientation_consistency(&odometry)?,
        pom_orientation: metrics::orientation_consistency(&pom)?,
        odometry,
        pom,
        ate,
        map_samples,
    })
}

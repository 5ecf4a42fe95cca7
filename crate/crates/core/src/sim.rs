//! Synthetic scenes: spot layouts, per-session object placements, ground
//! truth routes, noisy odometry and noisy detections.

use std::f64::consts::{PI, TAU};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::builder::{PriorDetection, PriorTrajectoryNode};
use crate::error::{Error, Result};
use crate::localizer::{Detection, OdometryConstraint};
use crate::rng;
use crate::se2::{Covariance3, Pose2};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spot {
    pub pose: Pose2,
    pub occupancy_probability: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct SpotLayout {
    pub spots: Vec<Spot>,
}

impl SpotLayout {
    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.spots.iter().find(|s| !(0.0..=1.0).contains(&s.occupancy_probability)) {
            return Err(Error::InvalidParameter(format!(
                "occupancy probability {} outside [0, 1]",
                s.occupancy_probability
            )));
        }
        Ok(())
    }

    /// A 50 m × 30 m lot with two double-sided rows of 15 spots per side.
    /// Row centre lines run along x at y = 10 and y = 20; cars face the
    /// centre line.
    pub fn default_lot(occupancy_probability: f64) -> Self {
        let mut spots = Vec::with_capacity(60);
        for row_y in [10.0, 20.0] {
            for side in [-1.0, 1.0] {
                for k in 0..15 {
                    spots.push(Spot {
                        pose: Pose2::new(8.0 + 2.5 * k as f64, row_y + 1.25 * side, -side * PI / 2.0),
                        occupancy_probability,
                    });
                }
            }
        }
        SpotLayout { spots }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionConfig {
    pub layout: SpotLayout,
    pub placement_noise_std: f64,
    pub rng_seed: u64,
}

/// Occupies each spot independently; occupied spots get a car at the spot
/// pose plus isotropic position noise, keeping the spot orientation.
pub fn sample_configuration(cfg: &SessionConfig) -> Result<Vec<Pose2>> {
    cfg.layout.validate()?;
    if !(cfg.placement_noise_std >= 0.0) {
        return Err(Error::InvalidParameter("placement noise must be >= 0".into()));
    }
    let mut rng = rng::stream(cfg.rng_seed, &[0x5107]);
    let mut out = Vec::new();
    for spot in &cfg.layout.spots {
        // Always draw, so the stream does not depend on earlier outcomes.
        let u: f64 = rng.random();
        let nx: f64 = StandardNormal.sample(&mut rng);
        let ny: f64 = StandardNormal.sample(&mut rng);
        if u < spot.occupancy_probability {
            out.push(Pose2::new(
                spot.pose.x + cfg.placement_noise_std * nx,
                spot.pose.y + cfg.placement_noise_std * ny,
                spot.pose.theta(),
            ));
        }
    }
    Ok(out)
}

/// A placed object of some class.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneObject {
    pub pose: Pose2,
    pub class_label: String,
}

/// Noise and sensing parameters. Noise is given as per-axis standard
/// deviations so that the noise-free case is expressible; the covariances
/// handed to the localizer are floored to stay positive definite.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorModel {
    pub odometry_noise_std: [f64; 3],
    pub detection_noise_std: [f64; 3],
    pub detection_range: f64,
    /// Total angular width of the sensor, centred on the heading.
    pub field_of_view: f64,
    pub false_negative_rate: f64,
    pub false_positive_rate: f64,
    pub spacing: f64,
    /// Position variance attached to detections written for map building.
    pub prior_detection_variance: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel {
            odometry_noise_std: [0.01, 0.01, 0.004],
            detection_noise_std: [0.1, 0.1, 0.05],
            detection_range: 8.0,
            field_of_view: TAU,
            false_negative_rate: 0.0,
            false_positive_rate: 0.0,
            spacing: 0.5,
            prior_detection_variance: 0.25,
        }
    }
}

const COVARIANCE_FLOOR: f64 = 1e-8;

impl SensorModel {
    pub fn validate(&self) -> Result<()> {
        let stds = self.odometry_noise_std.iter().chain(&self.detection_noise_std);
        if stds.into_iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidParameter("noise standard deviations must be >= 0".into()));
        }
        if !(self.spacing > 0.0) || !(self.detection_range >= 0.0) || !(self.prior_detection_variance > 0.0) {
            return Err(Error::InvalidParameter(
                "spacing, range and prior detection variance must be positive".into(),
            ));
        }
        for r in [self.false_negative_rate, self.false_positive_rate] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidParameter(format!("rate {r} outside [0, 1]")));
            }
        }
        Ok(())
    }

    fn floored(std: &[f64; 3]) -> Covariance3 {
        let v = |s: f64| (s * s).max(COVARIANCE_FLOOR);
        Covariance3::diagonal(v(std[0]), v(std[1]), v(std[2])).expect("floored diagonal is positive definite")
    }

    pub fn odometry_covariance(&self) -> Covariance3 {
        Self::floored(&self.odometry_noise_std)
    }

    pub fn detection_covariance(&self) -> Covariance3 {
        Self::floored(&self.detection_noise_std)
    }

    fn in_view(&self, robot: &Pose2, obj: &Pose2) -> bool {
        let rel = robot.between(obj);
        let dist = rel.x.hypot(rel.y);
        if dist > self.detection_range {
            return false;
        }
        self.field_of_view >= TAU || rel.y.atan2(rel.x).abs() <= 0.5 * self.field_of_view
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedSession {
    /// Node 0 is the anchor; the odometry chain links consecutive nodes.
    pub ground_truth_poses: Vec<Pose2>,
    pub objects: Vec<SceneObject>,
    pub odometry: Vec<OdometryConstraint>,
    pub detections: Vec<Detection>,
    /// For each detection, the index of the object that produced it
    /// (`None` for false positives).
    pub detection_sources: Vec<Option<usize>>,
    pub waypoint_indices: Vec<usize>,
}

impl SimulatedSession {
    pub fn anchor(&self) -> Pose2 {
        self.ground_truth_poses[0]
    }

    /// Objects detected at least once.
    pub fn observed_objects(&self) -> Vec<usize> {
        let mut seen: Vec<usize> = self.detection_sources.iter().flatten().copied().collect();
        seen.sort_unstable();
        seen.dedup();
        seen
    }
}

/// Ground truth along straight segments between route positions, with nodes
/// at most `spacing` apart and every route point hit exactly. Headings follow
/// the direction of travel. Returns the poses and the node index of each
/// route point.
pub fn interpolate_route(route: &[Pose2], spacing: f64) -> (Vec<Pose2>, Vec<usize>) {
    let mut pts: Vec<(f64, f64)> = vec![(route[0].x, route[0].y)];
    let mut marks = vec![0];
    for w in route.windows(2) {
        let (ax, ay) = (w[0].x, w[0].y);
        let (bx, by) = (w[1].x, w[1].y);
        let len = (bx - ax).hypot(by - ay);
        let steps = (len / spacing).ceil().max(1.0) as usize;
        if len > 0.0 {
            for s in 1..=steps {
                let t = s as f64 / steps as f64;
                pts.push((ax + t * (bx - ax), ay + t * (by - ay)));
            }
        }
        marks.push(pts.len() - 1);
    }
    let mut heading = route[0].theta();
    let mut poses = Vec::with_capacity(pts.len());
    for i in 0..pts.len() {
        if i + 1 < pts.len() {
            let (dx, dy) = (pts[i + 1].0 - pts[i].0, pts[i + 1].1 - pts[i].1);
            if dx != 0.0 || dy != 0.0 {
                heading = dy.atan2(dx);
            }
        }
        poses.push(Pose2::new(pts[i].0, pts[i].1, heading));
    }
    (poses, marks)
}

fn noisy(rng: &mut ChaCha8Rng, base: &Pose2, std: &[f64; 3]) -> Pose2 {
    let mut e = [0.0; 3];
    for (k, v) in e.iter_mut().enumerate() {
        let z: f64 = StandardNormal.sample(rng);
        *v = std[k] * z;
    }
    Pose2::new(base.x + e[0], base.y + e[1], base.theta() + e[2])
}

/// Drives the route through a scene and records what the robot measures.
pub fn simulate_session(route: &[Pose2], objects: &[SceneObject], sensor: &SensorModel, seed: u64) -> Result<SimulatedSession> {
    if route.is_empty() {
        return Err(Error::InvalidParameter("route must contain at least one pose".into()));
    }
    sensor.validate()?;
    let (truth, waypoint_indices) = interpolate_route(route, sensor.spacing);
    let odo_cov = sensor.odometry_covariance();
    let det_cov = sensor.detection_covariance();

    let mut odo_rng = rng::stream(seed, &[0x0d0]);
    let odometry = truth
        .windows(2)
        .enumerate()
        .map(|(j, w)| OdometryConstraint {
            from_index: j,
            to_index: j + 1,
            motion: noisy(&mut odo_rng, &w[0].between(&w[1]), &sensor.odometry_noise_std),
            covariance: odo_cov,
        })
        .collect();

    let mut detections = Vec::new();
    let mut sources = Vec::new();
    for (i, robot) in truth.iter().enumerate().skip(1) {
        let mut rng = rng::stream(seed, &[0xde7, i as u64]);
        for (k, obj) in objects.iter().enumerate() {
            // Fixed number of draws per (node, object) keeps streams aligned.
            let drop: f64 = rng.random();
            let rel = noisy(&mut rng, &robot.between(&obj.pose), &sensor.detection_noise_std);
            if sensor.in_view(robot, &obj.pose) && drop >= sensor.false_negative_rate {
                detections.push(Detection {
                    node_index: i,
                    class_label: obj.class_label.clone(),
                    relative_pose: rel,
                    covariance: det_cov,
                });
                sources.push(Some(k));
            }
        }
        if sensor.false_positive_rate > 0.0 && rng.random::<f64>() < sensor.false_positive_rate {
            if let Some(obj) = objects.first() {
                let r = sensor.detection_range * rng.random::<f64>().sqrt();
                let half = 0.5 * sensor.field_of_view.min(TAU);
                let phi = rng.random_range(-half..=half);
                detections.push(Detection {
                    node_index: i,
                    class_label: obj.class_label.clone(),
                    relative_pose: Pose2::new(r * phi.cos(), r * phi.sin(), rng.random_range(-PI..PI)),
                    covariance: det_cov,
                });
                sources.push(None);
            }
        }
    }

    Ok(SimulatedSession {
        ground_truth_poses: truth,
        objects: objects.to_vec(),
        odometry,
        detections,
        detection_sources: sources,
        waypoint_indices,
    })
}

/// How correct the map-building prior is: `Percent(x)` keeps `x`% of the
/// observed objects (with 0.4 m position noise) and scatters the rest at
/// random; `Exact` keeps every observed object without noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PriorCorrectness {
    Percent(f64),
    Exact,
}

impl PriorCorrectness {
    pub fn label(&self) -> String {
        match self {
            PriorCorrectness::Exact => "100+".into(),
            PriorCorrectness::Percent(x) => format!("{x}"),
        }
    }
}

impl std::str::FromStr for PriorCorrectness {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "100+" {
            return Ok(PriorCorrectness::Exact);
        }
        let x: f64 = s
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("prior correctness must be a percentage or 100+, got {s:?}")))?;
        if !(0.0..=100.0).contains(&x) {
            return Err(Error::InvalidParameter(format!("percentage {x} outside [0, 100]")));
        }
        Ok(PriorCorrectness::Percent(x))
    }
}

/// Axis-aligned bounds `(min_x, min_y, max_x, max_y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bounds {
    pub fn around(poses: &[Pose2], margin: f64) -> Bounds {
        let mut b = Bounds {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        };
        for p in poses {
            b.min_x = b.min_x.min(p.x - margin);
            b.min_y = b.min_y.min(p.y - margin);
            b.max_x = b.max_x.max(p.x + margin);
            b.max_y = b.max_y.max(p.y + margin);
        }
        b
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct XyPomInputs {
    /// Object poses the prior believes in.
    pub prior_objects: Vec<Pose2>,
    /// How many of those came from true objects.
    pub from_truth: usize,
    pub nodes: Vec<PriorTrajectoryNode>,
}

pub const PRIOR_POSITION_NOISE: f64 = 0.4;

/// A single prior trajectory for map building: the session's ground truth,
/// detecting a mix of (noisy) true objects and randomly placed ones. With
/// the same seed, raising the percentage swaps random cars for perturbed
/// true ones and leaves the rest unchanged.
pub fn make_xy_pom_inputs(
    session: &SimulatedSession,
    correctness: PriorCorrectness,
    arena: &Bounds,
    sensor: &SensorModel,
    free_space_radius: f64,
    seed: u64,
) -> Result<XyPomInputs> {
    let observed = session.observed_objects();
    let truth: Vec<Pose2> = observed.iter().map(|&k| session.objects[k].pose).collect();
    let mut rng = rng::stream(seed, &[0x9a1]);
    let (prior_objects, from_truth) = match correctness {
        PriorCorrectness::Exact => (truth.clone(), truth.len()),
        PriorCorrectness::Percent(x) => {
            if !(0.0..=100.0).contains(&x) {
                return Err(Error::InvalidParameter(format!("percentage {x} outside [0, 100]")));
            }
            let keep = ((x / 100.0) * truth.len() as f64).round() as usize;
            // Every car gets both a perturbed and a random candidate, drawn
            // in a fixed order, so for one seed the levels differ only in
            // which cars are kept true.
            let noise = Normal::new(0.0, PRIOR_POSITION_NOISE).expect("valid std");
            let perturbed: Vec<Pose2> = truth
                .iter()
                .map(|t| Pose2::new(t.x + noise.sample(&mut rng), t.y + noise.sample(&mut rng), t.theta()))
                .collect();
            let random: Vec<Pose2> = truth
                .iter()
                .map(|_| {
                    Pose2::new(
                        rng.random_range(arena.min_x..=arena.max_x),
                        rng.random_range(arena.min_y..=arena.max_y),
                        rng.random_range(-PI..PI),
                    )
                })
                .collect();
            let mut order: Vec<usize> = (0..truth.len()).collect();
            order.shuffle(&mut rng);
            let mut objs: Vec<Pose2> = order[..keep].iter().map(|&k| perturbed[k]).collect();
            objs.extend(order[keep..].iter().map(|&k| random[k]));
            (objs, keep)
        }
    };

    let nodes = session
        .ground_truth_poses
        .iter()
        .enumerate()
        .map(|(i, robot)| PriorTrajectoryNode {
            id: i as u64,
            pose: *robot,
            detections: prior_objects
                .iter()
                .filter(|o| sensor.in_view(robot, o))
                .map(|o| PriorDetection {
                    pose: robot.between(o),
                    variance: sensor.prior_detection_variance,
                })
                .collect(),
            free_space_radius,
        })
        .collect();
    Ok(XyPomInputs {
        prior_objects,
        from_truth,
        nodes,
    })
}

/// Prior trajectory nodes from a simulated session's own (noisy) detections,
/// placed at the ground-truth poses. Node ids start at `id_offset`.
pub fn prior_nodes_from_session(
    session: &SimulatedSession,
    class_label: &str,
    variance: f64,
    free_space_radius: f64,
    node_stride: usize,
    id_offset: u64,
) -> Vec<PriorTrajectoryNode> {
    let stride = node_stride.max(1);
    session
        .ground_truth_poses
        .iter()
        .enumerate()
        .filter(|(i, _)| i % stride == 0)
        .map(|(i, pose)| PriorTrajectoryNode {
            id: id_offset + i as u64,
            pose: *pose,
            detections: session
                .detections
                .iter()
                .filter(|d| d.node_index == i && d.class_label == class_label)
                .map(|d| PriorDetection {
                    pose: d.relative_pose,
                    variance,
                })
                .collect(),
            free_space_radius,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localizer::Problem;
    use crate::se2::angular_distance;

    fn cars(poses: &[Pose2]) -> Vec<SceneObject> {
        poses
            .iter()
            .map(|p| SceneObject {
                pose: *p,
                class_label: "car".into(),
            })
            .collect()
    }

    fn quiet() -> SensorModel {
        SensorModel {
            odometry_noise_std: [0.0; 3],
            detection_noise_std: [0.0; 3],
            ..Default::default()
        }
    }

    #[test]
    fn configuration_extremes() {
        let mut layout = SpotLayout::default_lot(0.0);
        let cfg = SessionConfig {
            layout: layout.clone(),
            placement_noise_std: 0.3,
            rng_seed: 1,
        };
        assert!(sample_configuration(&cfg).unwrap().is_empty());
        for s in &mut layout.spots {
            s.occupancy_probability = 1.0;
        }
        let cfg = SessionConfig {
            layout: layout.clone(),
            placement_noise_std: 0.0,
            rng_seed: 1,
        };
        let objs = sample_configuration(&cfg).unwrap();
        assert_eq!(objs, layout.spots.iter().map(|s| s.pose).collect::<Vec<_>>());
        layout.spots[0].occupancy_probability = 1.5;
        assert!(sample_configuration(&SessionConfig {
            layout,
            placement_noise_std: 0.0,
            rng_seed: 0
        })
        .is_err());
    }

    #[test]
    fn occupancy_is_binomial() {
        let layout = SpotLayout {
            spots: (0..1000)
                .map(|k| Spot {
                    pose: Pose2::new(k as f64, 0.0, 0.0),
                    occupancy_probability: 0.5,
                })
                .collect(),
        };
        let n = sample_configuration(&SessionConfig {
            layout,
            placement_noise_std: 0.1,
            rng_seed: 42,
        })
        .unwrap()
        .len() as f64;
        assert!((n - 500.0).abs() <= 3.0 * (1000.0f64 * 0.25).sqrt(), "{n}");
    }

    #[test]
    fn route_interpolation_hits_waypoints() {
        let route = [Pose2::new(0.0, 0.0, 0.0), Pose2::new(3.0, 0.0, 0.0), Pose2::new(3.0, 2.2, 0.0)];
        let (poses, marks) = interpolate_route(&route, 0.5);
        assert_eq!(marks, vec![0, 6, 11]);
        assert_eq!(poses.len(), 12);
        for w in poses.windows(2) {
            assert!(w[0].distance(&w[1]) <= 0.5 + 1e-12);
        }
        assert!((poses[11].y - 2.2).abs() < 1e-12);
    }

    #[test]
    fn noise_free_session_is_exact() {
        let route = [Pose2::new(0.0, 0.0, 0.0), Pose2::new(10.0, 0.0, 0.0), Pose2::new(10.0, 10.0, 0.0)];
        let objects = cars(&[Pose2::new(5.0, 3.0, 1.0), Pose2::new(12.0, 5.0, -0.5), Pose2::new(100.0, 0.0, 0.0)]);
        let s = simulate_session(&route, &objects, &quiet(), 3).unwrap();
        assert_eq!(s.odometry.len(), s.ground_truth_poses.len() - 1);
        let dr = Problem::dead_reckoning(&s.anchor(), &s.odometry);
        for (a, b) in dr.iter().zip(&s.ground_truth_poses[1..]) {
            assert!(a.distance(b) < 1e-12 && angular_distance(a.theta(), b.theta()) < 1e-12);
        }
        assert!(!s.detections.is_empty());
        for (d, src) in s.detections.iter().zip(&s.detection_sources) {
            let obj = objects[src.unwrap()].pose;
            let back = s.ground_truth_poses[d.node_index].compose(&d.relative_pose);
            assert!(back.distance(&obj) < 1e-12);
            assert_ne!(src.unwrap(), 2);
        }
        assert_eq!(s.observed_objects(), vec![0, 1]);
    }

    #[test]
    fn no_objects_in_range() {
        let route = [Pose2::new(0.0, 0.0, 0.0), Pose2::new(5.0, 0.0, 0.0)];
        let s = simulate_session(&route, &cars(&[Pose2::new(50.0, 50.0, 0.0)]), &SensorModel::default(), 1).unwrap();
        assert!(s.detections.is_empty());
    }

    #[test]
    fn sessions_are_seed_deterministic() {
        let route = [Pose2::new(0.0, 0.0, 0.0), Pose2::new(8.0, 0.0, 0.0)];
        let objs = cars(&[Pose2::new(4.0, 2.0, 0.0)]);
        let a = simulate_session(&route, &objs, &SensorModel::default(), 5).unwrap();
        let b = simulate_session(&route, &objs, &SensorModel::default(), 5).unwrap();
        let c = simulate_session(&route, &objs, &SensorModel::default(), 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn detection_residuals_are_zero_mean() {
        let route = [Pose2::new(0.0, 0.0, 0.0), Pose2::new(4.0, 0.0, 0.0)];
        let objs = cars(&[Pose2::new(2.0, 3.0, 0.0)]);
        let sensor = SensorModel {
            detection_noise_std: [0.2, 0.2, 0.05],
            ..Default::default()
        };
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0f64);
        for seed in 0..100 {
            let s = simulate_session(&route, &objs, &sensor, seed).unwrap();
            for d in &s.detections {
                // Noise is added in the robot frame, so compare relative poses.
                let exact = s.ground_truth_poses[d.node_index].between(&objs[0].pose);
                sx += d.relative_pose.x - exact.x;
                sy += d.relative_pose.y - exact.y;
                n += 1.0;
            }
        }
        let se = 0.2 / n.sqrt();
        assert!((sx / n).abs() < 4.0 * se && (sy / n).abs() < 4.0 * se);
    }

    #[test]
    fn drift_grows_like_sqrt_n() {
        // Straight route; translational noise only, so end-point drift is a
        // sum of independent steps and its variance is linear in n.
        let sensor = SensorModel {
            odometry_noise_std: [0.05, 0.05, 0.0],
            ..Default::default()
        };
        let spread = |len: f64| {
            let route = [Pose2::new(0.0, 0.0, 0.0), Pose2::new(len, 0.0, 0.0)];
            let mut ms = 0.0;
            for seed in 0..200 {
                let s = simulate_session(&route, &[], &sensor, seed).unwrap();
                let dr = Problem::dead_reckoning(&s.anchor(), &s.odometry);
                let end = dr.last().unwrap().distance(s.ground_truth_poses.last().unwrap());
                ms += end * end;
            }
            (ms / 200.0).sqrt()
        };
        let ratio = spread(100.0) / spread(25.0);
        // 200 vs 50 steps: expect ratio 2.
        assert!((ratio - 2.0).abs() < 0.4, "{ratio}");
    }

    #[test]
    fn xy_inputs() {
        let route = [Pose2::new(0.0, 0.0, 0.0), Pose2::new(40.0, 0.0, 0.0)];
        let objs: Vec<Pose2> = (0..40)
            .map(|k| Pose2::new(k as f64, if k % 2 == 0 { 3.0 } else { -3.0 }, 0.0))
            .collect();
        let s = simulate_session(&route, &cars(&objs), &quiet(), 0).unwrap();
        assert_eq!(s.observed_objects().len(), 40);
        let arena = Bounds::around(&s.ground_truth_poses, 8.0);

        let exact = make_xy_pom_inputs(&s, PriorCorrectness::Exact, &arena, &quiet(), 5.0, 1).unwrap();
        assert_eq!(exact.prior_objects, objs);
        for node in &exact.nodes {
            for d in &node.detections {
                let g = node.pose.compose(&d.pose);
                assert!(objs.iter().any(|o| o.distance(&g) < 1e-9));
            }
        }

        let half = make_xy_pom_inputs(&s, PriorCorrectness::Percent(50.0), &arena, &quiet(), 5.0, 1).unwrap();
        assert_eq!(half.from_truth, 20);
        assert_eq!(half.prior_objects.len(), 40);

        let none = make_xy_pom_inputs(&s, PriorCorrectness::Percent(0.0), &arena, &quiet(), 5.0, 1).unwrap();
        assert_eq!(none.from_truth, 0);
        assert!("100+".parse::<PriorCorrectness>().unwrap() == PriorCorrectness::Exact);
        assert!("120".parse::<PriorCorrectness>().is_err());
    }
}

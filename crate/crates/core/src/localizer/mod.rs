//! Trajectory optimization against probabilistic object maps.
//!
//! The objective over the pose chain `x_1..x_n` (with `x_0` held fixed) is
//!
//! ```text
//! ½ Σ_j ‖x_{j+1} ⊖ (x_j ⊕ u_{j+1})‖²_Σ  +  Σ_i Σ_k −log( (1/N_s) Σ_s p(c=1 | x_i ⊕ ô_{iks}) )
//! ```
//!
//! where the `ô_{iks}` are draws around each detection's relative pose. The
//! draws are made once per run and stay fixed in the robot frame, and each
//! detection evaluates its map through a [`LocalPom`] built around the initial
//! object estimate, so the objective is smooth and deterministic for the
//! duration of a run.

mod incremental;
mod optimizer;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

pub use incremental::{localize_incremental, IncrementalOptions};
pub use optimizer::{optimize, IterationRecord, OptimizeReport, Termination};

use crate::error::{Error, Result};
use crate::map::{LocalPom, ObjectMap};
use crate::rng;
use crate::se2::{Covariance3, Pose2};

#[derive(Clone, Debug, PartialEq)]
pub struct OdometryConstraint {
    pub from_index: usize,
    pub to_index: usize,
    pub motion: Pose2,
    pub covariance: Covariance3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub node_index: usize,
    pub class_label: String,
    pub relative_pose: Pose2,
    pub covariance: Covariance3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientMode {
    Analytic,
    /// Central differences per pose coordinate.
    FiniteDifference,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerOptions {
    /// Object-pose draws per detection (`N_s`).
    pub samples_per_detection: usize,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
    /// Stop once an accepted step lowers the cost by less than this
    /// fraction of `max(1, |cost|)`. Zero disables the test.
    pub cost_tolerance: f64,
    /// Only the most recent `window_size` poses are free, if set.
    pub window_size: Option<usize>,
    /// Keep detections of every `detection_stride`-th node.
    pub detection_stride: usize,
    pub likelihood_floor: f64,
    pub rng_seed: u64,
    pub gradient_mode: GradientMode,
    /// Correction pairs kept by the quasi-Newton update.
    pub memory: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            samples_per_detection: 15,
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            step_tolerance: 1e-10,
            cost_tolerance: 1e-10,
            window_size: None,
            detection_stride: 1,
            likelihood_floor: 1e-6,
            rng_seed: 0,
            gradient_mode: GradientMode::Analytic,
            memory: 10,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_detection == 0 {
            return Err(Error::InvalidParameter("samples per detection must be >= 1".into()));
        }
        if !(self.likelihood_floor > 0.0 && self.likelihood_floor < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "likelihood floor must lie in (0, 1), got {}",
                self.likelihood_floor
            )));
        }
        for (name, v) in [
            ("gradient tolerance", self.gradient_tolerance),
            ("step tolerance", self.step_tolerance),
            ("cost tolerance", self.cost_tolerance),
        ] {
            if !(v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.detection_stride == 0 {
            return Err(Error::InvalidParameter("detection stride must be >= 1".into()));
        }
        if self.window_size == Some(0) {
            return Err(Error::InvalidParameter("window size must be >= 1".into()));
        }
        if self.memory == 0 {
            return Err(Error::InvalidParameter("quasi-Newton memory must be >= 1".into()));
        }
        Ok(())
    }
}

/// Node `0` is the fixed anchor; nodes `1..=n` are the free poses, stored in
/// `initial_poses[0..n]`.
#[derive(Clone, Debug)]
pub struct Problem {
    anchor: Pose2,
    initial_poses: Vec<Pose2>,
    odometry: Vec<OdometryConstraint>,
    detections: Vec<Detection>,
    detection_ids: Vec<u64>,
    maps: Arc<BTreeMap<String, ObjectMap>>,
    options: OptimizerOptions,
}

impl Problem {
    pub fn new(
        anchor: Pose2,
        initial_poses: Vec<Pose2>,
        mut odometry: Vec<OdometryConstraint>,
        detections: Vec<Detection>,
        maps: BTreeMap<String, ObjectMap>,
        options: OptimizerOptions,
    ) -> Result<Self> {
        options.validate()?;
        let n = initial_poses.len();
        odometry.sort_by_key(|c| c.from_index);
        if odometry.len() != n {
            return Err(Error::InvalidProblem(format!(
                "{} odometry constraints for {n} poses; the chain needs exactly one per pose",
                odometry.len()
            )));
        }
        for (j, c) in odometry.iter().enumerate() {
            if c.from_index != j || c.to_index != j + 1 {
                return Err(Error::InvalidProblem(format!(
                    "odometry constraint {} -> {} breaks the chain at node {j}",
                    c.from_index, c.to_index
                )));
            }
        }
        if let Some(d) = detections.iter().find(|d| d.node_index > n) {
            return Err(Error::InvalidProblem(format!(
                "detection at node {} but only {n} poses",
                d.node_index
            )));
        }
        let missing: BTreeSet<String> = detections
            .iter()
            .filter(|d| !maps.contains_key(&d.class_label))
            .map(|d| d.class_label.clone())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingClasses(missing.into_iter().collect()));
        }
        if !anchor.is_finite() || initial_poses.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidProblem("non-finite initial pose".into()));
        }
        let detection_ids = (0..detections.len() as u64).collect();
        Ok(Problem {
            anchor,
            initial_poses,
            odometry,
            detections,
            detection_ids,
            maps: Arc::new(maps),
            options,
        })
    }

    /// Poses from chaining the odometry from the anchor.
    pub fn dead_reckoning(anchor: &Pose2, odometry: &[OdometryConstraint]) -> Vec<Pose2> {
        let mut sorted: Vec<&OdometryConstraint> = odometry.iter().collect();
        sorted.sort_by_key(|c| c.from_index);
        let mut cur = *anchor;
        sorted
            .into_iter()
            .map(|c| {
                cur = cur.compose(&c.motion);
                cur
            })
            .collect()
    }

    pub fn anchor(&self) -> &Pose2 {
        &self.anchor
    }

    pub fn initial_poses(&self) -> &[Pose2] {
        &self.initial_poses
    }

    pub fn odometry(&self) -> &[OdometryConstraint] {
        &self.odometry
    }

    pub fn detections(&self) -> &[Detection] {
        &self.detections
    }

    pub fn maps(&self) -> &BTreeMap<String, ObjectMap> {
        &self.maps
    }

    pub fn options(&self) -> &OptimizerOptions {
        &self.options
    }

    pub fn options_mut(&mut self) -> &mut OptimizerOptions {
        &mut self.options
    }

    pub fn len(&self) -> usize {
        self.initial_poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.initial_poses.is_empty()
    }

    pub fn with_initial_poses(mut self, poses: Vec<Pose2>) -> Result<Self> {
        if poses.len() != self.initial_poses.len() {
            return Err(Error::LengthMismatch(poses.len(), self.initial_poses.len()));
        }
        self.initial_poses = poses;
        Ok(self)
    }

    /// The problem restricted to nodes `1..=k`, keeping detection seeds.
    pub fn truncated(&self, k: usize, initial_poses: Vec<Pose2>) -> Result<Self> {
        if initial_poses.len() != k || k > self.len() {
            return Err(Error::LengthMismatch(initial_poses.len(), k));
        }
        let (detections, detection_ids) = self
            .detections
            .iter()
            .zip(&self.detection_ids)
            .filter(|(d, _)| d.node_index <= k)
            .map(|(d, id)| (d.clone(), *id))
            .unzip();
        Ok(Problem {
            anchor: self.anchor,
            initial_poses,
            odometry: self.odometry[..k].to_vec(),
            detections,
            detection_ids,
            maps: Arc::clone(&self.maps),
            options: self.options.clone(),
        })
    }

    /// Index of the first free node under the window setting.
    pub fn first_free(&self) -> usize {
        match self.options.window_size {
            Some(w) if w < self.len() => self.len() - w + 1,
            _ => 1,
        }
    }

    fn pose_at<'a>(&'a self, poses: &'a [Pose2], node: usize) -> &'a Pose2 {
        if node == 0 {
            &self.anchor
        } else {
            &poses[node - 1]
        }
    }
}

/// Relative-pose draws around a detection, in the robot frame.
pub fn draw_object_samples(d: &Detection, count: usize, seed: u64, detection_id: u64) -> Vec<Pose2> {
    let mut rng = rng::stream(seed, &[d.node_index as u64, detection_id]);
    let l = d.covariance.sqrt();
    let r = d.relative_pose;
    (0..count)
        .map(|_| {
            let z = Vector3::new(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            );
            let e: Vector3<f64> = l * z;
            Pose2::new(r.x + e[0], r.y + e[1], r.theta() + e[2])
        })
        .collect()
}

/// `−log(max(mean, floor))` of the map likelihoods at `x ⊕ ô` over the draws.
pub fn observation_cost(pose: &Pose2, samples: &[Pose2], map: &LocalPom, likelihood_floor: f64) -> f64 {
    let mean = samples.iter().map(|s| map.evaluate(&pose.compose(s))).sum::<f64>() / samples.len() as f64;
    -mean.max(likelihood_floor).ln()
}

fn observation_cost_and_gradient(pose: &Pose2, samples: &[Pose2], map: &LocalPom, floor: f64) -> (f64, [f64; 3]) {
    let (st, ct) = pose.theta().sin_cos();
    let mut sum = 0.0;
    let mut g = [0.0; 3];
    for s in samples {
        let (p, dq) = map.evaluate_with_gradient(&pose.compose(s));
        sum += p;
        // ∂(x ⊕ ô)/∂θ for the position part.
        let dqx_dt = -st * s.x - ct * s.y;
        let dqy_dt = ct * s.x - st * s.y;
        g[0] += dq[0];
        g[1] += dq[1];
        g[2] += dq[0] * dqx_dt + dq[1] * dqy_dt + dq[2];
    }
    let n = samples.len() as f64;
    let mean = sum / n;
    if mean < floor {
        return (-floor.ln(), [0.0; 3]);
    }
    let scale = -1.0 / (mean * n);
    (-mean.ln(), [g[0] * scale, g[1] * scale, g[2] * scale])
}

/// Residual of one odometry constraint and its Jacobians with respect to the
/// `from` and `to` poses.
pub(crate) fn odometry_residual(from: &Pose2, to: &Pose2, motion: &Pose2) -> (Vector3<f64>, Matrix3<f64>, Matrix3<f64>) {
    let pred = from.compose(motion);
    let (s, c) = pred.theta().sin_cos();
    let rt = Matrix2::new(c, s, -s, c);
    let drt = Matrix2::new(-s, c, -c, -s);
    let d = Vector2::new(to.x - pred.x, to.y - pred.y);
    let exy = rt * d;
    let e = Vector3::new(exy[0], exy[1], crate::se2::normalize_angle(to.theta() - pred.theta()));

    let (sj, cj) = from.theta().sin_cos();
    let dpred_dtheta = Vector2::new(-sj * motion.x - cj * motion.y, cj * motion.x - sj * motion.y);
    let de_dtheta = drt * d - rt * dpred_dtheta;

    let mut ja = Matrix3::zeros();
    ja.fixed_view_mut::<2, 2>(0, 0).copy_from(&(-rt));
    ja[(0, 2)] = de_dtheta[0];
    ja[(1, 2)] = de_dtheta[1];
    ja[(2, 2)] = -1.0;

    let mut jb = Matrix3::zeros();
    jb.fixed_view_mut::<2, 2>(0, 0).copy_from(&rt);
    jb[(2, 2)] = 1.0;
    (e, ja, jb)
}

struct ObservationFactor {
    node: usize,
    detection: usize,
    samples: Vec<Pose2>,
    map: LocalPom,
}

/// The negative log posterior of a problem, with its observation factors
/// prepared around a fixed set of linearization poses.
pub struct Objective<'p> {
    problem: &'p Problem,
    factors: Vec<ObservationFactor>,
    first_free: usize,
}

impl<'p> Objective<'p> {
    /// Prepares every retained detection: draws its object samples and
    /// solves its local map around `x_i ⊕ r` at the given poses.
    pub fn new(problem: &'p Problem, linearization: &[Pose2]) -> Result<Self> {
        let opts = &problem.options;
        let first_free = problem.first_free();
        // Under a window, factors on frozen poses are constant and skipped.
        let lowest = if opts.window_size.is_some() { first_free } else { 0 };
        let retained: Vec<usize> = problem
            .detections
            .iter()
            .enumerate()
            .filter(|(_, d)| d.node_index % opts.detection_stride == 0 && d.node_index >= lowest)
            .map(|(i, _)| i)
            .collect();
        let factors = retained
            .par_iter()
            .map(|&di| {
                let d = &problem.detections[di];
                let pose = problem.pose_at(linearization, d.node_index);
                let map = problem.maps[&d.class_label].local(&pose.compose(&d.relative_pose))?;
                Ok(ObservationFactor {
                    node: d.node_index,
                    detection: di,
                    samples: draw_object_samples(d, opts.samples_per_detection, opts.rng_seed, problem.detection_ids[di]),
                    map,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Objective {
            problem,
            factors,
            first_free,
        })
    }

    pub fn problem(&self) -> &Problem {
        self.problem
    }

    pub fn first_free(&self) -> usize {
        self.first_free
    }

    pub fn free_count(&self) -> usize {
        self.problem.len() + 1 - self.first_free
    }

    pub fn observation_factor_count(&self) -> usize {
        self.factors.len()
    }

    fn odometry_terms(&self, poses: &[Pose2]) -> Vec<f64> {
        self.problem
            .odometry
            .par_iter()
            .map(|c| {
                let from = self.problem.pose_at(poses, c.from_index);
                let to = self.problem.pose_at(poses, c.to_index);
                let (e, _, _) = odometry_residual(from, to, &c.motion);
                0.5 * e.dot(&(c.covariance.information() * e))
            })
            .collect()
    }

    fn observation_terms(&self, poses: &[Pose2]) -> Vec<f64> {
        let floor = self.problem.options.likelihood_floor;
        self.factors
            .par_iter()
            .map(|f| observation_cost(self.problem.pose_at(poses, f.node), &f.samples, &f.map, floor))
            .collect()
    }

    pub fn cost(&self, poses: &[Pose2]) -> f64 {
        // Collected in index order, then summed sequentially.
        let odo: f64 = self.odometry_terms(poses).iter().sum();
        let obs: f64 = self.observation_terms(poses).iter().sum();
        odo + obs
    }

    /// Names the first factor with a non-finite value, if any.
    pub fn find_non_finite(&self, poses: &[Pose2]) -> Option<String> {
        if let Some(j) = self.odometry_terms(poses).iter().position(|v| !v.is_finite()) {
            let c = &self.problem.odometry[j];
            return Some(format!("odometry factor {} -> {}", c.from_index, c.to_index));
        }
        if let Some(k) = self.observation_terms(poses).iter().position(|v| !v.is_finite()) {
            let f = &self.factors[k];
            let d = &self.problem.detections[f.detection];
            return Some(format!(
                "observation factor for detection {} ({}) at node {}",
                f.detection, d.class_label, f.node
            ));
        }
        None
    }

    /// Cost and gradient over the free poses (`3 · free_count` entries, in
    /// node order).
    pub fn cost_and_gradient(&self, poses: &[Pose2]) -> (f64, Vec<f64>) {
        match self.problem.options.gradient_mode {
            GradientMode::Analytic => self.analytic(poses),
            GradientMode::FiniteDifference => (self.cost(poses), self.finite_difference_gradient(poses, 1e-6)),
        }
    }

    fn analytic(&self, poses: &[Pose2]) -> (f64, Vec<f64>) {
        let first = self.first_free;
        let mut grad = vec![0.0; 3 * self.free_count()];
        let odo: Vec<(f64, Vector3<f64>, Vector3<f64>)> = self
            .problem
            .odometry
            .par_iter()
            .map(|c| {
                let from = self.problem.pose_at(poses, c.from_index);
                let to = self.problem.pose_at(poses, c.to_index);
                let (e, ja, jb) = odometry_residual(from, to, &c.motion);
                let we = c.covariance.information() * e;
                (0.5 * e.dot(&we), ja.transpose() * we, jb.transpose() * we)
            })
            .collect();
        let floor = self.problem.options.likelihood_floor;
        let obs: Vec<(f64, [f64; 3])> = self
            .factors
            .par_iter()
            .map(|f| observation_cost_and_gradient(self.problem.pose_at(poses, f.node), &f.samples, &f.map, floor))
            .collect();

        let mut cost = 0.0;
        let mut add = |node: usize, g: &[f64]| {
            if node >= first {
                let k = 3 * (node - first);
                for d in 0..3 {
                    grad[k + d] += g[d];
                }
            }
        };
        for (c, (v, ga, gb)) in self.problem.odometry.iter().zip(&odo) {
            cost += v;
            add(c.from_index, ga.as_slice());
            add(c.to_index, gb.as_slice());
        }
        for (f, (v, g)) in self.factors.iter().zip(&obs) {
            cost += v;
            add(f.node, g);
        }
        (cost, grad)
    }

    /// Cost of every factor touching `node`.
    fn node_cost(&self, poses: &[Pose2], node: usize) -> f64 {
        let floor = self.problem.options.likelihood_floor;
        let mut total = 0.0;
        for c in &self.problem.odometry {
            if c.from_index == node || c.to_index == node {
                let (e, _, _) = odometry_residual(
                    self.problem.pose_at(poses, c.from_index),
                    self.problem.pose_at(poses, c.to_index),
                    &c.motion,
                );
                total += 0.5 * e.dot(&(c.covariance.information() * e));
            }
        }
        for f in self.factors.iter().filter(|f| f.node == node) {
            total += observation_cost(self.problem.pose_at(poses, node), &f.samples, &f.map, floor);
        }
        total
    }

    /// Central-difference gradient over the free poses.
    pub fn finite_difference_gradient(&self, poses: &[Pose2], h: f64) -> Vec<f64> {
        let first = self.first_free;
        let n = self.problem.len();
        (first..=n)
            .into_par_iter()
            .flat_map_iter(|node| {
                let mut work = poses.to_vec();
                let base = poses[node - 1].to_vector();
                let mut g = [0.0; 3];
                for (d, gd) in g.iter_mut().enumerate() {
                    let mut v = base;
                    v[d] += h;
                    work[node - 1] = Pose2::from_vector(&v);
                    let up = self.node_cost(&work, node);
                    v[d] -= 2.0 * h;
                    work[node - 1] = Pose2::from_vector(&v);
                    let dn = self.node_cost(&work, node);
                    *gd = (up - dn) / (2.0 * h);
                }
                g
            })
            .collect()
    }

    /// Gauss–Newton Hessian of the odometry terms over the free poses, as
    /// (diagonal blocks, super-diagonal blocks) of a block-tridiagonal matrix.
    pub(crate) fn odometry_hessian(&self, poses: &[Pose2]) -> (Vec<Matrix3<f64>>, Vec<Matrix3<f64>>) {
        let first = self.first_free;
        let m = self.free_count();
        let mut diag = vec![Matrix3::zeros(); m];
        let mut upper = vec![Matrix3::zeros(); m.saturating_sub(1)];
        for c in &self.problem.odometry {
            if c.to_index < first {
                continue;
            }
            let (_, ja, jb) = odometry_residual(
                self.problem.pose_at(poses, c.from_index),
                self.problem.pose_at(poses, c.to_index),
                &c.motion,
            );
            let w = c.covariance.information();
            let b = c.to_index - first;
            diag[b] += jb.transpose() * w * jb;
            if c.from_index >= first {
                let a = c.from_index - first;
                diag[a] += ja.transpose() * w * ja;
                upper[a] += ja.transpose() * w * jb;
            }
        }
        (diag, upper)
    }
}

/// Total cost at `poses`, with observation factors prepared around the
/// problem's initial poses.
pub fn total_cost(problem: &Problem, poses: &[Pose2]) -> Result<f64> {
    if poses.len() != problem.len() {
        return Err(Error::LengthMismatch(poses.len(), problem.len()));
    }
    Ok(Objective::new(problem, &problem.initial_poses)?.cost(poses))
}

/// Gradient of [`total_cost`] with respect to each free pose.
pub fn gradient(problem: &Problem, poses: &[Pose2]) -> Result<Vec<[f64; 3]>> {
    if poses.len() != problem.len() {
        return Err(Error::LengthMismatch(poses.len(), problem.len()));
    }
    let objective = Objective::new(problem, &problem.initial_poses)?;
    let (_, g) = objective.cost_and_gradient(poses);
    Ok(g.chunks(3).map(|c| [c[0], c[1], c[2]]).collect())
}

//! Turning past trajectories with object detections into map samples.
//!
//! Every node contributes one sample per detection (at the detection pose) and
//! a fixed number of off-detection samples drawn uniformly from the free-space
//! disk around the robot. A sample's raw value is the largest isotropic
//! Gaussian density, over the node's detections, at the sample position. Raw
//! values are squashed into `[0, 1]`, shrunk into `[ε, 1 - ε]` and mapped
//! through the logit; the sample pose is then moved into the global frame
//! using the node's pose.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::map::{logit, ObjectMap, PomSample};
use crate::rng;
use crate::se2::Pose2;

/// A detection relative to the robot, with its scalar position variance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriorDetection {
    pub pose: Pose2,
    pub variance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PriorTrajectoryNode {
    /// Stable identifier; seeds this node's off-detection draws.
    pub id: u64,
    pub pose: Pose2,
    pub detections: Vec<PriorDetection>,
    pub free_space_radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BuilderConfig {
    pub off_detection_samples_per_node: usize,
    pub epsilon: f64,
    pub squash_rate: f64,
    pub rng_seed: u64,
}

impl Default for BuilderConfig {
    fn default() -> Self {
        BuilderConfig {
            off_detection_samples_per_node: 10,
            epsilon: 0.01,
            squash_rate: 2.0,
            rng_seed: 0,
        }
    }
}

impl BuilderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 0.5), got {}",
                self.epsilon
            )));
        }
        if !(self.squash_rate > 0.0 && self.squash_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "squash rate must be > 0, got {}",
                self.squash_rate
            )));
        }
        Ok(())
    }

    /// Range of latent values the builder can emit.
    pub fn latent_bounds(&self) -> (f64, f64) {
        (logit(self.epsilon), logit(1.0 - self.epsilon))
    }
}

/// Maximum over the node's detections of the 2D isotropic Gaussian density at
/// the sample position; 0 when the node saw nothing.
pub fn label_sample(node: &PriorTrajectoryNode, sample_pose: &Pose2) -> f64 {
    node.detections
        .iter()
        .map(|d| {
            let d2 = (sample_pose.x - d.pose.x).powi(2) + (sample_pose.y - d.pose.y).powi(2);
            (-d2 / (2.0 * d.variance)).exp() / (2.0 * PI * d.variance)
        })
        .fold(0.0, f64::max)
}

/// `logit(ε + (1 - 2ε)(1 - exp(-λ â)))`.
pub fn latent_from_raw(raw: f64, cfg: &BuilderConfig) -> Result<f64> {
    if !(raw >= 0.0) {
        return Err(Error::InvalidParameter(format!("raw sample value must be >= 0, got {raw}")));
    }
    let t = -(-cfg.squash_rate * raw).exp_m1();
    let shrunk = cfg.epsilon + (1.0 - 2.0 * cfg.epsilon) * t;
    Ok(logit(shrunk))
}

fn validate_node(node: &PriorTrajectoryNode) -> Result<()> {
    if let Some(d) = node.detections.iter().find(|d| !(d.variance > 0.0 && d.variance.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "node {}: detection variance must be > 0, got {}",
            node.id, d.variance
        )));
    }
    if !(node.free_space_radius >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "node {}: free-space radius must be >= 0, got {}",
            node.id, node.free_space_radius
        )));
    }
    Ok(())
}

/// Local-frame sample poses for one node: detections first, then
/// off-detection draws.
pub fn local_sample_poses(node: &PriorTrajectoryNode, cfg: &BuilderConfig) -> Vec<Pose2> {
    let mut poses: Vec<Pose2> = node.detections.iter().map(|d| d.pose).collect();
    let mut rng = rng::stream(cfg.rng_seed, &[node.id]);
    for _ in 0..cfg.off_detection_samples_per_node {
        let r = node.free_space_radius * rng.random::<f64>().sqrt();
        let phi = rng.random_range(-PI..PI);
        // (-π, π]: flip the open end of the half-open draw.
        let mut theta = rng.random_range(-PI..PI);
        if theta == -PI {
            theta = PI;
        }
        poses.push(Pose2::new(r * phi.cos(), r * phi.sin(), theta));
    }
    poses
}

pub fn build_node_samples(node: &PriorTrajectoryNode, cfg: &BuilderConfig) -> Result<Vec<PomSample>> {
    validate_node(node)?;
    local_sample_poses(node, cfg)
        .into_iter()
        .map(|local| {
            let value = latent_from_raw(label_sample(node, &local), cfg)?;
            Ok(PomSample::new(node.pose.compose(&local), value))
        })
        .collect()
}

pub fn build_samples(nodes: &[PriorTrajectoryNode], cfg: &BuilderConfig) -> Result<Vec<PomSample>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for node in nodes {
        out.extend(build_node_samples(node, cfg)?);
    }
    Ok(out)
}

/// Appends samples built from a newly optimized trajectory.
pub fn update_map(map: &mut ObjectMap, optimized_nodes: &[PriorTrajectoryNode], cfg: &BuilderConfig) -> Result<()> {
    let samples = build_samples(optimized_nodes, cfg)?;
    map.add_samples(&samples)
}

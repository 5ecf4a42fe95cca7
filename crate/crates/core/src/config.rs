//! Flat `key = value` configuration with dotted section prefixes, e.g.
//! `kernel.mean.position_lengthscale = 0.6`. Every key has a default and a
//! one-line description; unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::builder::BuilderConfig;
use crate::error::{Error, Result};
use crate::experiments::{ConsistencyConfig, SweepConfig};
use crate::localizer::{GradientMode, IncrementalOptions, OptimizerOptions};
use crate::map::{KernelParams, MapParams};
use crate::se2::Pose2;
use crate::sim::{PriorCorrectness, SensorModel};

/// `(key, default, description)`
pub const SCHEMA: &[(&str, &str, &str)] = &[
    ("seed", "0", "root seed for every random stream"),
    ("kernel.mean.variance_scale", "1", "mean kernel amplitude alpha"),
    ("kernel.mean.position_lengthscale", "0.6", "mean kernel position lengthscale (m)"),
    ("kernel.mean.orientation_lengthscale", "1", "mean kernel orientation lengthscale"),
    ("kernel.variance.variance_scale", "1", "variance kernel amplitude"),
    (
        "kernel.variance.position_lengthscale",
        "1.2",
        "variance kernel position lengthscale (m)",
    ),
    (
        "kernel.variance.orientation_lengthscale",
        "1",
        "variance kernel orientation lengthscale",
    ),
    ("map.prior_likelihood", "0.1", "likelihood far from any sample; sets the prior mean"),
    (
        "map.query_radius",
        "8",
        "only samples this close to a query are used (m); inf for all",
    ),
    ("map.sample_fraction", "1", "fraction of in-radius samples used, in (0, 1]"),
    ("map.jitter", "1e-8", "diagonal added to the kernel matrix, times the amplitude"),
    (
        "builder.off_detection_samples",
        "10",
        "free-space samples drawn per trajectory node",
    ),
    ("builder.epsilon", "0.01", "labels are squeezed into [epsilon, 1 - epsilon]"),
    ("builder.squash_rate", "2", "rate lambda in 1 - exp(-lambda * density)"),
    ("builder.free_space_radius", "6", "free-space radius for update-map nodes (m)"),
    ("localizer.samples_per_detection", "15", "object-pose draws per detection"),
    ("localizer.max_iterations", "500", "iteration limit per optimization"),
    ("localizer.gradient_tolerance", "1e-6", "stop when the gradient norm is below this"),
    ("localizer.step_tolerance", "1e-10", "stop when the step norm is below this"),
    (
        "localizer.cost_tolerance",
        "1e-10",
        "stop when the relative cost decrease is below this",
    ),
    ("localizer.window_size", "0", "optimize only the last N poses; 0 for all"),
    ("localizer.detection_stride", "1", "use detections of every Nth node"),
    ("localizer.likelihood_floor", "1e-6", "lower bound on an observation likelihood"),
    ("localizer.gradient", "analytic", "analytic or finite-difference"),
    ("localizer.memory", "10", "quasi-Newton correction pairs"),
    (
        "localizer.orientation_variance",
        "0.0025",
        "heading variance given to file detections (rad^2)",
    ),
    ("localizer.anchor_x", "0", "fixed first pose when no initial trajectory is given"),
    ("localizer.anchor_y", "0", ""),
    ("localizer.anchor_theta", "0", ""),
    ("localizer.incremental", "false", "grow the trajectory with a sliding window"),
    ("localizer.incremental_window", "30", "sliding window length (nodes)"),
    ("localizer.incremental_step", "5", "nodes added per window step"),
    (
        "localizer.final_batch",
        "false",
        "finish the sliding window with a full optimization",
    ),
    ("sim.scenario", "sweep", "sweep (loop with objects) or lot (parking lot)"),
    ("sim.sessions", "1", "number of sessions written"),
    ("sim.spacing", "0.5", "distance between trajectory nodes (m)"),
    ("sim.odometry_noise_x", "0.02", "odometry noise std per step (m)"),
    ("sim.odometry_noise_y", "0.004", "odometry noise std per step (m)"),
    ("sim.odometry_noise_theta", "0.004", "odometry noise std per step (rad)"),
    ("sim.detection_noise_x", "0.1", "detection noise std (m)"),
    ("sim.detection_noise_y", "0.1", "detection noise std (m)"),
    ("sim.detection_noise_theta", "0.05", "detection noise std (rad)"),
    ("sim.detection_range", "8", "detection range (m)"),
    ("sim.field_of_view", "6.283185307179586", "sensor field of view (rad)"),
    ("sim.false_negative_rate", "0", "probability a visible object is missed"),
    ("sim.false_positive_rate", "0", "probability per node of a spurious detection"),
    (
        "sim.prior_detection_variance",
        "0.25",
        "variance written with prior detections (m^2)",
    ),
    ("sim.free_space_radius", "6", "free-space radius written to prior trajectories (m)"),
    ("sim.sweep.nodes", "200", "trajectory length of the loop scenario"),
    ("sim.sweep.objects", "40", "objects placed along the loop"),
    (
        "sim.sweep.prior_correctness",
        "100+",
        "percentage of true objects in the prior, or 100+",
    ),
    ("sim.lot.occupancy", "0.5", "probability that a spot is occupied"),
    ("sim.lot.placement_noise", "0.3", "car position noise around its spot (m)"),
    ("sim.lot.waypoints", "32", "waypoints shared by all sessions"),
    ("sim.lot.bootstrap_configurations", "5", "parking configurations in the prior"),
    ("sim.lot.route_jitter", "0.5", "lateral std of route via points (m)"),
    ("sim.lot.prior_node_stride", "2", "keep every Nth node of the prior trajectories"),
    (
        "sim.lot.prior_detection_range",
        "6",
        "detection range of the prior trajectories (m)",
    ),
    ("eval.align", "false", "rigidly align estimates before computing ATE"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            values: SCHEMA.iter().map(|(k, v, _)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl FromStr for Config {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected `key = value`", i + 1)));
            };
            cfg.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        crate::io::read_text(path)?.parse()
    }

    /// A commented file listing every key at its default.
    pub fn documented_defaults() -> String {
        let mut s = String::new();
        for (k, v, doc) in SCHEMA {
            if !doc.is_empty() {
                let _ = writeln!(s, "# {doc}");
            }
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(Error::Config(format!("unknown key {key:?}"))),
        }
    }

    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("key {key} missing from schema"))
    }

    fn num<T: FromStr>(&self, key: &str) -> Result<T> {
        parse(key, self.get(key))
    }

    fn flag(&self, key: &str) -> Result<bool> {
        self.num(key)
    }

    pub fn seed(&self) -> Result<u64> {
        self.num("seed")
    }

    /// Checks that every value parses and every derived structure validates.
    pub fn validate(&self) -> Result<()> {
        self.map_params()?;
        self.builder_config()?.validate()?;
        self.optimizer_options()?.validate()?;
        self.incremental()?;
        self.sensor()?.validate()?;
        self.anchor()?;
        self.scenario()?;
        self.sweep_config()?;
        self.consistency_config()?;
        self.num::<f64>("builder.free_space_radius")?;
        self.num::<f64>("sim.free_space_radius")?;
        self.num::<usize>("sim.sessions")?;
        self.flag("eval.align")?;
        Ok(())
    }

    fn kernel(&self, prefix: &str) -> Result<KernelParams> {
        KernelParams::new(
            self.num(&format!("{prefix}.variance_scale"))?,
            self.num(&format!("{prefix}.position_lengthscale"))?,
            self.num(&format!("{prefix}.orientation_lengthscale"))?,
        )
    }

    pub fn map_params(&self) -> Result<MapParams> {
        let p = MapParams {
            mean_kernel: self.kernel("kernel.mean")?,
            variance_kernel: self.kernel("kernel.variance")?,
            prior_likelihood: self.num("map.prior_likelihood")?,
            query_radius: self.num("map.query_radius")?,
            sample_fraction: self.num("map.sample_fraction")?,
            jitter: self.num("map.jitter")?,
            rng_seed: self.seed()?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn builder_config(&self) -> Result<BuilderConfig> {
        Ok(BuilderConfig {
            off_detection_samples_per_node: self.num("builder.off_detection_samples")?,
            epsilon: self.num("builder.epsilon")?,
            squash_rate: self.num("builder.squash_rate")?,
            rng_seed: self.seed()?,
        })
    }

    pub fn optimizer_options(&self) -> Result<OptimizerOptions> {
        let window: usize = self.num("localizer.window_size")?;
        let gradient_mode = match self.get("localizer.gradient") {
            "analytic" => GradientMode::Analytic,
            "finite-difference" => GradientMode::FiniteDifference,
            other => {
                return Err(Error::Config(format!(
                    "localizer.gradient: expected analytic or finite-difference, got {other:?}"
                )))
            }
        };
        let o = OptimizerOptions {
            samples_per_detection: self.num("localizer.samples_per_detection")?,
            max_iterations: self.num("localizer.max_iterations")?,
            gradient_tolerance: self.num("localizer.gradient_tolerance")?,
            step_tolerance: self.num("localizer.step_tolerance")?,
            cost_tolerance: self.num("localizer.cost_tolerance")?,
            window_size: (window > 0).then_some(window),
            detection_stride: self.num("localizer.detection_stride")?,
            likelihood_floor: self.num("localizer.likelihood_floor")?,
            rng_seed: self.seed()?,
            gradient_mode,
            memory: self.num("localizer.memory")?,
        };
        o.validate()?;
        Ok(o)
    }

    /// Sliding-window settings, if the incremental schedule is enabled.
    pub fn incremental(&self) -> Result<Option<IncrementalOptions>> {
        let inc = IncrementalOptions {
            window: self.num("localizer.incremental_window")?,
            step: self.num("localizer.incremental_step")?,
            final_batch: self.flag("localizer.final_batch")?,
        };
        if inc.window == 0 || inc.step == 0 {
            return Err(Error::Config("incremental window and step must be >= 1".into()));
        }
        Ok(self.flag("localizer.incremental")?.then_some(inc))
    }

    pub fn orientation_variance(&self) -> Result<f64> {
        let v: f64 = self.num("localizer.orientation_variance")?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Config("localizer.orientation_variance must be > 0".into()));
        }
        Ok(v)
    }

    pub fn anchor(&self) -> Result<Pose2> {
        Ok(Pose2::new(
            self.num("localizer.anchor_x")?,
            self.num("localizer.anchor_y")?,
            self.num("localizer.anchor_theta")?,
        ))
    }

    pub fn update_free_space_radius(&self) -> Result<f64> {
        self.num("builder.free_space_radius")
    }

    pub fn align(&self) -> Result<bool> {
        self.flag("eval.align")
    }

    pub fn sensor(&self) -> Result<SensorModel> {
        Ok(SensorModel {
            odometry_noise_std: [
                self.num("sim.odometry_noise_x")?,
                self.num("sim.odometry_noise_y")?,
                self.num("sim.odometry_noise_theta")?,
            ],
            detection_noise_std: [
                self.num("sim.detection_noise_x")?,
                self.num("sim.detection_noise_y")?,
                self.num("sim.detection_noise_theta")?,
            ],
            detection_range: self.num("sim.detection_range")?,
            field_of_view: self.num("sim.field_of_view")?,
            false_negative_rate: self.num("sim.false_negative_rate")?,
            false_positive_rate: self.num("sim.false_positive_rate")?,
            spacing: self.num("sim.spacing")?,
            prior_detection_variance: self.num("sim.prior_detection_variance")?,
        })
    }

    pub fn scenario(&self) -> Result<Scenario> {
        match self.get("sim.scenario") {
            "sweep" => Ok(Scenario::Sweep),
            "lot" => Ok(Scenario::Lot),
            other => Err(Error::Config(format!("sim.scenario: expected sweep or lot, got {other:?}"))),
        }
    }

    pub fn sessions(&self) -> Result<usize> {
        self.num("sim.sessions")
    }

    pub fn prior_correctness(&self) -> Result<PriorCorrectness> {
        self.get("sim.sweep.prior_correctness")
            .parse()
            .map_err(|e: Error| Error::Config(e.to_string()))
    }

    /// Loop-scenario settings assembled from the shared sections.
    pub fn sweep_config(&self) -> Result<SweepConfig> {
        Ok(SweepConfig {
            nodes: self.num("sim.sweep.nodes")?,
            objects: self.num("sim.sweep.objects")?,
            seeds: self.sessions()?,
            base_seed: self.seed()?,
            levels: vec![self.prior_correctness()?],
            sensor: self.sensor()?,
            free_space_radius: self.num("sim.free_space_radius")?,
            map: self.map_params()?,
            builder: self.builder_config()?,
            optimizer: self.optimizer_options()?,
            incremental: self.incremental()?.unwrap_or_default(),
            ..SweepConfig::default()
        })
    }

    pub fn consistency_config(&self) -> Result<ConsistencyConfig> {
        let sensor = self.sensor()?;
        Ok(ConsistencyConfig {
            sessions: self.sessions()?,
            bootstrap_configurations: self.num("sim.lot.bootstrap_configurations")?,
            waypoints: self.num("sim.lot.waypoints")?,
            occupancy: self.num("sim.lot.occupancy")?,
            placement_noise_std: self.num("sim.lot.placement_noise")?,
            route_jitter: self.num("sim.lot.route_jitter")?,
            seed: self.seed()?,
            prior_sensor: SensorModel {
                odometry_noise_std: [0.0; 3],
                detection_range: self.num("sim.lot.prior_detection_range")?,
                ..sensor.clone()
            },
            sensor,
            prior_node_stride: self.num("sim.lot.prior_node_stride")?,
            free_space_radius: self.num("sim.free_space_radius")?,
            map: self.map_params()?,
            builder: self.builder_config()?,
            optimizer: self.optimizer_options()?,
            incremental: self.incremental()?.unwrap_or_default(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    Sweep,
    Lot,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_document_every_key() {
        let cfg = Config::default();
        cfg.validate().unwrap();
        let doc = Config::documented_defaults();
        let reparsed: Config = doc.parse().unwrap();
        assert_eq!(reparsed, cfg);
        assert_eq!(cfg.map_params().unwrap().prior_likelihood, 0.1);
        assert_eq!(cfg.optimizer_options().unwrap(), OptimizerOptions::default());
        assert_eq!(cfg.builder_config().unwrap(), BuilderConfig::default());
        assert!(cfg.incremental().unwrap().is_none());
    }

    #[test]
    fn unknown_and_malformed_keys_are_rejected() {
        assert!("kernel.mean.lengthscale = 1"
            .parse::<Config>()
            .unwrap_err()
            .to_string()
            .contains("unknown key"));
        assert!("map.query_radius 3".parse::<Config>().is_err());
        assert!("map.sample_fraction = 1.5".parse::<Config>().is_err());
        assert!("localizer.gradient = numeric".parse::<Config>().is_err());
        assert!("sim.scenario = city".parse::<Config>().is_err());
    }

    #[test]
    fn values_and_comments() {
        let cfg: Config = "# comment\nmap.query_radius = inf  # all samples\nlocalizer.window_size = 20\nseed = 9\n"
            .parse()
            .unwrap();
        assert!(cfg.map_params().unwrap().query_radius.is_infinite());
        assert_eq!(cfg.optimizer_options().unwrap().window_size, Some(20));
        assert_eq!(cfg.optimizer_options().unwrap().rng_seed, 9);
    }
}

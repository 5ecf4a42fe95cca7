//! The `pomloc` command line: build maps, localize, update maps, simulate
//! scenarios and evaluate results.
//!
//! Exit status: 0 on success, 2 for unparseable input (files, config or
//! arguments), 3 when inputs parse but violate a precondition, 4 when the
//! optimizer stops at its iteration limit (outputs are still written).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::builder;
use crate::config::{Config, Scenario};
use crate::error::{Error, Result};
use crate::experiments::{self, OBJECT_CLASS};
use crate::io::{self, DetectionRecord, PriorNodeRecord};
use crate::localizer::{localize_incremental, optimize, Problem, Termination};
use crate::map::ObjectMap;
use crate::metrics::{self, Series, WaypointEstimates};
use crate::rng;
use crate::se2::Pose2;
use crate::sim::SimulatedSession;

pub const EXIT_PARSE: u8 = 2;
pub const EXIT_PRECONDITION: u8 = 3;
pub const EXIT_NOT_CONVERGED: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "pomloc", version, about = "Probabilistic object maps and localization against them")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Configuration file (`key = value` lines)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the `seed` key of the configuration
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build one POM sample file per class from a prior trajectory
    BuildMap {
        #[arg(long)]
        prior: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        /// Classes to build (default: every class in the detections); a
        /// named class with no detections still gets a file
        #[arg(long = "class")]
        classes: Vec<String>,
    },
    /// Optimize a trajectory against odometry and POMs
    Localize {
        #[arg(long)]
        odometry: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        #[arg(long = "pom")]
        poms: Vec<PathBuf>,
        /// Initial trajectory including node 0, which becomes the anchor
        #[arg(long)]
        initial: Option<PathBuf>,
    },
    /// Append samples from an optimized trajectory to existing POMs
    UpdateMap {
        #[arg(long = "pom", required = true)]
        poms: Vec<PathBuf>,
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        detections: PathBuf,
    },
    /// Write simulated sessions for the configured scenario
    Simulate,
    /// Trajectory error and waypoint consistency
    Evaluate {
        #[arg(long = "estimate", required = true)]
        estimates: Vec<PathBuf>,
        /// Ground truth, one per estimate, for ATE
        #[arg(long = "reference")]
        references: Vec<PathBuf>,
        /// Waypoint files, one per estimate, for consistency
        #[arg(long = "waypoints")]
        waypoints: Vec<PathBuf>,
    },
}

/// Parses the process arguments and runs; the bin target calls this.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => {
            eprintln!("warning: iteration limit reached before convergence");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } | Error::Config(_) => EXIT_PARSE,
        _ => EXIT_PRECONDITION,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Done,
    NotConverged,
}

pub fn load_config(common: &Common) -> Result<Config> {
    let mut cfg = match &common.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(seed) = common.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = load_config(&cli.common)?;
    let out = &cli.common.out;
    match &cli.command {
        Command::BuildMap {
            prior,
            detections,
            classes,
        } => build_map(&cfg, prior, detections, classes, out),
        Command::Localize {
            odometry,
            detections,
            poms,
            initial,
        } => localize(&cfg, odometry, detections, poms, initial.as_deref(), out),
        Command::UpdateMap {
            poms,
            trajectory,
            detections,
        } => update_map(&cfg, poms, trajectory, detections, out),
        Command::Simulate => simulate(&cfg, out),
        Command::Evaluate {
            estimates,
            references,
            waypoints,
        } => evaluate(&cfg, estimates, references, waypoints, out),
    }
}

fn read_detections(path: &Path) -> Result<Vec<DetectionRecord>> {
    io::parse_detections(&io::read_text(path)?, path)
}

fn build_map(cfg: &Config, prior: &Path, detections: &Path, classes: &[String], out: &Path) -> Result<Outcome> {
    let nodes = io::parse_prior_trajectory(&io::read_text(prior)?, prior)?;
    let dets = read_detections(detections)?;
    let classes = if classes.is_empty() {
        io::detection_classes(&dets)
    } else {
        classes.to_vec()
    };
    let bcfg = cfg.builder_config()?;
    for class in &classes {
        let built = io::assemble_prior_nodes(&nodes, &dets, class)?;
        let samples = builder::build_samples(&built, &bcfg)?;
        let path = io::pom_path(out, class);
        io::write_text(&path, &io::format_pom_samples(class, &samples))?;
        println!("{class}: {} samples -> {}", samples.len(), path.display());
    }
    if classes.is_empty() {
        println!("no classes to build");
    }
    Ok(Outcome::Done)
}

/// Loads POM files into maps keyed by class. An empty file takes its class
/// from the file stem.
pub fn load_maps(cfg: &Config, poms: &[PathBuf]) -> Result<BTreeMap<String, ObjectMap>> {
    let params = cfg.map_params()?;
    let mut maps = BTreeMap::new();
    for path in poms {
        let (class, samples) = io::read_pom_file(path)?;
        let class = match class {
            Some(c) => c,
            None => path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        };
        if maps.contains_key(&class) {
            return Err(Error::InvalidProblem(format!("class {class} given by more than one POM file")));
        }
        let map = ObjectMap::with_samples(class.clone(), params.clone(), samples)?;
        maps.insert(class, map);
    }
    Ok(maps)
}

fn localize(cfg: &Config, odometry: &Path, detections: &Path, poms: &[PathBuf], initial: Option<&Path>, out: &Path) -> Result<Outcome> {
    let odo = io::parse_odometry(&io::read_text(odometry)?, odometry)?;
    let dets = io::to_localizer_detections(&read_detections(detections)?, cfg.orientation_variance()?)?;
    let maps = load_maps(cfg, poms)?;
    let (anchor, init) = match initial {
        Some(p) => {
            let t = io::parse_indexed_trajectory(&io::read_text(p)?, p)?;
            let Some((anchor, rest)) = t.split_first() else {
                return Err(Error::InvalidProblem("initial trajectory is empty".into()));
            };
            (*anchor, rest.to_vec())
        }
        None => {
            let anchor = cfg.anchor()?;
            (anchor, Problem::dead_reckoning(&anchor, &odo))
        }
    };
    let problem = Problem::new(anchor, init, odo, dets, maps, cfg.optimizer_options()?)?;
    let report = match cfg.incremental()? {
        Some(inc) => localize_incremental(&problem, &inc)?,
        None => optimize(&problem)?,
    };
    let mut full = vec![anchor];
    full.extend(report.poses.iter().copied());
    io::write_text(&out.join("trajectory.txt"), &io::format_indexed_trajectory(&full))?;
    io::write_text(&out.join("iterations.txt"), &io::format_iteration_report(&report.iterations))?;
    println!(
        "cost {} -> {} in {} iterations ({:?})",
        report.initial_cost,
        report.final_cost,
        report.iterations.len().saturating_sub(1),
        report.termination
    );
    Ok(if report.termination == Termination::MaxIterations {
        Outcome::NotConverged
    } else {
        Outcome::Done
    })
}

fn update_map(cfg: &Config, poms: &[PathBuf], trajectory: &Path, detections: &Path, out: &Path) -> Result<Outcome> {
    let traj = io::parse_trajectory(&io::read_text(trajectory)?, trajectory)?;
    let dets = read_detections(detections)?;
    let radius = cfg.update_free_space_radius()?;
    let nodes: Vec<PriorNodeRecord> = traj
        .iter()
        .map(|(id, pose)| PriorNodeRecord {
            node_id: *id,
            pose: *pose,
            free_space_radius: radius,
        })
        .collect();
    let mut maps = load_maps(cfg, poms)?;
    let unmapped: Vec<String> = io::detection_classes(&dets).into_iter().filter(|c| !maps.contains_key(c)).collect();
    if !unmapped.is_empty() {
        eprintln!("note: no POM given for {}; those detections are ignored", unmapped.join(", "));
    }
    let bcfg = cfg.builder_config()?;
    for (class, map) in &mut maps {
        let before = map.len();
        builder::update_map(map, &io::assemble_prior_nodes(&nodes, &dets, class)?, &bcfg)?;
        let path = io::pom_path(out, class);
        io::write_text(&path, &io::format_pom_samples(class, map.samples()))?;
        println!("{class}: {before} -> {} samples -> {}", map.len(), path.display());
    }
    Ok(Outcome::Done)
}

fn session_detections(s: &SimulatedSession) -> Vec<DetectionRecord> {
    s.detections
        .iter()
        .map(|d| DetectionRecord {
            node_id: d.node_index as u64,
            class_label: d.class_label.clone(),
            relative_pose: d.relative_pose,
            variance: d.covariance.matrix()[(0, 0)],
        })
        .collect()
}

fn write_session(dir: &Path, s: &SimulatedSession) -> Result<()> {
    io::write_text(&dir.join("ground_truth.txt"), &io::format_indexed_trajectory(&s.ground_truth_poses))?;
    io::write_text(
        &dir.join("dead_reckoning.txt"),
        &io::format_indexed_trajectory(&experiments::dead_reckoned_trajectory(s)),
    )?;
    io::write_text(&dir.join("odometry.txt"), &io::format_odometry(&s.odometry)?)?;
    io::write_text(&dir.join("detections.txt"), &io::format_detections(&session_detections(s)))?;
    io::write_text(&dir.join("waypoints.txt"), &io::format_waypoints(&s.waypoint_indices))?;
    Ok(())
}

fn write_prior(dir: &Path, nodes: &[builder::PriorTrajectoryNode]) -> Result<()> {
    let records: Vec<PriorNodeRecord> = nodes
        .iter()
        .map(|n| PriorNodeRecord {
            node_id: n.id,
            pose: n.pose,
            free_space_radius: n.free_space_radius,
        })
        .collect();
    let dets: Vec<DetectionRecord> = nodes
        .iter()
        .flat_map(|n| {
            n.detections.iter().map(move |d| DetectionRecord {
                node_id: n.id,
                class_label: OBJECT_CLASS.into(),
                relative_pose: d.pose,
                variance: d.variance,
            })
        })
        .collect();
    io::write_text(&dir.join("prior_trajectory.txt"), &io::format_prior_trajectory(&records))?;
    io::write_text(&dir.join("prior_detections.txt"), &io::format_detections(&dets))
}

fn simulate(cfg: &Config, out: &Path) -> Result<Outcome> {
    let sessions = cfg.sessions()?;
    match cfg.scenario()? {
        Scenario::Sweep => {
            let sc = cfg.sweep_config()?;
            let level = cfg.prior_correctness()?;
            for k in 0..sessions {
                let seed = rng::derive_seed(sc.base_seed, &[k as u64]);
                let (session, inputs) = experiments::sweep_session(&sc, seed, level)?;
                let dir = out.join(format!("session_{k:03}"));
                write_session(&dir, &session)?;
                write_prior(&dir, &inputs.nodes)?;
            }
        }
        Scenario::Lot => {
            let cc = cfg.consistency_config()?;
            let prior = experiments::lot_prior_nodes(&cc)?;
            write_prior(&out.join("prior"), &prior)?;
            for k in 0..sessions {
                let s = experiments::lot_study_session(&cc, k)?;
                write_session(&out.join(format!("session_{k:03}")), &s)?;
            }
        }
    }
    println!("{sessions} session(s) -> {}", out.display());
    Ok(Outcome::Done)
}

fn read_indexed(path: &Path) -> Result<Vec<Pose2>> {
    io::parse_indexed_trajectory(&io::read_text(path)?, path)
}

fn evaluate(cfg: &Config, estimates: &[PathBuf], references: &[PathBuf], waypoints: &[PathBuf], out: &Path) -> Result<Outcome> {
    if references.is_empty() && waypoints.is_empty() {
        return Err(Error::InvalidProblem(
            "give --reference or --waypoints files to evaluate against".into(),
        ));
    }
    let est: Vec<Vec<Pose2>> = estimates.iter().map(|p| read_indexed(p)).collect::<Result<_>>()?;

    if !references.is_empty() {
        if references.len() != estimates.len() {
            return Err(Error::LengthMismatch(estimates.len(), references.len()));
        }
        let align = cfg.align()?;
        let mut csv = String::from("estimate,ate,ate_aligned\n");
        for (k, (e, r)) in est.iter().zip(references).enumerate() {
            let reference = read_indexed(r)?;
            let plain = metrics::ate(e, &reference, false)?;
            let aligned = metrics::ate(e, &reference, true)?;
            csv.push_str(&format!("{k},{plain},{aligned}\n"));
            let shown = if align { aligned } else { plain };
            println!("ATE {shown:.3} m  {}", estimates[k].display());
        }
        io::write_text(&out.join("ate.csv"), &csv)?;
    }

    if !waypoints.is_empty() {
        if waypoints.len() != estimates.len() {
            return Err(Error::LengthMismatch(estimates.len(), waypoints.len()));
        }
        let mut sessions = Vec::new();
        for (e, w) in est.iter().zip(waypoints) {
            let idx = io::parse_waypoints(&io::read_text(w)?, w)?;
            let poses = idx
                .iter()
                .map(|&i| {
                    e.get(i)
                        .copied()
                        .ok_or_else(|| Error::InvalidProblem(format!("{}: waypoint node {i} beyond trajectory", w.display())))
                })
                .collect::<Result<Vec<_>>>()?;
            sessions.push(poses);
        }
        let w = WaypointEstimates::from_sessions(&sessions)?;
        let pos = metrics::position_consistency(&w);
        let ori = metrics::orientation_consistency(&w)?;
        for (name, dev, unit) in [("position", &pos, "m"), ("orientation", &ori, "rad")] {
            let values: Vec<f64> = dev.iter().map(|d| d.value).collect();
            let cdf = metrics::cdf_points(&values);
            io::write_text(&out.join(format!("{name}_deviations.csv")), &metrics::deviations_csv(dev))?;
            io::write_text(&out.join(format!("{name}_cdf.csv")), &metrics::cdf_csv(&cdf))?;
            let svg = metrics::svg_plot(
                &format!("{name} consistency"),
                &format!("deviation ({unit})"),
                "fraction",
                &[Series { name, points: &cdf }],
            );
            io::write_text(&out.join(format!("{name}_cdf.svg")), &svg)?;
            println!(
                "{name}: max {:.3} {unit}, median {:.3} {unit}",
                metrics::max_value(dev),
                metrics::median_value(dev)
            );
        }
    }
    Ok(Outcome::Done)
}

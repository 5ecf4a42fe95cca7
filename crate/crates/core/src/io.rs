//! Plain-text file formats. One record per line, fields separated by
//! whitespace, `#` starts a comment. Floats are written in Rust's shortest
//! round-trip form, so write → read → write is byte-identical.
//!
//! | file              | fields                                         |
//! |-------------------|------------------------------------------------|
//! | POM samples       | `class gx gy gtheta a`                         |
//! | prior trajectory  | `node_id gx gy gtheta free_space_radius`       |
//! | detections        | `node_id class rel_x rel_y rel_theta variance` |
//! | odometry          | `from to dx dy dtheta c11 c22 c33`             |
//! | trajectory        | `node_id gx gy gtheta`                         |
//! | waypoints         | `waypoint node_id`                             |
//! | iteration report  | `iteration cost gradient_norm step_norm`       |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::builder::{PriorDetection, PriorTrajectoryNode};
use crate::error::{Error, Result};
use crate::localizer::{Detection, IterationRecord, OdometryConstraint};
use crate::map::PomSample;
use crate::se2::{Covariance3, Pose2};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Splits `text` into records, skipping blank lines and comments.
struct Records<'a> {
    source: &'a Path,
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

struct Record<'a> {
    source: &'a Path,
    line: usize,
    fields: Vec<&'a str>,
}

fn records<'a>(text: &'a str, source: &'a Path) -> Records<'a> {
    Records {
        source,
        lines: text.lines().enumerate(),
    }
}

impl<'a> Iterator for Records<'a> {
    type Item = Record<'a>;

    fn next(&mut self) -> Option<Record<'a>> {
        for (i, raw) in self.lines.by_ref() {
            let content = raw.split('#').next().unwrap_or("");
            let fields: Vec<&str> = content.split_whitespace().collect();
            if !fields.is_empty() {
                return Some(Record {
                    source: self.source,
                    line: i + 1,
                    fields,
                });
            }
        }
        None
    }
}

impl Record<'_> {
    fn expect_len(&self, n: usize, layout: &str) -> Result<()> {
        if self.fields.len() != n {
            return Err(self.error(format!("expected {n} fields ({layout}), found {}", self.fields.len())));
        }
        Ok(())
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::parse(self.source, self.line, message)
    }

    fn get<T: FromStr>(&self, i: usize, what: &str) -> Result<T> {
        self.fields[i]
            .parse()
            .map_err(|_| self.error(format!("bad {what} {:?}", self.fields[i])))
    }

    fn float(&self, i: usize, what: &str) -> Result<f64> {
        let v: f64 = self.get(i, what)?;
        if !v.is_finite() {
            return Err(self.error(format!("{what} must be finite")));
        }
        Ok(v)
    }

    fn pose(&self, start: usize) -> Result<Pose2> {
        Ok(Pose2::new(
            self.float(start, "x")?,
            self.float(start + 1, "y")?,
            self.float(start + 2, "theta")?,
        ))
    }
}

fn pose_fields(p: &Pose2) -> String {
    format!("{} {} {}", p.x, p.y, p.theta())
}

// POM samples

/// One `class gx gy gtheta a` line per sample and nothing else, so an empty
/// map is an empty file.
pub fn format_pom_samples(class_label: &str, samples: &[PomSample]) -> String {
    let mut s = String::new();
    for smp in samples {
        let _ = writeln!(s, "{class_label} {} {}", pose_fields(&smp.pose), smp.value);
    }
    s
}

/// Samples grouped by class, in file order within each class.
pub fn parse_pom_samples(text: &str, source: &Path) -> Result<BTreeMap<String, Vec<PomSample>>> {
    let mut out: BTreeMap<String, Vec<PomSample>> = BTreeMap::new();
    for r in records(text, source) {
        r.expect_len(5, "class gx gy gtheta a")?;
        let sample = PomSample::new(r.pose(1)?, r.float(4, "sample value")?);
        out.entry(r.fields[0].to_string()).or_default().push(sample);
    }
    Ok(out)
}

/// Reads a sample file holding a single class. A file with no samples
/// yields `None` for the class.
pub fn read_pom_file(path: &Path) -> Result<(Option<String>, Vec<PomSample>)> {
    let mut by_class = parse_pom_samples(&read_text(path)?, path)?;
    match by_class.len() {
        0 => Ok((None, Vec::new())),
        1 => {
            let (class, samples) = by_class.pop_first().expect("one entry");
            Ok((Some(class), samples))
        }
        _ => Err(Error::parse(
            path,
            0,
            format!(
                "expected one class per file, found {}",
                by_class.keys().cloned().collect::<Vec<_>>().join(", ")
            ),
        )),
    }
}

// Prior trajectories and detections

#[derive(Clone, Debug, PartialEq)]
pub struct DetectionRecord {
    pub node_id: u64,
    pub class_label: String,
    pub relative_pose: Pose2,
    pub variance: f64,
}

pub fn format_detections(d: &[DetectionRecord]) -> String {
    let mut s = String::from("# node_id class rel_x rel_y rel_theta variance\n");
    for r in d {
        let _ = writeln!(
            s,
            "{} {} {} {}",
            r.node_id,
            r.class_label,
            pose_fields(&r.relative_pose),
            r.variance
        );
    }
    s
}

pub fn parse_detections(text: &str, source: &Path) -> Result<Vec<DetectionRecord>> {
    records(text, source)
        .map(|r| {
            r.expect_len(6, "node_id class rel_x rel_y rel_theta variance")?;
            let variance = r.float(5, "variance")?;
            if variance <= 0.0 {
                return Err(r.error("variance must be > 0"));
            }
            Ok(DetectionRecord {
                node_id: r.get(0, "node id")?,
                class_label: r.fields[1].to_string(),
                relative_pose: r.pose(2)?,
                variance,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriorNodeRecord {
    pub node_id: u64,
    pub pose: Pose2,
    pub free_space_radius: f64,
}

pub fn format_prior_trajectory(nodes: &[PriorNodeRecord]) -> String {
    let mut s = String::from("# node_id gx gy gtheta free_space_radius\n");
    for n in nodes {
        let _ = writeln!(s, "{} {} {}", n.node_id, pose_fields(&n.pose), n.free_space_radius);
    }
    s
}

pub fn parse_prior_trajectory(text: &str, source: &Path) -> Result<Vec<PriorNodeRecord>> {
    records(text, source)
        .map(|r| {
            r.expect_len(5, "node_id gx gy gtheta free_space_radius")?;
            let free_space_radius = r.float(4, "free-space radius")?;
            if free_space_radius < 0.0 {
                return Err(r.error("free-space radius must be >= 0"));
            }
            Ok(PriorNodeRecord {
                node_id: r.get(0, "node id")?,
                pose: r.pose(1)?,
                free_space_radius,
            })
        })
        .collect()
}

/// Attaches detections of `class_label` to their nodes. Detections naming a
/// node that is not in the trajectory are an error.
pub fn assemble_prior_nodes(
    nodes: &[PriorNodeRecord],
    detections: &[DetectionRecord],
    class_label: &str,
) -> Result<Vec<PriorTrajectoryNode>> {
    let mut out: Vec<PriorTrajectoryNode> = nodes
        .iter()
        .map(|n| PriorTrajectoryNode {
            id: n.node_id,
            pose: n.pose,
            detections: Vec::new(),
            free_space_radius: n.free_space_radius,
        })
        .collect();
    let index: BTreeMap<u64, usize> = nodes.iter().enumerate().map(|(i, n)| (n.node_id, i)).collect();
    for d in detections {
        let Some(&i) = index.get(&d.node_id) else {
            return Err(Error::InvalidProblem(format!("detection refers to unknown node {}", d.node_id)));
        };
        if d.class_label == class_label {
            out[i].detections.push(PriorDetection {
                pose: d.relative_pose,
                variance: d.variance,
            });
        }
    }
    Ok(out)
}

/// Distinct classes, sorted.
pub fn detection_classes(detections: &[DetectionRecord]) -> Vec<String> {
    let mut c: Vec<String> = detections.iter().map(|d| d.class_label.clone()).collect();
    c.sort();
    c.dedup();
    c
}

/// Localizer detections: the file variance becomes the position variance,
/// and `orientation_variance` fills the heading entry.
pub fn to_localizer_detections(records: &[DetectionRecord], orientation_variance: f64) -> Result<Vec<Detection>> {
    records
        .iter()
        .map(|r| {
            Ok(Detection {
                node_index: usize::try_from(r.node_id).map_err(|_| Error::InvalidProblem(format!("node {} out of range", r.node_id)))?,
                class_label: r.class_label.clone(),
                relative_pose: r.relative_pose,
                covariance: Covariance3::diagonal(r.variance, r.variance, orientation_variance)?,
            })
        })
        .collect()
}

// Odometry

pub fn format_odometry(odometry: &[OdometryConstraint]) -> Result<String> {
    let mut s = String::from("# from to dx dy dtheta c11 c22 c33\n");
    for c in odometry {
        let m = c.covariance.matrix();
        if m[(0, 1)] != 0.0 || m[(0, 2)] != 0.0 || m[(1, 2)] != 0.0 {
            return Err(Error::InvalidCovariance(format!(
                "odometry {} -> {}: only diagonal covariances can be written",
                c.from_index, c.to_index
            )));
        }
        let _ = writeln!(
            s,
            "{} {} {} {} {} {}",
            c.from_index,
            c.to_index,
            pose_fields(&c.motion),
            m[(0, 0)],
            m[(1, 1)],
            m[(2, 2)]
        );
    }
    Ok(s)
}

pub fn parse_odometry(text: &str, source: &Path) -> Result<Vec<OdometryConstraint>> {
    records(text, source)
        .map(|r| {
            r.expect_len(8, "from to dx dy dtheta c11 c22 c33")?;
            let cov =
                Covariance3::diagonal(r.float(5, "c11")?, r.float(6, "c22")?, r.float(7, "c33")?).map_err(|e| r.error(e.to_string()))?;
            Ok(OdometryConstraint {
                from_index: r.get(0, "from index")?,
                to_index: r.get(1, "to index")?,
                motion: r.pose(2)?,
                covariance: cov,
            })
        })
        .collect()
}

// Trajectories

pub fn format_trajectory(poses: &[(u64, Pose2)]) -> String {
    let mut s = String::from("# node_id gx gy gtheta\n");
    for (id, p) in poses {
        let _ = writeln!(s, "{id} {}", pose_fields(p));
    }
    s
}

/// Numbers consecutive poses from 0.
pub fn format_indexed_trajectory(poses: &[Pose2]) -> String {
    let with_ids: Vec<(u64, Pose2)> = poses.iter().enumerate().map(|(i, p)| (i as u64, *p)).collect();
    format_trajectory(&with_ids)
}

pub fn parse_trajectory(text: &str, source: &Path) -> Result<Vec<(u64, Pose2)>> {
    records(text, source)
        .map(|r| {
            r.expect_len(4, "node_id gx gy gtheta")?;
            Ok((r.get(0, "node id")?, r.pose(1)?))
        })
        .collect()
}

/// A trajectory whose ids must be exactly `0, 1, 2, …`.
pub fn parse_indexed_trajectory(text: &str, source: &Path) -> Result<Vec<Pose2>> {
    let t = parse_trajectory(text, source)?;
    if let Some((i, (id, _))) = t.iter().enumerate().find(|(i, (id, _))| *id != *i as u64) {
        return Err(Error::parse(
            source,
            0,
            format!("expected node ids 0, 1, 2, ...; entry {i} has id {id}"),
        ));
    }
    Ok(t.into_iter().map(|(_, p)| p).collect())
}

// Waypoints

pub fn format_waypoints(node_indices: &[usize]) -> String {
    let mut s = String::from("# waypoint node_id\n");
    for (w, n) in node_indices.iter().enumerate() {
        let _ = writeln!(s, "{w} {n}");
    }
    s
}

pub fn parse_waypoints(text: &str, source: &Path) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for r in records(text, source) {
        r.expect_len(2, "waypoint node_id")?;
        let w: usize = r.get(0, "waypoint index")?;
        if w != out.len() {
            return Err(r.error(format!("waypoints must be numbered consecutively from 0; expected {}", out.len())));
        }
        out.push(r.get(1, "node id")?);
    }
    Ok(out)
}

// Iteration report

pub fn format_iteration_report(records: &[IterationRecord]) -> String {
    let mut s = String::from("# iteration cost gradient_norm step_norm\n");
    for r in records {
        let _ = writeln!(s, "{} {} {} {}", r.iteration, r.cost, r.gradient_norm, r.step_norm);
    }
    s
}

pub fn parse_iteration_report(text: &str, source: &Path) -> Result<Vec<IterationRecord>> {
    records(text, source)
        .map(|r| {
            r.expect_len(4, "iteration cost gradient_norm step_norm")?;
            Ok(IterationRecord {
                iteration: r.get(0, "iteration")?,
                cost: r.float(1, "cost")?,
                gradient_norm: r.float(2, "gradient norm")?,
                step_norm: r.float(3, "step norm")?,
            })
        })
        .collect()
}

/// `<dir>/<class>.pom`
pub fn pom_path(dir: &Path, class_label: &str) -> PathBuf {
    dir.join(format!("{class_label}.pom"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn src() -> &'static Path {
        Path::new("test")
    }

    fn pose() -> impl Strategy<Value = Pose2> {
        (-1e4..1e4f64, -1e4..1e4f64, -PI..PI).prop_map(|(x, y, t)| Pose2::new(x, y, t))
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = "# header\n\ncar 1 2 0.5 -4.6  # trailing\n   \ncar 3 4 -0.5 2\n";
        let m = parse_pom_samples(text, src()).unwrap();
        assert_eq!(m["car"].len(), 2);
        assert_eq!(m["car"][1].value, 2.0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "# c\ncar 1 2 3 4\ncar 1 two 3 4\n";
        match parse_pom_samples(text, src()) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("two"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let err = parse_odometry("0 1 0.5 0 0 1 1\n", src()).unwrap_err().to_string();
        assert!(err.starts_with("test:1:"), "{err}");
        assert!(parse_odometry("0 1 0.5 0 0 1 -1 1\n", src()).is_err());
        assert!(parse_trajectory("0 nan 0 0\n", src()).is_err());
        assert!(parse_waypoints("1 5\n", src()).is_err());
        assert!(parse_indexed_trajectory("1 0 0 0\n", src()).is_err());
    }

    #[test]
    fn prior_nodes_assemble_by_class() {
        let nodes = parse_prior_trajectory("7 0 0 0 5\n9 1 0 0 5\n", src()).unwrap();
        let dets = parse_detections("9 car 3 0 0 0.25\n9 bike 1 1 0 0.5\n7 car 2 0 0 0.25\n", src()).unwrap();
        let built = assemble_prior_nodes(&nodes, &dets, "car").unwrap();
        assert_eq!(built[0].detections.len(), 1);
        assert_eq!(built[1].detections[0].pose, Pose2::new(3.0, 0.0, 0.0));
        assert_eq!(detection_classes(&dets), vec!["bike".to_string(), "car".to_string()]);
        let stray = parse_detections("8 car 0 0 0 1\n", src()).unwrap();
        assert!(assemble_prior_nodes(&nodes, &stray, "car").is_err());
    }

    #[test]
    fn non_diagonal_odometry_is_refused() {
        let m = nalgebra::Matrix3::new(1.0, 0.1, 0.0, 0.1, 1.0, 0.0, 0.0, 0.0, 1.0);
        let c = OdometryConstraint {
            from_index: 0,
            to_index: 1,
            motion: Pose2::IDENTITY,
            covariance: Covariance3::new(m).unwrap(),
        };
        assert!(format_odometry(&[c]).is_err());
    }

    proptest! {
        #[test]
        fn pom_round_trip(poses in prop::collection::vec((pose(), -5.0..5.0f64), 0..30)) {
            let samples: Vec<PomSample> = poses.iter().map(|(p, a)| PomSample::new(*p, *a)).collect();
            let text = format_pom_samples("car", &samples);
            let back = parse_pom_samples(&text, src()).unwrap();
            let again = format_pom_samples("car", back.get("car").map_or(&[][..], Vec::as_slice));
            prop_assert_eq!(text, again);
        }

        #[test]
        fn trajectory_and_waypoint_round_trip(poses in prop::collection::vec(pose(), 0..30)) {
            let text = format_indexed_trajectory(&poses);
            let back = parse_indexed_trajectory(&text, src()).unwrap();
            prop_assert_eq!(&back, &poses);
            prop_assert_eq!(format_indexed_trajectory(&back), text);
            let wp: Vec<usize> = (0..poses.len()).map(|i| 3 * i).collect();
            let t = format_waypoints(&wp);
            prop_assert_eq!(parse_waypoints(&t, src()).unwrap(), wp);
        }

        #[test]
        fn odometry_round_trip(m in prop::collection::vec((pose(), 1e-6..10.0f64, 1e-6..10.0f64, 1e-8..1.0f64), 0..20)) {
            let odo: Vec<OdometryConstraint> = m.iter().enumerate().map(|(j, (p, a, b, c))| OdometryConstraint {
                from_index: j,
                to_index: j + 1,
                motion: *p,
                covariance: Covariance3::diagonal(*a, *b, *c).unwrap(),
            }).collect();
            let text = format_odometry(&odo).unwrap();
            let back = parse_odometry(&text, src()).unwrap();
            prop_assert_eq!(format_odometry(&back).unwrap(), text);
        }

        #[test]
        fn detections_and_prior_round_trip(d in prop::collection::vec((0u64..100, pose(), 1e-4..4.0f64), 0..20)) {
            let recs: Vec<DetectionRecord> = d.iter().map(|(id, p, v)| DetectionRecord {
                node_id: *id,
                class_label: "car".into(),
                relative_pose: *p,
                variance: *v,
            }).collect();
            let text = format_detections(&recs);
            prop_assert_eq!(format_detections(&parse_detections(&text, src()).unwrap()), text);
            let nodes: Vec<PriorNodeRecord> = d.iter().map(|(id, p, v)| PriorNodeRecord { node_id: *id, pose: *p, free_space_radius: *v }).collect();
            let t = format_prior_trajectory(&nodes);
            prop_assert_eq!(format_prior_trajectory(&parse_prior_trajectory(&t, src()).unwrap()), t);
        }

        #[test]
        fn report_round_trip(r in prop::collection::vec((0.0..1e6f64, 0.0..1e3f64, 0.0..10.0f64), 0..20)) {
            let recs: Vec<IterationRecord> = r.iter().enumerate().map(|(i, (c, g, s))| IterationRecord {
                iteration: i,
                cost: *c,
                gradient_norm: *g,
                step_norm: *s,
            }).collect();
            let text = format_iteration_report(&recs);
            prop_assert_eq!(format_iteration_report(&parse_iteration_report(&text, src()).unwrap()), text);
        }
    }
}

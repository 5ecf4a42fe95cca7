//! Sliding-window localization over a growing trajectory.
//!
//! Nodes are added `step` at a time, initialized by chaining odometry from
//! the latest estimate, and only the most recent `window` poses are
//! optimized. Drift is corrected while it is still within reach of the map,
//! instead of after the whole trajectory has been dead-reckoned.

use super::optimizer::{optimize, IterationRecord, OptimizeReport, Termination};
use super::{Objective, Problem};
use crate::error::{Error, Result};
use crate::se2::Pose2;

#[derive(Clone, Debug, PartialEq)]
pub struct IncrementalOptions {
    pub window: usize,
    pub step: usize,
    /// Finish with one optimization over every pose.
    pub final_batch: bool,
}

impl Default for IncrementalOptions {
    fn default() -> Self {
        IncrementalOptions {
            window: 30,
            step: 5,
            final_batch: false,
        }
    }
}

/// Runs the sliding-window schedule. The report's costs are those of the full
/// problem, with observation factors prepared at its initial poses and at the
/// final estimate respectively.
pub fn localize_incremental(problem: &Problem, inc: &IncrementalOptions) -> Result<OptimizeReport> {
    if inc.window == 0 || inc.step == 0 {
        return Err(Error::InvalidParameter("window and step must be >= 1".into()));
    }
    let n = problem.len();
    let initial_cost = Objective::new(problem, problem.initial_poses())?.cost(problem.initial_poses());
    let mut estimate: Vec<Pose2> = Vec::with_capacity(n);
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut termination = Termination::NoFreePoses;
    let mut hit_limit = false;

    let mut k = 0;
    while k < n {
        let next = (k + inc.step).min(n);
        let mut init = estimate.clone();
        let mut cur = init.last().copied().unwrap_or(*problem.anchor());
        for c in &problem.odometry()[k..next] {
            cur = cur.compose(&c.motion);
            init.push(cur);
        }
        let mut sub = problem.truncated(next, init)?;
        sub.options_mut().window_size = Some(inc.window);
        let report = optimize(&sub)?;
        append(&mut iterations, &report.iterations);
        hit_limit |= report.termination == Termination::MaxIterations;
        termination = report.termination;
        estimate = report.poses;
        k = next;
    }

    if inc.final_batch && n > 0 {
        let full = problem.clone().with_initial_poses(estimate)?;
        let report = optimize(&full)?;
        append(&mut iterations, &report.iterations);
        hit_limit |= report.termination == Termination::MaxIterations;
        termination = report.termination;
        estimate = report.poses;
    }

    let final_cost = Objective::new(problem, &estimate)?.cost(&estimate);
    Ok(OptimizeReport {
        poses: estimate,
        initial_cost,
        final_cost,
        iterations,
        termination: if hit_limit { Termination::MaxIterations } else { termination },
    })
}

fn append(all: &mut Vec<IterationRecord>, part: &[IterationRecord]) {
    let offset = all.last().map_or(0, |r| r.iteration + 1);
    all.extend(part.iter().map(|r| IterationRecord {
        iteration: r.iteration + offset,
        ..*r
    }));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localizer::OdometryConstraint;
    use crate::se2::Covariance3;
    use std::collections::BTreeMap;

    #[test]
    fn odometry_only_matches_dead_reckoning() {
        let odo: Vec<OdometryConstraint> = (0..23)
            .map(|j| OdometryConstraint {
                from_index: j,
                to_index: j + 1,
                motion: Pose2::new(0.5, 0.01 * j as f64, 0.05),
                covariance: Covariance3::diagonal(1e-3, 1e-3, 1e-4).unwrap(),
            })
            .collect();
        let dr = Problem::dead_reckoning(&Pose2::IDENTITY, &odo);
        let p = Problem::new(
            Pose2::IDENTITY,
            vec![Pose2::IDENTITY; 23],
            odo,
            vec![],
            BTreeMap::new(),
            Default::default(),
        )
        .unwrap();
        let r = localize_incremental(
            &p,
            &IncrementalOptions {
                window: 6,
                step: 4,
                final_batch: true,
            },
        )
        .unwrap();
        assert_eq!(r.poses.len(), 23);
        for (a, b) in r.poses.iter().zip(&dr) {
            assert!(a.distance(b) < 1e-9);
        }
        assert!(r.final_cost < 1e-12);
    }
}

//! Limited-memory quasi-Newton descent with Armijo backtracking.
//!
//! The initial inverse-Hessian of the two-loop recursion is the inverse of
//! the odometry Gauss–Newton Hessian, which is block tridiagonal on a chain
//! and solved in linear time. Odometry-only problems then converge like
//! Gauss–Newton, and the curvature pairs pick up the observation terms.

use std::collections::VecDeque;

use nalgebra::{Matrix3, Vector3};

use super::{Objective, Problem};
use crate::error::{Error, Result};
use crate::se2::Pose2;

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    StepTolerance,
    CostTolerance,
    /// No step along the search direction decreased the cost.
    Stalled,
    MaxIterations,
    NoFreePoses,
}

impl Termination {
    pub fn converged(&self) -> bool {
        !matches!(self, Termination::MaxIterations)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cost: f64,
    pub gradient_norm: f64,
    pub step_norm: f64,
}

#[derive(Clone, Debug)]
pub struct OptimizeReport {
    pub poses: Vec<Pose2>,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: Vec<IterationRecord>,
    pub termination: Termination,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn apply_step(poses: &[Pose2], first_free: usize, dir: &[f64], alpha: f64) -> Vec<Pose2> {
    let mut out = poses.to_vec();
    for (k, chunk) in dir.chunks(3).enumerate() {
        let p = &mut out[first_free - 1 + k];
        *p = Pose2::new(p.x + alpha * chunk[0], p.y + alpha * chunk[1], p.theta() + alpha * chunk[2]);
    }
    out
}

/// Solves `H x = b` for symmetric block-tridiagonal `H`, with `upper[i]`
/// coupling blocks `i` and `i + 1`.
fn solve_block_tridiagonal(diag: &[Matrix3<f64>], upper: &[Matrix3<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let m = diag.len();
    let mut c_prime: Vec<Matrix3<f64>> = Vec::with_capacity(m);
    let mut b_prime: Vec<Vector3<f64>> = Vec::with_capacity(m);
    for i in 0..m {
        let bi = Vector3::new(b[3 * i], b[3 * i + 1], b[3 * i + 2]);
        let (mi, ri) = if i == 0 {
            (diag[0], bi)
        } else {
            let lower = upper[i - 1].transpose();
            (diag[i] - lower * c_prime[i - 1], bi - lower * b_prime[i - 1])
        };
        let inv = mi.try_inverse()?;
        if i + 1 < m {
            c_prime.push(inv * upper[i]);
        }
        b_prime.push(inv * ri);
    }
    let mut x = vec![Vector3::zeros(); m];
    for i in (0..m).rev() {
        x[i] = if i + 1 == m {
            b_prime[i]
        } else {
            b_prime[i] - c_prime[i] * x[i + 1]
        };
    }
    Some(x.iter().flat_map(|v| [v[0], v[1], v[2]]).collect())
}

struct Preconditioner {
    diag: Vec<Matrix3<f64>>,
    upper: Vec<Matrix3<f64>>,
}

impl Preconditioner {
    fn new(objective: &Objective<'_>, poses: &[Pose2]) -> Self {
        let (mut diag, upper) = objective.odometry_hessian(poses);
        let scale = diag.iter().map(|d| d.diagonal().max()).fold(0.0f64, f64::max).max(1.0);
        for d in &mut diag {
            for k in 0..3 {
                d[(k, k)] += 1e-9 * scale;
            }
        }
        Preconditioner { diag, upper }
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        solve_block_tridiagonal(&self.diag, &self.upper, v).unwrap_or_else(|| v.to_vec())
    }
}

/// Two-loop recursion: returns `-H g`.
fn search_direction(g: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, pre: &Preconditioner) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    let mut r = pre.apply(&q);
    for ((s, y, rho), a) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &r);
        for (ri, si) in r.iter_mut().zip(s) {
            *ri += (a - b) * si;
        }
    }
    r.iter().map(|v| -v).collect()
}

/// Minimizes the problem's objective from its initial poses.
pub fn optimize(problem: &Problem) -> Result<OptimizeReport> {
    let objective = Objective::new(problem, problem.initial_poses())?;
    optimize_objective(&objective, problem.initial_poses().to_vec())
}

pub(crate) fn optimize_objective(objective: &Objective<'_>, start: Vec<Pose2>) -> Result<OptimizeReport> {
    let opts = objective.problem().options().clone();
    let first = objective.first_free();
    let mut poses = start;
    let (mut f, mut g) = objective.cost_and_gradient(&poses);
    if !f.is_finite() {
        let factor = objective.find_non_finite(&poses).unwrap_or_else(|| "unknown factor".into());
        return Err(Error::NonFiniteCost { factor });
    }
    let initial_cost = f;
    let mut iterations = vec![IterationRecord {
        iteration: 0,
        cost: f,
        gradient_norm: norm(&g),
        step_norm: 0.0,
    }];
    if objective.free_count() == 0 || objective.problem().is_empty() {
        return Ok(OptimizeReport {
            poses,
            initial_cost,
            final_cost: f,
            iterations,
            termination: Termination::NoFreePoses,
        });
    }

    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut termination = Termination::MaxIterations;
    for iter in 1..=opts.max_iterations {
        if norm(&g) < opts.gradient_tolerance {
            termination = Termination::GradientTolerance;
            break;
        }
        let pre = Preconditioner::new(objective, &poses);
        let mut accepted = None;
        // Quasi-Newton direction first; on failure, drop the memory and use
        // the preconditioned gradient, then the plain gradient.
        for attempt in 0..3 {
            let dir = match attempt {
                0 => search_direction(&g, &memory, &pre),
                1 => pre.apply(&g).iter().map(|v| -v).collect(),
                _ => g.iter().map(|v| -v).collect(),
            };
            let slope = dot(&g, &dir);
            if !(slope < 0.0) {
                continue;
            }
            let mut alpha = if attempt == 2 { 1.0 / norm(&g).max(1.0) } else { 1.0 };
            for _ in 0..MAX_BACKTRACKS {
                let trial = apply_step(&poses, first, &dir, alpha);
                let ft = objective.cost(&trial);
                if ft.is_finite() && ft <= f + ARMIJO_C1 * alpha * slope {
                    accepted = Some((trial, ft, dir.iter().map(|d| alpha * d).collect::<Vec<f64>>()));
                    break;
                }
                alpha *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
            memory.clear();
        }
        let Some((trial, ft, step)) = accepted else {
            termination = Termination::Stalled;
            break;
        };
        let (_, gt) = objective.cost_and_gradient(&trial);
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&step, &y);
        if sy > 1e-12 * norm(&step) * norm(&y) && sy > 0.0 {
            if memory.len() == opts.memory {
                memory.pop_front();
            }
            memory.push_back((step.clone(), y, 1.0 / sy));
        }
        let step_norm = norm(&step);
        let decrease = f - ft;
        poses = trial;
        f = ft;
        g = gt;
        iterations.push(IterationRecord {
            iteration: iter,
            cost: f,
            gradient_norm: norm(&g),
            step_norm,
        });
        if step_norm < opts.step_tolerance {
            termination = Termination::StepTolerance;
            break;
        }
        if decrease < opts.cost_tolerance * f.abs().max(1.0) {
            termination = Termination::CostTolerance;
            break;
        }
    }
    if termination == Termination::MaxIterations && norm(&g) < opts.gradient_tolerance {
        termination = Termination::GradientTolerance;
    }
    Ok(OptimizeReport {
        poses,
        initial_cost,
        final_cost: f,
        iterations,
        termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localizer::{Detection, OdometryConstraint, OptimizerOptions};
    use crate::map::{MapParams, ObjectMap, PomSample};
    use crate::se2::{angular_distance, Covariance3};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    #[test]
    fn block_tridiagonal_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = 5;
        let a = DMatrix::from_fn(3 * m, 3 * m, |_, _| rng.random_range(-1.0..1.0));
        // Banded SPD: keep only blocks within one of the diagonal.
        let mut h = &a * a.transpose() + DMatrix::identity(3 * m, 3 * m) * 3.0;
        for i in 0..3 * m {
            for j in 0..3 * m {
                if (i / 3).abs_diff(j / 3) > 1 {
                    h[(i, j)] = 0.0;
                }
            }
        }
        h += DMatrix::identity(3 * m, 3 * m) * 20.0;
        let diag: Vec<Matrix3<f64>> = (0..m).map(|k| h.fixed_view::<3, 3>(3 * k, 3 * k).into()).collect();
        let upper: Vec<Matrix3<f64>> = (0..m - 1).map(|k| h.fixed_view::<3, 3>(3 * k, 3 * k + 3).into()).collect();
        let b: Vec<f64> = (0..3 * m).map(|i| i as f64 - 4.0).collect();
        let x = solve_block_tridiagonal(&diag, &upper, &b).unwrap();
        let dense = h.lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
        for i in 0..3 * m {
            assert!((x[i] - dense[i]).abs() < 1e-10);
        }
    }

    fn noisy_chain(n: usize, seed: u64) -> (Vec<OdometryConstraint>, Vec<Pose2>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let odo: Vec<OdometryConstraint> = (0..n)
            .map(|j| OdometryConstraint {
                from_index: j,
                to_index: j + 1,
                motion: Pose2::new(
                    0.5 + rng.random_range(-0.1..0.1),
                    rng.random_range(-0.05..0.05),
                    rng.random_range(-0.2..0.2),
                ),
                covariance: Covariance3::diagonal(4e-4, 4e-4, 2.5e-5).unwrap(),
            })
            .collect();
        let dr = Problem::dead_reckoning(&Pose2::IDENTITY, &odo);
        let init = dr
            .iter()
            .map(|p| {
                Pose2::new(
                    p.x + rng.random_range(-1.0..1.0),
                    p.y + rng.random_range(-1.0..1.0),
                    p.theta() + rng.random_range(-0.3..0.3),
                )
            })
            .collect();
        (odo, init)
    }

    #[test]
    fn odometry_only_reaches_dead_reckoning() {
        let (odo, init) = noisy_chain(60, 3);
        let dr = Problem::dead_reckoning(&Pose2::IDENTITY, &odo);
        let opts = OptimizerOptions {
            gradient_tolerance: 1e-9,
            ..Default::default()
        };
        let p = Problem::new(Pose2::IDENTITY, init, odo, vec![], BTreeMap::new(), opts).unwrap();
        let r = optimize(&p).unwrap();
        assert!(r.termination.converged(), "{:?}", r.termination);
        assert!(r.final_cost < 1e-10, "{}", r.final_cost);
        for (a, b) in r.poses.iter().zip(&dr) {
            assert!(a.distance(b) < 1e-5 && angular_distance(a.theta(), b.theta()) < 1e-6);
        }
        for w in r.iterations.windows(2) {
            assert!(w[1].cost <= w[0].cost);
        }
    }

    #[test]
    fn window_keeps_frozen_poses() {
        let (odo, init) = noisy_chain(20, 8);
        let opts = OptimizerOptions {
            window_size: Some(5),
            ..Default::default()
        };
        let p = Problem::new(Pose2::IDENTITY, init.clone(), odo, vec![], BTreeMap::new(), opts).unwrap();
        let r = optimize(&p).unwrap();
        assert_eq!(&r.poses[..15], &init[..15]);
        assert!(r.final_cost < r.initial_cost);
    }

    #[test]
    fn uninformative_map_returns_dead_reckoning() {
        // A prior likelihood below the floor makes every observation term constant.
        let (odo, _) = noisy_chain(15, 2);
        let dr = Problem::dead_reckoning(&Pose2::IDENTITY, &odo);
        let params = MapParams {
            prior_likelihood: 1e-9,
            ..MapParams::default()
        };
        let map = ObjectMap::with_samples("car", params, vec![PomSample::new(Pose2::new(50.0, 50.0, 0.0), -8.0)]).unwrap();
        let mut maps = BTreeMap::new();
        maps.insert("car".to_string(), map);
        let dets = (1..=15)
            .map(|i| Detection {
                node_index: i,
                class_label: "car".into(),
                relative_pose: Pose2::new(2.0, 1.0, 0.0),
                covariance: Covariance3::diagonal(0.01, 0.01, 0.01).unwrap(),
            })
            .collect();
        let p = Problem::new(Pose2::IDENTITY, dr.clone(), odo, dets, maps, Default::default()).unwrap();
        let r = optimize(&p).unwrap();
        for (a, b) in r.poses.iter().zip(&dr) {
            assert!(a.distance(b) < 1e-9);
        }
    }
}

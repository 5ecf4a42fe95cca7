//! Probabilistic object maps.
//!
//! An [`ObjectMap`] holds global-frame samples `(pose, latent value)` for one
//! object class and evaluates the likelihood that an object of that class sits
//! at a query pose. The latent mean comes from Gaussian-process regression with
//! a prior mean `μ₀`; the variance is the inverse of an unnormalized kernel
//! density over the samples; the two are combined through the logistic/normal
//! convolution approximation, shifted so that the prior mean is preserved:
//!
//! `p = s(μ₀ + (μ - μ₀) / sqrt(1 + π σ² / 8))`
//!
//! Evaluation only considers samples within `query_radius` of the query and,
//! when `sample_fraction < 1`, a deterministic random subset of those.

mod dense;
mod kdtree;
mod kernel;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;

pub use dense::evaluate_dense_oracle;
pub use kdtree::KdTree;
pub(crate) use kernel::KernelBank;
pub use kernel::KernelParams;

use crate::error::{Error, Result};
use crate::rng;
use crate::se2::Pose2;

/// Cap on the KDE variance, standing in for the infinite value of an empty sum.
pub const MAX_VARIANCE: f64 = 1e6;

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Logistic of a normal latent with mean `mu` and variance `variance`,
/// approximated around the prior mean `prior_mean`.
pub fn squash_latent(prior_mean: f64, mu: f64, variance: f64) -> f64 {
    logistic(prior_mean + (mu - prior_mean) / (1.0 + PI * variance / 8.0).sqrt())
}

/// One training point: a global pose and its latent value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PomSample {
    pub pose: Pose2,
    pub value: f64,
}

impl PomSample {
    pub fn new(pose: Pose2, value: f64) -> Self {
        PomSample { pose, value }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapParams {
    pub mean_kernel: KernelParams,
    pub variance_kernel: KernelParams,
    /// Prior likelihood in (0, 1); `μ₀ = logit(prior_likelihood)`.
    pub prior_likelihood: f64,
    pub query_radius: f64,
    pub sample_fraction: f64,
    /// Diagonal jitter added to the kernel matrix, as a multiple of the mean
    /// kernel's variance scale.
    pub jitter: f64,
    pub rng_seed: u64,
}

impl Default for MapParams {
    fn default() -> Self {
        MapParams {
            mean_kernel: KernelParams::default(),
            variance_kernel: KernelParams {
                variance_scale: 1.0,
                position_lengthscale: 1.2,
                orientation_lengthscale: 1.0,
            },
            prior_likelihood: 0.1,
            query_radius: 8.0,
            sample_fraction: 1.0,
            jitter: 1e-8,
            rng_seed: 0,
        }
    }
}

impl MapParams {
    pub fn validate(&self) -> Result<()> {
        self.mean_kernel.validate()?;
        self.variance_kernel.validate()?;
        if !(self.prior_likelihood > 0.0 && self.prior_likelihood < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "prior likelihood must lie in (0, 1), got {}",
                self.prior_likelihood
            )));
        }
        if !(self.query_radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "query radius must be > 0, got {}",
                self.query_radius
            )));
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sample fraction must lie in (0, 1], got {}",
                self.sample_fraction
            )));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::InvalidParameter(format!("jitter must be >= 0, got {}", self.jitter)));
        }
        Ok(())
    }

    pub fn prior_mean(&self) -> f64 {
        logit(self.prior_likelihood)
    }
}

#[derive(Clone, Debug)]
pub struct ObjectMap {
    class_label: String,
    samples: Vec<PomSample>,
    params: MapParams,
    index: KdTree,
}

impl ObjectMap {
    pub fn new(class_label: impl Into<String>, params: MapParams) -> Result<Self> {
        Self::with_samples(class_label, params, Vec::new())
    }

    pub fn with_samples(class_label: impl Into<String>, params: MapParams, samples: Vec<PomSample>) -> Result<Self> {
        params.validate()?;
        check_finite(&samples)?;
        let mut map = ObjectMap {
            class_label: class_label.into(),
            samples,
            params,
            index: KdTree::default(),
        };
        map.rebuild_index();
        Ok(map)
    }

    pub fn class_label(&self) -> &str {
        &self.class_label
    }

    pub fn samples(&self) -> &[PomSample] {
        &self.samples
    }

    pub fn params(&self) -> &MapParams {
        &self.params
    }

    pub fn spatial_index(&self) -> &KdTree {
        &self.index
    }

    pub fn prior_mean(&self) -> f64 {
        self.params.prior_mean()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Appends a batch of samples. The whole batch is rejected if any value
    /// or pose is non-finite.
    pub fn add_samples(&mut self, new: &[PomSample]) -> Result<()> {
        check_finite(new)?;
        if new.is_empty() {
            return Ok(());
        }
        self.samples.extend_from_slice(new);
        self.rebuild_index();
        Ok(())
    }

    /// Returns a copy with different hyperparameters and the same samples.
    pub fn with_params(&self, params: MapParams) -> Result<Self> {
        params.validate()?;
        Ok(ObjectMap {
            class_label: self.class_label.clone(),
            samples: self.samples.clone(),
            params,
            index: self.index.clone(),
        })
    }

    fn rebuild_index(&mut self) {
        let pts: Vec<[f64; 2]> = self.samples.iter().map(|s| [s.pose.x, s.pose.y]).collect();
        self.index = KdTree::build(&pts);
    }

    /// Sample indices inside the query radius, ascending.
    pub fn in_radius(&self, center: &Pose2) -> Vec<usize> {
        self.index.within_radius([center.x, center.y], self.params.query_radius)
    }

    /// In-radius samples, subsampled to `⌈r_s · n⌉` when `r_s < 1`, plus the
    /// fraction actually kept. The subset is seeded from the map seed and the
    /// quantized center pose, so repeated calls agree.
    pub fn active_subset(&self, center: &Pose2) -> (Vec<usize>, f64) {
        let gathered = self.in_radius(center);
        let rs = self.params.sample_fraction;
        if rs >= 1.0 || gathered.is_empty() {
            return (gathered, 1.0);
        }
        let n = gathered.len();
        let keep = ((rs * n as f64).ceil() as usize).clamp(1, n);
        let mut rng = rng::stream(self.params.rng_seed, &rng::quantize_pose(center));
        let mut picked: Vec<usize> = index::sample(&mut rng, n, keep).into_iter().map(|i| gathered[i]).collect();
        picked.sort_unstable();
        (picked, keep as f64 / n as f64)
    }

    /// Latent mean `μ₀ + K_xᵀ K_D⁻¹ (a - μ₀)` over the given samples.
    pub fn gpc_mean(&self, active: &[usize], query: &Pose2) -> Result<f64> {
        Ok(LocalPom::from_active(self, active, 1.0)?.latent_mean(query))
    }

    /// `r_s / Σ k_σ(oᵢ, q)` over the given samples, capped at [`MAX_VARIANCE`].
    pub fn kde_variance(&self, active: &[usize], query: &Pose2, fraction_used: f64) -> f64 {
        let bank = KernelBank::new(self.params.variance_kernel, active.iter().map(|&i| self.samples[i].pose));
        kde_from_sum(bank.weighted_sum(None, query, None), fraction_used)
    }

    /// Likelihood that an object of this class occupies `query`.
    pub fn evaluate(&self, query: &Pose2) -> Result<f64> {
        Ok(self.local(query)?.evaluate(query))
    }

    /// Precomputes the GP solve for the samples active around `center`, so
    /// that nearby queries are cheap.
    pub fn local(&self, center: &Pose2) -> Result<LocalPom> {
        let (active, fraction) = self.active_subset(center);
        LocalPom::from_active(self, &active, fraction)
    }
}

fn check_finite(samples: &[PomSample]) -> Result<()> {
    if let Some((i, s)) = samples
        .iter()
        .enumerate()
        .find(|(_, s)| !(s.value.is_finite() && s.pose.is_finite()))
    {
        return Err(Error::NonFiniteSample(format!(
            "sample {i} has non-finite data (value {}, pose {})",
            s.value, s.pose
        )));
    }
    Ok(())
}

fn kde_from_sum(sum: f64, fraction_used: f64) -> f64 {
    if sum <= 0.0 || fraction_used / sum > MAX_VARIANCE {
        MAX_VARIANCE
    } else {
        fraction_used / sum
    }
}

/// A map restricted to a fixed active sample set with its GP weights solved.
#[derive(Clone, Debug)]
pub struct LocalPom {
    prior_mean: f64,
    fraction_used: f64,
    mean_bank: KernelBank,
    variance_bank: KernelBank,
    weights: Vec<f64>,
}

impl LocalPom {
    pub fn from_active(map: &ObjectMap, active: &[usize], fraction_used: f64) -> Result<Self> {
        let prior_mean = map.prior_mean();
        let kp = map.params.mean_kernel;
        let poses: Vec<Pose2> = active.iter().map(|&i| map.samples[i].pose).collect();
        let m = poses.len();
        let weights = if m == 0 {
            Vec::new()
        } else {
            let jitter = map.params.jitter * kp.variance_scale;
            let mut kd = DMatrix::<f64>::zeros(m, m);
            for i in 0..m {
                kd[(i, i)] = kp.eval(&poses[i], &poses[i]) + jitter;
                for j in 0..i {
                    let k = kp.eval(&poses[i], &poses[j]);
                    kd[(i, j)] = k;
                    kd[(j, i)] = k;
                }
            }
            let rhs = DVector::from_iterator(m, active.iter().map(|&i| map.samples[i].value - prior_mean));
            let chol = kd.cholesky().ok_or(Error::SingularKernel { count: m })?;
            let w = chol.solve(&rhs);
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::SingularKernel { count: m });
            }
            w.iter().copied().collect()
        };
        Ok(LocalPom {
            prior_mean,
            fraction_used,
            mean_bank: KernelBank::new(kp, poses.iter().copied()),
            variance_bank: KernelBank::new(map.params.variance_kernel, poses),
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn latent_mean(&self, q: &Pose2) -> f64 {
        self.prior_mean + self.mean_bank.weighted_sum(Some(&self.weights), q, None)
    }

    pub fn variance(&self, q: &Pose2) -> f64 {
        kde_from_sum(self.variance_bank.weighted_sum(None, q, None), self.fraction_used)
    }

    pub fn evaluate(&self, q: &Pose2) -> f64 {
        squash_latent(self.prior_mean, self.latent_mean(q), self.variance(q))
    }

    /// Likelihood and its gradient with respect to `(q.x, q.y, q.θ)`.
    pub fn evaluate_with_gradient(&self, q: &Pose2) -> (f64, [f64; 3]) {
        let mut dmu = [0.0; 3];
        let mu = self.prior_mean + self.mean_bank.weighted_sum(Some(&self.weights), q, Some(&mut dmu));
        let mut dsum = [0.0; 3];
        let sum = self.variance_bank.weighted_sum(None, q, Some(&mut dsum));
        let capped = sum <= 0.0 || self.fraction_used / sum > MAX_VARIANCE;
        let var = if capped { MAX_VARIANCE } else { self.fraction_used / sum };

        let base = 1.0 + PI * var / 8.0;
        let g = base.powf(-0.5);
        let z = self.prior_mean + (mu - self.prior_mean) * g;
        let p = logistic(z);
        let dp_dz = p * (1.0 - p);
        let dg_dvar = -0.5 * base.powf(-1.5) * PI / 8.0;
        let mut grad = [0.0; 3];
        for d in 0..3 {
            let dvar = if capped { 0.0 } else { -self.fraction_used / (sum * sum) * dsum[d] };
            grad[d] = dp_dz * (g * dmu[d] + (mu - self.prior_mean) * dg_dvar * dvar);
        }
        (p, grad)
    }
}

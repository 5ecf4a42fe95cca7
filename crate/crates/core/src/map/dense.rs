//! Reference evaluation over every sample: no radius gating, no subsampling,
//! LU solve instead of Cholesky. Meant for checking the fast path on maps of
//! up to a couple of thousand samples.

use nalgebra::{DMatrix, DVector};

use super::{squash_latent, ObjectMap, MAX_VARIANCE};
use crate::error::{Error, Result};
use crate::se2::Pose2;

pub fn evaluate_dense_oracle(map: &ObjectMap, query: &Pose2) -> Result<f64> {
    let params = map.params();
    let mu0 = params.prior_mean();
    let samples = map.samples();
    let m = samples.len();
    if m == 0 {
        return Ok(squash_latent(mu0, mu0, MAX_VARIANCE));
    }
    let k = &params.mean_kernel;
    let kd = DMatrix::from_fn(m, m, |i, j| {
        let v = k.eval(&samples[i].pose, &samples[j].pose);
        if i == j {
            v + params.jitter * k.variance_scale
        } else {
            v
        }
    });
    let centered = DVector::from_fn(m, |i, _| samples[i].value - mu0);
    let kx = DVector::from_fn(m, |i, _| k.eval(&samples[i].pose, query));
    let solved = kd.lu().solve(&centered).ok_or(Error::SingularKernel { count: m })?;
    let mu = mu0 + kx.dot(&solved);

    let density: f64 = samples.iter().map(|s| params.variance_kernel.eval(&s.pose, query)).sum();
    let var = if density > 0.0 {
        (1.0 / density).min(MAX_VARIANCE)
    } else {
        MAX_VARIANCE
    };
    Ok(squash_latent(mu0, mu, var))
}

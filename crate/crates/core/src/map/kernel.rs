use crate::error::{Error, Result};
use crate::se2::Pose2;

/// Scaled product of a position RBF and a 2π-periodic orientation RBF:
///
/// `k(a, b) = α · exp(-|a.xy - b.xy|² / 2ℓ_p²) · exp(-2 sin²((a.θ - b.θ)/2) / ℓ_θ²)`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams {
    pub variance_scale: f64,
    pub position_lengthscale: f64,
    pub orientation_lengthscale: f64,
}

impl KernelParams {
    pub fn new(variance_scale: f64, position_lengthscale: f64, orientation_lengthscale: f64) -> Result<Self> {
        let p = KernelParams {
            variance_scale,
            position_lengthscale,
            orientation_lengthscale,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("variance_scale", self.variance_scale),
            ("position_lengthscale", self.position_lengthscale),
            ("orientation_lengthscale", self.orientation_lengthscale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("kernel {name} must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn eval(&self, a: &Pose2, b: &Pose2) -> f64 {
        let dx = a.x - b.x;
        let dy = a.y - b.y;
        let half = 0.5 * (a.theta() - b.theta());
        let s = half.sin();
        let lp2 = self.position_lengthscale * self.position_lengthscale;
        let lt2 = self.orientation_lengthscale * self.orientation_lengthscale;
        self.variance_scale * (-(dx * dx + dy * dy) / (2.0 * lp2)).exp() * (-2.0 * s * s / lt2).exp()
    }
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams {
            variance_scale: 1.0,
            position_lengthscale: 0.6,
            orientation_lengthscale: 1.0,
        }
    }
}

/// Kernel evaluation against a fixed set of sample poses, with the sample
/// trigonometry cached. Uses `2 sin²(Δ/2) = 1 - cos Δ`.
#[derive(Clone, Debug)]
pub(crate) struct KernelBank {
    params: KernelParams,
    x: Vec<f64>,
    y: Vec<f64>,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl KernelBank {
    pub fn new(params: KernelParams, poses: impl IntoIterator<Item = Pose2>) -> Self {
        let mut bank = KernelBank {
            params,
            x: Vec::new(),
            y: Vec::new(),
            cos: Vec::new(),
            sin: Vec::new(),
        };
        for p in poses {
            let (s, c) = p.theta().sin_cos();
            bank.x.push(p.x);
            bank.y.push(p.y);
            bank.cos.push(c);
            bank.sin.push(s);
        }
        bank
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    /// Σ wᵢ k(oᵢ, q) and, if requested, its gradient with respect to q.
    pub fn weighted_sum(&self, weights: Option<&[f64]>, q: &Pose2, grad: Option<&mut [f64; 3]>) -> f64 {
        let inv_lp2 = 1.0 / (self.params.position_lengthscale * self.params.position_lengthscale);
        let inv_lt2 = 1.0 / (self.params.orientation_lengthscale * self.params.orientation_lengthscale);
        let alpha = self.params.variance_scale;
        let (qs, qc) = q.theta().sin_cos();
        let mut total = 0.0;
        match grad {
            None => {
                for i in 0..self.len() {
                    let dx = q.x - self.x[i];
                    let dy = q.y - self.y[i];
                    let cos_d = qc * self.cos[i] + qs * self.sin[i];
                    let k = alpha * (-0.5 * (dx * dx + dy * dy) * inv_lp2 - (1.0 - cos_d) * inv_lt2).exp();
                    total += weights.map_or(1.0, |w| w[i]) * k;
                }
            }
            Some(g) => {
                let mut gx = 0.0;
                let mut gy = 0.0;
                let mut gt = 0.0;
                for i in 0..self.len() {
                    let dx = q.x - self.x[i];
                    let dy = q.y - self.y[i];
                    let cos_d = qc * self.cos[i] + qs * self.sin[i];
                    let sin_d = qs * self.cos[i] - qc * self.sin[i];
                    let k = alpha * (-0.5 * (dx * dx + dy * dy) * inv_lp2 - (1.0 - cos_d) * inv_lt2).exp();
                    let wk = weights.map_or(1.0, |w| w[i]) * k;
                    total += wk;
                    gx -= wk * dx * inv_lp2;
                    gy -= wk * dy * inv_lp2;
                    gt -= wk * sin_d * inv_lt2;
                }
                *g = [gx, gy, gt];
            }
        }
        total
    }
}

//! SE(2) pose algebra.
//!
//! Poses are stored as `(x, y, theta)` with `theta` normalized to `(-pi, pi]`
//! at construction. `compose` is the usual `a ⊕ b`; `inverse_compose(a, b)`
//! expresses `b` in the frame of `a`, i.e. `inv(a) ⊕ b`.

use std::f64::consts::{PI, TAU};
use std::fmt;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(theta: f64) -> f64 {
    if !theta.is_finite() {
        return theta;
    }
    let mut t = theta % TAU;
    if t <= -PI {
        t += TAU;
    } else if t > PI {
        t -= TAU;
    }
    t
}

/// Smallest absolute difference between two angles, in `[0, pi]`.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    normalize_angle(a - b).abs()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    theta: f64,
}

impl Pose2 {
    pub const IDENTITY: Pose2 = Pose2 {
        x: 0.0,
        y: 0.0,
        theta: 0.0,
    };

    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2 {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn set_theta(&mut self, theta: f64) {
        self.theta = normalize_angle(theta);
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.theta)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Pose2::new(v[0], v[1], v[2])
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    /// `self ⊕ other`.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )
    }

    pub fn inverse(&self) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(-(c * self.x + s * self.y), s * self.x - c * self.y, -self.theta)
    }

    /// `other` expressed in the frame of `self`.
    pub fn between(&self, other: &Pose2) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        Pose2::new(c * dx + s * dy, -s * dx + c * dy, other.theta - self.theta)
    }

    /// Applies the pose to a point in its local frame.
    pub fn transform_point(&self, px: f64, py: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (self.x + c * px - s * py, self.y + s * px + c * py)
    }

    pub fn distance(&self, other: &Pose2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl Default for Pose2 {
    fn default() -> Self {
        Pose2::IDENTITY
    }
}

impl fmt::Display for Pose2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.4}, {:.4}, {:.4})", self.x, self.y, self.theta)
    }
}

pub fn compose(a: &Pose2, b: &Pose2) -> Pose2 {
    a.compose(b)
}

/// `inv(a) ⊕ b`, so that `compose(a, inverse_compose(a, b)) == b`.
pub fn inverse_compose(a: &Pose2, b: &Pose2) -> Pose2 {
    a.between(b)
}

/// Symmetric positive definite covariance over `(x, y, theta)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Covariance3 {
    matrix: Matrix3<f64>,
    information: Matrix3<f64>,
}

impl Covariance3 {
    pub fn new(matrix: Matrix3<f64>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCovariance("non-finite entry".into()));
        }
        let asym = (matrix - matrix.transpose()).abs().max();
        if asym > 1e-12 * matrix.abs().max().max(1.0) {
            return Err(Error::InvalidCovariance("matrix is not symmetric".into()));
        }
        let chol = matrix
            .cholesky()
            .ok_or_else(|| Error::InvalidCovariance("matrix is not positive definite".into()))?;
        let information = chol.inverse();
        Ok(Covariance3 { matrix, information })
    }

    pub fn diagonal(xx: f64, yy: f64, tt: f64) -> Result<Self> {
        Covariance3::new(Matrix3::from_diagonal(&Vector3::new(xx, yy, tt)))
    }

    pub fn identity() -> Self {
        Covariance3 {
            matrix: Matrix3::identity(),
            information: Matrix3::identity(),
        }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    /// Inverse of the covariance.
    pub fn information(&self) -> &Matrix3<f64> {
        &self.information
    }

    /// Lower Cholesky factor, for sampling.
    pub fn sqrt(&self) -> Matrix3<f64> {
        // Positive definiteness was checked at construction.
        self.matrix.cholesky().map(|c| c.l()).unwrap_or_else(Matrix3::zeros)
    }
}

/// `rᵀ Σ⁻¹ r` with the angular component wrapped first.
pub fn weighted_sq_norm(residual: &Pose2, cov: &Covariance3) -> f64 {
    let r = residual.to_vector();
    let v = r.dot(&(cov.information() * r));
    v.max(0.0)
}

/// Like [`weighted_sq_norm`], but validates a raw matrix first.
pub fn weighted_sq_norm_checked(residual: &Pose2, cov: &Matrix3<f64>) -> Result<f64> {
    let cov = Covariance3::new(*cov)?;
    Ok(weighted_sq_norm(residual, &cov))
}

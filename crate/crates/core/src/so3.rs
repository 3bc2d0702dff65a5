//! Rotation helpers: elementary rotations, the exponential/logarithm maps and
//! the SO(3) Jacobians used by the plant and the finite-difference checks.

use nalgebra::{Matrix3, Vector3};

use crate::math::{atan2, cos, sin, sqrt};

const SMALL_ANGLE: f64 = 1e-6;
const SERIES_ANGLE: f64 = 1e-2;

/// Rotation about the base z-axis.
pub fn rot_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = (sin(angle), cos(angle));
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Rotation about the y-axis.
pub fn rot_y(angle: f64) -> Matrix3<f64> {
    let (s, c) = (sin(angle), cos(angle));
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Derivative of `rot_z(angle)` with respect to `angle`.
pub fn rot_z_derivative(angle: f64) -> Matrix3<f64> {
    let (s, c) = (sin(angle), cos(angle));
    Matrix3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0)
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// Rodrigues' formula.
pub fn exp(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta_sq = omega.norm_squared();
    let theta = sqrt(theta_sq);
    let k = skew(omega);
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0 - theta_sq / 6.0, 0.5 - theta_sq / 24.0)
    } else {
        (sin(theta) / theta, one_minus_cos_over_sq(theta))
    };
    Matrix3::identity() + k * a + k * k * b
}

// (1 - cos t) / t^2 without cancellation.
fn one_minus_cos_over_sq(theta: f64) -> f64 {
    let h = sin(0.5 * theta) / theta;
    2.0 * h * h
}

// (t - sin t) / t^3, by its series below the cancellation range.
fn minus_sin_over_cube(theta: f64) -> f64 {
    if theta < SERIES_ANGLE {
        let t2 = theta * theta;
        1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0 - t2 * t2 * t2 / 362_880.0
    } else {
        (theta - sin(theta)) / (theta * theta * theta)
    }
}

/// Rotation vector of `r`, with angle in `[0, pi]`.
pub fn log(r: &Matrix3<f64>) -> Vector3<f64> {
    let cos_theta = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let axis_sin = vee(&(r - r.transpose())) * 0.5;
    let sin_theta = axis_sin.norm();
    let theta = atan2(sin_theta, cos_theta);
    if cos_theta > 0.0 {
        // theta / sin(theta) stays well-conditioned away from pi.
        let scale = if sin_theta < SMALL_ANGLE {
            1.0 + sin_theta * sin_theta / 6.0
        } else {
            theta / sin_theta
        };
        return axis_sin * scale;
    }
    // Near pi the antisymmetric part vanishes; recover the axis from the symmetric part.
    let b = (r + r.transpose()) * 0.5 - Matrix3::identity() * cos_theta;
    let denom = 1.0 - cos_theta;
    let mut axis = Vector3::new(
        sqrt((b[(0, 0)] / denom).max(0.0)),
        sqrt((b[(1, 1)] / denom).max(0.0)),
        sqrt((b[(2, 2)] / denom).max(0.0)),
    );
    let pivot = axis.imax();
    for i in 0..3 {
        if i != pivot && b[(pivot, i)] < 0.0 {
            axis[i] = -axis[i];
        }
    }
    if axis.dot(&axis_sin) < 0.0 {
        axis = -axis;
    }
    axis.normalize() * theta
}

/// Right Jacobian: `exp(w + dw) ~= exp(w) exp(J_r(w) dw)`.
pub fn right_jacobian(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta_sq = omega.norm_squared();
    let theta = sqrt(theta_sq);
    let k = skew(omega);
    let (a, b) = if theta < SMALL_ANGLE {
        (0.5 - theta_sq / 24.0, 1.0 / 6.0 - theta_sq / 120.0)
    } else {
        (one_minus_cos_over_sq(theta), minus_sin_over_cube(theta))
    };
    Matrix3::identity() - k * a + k * k * b
}

/// Inverse of the left Jacobian: `log(exp(dw) exp(w)) ~= w + J_l^{-1}(w) dw`.
pub fn left_jacobian_inverse(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta_sq = omega.norm_squared();
    let theta = sqrt(theta_sq);
    let k = skew(omega);
    let c = if theta < SERIES_ANGLE {
        1.0 / 12.0 + theta_sq / 720.0 + theta_sq * theta_sq / 30_240.0
    } else {
        1.0 / theta_sq - (1.0 + cos(theta)) / (2.0 * theta * sin(theta))
    };
    Matrix3::identity() - k * 0.5 + k * k * c
}

/// Largest deviation of `r` from a proper rotation: orthonormality and unit determinant.
pub fn rotation_defect(r: &Matrix3<f64>) -> f64 {
    let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
    ortho.max((r.determinant() - 1.0).abs())
}

/// Geodesic angle between two rotations.
pub fn angle_between(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    log(&(a.transpose() * b)).norm()
}

//! Backbone geometry of the polynomial-curvature model.
//!
//! Frames: `{B}` is the base frame, `{1}` the bending-plane frame obtained by
//! rotating `{B}` by `-delta` about z. In `{1}` the backbone bends about the
//! y-axis, so the in-plane position is `L ∫ [sin θ, 0, cos θ] ds`.

use alloc::vec::Vec;

use nalgebra::Vector3;

use crate::math::{cos, sin};
use crate::shape::{cable_cosines, check_arclength};
use crate::{quadrature, so3, InstrumentParams, JointVector, RigidTransform, ShapeState};
use crate::{Error, Result};

pub fn curvature_at(state: &ShapeState, s: f64) -> Result<f64> {
    state.curvature_at(s)
}

pub fn bending_angle_at(state: &ShapeState, s: f64) -> Result<f64> {
    state.bending_angle_at(s)
}

/// Backbone position at `s` expressed in the bending-plane frame `{1}`. The
/// y-component is always exactly zero.
pub fn backbone_position(state: &ShapeState, params: &InstrumentParams, s: f64) -> Result<Vector3<f64>> {
    check_arclength(s)?;
    Ok(in_plane_position(state, params.length, s))
}

pub(crate) fn in_plane_position(state: &ShapeState, length: f64, s: f64) -> Vector3<f64> {
    let (mut x, mut z) = (0.0, 0.0);
    for (tau, w) in quadrature::points(0.0, s) {
        let theta = state.bending_angle_unchecked(tau);
        x += w * sin(theta);
        z += w * cos(theta);
    }
    Vector3::new(length * x, 0.0, length * z)
}

/// Pose of the cross-section at `s` in the base frame:
/// `Rz(-delta) · [Ry(theta(s)), p(s)] · Rz(delta)`.
pub fn forward_pose(state: &ShapeState, params: &InstrumentParams, s: f64) -> Result<RigidTransform> {
    check_arclength(s)?;
    Ok(pose_unchecked(state, params.length, s))
}

pub(crate) fn pose_unchecked(state: &ShapeState, length: f64, s: f64) -> RigidTransform {
    let base_to_plane = so3::rot_z(-state.delta);
    let plane_to_section = RigidTransform::new(
        so3::rot_y(state.bending_angle_unchecked(s)),
        in_plane_position(state, length, s),
    );
    let untwist = so3::rot_z(state.delta);
    RigidTransform::new(
        base_to_plane * plane_to_section.rotation * untwist,
        base_to_plane * plane_to_section.position,
    )
}

/// Tip pose, `forward_pose(state, params, 1)`.
pub fn tip_pose(state: &ShapeState, params: &InstrumentParams) -> RigidTransform {
    pose_unchecked(state, params.length, 1.0)
}

/// Backbone points in the base frame at `samples` evenly spaced arclengths
/// from base to tip inclusive.
pub fn backbone_polyline(state: &ShapeState, params: &InstrumentParams, samples: usize) -> Result<Vec<Vector3<f64>>> {
    if samples < 2 {
        return Err(Error::Domain { what: "polyline sample count", value: samples as f64 });
    }
    let base_to_plane = so3::rot_z(-state.delta);
    Ok((0..samples)
        .map(|j| {
            let s = j as f64 / (samples - 1) as f64;
            base_to_plane * in_plane_position(state, params.length, s)
        })
        .collect())
}

/// Cable lengths `L_i = L - theta_e · r · cos(sigma_i)` (mm).
pub fn cable_lengths(state: &ShapeState, params: &InstrumentParams) -> Vec<f64> {
    let theta_e = state.theta_e();
    cable_cosines(state, params)
        .map(|c| params.length - theta_e * params.radius * c)
        .collect()
}

/// Cable displacements `q_i = L_i - L` together with the angles `sigma_i`.
pub fn joint_displacements(state: &ShapeState, params: &InstrumentParams) -> JointVector {
    let theta_e = state.theta_e();
    let q = cable_cosines(state, params).map(|c| -theta_e * params.radius * c).collect();
    let sigma = (0..params.n_cables).map(|i| params.cable_angle(state, i)).collect();
    JointVector::new(q, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use core::f64::consts::PI;

    fn params() -> InstrumentParams {
        InstrumentParams { length: 60.0, radius: 3.0, gamma0: 0.0, beta: PI / 2.0, ..Default::default() }
    }

    #[test]
    fn straight_backbone() {
        let p = backbone_position(&ShapeState::straight(0.0), &params(), 1.0).unwrap();
        assert_relative_eq!(p, Vector3::new(0.0, 0.0, 60.0), epsilon = 1e-12);
        for delta in [-2.0, 0.0, 0.7, 3.0] {
            let t = forward_pose(&ShapeState::straight(delta), &params(), 1.0).unwrap();
            assert_relative_eq!(t.rotation, nalgebra::Matrix3::identity(), epsilon = 1e-15);
            assert_relative_eq!(t.position, Vector3::new(0.0, 0.0, 60.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn quarter_circle() {
        let arm = 2.0 * 60.0 / PI;
        let state = ShapeState::constant_curvature(PI / 2.0, 0.0);
        let p = backbone_position(&state, &params(), 1.0).unwrap();
        assert_relative_eq!(p, Vector3::new(arm, 0.0, arm), epsilon = 1e-10);
        assert!((arm - 38.197).abs() < 1e-3);
        let t = forward_pose(&state, &params(), 1.0).unwrap();
        assert_relative_eq!(t.rotation, so3::rot_y(PI / 2.0), epsilon = 1e-15);

        let t = forward_pose(&ShapeState::constant_curvature(PI / 2.0, PI / 2.0), &params(), 1.0).unwrap();
        assert_relative_eq!(t.position, Vector3::new(0.0, -arm, arm), epsilon = 1e-10);
    }

    #[test]
    fn pose_domain_error() {
        assert!(forward_pose(&ShapeState::default(), &params(), 1.5).is_err());
        assert!(backbone_position(&ShapeState::default(), &params(), -0.5).is_err());
    }

    #[test]
    fn cable_length_examples() {
        let l = cable_lengths(&ShapeState::straight(0.3), &params());
        assert!(l.iter().all(|&li| li == 60.0));
        assert!(joint_displacements(&ShapeState::straight(0.3), &params()).q.iter().all(|&q| q == 0.0));

        let l = cable_lengths(&ShapeState::constant_curvature(PI / 4.0, 0.0), &params());
        let d = 3.0 * PI / 4.0;
        let expected = [60.0 - d, 60.0, 60.0 + d, 60.0];
        for (got, want) in l.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert!((l[0] - 57.644).abs() < 1e-3 && (l[2] - 62.356).abs() < 1e-3);

        // Bending toward base angle -pi/2 shortens cable 4, which sits at 3pi/2.
        let q = joint_displacements(&ShapeState::constant_curvature(PI / 4.0, PI / 2.0), &params());
        let expected = [0.0, d, 0.0, -d];
        for (got, want) in q.q.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert_eq!(q.sigma().len(), 4);
        assert!((q.sigma()[1] - PI).abs() < 1e-15);
    }

    #[test]
    fn polyline_endpoints() {
        let state = ShapeState::new(0.4, -0.2, 0.5, 1.0);
        let pts = backbone_polyline(&state, &params(), 25).unwrap();
        assert_eq!(pts.len(), 25);
        assert_eq!(pts[0], Vector3::zeros());
        assert_relative_eq!(pts[24], tip_pose(&state, &params()).position, epsilon = 1e-12);
        assert!(backbone_polyline(&state, &params(), 1).is_err());
    }
}

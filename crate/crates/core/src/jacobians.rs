//! Closed-form Jacobians of the polynomial-curvature model.
//!
//! - [`joint_shape_jacobian`]: `dq/dS`, one row per cable.
//! - [`task_shape_jacobian`]: tip position rate and spatial angular velocity
//!   (axis-angle rate expressed in `{B}`) per unit shape rate.
//!
//! [`finite_difference_check`] compares both against central differences of
//! the forward model.

use nalgebra::{Dyn, Matrix3x4, Matrix6x4, OMatrix, U4, Vector3, Vector4};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::kinematics::{in_plane_position, joint_displacements, pose_unchecked};
use crate::math::{cos, sin};
use crate::{quadrature, so3, Error, InstrumentParams, Result, ShapeState};

/// `dθ_e/dm_i`; every column of the m-block scales with these.
pub const MODAL_WEIGHTS: [f64; 3] = [1.0, 0.5, 1.0 / 3.0];

#[derive(Debug, Clone, PartialEq)]
pub struct JointShapeJacobian {
    /// `n_cables × 4`, mm per unit shape component.
    pub matrix: OMatrix<f64, Dyn, U4>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskShapeJacobian {
    /// Tip position rate (mm per unit shape component).
    pub position_block: Matrix3x4<f64>,
    /// Spatial angular velocity of the tip frame (rad per unit shape component).
    pub rotation_block: Matrix3x4<f64>,
}

impl TaskShapeJacobian {
    /// `[position_block; rotation_block]`.
    pub fn stacked(&self) -> Matrix6x4<f64> {
        let mut j = Matrix6x4::zeros();
        j.fixed_view_mut::<3, 4>(0, 0).copy_from(&self.position_block);
        j.fixed_view_mut::<3, 4>(3, 0).copy_from(&self.rotation_block);
        j
    }
}

/// Row `i` is `-r [cos σ_i, cos σ_i / 2, cos σ_i / 3, -θ_e sin σ_i]`.
pub fn joint_shape_jacobian(state: &ShapeState, params: &InstrumentParams) -> JointShapeJacobian {
    let theta_e = state.theta_e();
    let r = params.radius;
    let mut matrix = OMatrix::<f64, Dyn, U4>::zeros(params.n_cables);
    for i in 0..params.n_cables {
        let sigma = params.cable_angle(state, i);
        let (s, c) = (sin(sigma), cos(sigma));
        for (k, w) in MODAL_WEIGHTS.iter().enumerate() {
            matrix[(i, k)] = -r * c * w;
        }
        matrix[(i, 3)] = r * theta_e * s;
    }
    JointShapeJacobian { matrix }
}

pub fn task_shape_jacobian(state: &ShapeState, params: &InstrumentParams) -> TaskShapeJacobian {
    let length = params.length;
    let base_to_plane = so3::rot_z(-state.delta);

    // d(p1)/dm_i = L ∫ [cos θ, 0, -sin θ] τ^{i+1}/(i+1) dτ
    let mut modal = [Vector3::zeros(); 3];
    for (tau, w) in quadrature::points(0.0, 1.0) {
        let theta = state.bending_angle_unchecked(tau);
        let dir = Vector3::new(cos(theta), 0.0, -sin(theta));
        let mut basis = tau;
        for (i, col) in modal.iter_mut().enumerate() {
            basis *= if i == 0 { 1.0 } else { tau };
            *col += dir * (w * length * basis / (i as f64 + 1.0));
        }
    }

    let mut position_block = Matrix3x4::zeros();
    for (i, col) in modal.iter().enumerate() {
        position_block.set_column(i, &(base_to_plane * col));
    }
    // p1 does not depend on delta.
    let tip_in_plane = in_plane_position(state, length, 1.0);
    position_block.set_column(3, &(so3::rot_z_derivative(-state.delta) * -tip_in_plane));

    let theta_e = state.theta_e();
    let (sd, cd) = (sin(state.delta), cos(state.delta));
    let (st, ct) = (sin(theta_e), cos(theta_e));
    // θ-rate turns about Rz(-δ) e2; δ-rate gives -e3 + Rz(-δ) Ry(θ) e3.
    let bend_axis = Vector3::new(sd, cd, 0.0);
    let mut rotation_block = Matrix3x4::zeros();
    for (i, w) in MODAL_WEIGHTS.iter().enumerate() {
        rotation_block.set_column(i, &(bend_axis * *w));
    }
    rotation_block.set_column(3, &Vector3::new(cd * st, -sd * st, ct - 1.0));

    TaskShapeJacobian { position_block, rotation_block }
}

/// Worst-case disagreement between the analytic Jacobians and central differences.
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FiniteDifferenceReport {
    pub max_abs_error_position: f64,
    pub max_abs_error_rotation: f64,
    pub max_abs_error_joint: f64,
}

impl FiniteDifferenceReport {
    pub fn max_error(&self) -> f64 {
        self.max_abs_error_position.max(self.max_abs_error_rotation).max(self.max_abs_error_joint)
    }

    /// Component-wise maximum of two reports.
    pub fn merge(&self, other: &FiniteDifferenceReport) -> FiniteDifferenceReport {
        FiniteDifferenceReport {
            max_abs_error_position: self.max_abs_error_position.max(other.max_abs_error_position),
            max_abs_error_rotation: self.max_abs_error_rotation.max(other.max_abs_error_rotation),
            max_abs_error_joint: self.max_abs_error_joint.max(other.max_abs_error_joint),
        }
    }
}

/// Perturbs each shape component by `±step` and compares the analytic
/// Jacobians with central differences of the cable displacements, the tip
/// position, and the spatial rotation increment `log(R₊ R₋ᵀ)`.
pub fn finite_difference_check(
    state: &ShapeState,
    params: &InstrumentParams,
    step: f64,
) -> Result<FiniteDifferenceReport> {
    if !(1e-9..=1e-3).contains(&step) {
        return Err(Error::Domain { what: "finite-difference step", value: step });
    }
    state.validate()?;
    params.validate()?;

    let joint = joint_shape_jacobian(state, params);
    let task = task_shape_jacobian(state, params);
    let mut report = FiniteDifferenceReport::default();
    let base = state.to_vector();

    for k in 0..4 {
        let mut dir = Vector4::zeros();
        dir[k] = step;
        let plus = ShapeState::from_vector(&(base + dir));
        let minus = ShapeState::from_vector(&(base - dir));

        let q_plus = joint_displacements(&plus, params).q;
        let q_minus = joint_displacements(&minus, params).q;
        for i in 0..params.n_cables {
            let fd = (q_plus[i] - q_minus[i]) / (2.0 * step);
            report.max_abs_error_joint = report.max_abs_error_joint.max((fd - joint.matrix[(i, k)]).abs());
        }

        let t_plus = pose_unchecked(&plus, params.length, 1.0);
        let t_minus = pose_unchecked(&minus, params.length, 1.0);
        let dp = (t_plus.position - t_minus.position) / (2.0 * step);
        let dw = so3::log(&(t_plus.rotation * t_minus.rotation.transpose())) / (2.0 * step);
        report.max_abs_error_position = report
            .max_abs_error_position
            .max((dp - task.position_block.column(k)).abs().max());
        report.max_abs_error_rotation = report
            .max_abs_error_rotation
            .max((dw - task.rotation_block.column(k)).abs().max());
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use core::f64::consts::PI;
    use nalgebra::Matrix3x4;

    fn params() -> InstrumentParams {
        InstrumentParams { length: 60.0, radius: 3.0, gamma0: 0.0, beta: PI / 2.0, ..Default::default() }
    }

    #[test]
    fn joint_jacobian_straight() {
        let j = joint_shape_jacobian(&ShapeState::straight(0.0), &params()).matrix;
        let expected = [
            [-3.0, -1.5, -1.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
            [3.0, 1.5, 1.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
        ];
        for i in 0..4 {
            for k in 0..4 {
                assert!((j[(i, k)] - expected[i][k]).abs() < 1e-15, "({i},{k}) = {}", j[(i, k)]);
            }
        }
    }

    #[test]
    fn joint_jacobian_delta_entry() {
        let j = joint_shape_jacobian(&ShapeState::constant_curvature(PI / 2.0, 0.0), &params()).matrix;
        assert!((j[(1, 3)] - 3.0 * PI / 2.0).abs() < 1e-12);
        assert!((j[(1, 3)] - 4.712).abs() < 1e-3);
    }

    #[test]
    fn joint_jacobian_column_scaling() {
        let state = ShapeState::new(0.7, -0.4, 1.1, 2.3);
        let j = joint_shape_jacobian(&state, &params()).matrix;
        for i in 0..4 {
            assert_eq!(j[(i, 1)], j[(i, 0)] / 2.0);
            assert!((j[(i, 2)] - j[(i, 0)] / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn task_jacobian_straight() {
        let jac = task_shape_jacobian(&ShapeState::straight(0.0), &params());
        assert_relative_eq!(jac.position_block.column(0).into_owned(), Vector3::new(30.0, 0.0, 0.0), epsilon = 1e-12);
        let expected = Matrix3x4::new(0.0, 0.0, 0.0, 0.0, 1.0, 0.5, 1.0 / 3.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_relative_eq!(jac.rotation_block, expected, epsilon = 1e-15);
    }

    #[test]
    fn straight_instrument_spinning_its_plane_does_not_rotate_tip() {
        for delta in [-1.0, 0.0, 2.5] {
            let jac = task_shape_jacobian(&ShapeState::straight(delta), &params());
            assert_eq!(jac.rotation_block.column(3).into_owned(), Vector3::zeros());
            let j = joint_shape_jacobian(&ShapeState::straight(delta), &params()).matrix;
            assert!(j.column(3).iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn fd_check_step_range() {
        let s = ShapeState::default();
        assert!(finite_difference_check(&s, &params(), 1e-2).is_err());
        assert!(finite_difference_check(&s, &params(), 1e-10).is_err());
        finite_difference_check(&s, &params(), 1e-6).unwrap();
    }

    #[test]
    fn fd_check_straight() {
        let report = finite_difference_check(&ShapeState::straight(0.0), &params(), 1e-6).unwrap();
        assert!(report.max_abs_error_joint < 1e-8, "{report:?}");
        assert!(report.max_error() < 1e-5, "{report:?}");
    }

    #[test]
    fn fd_check_bent_states() {
        for state in [
            ShapeState::new(0.6, 0.2, -0.1, 1.0),
            ShapeState::new(1.2, -0.8, 0.9, -2.7),
            ShapeState::new(0.05, 0.1, 0.0, 3.1),
        ] {
            let report = finite_difference_check(&state, &params(), 1e-6).unwrap();
            assert!(report.max_error() < 1e-5, "{state:?}: {report:?}");
        }
    }

    #[test]
    fn stacked_layout() {
        let jac = task_shape_jacobian(&ShapeState::new(0.3, 0.1, 0.2, 0.4), &params());
        let s = jac.stacked();
        assert_eq!(s.fixed_view::<3, 4>(0, 0), jac.position_block);
        assert_eq!(s.fixed_view::<3, 4>(3, 0), jac.rotation_block);
    }
}

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use polycurve_core::jacobians::{finite_difference_check, joint_shape_jacobian, task_shape_jacobian};
use polycurve_core::kinematics::tip_pose;
use polycurve_core::{so3, InstrumentParams, ShapeState};
use proptest::prelude::*;

#[test]
fn analytic_jacobians_match_central_differences() {
    let params = InstrumentParams::default();
    let mut rng = common::rng(21);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let state = common::state_with_end_angle(&mut rng, 0.1, 1.5);
        let report = finite_difference_check(&state, &params, 1e-6).unwrap();
        worst = worst.max(report.max_error());
    }
    assert!(worst < 1e-5, "worst error {worst:e}");
    assert!(start.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn joint_jacobian_scales_with_radius() {
    let mut rng = common::rng(22);
    let params = InstrumentParams::default();
    let wide = InstrumentParams { radius: 2.0 * params.radius, ..params };
    for _ in 0..20 {
        let state = common::bounded_state(&mut rng);
        let a = joint_shape_jacobian(&state, &params).matrix;
        let b = joint_shape_jacobian(&state, &wide).matrix;
        assert!((b - a * 2.0).norm() < 1e-12);
    }
}

#[test]
fn position_jacobian_scales_with_length() {
    let mut rng = common::rng(23);
    let params = InstrumentParams::default();
    let long = InstrumentParams { length: 3.0 * params.length, ..params };
    for _ in 0..20 {
        let state = common::bounded_state(&mut rng);
        let a = task_shape_jacobian(&state, &params);
        let b = task_shape_jacobian(&state, &long);
        assert!((b.position_block - a.position_block * 3.0).norm() < 1e-9);
        assert!((b.rotation_block - a.rotation_block).norm() < 1e-14);
    }
}

#[test]
fn small_step_is_predicted_to_first_order() {
    let params = InstrumentParams::default();
    let mut rng = common::rng(24);
    for _ in 0..20 {
        let state = common::state_with_end_angle(&mut rng, 0.1, 1.5);
        let j = task_shape_jacobian(&state, &params);
        let dir = nalgebra::Vector4::new(0.3, -0.2, 0.5, 0.7);
        let h = 1e-5;
        let moved = ShapeState::from_vector(&(state.to_vector() + dir * h));
        let (a, b) = (tip_pose(&state, &params), tip_pose(&moved, &params));
        let dp = (b.position - a.position) / h;
        let dw = so3::log(&(b.rotation * a.rotation.transpose())) / h;
        assert!((dp - j.position_block * dir).norm() < 1e-3);
        assert!((dw - j.rotation_block * dir).norm() < 1e-4);
    }
}

proptest! {
    #[test]
    fn straight_shape_spin_is_invisible(delta in -PI..PI) {
        let params = InstrumentParams::default();
        let j = task_shape_jacobian(&ShapeState::straight(delta), &params);
        prop_assert!(j.position_block.column(3).norm() < 1e-12);
        prop_assert!(j.rotation_block.column(3).norm() < 1e-12);
        let q = joint_shape_jacobian(&ShapeState::straight(delta), &params).matrix;
        prop_assert!(q.column(3).norm() < 1e-12);
    }
}

//! Deterministic self-check report.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix3x4, Vector3};
use polycurve_core::jacobians::{finite_difference_check, task_shape_jacobian, FiniteDifferenceReport, MODAL_WEIGHTS};
use polycurve_core::kinematics::tip_pose;
use polycurve_core::plant::{plant_equilibrium, tip_pose_change, ElasticaPlant};
use polycurve_core::solver::solve_constant_curvature;
use polycurve_core::statics::{gradient_finite_difference_check, gradient_with_coefficients, GRAM};
use polycurve_core::{so3, InstrumentParams, ShapeState, TensionVector, Wrench};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::spec::articulation_tension;
use crate::Result;

pub const STATES: usize = 100;
pub const JACOBIAN_STEP: f64 = 1e-6;
pub const JACOBIAN_TOLERANCE: f64 = 1e-5;
pub const GRADIENT_STEP: f64 = 1e-6;
pub const GRADIENT_TOLERANCE: f64 = 1e-8;
pub const CC_TOLERANCE: f64 = 1e-10;
pub const MESH_TOLERANCE: f64 = 1e-3;

/// Coefficient matrix of an alternate, commonly quoted form of `∂U/∂m`. It
/// differs from the Gram matrix in the (0,1) and (1,2) entries and is kept
/// here only to document that mismatch.
pub const ALTERNATE_COEFFICIENTS: [[f64; 3]; 3] =
    [[1.0, 1.0 / 4.0, 1.0 / 3.0], [1.0 / 4.0, 1.0 / 3.0, 1.0 / 8.0], [1.0 / 3.0, 1.0 / 8.0, 1.0 / 5.0]];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Coefficients used for the gradient under test; the Gram matrix unless a fault is injected.
    pub gradient_coefficients: Matrix3<f64>,
}

impl VerifyConfig {
    pub fn new(seed: u64) -> Self {
        VerifyConfig { seed, gradient_coefficients: GRAM }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianSection {
    pub states: usize,
    pub step: f64,
    pub tolerance: f64,
    pub max_abs_error_position: f64,
    pub max_abs_error_rotation: f64,
    pub max_abs_error_joint: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientComparison {
    pub coefficients: [[f64; 3]; 3],
    /// Entries `[row, col]` that differ from the Gram matrix.
    pub differing_entries: Vec<[usize; 2]>,
    pub max_relative_error: f64,
    pub expected_mismatch: bool,
    pub mismatch_observed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientSection {
    pub states: usize,
    pub step: f64,
    pub tolerance: f64,
    pub max_relative_error: f64,
    pub passed: bool,
    /// Where the worst disagreement occurred, when the check fails.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
    pub alternate_form: CoefficientComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcSection {
    pub states: usize,
    pub tolerance: f64,
    pub max_position_error_over_length: f64,
    pub max_rotation_error: f64,
    pub max_round_trip_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshCase {
    pub name: String,
    pub tip_bend_rad: f64,
    pub position_change: f64,
    pub rotation_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshSection {
    pub coarse_links: usize,
    pub fine_links: usize,
    pub tolerance: f64,
    pub cases: Vec<MeshCase>,
    pub passed: bool,
}

/// Alternate Jacobian forms compared against finite differences; recorded, never failing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternateForms {
    pub delta_position_column_max_abs_error: f64,
    pub rotation_block_max_abs_error: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub format: String,
    pub version: String,
    pub seed: u64,
    pub passed: bool,
    pub jacobian: JacobianSection,
    pub gradient: GradientSection,
    pub cc_reduction: CcSection,
    pub plant_mesh: MeshSection,
    pub informational: AlternateForms,
}

/// Shape with end angle uniform in `[0.1, 1.5]`, higher modes in `[-1, 1]`.
pub fn random_state(rng: &mut ChaCha8Rng) -> ShapeState {
    let theta_e = rng.random_range(0.1..=1.5);
    let m1 = rng.random_range(-1.0..=1.0);
    let m2 = rng.random_range(-1.0..=1.0);
    let delta = PI - rng.random_range(0.0..2.0 * PI);
    ShapeState::new(theta_e - m1 / 2.0 - m2 / 3.0, m1, m2, delta)
}

fn states(seed: u64) -> Vec<ShapeState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..STATES).map(|_| random_state(&mut rng)).collect()
}

pub fn jacobian_section(states: &[ShapeState], params: &InstrumentParams) -> Result<JacobianSection> {
    let mut report = FiniteDifferenceReport::default();
    for s in states {
        report = report.merge(&finite_difference_check(s, params, JACOBIAN_STEP)?);
    }
    Ok(JacobianSection {
        states: states.len(),
        step: JACOBIAN_STEP,
        tolerance: JACOBIAN_TOLERANCE,
        max_abs_error_position: report.max_abs_error_position,
        max_abs_error_rotation: report.max_abs_error_rotation,
        max_abs_error_joint: report.max_abs_error_joint,
        passed: report.max_error() < JACOBIAN_TOLERANCE,
    })
}

const COMPONENTS: [&str; 4] = ["m0", "m1", "m2", "delta"];

fn gradient_section(states: &[ShapeState], params: &InstrumentParams, coefficients: &Matrix3<f64>) -> Result<GradientSection> {
    let mut worst = 0.0;
    let mut diagnostic = None;
    for s in states {
        let check = gradient_finite_difference_check(s, params, GRADIENT_STEP, |st, p| {
            gradient_with_coefficients(st, p, coefficients)
        })?;
        if check.relative_error > worst {
            worst = check.relative_error;
            if worst >= GRADIENT_TOLERANCE {
                diagnostic = Some(format!(
                    "dU/d{} disagrees with finite differences by {:.3e} (relative) at state [{}, {}, {}, {}]",
                    COMPONENTS[check.worst_component], check.relative_error, s.m0, s.m1, s.m2, s.delta
                ));
            }
        }
    }

    let alternate = Matrix3::from_fn(|i, j| ALTERNATE_COEFFICIENTS[i][j]);
    let mut differing = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            if (alternate[(i, j)] - GRAM[(i, j)]).abs() > 1e-15 {
                differing.push([i, j]);
            }
        }
    }
    let mut alt_worst: f64 = 0.0;
    for s in states {
        let check = gradient_finite_difference_check(s, params, GRADIENT_STEP, |st, p| {
            gradient_with_coefficients(st, p, &alternate)
        })?;
        alt_worst = alt_worst.max(check.relative_error);
    }

    Ok(GradientSection {
        states: states.len(),
        step: GRADIENT_STEP,
        tolerance: GRADIENT_TOLERANCE,
        max_relative_error: worst,
        passed: worst < GRADIENT_TOLERANCE,
        diagnostic,
        alternate_form: CoefficientComparison {
            coefficients: ALTERNATE_COEFFICIENTS,
            differing_entries: differing,
            max_relative_error: alt_worst,
            expected_mismatch: true,
            mismatch_observed: alt_worst >= GRADIENT_TOLERANCE,
        },
    })
}

/// Closed-form constant-curvature tip pose.
pub fn constant_curvature_tip(theta: f64, delta: f64, length: f64) -> (Matrix3<f64>, Vector3<f64>) {
    let in_plane = if theta.abs() < 1e-12 {
        Vector3::new(0.0, 0.0, length)
    } else {
        Vector3::new(length * (1.0 - theta.cos()) / theta, 0.0, length * theta.sin() / theta)
    };
    let plane = so3::rot_z(-delta);
    (plane * so3::rot_y(theta) * plane.transpose(), plane * in_plane)
}

fn cc_section(seed: u64, params: &InstrumentParams) -> Result<CcSection> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let (mut pos, mut rot, mut trip): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..STATES {
        let theta = rng.random_range(0.05..3.0);
        let delta = PI - rng.random_range(0.0..2.0 * PI);
        let state = ShapeState::constant_curvature(theta, delta);
        let pose = tip_pose(&state, params);
        let (r, p) = constant_curvature_tip(theta, delta, params.length);
        pos = pos.max((pose.position - p).norm() / params.length);
        rot = rot.max((pose.rotation - r).norm());
        let fit = solve_constant_curvature(&pose, params)?;
        trip = trip.max((fit.to_vector() - state.to_vector()).amax());
    }
    Ok(CcSection {
        states: STATES,
        tolerance: CC_TOLERANCE,
        max_position_error_over_length: pos,
        max_rotation_error: rot,
        max_round_trip_error: trip,
        passed: pos < CC_TOLERANCE && rot < CC_TOLERANCE && trip < CC_TOLERANCE,
    })
}

/// Load cases used for the mesh-convergence check.
pub fn mesh_cases(params: &InstrumentParams) -> Vec<(String, TensionVector, Wrench)> {
    vec![
        ("articulation 0.8 rad".into(), articulation_tension(params, 0.8, 0.0, 0.5), Wrench::zero()),
        ("articulation 1.5 rad".into(), articulation_tension(params, 1.5, 0.0, 0.5), Wrench::zero()),
        (
            "articulation 1.0 rad with tip force".into(),
            articulation_tension(params, 1.0, 2.4, 0.5),
            Wrench::from_force(Vector3::new(-0.05, 0.02, 0.0)),
        ),
    ]
}

pub fn mesh_section(params: &InstrumentParams) -> Result<MeshSection> {
    let coarse = ElasticaPlant::new(*params, 50)?;
    let fine = coarse.with_links(100)?;
    let mut cases = Vec::new();
    let mut passed = true;
    for (name, tau, wrench) in mesh_cases(params) {
        let a = plant_equilibrium(&coarse, &tau, &wrench)?;
        let b = plant_equilibrium(&fine, &tau, &wrench)?;
        let (dp, dr) = tip_pose_change(&a.tip, &b.tip, params.length);
        passed &= dp < MESH_TOLERANCE && dr < MESH_TOLERANCE;
        cases.push(MeshCase {
            name,
            tip_bend_rad: so3::log(&a.tip.rotation).norm(),
            position_change: dp,
            rotation_change: dr,
        });
    }
    Ok(MeshSection { coarse_links: 50, fine_links: 100, tolerance: MESH_TOLERANCE, cases, passed })
}

/// `Rz(-δ) L ∫ [cos θ, -sin θ, 0] dτ`, an alternate form of the δ column of the position Jacobian.
fn alternate_delta_column(state: &ShapeState, params: &InstrumentParams) -> Vector3<f64> {
    let steps = 2000;
    let h = 1.0 / steps as f64;
    let mut v = Vector3::zeros();
    for k in 0..steps {
        let theta = state.bending_angle_at((k as f64 + 0.5) * h).expect("arclength in range");
        v += Vector3::new(theta.cos(), -theta.sin(), 0.0) * h;
    }
    so3::rot_z(-state.delta) * v * params.length
}

/// Alternate angular Jacobian built from `θ_e` and `δ`.
fn alternate_rotation_block(state: &ShapeState) -> Matrix3x4<f64> {
    let (st, ct) = state.theta_e().sin_cos();
    let (sd, cd) = state.delta.sin_cos();
    let mut j = Matrix3x4::zeros();
    for (k, w) in MODAL_WEIGHTS.iter().enumerate() {
        j[(0, k)] = -ct * sd * w;
        j[(1, k)] = ct * cd * w;
        j[(2, k)] = -st * w;
    }
    j[(0, 3)] = st * cd;
    j[(1, 3)] = st * sd;
    j[(2, 3)] = ct - 1.0;
    j
}

fn alternate_forms(states: &[ShapeState], params: &InstrumentParams) -> AlternateForms {
    let h = JACOBIAN_STEP;
    let (mut col, mut block): (f64, f64) = (0.0, 0.0);
    for s in states {
        let shifted = |d: f64| ShapeState { delta: s.delta + d, ..*s };
        let fd_delta = (tip_pose(&shifted(h), params).position - tip_pose(&shifted(-h), params).position) / (2.0 * h);
        col = col.max((alternate_delta_column(s, params) - fd_delta).amax());

        let analytic = task_shape_jacobian(s, params).rotation_block;
        block = block.max((alternate_rotation_block(s) - analytic).amax());
    }
    AlternateForms {
        delta_position_column_max_abs_error: col,
        rotation_block_max_abs_error: block,
        note: "alternate forms are compared with finite differences (position) and the verified analytic block (rotation); disagreement is expected and does not fail the report".into(),
    }
}

pub fn run_verify(config: &VerifyConfig) -> Result<VerifyReport> {
    let params = InstrumentParams::default();
    let states = states(config.seed);
    let jacobian = jacobian_section(&states, &params)?;
    let gradient = gradient_section(&states, &params, &config.gradient_coefficients)?;
    let cc_reduction = cc_section(config.seed, &params)?;
    let plant_mesh = mesh_section(&params)?;
    let informational = alternate_forms(&states, &params);
    let passed = jacobian.passed && gradient.passed && cc_reduction.passed && plant_mesh.passed;
    Ok(VerifyReport {
        format: "polycurve-verify".into(),
        version: crate::io::VERSION.into(),
        seed: config.seed,
        passed,
        jacobian,
        gradient,
        cc_reduction,
        plant_mesh,
        informational,
    })
}

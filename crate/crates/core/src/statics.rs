//! Elastic energy, virtual-work equilibrium and tip-wrench estimation.
//!
//! Generalized forces on the shape coordinates balance as
//!
//! ```text
//! -J_qSᵀ τ + J_xSᵀ F = ∇U
//! ```
//!
//! Cable tensions do positive work when the cable shortens, and `q_i = L_i - L`
//! is negative for a shortened cable, so the actuation term enters with a minus sign.
//! With four equations and a six-component wrench the estimate is the
//! solution closest to a prior `F0`, obtained with an SVD pseudo-inverse.

use alloc::vec::Vec;

use nalgebra::{Matrix3, Matrix4x6, Matrix6, Vector3, Vector4, Vector6, SVD};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::jacobians::{joint_shape_jacobian, task_shape_jacobian};
use crate::{Error, InstrumentParams, Result, ShapeState};

/// Relative singular-value cutoff for the wrench pseudo-inverse.
pub const PSEUDO_INVERSE_CUTOFF: f64 = 1e-8;

/// Gram matrix of the curvature basis `{1, s, s²}` on `[0, 1]`.
pub const GRAM: Matrix3<f64> = Matrix3::new(
    1.0, 1.0 / 2.0, 1.0 / 3.0,
    1.0 / 2.0, 1.0 / 3.0, 1.0 / 4.0,
    1.0 / 3.0, 1.0 / 4.0, 1.0 / 5.0,
);

/// External load at the tip in the base frame: force (N) and moment (N·mm).
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub moment: Vector3<f64>,
}

impl Wrench {
    pub fn new(force: Vector3<f64>, moment: Vector3<f64>) -> Self {
        Wrench { force, moment }
    }

    pub fn zero() -> Self {
        Wrench::default()
    }

    pub fn from_force(force: Vector3<f64>) -> Self {
        Wrench::new(force, Vector3::zeros())
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.force.x, self.force.y, self.force.z, self.moment.x, self.moment.y, self.moment.z)
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Wrench::new(v.fixed_rows::<3>(0).into_owned(), v.fixed_rows::<3>(3).into_owned())
    }

    pub fn is_finite(&self) -> bool {
        self.force.iter().chain(self.moment.iter()).all(|v| v.is_finite())
    }

    /// Same physical load seen from a frame rotated by `rotation`.
    pub fn rotated(&self, rotation: &Matrix3<f64>) -> Self {
        Wrench::new(rotation * self.force, rotation * self.moment)
    }

    /// Norm with moments divided by `length`, the metric minimized by [`estimate_wrench`].
    pub fn scaled_norm(&self, length: f64) -> f64 {
        crate::math::sqrt(self.force.norm_squared() + self.moment.norm_squared() / (length * length))
    }
}

/// Cable tensions in newtons, one per cable.
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[derive(Debug, Clone, PartialEq)]
pub struct TensionVector {
    tau: Vec<f64>,
}

impl TensionVector {
    /// Rejects NaN and negative entries: cables cannot push.
    pub fn new(tau: Vec<f64>) -> Result<Self> {
        for (index, &value) in tau.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite("cable tension"));
            }
            if value < 0.0 {
                return Err(Error::NegativeTension { index, value });
            }
        }
        Ok(TensionVector { tau })
    }

    pub fn zeros(n: usize) -> Self {
        TensionVector { tau: alloc::vec![0.0; n] }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.tau
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub(crate) fn check_count(&self, params: &InstrumentParams) -> Result<()> {
        if self.tau.len() != params.n_cables {
            return Err(Error::CableCount { expected: params.n_cables, found: self.tau.len() });
        }
        Ok(())
    }
}

#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumReport {
    pub wrench_estimate: Wrench,
    /// Generalized-force residual at the estimate (N·mm per unit shape coordinate).
    pub residual: Vector4<f64>,
    pub rank_deficiency_flag: bool,
    /// Number of singular directions dropped by the pseudo-inverse.
    pub truncated_directions: usize,
}

/// `U = EI / (2L) ∫₀¹ κ(s)² ds = EI / (2L) mᵀ G m` (N·mm).
///
/// `κ` is measured per unit normalized arclength, so the physical curvature is `κ / L`.
pub fn elastic_energy(state: &ShapeState, params: &InstrumentParams) -> f64 {
    let m = state.modes();
    0.5 * params.flexural_rigidity() / params.length * m.dot(&(GRAM * m))
}

/// `∇U = EI / L [G m; 0]`; the bending direction stores no energy.
pub fn elastic_energy_gradient(state: &ShapeState, params: &InstrumentParams) -> Vector4<f64> {
    gradient_with_coefficients(state, params, &GRAM)
}

/// `EI / L [C m; 0]` for an arbitrary coefficient matrix `C`; [`GRAM`] gives the true gradient.
pub fn gradient_with_coefficients(state: &ShapeState, params: &InstrumentParams, coefficients: &Matrix3<f64>) -> Vector4<f64> {
    let g = coefficients * state.modes() * (params.flexural_rigidity() / params.length);
    Vector4::new(g.x, g.y, g.z, 0.0)
}

/// Outcome of comparing a gradient with central differences of [`elastic_energy`].
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    /// Largest entry-wise gap relative to the largest gradient entry.
    pub relative_error: f64,
    /// Shape component (`0..4` for `m0, m1, m2, delta`) where the gap is largest.
    pub worst_component: usize,
}

pub fn gradient_finite_difference_check<G>(
    state: &ShapeState,
    params: &InstrumentParams,
    step: f64,
    gradient: G,
) -> Result<GradientCheck>
where
    G: Fn(&ShapeState, &InstrumentParams) -> Vector4<f64>,
{
    state.validate()?;
    params.validate()?;
    if !(1e-9..=1e-3).contains(&step) {
        return Err(Error::Domain { what: "finite-difference step", value: step });
    }
    let analytic = gradient(state, params);
    let base = state.to_vector();
    let mut worst = 0.0;
    let mut worst_component = 0;
    for j in 0..4 {
        let mut plus = base;
        plus[j] += step;
        let mut minus = base;
        minus[j] -= step;
        let fd = (elastic_energy(&ShapeState::from_vector(&plus), params)
            - elastic_energy(&ShapeState::from_vector(&minus), params))
            / (2.0 * step);
        let gap = (fd - analytic[j]).abs();
        if gap > worst {
            worst = gap;
            worst_component = j;
        }
    }
    let scale = analytic.amax().max(f64::MIN_POSITIVE);
    Ok(GradientCheck { relative_error: worst / scale, worst_component })
}

/// `-J_qSᵀ τ + J_xSᵀ F - ∇U`.
pub fn equilibrium_residual(
    state: &ShapeState,
    params: &InstrumentParams,
    tension: &TensionVector,
    wrench: &Wrench,
) -> Result<Vector4<f64>> {
    check_inputs(state, params, tension)?;
    if !wrench.is_finite() {
        return Err(Error::NonFinite("wrench"));
    }
    let jq = joint_shape_jacobian(state, params).matrix;
    let jx = task_shape_jacobian(state, params).stacked();
    let tau = nalgebra::DVector::from_column_slice(tension.as_slice());
    let actuation: Vector4<f64> = jq.transpose() * tau;
    Ok(-actuation + jx.transpose() * wrench.to_vector() - elastic_energy_gradient(state, params))
}

/// Wrench that satisfies the equilibrium in the least-squares sense and is
/// closest to `prior` in the length-scaled norm (see [`Wrench::scaled_norm`]).
/// With a zero prior this is the minimum-norm solution.
pub fn estimate_wrench(
    state: &ShapeState,
    params: &InstrumentParams,
    tension: &TensionVector,
    prior: &Wrench,
) -> Result<EquilibriumReport> {
    check_inputs(state, params, tension)?;
    if !prior.is_finite() {
        return Err(Error::NonFinite("prior wrench"));
    }
    let jq = joint_shape_jacobian(state, params).matrix;
    let jx = task_shape_jacobian(state, params).stacked();
    let tau = nalgebra::DVector::from_column_slice(tension.as_slice());
    let actuation: Vector4<f64> = jq.transpose() * tau;
    let rhs = elastic_energy_gradient(state, params) + actuation;

    // Unknown x = [f; m / L] keeps force and moment columns commensurate.
    let length = params.length;
    let scale = Vector6::new(1.0, 1.0, 1.0, length, length, length);
    let a: Matrix4x6<f64> = jx.transpose() * Matrix6::from_diagonal(&scale);

    let (pinv, truncated) = pseudo_inverse(&a);
    let x_prior = prior.to_vector().component_div(&scale);
    let projector = Matrix6::identity() - pinv * a;
    let x = pinv * rhs + projector * x_prior;
    let wrench_estimate = Wrench::from_vector(&x.component_mul(&scale));

    let residual = -actuation + jx.transpose() * wrench_estimate.to_vector() - (rhs - actuation);
    Ok(EquilibriumReport {
        wrench_estimate,
        residual,
        rank_deficiency_flag: truncated > 0,
        truncated_directions: truncated,
    })
}

/// Pseudo-inverse of a 4×6 matrix with relative truncation; returns the number of dropped directions.
fn pseudo_inverse(a: &Matrix4x6<f64>) -> (nalgebra::Matrix6x4<f64>, usize) {
    let svd = SVD::new(*a, true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let s_max = svd.singular_values.max();
    let mut pinv = nalgebra::Matrix6x4::zeros();
    let mut truncated = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s_max <= 0.0 || s <= PSEUDO_INVERSE_CUTOFF * s_max {
            truncated += 1;
            continue;
        }
        pinv += v_t.row(k).transpose() * u.column(k).transpose() / s;
    }
    (pinv, truncated)
}

fn check_inputs(state: &ShapeState, params: &InstrumentParams, tension: &TensionVector) -> Result<()> {
    state.validate()?;
    params.validate()?;
    tension.check_count(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn unit_params() -> InstrumentParams {
        InstrumentParams { length: 1.0, youngs_modulus: 1.0, second_moment: 1.0, ..Default::default() }
    }

    #[test]
    fn energy_examples() {
        let p = unit_params();
        assert!((elastic_energy(&ShapeState::new(1.0, 0.0, 0.0, 0.0), &p) - 0.5).abs() < 1e-15);
        assert_eq!(elastic_energy(&ShapeState::straight(1.0), &p), 0.0);
        assert!((elastic_energy(&ShapeState::new(0.0, 1.0, 0.0, 0.0), &p) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_examples() {
        let p = unit_params();
        let g = elastic_energy_gradient(&ShapeState::new(1.0, 0.0, 0.0, 0.3), &p);
        assert!((g - Vector4::new(1.0, 0.5, 1.0 / 3.0, 0.0)).norm() < 1e-15);
        assert_eq!(elastic_energy_gradient(&ShapeState::straight(0.2), &p), Vector4::zeros());
    }

    #[test]
    fn gradient_matches_energy_differences() {
        let p = InstrumentParams::default();
        let state = ShapeState::new(0.7, -0.3, 0.9, 1.2);
        let g = elastic_energy_gradient(&state, &p);
        let h = 1e-6;
        for k in 0..4 {
            let mut dv = Vector4::zeros();
            dv[k] = h;
            let up = elastic_energy(&ShapeState::from_vector(&(state.to_vector() + dv)), &p);
            let down = elastic_energy(&ShapeState::from_vector(&(state.to_vector() - dv)), &p);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-8 * g.abs().max(), "component {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn unloaded_straight_is_balanced() {
        let p = InstrumentParams::default();
        let r = equilibrium_residual(&ShapeState::straight(0.0), &p, &TensionVector::zeros(4), &Wrench::zero()).unwrap();
        assert_eq!(r, Vector4::zeros());
    }

    #[test]
    fn unsupported_bend_residual_is_negative_gradient() {
        let p = InstrumentParams::default();
        let state = ShapeState::new(0.5, 0.0, 0.0, 0.0);
        let r = equilibrium_residual(&state, &p, &TensionVector::zeros(4), &Wrench::zero()).unwrap();
        assert!((r + elastic_energy_gradient(&state, &p)).norm() < 1e-14);
        assert!(r.norm() > 0.0);
    }

    #[test]
    fn tensions_supporting_bend_give_zero_wrench() {
        // Constant curvature toward cable 1 held by cable 1 alone: r τ = EI θ / L.
        let p = InstrumentParams::default();
        let theta = 0.8;
        let state = ShapeState::constant_curvature(theta, 0.0);
        let tau1 = p.flexural_rigidity() * theta / (p.length * p.radius);
        let tension = TensionVector::new(alloc::vec![tau1, 0.0, 0.0, 0.0]).unwrap();
        let report = estimate_wrench(&state, &p, &tension, &Wrench::zero()).unwrap();
        assert!(report.wrench_estimate.to_vector().norm() < 1e-12, "{report:?}");
        assert!(report.residual.norm() < 1e-10);
        assert!(!report.rank_deficiency_flag);
    }

    #[test]
    fn consistent_triple_has_tiny_residual() {
        let p = InstrumentParams::default();
        let state = ShapeState::new(0.9, -0.4, 0.3, -2.0);
        let tension = TensionVector::new(alloc::vec![0.5, 2.0, 1.5, 0.2]).unwrap();
        let report = estimate_wrench(&state, &p, &tension, &Wrench::zero()).unwrap();
        assert!(report.residual.norm() < 1e-10, "{:?}", report.residual);
        let again = equilibrium_residual(&state, &p, &tension, &report.wrench_estimate).unwrap();
        assert!(again.norm() < 1e-10);
    }

    #[test]
    fn straight_shape_flags_rank_deficiency() {
        let p = InstrumentParams::default();
        let report = estimate_wrench(&ShapeState::straight(0.4), &p, &TensionVector::zeros(4), &Wrench::zero()).unwrap();
        assert!(report.rank_deficiency_flag);
        assert_eq!(report.truncated_directions, 2);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let p = InstrumentParams::default();
        let s = ShapeState::new(0.3, 0.0, 0.0, 0.0);
        assert!(matches!(TensionVector::new(alloc::vec![1.0, -0.1]), Err(Error::NegativeTension { index: 1, .. })));
        assert!(TensionVector::new(alloc::vec![f64::NAN]).is_err());
        let t3 = TensionVector::new(alloc::vec![1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(estimate_wrench(&s, &p, &t3, &Wrench::zero()), Err(Error::CableCount { .. })));
        let nan_state = ShapeState::new(f64::NAN, 0.0, 0.0, 0.0);
        assert!(estimate_wrench(&nan_state, &p, &TensionVector::zeros(4), &Wrench::zero()).is_err());
        let nan_prior = Wrench::from_force(Vector3::new(f64::NAN, 0.0, 0.0));
        assert!(estimate_wrench(&s, &p, &TensionVector::zeros(4), &nan_prior).is_err());
    }

    #[test]
    fn prior_in_null_space_passes_through() {
        let p = InstrumentParams::default();
        let state = ShapeState::new(0.6, 0.2, -0.1, PI / 3.0);
        // Choose tensions that balance the bend exactly, so the right-hand side is zero.
        let rhs_free = estimate_wrench(&state, &p, &TensionVector::zeros(4), &Wrench::zero()).unwrap();
        let jx = task_shape_jacobian(&state, &p).stacked();
        // A moment along t + e3 (tip tangent plus base axis) is orthogonal to every
        // rotation column, so it does no virtual work on the shape coordinates.
        let tangent = crate::kinematics::tip_pose(&state, &p).rotation * Vector3::z();
        let null_prior = Wrench::new(Vector3::zeros(), (tangent + Vector3::z()) * 5.0);
        assert!((jx.transpose() * null_prior.to_vector()).norm() < 1e-10);
        let with_prior = estimate_wrench(&state, &p, &TensionVector::zeros(4), &null_prior).unwrap();
        let diff = with_prior.wrench_estimate.to_vector() - rhs_free.wrench_estimate.to_vector();
        assert!((diff - null_prior.to_vector()).norm() < 1e-9, "{diff:?}");
        assert!((with_prior.residual - rhs_free.residual).norm() < 1e-10);
    }
}

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::math::{cos, wrap_angle};
use crate::{so3, Error, Result};

/// Shape of the bending segment: curvature `m0 + m1 s + m2 s^2` over the
/// normalized arclength `s` and the bending-plane direction `delta`.
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ShapeState {
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    pub delta: f64,
}

impl ShapeState {
    pub const fn new(m0: f64, m1: f64, m2: f64, delta: f64) -> Self {
        ShapeState { m0, m1, m2, delta }
    }

    pub const fn straight(delta: f64) -> Self {
        ShapeState::new(0.0, 0.0, 0.0, delta)
    }

    /// Constant-curvature shape with end bending angle `theta`.
    pub const fn constant_curvature(theta: f64, delta: f64) -> Self {
        ShapeState::new(theta, 0.0, 0.0, delta)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        ShapeState::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.m0, self.m1, self.m2, self.delta)
    }

    pub fn modes(&self) -> Vector3<f64> {
        Vector3::new(self.m0, self.m1, self.m2)
    }

    /// Bending angle at the tip, `theta(1) = m0 + m1/2 + m2/3`.
    pub fn theta_e(&self) -> f64 {
        self.m0 + self.m1 / 2.0 + self.m2 / 3.0
    }

    pub fn is_finite(&self) -> bool {
        self.m0.is_finite() && self.m1.is_finite() && self.m2.is_finite() && self.delta.is_finite()
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite("shape state"))
        }
    }

    /// Curvature per unit normalized arclength.
    pub fn curvature_at(&self, s: f64) -> Result<f64> {
        check_arclength(s)?;
        Ok(self.curvature_unchecked(s))
    }

    /// Bending angle `theta(s)`, the integral of the curvature from the base.
    pub fn bending_angle_at(&self, s: f64) -> Result<f64> {
        check_arclength(s)?;
        Ok(self.bending_angle_unchecked(s))
    }

    pub(crate) fn curvature_unchecked(&self, s: f64) -> f64 {
        self.m0 + s * (self.m1 + s * self.m2)
    }

    pub(crate) fn bending_angle_unchecked(&self, s: f64) -> f64 {
        s * (self.m0 + s * (self.m1 / 2.0 + s * self.m2 / 3.0))
    }

    /// Canonical representative of the same physical shape: `theta_e >= 0` and
    /// `delta` in `(-pi, pi]`. `(-m, delta + pi)` and `(m, delta)` describe the same backbone.
    pub fn canonical(&self) -> Self {
        if self.theta_e() < 0.0 {
            ShapeState::new(-self.m0, -self.m1, -self.m2, wrap_angle(self.delta + PI))
        } else {
            ShapeState { delta: wrap_angle(self.delta), ..*self }
        }
    }
}

pub(crate) fn check_arclength(s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(Error::Domain { what: "normalized arclength", value: s })
    }
}

/// Geometry and material constants of the instrument.
///
/// Cable `i` (zero-based) sits at body angle `gamma0 + i * beta` on a pitch
/// circle of radius `r`.
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstrumentParams {
    /// Backbone length (mm).
    #[cfg_attr(feature = "serde", serde(rename = "L_mm"))]
    pub length: f64,
    /// Cable pitch-circle radius (mm).
    #[cfg_attr(feature = "serde", serde(rename = "r_mm"))]
    pub radius: f64,
    #[cfg_attr(feature = "serde", serde(rename = "gamma0_rad"))]
    pub gamma0: f64,
    #[cfg_attr(feature = "serde", serde(rename = "beta_rad"))]
    pub beta: f64,
    pub n_cables: usize,
    /// Young's modulus (N/mm^2).
    #[cfg_attr(feature = "serde", serde(rename = "E_nmm2"))]
    pub youngs_modulus: f64,
    /// Second moment of area of the backbone (mm^4).
    #[cfg_attr(feature = "serde", serde(rename = "I_mm4"))]
    pub second_moment: f64,
}

impl Default for InstrumentParams {
    /// 60 mm NiTi backbone of 0.6 mm diameter, four cables at 3 mm.
    fn default() -> Self {
        let diameter: f64 = 0.6;
        InstrumentParams {
            length: 60.0,
            radius: 3.0,
            gamma0: 0.0,
            beta: PI / 2.0,
            n_cables: 4,
            youngs_modulus: 6.0e4,
            second_moment: PI * diameter * diameter * diameter * diameter / 64.0,
        }
    }
}

impl InstrumentParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [self.length, self.radius, self.gamma0, self.beta, self.youngs_modulus, self.second_moment];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("instrument parameters"));
        }
        if self.length <= 0.0 {
            return Err(Error::InvalidParams("L_mm must be positive"));
        }
        if self.radius <= 0.0 {
            return Err(Error::InvalidParams("r_mm must be positive"));
        }
        if !(2..=4).contains(&self.n_cables) {
            return Err(Error::InvalidParams("n_cables must be 2, 3 or 4"));
        }
        if self.youngs_modulus <= 0.0 {
            return Err(Error::InvalidParams("E_nmm2 must be positive"));
        }
        if self.second_moment <= 0.0 {
            return Err(Error::InvalidParams("I_mm4 must be positive"));
        }
        Ok(())
    }

    /// Like [`validate`](Self::validate), additionally requiring `beta * n_cables = 2 pi`.
    pub fn validate_evenly_spaced(&self) -> Result<()> {
        self.validate()?;
        if (self.beta * self.n_cables as f64 - 2.0 * PI).abs() > 1e-9 {
            return Err(Error::InvalidParams("beta_rad * n_cables must equal 2 pi for even spacing"));
        }
        Ok(())
    }

    /// Bending stiffness E·I (N·mm^2).
    pub fn flexural_rigidity(&self) -> f64 {
        self.youngs_modulus * self.second_moment
    }

    /// Fixed angle of cable `i` (zero-based) in the base cross-section.
    pub fn cable_body_angle(&self, i: usize) -> f64 {
        self.gamma0 + i as f64 * self.beta
    }

    /// Angular coordinate of cable `i` measured in the bending-plane frame.
    pub fn cable_angle(&self, state: &ShapeState, i: usize) -> f64 {
        state.delta + self.cable_body_angle(i)
    }
}

/// Homogeneous pose: rotation plus position in mm.
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub position: Vector3<f64>,
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, position: Vector3<f64>) -> Self {
        RigidTransform { rotation, position }
    }

    pub fn identity() -> Self {
        RigidTransform::new(Matrix3::identity(), Vector3::zeros())
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.position);
        m
    }

    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform::new(self.rotation * other.rotation, self.rotation * other.position + self.position)
    }

    /// Checks orthonormality and `det = +1` within `tolerance`.
    pub fn validate(&self, tolerance: f64) -> Result<()> {
        if self.rotation.iter().chain(self.position.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("rigid transform"));
        }
        let deviation = so3::rotation_defect(&self.rotation);
        if deviation > tolerance {
            return Err(Error::NotOrthonormal { deviation });
        }
        Ok(())
    }
}

/// Cable displacements relative to the straight configuration, `q_i = L_i - L` (mm).
/// Shortening a cable gives a negative entry.
#[derive(Debug, Clone, PartialEq)]
pub struct JointVector {
    pub q: Vec<f64>,
    sigma: Vec<f64>,
}

impl JointVector {
    pub(crate) fn new(q: Vec<f64>, sigma: Vec<f64>) -> Self {
        JointVector { q, sigma }
    }

    /// Cable angular coordinates used to build `q`.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }
}

/// Cosine helper shared with the cable-length model.
pub(crate) fn cable_cosines(state: &ShapeState, params: &InstrumentParams) -> impl Iterator<Item = f64> {
    let (state, params) = (*state, *params);
    (0..params.n_cables).map(move |i| cos(params.cable_angle(&state, i)))
}

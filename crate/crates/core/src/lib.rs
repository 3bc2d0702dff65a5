//! Polynomial-curvature kinematics and virtual-work statics for tendon-driven
//! continuum instruments.
//!
//! The shape of a single bending segment is described by a [`ShapeState`]
//! `[m0, m1, m2, delta]`: the curvature along the normalized arclength is the
//! quadratic `m0 + m1 s + m2 s^2` and `delta` rotates the bending plane about
//! the base z-axis. On top of that representation the crate provides
//!
//! - forward kinematics and cable lengths ([`kinematics`]),
//! - closed-form joint-to-shape and shape-to-task Jacobians ([`jacobians`]),
//! - elastic energy, static equilibrium and tip-wrench estimation ([`statics`]),
//! - tip-pose shape fitting with a quasi-Newton solver ([`solver`]),
//! - a discretized elastica plant and a tension-sensing actuation unit model
//!   used as independent ground truth ([`plant`], [`actuation`]).
//!
//! Lengths are in millimeters, forces in newtons and moments in N·mm.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod actuation;
mod error;
pub mod jacobians;
pub mod kinematics;
pub(crate) mod math;
pub mod plant;
pub mod quadrature;
mod shape;
pub mod so3;
pub mod solver;
pub mod statics;

pub use error::{Error, Result};
pub use shape::{InstrumentParams, JointVector, RigidTransform, ShapeState};

pub use jacobians::{JointShapeJacobian, TaskShapeJacobian};
pub use statics::{EquilibriumReport, TensionVector, Wrench};

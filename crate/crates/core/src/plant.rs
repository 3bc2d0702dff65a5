//! Discretized elastica used as ground truth.
//!
//! The backbone is a chain of `n` rigid links of length `Δl = L / n` joined at
//! the stations `s_k = k Δl`, `k = 0 ..= n`. Each joint carries two orthogonal
//! torsional springs; its rotation vector `[a_k, b_k, 0]` is expressed in the
//! frame of the proximal link. Interior springs have stiffness `E I / Δl`, the
//! base and tip joints `2 E I / Δl`, which is the trapezoidal rule for the
//! bending energy. The tip joint carries no link and only turns the tip frame.
//!
//! A spacer disk sits at every station, fixed to the link ending there (the
//! base disk to ground, the tip disk to the tip frame). Cables run in straight
//! lines between holes of adjacent disks and terminate on the tip disk, so the
//! spine between two neighbouring disks is a single rigid link.
//!
//! Equilibrium minimizes
//!
//! ```text
//! Π = Σ ½ K_k |φ_k|² + Σ_i τ_i ℓ_i - f·p_tip - m·log(R_tip) + ½ k_c pen²
//! ```
//!
//! by damped Newton iteration. The tip moment therefore enters as the conjugate
//! of the tip rotation vector, which coincides with a fixed spatial moment for
//! small tip rotations. The optional contact plane adds a one-sided penalty.
//!
//! Nothing here depends on the polynomial-curvature model.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::math::{cos, sin};
use crate::{so3, Error, InstrumentParams, Result, RigidTransform, TensionVector, Wrench};

pub const DEFAULT_LINKS: usize = 50;
pub const MIN_LINKS: usize = 10;
pub const MAX_ITERATIONS: usize = 500;
pub const GRADIENT_TOLERANCE: f64 = 1e-10;

const ARMIJO: f64 = 1e-4;
const HESSIAN_STEP: f64 = 1e-6;

/// One-sided planar obstacle. Points with `(p - point)·normal < 0` penetrate.
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPlane {
    pub point: Vector3<f64>,
    /// Unit normal pointing out of the obstacle.
    pub normal: Vector3<f64>,
    /// Penalty stiffness (N/mm).
    pub stiffness: f64,
}

impl ContactPlane {
    pub fn new(point: Vector3<f64>, normal: Vector3<f64>, stiffness: f64) -> Result<Self> {
        if point.iter().chain(normal.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("contact plane"));
        }
        let n = normal.norm();
        if n < 1e-12 {
            return Err(Error::Domain { what: "contact normal length", value: n });
        }
        if !(stiffness > 0.0 && stiffness.is_finite()) {
            return Err(Error::Domain { what: "contact stiffness", value: stiffness });
        }
        Ok(ContactPlane { point, normal: normal / n, stiffness })
    }

    fn penetration(&self, p: &Vector3<f64>) -> f64 {
        (-(p - self.point).dot(&self.normal)).max(0.0)
    }

    /// Force exerted on a tip at `p`.
    pub fn force_at(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.normal * (self.stiffness * self.penetration(p))
    }
}

#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticaPlant {
    pub params: InstrumentParams,
    pub n_links: usize,
    pub contact: Option<ContactPlane>,
}

impl Default for ElasticaPlant {
    fn default() -> Self {
        ElasticaPlant { params: InstrumentParams::default(), n_links: DEFAULT_LINKS, contact: None }
    }
}

/// Converged (or last) plant configuration.
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[derive(Debug, Clone, PartialEq)]
pub struct PlantEquilibrium {
    /// `[a_0, b_0, a_1, b_1, ...]` joint rotation components (rad), `n + 1` joints.
    pub joint_angles: Vec<f64>,
    /// Backbone points at the `n + 1` stations, base first.
    pub polyline: Vec<Vector3<f64>>,
    pub tip: RigidTransform,
    /// Force applied by the contact plane, zero without contact (N).
    pub contact_force: Vector3<f64>,
    pub energy: f64,
    /// Total potential energy before the first and after every accepted step.
    pub energy_history: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl PlantEquilibrium {
    /// Backbone point at normalized arclength `s`, interpolated along the polyline.
    pub fn position_at(&self, s: f64) -> Result<Vector3<f64>> {
        crate::shape::check_arclength(s)?;
        let segments = self.polyline.len() - 1;
        let x = s * segments as f64;
        let j = (x as usize).min(segments - 1);
        let w = x - j as f64;
        Ok(self.polyline[j] * (1.0 - w) + self.polyline[j + 1] * w)
    }

    /// Applied tip wrench plus the contact force: the total external tip load.
    pub fn external_wrench(&self, applied: &Wrench) -> Wrench {
        Wrench::new(applied.force + self.contact_force, applied.moment)
    }
}

struct Chain {
    /// `rotations[k]` is the frame proximal to joint `k`; `rotations[n + 1]` is the tip frame.
    rotations: Vec<Matrix3<f64>>,
    /// Station positions, `n + 1` entries.
    stations: Vec<Vector3<f64>>,
}

impl Chain {
    fn tip(&self) -> Vector3<f64> {
        self.stations[self.stations.len() - 1]
    }

    fn tip_rotation(&self) -> Matrix3<f64> {
        self.rotations[self.rotations.len() - 1]
    }
}

impl ElasticaPlant {
    pub fn new(params: InstrumentParams, n_links: usize) -> Result<Self> {
        let plant = ElasticaPlant { params, n_links, contact: None };
        plant.validate()?;
        Ok(plant)
    }

    /// Same instrument discretized with `n_links` links.
    pub fn with_links(self, n_links: usize) -> Result<Self> {
        let plant = ElasticaPlant { n_links, ..self };
        plant.validate()?;
        Ok(plant)
    }

    pub fn with_contact(self, contact: ContactPlane) -> Self {
        ElasticaPlant { contact: Some(contact), ..self }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n_links < MIN_LINKS {
            return Err(Error::Domain { what: "n_links", value: self.n_links as f64 });
        }
        if let Some(c) = &self.contact {
            ContactPlane::new(c.point, c.normal, c.stiffness)?;
        }
        Ok(())
    }

    pub fn link_length(&self) -> f64 {
        self.params.length / self.n_links as f64
    }

    /// Torsional stiffness of an interior joint spring (N·mm/rad).
    pub fn joint_stiffness(&self) -> f64 {
        self.params.flexural_rigidity() / self.link_length()
    }

    fn stiffness_of(&self, k: usize) -> f64 {
        if k == 0 || k == self.n_links {
            2.0 * self.joint_stiffness()
        } else {
            self.joint_stiffness()
        }
    }

    pub fn dof(&self) -> usize {
        2 * (self.n_links + 1)
    }

    fn holes(&self) -> Vec<Vector3<f64>> {
        (0..self.params.n_cables)
            .map(|i| {
                let a = self.params.cable_body_angle(i);
                Vector3::new(cos(a), sin(a), 0.0) * self.params.radius
            })
            .collect()
    }

    fn chain(&self, x: &[f64]) -> Chain {
        let dl = self.link_length();
        let n = self.n_links;
        let mut rotations: Vec<Matrix3<f64>> = Vec::with_capacity(n + 2);
        let mut stations: Vec<Vector3<f64>> = Vec::with_capacity(n + 1);
        rotations.push(Matrix3::identity());
        stations.push(Vector3::zeros());
        for k in 0..=n {
            let r = rotations[k] * so3::exp(&Vector3::new(x[2 * k], x[2 * k + 1], 0.0));
            if k < n {
                stations.push(stations[k] + r.column(2) * dl);
            }
            rotations.push(r);
        }
        Chain { rotations, stations }
    }

    /// Hole positions of every disk, indexed `[station][cable]`.
    fn hole_positions(&self, chain: &Chain) -> Vec<Vec<Vector3<f64>>> {
        let holes = self.holes();
        let n = self.n_links;
        (0..=n)
            .map(|j| {
                let r = chain.rotations[if j == n { n + 1 } else { j }];
                holes.iter().map(|v| chain.stations[j] + r * v).collect()
            })
            .collect()
    }

    fn check_load(&self, tau: &TensionVector, wrench: &Wrench) -> Result<()> {
        self.validate()?;
        tau.check_count(&self.params)?;
        if !wrench.is_finite() {
            return Err(Error::NonFinite("tip wrench"));
        }
        Ok(())
    }

    fn check_angles(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dof() {
            return Err(Error::Domain { what: "joint angle count", value: x.len() as f64 });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("joint angles"));
        }
        Ok(())
    }

    /// Total potential energy (N·mm) of configuration `x`.
    pub fn energy(&self, x: &[f64], tau: &TensionVector, wrench: &Wrench) -> Result<f64> {
        self.check_load(tau, wrench)?;
        self.check_angles(x)?;
        Ok(self.energy_unchecked(x, tau, wrench))
    }

    /// Gradient of [`energy`](Self::energy) with respect to the joint angles.
    pub fn gradient(&self, x: &[f64], tau: &TensionVector, wrench: &Wrench) -> Result<Vec<f64>> {
        self.check_load(tau, wrench)?;
        self.check_angles(x)?;
        Ok(self.gradient_unchecked(x, tau, wrench).as_slice().to_vec())
    }

    fn energy_unchecked(&self, x: &[f64], tau: &TensionVector, wrench: &Wrench) -> f64 {
        let chain = self.chain(x);
        let spring: f64 = (0..=self.n_links)
            .map(|k| 0.5 * self.stiffness_of(k) * (x[2 * k] * x[2 * k] + x[2 * k + 1] * x[2 * k + 1]))
            .sum();
        let mut cables = 0.0;
        let holes = self.hole_positions(&chain);
        for (i, &t) in tau.as_slice().iter().enumerate() {
            if t == 0.0 {
                continue;
            }
            cables += t * holes.windows(2).map(|w| (w[1][i] - w[0][i]).norm()).sum::<f64>();
        }
        let tip = chain.tip();
        let load = -wrench.force.dot(&tip) - wrench.moment.dot(&so3::log(&chain.tip_rotation()));
        let contact = self.contact.map_or(0.0, |c| {
            let pen = c.penetration(&tip);
            0.5 * c.stiffness * pen * pen
        });
        spring + cables + load + contact
    }

    fn gradient_unchecked(&self, x: &[f64], tau: &TensionVector, wrench: &Wrench) -> DVector<f64> {
        let chain = self.chain(x);
        let holes = self.hole_positions(&chain);
        let tip = chain.tip();

        let contact_force = self.contact.map_or(Vector3::zeros(), |c| c.force_at(&tip));
        let force = wrench.force + contact_force;
        let moment = so3::left_jacobian_inverse(&so3::log(&chain.tip_rotation())).transpose() * wrench.moment;

        let mut g = DVector::zeros(self.dof());
        for k in 0..=self.n_links {
            let phi = Vector3::new(x[2 * k], x[2 * k + 1], 0.0);
            let jr = so3::right_jacobian(&phi);
            let joint = chain.stations[k];

            // Joint `k` moves only the distal end of one chord: the one leaving
            // disk `k`, or for the tip joint the one reaching the tip disk.
            let mut torque = (tip - joint).cross(&force) + moment;
            let span = k.min(self.n_links - 1);
            for (i, &t) in tau.as_slice().iter().enumerate() {
                if t == 0.0 {
                    continue;
                }
                let far = holes[span + 1][i];
                let chord = far - holes[span][i];
                torque -= (far - joint).cross(&chord) * (t / chord.norm());
            }
            let grad = phi * self.stiffness_of(k) - (chain.rotations[k + 1] * jr).transpose() * torque;
            g[2 * k] = grad.x;
            g[2 * k + 1] = grad.y;
        }
        g
    }

    fn hessian(&self, x: &[f64], tau: &TensionVector, wrench: &Wrench) -> DMatrix<f64> {
        let n = self.dof();
        let mut h = DMatrix::zeros(n, n);
        let mut probe = x.to_vec();
        for j in 0..n {
            probe[j] = x[j] + HESSIAN_STEP;
            let plus = self.gradient_unchecked(&probe, tau, wrench);
            probe[j] = x[j] - HESSIAN_STEP;
            let minus = self.gradient_unchecked(&probe, tau, wrench);
            probe[j] = x[j];
            h.set_column(j, &((plus - minus) / (2.0 * HESSIAN_STEP)));
        }
        (&h + h.transpose()) * 0.5
    }

    fn newton_step(h: &DMatrix<f64>, g: &DVector<f64>, damping: &mut f64) -> DVector<f64> {
        let n = g.len();
        let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
        loop {
            let shifted = h + DMatrix::identity(n, n) * *damping;
            if let Some(chol) = shifted.cholesky() {
                return -chol.solve(g);
            }
            *damping = (*damping * 10.0).max(1e-10 * scale);
        }
    }

    fn equilibrium_at(&self, x: Vec<f64>, tau: &TensionVector, wrench: &Wrench, history: Vec<f64>, iterations: usize, gradient_norm: f64) -> PlantEquilibrium {
        let chain = self.chain(&x);
        let tip = RigidTransform::new(chain.tip_rotation(), chain.tip());
        let contact_force = self.contact.map_or(Vector3::zeros(), |c| c.force_at(&tip.position));
        let polyline = chain.stations;
        let energy = self.energy_unchecked(&x, tau, wrench);
        PlantEquilibrium {
            joint_angles: x,
            polyline,
            tip,
            contact_force,
            energy,
            energy_history: history,
            iterations,
            gradient_norm,
        }
    }

    /// Equilibrium under cable tensions `tau` and tip wrench, optionally starting
    /// from the joint angles of a previous solution.
    pub fn solve(&self, tau: &TensionVector, wrench: &Wrench, warm_start: Option<&[f64]>) -> Result<PlantEquilibrium> {
        self.check_load(tau, wrench)?;
        let mut x = match warm_start {
            Some(x0) => {
                self.check_angles(x0)?;
                x0.to_vec()
            }
            None => alloc::vec![0.0; self.dof()],
        };

        let mut energy = self.energy_unchecked(&x, tau, wrench);
        let mut g = self.gradient_unchecked(&x, tau, wrench);
        let mut history = alloc::vec![energy];
        let mut damping = 0.0;
        let mut iterations = 0;

        while g.norm() >= GRADIENT_TOLERANCE {
            if iterations == MAX_ITERATIONS {
                let gn = g.norm();
                let last = self.equilibrium_at(x, tau, wrench, history, iterations, gn);
                return Err(Error::PlantNotConverged(alloc::boxed::Box::new(last)));
            }
            iterations += 1;

            let h = self.hessian(&x, tau, wrench);
            let d = Self::newton_step(&h, &g, &mut damping);
            let slope = g.dot(&d);

            // Energy differences below `noise` are rounding error. There the
            // step is judged by the gradient norm instead, and the energy may
            // only rise within a tenth of that rounding level.
            let noise = 1e-12 * energy.abs();
            let gn = g.norm();
            let mut accepted = None;
            let mut step = 1.0;
            for _ in 0..40 {
                let trial: Vec<f64> = x.iter().zip(d.iter()).map(|(a, b)| a + step * b).collect();
                let e = self.energy_unchecked(&trial, tau, wrench);
                let ok = if -slope > noise {
                    e <= energy + ARMIJO * step * slope
                } else {
                    e <= energy + 0.1 * noise && self.gradient_unchecked(&trial, tau, wrench).norm() < gn
                };
                if ok {
                    accepted = Some((trial, e));
                    break;
                }
                step *= 0.5;
            }

            match accepted {
                Some((trial, e)) => {
                    x = trial;
                    energy = e;
                    history.push(energy);
                    g = self.gradient_unchecked(&x, tau, wrench);
                    damping *= 0.1;
                    if damping < 1e-12 {
                        damping = 0.0;
                    }
                }
                None => {
                    let scale = (0..h.nrows()).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
                    damping = (damping * 10.0).max(1e-6 * scale);
                }
            }
        }
        let gn = g.norm();
        Ok(self.equilibrium_at(x, tau, wrench, history, iterations, gn))
    }
}

/// Equilibrium from the straight configuration.
pub fn plant_equilibrium(plant: &ElasticaPlant, tau: &TensionVector, tip_wrench: &Wrench) -> Result<PlantEquilibrium> {
    plant.solve(tau, tip_wrench, None)
}

/// Largest relative deviation of `b` from `a` in tip position (over `L`) and tip
/// rotation (over the tip bending angle of `a`, floored at one radian).
pub fn tip_pose_change(a: &RigidTransform, b: &RigidTransform, length: f64) -> (f64, f64) {
    let dp = (a.position - b.position).norm() / length;
    let bend = so3::log(&a.rotation).norm().max(1.0);
    let dr = so3::angle_between(&a.rotation, &b.rotation) / bend;
    (dp, dr)
}

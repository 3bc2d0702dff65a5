//! Experiment descriptions and the load profiles they expand to.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::Vector3;
use polycurve_core::actuation::{chirp_profile, ActuationUnitSim, ChirpProfile};
use polycurve_core::plant::{ContactPlane, ElasticaPlant, DEFAULT_LINKS, MIN_LINKS};
use polycurve_core::{InstrumentParams, TensionVector, Wrench};
use serde::{Deserialize, Serialize};

use crate::scenario::NoiseSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Monotone pull toward the target articulation, then hold.
    FreeArticulation,
    /// Tension staircase pressing the tip against a fixed plane.
    TipContact,
    /// Tension staircase in free space.
    TensionStaircase,
    /// Sine sweep of the bending angle around the target.
    Chirp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChirpSpec {
    pub magnitude_rad: f64,
    pub f_start_hz: f64,
    pub f_end_hz: f64,
}

impl Default for ChirpSpec {
    fn default() -> Self {
        ChirpSpec { magnitude_rad: 0.052, f_start_hz: 0.1, f_end_hz: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ScenarioKind,
    /// Instrument constants; the repository defaults when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instrument: Option<InstrumentParams>,
    #[serde(default = "default_links")]
    pub n_links: usize,
    /// Target end bending angle (degrees).
    pub theta_deg: f64,
    /// Target bending-plane direction (degrees).
    pub delta_deg: f64,
    /// Multipliers of the target articulation tension, one plateau each.
    #[serde(default = "default_levels")]
    pub tension_levels: Vec<f64>,
    /// Tension kept on every cable (N).
    #[serde(default = "default_pretension")]
    pub pretension_n: f64,
    /// Constant tip force in the base frame (N).
    #[serde(default)]
    pub tip_force_n: [f64; 3],
    #[serde(default = "default_contact_stiffness")]
    pub contact_stiffness_n_per_mm: f64,
    #[serde(default)]
    pub chirp: ChirpSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub actuation: ActuationUnitSim,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default = "default_rate")]
    pub rate_hz: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_links() -> usize {
    DEFAULT_LINKS
}

fn default_levels() -> Vec<f64> {
    vec![1.5, 2.0, 2.5, 3.0, 3.5]
}

fn default_pretension() -> f64 {
    0.5
}

fn default_contact_stiffness() -> f64 {
    1.0
}

fn default_duration() -> f64 {
    1.0
}

fn default_rate() -> f64 {
    100.0
}

/// Interval during which one tension level is held.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub level: usize,
    pub multiplier: f64,
    pub t_start: f64,
    /// Exclusive, except for the last plateau.
    pub t_end: f64,
}

impl ExperimentSpec {
    pub fn new(kind: ScenarioKind, theta_deg: f64, delta_deg: f64) -> Self {
        ExperimentSpec {
            kind,
            instrument: None,
            n_links: DEFAULT_LINKS,
            theta_deg,
            delta_deg,
            tension_levels: default_levels(),
            pretension_n: default_pretension(),
            tip_force_n: [0.0; 3],
            contact_stiffness_n_per_mm: default_contact_stiffness(),
            chirp: ChirpSpec::default(),
            noise: NoiseSpec::default(),
            actuation: ActuationUnitSim::default(),
            duration_s: default_duration(),
            rate_hz: default_rate(),
            seed: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let spec: ExperimentSpec = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            Error::validation(if field == "." { "spec".to_string() } else { field }, e.inner().to_string())
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })?;
        Self::from_json(&text)
    }

    pub fn params(&self) -> InstrumentParams {
        self.instrument.unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        self.params().validate().map_err(|e| Error::validation("instrument", e.to_string()))?;
        if self.n_links < MIN_LINKS {
            return Err(Error::validation("n_links", format!("must be at least {MIN_LINKS}, got {}", self.n_links)));
        }
        if !(self.theta_deg >= 0.0 && self.theta_deg <= 180.0) {
            return Err(Error::validation("theta_deg", format!("must lie in [0, 180], got {}", self.theta_deg)));
        }
        if !self.delta_deg.is_finite() {
            return Err(Error::validation("delta_deg", "must be finite"));
        }
        if self.tension_levels.is_empty() {
            return Err(Error::validation("tension_levels", "needs at least one level"));
        }
        if let Some(v) = self.tension_levels.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::validation("tension_levels", format!("levels must be positive, got {v}")));
        }
        if !(self.pretension_n >= 0.0 && self.pretension_n.is_finite()) {
            return Err(Error::validation("pretension_n", format!("must be non-negative, got {}", self.pretension_n)));
        }
        if self.tip_force_n.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("tip_force_n", "must be finite"));
        }
        if !(self.contact_stiffness_n_per_mm > 0.0 && self.contact_stiffness_n_per_mm.is_finite()) {
            return Err(Error::validation("contact_stiffness_n_per_mm", "must be positive"));
        }
        self.noise.validate()?;
        self.actuation.validate().map_err(|e| Error::validation("actuation", e.to_string()))?;
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::validation("duration_s", format!("must be positive, got {}", self.duration_s)));
        }
        if !(self.rate_hz > 0.0 && self.rate_hz.is_finite()) {
            return Err(Error::validation("rate_hz", format!("must be positive, got {}", self.rate_hz)));
        }
        if self.kind == ScenarioKind::Chirp {
            self.chirp_profile()?;
            if self.rate_hz < 4.0 * self.chirp.f_end_hz {
                return Err(Error::validation("rate_hz", "must be at least four times chirp.f_end_hz"));
            }
        }
        Ok(())
    }

    fn chirp_profile(&self) -> Result<ChirpProfile> {
        chirp_profile(self.chirp.magnitude_rad, self.chirp.f_start_hz, self.chirp.f_end_hz, self.duration_s)
            .map_err(|e| Error::validation("chirp", e.to_string()))
    }

    pub fn theta(&self) -> f64 {
        self.theta_deg.to_radians()
    }

    pub fn delta(&self) -> f64 {
        self.delta_deg.to_radians()
    }

    pub fn tip_force(&self) -> Vector3<f64> {
        Vector3::from(self.tip_force_n)
    }

    /// Plateaus of the staircase kinds, in time order.
    pub fn plateaus(&self) -> Vec<Plateau> {
        match self.kind {
            ScenarioKind::TipContact | ScenarioKind::TensionStaircase => {
                let n = self.tension_levels.len();
                let width = self.duration_s / n as f64;
                self.tension_levels
                    .iter()
                    .enumerate()
                    .map(|(level, &multiplier)| Plateau {
                        level,
                        multiplier,
                        t_start: level as f64 * width,
                        t_end: if level + 1 == n { self.duration_s } else { (level + 1) as f64 * width },
                    })
                    .collect()
            }
            _ => Vec::new(),
        }
    }

    fn level_at(&self, t: f64) -> usize {
        let n = self.tension_levels.len();
        ((t / self.duration_s * n as f64).floor() as usize).min(n - 1)
    }

    /// Cable tension at time `t`.
    pub fn tension_at(&self, t: f64) -> TensionVector {
        let params = self.params();
        let (theta, scale) = match self.kind {
            ScenarioKind::FreeArticulation => (self.theta(), (t / (0.8 * self.duration_s)).min(1.0)),
            ScenarioKind::TipContact | ScenarioKind::TensionStaircase => {
                (self.theta(), self.tension_levels[self.level_at(t)])
            }
            ScenarioKind::Chirp => {
                let chirp = self.chirp_profile().expect("validated chirp");
                (self.theta() + chirp.value(t), 1.0)
            }
        };
        articulation_tension(&params, theta * scale, self.delta(), self.pretension_n)
    }

    pub fn wrench_at(&self, _t: f64) -> Wrench {
        Wrench::from_force(self.tip_force())
    }

    pub fn plant(&self) -> Result<ElasticaPlant> {
        Ok(ElasticaPlant::new(self.params(), self.n_links)?)
    }

    /// Plane touching the tip of the unit-multiplier articulation, facing
    /// against the direction the tip moves as tension grows.
    pub fn contact_plane(&self, plant: &ElasticaPlant) -> Result<ContactPlane> {
        let params = self.params();
        let wrench = Wrench::from_force(self.tip_force());
        let at = |multiplier: f64| articulation_tension(&params, self.theta() * multiplier, self.delta(), self.pretension_n);
        let nominal = plant.solve(&at(1.0), &wrench, None)?;
        let nudged = plant.solve(&at(1.0 + 1e-3), &wrench, Some(&nominal.joint_angles))?;
        let motion = nudged.tip.position - nominal.tip.position;
        if motion.norm() < 1e-12 {
            return Err(Error::validation("tension_levels", "tip does not move with tension; no contact direction"));
        }
        Ok(ContactPlane::new(nominal.tip.position, -motion, self.contact_stiffness_n_per_mm)?)
    }
}

/// Tensions that bend a constant-curvature segment to `theta` in the plane
/// `delta`: every cable carries `pretension`, and the cables on the inside of
/// the bend share the extra load `E I theta / (L r)` in proportion to `cos σ_i`.
pub fn articulation_tension(params: &InstrumentParams, theta: f64, delta: f64, pretension: f64) -> TensionVector {
    let need = params.flexural_rigidity() * theta.abs() / (params.length * params.radius);
    let delta = if theta < 0.0 { delta + PI } else { delta };
    let cosines: Vec<f64> = (0..params.n_cables).map(|i| (delta + params.cable_body_angle(i)).cos()).collect();
    let norm: f64 = cosines.iter().filter(|c| **c > 1e-12).map(|c| c * c).sum();
    let tau = cosines
        .iter()
        .map(|&c| if c > 1e-12 { pretension + need * c / norm } else { pretension })
        .collect();
    TensionVector::new(tau).expect("non-negative tensions")
}

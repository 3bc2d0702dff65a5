//! Quasi-static scenario generation on the elastica plant.

use nalgebra::Vector3;
use polycurve_core::actuation::ActuationUnitSim;
use polycurve_core::plant::{ElasticaPlant, PlantEquilibrium};
use polycurve_core::{so3, RigidTransform, TensionVector, Wrench};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Gaussian sensor noise, one standard deviation per channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Per-axis tip position noise (mm).
    pub position_mm: f64,
    /// Per-axis tip rotation noise (degrees), applied as a spatial rotation vector.
    pub rotation_deg: f64,
    /// Per-cable tension noise (N), injected as torque-cell noise.
    pub tension_n: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec { position_mm: 0.5, rotation_deg: 0.5, tension_n: 0.05 }
    }
}

impl NoiseSpec {
    pub const fn zero() -> Self {
        NoiseSpec { position_mm: 0.0, rotation_deg: 0.0, tension_n: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("noise.position_mm", self.position_mm),
            ("noise.rotation_deg", self.rotation_deg),
            ("noise.tension_n", self.tension_n),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(field, format!("must be a finite non-negative number, got {v}")));
            }
        }
        Ok(())
    }
}

/// One sensor frame as an estimator would receive it.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub tip: RigidTransform,
    /// Tension read back from the torque cells (N).
    pub tension: Vec<f64>,
    /// Total external tip load, including any contact force.
    pub wrench: Wrench,
}

/// Noise-free counterpart of a [`Sample`].
#[derive(Debug, Clone, PartialEq)]
pub struct TruthSample {
    pub t: f64,
    pub tip: RigidTransform,
    pub tension: Vec<f64>,
    pub wrench: Wrench,
    /// Load applied by the profile, without contact.
    pub applied: Wrench,
    pub joint_angles: Vec<f64>,
    pub polyline: Vec<Vector3<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioLog {
    pub rate_hz: f64,
    pub samples: Vec<Sample>,
    pub truth: Vec<TruthSample>,
    /// Number of torque readings clipped at the cell range.
    pub saturated_readings: usize,
}

/// Sample times `k / rate` for `k = 0, 1, ...` up to `duration`.
pub fn sample_times(duration: f64, rate: f64) -> Result<Vec<f64>> {
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::validation("duration_s", format!("must be finite and non-negative, got {duration}")));
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::validation("rate_hz", format!("must be positive, got {rate}")));
    }
    let n = (duration * rate + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|k| k as f64 / rate).collect())
}

/// Sweeps the plant through the profiles, solving one equilibrium per sample.
///
/// Each solve starts from the previous equilibrium; consecutive samples with
/// identical loads reuse it. Noise is drawn from a ChaCha8 stream seeded with
/// `seed`, in sample order: position, rotation, then tensions.
#[allow(clippy::too_many_arguments)]
pub fn generate_scenario(
    plant: &ElasticaPlant,
    tension_profile: &dyn Fn(f64) -> TensionVector,
    tip_wrench_profile: &dyn Fn(f64) -> Wrench,
    noise: &NoiseSpec,
    duration: f64,
    rate: f64,
    unit: &ActuationUnitSim,
    seed: u64,
) -> Result<ScenarioLog> {
    plant.validate()?;
    noise.validate()?;
    unit.validate()?;
    let times = sample_times(duration, rate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = move |sigma: f64| -> f64 {
        let z: f64 = StandardNormal.sample(&mut rng);
        sigma * z
    };

    let mut samples = Vec::with_capacity(times.len());
    let mut truth: Vec<TruthSample> = Vec::with_capacity(times.len());
    let mut previous: Option<(TensionVector, Wrench, PlantEquilibrium)> = None;
    let mut saturated_readings = 0;
    let rotation_sigma = noise.rotation_deg.to_radians();

    for &t in &times {
        let tau = tension_profile(t);
        let applied = tip_wrench_profile(t);
        let eq = match &previous {
            Some((pt, pw, eq)) if *pt == tau && *pw == applied => eq.clone(),
            Some((_, _, eq)) => plant.solve(&tau, &applied, Some(&eq.joint_angles))?,
            None => plant.solve(&tau, &applied, None)?,
        };
        let wrench = eq.external_wrench(&applied);

        let mut tip = eq.tip;
        if noise.position_mm > 0.0 {
            tip.position += Vector3::from_fn(|_, _| gauss(noise.position_mm));
        }
        if rotation_sigma > 0.0 {
            let w = Vector3::from_fn(|_, _| gauss(rotation_sigma));
            tip.rotation = so3::exp(&w) * tip.rotation;
        }
        let mut measured = Vec::with_capacity(tau.len());
        for &value in tau.as_slice() {
            let torque_sigma = noise.tension_n * unit.pulley_radius;
            let needs_cell = torque_sigma > 0.0 || (value * unit.pulley_radius).abs() > unit.torque_range;
            if needs_cell {
                let raw = unit.torque_from_tension(value, gauss(torque_sigma))?;
                let reading = unit.tension_from_torque(raw.value)?;
                saturated_readings += usize::from(raw.saturated);
                measured.push(reading.value);
            } else {
                measured.push(value);
            }
        }

        samples.push(Sample { t, tip, tension: measured, wrench });
        truth.push(TruthSample {
            t,
            tip: eq.tip,
            tension: tau.as_slice().to_vec(),
            wrench,
            applied,
            joint_angles: eq.joint_angles.clone(),
            polyline: eq.polyline.clone(),
        });
        previous = Some((tau, applied, eq));
    }
    Ok(ScenarioLog { rate_hz: rate, samples, truth, saturated_readings })
}

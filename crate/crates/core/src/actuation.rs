//! Tension-sensing actuation unit and test stimuli.
//!
//! Each cable is wound on a pulley whose shaft carries a torque cell, so the
//! cable tension follows from the torque reading as `T = tau / r_p`. Readings
//! beyond the cell range are clipped and flagged.

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::math::{fabs, sin};
use crate::{Error, Result};

#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuationUnitSim {
    /// Pulley radius (mm).
    pub pulley_radius: f64,
    /// Torque cell range (N·mm); readings saturate at ±this value.
    pub torque_range: f64,
    /// Standard deviation of the torque reading noise (N·mm).
    pub torque_noise: f64,
    /// Sample rate (Hz).
    pub sample_rate: f64,
    pub calibration_gain: f64,
    /// Calibration offset (N·mm).
    pub calibration_offset: f64,
}

impl Default for ActuationUnitSim {
    fn default() -> Self {
        ActuationUnitSim {
            pulley_radius: 10.0,
            torque_range: 700.0,
            torque_noise: 0.5,
            sample_rate: 1000.0,
            calibration_gain: 1.0,
            calibration_offset: 0.0,
        }
    }
}

#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reading {
    pub value: f64,
    pub saturated: bool,
}

impl ActuationUnitSim {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pulley_radius", self.pulley_radius),
            ("torque_range", self.torque_range),
            ("sample_rate", self.sample_rate),
        ];
        for (what, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Domain { what, value });
            }
        }
        if !(self.torque_noise >= 0.0 && self.torque_noise.is_finite()) {
            return Err(Error::Domain { what: "torque_noise", value: self.torque_noise });
        }
        if !(self.calibration_gain != 0.0 && self.calibration_gain.is_finite()) {
            return Err(Error::Domain { what: "calibration_gain", value: self.calibration_gain });
        }
        if !self.calibration_offset.is_finite() {
            return Err(Error::NonFinite("calibration_offset"));
        }
        Ok(())
    }

    fn clip(&self, torque: f64) -> Reading {
        if fabs(torque) > self.torque_range {
            Reading { value: libm::copysign(self.torque_range, torque), saturated: true }
        } else {
            Reading { value: torque, saturated: false }
        }
    }

    /// Cable tension (N) from a raw torque reading (N·mm).
    pub fn tension_from_torque(&self, torque_reading: f64) -> Result<Reading> {
        if !torque_reading.is_finite() {
            return Err(Error::NonFinite("torque reading"));
        }
        let raw = self.clip(torque_reading);
        let torque = self.calibration_gain * raw.value + self.calibration_offset;
        Ok(Reading { value: torque / self.pulley_radius, saturated: raw.saturated })
    }

    /// Raw torque reading (N·mm) produced by a cable tension (N), with an
    /// additive noise sample (N·mm) applied before saturation.
    pub fn torque_from_tension(&self, tension: f64, noise: f64) -> Result<Reading> {
        if !tension.is_finite() || !noise.is_finite() {
            return Err(Error::NonFinite("tension"));
        }
        let torque = (tension * self.pulley_radius - self.calibration_offset) / self.calibration_gain;
        Ok(self.clip(torque + noise))
    }

    pub fn sample_interval(&self) -> f64 {
        1.0 / self.sample_rate
    }
}

/// Linear-frequency sine sweep `A sin(2π (f0 t + (f1 - f0) t² / (2 T)))`.
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChirpProfile {
    pub magnitude: f64,
    pub f_start: f64,
    pub f_end: f64,
    pub duration: f64,
}

pub fn chirp_profile(magnitude: f64, f_start: f64, f_end: f64, duration: f64) -> Result<ChirpProfile> {
    if !(magnitude > 0.0 && magnitude.is_finite()) {
        return Err(Error::Domain { what: "chirp magnitude", value: magnitude });
    }
    if !(f_start >= 0.0 && f_start < f_end && f_end.is_finite()) {
        return Err(Error::Domain { what: "chirp start frequency", value: f_start });
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::Domain { what: "chirp duration", value: duration });
    }
    Ok(ChirpProfile { magnitude, f_start, f_end, duration })
}

impl ChirpProfile {
    fn rate(&self) -> f64 {
        (self.f_end - self.f_start) / self.duration
    }

    pub fn phase(&self, t: f64) -> f64 {
        2.0 * core::f64::consts::PI * (self.f_start * t + 0.5 * self.rate() * t * t)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.magnitude * sin(self.phase(t))
    }

    /// Instantaneous frequency (Hz), the phase derivative over 2π.
    pub fn instantaneous_frequency(&self, t: f64) -> f64 {
        self.f_start + self.rate() * t
    }
}

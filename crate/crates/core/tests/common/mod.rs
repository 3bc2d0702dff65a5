#![allow(dead_code)]

use std::f64::consts::PI;

use polycurve_core::ShapeState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random shape with end angle uniform in `[lo, hi]`, higher modes in `[-1, 1]`
/// and `delta` in `(-pi, pi]`.
pub fn state_with_end_angle(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> ShapeState {
    let theta_e = rng.random_range(lo..=hi);
    let m1 = rng.random_range(-1.0..=1.0);
    let m2 = rng.random_range(-1.0..=1.0);
    let delta = PI - rng.random_range(0.0..2.0 * PI);
    ShapeState::new(theta_e - m1 / 2.0 - m2 / 3.0, m1, m2, delta)
}

/// Random shape with every mode in `[-3, 3]` and `|theta_e| <= pi`.
pub fn bounded_state(rng: &mut ChaCha8Rng) -> ShapeState {
    loop {
        let s = ShapeState::new(
            rng.random_range(-3.0..=3.0),
            rng.random_range(-3.0..=3.0),
            rng.random_range(-3.0..=3.0),
            PI - rng.random_range(0.0..2.0 * PI),
        );
        if s.theta_e().abs() <= PI {
            return s;
        }
    }
}

//! Scenario simulation, estimation pipelines and verification for
//! tendon-driven continuum instruments, built on [`polycurve_core`].

pub mod error;
pub mod estimate;
pub mod io;
pub mod scenario;
pub mod simulate;
pub mod spec;
pub mod verify;

pub use error::{Error, Result};
pub use polycurve_core as core;

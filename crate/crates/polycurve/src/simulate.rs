//! Scenario files: `scenario.csv`, `truth.csv`, `polyline.csv` and the `scenario.json` sidecar.

use std::path::Path;

use polycurve_core::actuation::ActuationUnitSim;
use polycurve_core::plant::ContactPlane;
use polycurve_core::InstrumentParams;
use serde::{Deserialize, Serialize};

use crate::io::{self, PolylineRow, PoseRow};
use crate::scenario::{generate_scenario, NoiseSpec, ScenarioLog};
use crate::spec::{ExperimentSpec, Plateau, ScenarioKind};
use crate::{Error, Result};

pub const SIDECAR_FORMAT: &str = "polycurve-scenario-meta";

const DEFAULT_PARAMS_NOTE: &str =
    "instrument constants are repository defaults chosen at a plausible scale, not measurements of a built prototype";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Files {
    pub log: String,
    pub truth: String,
    pub polyline: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format: String,
    pub version: String,
    pub kind: ScenarioKind,
    pub params: InstrumentParams,
    /// `repository-default` or `spec`.
    pub params_source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params_note: Option<String>,
    pub n_links: usize,
    pub noise: NoiseSpec,
    pub actuation: ActuationUnitSim,
    pub seed: u64,
    pub rate_hz: f64,
    pub samples: usize,
    pub saturated_readings: usize,
    pub contact: Option<ContactPlane>,
    pub plateaus: Vec<Plateau>,
    pub files: Files,
    pub spec: ExperimentSpec,
}

impl Sidecar {
    pub fn read(dir: &Path) -> Result<Sidecar> {
        let path = dir.join(io::SIDECAR_FILE);
        let value: serde_json::Value = io::read_json(&path)?;
        let format = value.get("format").and_then(|v| v.as_str()).unwrap_or_default();
        if format != SIDECAR_FORMAT {
            return Err(Error::schema(&path, format!("expected format `{SIDECAR_FORMAT}`, found `{format}`")));
        }
        let version = value.get("version").and_then(|v| v.as_str()).unwrap_or_default();
        let major = version.split('.').next().and_then(|m| m.parse::<u32>().ok());
        if major != Some(io::MAJOR) {
            return Err(Error::schema(&path, format!("unsupported version `{version}`")));
        }
        serde_json::from_value(value).map_err(|source| Error::Json { path, source })
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub log: ScenarioLog,
    pub sidecar: Sidecar,
}

pub fn simulate(spec: &ExperimentSpec) -> Result<Simulation> {
    spec.validate()?;
    let mut plant = spec.plant()?;
    let contact = match spec.kind {
        ScenarioKind::TipContact => Some(spec.contact_plane(&plant)?),
        _ => None,
    };
    if let Some(c) = contact {
        plant = plant.with_contact(c);
    }
    let log = generate_scenario(
        &plant,
        &|t| spec.tension_at(t),
        &|t| spec.wrench_at(t),
        &spec.noise,
        spec.duration_s,
        spec.rate_hz,
        &spec.actuation,
        spec.seed,
    )?;
    let sidecar = Sidecar {
        format: SIDECAR_FORMAT.into(),
        version: io::VERSION.into(),
        kind: spec.kind,
        params: spec.params(),
        params_source: if spec.instrument.is_some() { "spec" } else { "repository-default" }.into(),
        params_note: spec.instrument.is_none().then(|| DEFAULT_PARAMS_NOTE.to_string()),
        n_links: spec.n_links,
        noise: spec.noise,
        actuation: spec.actuation,
        seed: spec.seed,
        rate_hz: spec.rate_hz,
        samples: log.samples.len(),
        saturated_readings: log.saturated_readings,
        contact,
        plateaus: spec.plateaus(),
        files: Files {
            log: io::SCENARIO_FILE.into(),
            truth: io::TRUTH_FILE.into(),
            polyline: io::POLYLINE_FILE.into(),
        },
        spec: spec.clone(),
    };
    Ok(Simulation { log, sidecar })
}

pub fn write_simulation(dir: &Path, sim: &Simulation) -> Result<()> {
    io::create_dir(dir)?;
    let n = sim.sidecar.params.n_cables;
    let measured: Vec<PoseRow> = sim
        .log
        .samples
        .iter()
        .map(|s| PoseRow { t: s.t, tip: s.tip, tension: s.tension.clone(), wrench: s.wrench })
        .collect();
    let truth: Vec<PoseRow> = sim
        .log
        .truth
        .iter()
        .map(|s| PoseRow { t: s.t, tip: s.tip, tension: s.tension.clone(), wrench: s.wrench })
        .collect();
    let mut stations = Vec::new();
    for s in &sim.log.truth {
        let last = (s.polyline.len() - 1) as f64;
        for (k, p) in s.polyline.iter().enumerate() {
            stations.push(PolylineRow { t: s.t, station: k, s: k as f64 / last, point: *p });
        }
    }
    io::write_pose_table(&dir.join(io::SCENARIO_FILE), io::SCENARIO_FORMAT, n, &measured)?;
    io::write_pose_table(&dir.join(io::TRUTH_FILE), io::TRUTH_FORMAT, n, &truth)?;
    io::write_polyline_table(&dir.join(io::POLYLINE_FILE), &stations)?;
    io::write_json(&dir.join(io::SIDECAR_FILE), &sim.sidecar)
}

/// Runs the experiment and writes its files into `dir`.
pub fn cmd_simulate(spec: &ExperimentSpec, dir: &Path) -> Result<Simulation> {
    let sim = simulate(spec)?;
    write_simulation(dir, &sim)?;
    Ok(sim)
}

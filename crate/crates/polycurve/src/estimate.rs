//! Per-sample shape and force estimation from a scenario log.

use std::path::Path;

use nalgebra::Vector3;
use polycurve_core::kinematics::{backbone_polyline, forward_pose, tip_pose};
use polycurve_core::solver::{solve_constant_curvature, solve_shape, ShapeTracker, SolverConfig};
use polycurve_core::statics::estimate_wrench;
use polycurve_core::{InstrumentParams, RigidTransform, ShapeState, TensionVector, Wrench};
use serde::{Deserialize, Serialize};

use crate::io::{self, num, PoseRow};
use crate::simulate::{Sidecar, Simulation};
use crate::spec::Plateau;
use crate::{Error, Result};

/// Arclength samples used for along-body error statistics and shape export.
pub const ARCLENGTH_SAMPLES: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Constant curvature, closed form from the tip position.
    Cc,
    /// Quadratic curvature fitted to the full tip pose.
    Poly2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Shape,
    ShapeForce,
}

/// Scenario contents needed for estimation.
#[derive(Debug, Clone)]
pub struct LoadedLog {
    pub sidecar: Sidecar,
    pub samples: Vec<PoseRow>,
    pub truth: Vec<PoseRow>,
    /// Ground-truth stations per sample, base first.
    pub polylines: Vec<Vec<Vector3<f64>>>,
}

impl LoadedLog {
    pub fn read(dir: &Path) -> Result<Self> {
        let sidecar = Sidecar::read(dir)?;
        let n = sidecar.params.n_cables;
        let samples = io::read_pose_table(&dir.join(&sidecar.files.log), io::SCENARIO_FORMAT, n)?;
        let truth = io::read_pose_table(&dir.join(&sidecar.files.truth), io::TRUTH_FORMAT, n)?;
        let polyline_path = dir.join(&sidecar.files.polyline);
        let stations = io::read_polyline_table(&polyline_path)?;
        if truth.len() != samples.len() {
            return Err(Error::schema(dir.join(&sidecar.files.truth), "row count differs from the scenario log"));
        }
        let per_sample = sidecar.n_links + 1;
        if stations.len() != per_sample * samples.len() {
            return Err(Error::schema(&polyline_path, format!("expected {per_sample} stations per sample")));
        }
        let polylines = stations.chunks(per_sample).map(|c| c.iter().map(|r| r.point).collect()).collect();
        Ok(LoadedLog { sidecar, samples, truth, polylines })
    }

    pub fn from_simulation(sim: &Simulation) -> Self {
        let row = |t, tip, tension: &Vec<f64>, wrench| PoseRow { t, tip, tension: tension.clone(), wrench };
        LoadedLog {
            sidecar: sim.sidecar.clone(),
            samples: sim.log.samples.iter().map(|s| row(s.t, s.tip, &s.tension, s.wrench)).collect(),
            truth: sim.log.truth.iter().map(|s| row(s.t, s.tip, &s.tension, s.wrench)).collect(),
            polylines: sim.log.truth.iter().map(|s| s.polyline.clone()).collect(),
        }
    }

    /// Direction along which forces are compared: the contact normal, else
    /// the configured tip force direction.
    pub fn force_axis(&self) -> Option<Vector3<f64>> {
        if let Some(c) = &self.sidecar.contact {
            return Some(c.normal);
        }
        let f = Vector3::from(self.sidecar.spec.tip_force_n);
        (f.norm() > 0.0).then(|| f.normalize())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    pub t: f64,
    pub state: ShapeState,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub tip_position_error_mm: f64,
    pub along_body_rms_mm: f64,
    pub bending_angle_rms_rad: f64,
    pub wrench: Option<Wrench>,
    pub truncated_directions: usize,
    /// Estimated and true force along the comparison axis (N).
    pub axial_force: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    pub non_converged: usize,
    pub rank_deficient_samples: usize,
    pub truncated_directions: usize,
    pub rejected_rows: usize,
    pub saturated_readings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeStats {
    pub arclength_samples: usize,
    pub rms_tip_position_error_mm: f64,
    pub rms_along_body_error_mm: f64,
    pub rms_bending_angle_error_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelForce {
    pub level: usize,
    pub multiplier: f64,
    pub samples: usize,
    /// Estimate from the plateau-averaged pose and tensions (N).
    pub estimated_n: f64,
    /// Mean of the per-sample estimates, for comparison (N).
    pub per_sample_mean_n: f64,
    pub true_n: f64,
    pub signed_error_n: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceStats {
    pub axis: Option<[f64; 3]>,
    pub rms_force_error_n: f64,
    pub levels: Vec<LevelForce>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub format: String,
    pub version: String,
    pub model: Model,
    pub mode: Mode,
    pub samples: usize,
    pub estimated: usize,
    pub counters: Counters,
    pub shape: ShapeStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub force: Option<ForceStats>,
}

/// Long-format shape export row: one point of one curve at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapePoint {
    pub t: f64,
    pub source: &'static str,
    pub s: f64,
    pub point: Vector3<f64>,
}

pub struct Estimate {
    pub rows: Vec<EstimateRow>,
    pub summary: Summary,
    pub shapes: Vec<ShapePoint>,
}

/// Point at normalized arclength `s` on a polyline with evenly spaced stations.
fn polyline_at(stations: &[Vector3<f64>], s: f64) -> Vector3<f64> {
    let segments = stations.len() - 1;
    let x = s.clamp(0.0, 1.0) * segments as f64;
    let j = (x as usize).min(segments - 1);
    let w = x - j as f64;
    stations[j] * (1.0 - w) + stations[j + 1] * w
}

/// Angle between the local tangent and the base z-axis, from a centred
/// difference over one link.
fn polyline_bend(stations: &[Vector3<f64>], s: f64) -> f64 {
    let h = 0.5 / (stations.len() - 1) as f64;
    let (a, b) = ((s - h).max(0.0), (s + h).min(1.0));
    let d = polyline_at(stations, b) - polyline_at(stations, a);
    (d.z / d.norm()).clamp(-1.0, 1.0).acos()
}

fn model_bend(state: &ShapeState, params: &InstrumentParams, s: f64) -> Result<f64> {
    let r = forward_pose(state, params, s)?.rotation;
    Ok(r[(2, 2)].clamp(-1.0, 1.0).acos())
}

fn arclengths() -> impl Iterator<Item = f64> {
    (0..ARCLENGTH_SAMPLES).map(|j| j as f64 / (ARCLENGTH_SAMPLES - 1) as f64)
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

pub fn estimate(log: &LoadedLog, model: Model, mode: Mode) -> Result<Estimate> {
    let params = log.sidecar.params;
    let axis = log.force_axis();
    let mut tracker = ShapeTracker::new(params, SolverConfig::default())?;
    let mut rows = Vec::with_capacity(log.samples.len());
    let mut shapes = Vec::new();
    let mut counters = Counters {
        non_converged: 0,
        rank_deficient_samples: 0,
        truncated_directions: 0,
        rejected_rows: 0,
        saturated_readings: log.sidecar.saturated_readings,
    };
    let mut sample_index = Vec::with_capacity(log.samples.len());

    for (k, (sample, truth)) in log.samples.iter().zip(&log.truth).enumerate() {
        if sample.tension.iter().any(|v| *v < 0.0) {
            counters.rejected_rows += 1;
            continue;
        }
        let cc = solve_constant_curvature(&sample.tip, &params)?;
        let (state, objective, iterations, converged) = match model {
            Model::Cc => (cc, polycurve_core::solver::objective(&cc, &params, &sample.tip), 0, true),
            Model::Poly2 => {
                let r = tracker.update(&sample.tip)?;
                (r.state, r.objective, r.iterations, r.converged)
            }
        };
        counters.non_converged += usize::from(!converged);

        let truth_line = &log.polylines[k];
        let estimated = backbone_polyline(&state, &params, ARCLENGTH_SAMPLES)?;
        let mut body = Vec::with_capacity(ARCLENGTH_SAMPLES);
        let mut bend = Vec::with_capacity(ARCLENGTH_SAMPLES);
        for (j, s) in arclengths().enumerate() {
            body.push((estimated[j] - polyline_at(truth_line, s)).norm());
            bend.push(model_bend(&state, &params, s)? - polyline_bend(truth_line, s));
            shapes.push(ShapePoint { t: sample.t, source: "truth", s, point: polyline_at(truth_line, s) });
        }
        let cc_line = backbone_polyline(&cc, &params, ARCLENGTH_SAMPLES)?;
        shapes.extend(arclengths().zip(cc_line).map(|(s, p)| ShapePoint { t: sample.t, source: "cc", s, point: p }));
        if model == Model::Poly2 {
            shapes.extend(arclengths().zip(&estimated).map(|(s, p)| ShapePoint { t: sample.t, source: "poly2", s, point: *p }));
        }

        let (wrench, truncated, axial_force) = match mode {
            Mode::Shape => (None, 0, None),
            Mode::ShapeForce => {
                let tau = TensionVector::new(sample.tension.clone())?;
                let report = estimate_wrench(&state, &params, &tau, &Wrench::zero())?;
                counters.rank_deficient_samples += usize::from(report.rank_deficiency_flag);
                counters.truncated_directions += report.truncated_directions;
                let axial = axis.map(|n| (report.wrench_estimate.force.dot(&n), truth.wrench.force.dot(&n)));
                (Some(report.wrench_estimate), report.truncated_directions, axial)
            }
        };

        rows.push(EstimateRow {
            t: sample.t,
            state,
            objective,
            iterations,
            converged,
            tip_position_error_mm: (tip_pose(&state, &params).position - truth.tip.position).norm(),
            along_body_rms_mm: rms(body.into_iter()),
            bending_angle_rms_rad: rms(bend.into_iter()),
            wrench,
            truncated_directions: truncated,
            axial_force,
        });
        sample_index.push(k);
    }

    let shape = ShapeStats {
        arclength_samples: ARCLENGTH_SAMPLES,
        rms_tip_position_error_mm: rms(rows.iter().map(|r| r.tip_position_error_mm)),
        rms_along_body_error_mm: rms(rows.iter().map(|r| r.along_body_rms_mm)),
        rms_bending_angle_error_rad: rms(rows.iter().map(|r| r.bending_angle_rms_rad)),
    };

    let force = (mode == Mode::ShapeForce).then(|| {
        let errors = rows.iter().zip(&sample_index).map(|(r, &k)| {
            (r.wrench.expect("force mode").force - log.truth[k].wrench.force).norm()
        });
        let rms_force_error_n = rms(errors);
        let levels = match axis {
            Some(n) => log
                .sidecar
                .plateaus
                .iter()
                .map(|p| plateau_force(log, &rows, &sample_index, p, &n, model))
                .collect::<Result<Vec<_>>>(),
            None => Ok(Vec::new()),
        };
        levels.map(|levels| ForceStats { axis: axis.map(|a| [a.x, a.y, a.z]), rms_force_error_n, levels })
    });
    let force = force.transpose()?;

    let summary = Summary {
        format: "polycurve-summary".into(),
        version: io::VERSION.into(),
        model,
        mode,
        samples: log.samples.len(),
        estimated: rows.len(),
        counters,
        shape,
        force,
    };
    Ok(Estimate { rows, summary, shapes })
}

/// Mean pose: arithmetic mean position and the normalized mean of
/// sign-aligned quaternions.
fn mean_pose(poses: &[RigidTransform]) -> RigidTransform {
    let n = poses.len() as f64;
    let position = poses.iter().map(|p| p.position).sum::<Vector3<f64>>() / n;
    let reference = io::rotation_to_quaternion(&poses[0].rotation);
    let mut q = [0.0; 4];
    for p in poses {
        let qi = io::rotation_to_quaternion(&p.rotation);
        let sign = if qi.iter().zip(&reference).map(|(a, b)| a * b).sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
        for k in 0..4 {
            q[k] += sign * qi[k];
        }
    }
    RigidTransform::new(io::quaternion_to_rotation(q), position)
}

/// Force along `axis` for one plateau. The plateau is quasi-static, so the
/// measured pose and tensions are averaged first and the shape and wrench
/// are estimated once from the averages.
fn plateau_force(
    log: &LoadedLog,
    rows: &[EstimateRow],
    sample_index: &[usize],
    plateau: &Plateau,
    axis: &Vector3<f64>,
    model: Model,
) -> Result<LevelForce> {
    let last = plateau.level + 1 == log.sidecar.plateaus.len();
    let inside: Vec<usize> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.t >= plateau.t_start - 1e-12 && (r.t < plateau.t_end - 1e-12 || last))
        .map(|(j, _)| j)
        .collect();
    let params = log.sidecar.params;
    let mut level = LevelForce {
        level: plateau.level,
        multiplier: plateau.multiplier,
        samples: inside.len(),
        estimated_n: f64::NAN,
        per_sample_mean_n: f64::NAN,
        true_n: f64::NAN,
        signed_error_n: f64::NAN,
        relative_error: f64::NAN,
    };
    if inside.is_empty() {
        return Ok(level);
    }
    let n = inside.len() as f64;
    let measured: Vec<&PoseRow> = inside.iter().map(|&j| &log.samples[sample_index[j]]).collect();
    let poses: Vec<RigidTransform> = measured.iter().map(|r| r.tip).collect();
    let pose = mean_pose(&poses);
    let tension: Vec<f64> =
        (0..params.n_cables).map(|i| measured.iter().map(|r| r.tension[i]).sum::<f64>() / n).collect();
    let cc = solve_constant_curvature(&pose, &params)?;
    let state = match model {
        Model::Cc => cc,
        Model::Poly2 => solve_shape(&pose, &params, &SolverConfig { initial_state: cc, ..Default::default() })?.state,
    };
    let report = estimate_wrench(&state, &params, &TensionVector::new(tension)?, &Wrench::zero())?;

    level.estimated_n = report.wrench_estimate.force.dot(axis);
    level.per_sample_mean_n = inside.iter().filter_map(|&j| rows[j].axial_force).map(|v| v.0).sum::<f64>() / n;
    level.true_n = inside.iter().map(|&j| log.truth[sample_index[j]].wrench.force.dot(axis)).sum::<f64>() / n;
    level.signed_error_n = level.estimated_n - level.true_n;
    if level.true_n != 0.0 {
        level.relative_error = level.signed_error_n / level.true_n.abs();
    }
    Ok(level)
}

pub fn estimate_columns(mode: Mode) -> Vec<String> {
    let mut cols: Vec<String> = [
        "t", "m0", "m1", "m2", "delta", "theta_e", "objective", "iterations", "converged",
        "tip_position_error_mm", "along_body_rms_mm", "bending_angle_rms_rad",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    if mode == Mode::ShapeForce {
        cols.extend(["fx", "fy", "fz", "mx", "my", "mz", "truncated_directions"].iter().map(|s| s.to_string()));
    }
    cols
}

fn estimate_record(r: &EstimateRow) -> Vec<String> {
    let s = r.state;
    let mut out = vec![
        num(r.t),
        num(s.m0),
        num(s.m1),
        num(s.m2),
        num(s.delta),
        num(s.theta_e()),
        num(r.objective),
        r.iterations.to_string(),
        u8::from(r.converged).to_string(),
        num(r.tip_position_error_mm),
        num(r.along_body_rms_mm),
        num(r.bending_angle_rms_rad),
    ];
    if let Some(w) = r.wrench {
        out.extend(w.to_vector().iter().map(|v| num(*v)));
        out.push(r.truncated_directions.to_string());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TableFormat {
    Csv,
    Json,
}

pub const ESTIMATES_STEM: &str = "estimates";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SHAPES_FILE: &str = "shapes.csv";

/// Writes `estimates.csv` (or `.json`), `summary.json` and `shapes.csv` into `dir`.
pub fn write_estimate(dir: &Path, est: &Estimate, format: TableFormat) -> Result<()> {
    io::create_dir(dir)?;
    let columns = estimate_columns(est.summary.mode);
    let records: Vec<Vec<String>> = est.rows.iter().map(estimate_record).collect();
    match format {
        TableFormat::Csv => {
            io::write_table(&dir.join(format!("{ESTIMATES_STEM}.csv")), io::ESTIMATE_FORMAT, &columns, &records)?
        }
        TableFormat::Json => {
            let rows: Vec<serde_json::Map<String, serde_json::Value>> = records
                .iter()
                .map(|rec| {
                    columns
                        .iter()
                        .zip(rec)
                        .map(|(c, v)| {
                            let n: f64 = v.parse().expect("numeric field");
                            (c.clone(), serde_json::json!(n))
                        })
                        .collect()
                })
                .collect();
            let doc = serde_json::json!({ "format": io::ESTIMATE_FORMAT, "version": io::VERSION, "rows": rows });
            io::write_json(&dir.join(format!("{ESTIMATES_STEM}.json")), &doc)?
        }
    }
    io::write_json(&dir.join(SUMMARY_FILE), &est.summary)?;
    let shape_columns: Vec<String> = ["t", "source", "s", "x", "y", "z"].iter().map(|s| s.to_string()).collect();
    let shape_rows: Vec<Vec<String>> = est
        .shapes
        .iter()
        .map(|p| vec![num(p.t), p.source.to_string(), num(p.s), num(p.point.x), num(p.point.y), num(p.point.z)])
        .collect();
    io::write_table(&dir.join(SHAPES_FILE), io::SHAPES_FORMAT, &shape_columns, &shape_rows)
}

pub fn cmd_estimate(log_dir: &Path, mode: Mode, model: Model, out: &Path, format: TableFormat) -> Result<Estimate> {
    let log = LoadedLog::read(log_dir)?;
    let est = estimate(&log, model, mode)?;
    write_estimate(out, &est, format)?;
    Ok(est)
}

//! Versioned flat-file formats.
//!
//! Every CSV starts with a `# <format> v<major>.<minor>` line followed by the
//! column header. Readers accept any minor version of the major they know.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector3, Vector6};
use polycurve_core::{RigidTransform, Wrench};

use crate::{Error, Result};

pub const SCENARIO_FORMAT: &str = "polycurve-scenario";
pub const TRUTH_FORMAT: &str = "polycurve-truth";
pub const POLYLINE_FORMAT: &str = "polycurve-polyline";
pub const ESTIMATE_FORMAT: &str = "polycurve-estimates";
pub const SHAPES_FORMAT: &str = "polycurve-shapes";
pub const MAJOR: u32 = 1;
pub const VERSION: &str = "1.0";

pub const SCENARIO_FILE: &str = "scenario.csv";
pub const TRUTH_FILE: &str = "truth.csv";
pub const POLYLINE_FILE: &str = "polyline.csv";
pub const SIDECAR_FILE: &str = "scenario.json";

/// One row of a scenario or truth table.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseRow {
    pub t: f64,
    pub tip: RigidTransform,
    pub tension: Vec<f64>,
    pub wrench: Wrench,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolylineRow {
    pub t: f64,
    pub station: usize,
    pub s: f64,
    pub point: Vector3<f64>,
}

pub fn pose_columns(n_cables: usize) -> Vec<String> {
    let mut cols: Vec<String> = ["t", "px", "py", "pz", "qw", "qx", "qy", "qz"].iter().map(|s| s.to_string()).collect();
    cols.extend((1..=n_cables).map(|i| format!("tau{i}")));
    cols.extend(["fx", "fy", "fz", "mx", "my", "mz"].iter().map(|s| s.to_string()));
    cols
}

pub const POLYLINE_COLUMNS: [&str; 6] = ["t", "station", "s", "x", "y", "z"];

/// Quaternion with non-negative scalar part.
pub fn rotation_to_quaternion(r: &Matrix3<f64>) -> [f64; 4] {
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r));
    let sign = if q.w < 0.0 { -1.0 } else { 1.0 };
    [sign * q.w, sign * q.i, sign * q.j, sign * q.k]
}

pub fn quaternion_to_rotation(q: [f64; 4]) -> Matrix3<f64> {
    UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3])).to_rotation_matrix().into_inner()
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.into(), source }
}

/// Writes `# format vVERSION`, the header, then the rows.
pub fn write_table(path: &Path, format: &str, columns: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut text = format!("# {format} v{VERSION}\n");
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    let csv_err = |source| Error::Csv { path: path.into(), source };
    writer.write_record(columns).map_err(csv_err)?;
    for row in rows {
        writer.write_record(row).map_err(csv_err)?;
    }
    let body = writer.into_inner().map_err(|e| Error::Io { path: path.into(), source: e.into_error() })?;
    text.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
    fs::write(path, text).map_err(io_err(path))
}

/// Table contents after the version line and header were checked.
pub struct Table {
    pub path: PathBuf,
    pub minor: u32,
    pub rows: Vec<Vec<f64>>,
}

/// Reads a table written by [`write_table`], checking the format name, the
/// major version and the exact column header.
pub fn read_table(path: &Path, format: &str, columns: &[String]) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let (first, body) = text.split_once('\n').unwrap_or((text.as_str(), ""));
    let minor = parse_version_line(path, first, format)?;

    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    let csv_err = |source| Error::Csv { path: path.into(), source };
    let header = reader.headers().map_err(csv_err)?.clone();
    for (k, expected) in columns.iter().enumerate() {
        match header.get(k) {
            Some(found) if found == expected => {}
            Some(found) => {
                return Err(Error::schema(path, format!("column {} is `{found}`, expected `{expected}`", k + 1)))
            }
            None => return Err(Error::schema(path, format!("missing column `{expected}`"))),
        }
    }
    if header.len() > columns.len() {
        return Err(Error::schema(path, format!("unexpected column `{}`", &header[columns.len()])));
    }

    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let mut row = Vec::with_capacity(columns.len());
        for (k, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::schema(path, format!("row {}: column `{}` holds `{field}`, not a number", line + 1, columns[k]))
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    Ok(Table { path: path.into(), minor, rows })
}

fn parse_version_line(path: &Path, line: &str, format: &str) -> Result<u32> {
    let bad = || Error::schema(path, format!("first line must be `# {format} v{MAJOR}.<minor>`, found `{line}`"));
    let rest = line.strip_prefix("# ").ok_or_else(bad)?;
    let (name, version) = rest.trim().split_once(" v").ok_or_else(bad)?;
    if name != format {
        return Err(Error::schema(path, format!("expected a `{format}` file, found `{name}`")));
    }
    let (major, minor) = version.split_once('.').ok_or_else(bad)?;
    let major: u32 = major.parse().map_err(|_| bad())?;
    let minor: u32 = minor.parse().map_err(|_| bad())?;
    if major != MAJOR {
        return Err(Error::schema(path, format!("unsupported major version {major} (this reader handles {MAJOR}.x)")));
    }
    Ok(minor)
}

pub fn pose_record(row: &PoseRow) -> Vec<String> {
    let p = row.tip.position;
    let q = rotation_to_quaternion(&row.tip.rotation);
    let w = row.wrench.to_vector();
    let mut out = vec![num(row.t), num(p.x), num(p.y), num(p.z)];
    out.extend(q.iter().map(|v| num(*v)));
    out.extend(row.tension.iter().map(|v| num(*v)));
    out.extend(w.iter().map(|v| num(*v)));
    out
}

pub fn write_pose_table(path: &Path, format: &str, n_cables: usize, rows: &[PoseRow]) -> Result<()> {
    let records: Vec<Vec<String>> = rows.iter().map(pose_record).collect();
    write_table(path, format, &pose_columns(n_cables), &records)
}

pub fn read_pose_table(path: &Path, format: &str, n_cables: usize) -> Result<Vec<PoseRow>> {
    let table = read_table(path, format, &pose_columns(n_cables))?;
    let mut out = Vec::with_capacity(table.rows.len());
    let mut last_t = f64::NEG_INFINITY;
    for (k, r) in table.rows.iter().enumerate() {
        if r[0] <= last_t {
            return Err(Error::schema(path, format!("row {}: timestamps must increase", k + 1)));
        }
        last_t = r[0];
        let q = [r[4], r[5], r[6], r[7]];
        if q.iter().map(|v| v * v).sum::<f64>() < 1e-12 {
            return Err(Error::schema(path, format!("row {}: zero quaternion", k + 1)));
        }
        let tip = RigidTransform::new(quaternion_to_rotation(q), Vector3::new(r[1], r[2], r[3]));
        let tension = r[8..8 + n_cables].to_vec();
        let w = &r[8 + n_cables..];
        let wrench = Wrench::from_vector(&Vector6::from_column_slice(w));
        out.push(PoseRow { t: r[0], tip, tension, wrench });
    }
    Ok(out)
}

pub fn write_polyline_table(path: &Path, rows: &[PolylineRow]) -> Result<()> {
    let columns: Vec<String> = POLYLINE_COLUMNS.iter().map(|s| s.to_string()).collect();
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![num(r.t), r.station.to_string(), num(r.s), num(r.point.x), num(r.point.y), num(r.point.z)])
        .collect();
    write_table(path, POLYLINE_FORMAT, &columns, &records)
}

pub fn read_polyline_table(path: &Path) -> Result<Vec<PolylineRow>> {
    let columns: Vec<String> = POLYLINE_COLUMNS.iter().map(|s| s.to_string()).collect();
    let table = read_table(path, POLYLINE_FORMAT, &columns)?;
    Ok(table
        .rows
        .iter()
        .map(|r| PolylineRow { t: r[0], station: r[1] as usize, s: r[2], point: Vector3::new(r[3], r[4], r[5]) })
        .collect())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json { path: path.into(), source })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.into(), source })
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(io_err(path))
}

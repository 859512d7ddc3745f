//! On-disk formats: states as CSV or JSON, trajectories as a directory of
//! slices plus a manifest, experiment reports as JSON with per-series CSV.
//!
//! Floats are written with 17 significant digits so every value round-trips.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{DynamicsError, EquationSpec, Sign, Trajectory, Variant};
use crate::experiments::ExperimentReport;
use crate::gauges::GaugeSpec;
use crate::norms::MomentumSeries;
use crate::spectral::{FourierState, SpectralError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_owned(),
        source,
    }
}

fn format_err(path: &Path, message: impl ToString) -> IoError {
    IoError::Format {
        path: path.to_owned(),
        message: message.to_string(),
    }
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
    }
    fs::write(path, text).map_err(io_err(path))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, IoError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
    }
    csv::Writer::from_path(path).map_err(|e| format_err(path, e))
}

fn write_rows<const K: usize>(path: &Path, header: [&str; K], rows: impl IntoIterator<Item = [String; K]>) -> Result<(), IoError> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| format_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| format_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes `n,re,im` rows for every mode.
pub fn write_state_csv(path: &Path, state: &FourierState) -> Result<(), IoError> {
    write_rows(
        path,
        ["n", "re", "im"],
        state.modes().map(|(n, c)| [n.to_string(), float(c.re), float(c.im)]),
    )
}

/// Reads `n,re,im` rows; the mode cap is the largest `|n|` and missing modes are zero.
pub fn read_state_csv(path: &Path, time: f64) -> Result<FourierState, IoError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| format_err(path, e))?;
    let headers = reader.headers().map_err(|e| format_err(path, e))?.clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["n", "re", "im"] {
        return Err(format_err(path, format!("expected header n,re,im, got {}", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| format_err(path, e))?;
        let bad = |what: &str| format_err(path, format!("row {}: malformed {what}", line + 2));
        let n: i64 = record[0].trim().parse().map_err(|_| bad("mode"))?;
        let re: f64 = record[1].trim().parse().map_err(|_| bad("real part"))?;
        let im: f64 = record[2].trim().parse().map_err(|_| bad("imaginary part"))?;
        rows.push((n, Complex64::new(re, im)));
    }
    states_from_rows(path, rows, time)
}

fn states_from_rows(path: &Path, rows: Vec<(i64, Complex64)>, time: f64) -> Result<FourierState, IoError> {
    let cap = rows.iter().map(|(n, _)| n.unsigned_abs() as usize).max().ok_or_else(|| format_err(path, "no modes"))?;
    let mut state = FourierState::zeros(cap).with_time(time);
    let mut seen = vec![false; 2 * cap + 1];
    for (n, c) in rows {
        let idx = (n + cap as i64) as usize;
        if std::mem::replace(&mut seen[idx], true) {
            return Err(format_err(path, format!("mode {n} listed twice")));
        }
        state.set(n, c);
    }
    Ok(state)
}

#[derive(Serialize, Deserialize)]
struct StateJson {
    mode_cap: usize,
    time: f64,
    coeffs: Vec<(i64, f64, f64)>,
}

pub fn state_to_json(state: &FourierState) -> String {
    let doc = StateJson {
        mode_cap: state.mode_cap(),
        time: state.time(),
        coeffs: state.modes().map(|(n, c)| (n, c.re, c.im)).collect(),
    };
    serde_json::to_string_pretty(&doc).expect("states serialize")
}

pub fn write_state_json(path: &Path, state: &FourierState) -> Result<(), IoError> {
    write_text(path, &state_to_json(state))
}

pub fn read_state_json(path: &Path) -> Result<FourierState, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let doc: StateJson = serde_json::from_str(&text).map_err(|e| format_err(path, e))?;
    let mut state = FourierState::zeros(doc.mode_cap).with_time(doc.time);
    for (n, re, im) in doc.coeffs {
        if n.unsigned_abs() as usize > doc.mode_cap {
            return Err(format_err(path, format!("mode {n} outside cap {}", doc.mode_cap)));
        }
        state.set(n, Complex64::new(re, im));
    }
    Ok(state)
}

/// Reads a state from `.json` or `.csv` (by extension).
pub fn read_state(path: &Path) -> Result<FourierState, IoError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => read_state_json(path),
        _ => read_state_csv(path, 0.0),
    }
}

/// Manifest stored as `trajectory.json` next to the slice files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub equation: Variant,
    pub sign: Sign,
    pub mode_cap: usize,
    pub dt: f64,
    pub sample_dt: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub padded_points: usize,
    pub gauges: Vec<GaugeSpec>,
    pub slices: Vec<SliceEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceEntry {
    pub time: f64,
    pub file: String,
}

pub const TRAJECTORY_MANIFEST: &str = "trajectory.json";

pub fn write_trajectory(dir: &Path, traj: &Trajectory) -> Result<TrajectoryManifest, IoError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let width = traj.len().to_string().len().max(5);
    let mut slices = Vec::with_capacity(traj.len());
    for (k, state) in traj.states().iter().enumerate() {
        let file = format!("slice_{k:0width$}.csv");
        write_state_csv(&dir.join(&file), state)?;
        slices.push(SliceEntry { time: state.time(), file });
    }
    let manifest = TrajectoryManifest {
        equation: traj.equation().variant,
        sign: traj.equation().sign,
        mode_cap: traj.mode_cap(),
        dt: traj.step_dt(),
        sample_dt: traj.sample_dt(),
        t_end: traj.last().time(),
        padded_points: traj.padded_points(),
        gauges: traj.gauges().to_vec(),
        slices,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifests serialize");
    write_text(&dir.join(TRAJECTORY_MANIFEST), &text)?;
    Ok(manifest)
}

pub fn read_trajectory(dir: &Path) -> Result<Trajectory, IoError> {
    let path = dir.join(TRAJECTORY_MANIFEST);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: TrajectoryManifest = serde_json::from_str(&text).map_err(|e| format_err(&path, e))?;
    let mut states = Vec::with_capacity(manifest.slices.len());
    for slice in &manifest.slices {
        let state = read_state_csv(&dir.join(&slice.file), slice.time)?;
        let state = if state.mode_cap() == manifest.mode_cap {
            state
        } else if state.mode_cap() < manifest.mode_cap {
            state.with_mode_cap(manifest.mode_cap)
        } else {
            return Err(format_err(&dir.join(&slice.file), "slice exceeds the manifest's mode cap"));
        };
        states.push(state);
    }
    Ok(Trajectory::with_metadata(
        states,
        EquationSpec::new(manifest.equation, manifest.sign),
        manifest.sample_dt,
        manifest.dt,
        manifest.padded_points,
        manifest.gauges,
    )?)
}

/// Writes `N,P` rows to `<stem>.csv` and the verdict to `<stem>.json`.
pub fn write_momentum_series(dir: &Path, stem: &str, series: &MomentumSeries) -> Result<(), IoError> {
    write_rows(
        &dir.join(format!("{stem}.csv")),
        ["N", "P"],
        series.truncations.iter().map(|(n, p)| [n.to_string(), float(*p)]),
    )?;
    let text = serde_json::to_string_pretty(&series.verdict).expect("verdicts serialize");
    write_text(&dir.join(format!("{stem}.json")), &text)
}

/// One row of a multiplier sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct J1Row {
    pub n: i64,
    pub radius: u64,
    pub value: f64,
}

pub fn write_j1_csv(path: &Path, rows: &[J1Row]) -> Result<(), IoError> {
    write_rows(
        path,
        ["n", "K", "value"],
        rows.iter().map(|r| [r.n.to_string(), r.radius.to_string(), float(r.value)]),
    )
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

/// `report.json`, `series/<name>.csv` and `states/<name>.csv` under `dir`.
pub fn write_report(dir: &Path, report: &ExperimentReport) -> Result<(), IoError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_text(&dir.join("report.json"), &report.to_json())?;
    for s in &report.series {
        write_rows(
            &dir.join("series").join(format!("{}.csv", file_safe(&s.name))),
            [s.x_label.as_str(), s.y_label.as_str()],
            s.points.iter().map(|(x, y)| [float(*x), float(*y)]),
        )?;
    }
    for (name, state) in &report.states {
        write_state_csv(&dir.join("states").join(format!("{}.csv", file_safe(name))), state)?;
    }
    Ok(())
}

pub fn read_report(path: &Path) -> Result<ExperimentReport, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| format_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    write_text(path, &serde_json::to_string_pretty(value).expect("values serialize"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::solve;

    fn sample() -> FourierState {
        FourierState::from_fn(4, |n| Complex64::new(1.0 / 3.0 * n as f64, (n as f64).exp() * 1e-7)).with_time(0.25)
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let s = sample();
        write_state_csv(&path, &s).unwrap();
        let back = read_state_csv(&path, 0.25).unwrap();
        assert_eq!(back, s);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("n,re,im\n-4,"));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        write_state_json(&path, &sample()).unwrap();
        assert_eq!(read_state_json(&path).unwrap(), sample());
        assert_eq!(read_state(&path).unwrap(), sample());
    }

    #[test]
    fn malformed_csv_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "n,re,im\n0,1.0,x\n").unwrap();
        assert!(matches!(read_state_csv(&path, 0.0), Err(IoError::Format { .. })));
        fs::write(&path, "n,re,im\n1,1,0\n1,2,0\n").unwrap();
        assert!(read_state_csv(&path, 0.0).is_err());
        fs::write(&path, "a,b\n").unwrap();
        assert!(read_state_csv(&path, 0.0).is_err());
    }

    #[test]
    fn trajectory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ic = FourierState::from_fn(3, |n| Complex64::new(0.1 * n as f64, 0.05));
        let traj = solve(&ic, EquationSpec::new(Variant::Mkdv1, Sign::Minus), 0.02, 0.005).unwrap();
        let manifest = write_trajectory(dir.path(), &traj).unwrap();
        assert_eq!(manifest.slices.len(), 5);
        let back = read_trajectory(dir.path()).unwrap();
        assert_eq!(back.states(), traj.states());
        assert_eq!(back.equation(), traj.equation());
        assert_eq!(back.sample_dt(), traj.sample_dt());
    }
}

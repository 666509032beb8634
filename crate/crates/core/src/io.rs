//! File formats: initial-condition and result CSVs, JSON run configuration,
//! ephemeris and report files, and the benchmark table.
//!
//! Floats are written with 17 significant digits so that parsing them back
//! reproduces the same doubles.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augmentation::SampledTrajectory;
use crate::cheb::ErrorMode;
use crate::dynamics::{BodySpec, ForceModelConfig, ForceModelKind, StateVector, DEFAULT_PROXIMITY_FLOOR_KM};
use crate::propagator::{GroupReport, GroupingSpec, PropagationConfig, SegmentPolicy, StartMode};
use crate::runner::{BenchmarkReport, RunMode};

pub const BATCH_HEADER: [&str; 7] = ["epoch_s", "x_km", "y_km", "z_km", "vx_kms", "vy_kms", "vz_kms"];
pub const RESULTS_HEADER: [&str; 9] = [
    "trajectory_id",
    "node_index",
    "t_s",
    "x_km",
    "y_km",
    "z_km",
    "vx_kms",
    "vy_kms",
    "vz_kms",
];
pub const DISCREPANCY_COLUMN: &str = "oracle_discrepancy";
pub const BENCHMARK_HEADER: [&str; 7] = [
    "mode",
    "threads",
    "groups",
    "wall_time_s",
    "speedup",
    "max_iterations",
    "max_discrepancy",
];
pub const EPHEMERIS_FRAME: &str = "heliocentric-ecliptic-J2000";

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("row {row}: epoch {epoch} differs from the batch epoch {expected}; augmented runs need a shared epoch")]
    MixedEpoch { row: usize, epoch: f64, expected: f64 },
    #[error("{0}")]
    Format(String),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(field: &str, row: usize, column: &str) -> Result<f64, IoError> {
    let v: f64 = field.trim().parse().map_err(|_| IoError::Row {
        row,
        message: format!("column {column}: '{field}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(IoError::Row {
            row,
            message: format!("column {column}: value {field} is not finite"),
        });
    }
    Ok(v)
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<(), IoError> {
    let found: Vec<&str> = found.iter().map(str::trim).collect();
    if found.len() < expected.len() || found[..expected.len()] != *expected {
        return Err(IoError::Format(format!(
            "expected header '{}', found '{}'",
            expected.join(","),
            found.join(",")
        )));
    }
    Ok(())
}

pub fn open(path: &Path) -> Result<BufReader<File>, IoError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| IoError::File {
            path: path.to_owned(),
            source,
        })
}

pub fn create(path: &Path) -> Result<BufWriter<File>, IoError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| IoError::File {
            path: path.to_owned(),
            source,
        })
}

/// Reads initial conditions; rows are numbered from 1 after the header.
pub fn read_batch_csv<R: Read>(reader: R) -> Result<Vec<StateVector>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(rdr.headers()?, &BATCH_HEADER)?;
    let mut states = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| IoError::Row {
            row,
            message: e.to_string(),
        })?;
        if record.len() != BATCH_HEADER.len() {
            return Err(IoError::Row {
                row,
                message: format!("expected {} fields, found {}", BATCH_HEADER.len(), record.len()),
            });
        }
        let mut v = [0.0; 7];
        for (k, field) in record.iter().enumerate() {
            v[k] = parse_f64(field, row, BATCH_HEADER[k])?;
        }
        states.push(StateVector::new(v[0], [v[1], v[2], v[3]], [v[4], v[5], v[6]]));
    }
    if states.is_empty() {
        return Err(IoError::Format("no initial conditions found".into()));
    }
    Ok(states)
}

pub fn write_batch_csv<W: Write>(states: &[StateVector], writer: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(BATCH_HEADER)?;
    for s in states {
        let a = s.to_array();
        w.write_record(std::iter::once(s.epoch).chain(a).map(fmt_f64))?;
    }
    w.flush()?;
    Ok(())
}

/// First row (1-based) whose epoch differs from row 1.
pub fn require_shared_epoch(states: &[StateVector]) -> Result<(), IoError> {
    let Some(first) = states.first() else {
        return Ok(());
    };
    match states.iter().position(|s| s.epoch != first.epoch) {
        Some(i) => Err(IoError::MixedEpoch {
            row: i + 1,
            epoch: states[i].epoch,
            expected: first.epoch,
        }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    pub length: String,
    pub time: String,
    pub mu: String,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            length: "km".into(),
            time: "s".into(),
            mu: "km3/s2".into(),
        }
    }
}

/// Central body and perturbers; element angles are in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EphemerisFile {
    pub frame: String,
    #[serde(default)]
    pub units: Units,
    pub central_mu: f64,
    #[serde(default)]
    pub bodies: Vec<BodySpec>,
}

impl EphemerisFile {
    pub fn new(central_mu: f64, bodies: Vec<BodySpec>) -> Self {
        Self {
            frame: EPHEMERIS_FRAME.into(),
            units: Units::default(),
            central_mu,
            bodies,
        }
    }

    pub fn validate(&self) -> Result<(), IoError> {
        if self.frame != EPHEMERIS_FRAME {
            return Err(IoError::Format(format!(
                "unsupported frame '{}', expected '{EPHEMERIS_FRAME}'",
                self.frame
            )));
        }
        if self.units != Units::default() {
            return Err(IoError::Format(format!("unsupported units {:?}", self.units)));
        }
        for b in &self.bodies {
            b.validate().map_err(|e| IoError::Format(e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self, IoError> {
        let file: Self = serde_json::from_reader(reader)?;
        file.validate()?;
        Ok(file)
    }

    pub fn to_writer<W: Write>(&self, writer: W) -> Result<(), IoError> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputPaths {
    pub results: Option<String>,
    pub report: Option<String>,
    pub error_history: Option<String>,
    pub benchmark: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkSection {
    pub threads: Vec<usize>,
    pub modes: Vec<String>,
    pub repeat: usize,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        Self {
            threads: vec![1],
            modes: vec!["independent".into(), "augmented".into()],
            repeat: 5,
        }
    }
}

/// JSON run configuration. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfigFile {
    pub n_nodes: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub error_mode: ErrorMode,
    pub start_mode: StartMode,
    pub segment_policy: SegmentPolicy,
    /// Signed span in seconds; negative propagates backward.
    pub duration_s: Option<f64>,
    /// Signed span in osculating periods of the representative trajectory.
    pub duration_periods: Option<f64>,
    pub representative: usize,
    pub force_model: ForceModelKind,
    pub proximity_floor_km: f64,
    pub mode: RunMode,
    pub groups: Option<usize>,
    pub group_sizes: Option<Vec<usize>>,
    pub workers: Option<usize>,
    pub timeout_s: Option<f64>,
    pub outputs: OutputPaths,
    pub benchmark: BenchmarkSection,
}

impl Default for RunConfigFile {
    fn default() -> Self {
        Self {
            n_nodes: 200,
            tolerance: 1e-12,
            max_iterations: 100,
            error_mode: ErrorMode::Relative,
            start_mode: StartMode::Warm,
            segment_policy: SegmentPolicy::Single,
            duration_s: None,
            duration_periods: None,
            representative: 0,
            force_model: ForceModelKind::NBody,
            proximity_floor_km: DEFAULT_PROXIMITY_FLOOR_KM,
            mode: RunMode::Grouped,
            groups: None,
            group_sizes: None,
            workers: None,
            timeout_s: None,
            outputs: OutputPaths::default(),
            benchmark: BenchmarkSection::default(),
        }
    }
}

impl RunConfigFile {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, IoError> {
        Ok(serde_json::from_reader(reader)?)
    }

    pub fn to_writer<W: Write>(&self, writer: W) -> Result<(), IoError> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn force_model(&self, ephemeris: &EphemerisFile) -> ForceModelConfig {
        let mut fm = match self.force_model {
            ForceModelKind::TwoBody => ForceModelConfig::two_body(ephemeris.central_mu),
            ForceModelKind::NBody => ForceModelConfig::n_body(ephemeris.central_mu, ephemeris.bodies.clone()),
        };
        fm.proximity_floor = self.proximity_floor_km;
        fm
    }

    pub fn propagation_config(&self, ephemeris: &EphemerisFile) -> PropagationConfig {
        let mut cfg = PropagationConfig::new(self.force_model(ephemeris));
        cfg.n_nodes = self.n_nodes;
        cfg.tolerance = self.tolerance;
        cfg.max_iterations = self.max_iterations;
        cfg.error_mode = self.error_mode;
        cfg.start_mode = self.start_mode;
        cfg.segment_policy = self.segment_policy.clone();
        cfg.representative = self.representative;
        cfg.grouping = match (&self.group_sizes, self.groups) {
            (Some(sizes), _) => GroupingSpec::Sizes(sizes.clone()),
            (None, Some(p)) => GroupingSpec::Count(p),
            (None, None) => GroupingSpec::Count(1),
        };
        cfg
    }
}

/// Node samples of every trajectory, optionally followed by each trajectory's
/// maximum oracle discrepancy (repeated on its rows).
pub fn write_results_csv<W: Write>(
    trajectories: &[SampledTrajectory],
    discrepancy: Option<&[f64]>,
    writer: W,
) -> Result<(), IoError> {
    if let Some(d) = discrepancy {
        if d.len() != trajectories.len() {
            return Err(IoError::Format(format!(
                "{} discrepancies for {} trajectories",
                d.len(),
                trajectories.len()
            )));
        }
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = RESULTS_HEADER.to_vec();
    if discrepancy.is_some() {
        header.push(DISCREPANCY_COLUMN);
    }
    w.write_record(&header)?;
    for (id, traj) in trajectories.iter().enumerate() {
        for (j, &t) in traj.times.iter().enumerate() {
            let mut rec = vec![id.to_string(), j.to_string(), fmt_f64(t)];
            rec.extend(traj.states.row(j).iter().map(|&x| fmt_f64(x)));
            if let Some(d) = discrepancy {
                rec.push(fmt_f64(d[id]));
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub trajectories: Vec<SampledTrajectory>,
    pub discrepancy: Option<Vec<f64>>,
}

pub fn read_results_csv<R: Read>(reader: R) -> Result<ResultsTable, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    check_header(&headers, &RESULTS_HEADER)?;
    let with_disc = headers.len() == RESULTS_HEADER.len() + 1 && &headers[RESULTS_HEADER.len()] == DISCREPANCY_COLUMN;
    let mut rows: Vec<(Vec<f64>, Vec<[f64; 6]>, f64)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| IoError::Row {
            row,
            message: e.to_string(),
        })?;
        let parse_idx = |k: usize| -> Result<usize, IoError> {
            record[k].parse().map_err(|_| IoError::Row {
                row,
                message: format!("column {}: '{}' is not an index", RESULTS_HEADER[k], &record[k]),
            })
        };
        let (id, node) = (parse_idx(0)?, parse_idx(1)?);
        if id > rows.len() || (id == rows.len()) != (node == 0) || (id < rows.len() && node != rows[id].0.len()) {
            return Err(IoError::Row {
                row,
                message: format!("trajectory {id} node {node} is out of order"),
            });
        }
        if id == rows.len() {
            rows.push((Vec::new(), Vec::new(), 0.0));
        }
        let t = parse_f64(&record[2], row, RESULTS_HEADER[2])?;
        let mut s = [0.0; 6];
        for c in 0..6 {
            s[c] = parse_f64(&record[3 + c], row, RESULTS_HEADER[3 + c])?;
        }
        rows[id].0.push(t);
        rows[id].1.push(s);
        if with_disc {
            rows[id].2 = parse_f64(&record[RESULTS_HEADER.len()], row, DISCREPANCY_COLUMN)?;
        }
    }
    let discrepancy = with_disc.then(|| rows.iter().map(|r| r.2).collect());
    let trajectories = rows
        .into_iter()
        .map(|(times, states, _)| SampledTrajectory {
            states: ndarray::Array2::from_shape_fn((times.len(), 6), |(j, c)| states[j][c]),
            times,
        })
        .collect();
    Ok(ResultsTable {
        trajectories,
        discrepancy,
    })
}

/// `segment,group,iteration,error` rows for every group's convergence history.
pub fn write_error_history_csv<W: Write>(reports: &[GroupReport], writer: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["segment", "group", "iteration", "error"])?;
    for r in reports {
        for (k, e) in r.report.per_iteration_errors.iter().enumerate() {
            w.write_record([
                r.segment.to_string(),
                r.group.to_string(),
                (k + 1).to_string(),
                fmt_f64(*e),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub max_discrepancy: f64,
    pub per_trajectory: Vec<f64>,
}

/// JSON summary of one propagate run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: RunMode,
    pub workers: usize,
    pub groups: usize,
    pub group_sizes: Vec<usize>,
    pub n_trajectories: usize,
    pub n_nodes: usize,
    pub tolerance: f64,
    pub start_mode: StartMode,
    pub segment_boundaries: Vec<f64>,
    /// Absent when the run stopped early.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time_s: Option<f64>,
    pub max_iterations: usize,
    pub group_reports: Vec<GroupReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub oracle: Option<OracleSummary>,
}

impl RunReport {
    pub fn to_writer<W: Write>(&self, writer: W) -> Result<(), IoError> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self, IoError> {
        Ok(serde_json::from_reader(reader)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub mode: RunMode,
    pub threads: usize,
    pub groups: usize,
    pub wall_time_s: f64,
    pub speedup: f64,
    pub max_iterations: usize,
    pub max_discrepancy: f64,
}

pub fn benchmark_rows(report: &BenchmarkReport) -> Vec<BenchmarkRow> {
    report
        .entries
        .iter()
        .map(|e| BenchmarkRow {
            mode: e.mode,
            threads: e.threads,
            groups: e.groups,
            wall_time_s: e.wall_time_s,
            speedup: e.speedup,
            max_iterations: e.max_iterations,
            max_discrepancy: e.max_discrepancy,
        })
        .collect()
}

pub fn write_benchmark_csv<W: Write>(rows: &[BenchmarkRow], writer: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(BENCHMARK_HEADER)?;
    for r in rows {
        w.write_record([
            r.mode.to_string(),
            r.threads.to_string(),
            r.groups.to_string(),
            fmt_f64(r.wall_time_s),
            fmt_f64(r.speedup),
            r.max_iterations.to_string(),
            fmt_f64(r.max_discrepancy),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_benchmark_csv<R: Read>(reader: R) -> Result<Vec<BenchmarkRow>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(rdr.headers()?, &BENCHMARK_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize().enumerate() {
        out.push(rec.map_err(|e: csv::Error| IoError::Row {
            row: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_json<T: Serialize, W: Write>(value: &T, writer: W) -> Result<(), IoError> {
    serde_json::to_writer_pretty(writer, value)?;
    Ok(())
}

/// Fixed-width summary of a benchmark for the terminal.
pub fn benchmark_table(rows: &[BenchmarkRow]) -> String {
    let mut s = format!(
        "{:<22} {:>7} {:>7} {:>12} {:>8} {:>6} {:>12}\n",
        "mode", "threads", "groups", "wall_s", "speedup", "iters", "discrepancy"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<22} {:>7} {:>7} {:>12.6} {:>8.3} {:>6} {:>12.3e}\n",
            r.mode.as_str(),
            r.threads,
            r.groups,
            r.wall_time_s,
            r.speedup,
            r.max_iterations,
            r.max_discrepancy
        ));
    }
    s
}

//! Run records on disk: a CSV table, a TOML metadata summary and optional
//! `z,re,im` state snapshots.
//!
//! Numbers are written with Rust's shortest round-trip formatting, which is
//! locale-independent and parses back to the identical `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::filament::{FilamentState, ZGrid};

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub state: FilamentState,
}

/// Everything a scenario produces.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub config: ScenarioConfig,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub snapshots: Vec<Snapshot>,
    /// Scalar summary of the run.
    pub results: toml::Table,
    pub wall_clock_seconds: f64,
}

impl RunRecord {
    pub fn new(config: ScenarioConfig, columns: &[&str]) -> Self {
        Self {
            config,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            snapshots: Vec::new(),
            results: toml::Table::new(),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn set(&mut self, key: &str, value: impl Into<toml::Value>) {
        self.results.insert(key.to_string(), value.into());
    }

    pub fn result_f64(&self, key: &str) -> Option<f64> {
        match self.results.get(key)? {
            toml::Value::Float(v) => Some(*v),
            toml::Value::Integer(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub const SERIES_FILE: &str = "series.csv";
pub const METADATA_FILE: &str = "metadata.toml";

pub fn snapshot_file(step: usize) -> String {
    format!("snapshot_{step:08}.csv")
}

pub fn series_csv(columns: &[String], rows: &[Vec<f64>]) -> String {
    let mut out = columns.join(",");
    out.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            write!(out, "{v}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

pub fn snapshot_csv(state: &FilamentState) -> String {
    let mut out = String::from("z,re,im\n");
    for (j, c) in state.psi().iter().enumerate() {
        writeln!(out, "{},{},{}", state.grid().z(j), c.re, c.im).expect("writing to a String");
    }
    out
}

/// Parses a snapshot written by [`snapshot_csv`] onto `grid`. The `z` column
/// must match the grid nodes.
pub fn parse_snapshot(text: &str, grid: ZGrid) -> Result<FilamentState> {
    let bad = |line: usize, what: String| Error::invalid("snapshot", format!("line {line}: {what}"));
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "z,re,im" => {}
        other => return Err(bad(1, format!("expected header `z,re,im`, found {other:?}"))),
    }
    let mut psi = Vec::with_capacity(grid.points());
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let lineno = i + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(bad(lineno, format!("expected 3 fields, found {}", fields.len())));
        }
        let mut v = [0.0; 3];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f.trim().parse().map_err(|e| bad(lineno, format!("`{f}`: {e}")))?;
        }
        let j = psi.len();
        if j >= grid.points() {
            return Err(bad(lineno, format!("more rows than the {} grid points", grid.points())));
        }
        let expected = grid.z(j);
        if (v[0] - expected).abs() > 1e-12 * grid.length() {
            return Err(bad(lineno, format!("z = {} does not match grid node {expected}", v[0])));
        }
        psi.push(Complex64::new(v[1], v[2]));
    }
    if psi.len() != grid.points() {
        return Err(bad(
            psi.len() + 1,
            format!("found {} rows, grid has {}", psi.len(), grid.points()),
        ));
    }
    FilamentState::new(grid, psi, 0.0)
}

pub fn read_snapshot(path: &Path, grid: ZGrid) -> Result<FilamentState> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_snapshot(&text, grid)
}

/// The metadata document: tool version and timing, the scalar results and
/// the fully resolved configuration under `[config]`.
pub fn metadata_toml(record: &RunRecord) -> String {
    let mut run = toml::Table::new();
    run.insert("tool".into(), env!("CARGO_PKG_NAME").into());
    run.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    run.insert("scenario".into(), record.config.scenario.as_str().into());
    run.insert("rows".into(), (record.rows.len() as i64).into());
    run.insert(
        "columns".into(),
        toml::Value::Array(record.columns.iter().map(|c| c.as_str().into()).collect()),
    );
    run.insert(
        "snapshots".into(),
        toml::Value::Array(record.snapshots.iter().map(|s| snapshot_file(s.step).into()).collect()),
    );
    run.insert("wall_clock_seconds".into(), record.wall_clock_seconds.into());

    let config: toml::Table = toml::from_str(&record.config.to_toml()).expect("resolved config is valid TOML");
    let mut doc = toml::Table::new();
    doc.insert("run".into(), run.into());
    doc.insert("results".into(), record.results.clone().into());
    doc.insert("config".into(), config.into());
    toml::to_string(&doc).expect("metadata serializes to TOML")
}

#[derive(Clone, Debug, PartialEq)]
pub struct WrittenFiles {
    pub series: PathBuf,
    pub metadata: PathBuf,
    pub snapshots: Vec<PathBuf>,
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_outputs(record: &RunRecord, dir: &Path) -> Result<WrittenFiles> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let series = dir.join(SERIES_FILE);
    write_file(&series, &series_csv(&record.columns, &record.rows))?;
    let metadata = dir.join(METADATA_FILE);
    write_file(&metadata, &metadata_toml(record))?;
    let mut snapshots = Vec::with_capacity(record.snapshots.len());
    for snap in &record.snapshots {
        let path = dir.join(snapshot_file(snap.step));
        write_file(&path, &snapshot_csv(&snap.state))?;
        snapshots.push(path);
    }
    Ok(WrittenFiles {
        series,
        metadata,
        snapshots,
    })
}

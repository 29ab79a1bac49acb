//! Array files, run manifests, CSV tables and plot data.
//!
//! Array layout: a 64-byte little-endian header followed by the values as
//! little-endian `f64`, component after component, each in row-major order
//! with the position axes first. Values are stored centred (the sample at
//! `-L/2` first), so a file reads as a picture of the box without knowing
//! the FFT ordering.
//!
//! | offset | type     | field                          |
//! |--------|----------|--------------------------------|
//! | 0      | [u8; 8]  | magic `FFPEAR01`               |
//! | 8      | u32      | format version (1)             |
//! | 12     | u32      | d                              |
//! | 16     | u32      | points per position axis       |
//! | 20     | u32      | points per velocity axis       |
//! | 24     | f64      | position side length           |
//! | 32     | f64      | velocity side length           |
//! | 40     | f64      | time                           |
//! | 48     | u32      | provenance code                |
//! | 52     | u32      | number of components           |
//! | 56     | [u8; 8]  | zero padding                   |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PhaseField, TorusGrid};
use crate::trajectory::{Trajectory, VectorField};

pub const MAGIC: &[u8; 8] = b"FFPEAR01";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayHeader {
    pub grid: TorusGrid,
    pub time: f64,
    pub provenance: u32,
    pub components: u32,
}

/// Flat index permutation between FFT order and centred order.
fn centred_index(g: &TorusGrid, idx: usize) -> usize {
    let (ix, iv) = g.unflatten(idx);
    let mut out = 0;
    for c in 0..g.d {
        out = out * g.nx + (ix[c] + g.nx / 2) % g.nx;
    }
    for c in 0..g.d {
        out = out * g.nv + (iv[c] + g.nv / 2) % g.nv;
    }
    out
}

fn encode(header: &ArrayHeader, fields: &[&PhaseField]) -> Vec<u8> {
    let g = header.grid;
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * g.len() * fields.len());
    buf.extend_from_slice(MAGIC);
    for v in [FORMAT_VERSION, g.d as u32, g.nx as u32, g.nv as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in [g.lx, g.lv, header.time] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in [header.provenance, header.components] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.resize(HEADER_LEN, 0);
    let perm: Vec<usize> = (0..g.len()).map(|i| centred_index(&g, i)).collect();
    for f in fields {
        let mut centred = vec![0.0; g.len()];
        for (i, &p) in perm.iter().enumerate() {
            centred[p] = f.values[i];
        }
        for v in centred {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("four bytes"))
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().expect("eight bytes"))
}

pub fn decode(bytes: &[u8]) -> Result<(ArrayHeader, Vec<PhaseField>)> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(Error::Format("missing array header".into()));
    }
    let version = u32_at(bytes, 8);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported array format version {version}")));
    }
    let grid = TorusGrid::new(
        u32_at(bytes, 12) as usize,
        f64_at(bytes, 24),
        f64_at(bytes, 32),
        u32_at(bytes, 16) as usize,
        u32_at(bytes, 20) as usize,
    )?;
    let header = ArrayHeader { grid, time: f64_at(bytes, 40), provenance: u32_at(bytes, 48), components: u32_at(bytes, 52) };
    let n = grid.len();
    let expected = HEADER_LEN + 8 * n * header.components as usize;
    if bytes.len() != expected {
        return Err(Error::Format(format!("array body has {} bytes, header implies {expected}", bytes.len())));
    }
    let perm: Vec<usize> = (0..n).map(|i| centred_index(&grid, i)).collect();
    let fields = (0..header.components as usize)
        .map(|c| {
            let base = HEADER_LEN + 8 * n * c;
            let values = perm.iter().map(|&p| f64_at(bytes, base + 8 * p)).collect();
            PhaseField { grid, values }
        })
        .collect();
    Ok((header, fields))
}

pub fn write_field(path: &Path, field: &PhaseField, time: f64, provenance: u32) -> Result<()> {
    let header = ArrayHeader { grid: field.grid, time, provenance, components: 1 };
    write_bytes(path, &encode(&header, &[field]))
}

pub fn write_vector_field(path: &Path, field: &VectorField, time: f64, provenance: u32) -> Result<()> {
    let refs: Vec<&PhaseField> = field.components.iter().collect();
    let header = ArrayHeader { grid: field.grid(), time, provenance, components: refs.len() as u32 };
    write_bytes(path, &encode(&header, &refs))
}

pub fn read_array(path: &Path) -> Result<(ArrayHeader, Vec<PhaseField>)> {
    decode(&fs::read(path)?)
}

/// One file per sample time, named `<stem>_<k>.bin`; returns the names.
pub fn write_trajectory(dir: &Path, stem: &str, traj: &Trajectory) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let code = traj.provenance.code();
    traj.times()
        .iter()
        .zip(&traj.fields)
        .enumerate()
        .map(|(k, (&t, f))| {
            let name = format!("{stem}_{k:03}.bin");
            write_field(&dir.join(&name), f, t, code)?;
            Ok(name)
        })
        .collect()
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

/// Everything about a run that is allowed to differ between identical
/// reruns (wall-clock timings, start time) lives here and only here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub crate_version: String,
    pub started_unix: u64,
    pub config: serde_json::Value,
    pub files: Vec<String>,
    pub timings_s: Vec<(String, f64)>,
    pub all_passed: bool,
}

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        let started_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Manifest {
            command: command.into(),
            crate_version: env!("CARGO_PKG_VERSION").into(),
            started_unix,
            config,
            files: Vec::new(),
            timings_s: Vec::new(),
            all_passed: true,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_bytes(path, s.as_bytes())
}

/// Rows of a serializable record type, with a header line.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// A table with string cells, for reports whose columns vary by experiment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_bytes(path, &self.to_csv_bytes()?)
    }
}

/// Columns of `(t, value)` pairs for one named series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub name: String,
    pub log_log: bool,
    pub points: Vec<(f64, f64)>,
}

/// Writes `<name>.dat` files (whitespace separated) and a matplotlib script
/// that draws all of them; returns the written file names.
pub fn write_plot_data(dir: &Path, series: &[PlotSeries]) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    let mut script = String::from("import numpy as np\nimport matplotlib.pyplot as plt\n\n");
    for s in series {
        let file = format!("{}.dat", s.name);
        let mut body = String::from("# t value\n");
        for (t, v) in &s.points {
            body.push_str(&format!("{t:.17e} {v:.17e}\n"));
        }
        write_bytes(&dir.join(&file), body.as_bytes())?;
        let plot = if s.log_log { "loglog" } else { "plot" };
        script.push_str(&format!(
            "d = np.loadtxt('{file}', ndmin=2)\nplt.figure()\nplt.{plot}(d[:, 0], d[:, 1], 'o-')\nplt.title('{}')\nplt.savefig('{}.png')\n\n",
            s.name, s.name
        ));
        names.push(file);
    }
    write_bytes(&dir.join("plot.py"), script.as_bytes())?;
    names.push("plot.py".into());
    Ok(names)
}

/// Output directory: explicit value, else `$FFPE_OUTPUT_ROOT`, else `./ffpe-out`.
pub fn output_root(explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match std::env::var_os(OUTPUT_ROOT_VAR) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from("ffpe-out"),
    }
}

pub const OUTPUT_ROOT_VAR: &str = "FFPE_OUTPUT_ROOT";

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn array_round_trip_is_bit_exact() {
        let g = TorusGrid::new(1, 2.0 * PI, 6.0, 8, 16).unwrap();
        let f = PhaseField::from_fn(&g, |x, v| x[0].sin() + v[0] * 0.1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.bin");
        write_field(&path, &f, 0.25, 3).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 8 * g.len());
        let (h, back) = read_array(&path).unwrap();
        assert_eq!(h.time, 0.25);
        assert_eq!(h.provenance, 3);
        assert_eq!(back[0], f);
        // centred: first stored value is the corner (-L/2, -L/2)
        let first = f64_at(&bytes, HEADER_LEN);
        assert!((first - ((-PI).sin() - 0.3)).abs() < 1e-14);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        assert!(decode(b"short").is_err());
        let g = TorusGrid::new(1, 1.0, 1.0, 4, 4).unwrap();
        let f = PhaseField::zeros(&g);
        let mut bytes = encode(&ArrayHeader { grid: g, time: 0.0, provenance: 0, components: 1 }, &[&f]);
        bytes.pop();
        assert!(matches!(decode(&bytes), Err(Error::Format(_))));
    }
}

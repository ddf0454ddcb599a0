//! File formats: B-scan data plus JSON sidecar, synthetic ground truth,
//! extracted point sets and pipeline maps.
//!
//! A B-scan is stored as `<stem>.bin` (32-bit little-endian floats, row-major,
//! rows = samples) or `<stem>.csv` (one row of comma-separated values per
//! sample), with the sidecar at `<stem>.json`.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bscan::{BScanGrid, Extraction, ExtractionFlag};
use crate::geometry::Point;
use crate::pipemap::PipeMap;
use crate::synth::{GroundTruth, PipeScene};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing sidecar {0}")]
    MissingSidecar(PathBuf),
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

fn format_err(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    fs::write(path, bytes).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| format_err(path, e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| format_err(path, e.to_string()))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub traces: usize,
    pub samples: usize,
    pub trace_spacing_m: f64,
    pub sample_interval_ns: f64,
    pub relative_permittivity: f64,
    /// Ground-truth file, relative to the sidecar's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<String>,
}

pub fn sidecar_path(data: &Path) -> PathBuf {
    data.with_extension("json")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Binary,
    Csv,
}

impl DataFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => DataFormat::Csv,
            _ => DataFormat::Binary,
        }
    }
}

pub fn read_sidecar(data: &Path) -> Result<Sidecar, IoError> {
    let side = sidecar_path(data);
    if !side.exists() {
        return Err(IoError::MissingSidecar(side));
    }
    read_json(&side)
}

pub fn read_bscan(data: &Path) -> Result<(BScanGrid, Sidecar), IoError> {
    let sidecar = read_sidecar(data)?;
    let (rows, cols) = (sidecar.samples, sidecar.traces);
    let bytes = read_bytes(data)?;
    let values: Vec<f32> = match DataFormat::from_path(data) {
        DataFormat::Binary => {
            if bytes.len() != rows * cols * 4 {
                return Err(format_err(
                    data,
                    format!(
                        "expected {} bytes for {rows}x{cols} f32 samples, found {}",
                        rows * cols * 4,
                        bytes.len()
                    ),
                ));
            }
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect()
        }
        DataFormat::Csv => parse_csv(data, &bytes, rows, cols)?,
    };
    let amplitudes = Array2::from_shape_vec((rows, cols), values)
        .map_err(|e| format_err(data, e.to_string()))?;
    let grid = BScanGrid::new(
        amplitudes,
        sidecar.trace_spacing_m,
        sidecar.sample_interval_ns,
        sidecar.relative_permittivity,
    )
    .map_err(|e| format_err(&sidecar_path(data), e.to_string()))?;
    Ok((grid, sidecar))
}

fn parse_csv(path: &Path, bytes: &[u8], rows: usize, cols: usize) -> Result<Vec<f32>, IoError> {
    let text = std::str::from_utf8(bytes).map_err(|e| format_err(path, e.to_string()))?;
    let mut values = Vec::with_capacity(rows * cols);
    let mut n_rows = 0;
    for (i, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let before = values.len();
        for field in line.split(',') {
            let v: f32 = field.trim().parse().map_err(|_| {
                format_err(
                    path,
                    format!("line {}: bad number {:?}", i + 1, field.trim()),
                )
            })?;
            values.push(v);
        }
        if values.len() - before != cols {
            return Err(format_err(
                path,
                format!(
                    "line {}: expected {cols} values, found {}",
                    i + 1,
                    values.len() - before
                ),
            ));
        }
        n_rows += 1;
    }
    if n_rows != rows {
        return Err(format_err(
            path,
            format!("expected {rows} rows, found {n_rows}"),
        ));
    }
    Ok(values)
}

/// Writes the grid to `data` (format chosen by extension) and its sidecar.
pub fn write_bscan(
    data: &Path,
    grid: &BScanGrid,
    ground_truth: Option<&str>,
) -> Result<Sidecar, IoError> {
    let amps = grid.amplitudes();
    match DataFormat::from_path(data) {
        DataFormat::Binary => {
            let mut bytes = Vec::with_capacity(amps.len() * 4);
            for v in amps.iter() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            write_bytes(data, &bytes)?;
        }
        DataFormat::Csv => {
            let mut text = String::new();
            for row in amps.rows() {
                let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                text.push_str(&line.join(","));
                text.push('\n');
            }
            write_bytes(data, text.as_bytes())?;
        }
    }
    let sidecar = Sidecar {
        traces: grid.cols(),
        samples: grid.rows(),
        trace_spacing_m: grid.trace_spacing(),
        sample_interval_ns: grid.sample_interval_ns(),
        relative_permittivity: grid.relative_permittivity(),
        ground_truth: ground_truth.map(str::to_string),
    };
    write_json(&sidecar_path(data), &sidecar)?;
    Ok(sidecar)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub scene: PipeScene,
    pub signature: Vec<Point>,
    /// One byte (0 or 1) per pixel, row-major; relative to this file's directory.
    pub mask_file: String,
}

/// Writes `<dir>/<stem>.json` and the mask `<dir>/<stem>_mask.bin`.
pub fn write_ground_truth(dir: &Path, stem: &str, truth: &GroundTruth) -> Result<PathBuf, IoError> {
    let mask_name = format!("{stem}_mask.bin");
    let mask: Vec<u8> = truth.mask.iter().map(|&m| m as u8).collect();
    write_bytes(&dir.join(&mask_name), &mask)?;
    let file = GroundTruthFile {
        scene: *truth.scene(),
        signature: truth.signature().to_vec(),
        mask_file: mask_name,
    };
    let path = dir.join(format!("{stem}.json"));
    write_json(&path, &file)?;
    Ok(path)
}

pub fn read_ground_truth(
    path: &Path,
    shape: (usize, usize),
) -> Result<(GroundTruthFile, Array2<bool>), IoError> {
    let file: GroundTruthFile = read_json(path)?;
    let mask_path = path
        .parent()
        .unwrap_or(Path::new("."))
        .join(&file.mask_file);
    let bytes = read_bytes(&mask_path)?;
    if bytes.len() != shape.0 * shape.1 {
        return Err(format_err(
            &mask_path,
            format!(
                "expected {} mask bytes, found {}",
                shape.0 * shape.1,
                bytes.len()
            ),
        ));
    }
    let mask = Array2::from_shape_vec(shape, bytes.into_iter().map(|b| b != 0).collect())
        .map_err(|e| format_err(&mask_path, e.to_string()))?;
    Ok((file, mask))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSetFile {
    pub points: Vec<Point>,
    #[serde(default)]
    pub apex_x_m: Option<f64>,
    #[serde(default)]
    pub flags: Vec<ExtractionFlag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actual_spacing_m: Option<f64>,
}

impl From<&Extraction> for PointSetFile {
    fn from(e: &Extraction) -> Self {
        Self {
            points: e.point_set.points().to_vec(),
            apex_x_m: Some(e.apex_x),
            flags: e.flags.clone(),
            actual_spacing_m: Some(e.actual_spacing),
        }
    }
}

pub fn read_point_set(path: &Path) -> Result<PointSetFile, IoError> {
    read_json(path)
}

pub fn read_map(path: &Path) -> Result<PipeMap, IoError> {
    let map: PipeMap = read_json(path)?;
    map.validate()
        .map_err(|e| format_err(path, e.to_string()))?;
    Ok(map)
}

/// Refuses to overwrite `source`, so revision never happens in place.
pub fn write_revised_map(path: &Path, source: &Path, map: &PipeMap) -> Result<(), IoError> {
    let same = match (fs::canonicalize(path), fs::canonicalize(source)) {
        (Ok(a), Ok(b)) => a == b,
        _ => path == source,
    };
    if same {
        return Err(format_err(
            path,
            "revised map must not overwrite the input map",
        ));
    }
    write_json(path, map)
}

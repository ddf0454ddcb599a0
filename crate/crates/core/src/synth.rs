//! Forward simulator for the signature of a buried pipe crossed at an angle.
//!
//! A cylinder of radius `r` cut by the vertical scan plane at obliquity `α`
//! has an elliptical cross section with vertical semi-axis `r` and horizontal
//! semi-axis `r / sin α`. The depth recorded below each antenna position is
//! the shortest distance from that position to the cross section.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bscan::{BScanError, BScanGrid};
use crate::geometry::{project_point, Ellipse, Point};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("scene out of grid: {0}")]
    SceneOutOfGrid(String),
    #[error(transparent)]
    Grid(#[from] BScanError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipeScene {
    pub radius: f64,
    pub depth_to_center: f64,
    /// Obliquity between pipe axis and scan line, radians in (0, π/2].
    pub alpha: f64,
    /// Scan coordinate directly above the pipe.
    pub apex_x: f64,
    pub scan_length: f64,
    pub noise_salt_fraction: f64,
    pub signature_thickness: usize,
}

impl PipeScene {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidScene(m));
        if !(self.radius > 0.0) {
            return bad(format!("radius must be positive, got {}", self.radius));
        }
        if !(self.depth_to_center > self.radius) {
            return bad(format!(
                "pipe must lie below the surface (depth {} <= radius {})",
                self.depth_to_center, self.radius
            ));
        }
        if !(self.alpha > 0.0 && self.alpha <= std::f64::consts::FRAC_PI_2) {
            return bad(format!(
                "obliquity must be in (0, 90] degrees, got {}",
                self.alpha.to_degrees()
            ));
        }
        if !(self.scan_length > 0.0) || !self.apex_x.is_finite() {
            return bad("scan length must be positive and apex finite".into());
        }
        if !(0.0..=1.0).contains(&self.noise_salt_fraction) {
            return bad(format!(
                "salt fraction must be in [0, 1], got {}",
                self.noise_salt_fraction
            ));
        }
        if self.signature_thickness == 0 {
            return bad("signature thickness must be at least one sample".into());
        }
        Ok(())
    }
}

pub fn cross_section_of(scene: &PipeScene) -> Ellipse {
    Ellipse {
        center_x: scene.apex_x,
        center_y: scene.depth_to_center,
        a: scene.radius / scene.alpha.sin(),
        b: scene.radius,
    }
}

/// Depth of the signature recorded at scan position `x`.
pub fn signature_depth(scene: &PipeScene, x: f64) -> f64 {
    signature_depth_for(&cross_section_of(scene), x)
}

fn signature_depth_for(e: &Ellipse, x: f64) -> f64 {
    project_point(e, Point::new(x, 0.0))
        .expect("surface points lie outside a buried cross section")
        .distance
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    pub trace_spacing: f64,
    pub sample_interval_ns: f64,
    pub relative_permittivity: f64,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub scenes: Vec<PipeScene>,
    /// Analytic `(x, d(x))` at every trace, per scene.
    pub signatures: Vec<Vec<Point>>,
    /// Foreground before noise.
    pub mask: Array2<bool>,
}

impl GroundTruth {
    pub fn scene(&self) -> &PipeScene {
        &self.scenes[0]
    }

    pub fn signature(&self) -> &[Point] {
        &self.signatures[0]
    }
}

pub fn render(
    scene: &PipeScene,
    params: &GridParams,
    seed: u64,
) -> Result<(BScanGrid, GroundTruth), SynthError> {
    render_scenes(std::slice::from_ref(scene), params, seed)
}

/// Renders several pipes into one grid. Salt noise uses the largest fraction
/// and thickness of the first scene.
pub fn render_scenes(
    scenes: &[PipeScene],
    params: &GridParams,
    seed: u64,
) -> Result<(BScanGrid, GroundTruth), SynthError> {
    let Some(first) = scenes.first() else {
        return Err(SynthError::InvalidScene("no scenes to render".into()));
    };
    let (rows, cols) = (params.rows, params.cols);
    // Validates the acquisition parameters before any work.
    let probe = BScanGrid::new(
        Array2::zeros((2, 2)),
        params.trace_spacing,
        params.sample_interval_ns,
        params.relative_permittivity,
    )?;
    let mut mask = Array2::from_elem((rows, cols), false);
    let mut signatures = Vec::with_capacity(scenes.len());
    for scene in scenes {
        scene.validate()?;
        let apex_row = probe.row_at_depth(scene.depth_to_center - scene.radius);
        let max_x = probe.trace_x(cols.saturating_sub(1));
        if apex_row.round() as usize + scene.signature_thickness > rows {
            return Err(SynthError::SceneOutOfGrid(format!(
                "apex at row {apex_row:.1} does not fit in {rows} rows"
            )));
        }
        if scene.apex_x < 0.0 || scene.apex_x > max_x {
            return Err(SynthError::SceneOutOfGrid(format!(
                "apex x = {} outside the scan [0, {max_x}]",
                scene.apex_x
            )));
        }
        let e = cross_section_of(scene);
        let half = (scene.signature_thickness as f64 - 1.0) / 2.0;
        let mut signature = Vec::with_capacity(cols);
        for c in 0..cols {
            let x = probe.trace_x(c);
            let d = signature_depth_for(&e, x);
            signature.push(Point::new(x, d));
            let top = (probe.row_at_depth(d) - half).round();
            if top < 0.0 {
                continue;
            }
            let top = top as usize;
            for r in top..(top + scene.signature_thickness).min(rows) {
                mask[(r, c)] = true;
            }
        }
        signatures.push(signature);
    }

    let mut amplitudes = mask.mapv(|v| if v { 1.0f32 } else { 0.0 });
    let fraction = first.noise_salt_fraction;
    if fraction > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let count = (fraction * (rows * cols) as f64).round() as usize;
        for _ in 0..count {
            let r = rng.gen_range(0..rows);
            let c = rng.gen_range(0..cols);
            amplitudes[(r, c)] = 1.0;
        }
    }
    let grid = BScanGrid::new(
        amplitudes,
        params.trace_spacing,
        params.sample_interval_ns,
        params.relative_permittivity,
    )?;
    Ok((
        grid,
        GroundTruth {
            scenes: scenes.to_vec(),
            signatures,
            mask,
        },
    ))
}

/// Smallest grid (rows, cols) holding the scan and the signature down to the
/// deepest trace, with `margin_rows` spare rows below.
pub fn grid_extent(
    scene: &PipeScene,
    trace_spacing: f64,
    depth_per_sample: f64,
    margin_rows: usize,
) -> (usize, usize) {
    let cols = (scene.scan_length / trace_spacing).round() as usize + 1;
    let e = cross_section_of(scene);
    let deepest = (0..cols)
        .map(|c| signature_depth_for(&e, c as f64 * trace_spacing))
        .fold(0.0, f64::max);
    let rows =
        (deepest / depth_per_sample).ceil() as usize + scene.signature_thickness + margin_rows;
    (rows, cols)
}

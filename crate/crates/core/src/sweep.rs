//! Parameter sweeps over synthetic scenes comparing EIIA with the hyperbola
//! baseline on the same extracted points.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bscan::{
    extract_point_set, find_downward_opening_clusters, preprocess, Extraction,
    SPEED_OF_LIGHT_M_PER_NS,
};
use crate::eiia::{run_eiia, PipeEstimate, StopReason};
use crate::fitting::fit_hyperbola_baseline;
use crate::pipeline::RunConfig;
use crate::synth::{grid_extent, render, GridParams, PipeScene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub alphas_deg: Vec<f64>,
    pub radii_m: Vec<f64>,
    pub depths_m: Vec<f64>,
    pub noise_fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    pub trace_spacing_m: f64,
    /// Depth covered by one time sample; sets the sample interval.
    pub depth_per_sample_m: f64,
    pub relative_permittivity: f64,
    pub signature_thickness: usize,
    pub config: RunConfig,
}

impl Default for SweepSpec {
    fn default() -> Self {
        let mut config = RunConfig::default();
        // At 0.1 mm per sample the flanks break into separate per-trace bands
        // of `signature_thickness` pixels, which a larger speck area would erase.
        config.preprocess.min_component_area = 3;
        config.extraction.spacing = 0.10;
        Self {
            alphas_deg: vec![45.0, 60.0, 75.0],
            radii_m: vec![0.2, 0.3, 0.4],
            depths_m: vec![1.0, 1.5, 2.0],
            noise_fractions: vec![0.0],
            seeds: vec![1],
            trace_spacing_m: 0.01,
            depth_per_sample_m: 1e-4,
            relative_permittivity: 9.0,
            signature_thickness: 3,
            config,
        }
    }
}

impl SweepSpec {
    pub fn sample_interval_ns(&self) -> f64 {
        2.0 * self.depth_per_sample_m * self.relative_permittivity.sqrt() / SPEED_OF_LIGHT_M_PER_NS
    }

    /// Cases in a fixed order: alpha, radius, depth, noise, seed.
    pub fn cases(&self) -> Vec<SweepCase> {
        let mut out = Vec::new();
        for &alpha_deg in &self.alphas_deg {
            for &radius_m in &self.radii_m {
                for &depth_m in &self.depths_m {
                    for &noise_fraction in &self.noise_fractions {
                        for &seed in &self.seeds {
                            out.push(SweepCase {
                                alpha_deg,
                                radius_m,
                                depth_m,
                                noise_fraction,
                                seed,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCase {
    pub alpha_deg: f64,
    pub radius_m: f64,
    pub depth_m: f64,
    pub noise_fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub case: SweepCase,
    pub eiia_alpha_deg: f64,
    pub eiia_radius_m: f64,
    pub hyperbola_radius_m: f64,
    /// Relative errors.
    pub eiia_radius_err: f64,
    pub hyperbola_radius_err: f64,
    /// Absolute, degrees.
    pub alpha_err: f64,
    pub iterations: usize,
    pub geometric_rms_m: f64,
    pub stop_reason: Option<StopReason>,
    /// "ok" or what went wrong.
    pub status: String,
}

impl SweepRow {
    fn failed(case: SweepCase, status: String) -> Self {
        Self {
            case,
            eiia_alpha_deg: f64::NAN,
            eiia_radius_m: f64::NAN,
            hyperbola_radius_m: f64::NAN,
            eiia_radius_err: f64::NAN,
            hyperbola_radius_err: f64::NAN,
            alpha_err: f64::NAN,
            iterations: 0,
            geometric_rms_m: f64::NAN,
            stop_reason: None,
            status,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

pub fn scene_for(spec: &SweepSpec, case: &SweepCase) -> PipeScene {
    let scan_length = spec.config.extraction.spacing * (spec.config.extraction.count + 4) as f64;
    PipeScene {
        radius: case.radius_m,
        depth_to_center: case.depth_m,
        alpha: case.alpha_deg.to_radians(),
        apex_x: scan_length / 2.0,
        scan_length,
        noise_salt_fraction: case.noise_fraction,
        signature_thickness: spec.signature_thickness,
    }
}

pub fn run_case(spec: &SweepSpec, case: &SweepCase) -> SweepRow {
    evaluate_case(spec, case).row
}

/// A sweep row together with the full EIIA estimate behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseOutcome {
    pub row: SweepRow,
    pub estimate: Option<PipeEstimate>,
    pub extraction: Option<Extraction>,
}

impl CaseOutcome {
    fn failed(case: SweepCase, status: String) -> Self {
        Self {
            row: SweepRow::failed(case, status),
            estimate: None,
            extraction: None,
        }
    }
}

pub fn evaluate_case(spec: &SweepSpec, case: &SweepCase) -> CaseOutcome {
    let scene = scene_for(spec, case);
    let (rows, cols) = grid_extent(&scene, spec.trace_spacing_m, spec.depth_per_sample_m, 8);
    let params = GridParams {
        trace_spacing: spec.trace_spacing_m,
        sample_interval_ns: spec.sample_interval_ns(),
        relative_permittivity: spec.relative_permittivity,
        rows,
        cols,
    };
    let grid = match render(&scene, &params, case.seed) {
        Ok((g, _)) => g,
        Err(e) => return CaseOutcome::failed(*case, format!("synth: {e}")),
    };
    let cfg = &spec.config;
    let img = preprocess(
        &grid,
        cfg.preprocess.threshold_k,
        cfg.preprocess.min_component_area,
    );
    let clusters = find_downward_opening_clusters(
        &img,
        cfg.cluster.min_width,
        cfg.cluster.tolerance,
        cfg.cluster.row_gap_for(&grid),
    );
    // The cluster whose apex is closest to the true pipe position.
    let Some(cluster) = clusters.iter().min_by(|a, b| {
        let da = (grid.trace_x(a.apex_column()) - scene.apex_x).abs();
        let db = (grid.trace_x(b.apex_column()) - scene.apex_x).abs();
        da.total_cmp(&db)
    }) else {
        return CaseOutcome::failed(*case, "no_cluster".into());
    };
    let extraction =
        match extract_point_set(cluster, &grid, cfg.extraction.spacing, cfg.extraction.count) {
            Ok(e) => e,
            Err(e) => return CaseOutcome::failed(*case, format!("extract: {e}")),
        };
    let est = match run_eiia(&extraction.point_set, &cfg.eiia) {
        Ok(e) => e,
        Err(e) => return CaseOutcome::failed(*case, format!("eiia: {e}")),
    };
    let hyper = fit_hyperbola_baseline(extraction.point_set.points());
    let hyperbola_radius_m = hyper.as_ref().map_or(f64::NAN, |h| h.radius);
    let status = match &hyper {
        Ok(_) => "ok".to_string(),
        Err(e) => format!("hyperbola: {e}"),
    };
    let eiia_alpha_deg = est.alpha_degrees();
    let row = SweepRow {
        case: *case,
        eiia_alpha_deg,
        eiia_radius_m: est.radius,
        hyperbola_radius_m,
        eiia_radius_err: (est.radius - case.radius_m).abs() / case.radius_m,
        hyperbola_radius_err: (hyperbola_radius_m - case.radius_m).abs() / case.radius_m,
        alpha_err: (eiia_alpha_deg - case.alpha_deg).abs(),
        iterations: est.iterations_used,
        geometric_rms_m: est.best_record().geometric_rms,
        stop_reason: Some(est.stop_reason),
        status,
    };
    CaseOutcome {
        row,
        estimate: Some(est),
        extraction: Some(extraction),
    }
}

/// Runs every case in parallel; rows come back in case order.
pub fn run_sweep(spec: &SweepSpec) -> Vec<SweepRow> {
    spec.cases().par_iter().map(|c| run_case(spec, c)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub cases: usize,
    pub failed: usize,
    pub mean_eiia_radius_err: f64,
    pub mean_hyperbola_radius_err: f64,
    pub mean_alpha_err: f64,
    pub max_eiia_radius_err: f64,
    pub max_alpha_err: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Statistics over the rows that completed.
pub fn summarize(rows: &[SweepRow]) -> SweepSummary {
    let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.is_ok()).collect();
    let max = |f: fn(&SweepRow) -> f64| ok.iter().map(|r| f(r)).fold(f64::NAN, f64::max);
    SweepSummary {
        cases: rows.len(),
        failed: rows.len() - ok.len(),
        mean_eiia_radius_err: mean(ok.iter().map(|r| r.eiia_radius_err)),
        mean_hyperbola_radius_err: mean(ok.iter().map(|r| r.hyperbola_radius_err)),
        mean_alpha_err: mean(ok.iter().map(|r| r.alpha_err)),
        max_eiia_radius_err: max(|r| r.eiia_radius_err),
        max_alpha_err: max(|r| r.alpha_err),
    }
}

pub const CSV_HEADER: [&str; 15] = [
    "alpha_deg",
    "radius_m",
    "depth_m",
    "noise_fraction",
    "seed",
    "eiia_radius_err",
    "hyperbola_radius_err",
    "alpha_err",
    "iterations",
    "eiia_alpha_deg",
    "eiia_radius_m",
    "hyperbola_radius_m",
    "geometric_rms_m",
    "stop_reason",
    "status",
];

pub fn write_csv<W: Write>(w: W, rows: &[SweepRow]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in rows {
        let c = &r.case;
        let stop = r.stop_reason.map_or(String::new(), |s| {
            serde_json::to_value(s)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default()
        });
        out.write_record([
            c.alpha_deg.to_string(),
            c.radius_m.to_string(),
            c.depth_m.to_string(),
            c.noise_fraction.to_string(),
            c.seed.to_string(),
            r.eiia_radius_err.to_string(),
            r.hyperbola_radius_err.to_string(),
            r.alpha_err.to_string(),
            r.iterations.to_string(),
            r.eiia_alpha_deg.to_string(),
            r.eiia_radius_m.to_string(),
            r.hyperbola_radius_m.to_string(),
            r.geometric_rms_m.to_string(),
            stop,
            r.status.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

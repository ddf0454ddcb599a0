#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Command implementations behind the `pipeinvert` binary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use pipeinvert_core::bscan::{
    extract_point_set, find_downward_opening_clusters, preprocess, SPEED_OF_LIGHT_M_PER_NS,
};
use pipeinvert_core::eiia::{disambiguate_bearing, run_eiia};
use pipeinvert_core::io::{self, PointSetFile, Sidecar};
use pipeinvert_core::pipeline::{choose_bearings, run_pipeline, ClusterResult, RunConfig};
use pipeinvert_core::pipemap::{revise_to_bearing, SurveyLine};
use pipeinvert_core::sweep::{run_sweep, summarize, write_csv, SweepSpec, SweepSummary};
use pipeinvert_core::synth::{grid_extent, render, GridParams};
use pipeinvert_core::{PipeEstimate, PipeScene, Point, SignaturePointSet};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_NO_DETECTION: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "pipeinvert",
    version,
    about = "Buried pipe direction and radius from GPR B-scans"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic B-scan with ground truth
    Synth(SynthArgs),
    /// Extract the signature point set of one cluster
    Extract(ExtractArgs),
    /// Invert a point set to the pipe cross section
    Invert(InvertArgs),
    /// Full pipeline on a B-scan, optionally checked against a map
    Run(RunArgs),
    /// Write a revised pipeline map
    ReviseMap(ReviseArgs),
    /// Compare EIIA with the hyperbola baseline over a synthetic sweep
    Bench(BenchArgs),
}

/// Runs one parsed command and returns the process exit code.
pub fn execute(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a).map(|_| EXIT_OK),
        Command::Extract(a) => cmd_extract(&a),
        Command::Invert(a) => cmd_invert(&a).map(|_| EXIT_OK),
        Command::Run(a) => cmd_run(&a).map(|r| {
            if r.no_cluster() {
                EXIT_NO_DETECTION
            } else {
                EXIT_OK
            }
        }),
        Command::ReviseMap(a) => cmd_revise_map(&a).map(|_| EXIT_OK),
        Command::Bench(a) => cmd_bench(&a).map(|_| EXIT_OK),
    }
}

fn obliquity_deg(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v <= 90.0 {
        Ok(v)
    } else {
        Err(format!("obliquity must be in (0, 90] degrees, got {v}"))
    }
}

fn bearing_deg(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..360.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("bearing must be in [0, 360) degrees, got {v}"))
    }
}

fn write_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridFormat {
    Bin,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub radius: f64,
    /// Depth to the pipe center, meters
    #[arg(long)]
    pub depth: f64,
    /// Angle between pipe and scan line, degrees in (0, 90]
    #[arg(long, value_parser = obliquity_deg)]
    pub alpha_deg: f64,
    #[arg(long, default_value_t = 4.0)]
    pub scan_length: f64,
    /// Scan position above the pipe; defaults to mid-scan
    #[arg(long)]
    pub apex_x: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 3)]
    pub thickness: usize,
    #[arg(long, default_value_t = 0.01)]
    pub trace_spacing: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sample_interval_ns: f64,
    #[arg(long, default_value_t = 9.0)]
    pub permittivity: f64,
    /// Grid rows; defaults to just below the deepest trace
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = GridFormat::Bin)]
    pub format: GridFormat,
    #[arg(short, long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthOutput {
    pub bscan: PathBuf,
    pub sidecar: Sidecar,
    pub ground_truth: PathBuf,
}

pub fn cmd_synth(a: &SynthArgs) -> Result<SynthOutput> {
    let scene = PipeScene {
        radius: a.radius,
        depth_to_center: a.depth,
        alpha: a.alpha_deg.to_radians(),
        apex_x: a.apex_x.unwrap_or(a.scan_length / 2.0),
        scan_length: a.scan_length,
        noise_salt_fraction: a.noise,
        signature_thickness: a.thickness,
    };
    scene.validate()?;
    if !(a.trace_spacing > 0.0 && a.sample_interval_ns > 0.0 && a.permittivity >= 1.0) {
        bail!("trace spacing and sample interval must be positive and permittivity at least 1");
    }
    let depth_per_sample =
        SPEED_OF_LIGHT_M_PER_NS / a.permittivity.sqrt() * a.sample_interval_ns / 2.0;
    let (rows, cols) = grid_extent(&scene, a.trace_spacing, depth_per_sample, 8);
    let params = GridParams {
        trace_spacing: a.trace_spacing,
        sample_interval_ns: a.sample_interval_ns,
        relative_permittivity: a.permittivity,
        rows: a.rows.unwrap_or(rows),
        cols,
    };
    let (grid, truth) = render(&scene, &params, a.seed)?;
    std::fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("creating {}", a.out_dir.display()))?;
    let truth_path = io::write_ground_truth(&a.out_dir, "truth", &truth)?;
    let ext = match a.format {
        GridFormat::Bin => "bin",
        GridFormat::Csv => "csv",
    };
    let bscan = a.out_dir.join(format!("bscan.{ext}"));
    let sidecar = io::write_bscan(&bscan, &grid, Some("truth.json"))?;
    log::info!(
        "wrote {} ({} x {})",
        bscan.display(),
        grid.rows(),
        grid.cols()
    );
    Ok(SynthOutput {
        bscan,
        sidecar,
        ground_truth: truth_path,
    })
}

/// Pipeline settings; each flag overrides the config file, which overrides
/// the built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON run configuration, or a run report whose `config` is reused
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub threshold_k: Option<f64>,
    #[arg(long)]
    pub min_area: Option<usize>,
    #[arg(long)]
    pub min_width: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<usize>,
    #[arg(long)]
    pub max_row_gap: Option<usize>,
    /// Ground distance between extracted points, meters
    #[arg(long)]
    pub spacing: Option<f64>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub rms_threshold: Option<f64>,
    #[arg(long)]
    pub stability_epsilon: Option<f64>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.threshold_k {
            cfg.preprocess.threshold_k = v;
        }
        if let Some(v) = self.min_area {
            cfg.preprocess.min_component_area = v;
        }
        if let Some(v) = self.min_width {
            cfg.cluster.min_width = v;
        }
        if let Some(v) = self.tolerance {
            cfg.cluster.tolerance = v;
        }
        if let Some(v) = self.max_row_gap {
            cfg.cluster.max_row_gap = Some(v);
        }
        if let Some(v) = self.spacing {
            cfg.extraction.spacing = v;
        }
        if let Some(v) = self.count {
            cfg.extraction.count = v;
        }
        if let Some(v) = self.max_iterations {
            cfg.eiia.max_iterations = v;
        }
        if let Some(v) = self.rms_threshold {
            cfg.eiia.geometric_rms_threshold = v;
        }
        if let Some(v) = self.stability_epsilon {
            cfg.eiia.stability_epsilon = v;
        }
        if !(cfg.extraction.spacing > 0.0) {
            bail!("extraction spacing must be positive");
        }
        cfg.eiia.validate()?;
        Ok(cfg)
    }
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let cfg = match value.get("config") {
        Some(inner) => serde_json::from_value(inner.clone()),
        None => serde_json::from_value(value),
    };
    cfg.with_context(|| format!("invalid configuration in {}", path.display()))
}

#[derive(Debug, Clone, Args)]
pub struct ExtractArgs {
    pub bscan: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Which cluster, in order of apex depth
    #[arg(long, default_value_t = 0)]
    pub cluster: usize,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_extract(a: &ExtractArgs) -> Result<u8> {
    let cfg = a.config.resolve()?;
    let (grid, _) = io::read_bscan(&a.bscan)?;
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
    if clusters.is_empty() {
        eprintln!("no_cluster: no downward-opening signature found");
        return Ok(EXIT_NO_DETECTION);
    }
    let cluster = clusters.get(a.cluster).ok_or_else(|| {
        anyhow!(
            "cluster {} requested but only {} found",
            a.cluster,
            clusters.len()
        )
    })?;
    let ex = extract_point_set(cluster, &grid, cfg.extraction.spacing, cfg.extraction.count)?;
    write_text(a.out.as_deref(), &to_json(&PointSetFile::from(&ex))?)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Args)]
pub struct InvertArgs {
    /// Point set JSON as written by `extract`
    pub points: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Scan direction, degrees; with --map-bearing picks one of the two lines
    #[arg(long, value_parser = bearing_deg, requires = "map_bearing")]
    pub detecting_bearing: Option<f64>,
    #[arg(long, requires = "detecting_bearing")]
    pub map_bearing: Option<f64>,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertReport {
    pub points_file: PathBuf,
    pub config: pipeinvert_core::EiiaConfig,
    pub alpha_deg: f64,
    pub estimate: PipeEstimate,
}

pub fn cmd_invert(a: &InvertArgs) -> Result<InvertReport> {
    let cfg = a.config.resolve()?;
    let file = io::read_point_set(&a.points)?;
    let set = SignaturePointSet::new(file.points)?;
    let mut estimate = run_eiia(&set, &cfg.eiia)?;
    if let (Some(scan), Some(mapped)) = (a.detecting_bearing, a.map_bearing) {
        let c = disambiguate_bearing(scan, estimate.alpha, mapped);
        estimate.candidate_bearings = Some(c.candidates);
        estimate.chosen_bearing = Some(c.chosen);
        estimate.bearing_tie = c.tie;
    }
    let report = InvertReport {
        points_file: a.points.clone(),
        config: cfg.eiia,
        alpha_deg: estimate.alpha_degrees(),
        estimate,
    };
    write_text(a.out.as_deref(), &to_json(&report)?)?;
    Ok(report)
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    pub bscan: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Pipeline map used to choose between the two candidate bearings
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Plan position of the detection, meters east
    #[arg(long, requires_all = ["survey_y", "detecting_bearing"])]
    pub survey_x: Option<f64>,
    /// Plan position of the detection, meters north
    #[arg(long, requires = "survey_x")]
    pub survey_y: Option<f64>,
    /// Scan direction, degrees clockwise from north
    #[arg(long, value_parser = bearing_deg, requires = "survey_x")]
    pub detecting_bearing: Option<f64>,
    /// Also write the map revised from the first estimate here
    #[arg(long, requires = "map")]
    pub revise_out: Option<PathBuf>,
    /// Include wall-clock timings (makes the report non-reproducible)
    #[arg(long)]
    pub timings: bool,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInputs {
    pub bscan: PathBuf,
    pub map: Option<PathBuf>,
    pub survey: Option<SurveyLine>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub load_ms: f64,
    pub pipeline_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub inputs: RunInputs,
    pub grid: Sidecar,
    pub config: RunConfig,
    /// Row gap actually used for cluster linking.
    pub resolved_max_row_gap: usize,
    pub clusters: Vec<ClusterResult>,
    pub flags: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub revised_map: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

impl RunReport {
    pub fn no_cluster(&self) -> bool {
        self.flags.iter().any(|f| f == "no_cluster")
    }
}

pub fn cmd_run(a: &RunArgs) -> Result<RunReport> {
    let cfg = a.config.resolve()?;
    let t0 = Instant::now();
    let (grid, sidecar) = io::read_bscan(&a.bscan)?;
    let map = a.map.as_deref().map(io::read_map).transpose()?;
    let survey = match (a.survey_x, a.survey_y, a.detecting_bearing) {
        (Some(x), Some(y), Some(b)) => Some(SurveyLine {
            position: Point::new(x, y),
            detecting_bearing: b,
        }),
        _ => None,
    };
    if map.is_some() && survey.is_none() {
        bail!("--map needs --survey-x, --survey-y and --detecting-bearing");
    }
    let load_ms = t0.elapsed().as_secs_f64() * 1e3;

    let t1 = Instant::now();
    let mut out = run_pipeline(&grid, &cfg);
    let mut flags = Vec::new();
    if out.no_cluster() {
        flags.push("no_cluster".to_string());
    }
    if out.clusters.iter().any(|c| c.estimate.is_none()) {
        flags.push("cluster_failed".to_string());
    }
    if let (Some(map), Some(survey)) = (&map, &survey) {
        choose_bearings(&mut out, map, survey)?;
        if out
            .clusters
            .iter()
            .any(|c| c.estimate.as_ref().is_some_and(|e| e.bearing_tie))
        {
            flags.push("bearing_tie".to_string());
        }
    }
    let pipeline_ms = t1.elapsed().as_secs_f64() * 1e3;

    let mut revised_map = None;
    if let (Some(path), Some(map), Some(survey)) = (&a.revise_out, &map, &survey) {
        match out.clusters.iter().find(|c| c.estimate.is_some()) {
            Some(c) => {
                let est = c.estimate.as_ref().expect("filtered");
                let id = c.map_segment.as_deref().expect("set with the bearing");
                let bearing = est.chosen_bearing.expect("set with the segment");
                let revised = revise_to_bearing(map, id, bearing, est.radius, survey.position)?;
                io::write_revised_map(path, a.map.as_deref().expect("map given"), &revised)?;
                revised_map = Some(path.clone());
            }
            None => flags.push("not_revised".to_string()),
        }
    }

    let report = RunReport {
        inputs: RunInputs {
            bscan: a.bscan.clone(),
            map: a.map.clone(),
            survey,
        },
        grid: sidecar,
        resolved_max_row_gap: cfg.cluster.row_gap_for(&grid),
        config: cfg,
        clusters: out.clusters,
        flags,
        revised_map,
        timings: a.timings.then_some(Timings {
            load_ms,
            pipeline_ms,
        }),
    };
    write_text(a.out.as_deref(), &to_json(&report)?)?;
    Ok(report)
}

#[derive(Debug, Clone, Args)]
pub struct ReviseArgs {
    #[arg(long)]
    pub map: PathBuf,
    /// Take segment, bearing, radius and survey position from a run report
    #[arg(long, conflicts_with_all = ["segment", "bearing", "radius"])]
    pub report: Option<PathBuf>,
    #[arg(long, requires_all = ["bearing", "radius", "survey_x", "survey_y"])]
    pub segment: Option<String>,
    /// New pipe bearing, degrees clockwise from north
    #[arg(long)]
    pub bearing: Option<f64>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub survey_x: Option<f64>,
    #[arg(long)]
    pub survey_y: Option<f64>,
    /// Output map; must differ from the input
    #[arg(short, long)]
    pub out: PathBuf,
}

pub fn cmd_revise_map(a: &ReviseArgs) -> Result<()> {
    let map = io::read_map(&a.map)?;
    let (id, bearing, radius, position) = if let Some(path) = &a.report {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let report: RunReport =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let survey = report
            .inputs
            .survey
            .ok_or_else(|| anyhow!("report has no survey position"))?;
        let c = report
            .clusters
            .iter()
            .find(|c| {
                c.estimate
                    .as_ref()
                    .is_some_and(|e| e.chosen_bearing.is_some())
            })
            .ok_or_else(|| anyhow!("report has no estimate with a chosen bearing"))?;
        let est = c.estimate.as_ref().expect("filtered");
        let id = c
            .map_segment
            .clone()
            .ok_or_else(|| anyhow!("report has no map segment"))?;
        (
            id,
            est.chosen_bearing.expect("filtered"),
            est.radius,
            survey.position,
        )
    } else {
        match (&a.segment, a.bearing, a.radius, a.survey_x, a.survey_y) {
            (Some(id), Some(b), Some(r), Some(x), Some(y)) => (id.clone(), b, r, Point::new(x, y)),
            _ => bail!(
                "give either --report or --segment, --bearing, --radius, --survey-x and --survey-y"
            ),
        }
    };
    if !(radius > 0.0) {
        bail!("radius must be positive, got {radius}");
    }
    let revised = revise_to_bearing(&map, &id, bearing, radius, position)?;
    io::write_revised_map(&a.out, &a.map, &revised)?;
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Sweep specification JSON; defaults to the built-in sweep
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Comma-separated seeds, overriding the spec
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Salt-noise fractions, overriding the spec
    #[arg(long, value_delimiter = ',')]
    pub noise: Option<Vec<f64>>,
    /// CSV output; stdout when absent
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_bench(a: &BenchArgs) -> Result<SweepSummary> {
    let mut spec = match &a.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<SweepSpec>(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => SweepSpec::default(),
    };
    if let Some(seeds) = &a.seeds {
        spec.seeds = seeds.clone();
    }
    if let Some(noise) = &a.noise {
        spec.noise_fractions = noise.clone();
    }
    let rows = run_sweep(&spec);
    let mut buf = Vec::new();
    write_csv(&mut buf, &rows)?;
    match &a.out {
        Some(p) => std::fs::write(p, &buf).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{}", String::from_utf8(buf)?),
    }
    let summary = summarize(&rows);
    eprintln!(
        "cases {} (failed {}): mean radius error EIIA {:.2}% hyperbola {:.2}%, mean alpha error {:.3} deg",
        summary.cases,
        summary.failed,
        100.0 * summary.mean_eiia_radius_err,
        100.0 * summary.mean_hyperbola_radius_err,
        summary.mean_alpha_err
    );
    Ok(summary)
}

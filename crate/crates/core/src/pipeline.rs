//! End-to-end processing of one B-scan: preprocess, cluster, extract, invert,
//! and optionally pick a bearing against a pipeline map.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bscan::{
    extract_point_set, find_downward_opening_clusters, preprocess, BScanGrid, ClusterConfig,
    ExtractionConfig, ExtractionFlag, PreprocessConfig,
};
use crate::eiia::{disambiguate_bearing, run_eiia, EiiaConfig, PipeEstimate};
use crate::geometry::Point;
use crate::pipemap::{map_bearing_near, MapError, PipeMap, SurveyLine};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub preprocess: PreprocessConfig,
    pub cluster: ClusterConfig,
    pub extraction: ExtractionConfig,
    pub eiia: EiiaConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub apex_column: usize,
    pub apex_x_m: f64,
    pub width: usize,
    pub points: Vec<Point>,
    pub actual_spacing_m: f64,
    pub extraction_flags: Vec<ExtractionFlag>,
    pub estimate: Option<PipeEstimate>,
    /// Why extraction or inversion failed for this cluster.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map_segment: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub clusters: Vec<ClusterResult>,
    pub foreground_pixels: usize,
}

impl PipelineOutput {
    pub fn no_cluster(&self) -> bool {
        self.clusters.is_empty()
    }
}

pub fn run_pipeline(grid: &BScanGrid, cfg: &RunConfig) -> PipelineOutput {
    let img = preprocess(
        grid,
        cfg.preprocess.threshold_k,
        cfg.preprocess.min_component_area,
    );
    let clusters = find_downward_opening_clusters(
        &img,
        cfg.cluster.min_width,
        cfg.cluster.tolerance,
        cfg.cluster.row_gap_for(grid),
    );
    log::info!(
        "{} foreground pixels, {} clusters",
        img.count(),
        clusters.len()
    );
    let results = clusters
        .par_iter()
        .map(|cluster| {
            let mut result = ClusterResult {
                apex_column: cluster.apex_column(),
                apex_x_m: grid.trace_x(cluster.apex_column()),
                width: cluster.width(),
                points: Vec::new(),
                actual_spacing_m: 0.0,
                extraction_flags: Vec::new(),
                estimate: None,
                error: None,
                map_segment: None,
            };
            let extraction = match extract_point_set(
                cluster,
                grid,
                cfg.extraction.spacing,
                cfg.extraction.count,
            ) {
                Ok(e) => e,
                Err(e) => {
                    result.error = Some(e.to_string());
                    return result;
                }
            };
            result.points = extraction.point_set.points().to_vec();
            result.actual_spacing_m = extraction.actual_spacing;
            result.extraction_flags = extraction.flags.clone();
            match run_eiia(&extraction.point_set, &cfg.eiia) {
                Ok(est) => result.estimate = Some(est),
                Err(e) => result.error = Some(e.to_string()),
            }
            result
        })
        .collect();
    PipelineOutput {
        clusters: results,
        foreground_pixels: img.count(),
    }
}

/// Fills in candidate and chosen bearings using the map segment nearest the
/// survey position.
pub fn choose_bearings(
    out: &mut PipelineOutput,
    map: &PipeMap,
    survey: &SurveyLine,
) -> Result<(), MapError> {
    let nearest = map_bearing_near(map, survey.position)?;
    for c in &mut out.clusters {
        if let Some(est) = c.estimate.as_mut() {
            let choice = disambiguate_bearing(survey.detecting_bearing, est.alpha, nearest.bearing);
            est.candidate_bearings = Some(choice.candidates);
            est.chosen_bearing = Some(choice.chosen);
            est.bearing_tie = choice.tie;
            c.map_segment = Some(nearest.id.clone());
        }
    }
    Ok(())
}

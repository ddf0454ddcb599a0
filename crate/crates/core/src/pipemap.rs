//! Pipeline map segments and their revision from a single detection.
//!
//! Plan coordinates are a local Cartesian frame in meters with `x` east and
//! `y` north. Bearings are compass degrees (north = 0°, clockwise) reduced to
//! undirected lines in [0, 180).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eiia::{line_angle_between, undirected, PipeEstimate};
use crate::geometry::Point;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("unknown segment {0:?}")]
    UnknownSegment(String),
    #[error("map is empty")]
    EmptyMap,
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("estimate has no chosen bearing; disambiguate against the map first")]
    MissingBearing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub id: String,
    pub start: Point,
    pub end: Point,
    #[serde(rename = "radius_m")]
    pub radius: Option<f64>,
}

impl Segment {
    pub fn length(&self) -> f64 {
        self.start.distance(self.end)
    }

    pub fn bearing(&self) -> f64 {
        bearing_of(self.start, self.end)
    }

    /// Closest point on the segment and its fractional position from `start`.
    pub fn closest_point(&self, p: Point) -> (Point, f64) {
        let (dx, dy) = (self.end.x - self.start.x, self.end.y - self.start.y);
        let len2 = dx * dx + dy * dy;
        let t = (((p.x - self.start.x) * dx + (p.y - self.start.y) * dy) / len2).clamp(0.0, 1.0);
        (Point::new(self.start.x + t * dx, self.start.y + t * dy), t)
    }
}

/// Undirected compass bearing of the line through two plan points.
pub fn bearing_of(from: Point, to: Point) -> f64 {
    undirected((to.x - from.x).atan2(to.y - from.y).to_degrees())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipeMap {
    pub segments: Vec<Segment>,
}

impl PipeMap {
    pub fn new(segments: Vec<Segment>) -> Result<Self, MapError> {
        let map = Self { segments };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<(), MapError> {
        let mut ids = std::collections::HashSet::new();
        for s in &self.segments {
            if !ids.insert(s.id.as_str()) {
                return Err(MapError::InvalidMap(format!(
                    "duplicate segment id {:?}",
                    s.id
                )));
            }
            if s.start == s.end {
                return Err(MapError::InvalidMap(format!(
                    "segment {:?} has coincident endpoints",
                    s.id
                )));
            }
        }
        Ok(())
    }

    pub fn segment(&self, id: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurveyLine {
    pub position: Point,
    /// Scan direction, compass degrees in [0, 360).
    pub detecting_bearing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearestSegment {
    pub id: String,
    pub bearing: f64,
    pub distance: f64,
    pub tie: bool,
}

/// Segment closest to `position`; equidistant segments resolve to the
/// smallest id.
pub fn map_bearing_near(map: &PipeMap, position: Point) -> Result<NearestSegment, MapError> {
    let mut best: Option<NearestSegment> = None;
    for s in &map.segments {
        let distance = s.closest_point(position).0.distance(position);
        let candidate = NearestSegment {
            id: s.id.clone(),
            bearing: s.bearing(),
            distance,
            tie: false,
        };
        best = Some(match best {
            None => candidate,
            Some(cur) => {
                let tol = 1e-12 * (1.0 + cur.distance.max(distance));
                if (distance - cur.distance).abs() <= tol {
                    let tie = true;
                    if candidate.id < cur.id {
                        NearestSegment { tie, ..candidate }
                    } else {
                        NearestSegment { tie, ..cur }
                    }
                } else if distance < cur.distance {
                    candidate
                } else {
                    cur
                }
            }
        });
    }
    best.ok_or(MapError::EmptyMap)
}

/// Bearings this close (degrees) count as unchanged, which keeps revision
/// idempotent.
const SAME_BEARING_DEG: f64 = 1e-9;

/// Returns a new map with segment `segment_id` re-oriented to the estimate's
/// chosen bearing, pivoting about the point of the segment nearest to the
/// survey position and keeping its length.
pub fn revise(
    map: &PipeMap,
    segment_id: &str,
    estimate: &PipeEstimate,
    survey: &SurveyLine,
) -> Result<PipeMap, MapError> {
    let bearing = estimate.chosen_bearing.ok_or(MapError::MissingBearing)?;
    revise_to_bearing(map, segment_id, bearing, estimate.radius, survey.position)
}

pub fn revise_to_bearing(
    map: &PipeMap,
    segment_id: &str,
    bearing: f64,
    radius: f64,
    survey_position: Point,
) -> Result<PipeMap, MapError> {
    let idx = map
        .segments
        .iter()
        .position(|s| s.id == segment_id)
        .ok_or_else(|| MapError::UnknownSegment(segment_id.to_string()))?;
    let mut revised = map.clone();
    let seg = &mut revised.segments[idx];
    seg.radius = Some(radius);

    if line_angle_between(seg.bearing(), bearing) <= SAME_BEARING_DEG {
        return Ok(revised);
    }
    // Smallest clockwise rotation taking the current line onto the new one.
    let mut delta = undirected(bearing) - seg.bearing();
    if delta > 90.0 {
        delta -= 180.0;
    } else if delta <= -90.0 {
        delta += 180.0;
    }
    let (pivot, _) = seg.closest_point(survey_position);
    let (sin, cos) = delta.to_radians().sin_cos();
    let rotate = |p: Point| {
        let (dx, dy) = (p.x - pivot.x, p.y - pivot.y);
        Point::new(pivot.x + dx * cos + dy * sin, pivot.y - dx * sin + dy * cos)
    };
    seg.start = rotate(seg.start);
    seg.end = rotate(seg.end);
    Ok(revised)
}

//! Ellipse iterative inversion.
//!
//! A downward-opening signature records, below every antenna position
//! `(x_i, 0)`, the shortest distance `y_i` to the pipe. Each point is really
//! displaced from the pipe boundary by a rotation about its pivot. The
//! inversion alternates an ellipse fit with re-rotating every point toward
//! the shortest-distance direction of the latest fit, until the rotated points
//! settle onto a common ellipse.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fitting::{fit_ellipse, geometric_rms, FitError, MIN_ELLIPSE_POINTS};
use crate::geometry::{project_point, rotate_signature_point, Ellipse, GeometryError, Point};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EiiaError {
    #[error("invalid signature point set: {0}")]
    InvalidPoints(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Extracted signature points plus the cumulative rotation of each one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignaturePointSet {
    points: Vec<Point>,
    cumulative_angles: Vec<f64>,
}

impl SignaturePointSet {
    pub fn new(points: Vec<Point>) -> Result<Self, EiiaError> {
        let n = points.len();
        Self::with_angles(points, vec![0.0; n])
    }

    pub fn with_angles(points: Vec<Point>, cumulative_angles: Vec<f64>) -> Result<Self, EiiaError> {
        if points.len() != cumulative_angles.len() {
            return Err(EiiaError::InvalidPoints(
                "one angle per point required".into(),
            ));
        }
        if let Some(p) = points.iter().find(|p| !(p.y > 0.0) || !p.x.is_finite()) {
            return Err(EiiaError::InvalidPoints(format!(
                "depth must be positive, got ({}, {})",
                p.x, p.y
            )));
        }
        if points.windows(2).any(|w| !(w[1].x > w[0].x)) {
            return Err(EiiaError::InvalidPoints(
                "x must be strictly increasing".into(),
            ));
        }
        if let Some(t) = cumulative_angles.iter().find(|t| !(t.abs() < FRAC_PI_2)) {
            return Err(EiiaError::InvalidPoints(format!(
                "angle {t} out of (-π/2, π/2)"
            )));
        }
        Ok(Self {
            points,
            cumulative_angles,
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn cumulative_angles(&self) -> &[f64] {
        &self.cumulative_angles
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Current positions: each original point rotated about its pivot.
    pub fn rotated(&self) -> Vec<Point> {
        self.points
            .iter()
            .zip(&self.cumulative_angles)
            .map(|(p, &t)| rotate_signature_point(p.x, p.y, t).expect("angles validated"))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EiiaConfig {
    pub max_iterations: usize,
    /// Stop once the inverted points sit this close (RMS, meters) to the fit.
    pub geometric_rms_threshold: f64,
    /// Stop once the RMS changes by less than this between iterations.
    pub stability_epsilon: f64,
}

impl Default for EiiaConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10,
            geometric_rms_threshold: 1e-5,
            stability_epsilon: 1e-6,
        }
    }
}

impl EiiaConfig {
    pub fn validate(&self) -> Result<(), EiiaError> {
        if self.max_iterations < 1 {
            return Err(EiiaError::InvalidConfig(
                "max_iterations must be >= 1".into(),
            ));
        }
        if !(self.geometric_rms_threshold > 0.0) || !(self.stability_epsilon > 0.0) {
            return Err(EiiaError::InvalidConfig(
                "thresholds must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One fit-and-rotate step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Sum of squared algebraic distances of the fit on this iteration's input.
    pub algebraic_residual: f64,
    /// RMS distance from the re-rotated points to the ellipse that rotated them.
    pub geometric_rms: f64,
    pub ellipse: Ellipse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIterations,
    Threshold,
    Stable,
    /// A pivot fell inside the latest fit, so no rotation could be computed.
    PivotInsideFit,
    /// A later fit failed; earlier iterates are kept.
    FitFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipeEstimate {
    pub ellipse: Ellipse,
    /// Angle between pipe and scan direction, radians in (0, π/2].
    pub alpha: f64,
    pub radius: f64,
    /// Set when `a < b` forced `alpha` to π/2.
    pub alpha_clamped: bool,
    /// Two possible bearings (degrees in [0, 180)), once a scan bearing is known.
    pub candidate_bearings: Option<[f64; 2]>,
    pub chosen_bearing: Option<f64>,
    pub bearing_tie: bool,
    pub iterations_used: usize,
    pub best_iteration: usize,
    pub stop_reason: StopReason,
    pub residual_history: Vec<IterationRecord>,
    /// Points after the rotation computed from the returned ellipse.
    pub inverted_points: Vec<Point>,
    /// Cumulative angle of each point for the returned ellipse.
    pub angles: Vec<f64>,
}

impl PipeEstimate {
    pub fn alpha_degrees(&self) -> f64 {
        self.alpha.to_degrees()
    }

    pub fn best_record(&self) -> &IterationRecord {
        &self.residual_history[self.best_iteration]
    }
}

/// Runs the inversion. The first fit acts on the points as given (rotated by
/// their stored cumulative angles, normally zero).
pub fn run_eiia(pts: &SignaturePointSet, cfg: &EiiaConfig) -> Result<PipeEstimate, EiiaError> {
    cfg.validate()?;
    if pts.len() < MIN_ELLIPSE_POINTS {
        return Err(EiiaError::InvalidPoints(format!(
            "need at least {MIN_ELLIPSE_POINTS} points, got {}",
            pts.len()
        )));
    }
    let originals = pts.points();
    let mut current = pts.rotated();
    let mut history: Vec<IterationRecord> = Vec::with_capacity(cfg.max_iterations);
    let mut states: Vec<(Vec<Point>, Vec<f64>)> = Vec::with_capacity(cfg.max_iterations);
    let mut stop_reason = StopReason::MaxIterations;

    for k in 0..cfg.max_iterations {
        let fit = match fit_ellipse(&current) {
            Ok(f) => f,
            Err(e) if history.is_empty() => return Err(e.into()),
            Err(e) => {
                log::warn!("stopping after {k} iterations: {e}");
                stop_reason = StopReason::FitFailed;
                break;
            }
        };
        let angles = match shortest_distance_angles(&fit.ellipse, originals) {
            Ok(a) => a,
            Err(pivot) if history.is_empty() => {
                return Err(GeometryError::PointInsideEllipse {
                    x: pivot.x,
                    y: pivot.y,
                }
                .into())
            }
            Err(pivot) => {
                log::warn!(
                    "pivot at x = {} inside the fit at iteration {}; keeping earlier iterates",
                    pivot.x,
                    k + 1
                );
                stop_reason = StopReason::PivotInsideFit;
                break;
            }
        };
        let rotated: Vec<Point> = originals
            .iter()
            .zip(&angles)
            .map(|(p, &t)| rotate_signature_point(p.x, p.y, t))
            .collect::<Result<_, _>>()?;
        let rms = geometric_rms(&fit.ellipse, &rotated);
        if let Some(prev) = history.last() {
            if rms > prev.geometric_rms {
                log::debug!(
                    "residual rose at iteration {}: {:.3e} -> {:.3e}",
                    k + 1,
                    prev.geometric_rms,
                    rms
                );
            }
        }
        history.push(IterationRecord {
            algebraic_residual: fit.algebraic_residual,
            geometric_rms: rms,
            ellipse: fit.ellipse,
        });
        states.push((rotated.clone(), angles));

        if rms <= cfg.geometric_rms_threshold {
            stop_reason = StopReason::Threshold;
            break;
        }
        if k > 0 && (rms - history[k - 1].geometric_rms).abs() < cfg.stability_epsilon {
            stop_reason = StopReason::Stable;
            break;
        }
        current = rotated;
    }

    let best_iteration = history
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.geometric_rms.total_cmp(&b.1.geometric_rms))
        .map(|(i, _)| i)
        .expect("at least one iteration");
    let best = history[best_iteration];
    let (inverted_points, angles) = states.swap_remove(best_iteration);
    let derived = derive_angle_and_radius(&best.ellipse);
    Ok(PipeEstimate {
        ellipse: best.ellipse,
        alpha: derived.alpha,
        radius: derived.radius,
        alpha_clamped: derived.clamped,
        candidate_bearings: None,
        chosen_bearing: None,
        bearing_tie: false,
        iterations_used: history.len(),
        best_iteration,
        stop_reason,
        residual_history: history,
        inverted_points,
        angles,
    })
}

/// Angle from the vertical of the shortest path from each pivot to `e`.
/// Fails with the offending pivot if it is inside `e` or the path points upward.
fn shortest_distance_angles(e: &Ellipse, originals: &[Point]) -> Result<Vec<f64>, Point> {
    originals
        .iter()
        .map(|p| {
            let pivot = Point::new(p.x, 0.0);
            project_point(e, pivot)
                .ok()
                .map(|r| r.angle_from_vertical)
                .filter(|t| t.abs() < FRAC_PI_2)
                .ok_or(pivot)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleRadius {
    pub alpha: f64,
    pub radius: f64,
    pub clamped: bool,
}

/// Obliquity `arcsin(b/a)` and radius `b`; `a < b` clamps to π/2.
pub fn derive_angle_and_radius(e: &Ellipse) -> AngleRadius {
    if e.a >= e.b {
        AngleRadius {
            alpha: (e.b / e.a).asin(),
            radius: e.b,
            clamped: false,
        }
    } else {
        AngleRadius {
            alpha: FRAC_PI_2,
            radius: e.b,
            clamped: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BearingChoice {
    pub chosen: f64,
    pub candidates: [f64; 2],
    pub tie: bool,
}

/// Reduces a bearing in degrees to an undirected line bearing in [0, 180).
pub fn undirected(deg: f64) -> f64 {
    let r = deg.rem_euclid(180.0);
    if r >= 180.0 {
        0.0
    } else {
        r
    }
}

/// Smallest angle in degrees between two undirected lines, in [0, 90].
pub fn line_angle_between(a: f64, b: f64) -> f64 {
    let d = (undirected(a) - undirected(b)).abs();
    d.min(180.0 - d)
}

/// Picks, of the two lines at ±alpha from the scan direction, the one closer
/// to the mapped pipe bearing.
pub fn disambiguate_bearing(detecting_bearing: f64, alpha: f64, map_bearing: f64) -> BearingChoice {
    let alpha_deg = alpha.to_degrees();
    let candidates = [
        undirected(detecting_bearing + alpha_deg),
        undirected(detecting_bearing - alpha_deg),
    ];
    let d0 = line_angle_between(candidates[0], map_bearing);
    let d1 = line_angle_between(candidates[1], map_bearing);
    let tie = (d0 - d1).abs() <= 1e-9;
    let chosen = if tie || d0 < d1 {
        candidates[0]
    } else {
        candidates[1]
    };
    BearingChoice {
        chosen,
        candidates,
        tie,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::project_point;

    /// Forward model oracle: depth below each pivot is the shortest distance
    /// to the cross section.
    fn forward(e: &Ellipse, xs: impl Iterator<Item = f64>) -> Vec<Point> {
        xs.map(|x| Point::new(x, project_point(e, Point::new(x, 0.0)).unwrap().distance))
            .collect()
    }

    fn aperture(n: i32, spacing: f64) -> impl Iterator<Item = f64> {
        (0..n).map(move |i| (i - n / 2) as f64 * spacing)
    }

    #[test]
    fn recovers_oblique_cross_section() {
        let truth = Ellipse::new(0.0, 1.5, 0.6, 0.3).unwrap();
        let pts = SignaturePointSet::new(forward(&truth, aperture(30, 0.02))).unwrap();
        let est = run_eiia(&pts, &EiiaConfig::default()).unwrap();
        assert!(est.iterations_used <= 10);
        assert!(
            (est.ellipse.a / 0.6 - 1.0).abs() < 0.02,
            "{:?}",
            est.ellipse
        );
        assert!(
            (est.ellipse.b / 0.3 - 1.0).abs() < 0.02,
            "{:?}",
            est.ellipse
        );
    }

    #[test]
    fn recovers_circular_cross_section() {
        let truth = Ellipse::new(0.0, 1.5, 0.3, 0.3).unwrap();
        let pts = SignaturePointSet::new(forward(&truth, aperture(30, 0.02))).unwrap();
        let est = run_eiia(&pts, &EiiaConfig::default()).unwrap();
        let ratio = est.ellipse.a / est.ellipse.b;
        assert!((0.97..=1.03).contains(&ratio), "a/b = {ratio}");
    }

    #[test]
    fn consistent_angles_are_a_fixed_point() {
        let truth = Ellipse::new(0.1, 1.2, 0.5, 0.25).unwrap();
        let signature = forward(&truth, aperture(30, 0.03));
        let angles: Vec<f64> = signature
            .iter()
            .map(|p| {
                project_point(&truth, Point::new(p.x, 0.0))
                    .unwrap()
                    .angle_from_vertical
            })
            .collect();
        let pts = SignaturePointSet::with_angles(signature, angles).unwrap();
        let cfg = EiiaConfig {
            max_iterations: 2,
            geometric_rms_threshold: 1e-300,
            stability_epsilon: 1e-300,
        };
        let est = run_eiia(&pts, &cfg).unwrap();
        let h = &est.residual_history;
        assert_eq!(h.len(), 2);
        assert!(h[1].geometric_rms <= h[0].geometric_rms + 1e-12);
        assert!(h[0].geometric_rms < 1e-9);
    }

    #[test]
    fn pivots_are_preserved_and_best_iterate_returned() {
        let truth = Ellipse::new(0.0, 1.0, 0.4, 0.2).unwrap();
        let signature = forward(&truth, aperture(30, 0.05));
        let pts = SignaturePointSet::new(signature.clone()).unwrap();
        let est = run_eiia(&pts, &EiiaConfig::default()).unwrap();
        for (orig, rotated) in signature.iter().zip(&est.inverted_points) {
            let r = (rotated.x - orig.x).hypot(rotated.y);
            assert!((r - orig.y).abs() <= 1e-12);
        }
        let min = est
            .residual_history
            .iter()
            .map(|r| r.geometric_rms)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(est.best_record().geometric_rms, min);
        assert_eq!(est.ellipse, est.best_record().ellipse);
    }

    #[test]
    fn terminates_within_budget() {
        let truth = Ellipse::new(0.0, 2.0, 0.8, 0.2).unwrap();
        let pts = SignaturePointSet::new(forward(&truth, aperture(30, 0.02))).unwrap();
        for k in 1..=4 {
            let cfg = EiiaConfig {
                max_iterations: k,
                ..EiiaConfig::default()
            };
            let est = run_eiia(&pts, &cfg).unwrap();
            assert!(est.iterations_used <= k);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(SignaturePointSet::new(vec![Point::new(0.0, -1.0)]).is_err());
        assert!(SignaturePointSet::new(vec![Point::new(1.0, 1.0), Point::new(0.0, 1.0)]).is_err());
        assert!(SignaturePointSet::with_angles(vec![Point::new(0.0, 1.0)], vec![2.0]).is_err());
        let few =
            SignaturePointSet::new((0..5).map(|i| Point::new(i as f64, 1.0)).collect()).unwrap();
        assert!(matches!(
            run_eiia(&few, &EiiaConfig::default()),
            Err(EiiaError::InvalidPoints(_))
        ));
        let pts = SignaturePointSet::new(
            (0..8)
                .map(|i| Point::new(i as f64, 1.0 + 0.1 * i as f64))
                .collect(),
        )
        .unwrap();
        let cfg = EiiaConfig {
            max_iterations: 0,
            ..EiiaConfig::default()
        };
        assert!(matches!(
            run_eiia(&pts, &cfg),
            Err(EiiaError::InvalidConfig(_))
        ));
    }

    #[test]
    fn angle_and_radius_examples() {
        let r = derive_angle_and_radius(&Ellipse::new(0.0, 2.0, 1.0, 0.5).unwrap());
        assert!((r.alpha - std::f64::consts::FRAC_PI_6).abs() < 1e-15);
        assert_eq!(r.radius, 0.5);
        assert!(!r.clamped);

        let r = derive_angle_and_radius(&Ellipse::new(0.0, 2.0, 0.3, 0.3).unwrap());
        assert!((r.alpha - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(r.radius, 0.3);

        let r = derive_angle_and_radius(&Ellipse::new(0.0, 2.0, 0.29, 0.30).unwrap());
        assert_eq!(r.alpha, FRAC_PI_2);
        assert!(r.clamped);
    }

    #[test]
    fn bearing_examples() {
        let c = disambiguate_bearing(80.0, 60f64.to_radians(), 130.0);
        assert!((c.candidates[0] - 140.0).abs() < 1e-9 && (c.candidates[1] - 20.0).abs() < 1e-9);
        assert!((c.chosen - 140.0).abs() < 1e-9);
        assert!(!c.tie);

        let c = disambiguate_bearing(30.0, FRAC_PI_2, 10.0);
        assert!((c.candidates[0] - c.candidates[1]).abs() < 1e-9);
        assert!((c.chosen - 120.0).abs() < 1e-9);

        let c = disambiguate_bearing(0.0, 45f64.to_radians(), 90.0);
        assert!((c.candidates[0] - 45.0).abs() < 1e-9 && (c.candidates[1] - 135.0).abs() < 1e-9);
        assert!(c.tie);
        assert_eq!(c.chosen, c.candidates[0]);
    }

    #[test]
    fn bearing_choice_ignores_map_direction_sense() {
        for d in [0.0, 37.0, 123.0, 359.0] {
            for a in [10.0f64, 45.0, 72.0] {
                for m in [0.0, 15.0, 100.0, 170.0] {
                    let c1 = disambiguate_bearing(d, a.to_radians(), m);
                    let c2 = disambiguate_bearing(d, a.to_radians(), m + 180.0);
                    assert!(line_angle_between(c1.chosen, c2.chosen) < 1e-9);
                }
            }
        }
    }
}

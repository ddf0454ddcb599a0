//! Constrained algebraic ellipse fitting and the hyperbola baseline.
//!
//! The ellipse fit minimizes the sum of squared algebraic distances over
//! conics with `B = 0`, subject to `4AC = 1`. Eliminating the linear
//! coefficients `(D, E, F)` leaves a 2x2 generalized eigenproblem on `(A, C)`
//! against the constraint matrix, which has a single ellipse-valued solution
//! in closed form.

use nalgebra::{Matrix2x3, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{conic_to_ellipse, distance_to_boundary, ConicCoeffs, Ellipse, Point};

pub const MIN_ELLIPSE_POINTS: usize = 6;
pub const MIN_HYPERBOLA_POINTS: usize = 5;
const HYPERBOLA_MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("fit failed: {0}")]
    FitFailed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub conic: ConicCoeffs,
    pub ellipse: Ellipse,
    /// Sum of squared algebraic distances of the input points (with `4AC = 1`).
    pub algebraic_residual: f64,
    /// RMS Euclidean distance of the input points to the fitted ellipse.
    pub geometric_rms: f64,
}

/// Circular cross section seen through the model `(y + r)² = (x - x0)² + y0²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperbolaFit {
    pub apex_x: f64,
    pub depth_to_center: f64,
    pub radius: f64,
    /// Sum of squared depth residuals (m²).
    pub residual: f64,
    pub iterations: usize,
}

impl HyperbolaFit {
    pub fn depth_at(&self, x: f64) -> f64 {
        (x - self.apex_x).hypot(self.depth_to_center) - self.radius
    }
}

pub fn algebraic_distance_sum(conic: &ConicCoeffs, points: &[Point]) -> f64 {
    points.iter().map(|&p| conic.evaluate(p).powi(2)).sum()
}

pub fn geometric_rms(ellipse: &Ellipse, points: &[Point]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let ss: f64 = points
        .iter()
        .map(|&p| distance_to_boundary(ellipse, p).powi(2))
        .sum();
    (ss / points.len() as f64).sqrt()
}

fn check_ellipse_input(points: &[Point]) -> Result<(), FitError> {
    if points.len() < MIN_ELLIPSE_POINTS {
        return Err(FitError::DegenerateInput(format!(
            "need at least {MIN_ELLIPSE_POINTS} points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(FitError::DegenerateInput("non-finite coordinate".into()));
    }
    let mut xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 3 {
        return Err(FitError::DegenerateInput(
            "points span fewer than 3 distinct x values".into(),
        ));
    }
    let p0 = points[0];
    let far = points
        .iter()
        .max_by(|a, b| a.distance(p0).total_cmp(&b.distance(p0)))
        .copied()
        .unwrap_or(p0);
    let span = far.distance(p0);
    let (dx, dy) = ((far.x - p0.x) / span, (far.y - p0.y) / span);
    let off_line = points
        .iter()
        .map(|p| ((p.x - p0.x) * dy - (p.y - p0.y) * dx).abs())
        .fold(0.0, f64::max);
    if off_line <= 1e-12 * span {
        return Err(FitError::DegenerateInput("points are collinear".into()));
    }
    Ok(())
}

/// Least-squares ellipse under `B = 0`, `4AC = 1`.
pub fn fit_ellipse(points: &[Point]) -> Result<FitResult, FitError> {
    check_ellipse_input(points)?;

    // Isotropic normalization keeps the constraint covariant: the minimizer in
    // normalized coordinates maps to the minimizer in the original ones.
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let my = points.iter().map(|p| p.y).sum::<f64>() / n;
    let scale = (points
        .iter()
        .map(|p| (p.x - mx).powi(2) + (p.y - my).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();

    // Scatter blocks for the quadratic (u², v²) and linear (u, v, 1) terms.
    let mut s1 = nalgebra::Matrix2::<f64>::zeros();
    let mut s2 = Matrix2x3::<f64>::zeros();
    let mut s3 = Matrix3::<f64>::zeros();
    for p in points {
        let u = (p.x - mx) / scale;
        let v = (p.y - my) / scale;
        let quad = nalgebra::Vector2::new(u * u, v * v);
        let lin = Vector3::new(u, v, 1.0);
        s1 += quad * quad.transpose();
        s2 += quad * lin.transpose();
        s3 += lin * lin.transpose();
    }
    let s3_inv = s3
        .try_inverse()
        .ok_or_else(|| FitError::FitFailed("singular linear scatter block".into()))?;
    // Linear coefficients as a function of (A, C): [D E F]ᵀ = T [A C]ᵀ.
    let t = -s3_inv * s2.transpose();
    let m = s1 + s2 * t;
    let (m11, m22) = (m[(0, 0)], m[(1, 1)]);
    if !(m11 > 0.0 && m22 > 0.0) {
        return Err(FitError::FitFailed(
            "reduced scatter matrix has no ellipse direction".into(),
        ));
    }
    // Generalized eigenpairs of (M, [[0, 2], [2, 0]]) have
    // λ = (m12 ± √(m11 m22)) / 2; only the + branch has AC > 0, with
    // eigenvector ∝ (√m22, √m11) independent of m12.
    let root = (m11 * m22).sqrt().sqrt();
    let qa = m22.sqrt() / (2.0 * root);
    let qc = m11.sqrt() / (2.0 * root);
    let lin = t * nalgebra::Vector2::new(qa, qc);
    let (qd, qe, qf) = (lin[0], lin[1], lin[2]);

    // Undo the normalization u = (x - mx)/s, v = (y - my)/s, then multiply by
    // s² so that 4AC stays 1.
    let s = scale;
    let conic = ConicCoeffs::new(
        qa,
        0.0,
        qc,
        qd * s - 2.0 * qa * mx,
        qe * s - 2.0 * qc * my,
        qa * mx * mx + qc * my * my - qd * s * mx - qe * s * my + qf * s * s,
    );
    let ellipse = conic_to_ellipse(&conic)
        .map_err(|_| FitError::FitFailed("fitted conic is not a real ellipse".into()))?;
    Ok(FitResult {
        conic,
        ellipse,
        algebraic_residual: algebraic_distance_sum(&conic, points),
        geometric_rms: geometric_rms(&ellipse, points),
    })
}

/// Levenberg–Marquardt fit of `y = √((x - x0)² + y0²) - r` over `(x0, y0, r)`.
pub fn fit_hyperbola_baseline(points: &[Point]) -> Result<HyperbolaFit, FitError> {
    if points.len() < MIN_HYPERBOLA_POINTS {
        return Err(FitError::DegenerateInput(format!(
            "need at least {MIN_HYPERBOLA_POINTS} points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|p| !(p.y > 0.0) || !p.x.is_finite()) {
        return Err(FitError::DegenerateInput(
            "all depths must be positive and finite".into(),
        ));
    }
    let apex = points
        .iter()
        .min_by(|a, b| a.y.total_cmp(&b.y))
        .copied()
        .expect("non-empty");
    let r0 = 0.1;
    let mut params = Vector3::new(apex.x, apex.y + r0, r0);

    let cost = |q: &Vector3<f64>| -> f64 {
        points
            .iter()
            .map(|p| ((p.x - q[0]).hypot(q[1]) - q[2] - p.y).powi(2))
            .sum()
    };
    let mut current = cost(&params);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < HYPERBOLA_MAX_ITERATIONS {
        iterations += 1;
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for p in points {
            let dx = p.x - params[0];
            let rho = dx.hypot(params[1]);
            let residual = rho - params[2] - p.y;
            let jac = Vector3::new(-dx / rho, params[1] / rho, -1.0);
            jtj += jac * jac.transpose();
            jtr += jac * residual;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let mut damped = jtj;
            for i in 0..3 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(step) = damped.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = params + step;
            let trial_cost = cost(&trial);
            if trial_cost.is_finite() && trial_cost <= current {
                let small_step = step.norm() <= 1e-14 * (1.0 + params.norm());
                let small_gain = current - trial_cost <= 1e-30 + 1e-15 * current;
                params = trial;
                current = trial_cost;
                lambda = (lambda / 10.0).max(1e-15);
                accepted = true;
                converged = small_step || small_gain;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No descent direction left: treat as converged at a stationary point.
            converged = jtr.norm() <= 1e-10 * (1.0 + current.sqrt());
            break;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(FitError::FitFailed(format!(
            "hyperbola fit did not converge within {HYPERBOLA_MAX_ITERATIONS} iterations"
        )));
    }
    let fit = HyperbolaFit {
        apex_x: params[0],
        depth_to_center: params[1].abs(),
        radius: params[2],
        residual: current,
        iterations,
    };
    if !(fit.depth_to_center > fit.radius && fit.radius > 0.0) {
        return Err(FitError::FitFailed(format!(
            "hyperbola parameters out of range (y0 = {}, r = {})",
            fit.depth_to_center, fit.radius
        )));
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ellipse_to_conic;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    // Oracle: points straight from the parametric form.
    fn on_ellipse(e: &Ellipse, n: usize) -> Vec<Point> {
        (0..n)
            .map(|i| e.point_at(TAU * i as f64 / n as f64))
            .collect()
    }

    #[test]
    fn recovers_exact_ellipse() {
        let truth = Ellipse::new(0.0, 2.0, 1.0, 0.5).unwrap();
        let fit = fit_ellipse(&on_ellipse(&truth, 30)).unwrap();
        assert!((fit.ellipse.center_x - 0.0).abs() < 1e-6);
        assert!((fit.ellipse.center_y - 2.0).abs() < 1e-6);
        assert!((fit.ellipse.a / 1.0 - 1.0).abs() < 1e-6);
        assert!((fit.ellipse.b / 0.5 - 1.0).abs() < 1e-6);
        assert!(fit.algebraic_residual < 1e-10);
        assert_eq!(fit.conic.b, 0.0);
        assert!((4.0 * fit.conic.a * fit.conic.c - 1.0).abs() < 1e-9);
    }

    #[test]
    fn recovers_circle() {
        let truth = Ellipse::new(0.0, 3.0, 1.0, 1.0).unwrap();
        let fit = fit_ellipse(&on_ellipse(&truth, 30)).unwrap();
        assert!((fit.ellipse.a - 1.0).abs() < 1e-6);
        assert!((fit.ellipse.b - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_too_few_points() {
        let truth = Ellipse::new(0.0, 2.0, 1.0, 0.5).unwrap();
        assert!(matches!(
            fit_ellipse(&on_ellipse(&truth, 5)),
            Err(FitError::DegenerateInput(_))
        ));
    }

    #[test]
    fn rejects_collinear_and_narrow_inputs() {
        let line: Vec<Point> = (0..10)
            .map(|i| Point::new(i as f64, 2.0 * i as f64))
            .collect();
        assert!(matches!(
            fit_ellipse(&line),
            Err(FitError::DegenerateInput(_))
        ));
        let two_columns: Vec<Point> = (0..10)
            .map(|i| Point::new((i % 2) as f64, i as f64))
            .collect();
        assert!(matches!(
            fit_ellipse(&two_columns),
            Err(FitError::DegenerateInput(_))
        ));
    }

    #[test]
    fn noisy_points_stay_within_one_percent() {
        let truth = Ellipse::new(0.0, 2.0, 1.0, 0.5).unwrap();
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Point> = on_ellipse(&truth, 30)
                .into_iter()
                .map(|p| {
                    Point::new(
                        p.x + rng.gen_range(-1e-3..1e-3),
                        p.y + rng.gen_range(-1e-3..1e-3),
                    )
                })
                .collect();
            let e = fit_ellipse(&pts).unwrap().ellipse;
            assert!(
                (e.center_x - truth.center_x).abs() < 0.01 * truth.center_y,
                "seed {seed}"
            );
            assert!(
                (e.center_y / truth.center_y - 1.0).abs() < 0.01,
                "seed {seed}"
            );
            assert!((e.a / truth.a - 1.0).abs() < 0.01, "seed {seed}");
            assert!((e.b / truth.b - 1.0).abs() < 0.01, "seed {seed}");
        }
    }

    #[test]
    fn algebraic_distance_examples() {
        let circle = ConicCoeffs::new(1.0, 0.0, 1.0, 0.0, 0.0, -1.0);
        assert_eq!(
            algebraic_distance_sum(&circle, &[Point::new(2.0, 0.0)]),
            9.0
        );
        let e = Ellipse::new(0.3, 1.7, 0.8, 0.4).unwrap();
        let c = ellipse_to_conic(&e);
        assert!(algebraic_distance_sum(&c, &on_ellipse(&e, 50)) < 1e-12);
        let pts = [
            Point::new(0.1, 0.2),
            Point::new(-1.0, 3.0),
            Point::new(2.0, 2.0),
        ];
        let manual: f64 = pts
            .iter()
            .map(|p| {
                let v = c.a * p.x * p.x + c.c * p.y * p.y + c.d * p.x + c.e * p.y + c.f;
                v * v
            })
            .sum();
        assert!((algebraic_distance_sum(&c, &pts) - manual).abs() < 1e-12);
    }

    #[test]
    fn geometric_rms_examples() {
        let e = Ellipse::new(0.0, 2.0, 1.0, 0.5).unwrap();
        assert!(geometric_rms(&e, &on_ellipse(&e, 40)) < 1e-9);
        assert!((geometric_rms(&e, &[Point::new(0.0, 0.0)]) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn geometric_rms_matches_dense_boundary_sampling() {
        // Oracle: minimum over a 10⁶-vertex polygon, segment distances.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let e =
                Ellipse::new(0.0, 2.0, rng.gen_range(0.2..2.0), rng.gen_range(0.2..2.0)).unwrap();
            let pts: Vec<Point> = (0..4)
                .map(|_| Point::new(rng.gen_range(-3.0..3.0), rng.gen_range(-1.0..5.0)))
                .collect();
            let n = 1_000_000;
            let verts = e.sample_boundary(n);
            let brute = |p: Point| {
                (0..n)
                    .map(|i| seg_dist(p, verts[i], verts[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min)
            };
            let oracle =
                (pts.iter().map(|&p| brute(p).powi(2)).sum::<f64>() / pts.len() as f64).sqrt();
            assert!((geometric_rms(&e, &pts) - oracle).abs() < 1e-5);
        }
    }

    fn seg_dist(p: Point, a: Point, b: Point) -> f64 {
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 {
            (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        p.distance(Point::new(a.x + t * dx, a.y + t * dy))
    }

    #[test]
    fn hyperbola_recovers_circle_signature() {
        let pts: Vec<Point> = (-15..15)
            .map(|i| {
                let x = i as f64 * 0.02;
                Point::new(x, (x * x + 1.5 * 1.5).sqrt() - 0.3)
            })
            .collect();
        let fit = fit_hyperbola_baseline(&pts).unwrap();
        assert!(fit.apex_x.abs() < 1e-6, "{fit:?}");
        assert!((fit.depth_to_center - 1.5).abs() < 1e-6, "{fit:?}");
        assert!((fit.radius - 0.3).abs() < 1e-6, "{fit:?}");
        assert!((fit.depth_at(fit.apex_x) - 1.2).abs() < 1e-6);
    }

    #[test]
    fn hyperbola_rejects_short_or_shallow_input() {
        let pts: Vec<Point> = (0..4).map(|i| Point::new(i as f64, 1.0)).collect();
        assert!(matches!(
            fit_hyperbola_baseline(&pts),
            Err(FitError::DegenerateInput(_))
        ));
        let pts: Vec<Point> = (0..6)
            .map(|i| Point::new(i as f64, i as f64 - 1.0))
            .collect();
        assert!(matches!(
            fit_hyperbola_baseline(&pts),
            Err(FitError::DegenerateInput(_))
        ));
    }

    fn arc_points(e: &Ellipse, n: usize, t0: f64, t1: f64) -> Vec<Point> {
        (0..n)
            .map(|i| e.point_at(t0 + (t1 - t0) * i as f64 / (n - 1) as f64))
            .collect()
    }

    proptest! {
        #[test]
        fn constraint_always_satisfied(
            cx in -3.0..3.0f64, cy in 0.5..4.0f64, a in 0.1..3.0f64, b in 0.1..3.0f64,
            noise in prop::collection::vec(-0.01..0.01f64, 40),
        ) {
            let e = Ellipse::new(cx, cy, a, b).unwrap();
            let pts: Vec<Point> = on_ellipse(&e, 20)
                .into_iter()
                .zip(noise.chunks(2))
                .map(|(p, n)| Point::new(p.x + n[0] * a, p.y + n[1] * b))
                .collect();
            if let Ok(fit) = fit_ellipse(&pts) {
                prop_assert_eq!(fit.conic.b, 0.0);
                prop_assert!((4.0 * fit.conic.a * fit.conic.c - 1.0).abs() < 1e-9);
                prop_assert!(fit.algebraic_residual >= 0.0 && fit.geometric_rms >= 0.0);
            }
        }

        #[test]
        fn translation_and_scale_equivariance(
            tx in -5.0..5.0f64, ty in -5.0..5.0f64, s in 0.2..5.0f64,
            noise in prop::collection::vec(-0.02..0.02f64, 48),
        ) {
            let e = Ellipse::new(0.2, 1.5, 0.7, 0.35).unwrap();
            let base: Vec<Point> = arc_points(&e, 24, 3.4, 6.0)
                .into_iter()
                .zip(noise.chunks(2))
                .map(|(p, n)| Point::new(p.x + n[0], p.y + n[1]))
                .collect();
            let f0 = fit_ellipse(&base).unwrap().ellipse;
            let moved: Vec<Point> = base.iter().map(|p| Point::new(p.x + tx, p.y + ty)).collect();
            let f1 = fit_ellipse(&moved).unwrap().ellipse;
            prop_assert!((f1.center_x - f0.center_x - tx).abs() < 1e-9);
            prop_assert!((f1.center_y - f0.center_y - ty).abs() < 1e-9);
            prop_assert!((f1.a - f0.a).abs() < 1e-9 && (f1.b - f0.b).abs() < 1e-9);
            let scaled: Vec<Point> = base.iter().map(|p| Point::new(p.x * s, p.y * s)).collect();
            let f2 = fit_ellipse(&scaled).unwrap().ellipse;
            prop_assert!((f2.center_x - s * f0.center_x).abs() < 1e-9 * s * (1.0 + f0.center_x.abs()));
            prop_assert!((f2.center_y / (s * f0.center_y) - 1.0).abs() < 1e-9);
            prop_assert!((f2.a / (s * f0.a) - 1.0).abs() < 1e-9);
            prop_assert!((f2.b / (s * f0.b) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn fit_is_locally_optimal(
            noise in prop::collection::vec(-0.01..0.01f64, 60),
            delta in prop::collection::vec(-1e-3..1e-3f64, 4),
        ) {
            let e = Ellipse::new(0.0, 1.5, 0.6, 0.3).unwrap();
            let pts: Vec<Point> = on_ellipse(&e, 30)
                .into_iter()
                .zip(noise.chunks(2))
                .map(|(p, n)| Point::new(p.x + n[0], p.y + n[1]))
                .collect();
            let fit = fit_ellipse(&pts).unwrap();
            let c = fit.conic;
            // Perturb A freely, then pick C to keep 4AC = 1; B stays 0.
            let a = c.a * (1.0 + delta[0]);
            let perturbed = ConicCoeffs::new(
                a, 0.0, 1.0 / (4.0 * a),
                c.d + delta[1] * c.d.abs().max(1e-3),
                c.e + delta[2] * c.e.abs().max(1e-3),
                c.f + delta[3] * c.f.abs().max(1e-3),
            );
            prop_assert!(fit.algebraic_residual <= algebraic_distance_sum(&perturbed, &pts) + 1e-15);
        }
    }
}

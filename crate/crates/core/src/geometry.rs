//! Axis-aligned ellipse primitives, conic conversion, point-to-ellipse
//! projection and the per-point rotation about a surface pivot.
//!
//! Coordinates are in meters. `x` runs along the scan line and `y` is depth,
//! positive downward, so the ground surface is the line `y = 0`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used to decide that a point is on or inside an ellipse.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("conic does not describe a real axis-aligned ellipse")]
    DegenerateConic,
    #[error("point ({x}, {y}) is inside or on the ellipse")]
    PointInsideEllipse { x: f64, y: f64 },
    #[error("rotation angle {0} rad would lift the point above the surface")]
    InvalidAngle(f64),
    #[error("invalid ellipse: semi-axes must be finite and positive (a = {a}, b = {b})")]
    InvalidEllipse { a: f64, b: f64 },
}

/// A point in the scan plane (or in plan coordinates for map data).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Self { x, y }
    }
}

/// Axis-aligned ellipse `(x - cx)²/a² + (y - cy)²/b² = 1`.
///
/// `a` is the horizontal semi-axis (along the scan), `b` the vertical one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center_x: f64,
    pub center_y: f64,
    pub a: f64,
    pub b: f64,
}

impl Ellipse {
    pub fn new(center_x: f64, center_y: f64, a: f64, b: f64) -> Result<Self, GeometryError> {
        let valid = |v: f64| v.is_finite() && v > 0.0;
        if !valid(a) || !valid(b) || !center_x.is_finite() || !center_y.is_finite() {
            return Err(GeometryError::InvalidEllipse { a, b });
        }
        Ok(Self {
            center_x,
            center_y,
            a,
            b,
        })
    }

    pub fn center(&self) -> Point {
        Point::new(self.center_x, self.center_y)
    }

    /// True when the whole ellipse lies strictly below the surface line.
    pub fn is_below_surface(&self) -> bool {
        self.center_y > self.b
    }

    /// Normalized implicit value: < 1 inside, 1 on the boundary, > 1 outside.
    pub fn level(&self, p: Point) -> f64 {
        let u = (p.x - self.center_x) / self.a;
        let v = (p.y - self.center_y) / self.b;
        u * u + v * v
    }

    /// Boundary point at parameter angle `t`.
    pub fn point_at(&self, t: f64) -> Point {
        Point::new(
            self.center_x + self.a * t.cos(),
            self.center_y + self.b * t.sin(),
        )
    }

    /// Outward normal (not normalized) at a boundary point.
    pub fn normal_at(&self, q: Point) -> (f64, f64) {
        (
            (q.x - self.center_x) / (self.a * self.a),
            (q.y - self.center_y) / (self.b * self.b),
        )
    }

    /// Evenly spaced boundary samples, handy for plotting.
    pub fn sample_boundary(&self, n: usize) -> Vec<Point> {
        (0..n)
            .map(|i| self.point_at(std::f64::consts::TAU * i as f64 / n as f64))
            .collect()
    }
}

/// General conic `A x² + B xy + C y² + D x + E y + F = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConicCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl ConicCoeffs {
    pub const fn new(a: f64, b: f64, c: f64, d: f64, e: f64, f: f64) -> Self {
        Self { a, b, c, d, e, f }
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.a, self.b, self.c, self.d, self.e, self.f]
    }

    /// Algebraic distance of `p` to the conic.
    pub fn evaluate(&self, p: Point) -> f64 {
        let (x, y) = (p.x, p.y);
        self.a * x * x + self.b * x * y + self.c * y * y + self.d * x + self.e * y + self.f
    }

    pub fn scaled(self, s: f64) -> Self {
        Self::new(
            self.a * s,
            self.b * s,
            self.c * s,
            self.d * s,
            self.e * s,
            self.f * s,
        )
    }

    /// Rescales so that `4AC = 1`. Only meaningful when `AC > 0`.
    pub fn normalized_4ac(self) -> Self {
        let k = 1.0 / (4.0 * self.a * self.c).sqrt();
        let k = if self.a < 0.0 { -k } else { k };
        self.scaled(k)
    }
}

/// Recovers the axis-aligned ellipse encoded by a conic with `B = 0`.
pub fn conic_to_ellipse(c: &ConicCoeffs) -> Result<Ellipse, GeometryError> {
    if c.b != 0.0 || !(c.a * c.c > 0.0) {
        return Err(GeometryError::DegenerateConic);
    }
    let s = c.d * c.d / (4.0 * c.a) + c.e * c.e / (4.0 * c.c) - c.f;
    let (ra, rb) = (s / c.a, s / c.c);
    if !(ra > 0.0 && rb > 0.0) || !ra.is_finite() || !rb.is_finite() {
        return Err(GeometryError::DegenerateConic);
    }
    Ellipse::new(-c.d / (2.0 * c.a), -c.e / (2.0 * c.c), ra.sqrt(), rb.sqrt())
        .map_err(|_| GeometryError::DegenerateConic)
}

/// Expands an ellipse into conic form, scaled so that `4AC = 1`.
pub fn ellipse_to_conic(e: &Ellipse) -> ConicCoeffs {
    let (a2, b2) = (e.a * e.a, e.b * e.b);
    let (x0, y0) = (e.center_x, e.center_y);
    ConicCoeffs::new(
        b2,
        0.0,
        a2,
        -2.0 * b2 * x0,
        -2.0 * a2 * y0,
        a2 * y0 * y0 + b2 * x0 * x0 - a2 * b2,
    )
    .normalized_4ac()
}

/// Nearest boundary point to an external query point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub nearest_point: Point,
    pub distance: f64,
    /// Signed angle between the downward vertical through the query point and
    /// the ray to the nearest point; positive when the nearest point lies
    /// toward decreasing `x`.
    pub angle_from_vertical: f64,
}

/// Shortest-distance projection of a point strictly outside `e` onto it.
pub fn project_point(e: &Ellipse, p: Point) -> Result<ProjectionResult, GeometryError> {
    if e.level(p) <= 1.0 + BOUNDARY_TOLERANCE {
        return Err(GeometryError::PointInsideEllipse { x: p.x, y: p.y });
    }
    let (q, distance) = closest_boundary_point(e, p);
    Ok(ProjectionResult {
        nearest_point: q,
        distance,
        angle_from_vertical: (p.x - q.x).atan2(q.y - p.y),
    })
}

/// Euclidean distance from any point (inside, on or outside) to the boundary.
pub fn distance_to_boundary(e: &Ellipse, p: Point) -> f64 {
    closest_boundary_point(e, p).1
}

/// Closest boundary point for a query anywhere in the plane.
///
/// Reduces to the first quadrant of a centered ellipse with the major axis on
/// the first coordinate, then solves the one-dimensional Lagrange equation
/// with a bracketed Newton iteration.
pub fn closest_boundary_point(e: &Ellipse, p: Point) -> (Point, f64) {
    let u = p.x - e.center_x;
    let v = p.y - e.center_y;
    let swap = e.b > e.a;
    let (e0, e1, y0, y1) = if swap {
        (e.b, e.a, v.abs(), u.abs())
    } else {
        (e.a, e.b, u.abs(), v.abs())
    };
    let (x0, x1) = closest_in_first_quadrant(e0, e1, y0, y1);
    let (qu, qv) = if swap { (x1, x0) } else { (x0, x1) };
    let q = Point::new(e.center_x + qu.copysign(u), e.center_y + qv.copysign(v));
    (q, q.distance(p))
}

/// `e0 >= e1 > 0`, `y0, y1 >= 0`.
fn closest_in_first_quadrant(e0: f64, e1: f64, y0: f64, y1: f64) -> (f64, f64) {
    if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / e0;
            let z1 = y1 / e1;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g == 0.0 {
                return (y0, y1);
            }
            let r0 = (e0 / e1) * (e0 / e1);
            let s = lagrange_root(r0, z0, z1, g);
            (r0 * y0 / (s + r0), y1 / (s + 1.0))
        } else {
            (0.0, e1)
        }
    } else {
        let numer = e0 * y0;
        let denom = e0 * e0 - e1 * e1;
        if numer < denom {
            let xde = numer / denom;
            (e0 * xde, e1 * (1.0 - xde * xde).max(0.0).sqrt())
        } else {
            (e0, 0.0)
        }
    }
}

/// Root of `g(s) = (r0 z0 / (s + r0))² + (z1 / (s + 1))² - 1` on `s > -1`.
///
/// `g` is strictly decreasing and convex there, so Newton steps are kept when
/// they stay inside the current bracket and bisection is used otherwise.
fn lagrange_root(r0: f64, z0: f64, z1: f64, g_start: f64) -> f64 {
    let n0 = r0 * z0;
    let mut lo = z1 - 1.0;
    let mut hi = if g_start < 0.0 {
        0.0
    } else {
        n0.hypot(z1) - 1.0
    };
    let eval = |s: f64| {
        let t0 = n0 / (s + r0);
        let t1 = z1 / (s + 1.0);
        let g = t0 * t0 + t1 * t1 - 1.0;
        let dg = -2.0 * (t0 * t0 / (s + r0) + t1 * t1 / (s + 1.0));
        (g, dg)
    };
    let mut s = 0.5 * (lo + hi);
    for _ in 0..256 {
        let (g, dg) = eval(s);
        if g == 0.0 {
            break;
        }
        if g > 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let newton = s - g / dg;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let settled = (next - s).abs() <= 2.0 * f64::EPSILON * s.abs().max(1.0);
        s = next;
        if settled {
            break;
        }
    }
    s
}

/// Rotates the signature point `(x, y)` about its surface pivot `(x, 0)` by
/// the cumulative angle `theta` (measured from the downward vertical).
pub fn rotate_signature_point(x: f64, y: f64, theta: f64) -> Result<Point, GeometryError> {
    if !(theta.abs() < FRAC_PI_2) {
        return Err(GeometryError::InvalidAngle(theta));
    }
    Ok(Point::new(x - y * theta.sin(), y * theta.cos()))
}

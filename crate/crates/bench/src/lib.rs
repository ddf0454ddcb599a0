//! Fixtures shared by the criterion benches.

use pipeinvert_core::geometry::project_point;
use pipeinvert_core::synth::{grid_extent, render, GridParams};
use pipeinvert_core::{BScanGrid, Ellipse, PipeScene, Point, SignaturePointSet};

/// Forward-model signature of `e` sampled at `n` pivots `spacing` apart.
pub fn signature_points(e: &Ellipse, n: usize, spacing: f64) -> SignaturePointSet {
    let half = (n / 2) as f64;
    let points = (0..n)
        .map(|i| {
            let x = e.center_x + (i as f64 - half) * spacing;
            Point::new(
                x,
                project_point(e, Point::new(x, 0.0))
                    .expect("pivot above the ellipse")
                    .distance,
            )
        })
        .collect();
    SignaturePointSet::new(points).expect("valid points")
}

pub fn scene(alpha_deg: f64) -> PipeScene {
    PipeScene {
        radius: 0.3,
        depth_to_center: 1.5,
        alpha: alpha_deg.to_radians(),
        apex_x: 1.7,
        scan_length: 3.4,
        noise_salt_fraction: 0.0,
        signature_thickness: 3,
    }
}

/// Rendered scan at the given depth step (meters per sample).
pub fn scan(scene: &PipeScene, depth_per_sample: f64) -> BScanGrid {
    let eps = 9.0;
    let dt =
        2.0 * depth_per_sample * f64::sqrt(eps) / pipeinvert_core::bscan::SPEED_OF_LIGHT_M_PER_NS;
    let (rows, cols) = grid_extent(scene, 0.01, depth_per_sample, 8);
    let params = GridParams {
        trace_spacing: 0.01,
        sample_interval_ns: dt,
        relative_permittivity: eps,
        rows,
        cols,
    };
    render(scene, &params, 1).expect("scene fits").0
}

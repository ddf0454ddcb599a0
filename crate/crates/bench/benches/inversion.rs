use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use pipeinvert_bench::{scan, scene, signature_points};
use pipeinvert_core::bscan::{find_downward_opening_clusters, preprocess};
use pipeinvert_core::eiia::run_eiia;
use pipeinvert_core::fitting::{fit_ellipse, fit_hyperbola_baseline};
use pipeinvert_core::geometry::project_point;
use pipeinvert_core::pipeline::{run_pipeline, RunConfig};
use pipeinvert_core::{EiiaConfig, Ellipse, Point};

fn geometry(c: &mut Criterion) {
    let e = Ellipse::new(0.0, 1.5, 0.6, 0.3).unwrap();
    c.bench_function("project_point", |b| {
        b.iter(|| project_point(black_box(&e), black_box(Point::new(0.7, 0.0))).unwrap())
    });
}

fn fitting(c: &mut Criterion) {
    let e = Ellipse::new(0.0, 1.5, 0.6, 0.3).unwrap();
    let pts = signature_points(&e, 30, 0.1);
    c.bench_function("fit_ellipse_30", |b| {
        b.iter(|| fit_ellipse(black_box(pts.points())).unwrap())
    });
    c.bench_function("fit_hyperbola_30", |b| {
        b.iter(|| fit_hyperbola_baseline(black_box(pts.points())).unwrap())
    });
    let cfg = EiiaConfig::default();
    c.bench_function("run_eiia_30", |b| {
        b.iter(|| run_eiia(black_box(&pts), &cfg).unwrap())
    });
}

fn scan_processing(c: &mut Criterion) {
    let grid = scan(&scene(60.0), 1e-3);
    let mut group = c.benchmark_group("scan");
    group.sample_size(20);
    group.bench_function("preprocess", |b| {
        b.iter(|| preprocess(black_box(&grid), 2.0, 8))
    });
    let img = preprocess(&grid, 2.0, 8);
    group.bench_function("clusters", |b| {
        b.iter(|| {
            find_downward_opening_clusters(black_box(&img), 15, 2, grid.max_signature_step_rows())
        })
    });
    let mut cfg = RunConfig::default();
    cfg.extraction.spacing = 0.1;
    group.bench_function("run_pipeline", |b| {
        b.iter(|| run_pipeline(black_box(&grid), &cfg))
    });
    group.finish();
}

criterion_group!(benches, geometry, fitting, scan_processing);
criterion_main!(benches);

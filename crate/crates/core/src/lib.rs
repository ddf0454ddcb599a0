#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Estimates the direction and radius of a buried pipe from a GPR B-scan.
//!
//! The pipeline runs preprocess → cluster → extract ([`bscan`]), then inverts
//! the extracted downward-opening signature to the pipe's elliptical cross
//! section ([`eiia`]), from which the obliquity and radius follow. A forward
//! simulator ([`synth`]) renders synthetic scans with known ground truth.

pub mod bscan;
pub mod eiia;
pub mod fitting;
pub mod geometry;
pub mod io;
pub mod pipeline;
pub mod pipemap;
pub mod sweep;
pub mod synth;

pub use bscan::{BScanGrid, BinaryImage, Cluster, Extraction};
pub use eiia::{EiiaConfig, PipeEstimate, SignaturePointSet};
pub use fitting::{FitResult, HyperbolaFit};
pub use geometry::{ConicCoeffs, Ellipse, Point, ProjectionResult};
pub use pipemap::{PipeMap, Segment, SurveyLine};
pub use synth::{GridParams, PipeScene};

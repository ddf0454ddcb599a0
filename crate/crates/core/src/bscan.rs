//! B-scan grids, preprocessing, downward-opening cluster detection and
//! signature point extraction.

use std::collections::VecDeque;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eiia::{EiiaError, SignaturePointSet};
use crate::fitting::MIN_ELLIPSE_POINTS;
use crate::geometry::Point;

/// Free-space propagation speed in m/ns.
pub const SPEED_OF_LIGHT_M_PER_NS: f64 = 0.299_792_458;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BScanError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("cluster too narrow: only {available} points available, need {MIN_ELLIPSE_POINTS}")]
    ClusterTooNarrow { available: usize },
    #[error(transparent)]
    Points(#[from] EiiaError),
}

/// Amplitudes with rows = time samples (top = earliest) and columns = traces.
#[derive(Debug, Clone, PartialEq)]
pub struct BScanGrid {
    amplitudes: Array2<f32>,
    trace_spacing: f64,
    sample_interval_ns: f64,
    relative_permittivity: f64,
}

impl BScanGrid {
    pub fn new(
        amplitudes: Array2<f32>,
        trace_spacing: f64,
        sample_interval_ns: f64,
        relative_permittivity: f64,
    ) -> Result<Self, BScanError> {
        let (rows, cols) = amplitudes.dim();
        if rows < 2 || cols < 2 {
            return Err(BScanError::InvalidGrid(format!(
                "need at least 2x2 samples, got {rows}x{cols}"
            )));
        }
        if !(trace_spacing > 0.0) || !(sample_interval_ns > 0.0) {
            return Err(BScanError::InvalidGrid(
                "trace spacing and sample interval must be positive".into(),
            ));
        }
        if !(relative_permittivity >= 1.0) || !relative_permittivity.is_finite() {
            return Err(BScanError::InvalidGrid(format!(
                "relative permittivity must be >= 1, got {relative_permittivity}"
            )));
        }
        Ok(Self {
            amplitudes,
            trace_spacing,
            sample_interval_ns,
            relative_permittivity,
        })
    }

    pub fn amplitudes(&self) -> &Array2<f32> {
        &self.amplitudes
    }

    pub fn rows(&self) -> usize {
        self.amplitudes.nrows()
    }

    pub fn cols(&self) -> usize {
        self.amplitudes.ncols()
    }

    pub fn trace_spacing(&self) -> f64 {
        self.trace_spacing
    }

    pub fn sample_interval_ns(&self) -> f64 {
        self.sample_interval_ns
    }

    pub fn relative_permittivity(&self) -> f64 {
        self.relative_permittivity
    }

    pub fn velocity(&self) -> f64 {
        SPEED_OF_LIGHT_M_PER_NS / self.relative_permittivity.sqrt()
    }

    /// Depth of one sample step in meters.
    pub fn depth_per_sample(&self) -> f64 {
        self.velocity() * self.sample_interval_ns / 2.0
    }

    /// Depth at a possibly fractional row index (two-way travel time).
    pub fn depth_at_row(&self, row: f64) -> f64 {
        self.velocity() * (row * self.sample_interval_ns) / 2.0
    }

    /// Fractional row index at which `depth` is recorded.
    pub fn row_at_depth(&self, depth: f64) -> f64 {
        depth / self.depth_per_sample()
    }

    /// Signature depth changes by at most one trace spacing per trace, since a
    /// shortest distance is 1-Lipschitz in the antenna position.
    pub fn max_signature_step_rows(&self) -> usize {
        (self.trace_spacing / self.depth_per_sample() - 1e-9)
            .ceil()
            .max(1.0) as usize
    }

    pub fn trace_x(&self, col: usize) -> f64 {
        col as f64 * self.trace_spacing
    }
}

pub fn depth_of_sample(row: usize, grid: &BScanGrid) -> f64 {
    grid.depth_at_row(row as f64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    mask: Array2<bool>,
}

impl BinaryImage {
    pub fn new(mask: Array2<bool>) -> Self {
        Self { mask }
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    pub fn dim(&self) -> (usize, usize) {
        self.mask.dim()
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&v| v).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub threshold_k: f64,
    pub min_component_area: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            threshold_k: 2.0,
            min_component_area: 8,
        }
    }
}

/// Background removal, global threshold at `threshold_k` standard deviations,
/// then removal of 8-connected specks smaller than `min_component_area`.
pub fn preprocess(grid: &BScanGrid, threshold_k: f64, min_component_area: usize) -> BinaryImage {
    let amps = grid.amplitudes();
    let (rows, cols) = amps.dim();
    // Deviation from the row mean; reflections are positive. Taking |deviation|
    // instead would light up the background of rows the signature dominates.
    let mut deviation = Array2::<f32>::zeros((rows, cols));
    for (r, row) in amps.outer_iter().enumerate() {
        let mean = row.iter().map(|&v| f64::from(v)).sum::<f64>() / cols as f64;
        for (c, &v) in row.iter().enumerate() {
            deviation[(r, c)] = (f64::from(v) - mean) as f32;
        }
    }
    let n = (rows * cols) as f64;
    let mean = deviation.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let var = deviation
        .iter()
        .map(|&v| (f64::from(v) - mean).powi(2))
        .sum::<f64>()
        / n;
    let threshold = mean + threshold_k * var.sqrt();
    let mut mask = deviation.mapv(|v| f64::from(v) > threshold);
    despeckle(&mut mask, min_component_area);
    BinaryImage::new(mask)
}

const NEIGHBORS_8: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

fn despeckle(mask: &mut Array2<bool>, min_area: usize) {
    if min_area <= 1 {
        return;
    }
    let (rows, cols) = mask.dim();
    let mut seen = Array2::<bool>::from_elem((rows, cols), false);
    let mut queue = VecDeque::new();
    let mut component = Vec::new();
    for r0 in 0..rows {
        for c0 in 0..cols {
            if !mask[(r0, c0)] || seen[(r0, c0)] {
                continue;
            }
            component.clear();
            seen[(r0, c0)] = true;
            queue.push_back((r0, c0));
            while let Some((r, c)) = queue.pop_front() {
                component.push((r, c));
                for (dr, dc) in NEIGHBORS_8 {
                    let (Some(nr), Some(nc)) = (r.checked_add_signed(dr), c.checked_add_signed(dc))
                    else {
                        continue;
                    };
                    if nr < rows && nc < cols && mask[(nr, nc)] && !seen[(nr, nc)] {
                        seen[(nr, nc)] = true;
                        queue.push_back((nr, nc));
                    }
                }
            }
            if component.len() < min_area {
                for &p in &component {
                    mask[p] = false;
                }
            }
        }
    }
}

/// Vertical run of foreground pixels in one column, rows inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSegment {
    pub column: usize,
    pub top: usize,
    pub bottom: usize,
}

impl ColumnSegment {
    pub fn height(&self) -> usize {
        self.bottom - self.top + 1
    }

    pub fn mid_row(&self) -> f64 {
        (self.top + self.bottom) as f64 / 2.0
    }

    /// Empty rows between the two runs; zero when they overlap or touch.
    pub fn gap_to(&self, other: &ColumnSegment) -> usize {
        if self.bottom < other.top {
            other.top - self.bottom - 1
        } else if other.bottom < self.top {
            self.top - other.bottom - 1
        } else {
            0
        }
    }
}

/// A downward-opening chain with exactly one segment per contiguous column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub segments: Vec<ColumnSegment>,
    /// Index into `segments` of the apex column.
    pub apex_index: usize,
}

impl Cluster {
    pub fn apex(&self) -> &ColumnSegment {
        &self.segments[self.apex_index]
    }

    pub fn apex_column(&self) -> usize {
        self.apex().column
    }

    pub fn width(&self) -> usize {
        self.segments.len()
    }

    pub fn first_column(&self) -> usize {
        self.segments[0].column
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub min_width: usize,
    pub tolerance: usize,
    /// Largest vertical gap (rows) bridged between adjacent columns. `None`
    /// uses the steepest possible signature slope, one trace spacing of depth
    /// per column.
    pub max_row_gap: Option<usize>,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            min_width: 15,
            tolerance: 2,
            max_row_gap: None,
        }
    }
}

impl ClusterConfig {
    pub fn row_gap_for(&self, grid: &BScanGrid) -> usize {
        self.max_row_gap
            .unwrap_or_else(|| grid.max_signature_step_rows())
    }
}

fn column_runs(img: &BinaryImage) -> Vec<Vec<ColumnSegment>> {
    let (rows, cols) = img.dim();
    let mask = img.mask();
    (0..cols)
        .map(|c| {
            let mut runs = Vec::new();
            let mut r = 0;
            while r < rows {
                if mask[(r, c)] {
                    let top = r;
                    while r + 1 < rows && mask[(r + 1, c)] {
                        r += 1;
                    }
                    runs.push(ColumnSegment {
                        column: c,
                        top,
                        bottom: r,
                    });
                }
                r += 1;
            }
            runs
        })
        .collect()
}

struct DisjointSet(Vec<usize>);

impl DisjointSet {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Scans the binary image column by column, links runs in adjacent columns
/// separated by at most `max_row_gap` empty rows and keeps the chains whose top
/// edge opens downward.
pub fn find_downward_opening_clusters(
    img: &BinaryImage,
    min_width: usize,
    tolerance: usize,
    max_row_gap: usize,
) -> Vec<Cluster> {
    let runs = column_runs(img);
    let mut offsets = Vec::with_capacity(runs.len() + 1);
    let mut total = 0;
    for col in &runs {
        offsets.push(total);
        total += col.len();
    }
    offsets.push(total);
    let flat: Vec<ColumnSegment> = runs.iter().flatten().copied().collect();

    let mut sets = DisjointSet((0..total).collect());
    for c in 1..runs.len() {
        for (i, left) in runs[c - 1].iter().enumerate() {
            for (j, right) in runs[c].iter().enumerate() {
                if left.gap_to(right) <= max_row_gap {
                    sets.union(offsets[c - 1] + i, offsets[c] + j);
                }
            }
        }
    }

    // Group runs by component; within a component keep the longest run of each
    // column (ties to the topmost), then split at column gaps or broken links.
    let mut by_root: std::collections::BTreeMap<usize, Vec<ColumnSegment>> = Default::default();
    for (i, seg) in flat.iter().enumerate() {
        let root = sets.find(i);
        by_root.entry(root).or_default().push(*seg);
    }
    let mut clusters = Vec::new();
    for (_, segs) in by_root {
        let mut chosen: std::collections::BTreeMap<usize, ColumnSegment> = Default::default();
        for s in segs {
            chosen
                .entry(s.column)
                .and_modify(|cur| {
                    if s.height() > cur.height() || (s.height() == cur.height() && s.top < cur.top)
                    {
                        *cur = s;
                    }
                })
                .or_insert(s);
        }
        let mut chain: Vec<ColumnSegment> = Vec::new();
        for s in chosen.into_values() {
            if let Some(last) = chain.last() {
                if s.column != last.column + 1 || s.gap_to(last) > max_row_gap {
                    clusters.extend(qualify(std::mem::take(&mut chain), min_width, tolerance));
                }
            }
            chain.push(s);
        }
        clusters.extend(qualify(chain, min_width, tolerance));
    }
    clusters.sort_by_key(|c| (c.apex().top, c.apex_column()));
    clusters
}

/// Downward-opening test on the top-edge profile.
fn qualify(segments: Vec<ColumnSegment>, min_width: usize, tolerance: usize) -> Option<Cluster> {
    if segments.len() <= min_width || segments.is_empty() {
        return None;
    }
    let tops: Vec<usize> = segments.iter().map(|s| s.top).collect();
    let min_top = *tops.iter().min()?;
    let first = tops.iter().position(|&t| t == min_top)?;
    let last = tops.iter().rposition(|&t| t == min_top)?;
    let apex_index = (first + last) / 2;

    // Both ends must be clearly deeper than the apex.
    let tol = tolerance as isize;
    let rise = |t: usize| t as isize - min_top as isize;
    if rise(tops[0]) <= tol || rise(*tops.last()?) <= tol {
        return None;
    }
    // Left of the apex the top edge may not climb more than `tolerance`
    // rows above its running minimum when read right-to-left, i.e. it is
    // non-increasing toward the apex; symmetrically on the right.
    let mut running = tops[0] as isize;
    for &t in &tops[..=apex_index] {
        let t = t as isize;
        if t > running + tol {
            return None;
        }
        running = running.min(t);
    }
    let mut running = tops[apex_index] as isize;
    for &t in &tops[apex_index..] {
        let t = t as isize;
        if t < running - tol {
            return None;
        }
        running = running.max(t);
    }
    Some(Cluster {
        segments,
        apex_index,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionConfig {
    /// Ground distance between selected columns, meters.
    pub spacing: f64,
    pub count: usize,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            spacing: 0.02,
            count: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionFlag {
    /// Fewer than the requested number of points were available.
    ShortExtraction,
    /// The requested spacing is not a whole number of traces.
    SpacingRounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub point_set: SignaturePointSet,
    pub apex_x: f64,
    pub column_step: usize,
    pub actual_spacing: f64,
    pub flags: Vec<ExtractionFlag>,
}

/// Picks the apex column plus columns alternately right and left of it at
/// whole multiples of the column step, and takes the depth of each segment's
/// midpoint.
pub fn extract_point_set(
    cluster: &Cluster,
    grid: &BScanGrid,
    spacing: f64,
    count: usize,
) -> Result<Extraction, BScanError> {
    let ratio = spacing / grid.trace_spacing();
    let step = (ratio.round() as usize).max(1);
    let mut flags = Vec::new();
    if (ratio - step as f64).abs() > 1e-9 * ratio.max(1.0) {
        flags.push(ExtractionFlag::SpacingRounded);
    }
    let apex = cluster.apex_index;
    let mut picked = vec![apex];
    let mut k = 1;
    while picked.len() < count {
        let right = apex + k * step;
        let left = apex.checked_sub(k * step);
        let right_ok = right < cluster.segments.len();
        if !right_ok && left.is_none() {
            break;
        }
        if right_ok {
            picked.push(right);
        }
        if let Some(l) = left {
            if picked.len() < count {
                picked.push(l);
            }
        }
        k += 1;
    }
    if picked.len() < count {
        flags.push(ExtractionFlag::ShortExtraction);
    }
    if picked.len() < MIN_ELLIPSE_POINTS {
        return Err(BScanError::ClusterTooNarrow {
            available: picked.len(),
        });
    }
    picked.sort_unstable();
    let points: Vec<Point> = picked
        .iter()
        .map(|&i| {
            let s = &cluster.segments[i];
            Point::new(grid.trace_x(s.column), grid.depth_at_row(s.mid_row()))
        })
        .collect();
    Ok(Extraction {
        point_set: SignaturePointSet::new(points)?,
        apex_x: grid.trace_x(cluster.apex_column()),
        column_step: step,
        actual_spacing: step as f64 * grid.trace_spacing(),
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn grid(rows: usize, cols: usize, eps: f64, dt: f64) -> BScanGrid {
        BScanGrid::new(Array2::zeros((rows, cols)), 0.01, dt, eps).unwrap()
    }

    #[test]
    fn depth_examples() {
        let g = grid(200, 10, 9.0, 0.2);
        assert_eq!(depth_of_sample(0, &g), 0.0);
        assert!((g.velocity() - 0.09993).abs() < 1e-5);
        assert!((depth_of_sample(100, &g) - 0.9993).abs() < 1e-4);
        let g4 = grid(200, 10, 36.0, 0.2);
        assert!((depth_of_sample(100, &g4) * 2.0 - depth_of_sample(100, &g)).abs() < 1e-12);
        // Linear and monotone in row.
        let d: Vec<f64> = (0..200).map(|r| depth_of_sample(r, &g)).collect();
        assert!(d
            .windows(3)
            .all(|w| w[1] > w[0] && ((w[2] - w[1]) - (w[1] - w[0])).abs() < 1e-12));
        assert!((g.row_at_depth(depth_of_sample(37, &g)) - 37.0).abs() < 1e-9);
    }

    #[test]
    fn grid_validation() {
        assert!(BScanGrid::new(Array2::zeros((1, 5)), 0.01, 0.1, 9.0).is_err());
        assert!(BScanGrid::new(Array2::zeros((5, 5)), 0.0, 0.1, 9.0).is_err());
        assert!(BScanGrid::new(Array2::zeros((5, 5)), 0.01, 0.1, 0.5).is_err());
    }

    #[test]
    fn constant_grid_is_background() {
        let g = BScanGrid::new(Array2::from_elem((20, 30), 3.5), 0.01, 0.1, 9.0).unwrap();
        assert_eq!(preprocess(&g, 2.0, 8).count(), 0);
    }

    #[test]
    fn despeckle_removes_small_components() {
        let mut a = Array2::<f32>::zeros((40, 40));
        for c in 5..35 {
            a[(20, c)] = 1.0;
        }
        a[(5, 5)] = 1.0;
        a[(5, 6)] = 1.0;
        let g = BScanGrid::new(a, 0.01, 0.1, 9.0).unwrap();
        let img = preprocess(&g, 2.0, 8);
        assert!(!img.mask()[(5, 5)] && !img.mask()[(5, 6)]);
        assert_eq!(img.count(), 30);
    }

    fn paint(mask: &mut Array2<bool>, col: usize, top: usize, len: usize) {
        for r in top..top + len {
            mask[(r, col)] = true;
        }
    }

    fn arch(mask: &mut Array2<bool>, apex_col: usize, apex_row: usize, half: usize) {
        for c in apex_col - half..=apex_col + half {
            let dx = c.abs_diff(apex_col);
            paint(mask, c, apex_row + dx * dx / 8, 3);
        }
    }

    #[test]
    fn single_arch_is_found() {
        let mut m = Array2::from_elem((120, 80), false);
        arch(&mut m, 40, 10, 25);
        let clusters = find_downward_opening_clusters(&BinaryImage::new(m), 15, 2, 8);
        assert_eq!(clusters.len(), 1);
        assert!(clusters[0].apex_column().abs_diff(40) <= 1);
        assert_eq!(clusters[0].width(), 51);
    }

    #[test]
    fn flat_band_is_rejected() {
        let mut m = Array2::from_elem((50, 60), false);
        for c in 0..60 {
            paint(&mut m, c, 20, 3);
        }
        assert!(find_downward_opening_clusters(&BinaryImage::new(m), 15, 2, 8).is_empty());
    }

    #[test]
    fn dipping_layer_is_rejected() {
        let mut m = Array2::from_elem((100, 60), false);
        for c in 0..60 {
            paint(&mut m, c, 10 + c, 3);
        }
        assert!(find_downward_opening_clusters(&BinaryImage::new(m), 15, 2, 8).is_empty());
    }

    #[test]
    fn two_arches_ordered_by_apex_depth() {
        let mut m = Array2::from_elem((150, 160), false);
        arch(&mut m, 40, 30, 25);
        arch(&mut m, 120, 12, 25);
        let clusters = find_downward_opening_clusters(&BinaryImage::new(m), 15, 2, 8);
        assert_eq!(clusters.len(), 2);
        assert!(clusters[0].apex_column().abs_diff(120) <= 1);
        assert!(clusters[1].apex_column().abs_diff(40) <= 1);
        let cols0: Vec<usize> = clusters[0].segments.iter().map(|s| s.column).collect();
        assert!(clusters[1]
            .segments
            .iter()
            .all(|s| !cols0.contains(&s.column)));
    }

    #[test]
    fn narrow_arch_is_ignored() {
        let mut m = Array2::from_elem((60, 60), false);
        arch(&mut m, 30, 10, 6);
        assert!(find_downward_opening_clusters(&BinaryImage::new(m), 15, 2, 8).is_empty());
    }

    #[test]
    fn local_bump_within_tolerance_is_accepted() {
        let mut m = Array2::from_elem((120, 80), false);
        arch(&mut m, 40, 10, 25);
        // Lift one column on the left flank by 2 rows, above its inner neighbour.
        let c = 35;
        let dx = 5usize;
        for r in 0..120 {
            m[(r, c)] = false;
        }
        paint(&mut m, c, 10 + dx * dx / 8 - 2, 5);
        assert_eq!(
            find_downward_opening_clusters(&BinaryImage::new(m.clone()), 15, 2, 8).len(),
            1
        );
        assert!(find_downward_opening_clusters(&BinaryImage::new(m), 15, 0, 8).is_empty());
    }

    fn straight_cluster(width: usize) -> Cluster {
        let segments: Vec<ColumnSegment> = (0..width)
            .map(|c| {
                let top = 10 + c.abs_diff(width / 2);
                ColumnSegment {
                    column: c + 3,
                    top,
                    bottom: top + 2,
                }
            })
            .collect();
        Cluster {
            segments,
            apex_index: width / 2,
        }
    }

    #[test]
    fn extraction_takes_every_second_column() {
        let g = grid(100, 80, 9.0, 0.2);
        let c = straight_cluster(70);
        let ex = extract_point_set(&c, &g, 0.02, 30).unwrap();
        assert_eq!(ex.column_step, 2);
        assert!(ex.flags.is_empty());
        let xs: Vec<f64> = ex.point_set.points().iter().map(|p| p.x).collect();
        assert_eq!(xs.len(), 30);
        assert!(xs.windows(2).all(|w| ((w[1] - w[0]) - 0.02).abs() < 1e-12));
        assert!(xs.contains(&ex.apex_x));
        // Depth comes from the segment midpoint.
        let apex = c.apex();
        let p = ex
            .point_set
            .points()
            .iter()
            .find(|p| p.x == ex.apex_x)
            .unwrap();
        assert_eq!(p.y, g.depth_at_row(apex.mid_row()));
    }

    #[test]
    fn extraction_flags_short_and_rejects_tiny() {
        let g = grid(100, 80, 9.0, 0.2);
        let ex = extract_point_set(&straight_cluster(10), &g, 0.01, 30).unwrap();
        assert!(ex.flags.contains(&ExtractionFlag::ShortExtraction));
        assert_eq!(ex.point_set.len(), 10);
        assert!(matches!(
            extract_point_set(&straight_cluster(10), &g, 0.02, 30),
            Err(BScanError::ClusterTooNarrow { available: 5 })
        ));
    }

    #[test]
    fn extraction_rounds_spacing() {
        let g = grid(100, 80, 9.0, 0.2);
        let ex = extract_point_set(&straight_cluster(70), &g, 0.025, 10).unwrap();
        assert_eq!(ex.column_step, 3);
        assert!((ex.actual_spacing - 0.03).abs() < 1e-12);
        assert!(ex.flags.contains(&ExtractionFlag::SpacingRounded));
    }
}

//! Seat location: pose -> representative point -> undistorted point ->
//! rectified top view -> row/column by 1-D clustering.
//!
//! Rectified coordinates live in the unit square. `x'` grows from the left
//! edge of the seating area to the right edge as seen in the image, and `y'`
//! grows from the front edge (bottom of the image, nearest the camera) to the
//! back edge.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::ingest::{kp, BodyPose, ClassroomConfig, Point};

/// Seat identity, rendered `RxCy`. Rows and columns are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "String", into = "String"))]
pub struct SeatId {
    pub row: u32,
    pub col: u32,
}

impl SeatId {
    pub const fn new(row: u32, col: u32) -> Self {
        Self { row, col }
    }

    pub fn in_grid(&self, rows: u32, cols: u32) -> bool {
        (1..=rows).contains(&self.row) && (1..=cols).contains(&self.col)
    }

    /// Row-major position in an `rows x cols` grid.
    pub fn grid_index(&self, cols: u32) -> usize {
        ((self.row - 1) * cols + (self.col - 1)) as usize
    }
}

impl fmt::Display for SeatId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{}C{}", self.row, self.col)
    }
}

impl FromStr for SeatId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("malformed seat id {s:?}"));
        let rest = s.strip_prefix('R').ok_or_else(bad)?;
        let (row, col) = rest.split_once('C').ok_or_else(bad)?;
        let row: u32 = row.parse().map_err(|_| bad())?;
        let col: u32 = col.parse().map_err(|_| bad())?;
        if row == 0 || col == 0 {
            return Err(bad());
        }
        Ok(Self { row, col })
    }
}

impl TryFrom<String> for SeatId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SeatId> for String {
    fn from(s: SeatId) -> String {
        format!("{s}")
    }
}

/// Mean of the confident upper-body joints (nose, eyes, ears, shoulders),
/// falling back to the mean of every confident joint.
pub fn representative_point(pose: &BodyPose, min_conf: f64) -> Result<Point> {
    mean(kp::UPPER_BODY.iter().filter_map(|&i| pose.confident(i, min_conf)))
        .or_else(|| mean(pose.confident_points(min_conf)))
        .ok_or(Error::NoConfidentKeypoint)
}

fn mean(points: impl Iterator<Item = Point>) -> Option<Point> {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for p in points {
        sx += p.x;
        sy += p.y;
        n += 1;
    }
    (n > 0).then(|| Point::new(sx / n as f64, sy / n as f64))
}

/// Radial division-model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionParams {
    pub k1: f64,
    pub k2: f64,
    pub center: Point,
    /// Radius normalizer, half the image diagonal.
    pub norm_radius: f64,
}

impl DistortionParams {
    pub fn from_config(cfg: &ClassroomConfig) -> Self {
        Self {
            k1: cfg.k1,
            k2: cfg.k2,
            center: cfg.principal_point(),
            norm_radius: cfg.image_diagonal() / 2.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.k1 == 0.0 && self.k2 == 0.0
    }

    fn factor(&self, r: f64) -> f64 {
        let r2 = r * r;
        1.0 + self.k1 * r2 + self.k2 * r2 * r2
    }
}

const DENOM_MIN: f64 = 1e-9;

/// Maps a distorted image point to its corrected position:
/// `p' = c + (p - c) / (1 + k1 r^2 + k2 r^4)` with `r = |p - c| / norm_radius`.
pub fn undistort(p: Point, d: &DistortionParams) -> Result<Point> {
    if d.is_identity() {
        return Ok(p);
    }
    if !(d.norm_radius > 0.0) {
        return Err(Error::Config("norm_radius must be positive".into()));
    }
    let (dx, dy) = (p.x - d.center.x, p.y - d.center.y);
    let r = libm::hypot(dx, dy) / d.norm_radius;
    let denom = d.factor(r);
    if denom <= DENOM_MIN {
        return Err(Error::DegenerateDistortion(denom));
    }
    Ok(Point::new(d.center.x + dx / denom, d.center.y + dy / denom))
}

/// Inverse of [`undistort`]: finds the image point that corrects to `p`.
/// Solved along the radial line by Newton iteration.
pub fn distort(p: Point, d: &DistortionParams) -> Result<Point> {
    if d.is_identity() {
        return Ok(p);
    }
    let (dx, dy) = (p.x - d.center.x, p.y - d.center.y);
    let target = libm::hypot(dx, dy) / d.norm_radius;
    if target == 0.0 {
        return Ok(p);
    }
    // solve g(s) = s - target * factor(s) = 0 for the distorted radius s
    let mut s = target;
    for _ in 0..100 {
        let s2 = s * s;
        let g = s - target * d.factor(s);
        let dg = 1.0 - target * (2.0 * d.k1 * s + 4.0 * d.k2 * s2 * s);
        if dg.abs() < 1e-15 {
            break;
        }
        let next = s - g / dg;
        if !next.is_finite() || next <= 0.0 {
            break;
        }
        let done = (next - s).abs() <= 1e-15 * s.max(1.0);
        s = next;
        if done {
            break;
        }
    }
    let denom = d.factor(s);
    if denom <= DENOM_MIN || (s / denom - target).abs() > 1e-9 * target.max(1.0) {
        return Err(Error::DegenerateDistortion(denom));
    }
    let scale = s / target;
    Ok(Point::new(d.center.x + dx * scale, d.center.y + dy * scale))
}

/// Projective map, stored row-major with `m[2][2] == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    pub m: [[f64; 3]; 3],
}

impl Homography {
    pub const IDENTITY: Homography = Homography {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    /// Builds from a raw matrix, rescaling so the bottom-right entry is 1.
    pub fn from_matrix(m: [[f64; 3]; 3]) -> Result<Self> {
        let s = m[2][2];
        if !(s.abs() > 1e-15) || !s.is_finite() {
            return Err(Error::SingularSystem);
        }
        let mut n = m;
        for row in &mut n {
            for v in row.iter_mut() {
                *v /= s;
            }
        }
        let h = Self { m: n };
        if !(h.determinant().abs() > 1e-12) {
            return Err(Error::SingularSystem);
        }
        Ok(h)
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self { m: [[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]] }
    }

    /// Exact four-point solve of `H src_i ~ dst_i`.
    pub fn solve(src: &[Point; 4], dst: &[Point; 4]) -> Result<Self> {
        let (sn, ts) = normalize(src)?;
        let (dn, td) = normalize(dst)?;

        // unknowns h11..h32 with h33 = 1
        let mut a = [[0.0f64; 9]; 8];
        for i in 0..4 {
            let (x, y) = (sn[i].x, sn[i].y);
            let (u, v) = (dn[i].x, dn[i].y);
            a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, u];
            a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, v];
        }
        let h = solve_linear_8(a)?;
        let hn = [[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], 1.0]];
        let td_inv = [
            [1.0 / td[0], 0.0, -td[1] / td[0]],
            [0.0, 1.0 / td[0], -td[2] / td[0]],
            [0.0, 0.0, 1.0],
        ];
        let ts_m = [[ts[0], 0.0, ts[1]], [0.0, ts[0], ts[2]], [0.0, 0.0, 1.0]];
        Self::from_matrix(mat_mul(&mat_mul(&td_inv, &hn), &ts_m))
    }

    pub fn apply(&self, p: Point) -> Result<Point> {
        let m = &self.m;
        let w = m[2][0] * p.x + m[2][1] * p.y + m[2][2];
        if !(w.abs() > 1e-12) {
            return Err(Error::PointAtInfinity(w));
        }
        Ok(Point::new(
            (m[0][0] * p.x + m[0][1] * p.y + m[0][2]) / w,
            (m[1][0] * p.x + m[1][1] * p.y + m[1][2]) / w,
        ))
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn inverse(&self) -> Result<Self> {
        let m = &self.m;
        let det = self.determinant();
        if !(det.abs() > 1e-300) {
            return Err(Error::SingularSystem);
        }
        let adj = [
            [
                m[1][1] * m[2][2] - m[1][2] * m[2][1],
                m[0][2] * m[2][1] - m[0][1] * m[2][2],
                m[0][1] * m[1][2] - m[0][2] * m[1][1],
            ],
            [
                m[1][2] * m[2][0] - m[1][0] * m[2][2],
                m[0][0] * m[2][2] - m[0][2] * m[2][0],
                m[0][2] * m[1][0] - m[0][0] * m[1][2],
            ],
            [
                m[1][0] * m[2][1] - m[1][1] * m[2][0],
                m[0][1] * m[2][0] - m[0][0] * m[2][1],
                m[0][0] * m[1][1] - m[0][1] * m[1][0],
            ],
        ];
        Self::from_matrix(adj)
    }
}

/// Similarity normalization: centroid to origin, mean distance sqrt(2).
/// Returns the points and `(scale, tx, ty)` of the applied transform.
fn normalize(pts: &[Point; 4]) -> Result<([Point; 4], [f64; 3])> {
    let cx = pts.iter().map(|p| p.x).sum::<f64>() / 4.0;
    let cy = pts.iter().map(|p| p.y).sum::<f64>() / 4.0;
    let mean_dist = pts.iter().map(|p| libm::hypot(p.x - cx, p.y - cy)).sum::<f64>() / 4.0;
    if !(mean_dist > 0.0) || !mean_dist.is_finite() {
        return Err(Error::SingularSystem);
    }
    let s = core::f64::consts::SQRT_2 / mean_dist;
    let out = pts.map(|p| Point::new(s * (p.x - cx), s * (p.y - cy)));
    Ok((out, [s, -s * cx, -s * cy]))
}

fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Gaussian elimination with partial pivoting on an 8x9 augmented matrix.
fn solve_linear_8(mut a: [[f64; 9]; 8]) -> Result<[f64; 8]> {
    const N: usize = 8;
    for col in 0..N {
        let pivot = (col..N)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if !(a[pivot][col].abs() > 1e-10) {
            return Err(Error::SingularSystem);
        }
        a.swap(col, pivot);
        for row in col + 1..N {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..=N {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let s: f64 = (row + 1..N).map(|k| a[row][k] * x[k]).sum();
        x[row] = (a[row][N] - s) / a[row][row];
    }
    Ok(x)
}

/// Result of [`kmeans_1d`].
#[derive(Debug, Clone, PartialEq)]
pub struct Clusters1d {
    /// Cluster label per input value; labels ascend with their centers.
    pub labels: Vec<usize>,
    /// Ascending cluster centers.
    pub centers: Vec<f64>,
}

impl Clusters1d {
    /// Within-cluster sum of squared distances for `values`.
    pub fn inertia(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .zip(&self.labels)
            .map(|(v, &l)| (v - self.centers[l]) * (v - self.centers[l]))
            .sum()
    }
}

/// Optimal 1-D k-means.
///
/// In one dimension every optimal clustering is a set of contiguous
/// intervals of the sorted values, so the minimum-inertia partition is found
/// exactly by dynamic programming over split points (run over distinct
/// values with multiplicities, so equal values always share a label). The
/// result is a fixed point of Lloyd's iteration. Deterministic; ties between
/// equally good splits resolve to the leftmost split.
pub fn kmeans_1d(values: &[f64], k: usize) -> Result<Clusters1d> {
    if values.is_empty() || k == 0 {
        return Err(Error::InfeasibleK { k, distinct: 0 });
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct: Vec<(f64, f64)> = Vec::new();
    for v in sorted {
        match distinct.last_mut() {
            Some((last, w)) if *last == v => *w += 1.0,
            _ => distinct.push((v, 1.0)),
        }
    }
    let m = distinct.len();
    if k > m {
        return Err(Error::InfeasibleK { k, distinct: m });
    }

    // prefix sums over values shifted by their mean to limit cancellation
    let shift = values.iter().sum::<f64>() / values.len() as f64;
    let mut pw = alloc::vec![0.0; m + 1];
    let mut p1 = alloc::vec![0.0; m + 1];
    let mut p2 = alloc::vec![0.0; m + 1];
    for (i, &(v, w)) in distinct.iter().enumerate() {
        let x = v - shift;
        pw[i + 1] = pw[i] + w;
        p1[i + 1] = p1[i] + w * x;
        p2[i + 1] = p2[i] + w * x * x;
    }
    // inertia of distinct[i..j]
    let cost = |i: usize, j: usize| -> f64 {
        let w = pw[j] - pw[i];
        let s = p1[j] - p1[i];
        (p2[j] - p2[i] - s * s / w).max(0.0)
    };

    // best[c][j]: min inertia of the first j distinct values in c+1 clusters
    let mut best = alloc::vec![alloc::vec![f64::INFINITY; m + 1]; k];
    let mut split = alloc::vec![alloc::vec![0usize; m + 1]; k];
    for j in 1..=m {
        best[0][j] = cost(0, j);
    }
    for c in 1..k {
        for j in c + 1..=m {
            for i in c..j {
                let v = best[c - 1][i] + cost(i, j);
                if v < best[c][j] {
                    best[c][j] = v;
                    split[c][j] = i;
                }
            }
        }
    }

    let mut bounds = alloc::vec![0usize; k + 1];
    bounds[k] = m;
    let mut j = m;
    for c in (1..k).rev() {
        j = split[c][j];
        bounds[c] = j;
    }

    let mut centers = Vec::with_capacity(k);
    for c in 0..k {
        let (lo, hi) = (bounds[c], bounds[c + 1]);
        let w: f64 = distinct[lo..hi].iter().map(|d| d.1).sum();
        let s: f64 = distinct[lo..hi].iter().map(|d| d.0 * d.1).sum();
        centers.push(s / w);
    }
    let labels = values
        .iter()
        .map(|v| {
            let pos = distinct.partition_point(|d| d.0 < *v);
            bounds[1..].partition_point(|&b| b <= pos)
        })
        .collect();
    Ok(Clusters1d { labels, centers })
}

/// Precomputed per-classroom geometry for seat assignment.
#[derive(Debug, Clone)]
pub struct SeatMapper {
    rows: u32,
    cols: u32,
    row_origin_front: bool,
    col_origin_left: bool,
    kp_conf_min: f64,
    distortion: DistortionParams,
    rectify: Homography,
}

/// Unit-square corners matched to the configured quad (TL, TR, BR, BL as
/// seen in the image): the image-bottom edge is the front, `y' = 0`.
pub const RECTIFIED_CORNERS: [Point; 4] = [
    Point::new(0.0, 1.0),
    Point::new(1.0, 1.0),
    Point::new(1.0, 0.0),
    Point::new(0.0, 0.0),
];

impl SeatMapper {
    pub fn new(cfg: &ClassroomConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            rows: cfg.rows,
            cols: cfg.cols,
            row_origin_front: cfg.row_origin_front,
            col_origin_left: cfg.col_origin_left,
            kp_conf_min: cfg.kp_conf_min,
            distortion: DistortionParams::from_config(cfg),
            rectify: Homography::solve(&cfg.rect_quad, &RECTIFIED_CORNERS)?,
        })
    }

    /// Image -> rectified unit square.
    pub fn rectification(&self) -> &Homography {
        &self.rectify
    }

    pub fn distortion(&self) -> &DistortionParams {
        &self.distortion
    }

    /// Representative point of `pose` in rectified coordinates.
    pub fn rectified_point(&self, pose: &BodyPose) -> Result<Point> {
        let p = representative_point(pose, self.kp_conf_min)?;
        self.rectify_image_point(p)
    }

    pub fn rectify_image_point(&self, p: Point) -> Result<Point> {
        self.rectify.apply(undistort(p, &self.distortion)?)
    }

    /// Seat per pose for one frame. Teacher-flagged poses, poses whose point
    /// cannot be rectified and poses more than one seat pitch outside the
    /// seating area get `None`.
    pub fn assign_seats(&self, poses: &[BodyPose], teacher_flags: &[bool]) -> Vec<Option<SeatId>> {
        let mut out = alloc::vec![None; poses.len()];
        let mut idx = Vec::new();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (i, pose) in poses.iter().enumerate() {
            if teacher_flags.get(i).copied().unwrap_or(false) {
                continue;
            }
            if let Ok(p) = self.rectified_point(pose) {
                let (mx, my) = (1.0 / self.cols as f64, 1.0 / self.rows as f64);
                let inside = p.x >= -mx && p.x <= 1.0 + mx && p.y >= -my && p.y <= 1.0 + my;
                if inside {
                    idx.push(i);
                    xs.push(p.x);
                    ys.push(p.y);
                }
            }
        }
        if idx.is_empty() {
            return out;
        }
        let rows = axis_slots(&ys, self.rows);
        let cols = axis_slots(&xs, self.cols);
        for (n, &i) in idx.iter().enumerate() {
            let row = if self.row_origin_front { rows[n] + 1 } else { self.rows - rows[n] };
            let col = if self.col_origin_left { cols[n] + 1 } else { self.cols - cols[n] };
            out[i] = Some(SeatId::new(row, col));
        }
        out
    }
}

/// Clusters rectified coordinates along one axis into at most `slots`
/// groups and maps each group center to the nearest of `slots` evenly spaced
/// reference centers `(i + 0.5) / slots`, so numbering stays absolute when
/// some rows or columns are empty. Returns 0-based slot per value.
fn axis_slots(values: &[f64], slots: u32) -> Vec<u32> {
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let k = (slots as usize).min(distinct.len());
    let clusters = kmeans_1d(values, k).expect("k bounded by distinct count");
    let slot_of: Vec<u32> = clusters
        .centers
        .iter()
        .map(|&c| nearest_reference(c, slots))
        .collect();
    clusters.labels.iter().map(|&l| slot_of[l]).collect()
}

fn nearest_reference(center: f64, slots: u32) -> u32 {
    let pos = libm::floor(center * slots as f64);
    if pos.is_nan() || pos < 0.0 {
        0
    } else {
        (pos as u32).min(slots - 1)
    }
}

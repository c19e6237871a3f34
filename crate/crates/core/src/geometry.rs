//! Poses, trajectories, rigid transforms, planar shapes and grid indexing.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point2 = [f64; 2];
pub type Point3 = [f64; 3];

/// Identifier of a vehicle taking part in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VehicleId(pub u32);

impl std::fmt::Display for VehicleId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn normalize_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub heading: f64,
    pub timestamp: u64,
}

impl Pose {
    pub fn new(x: f64, y: f64, z: f64, heading: f64, timestamp: u64) -> Self {
        Self { x, y, z, heading: normalize_angle(heading), timestamp }
    }

    pub fn xy(&self) -> Point2 {
        [self.x, self.y]
    }

    /// Transform from this pose's body frame into the frame the pose is expressed in.
    pub fn to_transform(&self) -> RigidTransform {
        RigidTransform::from_xyz_yaw(self.x, self.y, self.z, self.heading)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub timestamp: u64,
}

impl Waypoint {
    pub fn new(x: f64, y: f64, timestamp: u64) -> Self {
        Self { x, y, timestamp }
    }

    pub fn xy(&self) -> Point2 {
        [self.x, self.y]
    }
}

/// Timestamped polyline; timestamps strictly increase.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub waypoints: Vec<Waypoint>,
}

impl Trajectory {
    pub fn new(waypoints: Vec<Waypoint>) -> Result<Self> {
        if waypoints.windows(2).any(|w| w[1].timestamp <= w[0].timestamp) {
            return Err(Error::InvalidConfig("trajectory timestamps must strictly increase".into()));
        }
        Ok(Self { waypoints })
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn start_time(&self) -> Option<u64> {
        self.waypoints.first().map(|w| w.timestamp)
    }

    pub fn end_time(&self) -> Option<u64> {
        self.waypoints.last().map(|w| w.timestamp)
    }

    /// Linear interpolation of position at `t` ms; `None` outside the covered span.
    pub fn position_at(&self, t: f64) -> Option<Point2> {
        let first = self.waypoints.first()?;
        if self.waypoints.len() == 1 {
            return ((t - first.timestamp as f64).abs() < 1e-9).then(|| first.xy());
        }
        if t < first.timestamp as f64 || t > self.waypoints.last()?.timestamp as f64 {
            return None;
        }
        let idx = self.waypoints.partition_point(|w| (w.timestamp as f64) <= t);
        let i = idx.clamp(1, self.waypoints.len() - 1);
        let (a, b) = (&self.waypoints[i - 1], &self.waypoints[i]);
        let span = (b.timestamp - a.timestamp) as f64;
        let f = ((t - a.timestamp as f64) / span).clamp(0.0, 1.0);
        Some([a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f])
    }

    /// Shifts every waypoint by the same planar offset.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            waypoints: self
                .waypoints
                .iter()
                .map(|w| Waypoint::new(w.x + dx, w.y + dy, w.timestamp))
                .collect(),
        }
    }
}

/// Maximum-deviation polyline simplification. Endpoints are always retained and
/// every dropped waypoint lies within `tolerance` of the retained polyline.
pub fn downsample_trajectory(traj: &Trajectory, tolerance: f64) -> Trajectory {
    let n = traj.waypoints.len();
    if n <= 2 {
        return traj.clone();
    }
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[n - 1] = true;
    let mut stack = vec![(0usize, n - 1)];
    while let Some((lo, hi)) = stack.pop() {
        if hi <= lo + 1 {
            continue;
        }
        let a = traj.waypoints[lo].xy();
        let b = traj.waypoints[hi].xy();
        let (mut worst, mut worst_d) = (lo, -1.0);
        for i in lo + 1..hi {
            let d = point_segment_distance(traj.waypoints[i].xy(), a, b);
            if d > worst_d {
                worst_d = d;
                worst = i;
            }
        }
        if worst_d > tolerance {
            keep[worst] = true;
            stack.push((lo, worst));
            stack.push((worst, hi));
        }
    }
    Trajectory {
        waypoints: traj
            .waypoints
            .iter()
            .zip(keep)
            .filter_map(|(w, k)| k.then_some(*w))
            .collect(),
    }
}

/// 4x4 homogeneous rigid-body transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    m: Matrix4<f64>,
}

const RIGID_TOL: f64 = 1e-6;

impl RigidTransform {
    pub fn identity() -> Self {
        Self { m: Matrix4::identity() }
    }

    /// Validates orthonormality, unit determinant and the homogeneous bottom row.
    pub fn from_matrix(m: Matrix4<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidTransform("non-finite entry".into()));
        }
        let bottom = Vector4::new(m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)]);
        if (bottom - Vector4::new(0.0, 0.0, 0.0, 1.0)).amax() > RIGID_TOL {
            return Err(Error::InvalidTransform("bottom row must be (0,0,0,1)".into()));
        }
        let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned();
        if (r.transpose() * r - Matrix3::identity()).amax() > RIGID_TOL {
            return Err(Error::InvalidTransform("rotation block not orthonormal".into()));
        }
        if (r.determinant() - 1.0).abs() > RIGID_TOL {
            return Err(Error::InvalidTransform("rotation determinant must be +1".into()));
        }
        Ok(Self { m })
    }

    pub fn from_xyz_yaw(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        let (s, c) = yaw.sin_cos();
        #[rustfmt::skip]
        let m = Matrix4::new(
            c, -s, 0.0, x,
            s, c, 0.0, y,
            0.0, 0.0, 1.0, z,
            0.0, 0.0, 0.0, 1.0,
        );
        Self { m }
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.m
    }

    /// `self * other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        Self { m: self.m * other.m }
    }

    pub fn inverse(&self) -> RigidTransform {
        let r: Matrix3<f64> = self.m.fixed_view::<3, 3>(0, 0).into_owned();
        let t = self.m.fixed_view::<3, 1>(0, 3).into_owned();
        let rt = r.transpose();
        let ti = -(rt * t);
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&ti);
        Self { m }
    }

    /// Sender-to-receiver transform `T_r^-1 * T_s` given both map poses.
    pub fn between(sender_to_map: &RigidTransform, receiver_to_map: &RigidTransform) -> RigidTransform {
        receiver_to_map.inverse().compose(sender_to_map)
    }

    pub fn apply_point(&self, p: Point3) -> Point3 {
        let m = &self.m;
        [
            m[(0, 0)] * p[0] + m[(0, 1)] * p[1] + m[(0, 2)] * p[2] + m[(0, 3)],
            m[(1, 0)] * p[0] + m[(1, 1)] * p[1] + m[(1, 2)] * p[2] + m[(1, 3)],
            m[(2, 0)] * p[0] + m[(2, 1)] * p[1] + m[(2, 2)] * p[2] + m[(2, 3)],
        ]
    }

    /// Rotation only (velocities, directions).
    pub fn apply_vector(&self, v: Point3) -> Point3 {
        let m = &self.m;
        [
            m[(0, 0)] * v[0] + m[(0, 1)] * v[1] + m[(0, 2)] * v[2],
            m[(1, 0)] * v[0] + m[(1, 1)] * v[1] + m[(1, 2)] * v[2],
            m[(2, 0)] * v[0] + m[(2, 1)] * v[1] + m[(2, 2)] * v[2],
        ]
    }

    /// Rotation about the vertical axis.
    pub fn yaw(&self) -> f64 {
        self.m[(1, 0)].atan2(self.m[(0, 0)])
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub frame_id: String,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>, frame_id: impl Into<String>) -> Self {
        Self { points, frame_id: frame_id.into() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.points.iter().all(|p| p.iter().all(|c| c.is_finite()))
    }
}

/// Maps every point of `cloud` through `t` and relabels it with `target_frame`.
pub fn apply_transform(t: &RigidTransform, cloud: &PointCloud, target_frame: &str) -> Result<PointCloud> {
    // Re-validate: transforms built by hand via `from_matrix` are checked there, but
    // composed products can drift.
    RigidTransform::from_matrix(t.m)?;
    Ok(PointCloud {
        points: cloud.points.iter().map(|p| t.apply_point(*p)).collect(),
        frame_id: target_frame.to_string(),
    })
}

/// Regular planar lattice. Cells own their lower edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Point2,
    pub cell_size: f64,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub ix: usize,
    pub iy: usize,
}

pub const DEFAULT_CELL_SIZE: f64 = 0.5;

impl GridSpec {
    pub fn new(origin: Point2, cell_size: f64, width: usize, height: usize) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size < 1.0) {
            return Err(Error::InvalidConfig(format!("cell_size {cell_size} must be in (0, 1)")));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig("grid dimensions must be positive".into()));
        }
        Ok(Self { origin, cell_size, width, height })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn linear(&self, c: Cell) -> usize {
        c.iy * self.width + c.ix
    }

    pub fn cell_of_linear(&self, i: usize) -> Cell {
        Cell { ix: i % self.width, iy: i / self.width }
    }

    pub fn cell_center(&self, c: Cell) -> Point2 {
        [
            self.origin[0] + (c.ix as f64 + 0.5) * self.cell_size,
            self.origin[1] + (c.iy as f64 + 0.5) * self.cell_size,
        ]
    }

    /// Absolute lattice coordinates, independent of the grid origin.
    pub fn lattice(&self, c: Cell) -> (i64, i64) {
        let p = self.cell_center(c);
        lattice_of(p, self.cell_size)
    }

    /// Sub-window covering `[min, max]` aligned to the same absolute lattice,
    /// clipped to this grid.
    pub fn window(&self, min: Point2, max: Point2) -> Option<(GridSpec, usize, usize)> {
        let cs = self.cell_size;
        let lo_x = ((min[0] - self.origin[0]) / cs).floor().max(0.0) as i64;
        let lo_y = ((min[1] - self.origin[1]) / cs).floor().max(0.0) as i64;
        let hi_x = (((max[0] - self.origin[0]) / cs).floor() as i64).min(self.width as i64 - 1);
        let hi_y = (((max[1] - self.origin[1]) / cs).floor() as i64).min(self.height as i64 - 1);
        if hi_x < lo_x || hi_y < lo_y {
            return None;
        }
        let spec = GridSpec {
            origin: [self.origin[0] + lo_x as f64 * cs, self.origin[1] + lo_y as f64 * cs],
            cell_size: cs,
            width: (hi_x - lo_x + 1) as usize,
            height: (hi_y - lo_y + 1) as usize,
        };
        Some((spec, lo_x as usize, lo_y as usize))
    }
}

pub fn lattice_of(p: Point2, cell_size: f64) -> (i64, i64) {
    ((p[0] / cell_size).floor() as i64, (p[1] / cell_size).floor() as i64)
}

/// `floor((p - origin) / cell_size)` per axis; `None` when outside the grid.
pub fn grid_index(p: Point2, spec: &GridSpec) -> Option<Cell> {
    let fx = ((p[0] - spec.origin[0]) / spec.cell_size).floor();
    let fy = ((p[1] - spec.origin[1]) / spec.cell_size).floor();
    if fx < 0.0 || fy < 0.0 || fx >= spec.width as f64 || fy >= spec.height as f64 {
        return None;
    }
    Some(Cell { ix: fx as usize, iy: fy as usize })
}

// ---- planar helpers ----

pub fn sub(a: Point2, b: Point2) -> Point2 {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn dot(a: Point2, b: Point2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn cross(a: Point2, b: Point2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub fn norm(a: Point2) -> f64 {
    a[0].hypot(a[1])
}

pub fn dist(a: Point2, b: Point2) -> f64 {
    norm(sub(a, b))
}

pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + ab[0] * t, a[1] + ab[1] * t])
}

/// Oriented rectangle: a vehicle footprint placed at a pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedRect {
    pub center: Point2,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

impl OrientedRect {
    pub fn new(center: Point2, heading: f64, length: f64, width: f64) -> Self {
        Self { center, heading, length, width }
    }

    pub fn inflated(&self, margin: f64) -> Self {
        Self { length: self.length + 2.0 * margin, width: self.width + 2.0 * margin, ..*self }
    }

    /// Counter-clockwise corners.
    pub fn corners(&self) -> [Point2; 4] {
        let (s, c) = self.heading.sin_cos();
        let (hl, hw) = (self.length / 2.0, self.width / 2.0);
        let f = |lx: f64, ly: f64| [self.center[0] + c * lx - s * ly, self.center[1] + s * lx + c * ly];
        [f(hl, hw), f(-hl, hw), f(-hl, -hw), f(hl, -hw)]
    }

    /// Point in rectangle-local coordinates (x along heading).
    pub fn to_local(&self, p: Point2) -> Point2 {
        let (s, c) = self.heading.sin_cos();
        let d = sub(p, self.center);
        [c * d[0] + s * d[1], -s * d[0] + c * d[1]]
    }

    pub fn contains(&self, p: Point2) -> bool {
        let l = self.to_local(p);
        l[0].abs() <= self.length / 2.0 && l[1].abs() <= self.width / 2.0
    }

    pub fn circumradius(&self) -> f64 {
        0.5 * self.length.hypot(self.width)
    }

    /// Parametric window `[t_in, t_out]` during which `p + v*t` lies inside,
    /// clipped to `[0, t_max]`.
    pub fn crossing_window(&self, p: Point2, v: Point2, t_max: f64) -> Option<(f64, f64)> {
        let lp = self.to_local(p);
        let (s, c) = self.heading.sin_cos();
        let lv = [c * v[0] + s * v[1], -s * v[0] + c * v[1]];
        let (mut t0, mut t1) = (0.0f64, t_max);
        for (pos, vel, half) in [(lp[0], lv[0], self.length / 2.0), (lp[1], lv[1], self.width / 2.0)] {
            if vel.abs() < 1e-12 {
                if pos.abs() > half {
                    return None;
                }
            } else {
                let a = (-half - pos) / vel;
                let b = (half - pos) / vel;
                t0 = t0.max(a.min(b));
                t1 = t1.min(a.max(b));
                if t0 > t1 {
                    return None;
                }
            }
        }
        Some((t0, t1))
    }

    /// Minimum Euclidean distance between two rectangles; 0 when they overlap.
    pub fn distance(&self, other: &OrientedRect) -> f64 {
        let a = self.corners();
        let b = other.corners();
        if convex_overlap(&a, &b) {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for i in 0..4 {
            let (a0, a1) = (a[i], a[(i + 1) % 4]);
            let (b0, b1) = (b[i], b[(i + 1) % 4]);
            for j in 0..4 {
                best = best.min(point_segment_distance(b[j], a0, a1));
                best = best.min(point_segment_distance(a[j], b0, b1));
            }
        }
        best
    }
}

/// Separating-axis overlap test for convex polygons.
pub fn convex_overlap(a: &[Point2], b: &[Point2]) -> bool {
    for poly in [a, b] {
        for i in 0..poly.len() {
            let e = sub(poly[(i + 1) % poly.len()], poly[i]);
            let axis = [-e[1], e[0]];
            let proj = |ps: &[Point2]| {
                ps.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    let d = dot(*p, axis);
                    (lo.min(d), hi.max(d))
                })
            };
            let (alo, ahi) = proj(a);
            let (blo, bhi) = proj(b);
            if ahi < blo || bhi < alo {
                return false;
            }
        }
    }
    true
}

/// Convex hull (counter-clockwise, no collinear points). Degenerate inputs return
/// the distinct extreme points.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Point2> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(sub(lower[lower.len() - 1], lower[lower.len() - 2]), sub(*p, lower[lower.len() - 2])) <= 0.0 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Point2> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(sub(upper[upper.len() - 1], upper[upper.len() - 2]), sub(*p, upper[upper.len() - 2])) <= 0.0 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Distance along the ray `origin + s*dir` (unit `dir`) to the first boundary
/// crossing of a convex polygon, or `None`. Segments and single points are handled
/// as degenerate polygons.
pub fn ray_polygon_entry(origin: Point2, dir: Point2, poly: &[Point2]) -> Option<f64> {
    let n = poly.len();
    if n == 0 {
        return None;
    }
    if n == 1 {
        let d = sub(poly[0], origin);
        let s = dot(d, dir);
        return (s >= 0.0 && cross(dir, d).abs() < 1e-9).then_some(s);
    }
    let mut best: Option<f64> = None;
    let edges = if n == 2 { 1 } else { n };
    for i in 0..edges {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let e = sub(b, a);
        let denom = cross(dir, e);
        if denom.abs() < 1e-15 {
            continue;
        }
        let ao = sub(a, origin);
        let s = cross(ao, e) / denom;
        let u = cross(ao, dir) / denom;
        if s >= 0.0 && (-1e-12..=1.0 + 1e-12).contains(&u) {
            best = Some(best.map_or(s, |b: f64| b.min(s)));
        }
    }
    if n >= 3 && point_in_convex(origin, poly) {
        return Some(0.0);
    }
    best
}

pub fn point_in_convex(p: Point2, poly: &[Point2]) -> bool {
    if poly.len() < 3 {
        return false;
    }
    let n = poly.len();
    (0..n).all(|i| cross(sub(poly[(i + 1) % n], poly[i]), sub(p, poly[i])) >= 0.0)
}

/// Angular extent `[lo, hi]` (radians, `hi - lo < pi` unless the observer is
/// inside) of a point set seen from `observer`, expressed relative to the bearing
/// of its first point and then shifted back to absolute bearings (unwrapped).
pub fn angular_interval(observer: Point2, points: &[Point2]) -> Option<(f64, f64)> {
    let first = points.first()?;
    let ref_ang = (first[1] - observer[1]).atan2(first[0] - observer[0]);
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    for p in points {
        let a = (p[1] - observer[1]).atan2(p[0] - observer[0]);
        let d = normalize_angle(a - ref_ang);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    Some((ref_ang + lo, ref_ang + hi))
}

//! Per-vehicle spatial reasoning: occupancy grids, roadway object extraction,
//! motion estimation, and visibility / relevance of objects to peers.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::geometry::{
    angular_interval, convex_hull, dist, grid_index, lattice_of, point_in_convex, point_segment_distance,
    ray_polygon_entry, Cell, GridSpec, Point2, PointCloud, Pose, Trajectory, VehicleId,
};
use crate::world::RoadMask;

/// Bytes on the wire per shared point (three f64 coordinates).
pub const BYTES_PER_POINT: u64 = 24;

/// Default height above the road separating ground from above-ground returns.
pub const GROUND_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectId(pub u64);

impl std::fmt::Display for ObjectId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// FNV-1a over a canonical (sorted) list of absolute lattice cells.
pub fn canonical_object_id(cells: &[(i64, i64)]) -> ObjectId {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for (x, y) in cells {
        for b in x.to_le_bytes().into_iter().chain(y.to_le_bytes()) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    ObjectId(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellClass {
    Empty,
    GroundOnly,
    AboveGround,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub spec: GridSpec,
    pub cells: Vec<CellClass>,
    /// Road flags per cell (0 = not drivable, else direction bits).
    pub road: Vec<u8>,
}

impl OccupancyGrid {
    pub fn class_at(&self, c: Cell) -> CellClass {
        self.cells[self.spec.linear(c)]
    }

    pub fn is_drivable(&self, c: Cell) -> bool {
        self.road[self.spec.linear(c)] != 0
    }

    pub fn mark_above_ground(&mut self, p: Point2) {
        if let Some(c) = grid_index(p, &self.spec) {
            let i = self.spec.linear(c);
            self.cells[i] = CellClass::AboveGround;
        }
    }
}

/// Window of `road`'s lattice covering the planar extent of `cloud` (plus `pad` m).
pub fn window_for_cloud(cloud: &PointCloud, road: &RoadMask, pad: f64) -> Option<GridSpec> {
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for p in &cloud.points {
        min[0] = min[0].min(p[0]);
        min[1] = min[1].min(p[1]);
        max[0] = max[0].max(p[0]);
        max[1] = max[1].max(p[1]);
    }
    if !min[0].is_finite() {
        return None;
    }
    road.spec
        .window([min[0] - pad, min[1] - pad], [max[0] + pad, max[1] + pad])
        .map(|(s, _, _)| s)
}

/// Classifies every cell as empty, ground-only or above-ground and copies road flags.
/// `cloud` z values are heights above the road plane.
pub fn build_occupancy_grid(cloud: &PointCloud, spec: &GridSpec, road: &RoadMask, ground_threshold: f64) -> OccupancyGrid {
    let mut cells = vec![CellClass::Empty; spec.len()];
    for p in &cloud.points {
        if let Some(c) = grid_index([p[0], p[1]], spec) {
            let i = spec.linear(c);
            if p[2] > ground_threshold {
                cells[i] = CellClass::AboveGround;
            } else if cells[i] == CellClass::Empty {
                cells[i] = CellClass::GroundOnly;
            }
        }
    }
    OccupancyGrid { spec: *spec, cells, road: copy_road_flags(spec, road) }
}

fn copy_road_flags(spec: &GridSpec, road: &RoadMask) -> Vec<u8> {
    let cs = road.spec.cell_size;
    let ox = (spec.origin[0] - road.spec.origin[0]) / cs;
    let oy = (spec.origin[1] - road.spec.origin[1]) / cs;
    let aligned = (spec.cell_size - cs).abs() < 1e-12 && (ox - ox.round()).abs() < 1e-6 && (oy - oy.round()).abs() < 1e-6;
    if aligned {
        let (ox, oy) = (ox.round() as i64, oy.round() as i64);
        let mut out = vec![0u8; spec.len()];
        for iy in 0..spec.height {
            let ry = oy + iy as i64;
            if ry < 0 || ry >= road.spec.height as i64 {
                continue;
            }
            for ix in 0..spec.width {
                let rx = ox + ix as i64;
                if rx >= 0 && rx < road.spec.width as i64 {
                    out[iy * spec.width + ix] = road.flags[ry as usize * road.spec.width + rx as usize];
                }
            }
        }
        out
    } else {
        (0..spec.len()).map(|i| road.flags_at(spec.cell_center(spec.cell_of_linear(i)))).collect()
    }
}

/// An above-ground point cluster on the roadway.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadObject {
    pub object_id: ObjectId,
    pub owner: VehicleId,
    /// Absolute lattice cells, sorted.
    pub cells: Vec<(i64, i64)>,
    pub cell_size: f64,
    pub cloud: PointCloud,
    pub centroid: Point2,
    pub size_bytes: u64,
    pub velocity: Point2,
    pub heading: f64,
    pub last_update: u64,
    /// Planar convex hull of the points.
    pub hull: Vec<Point2>,
    /// Owner-local track identity that persists across frames.
    pub track: Option<u32>,
}

impl RoadObject {
    /// Builds an object from its above-ground points; cells, id, hull and size are derived.
    pub fn from_points(owner: VehicleId, cloud: PointCloud, cell_size: f64, timestamp: u64) -> Self {
        let mut cells: Vec<(i64, i64)> = cloud.points.iter().map(|p| lattice_of([p[0], p[1]], cell_size)).collect();
        cells.sort_unstable();
        cells.dedup();
        let n = cloud.points.len().max(1) as f64;
        let centroid = [
            cloud.points.iter().map(|p| p[0]).sum::<f64>() / n,
            cloud.points.iter().map(|p| p[1]).sum::<f64>() / n,
        ];
        let xy: Vec<Point2> = cloud.points.iter().map(|p| [p[0], p[1]]).collect();
        Self {
            object_id: canonical_object_id(&cells),
            owner,
            size_bytes: cloud.points.len() as u64 * BYTES_PER_POINT,
            cells,
            cell_size,
            hull: convex_hull(&xy),
            cloud,
            centroid,
            velocity: [0.0, 0.0],
            heading: 0.0,
            last_update: timestamp,
            track: None,
        }
    }

    pub fn speed(&self) -> f64 {
        self.velocity[0].hypot(self.velocity[1])
    }

    /// Radius of the smallest centroid-centred disc covering the hull.
    pub fn radius(&self) -> f64 {
        self.hull.iter().map(|p| dist(*p, self.centroid)).fold(0.0, f64::max)
    }

    /// Centres of the occupied lattice cells.
    pub fn cell_centers(&self) -> impl Iterator<Item = Point2> + '_ {
        let cs = self.cell_size;
        self.cells.iter().map(move |(x, y)| [(*x as f64 + 0.5) * cs, (*y as f64 + 0.5) * cs])
    }
}

/// Maximal 8-connected components of above-ground cells lying on drivable cells.
/// `cloud` must be in the grid's frame with z above the road.
pub fn extract_objects(grid: &OccupancyGrid, cloud: &PointCloud, owner: VehicleId, timestamp: u64, ground_threshold: f64) -> Vec<RoadObject> {
    let spec = &grid.spec;
    let mut label = vec![u32::MAX; spec.len()];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..spec.len() {
        if label[start] != u32::MAX || grid.cells[start] != CellClass::AboveGround || grid.road[start] == 0 {
            continue;
        }
        label[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let c = spec.cell_of_linear(i);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (c.ix as i64 + dx, c.iy as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= spec.width as i64 || ny >= spec.height as i64 {
                        continue;
                    }
                    let j = ny as usize * spec.width + nx as usize;
                    if label[j] == u32::MAX && grid.cells[j] == CellClass::AboveGround && grid.road[j] != 0 {
                        label[j] = next;
                        queue.push_back(j);
                    }
                }
            }
        }
        next += 1;
    }
    let mut buckets: Vec<Vec<[f64; 3]>> = vec![Vec::new(); next as usize];
    for p in &cloud.points {
        if p[2] <= ground_threshold {
            continue;
        }
        if let Some(c) = grid_index([p[0], p[1]], spec) {
            let l = label[spec.linear(c)];
            if l != u32::MAX {
                buckets[l as usize].push(*p);
            }
        }
    }
    buckets
        .into_iter()
        .filter(|b| !b.is_empty())
        .map(|pts| RoadObject::from_points(owner, PointCloud::new(pts, cloud.frame_id.clone()), spec.cell_size, timestamp))
        .collect()
}

/// The same components as `extract_objects` over a grid covering the whole
/// cloud, found on the occupied road cells only. Cost scales with the number of
/// points rather than the covered area. `cloud` must be in the road mask's frame.
pub fn extract_objects_sparse(cloud: &PointCloud, road: &RoadMask, owner: VehicleId, timestamp: u64, ground_threshold: f64) -> Vec<RoadObject> {
    let spec = &road.spec;
    let mut occupied: HashMap<usize, Vec<usize>> = HashMap::new();
    for (k, p) in cloud.points.iter().enumerate() {
        if p[2] <= ground_threshold {
            continue;
        }
        if let Some(c) = grid_index([p[0], p[1]], spec) {
            let i = spec.linear(c);
            if road.flags[i] != 0 {
                occupied.entry(i).or_default().push(k);
            }
        }
    }
    let mut seeds: Vec<usize> = occupied.keys().copied().collect();
    seeds.sort_unstable();
    let mut label: HashMap<usize, usize> = HashMap::with_capacity(seeds.len());
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::new();
    for start in seeds {
        if label.contains_key(&start) {
            continue;
        }
        let l = members.len();
        members.push(Vec::new());
        label.insert(start, l);
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            members[l].extend_from_slice(&occupied[&i]);
            let c = spec.cell_of_linear(i);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (c.ix as i64 + dx, c.iy as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= spec.width as i64 || ny >= spec.height as i64 {
                        continue;
                    }
                    let j = ny as usize * spec.width + nx as usize;
                    if occupied.contains_key(&j) && !label.contains_key(&j) {
                        label.insert(j, l);
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    members
        .into_iter()
        .map(|mut idx| {
            idx.sort_unstable();
            let pts = idx.into_iter().map(|k| cloud.points[k]).collect();
            RoadObject::from_points(owner, PointCloud::new(pts, cloud.frame_id.clone()), spec.cell_size, timestamp)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Motion {
    pub velocity: Point2,
    pub heading: f64,
    /// False when fewer than two distinct timestamps were available.
    pub known: bool,
}

impl Motion {
    pub const STATIONARY: Motion = Motion { velocity: [0.0, 0.0], heading: 0.0, known: false };
}

/// Finite difference between the oldest and newest sample (timestamps in ms).
pub fn estimate_motion(history: &[(Point2, u64)]) -> Motion {
    let (Some(first), Some(last)) = (history.first(), history.last()) else {
        return Motion::STATIONARY;
    };
    if last.1 <= first.1 {
        return Motion::STATIONARY;
    }
    let dt = (last.1 - first.1) as f64 / 1000.0;
    let v = [(last.0[0] - first.0[0]) / dt, (last.0[1] - first.0[1]) / dt];
    let heading = if v[0] == 0.0 && v[1] == 0.0 { 0.0 } else { v[1].atan2(v[0]) };
    Motion { velocity: v, heading, known: true }
}

/// Frame-to-frame association of extracted objects to persistent tracks.
#[derive(Debug, Clone)]
pub struct Tracker {
    tracks: Vec<Track>,
    next_id: u32,
    pub gate: f64,
    pub window: usize,
    pub max_age_ms: u64,
    /// Estimated speeds below this are reported as zero (m/s).
    pub min_speed: f64,
    /// Tracks with fewer samples report zero velocity.
    pub min_samples: usize,
}

#[derive(Debug, Clone)]
struct Track {
    id: u32,
    history: VecDeque<(Point2, u64)>,
    motion: Motion,
}

impl Default for Tracker {
    fn default() -> Self {
        Self { tracks: Vec::new(), next_id: 0, gate: 3.0, window: 15, max_age_ms: 300, min_speed: 2.0, min_samples: 5 }
    }
}

impl Tracker {
    /// Assigns track ids and motion estimates to `objects` observed at `now`.
    pub fn update(&mut self, objects: &mut [RoadObject], now: u64) {
        self.tracks.retain(|t| t.history.back().is_some_and(|h| now.saturating_sub(h.1) <= self.max_age_ms));
        let mut pairs = Vec::new();
        for (ti, t) in self.tracks.iter().enumerate() {
            let (p, ts) = *t.history.back().unwrap();
            let dt = now.saturating_sub(ts) as f64 / 1000.0;
            let pred = [p[0] + t.motion.velocity[0] * dt, p[1] + t.motion.velocity[1] * dt];
            for (oi, o) in objects.iter().enumerate() {
                let d = dist(pred, o.centroid);
                if d <= self.gate {
                    pairs.push((d, ti, oi));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut track_used = vec![false; self.tracks.len()];
        let mut obj_track: Vec<Option<usize>> = vec![None; objects.len()];
        for (_, ti, oi) in pairs {
            if !track_used[ti] && obj_track[oi].is_none() {
                track_used[ti] = true;
                obj_track[oi] = Some(ti);
            }
        }
        for (oi, o) in objects.iter_mut().enumerate() {
            let ti = match obj_track[oi] {
                Some(ti) => ti,
                None => {
                    self.tracks.push(Track { id: self.next_id, history: VecDeque::new(), motion: Motion::STATIONARY });
                    self.next_id += 1;
                    self.tracks.len() - 1
                }
            };
            let t = &mut self.tracks[ti];
            t.history.push_back((o.centroid, now));
            while t.history.len() > self.window {
                t.history.pop_front();
            }
            let hist: Vec<_> = t.history.iter().copied().collect();
            t.motion = estimate_motion(&hist);
            if hist.len() < self.min_samples || t.motion.velocity[0].hypot(t.motion.velocity[1]) < self.min_speed {
                t.motion.velocity = [0.0, 0.0];
            }
            o.track = Some(t.id);
            o.velocity = t.motion.velocity;
            o.heading = t.motion.heading;
        }
    }
}

fn min_distance_to_shape(p: Point2, shape: &[Point2]) -> f64 {
    match shape.len() {
        0 => f64::INFINITY,
        1 => dist(p, shape[0]),
        n => {
            if n >= 3 && point_in_convex(p, shape) {
                return 0.0;
            }
            (0..n).map(|i| point_segment_distance(p, shape[i], shape[(i + 1) % n])).fold(f64::INFINITY, f64::min)
        }
    }
}

fn entry_distance(observer: Point2, angle: f64, shape: &[Point2]) -> f64 {
    let d = [angle.cos(), angle.sin()];
    ray_polygon_entry(observer, d, shape).unwrap_or_else(|| min_distance_to_shape(observer, shape))
}

struct ShapeView {
    interval: Option<(f64, f64)>,
    dmin: f64,
    dmax: f64,
    contains_observer: bool,
}

fn view_of(observer: Point2, shape: &[Point2]) -> ShapeView {
    let contains_observer = shape.len() >= 3 && point_in_convex(observer, shape);
    ShapeView {
        interval: if contains_observer { None } else { angular_interval(observer, shape) },
        dmin: min_distance_to_shape(observer, shape),
        dmax: shape.iter().map(|p| dist(*p, observer)).fold(0.0, f64::max),
        contains_observer,
    }
}

fn visible_with_views(
    observer: Point2,
    target: &[Point2],
    tv: &ShapeView,
    others: impl Iterator<Item = usize>,
    shapes: &[&[Point2]],
    views: &[ShapeView],
    range: f64,
) -> bool {
    if target.is_empty() || tv.dmin > range {
        return false;
    }
    if tv.contains_observer {
        return true;
    }
    let Some((a, b)) = tv.interval else { return false };
    let mid = 0.5 * (a + b);
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut cover: Vec<(f64, f64)> = Vec::new();
    for j in others {
        let (occ, ov) = (shapes[j], &views[j]);
        if ov.contains_observer || ov.dmin >= tv.dmax {
            continue;
        }
        let Some((mut c, mut d)) = ov.interval else { continue };
        let k = ((0.5 * (c + d) - mid) / two_pi).round();
        c -= k * two_pi;
        d -= k * two_pi;
        let (lo, hi) = (a.max(c), b.min(d));
        if lo > hi {
            continue;
        }
        let probe = 0.5 * (lo + hi);
        if entry_distance(observer, probe, occ) < entry_distance(observer, probe, target) {
            cover.push((lo, hi));
        }
    }
    cover.sort_by(|x, y| x.0.total_cmp(&y.0));
    let eps = 1e-12;
    let mut reach = a;
    for (lo, hi) in cover {
        if lo > reach + eps {
            break;
        }
        reach = reach.max(hi);
        if reach >= b - eps {
            return false;
        }
    }
    reach < b - eps
}

/// Angular-shadow visibility of a convex `target` from `observer`. The target is
/// hidden when out of `range` or when the union of angular sectors of nearer
/// occluders covers its whole angular extent.
pub fn shape_visible(target: &[Point2], observer: Point2, occluders: &[&[Point2]], range: f64) -> bool {
    let tv = view_of(observer, target);
    let shapes: Vec<&[Point2]> = occluders.iter().copied().filter(|o| !o.is_empty() && *o != target).collect();
    let views: Vec<ShapeView> = shapes.iter().map(|s| view_of(observer, s)).collect();
    visible_with_views(observer, target, &tv, 0..shapes.len(), &shapes, &views, range)
}

/// Visibility from `observer` of each of the first `n_targets` shapes, with every
/// shape in `shapes` acting as a potential occluder of the others. Shapes reaching
/// within `self_radius` of the observer are taken to be the observer's own body.
pub fn visibility_from(observer: Point2, shapes: &[&[Point2]], n_targets: usize, range: f64, self_radius: f64) -> Vec<bool> {
    let views: Vec<ShapeView> = shapes
        .iter()
        .map(|s| {
            let mut v = view_of(observer, s);
            if v.dmin <= self_radius {
                v.contains_observer = true;
            }
            v
        })
        .collect();
    (0..n_targets.min(shapes.len()))
        .map(|t| {
            let others = (0..shapes.len()).filter(move |&j| j != t && !shapes[j].is_empty());
            visible_with_views(observer, shapes[t], &views[t], others, shapes, &views, range)
        })
        .collect()
}

/// Whether `target` is visible from `observer`'s position given other objects
/// (the observing vehicle's own footprint may be passed via `extra`).
pub fn compute_visibility(target: &RoadObject, observer: &Pose, occluders: &[&RoadObject], extra: &[&[Point2]], range: f64) -> bool {
    let mut shapes: Vec<&[Point2]> = occluders
        .iter()
        .filter(|o| o.object_id != target.object_id || o.owner != target.owner)
        .map(|o| o.hull.as_slice())
        .collect();
    shapes.extend_from_slice(extra);
    shape_visible(&target.hull, observer.xy(), &shapes, range)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelevanceMode {
    Boolean,
    /// `1 / time-to-collision` in milliseconds.
    Reciprocal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelevanceParams {
    /// Centre distance counted as a collision (m).
    pub threshold: f64,
    pub horizon_ms: u64,
    pub mode: RelevanceMode,
}

impl Default for RelevanceParams {
    fn default() -> Self {
        Self { threshold: 3.0, horizon_ms: 10_000, mode: RelevanceMode::Boolean }
    }
}

/// Earliest time (ms, absolute) of closest approach below `threshold` between a
/// constant-velocity point and a timestamped trajectory, within `[from, until]`.
pub fn first_conflict_time(
    start: Point2,
    start_time: u64,
    velocity: Point2,
    peer: &Trajectory,
    from: u64,
    until: u64,
    threshold: f64,
) -> Option<f64> {
    let obj_at = |t: f64| {
        let dt = (t - start_time as f64) / 1000.0;
        [start[0] + velocity[0] * dt, start[1] + velocity[1] * dt]
    };
    let wps = &peer.waypoints;
    if wps.len() == 1 {
        let t = wps[0].timestamp as f64;
        return (t >= from as f64 && t <= until as f64 && dist(obj_at(t), wps[0].xy()) < threshold).then_some(t);
    }
    for w in wps.windows(2) {
        let (ta, tb) = (w[0].timestamp as f64, w[1].timestamp as f64);
        let lo = ta.max(from as f64);
        let hi = tb.min(until as f64);
        if lo > hi {
            continue;
        }
        let p_lo = peer.position_at(lo)?;
        let p_hi = peer.position_at(hi)?;
        let (o_lo, o_hi) = (obj_at(lo), obj_at(hi));
        let d0 = [p_lo[0] - o_lo[0], p_lo[1] - o_lo[1]];
        let d1 = [p_hi[0] - o_hi[0], p_hi[1] - o_hi[1]];
        let dd = [d1[0] - d0[0], d1[1] - d0[1]];
        let len2 = dd[0] * dd[0] + dd[1] * dd[1];
        let f = if len2 > 0.0 { (-(d0[0] * dd[0] + d0[1] * dd[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let m = [d0[0] + dd[0] * f, d0[1] + dd[1] * f];
        if m[0].hypot(m[1]) < threshold {
            return Some(lo + (hi - lo) * f);
        }
    }
    None
}

/// Relevance of `object` to a peer following `peer` from `now` on.
pub fn compute_relevance(object: &RoadObject, peer: &Trajectory, now: u64, params: &RelevanceParams) -> f64 {
    if peer.is_empty() {
        return 0.0;
    }
    match first_conflict_time(
        object.centroid,
        object.last_update,
        object.velocity,
        peer,
        now,
        now + params.horizon_ms,
        params.threshold,
    ) {
        None => 0.0,
        Some(t) => match params.mode {
            RelevanceMode::Boolean => 1.0,
            RelevanceMode::Reciprocal => 1.0 / (t - now as f64).max(1.0),
        },
    }
}

/// Constant-velocity translation of an object by `dt_ms`.
pub fn extrapolate_object(obj: &RoadObject, dt_ms: u64) -> RoadObject {
    let dt = dt_ms as f64 / 1000.0;
    let (dx, dy) = (obj.velocity[0] * dt, obj.velocity[1] * dt);
    let mut out = obj.clone();
    out.last_update = obj.last_update + dt_ms;
    if dx == 0.0 && dy == 0.0 {
        return out;
    }
    for p in &mut out.cloud.points {
        p[0] += dx;
        p[1] += dy;
    }
    out.centroid = [obj.centroid[0] + dx, obj.centroid[1] + dy];
    for p in &mut out.hull {
        p[0] += dx;
        p[1] += dy;
    }
    let mut cells: Vec<(i64, i64)> = out.cloud.points.iter().map(|p| lattice_of([p[0], p[1]], obj.cell_size)).collect();
    cells.sort_unstable();
    cells.dedup();
    out.cells = cells;
    out
}

/// Groups objects by canonical id, keeping the freshest observation.
pub fn dedup_freshest(objects: Vec<RoadObject>) -> Vec<RoadObject> {
    let mut by_id: HashMap<ObjectId, RoadObject> = HashMap::new();
    let mut order = Vec::new();
    for o in objects {
        match by_id.get(&o.object_id) {
            Some(prev) if prev.last_update >= o.last_update => {}
            Some(_) => {
                by_id.insert(o.object_id, o);
            }
            None => {
                order.push(o.object_id);
                by_id.insert(o.object_id, o);
            }
        }
    }
    order.into_iter().filter_map(|id| by_id.remove(&id)).collect()
}

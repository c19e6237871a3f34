//! Fusion of received objects, grid path search, and conflict-aware
//! trajectory generation for a single vehicle.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{dist, Cell, OrientedRect, Point2, RigidTransform, Trajectory, VehicleId, Waypoint};
use crate::spatial::{dedup_freshest, CellClass, OccupancyGrid, RoadObject};
use crate::world::{dir, Command, Footprint, Route};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Own,
    Received { sender: VehicleId },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedObject {
    pub object: RoadObject,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedView {
    pub grid: OccupancyGrid,
    pub objects: Vec<FusedObject>,
}

/// Re-expresses an object through a rigid transform, keeping its identity.
pub fn transform_object(obj: &RoadObject, t: &RigidTransform, frame: &str) -> Result<RoadObject> {
    let cloud = crate::geometry::apply_transform(t, &obj.cloud, frame)?;
    let mut out = RoadObject::from_points(obj.owner, cloud, obj.cell_size, obj.last_update);
    let v = t.apply_vector([obj.velocity[0], obj.velocity[1], 0.0]);
    out.object_id = obj.object_id;
    out.velocity = [v[0], v[1]];
    out.heading = crate::geometry::normalize_angle(obj.heading + t.yaw());
    out.track = obj.track;
    Ok(out)
}

/// Inserts received objects, each mapped by `T_r^-1 * T_s`, into the receiver's
/// grid and object list. Objects sharing a canonical id are kept once, freshest first.
pub fn fuse_received(
    mut grid: OccupancyGrid,
    own: Vec<RoadObject>,
    received: &[(VehicleId, RoadObject, RigidTransform)],
    receiver_to_map: &RigidTransform,
    frame: &str,
) -> Result<FusedView> {
    let mut all: Vec<(RoadObject, Provenance)> = own.into_iter().map(|o| (o, Provenance::Own)).collect();
    for (sender, obj, sender_to_map) in received {
        let t = RigidTransform::between(sender_to_map, receiver_to_map);
        let moved = transform_object(obj, &t, frame)?;
        for p in &moved.cloud.points {
            grid.mark_above_ground([p[0], p[1]]);
        }
        all.push((moved, Provenance::Received { sender: *sender }));
    }
    let provenance: Vec<_> = all.iter().map(|(o, p)| (o.object_id, o.last_update, o.owner, *p)).collect();
    let kept = dedup_freshest(all.into_iter().map(|(o, _)| o).collect());
    let objects = kept
        .into_iter()
        .map(|o| {
            let p = provenance
                .iter()
                .find(|(id, ts, owner, _)| *id == o.object_id && *ts == o.last_update && *owner == o.owner)
                .map_or(Provenance::Own, |x| x.3);
            FusedObject { object: o, provenance: p }
        })
        .collect();
    Ok(FusedView { grid, objects })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub points: Vec<Point2>,
    pub width: f64,
}

impl Path {
    pub fn to_route(&self) -> Option<Route> {
        Route::new(self.points.clone()).ok()
    }
}

/// Largest heading change per grid step for a speed (m/s), in radians.
pub fn curvature_bound(speed: f64) -> f64 {
    if speed < 6.0 {
        2.0 * FRAC_PI_4
    } else {
        FRAC_PI_4
    }
}

const MOVES: [(i64, i64); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

#[derive(PartialEq)]
struct Node {
    f: f64,
    g: f64,
    state: usize,
}

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| self.g.total_cmp(&other.g)).then_with(|| other.state.cmp(&self.state))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A* over grid cells with 8-connected moves. A cell is usable when every cell
/// within `width / 2` of its centre is drivable and not above-ground occupied,
/// and the cell allows travel in the move's direction. Heading changes between
/// consecutive moves are limited to `max_turn` radians. `None` when no path exists
/// within `max_expansions`.
pub fn plan_path(grid: &OccupancyGrid, src: Cell, dst: Cell, width: f64, max_turn: f64, max_expansions: usize) -> Option<Path> {
    let spec = &grid.spec;
    let cs = spec.cell_size;
    let reach = ((width / 2.0) / cs).ceil() as i64;
    let mut offsets = Vec::new();
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            if ((dx * dx + dy * dy) as f64).sqrt() * cs <= width / 2.0 + 1e-9 {
                offsets.push((dx, dy));
            }
        }
    }
    let free = |x: i64, y: i64| -> bool {
        offsets.iter().all(|(dx, dy)| {
            let (cx, cy) = (x + dx, y + dy);
            if cx < 0 || cy < 0 || cx >= spec.width as i64 || cy >= spec.height as i64 {
                return false;
            }
            let i = cy as usize * spec.width + cx as usize;
            grid.road[i] != 0 && grid.cells[i] != CellClass::AboveGround
        })
    };
    if !free(src.ix as i64, src.iy as i64) || !free(dst.ix as i64, dst.iy as i64) {
        return None;
    }
    let max_steps = ((max_turn + 1e-9) / FRAC_PI_4).floor() as i64;
    let n_cells = spec.len();
    // state = cell * 9 + heading (8 = none yet)
    let mut g_best = vec![f64::INFINITY; n_cells * 9];
    let mut parent = vec![usize::MAX; n_cells * 9];
    let goal = spec.cell_center(dst);
    let h = |c: usize| dist(spec.cell_center(spec.cell_of_linear(c)), goal);
    let start = spec.linear(src) * 9 + 8;
    g_best[start] = 0.0;
    let mut open = BinaryHeap::new();
    open.push(Node { f: h(spec.linear(src)), g: 0.0, state: start });
    let mut expansions = 0;
    while let Some(Node { g, state, .. }) = open.pop() {
        if g > g_best[state] {
            continue;
        }
        let (cell, heading) = (state / 9, state % 9);
        if cell == spec.linear(dst) {
            let mut cells = vec![cell];
            let mut s = state;
            while parent[s] != usize::MAX {
                s = parent[s];
                cells.push(s / 9);
            }
            cells.reverse();
            let points = cells.into_iter().map(|c| spec.cell_center(spec.cell_of_linear(c))).collect();
            return Some(Path { points, width });
        }
        expansions += 1;
        if expansions > max_expansions {
            return None;
        }
        let c = spec.cell_of_linear(cell);
        for (m, (dx, dy)) in MOVES.iter().enumerate() {
            if heading != 8 {
                let diff = (m as i64 - heading as i64).rem_euclid(8);
                if diff.min(8 - diff) > max_steps {
                    continue;
                }
            }
            let (nx, ny) = (c.ix as i64 + dx, c.iy as i64 + dy);
            if !free(nx, ny) {
                continue;
            }
            let ni = ny as usize * spec.width + nx as usize;
            // diagonal moves need either component direction allowed
            let mut bits = 0;
            if *dx != 0 {
                bits |= if *dx > 0 { dir::EAST } else { dir::WEST };
            }
            if *dy != 0 {
                bits |= if *dy > 0 { dir::NORTH } else { dir::SOUTH };
            }
            if grid.road[ni] & bits == 0 {
                continue;
            }
            let step = if dx.abs() + dy.abs() == 2 { std::f64::consts::SQRT_2 } else { 1.0 } * cs;
            let ns = ni * 9 + m;
            let ng = g + step;
            if ng < g_best[ns] {
                g_best[ns] = ng;
                parent[ns] = state;
                open.push(Node { f: ng + h(ni), g: ng, state: ns });
            }
        }
    }
    None
}

/// `v^2 / (2a)`.
pub fn stopping_distance(v: f64, a: f64) -> f64 {
    v * v / (2.0 * a)
}

/// Longitudinal profile: reach `target` from `v0` at constant acceleration
/// (or deceleration), then hold it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedProfile {
    pub v0: f64,
    pub target: f64,
    pub accel: f64,
    pub decel: f64,
}

impl SpeedProfile {
    /// Speed after travelling `s` metres.
    pub fn speed_at(&self, s: f64) -> f64 {
        if self.target >= self.v0 {
            (self.v0 * self.v0 + 2.0 * self.accel * s).sqrt().min(self.target)
        } else {
            (self.v0 * self.v0 - 2.0 * self.decel * s).max(self.target * self.target).sqrt()
        }
    }

    /// Seconds to travel `s` metres; infinite if the profile never gets there.
    pub fn time_at(&self, s: f64) -> f64 {
        let s = s.max(0.0);
        let a = if self.target >= self.v0 { self.accel } else { -self.decel };
        let ramp = if a == 0.0 { 0.0 } else { (self.target * self.target - self.v0 * self.v0) / (2.0 * a) };
        if s <= ramp {
            let v = self.speed_at(s);
            (v - self.v0) / a
        } else {
            let t_ramp = if a == 0.0 { 0.0 } else { (self.target - self.v0) / a };
            if self.target <= 0.0 {
                f64::INFINITY
            } else {
                t_ramp + (s - ramp) / self.target
            }
        }
    }
}

/// An object reduced to sample points moving at constant velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectTrack {
    pub points: Vec<Point2>,
    pub velocity: Point2,
    /// Time (ms) at which `points` hold.
    pub t0: u64,
}

impl ObjectTrack {
    pub fn from_object(o: &RoadObject) -> Self {
        Self { points: o.cell_centers().collect(), velocity: o.velocity, t0: o.last_update }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConflictParams {
    /// Inflation of the ego footprint (m).
    pub margin: f64,
    /// Widening of the ego occupancy window on both sides (s).
    pub time_buffer: f64,
}

impl Default for ConflictParams {
    fn default() -> Self {
        Self { margin: 0.5, time_buffer: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conflict {
    /// Waypoint whose occupancy window overlaps an object's.
    pub waypoint: usize,
    /// Midpoint of the overlapping window (ms).
    pub time_ms: f64,
    /// First waypoint of the contiguous run sharing space with that object.
    pub zone_entry: usize,
    /// Arc length from the trajectory start to `zone_entry`.
    pub entry_distance: f64,
}

struct ArcTable {
    arc: Vec<f64>,
    times: Vec<f64>,
}

impl ArcTable {
    fn new(traj: &Trajectory) -> Self {
        let mut arc = vec![0.0];
        for w in traj.waypoints.windows(2) {
            arc.push(arc.last().unwrap() + dist(w[0].xy(), w[1].xy()));
        }
        Self { arc, times: traj.waypoints.iter().map(|w| w.timestamp as f64).collect() }
    }

    /// First time the trajectory reaches arc length `d`.
    fn enter(&self, d: f64) -> f64 {
        if d <= 0.0 {
            return self.times[0];
        }
        let i = self.arc.partition_point(|a| *a < d);
        if i >= self.arc.len() {
            return f64::INFINITY;
        }
        let (a0, a1) = (self.arc[i - 1], self.arc[i]);
        self.times[i - 1] + (self.times[i] - self.times[i - 1]) * (d - a0) / (a1 - a0)
    }

    /// Last time the trajectory is at or before arc length `d`.
    fn leave(&self, d: f64) -> f64 {
        let i = self.arc.partition_point(|a| *a <= d);
        if i >= self.arc.len() {
            return f64::INFINITY;
        }
        if i == 0 {
            return self.times[0];
        }
        let (a0, a1) = (self.arc[i - 1], self.arc[i]);
        self.times[i - 1] + (self.times[i] - self.times[i - 1]) * (d - a0) / (a1 - a0)
    }
}

fn waypoint_headings(traj: &Trajectory) -> Vec<f64> {
    let w = &traj.waypoints;
    let n = w.len();
    let mut out = vec![f64::NAN; n];
    // direction towards the next distinct waypoint
    let mut ahead = f64::NAN;
    for i in (0..n.saturating_sub(1)).rev() {
        if dist(w[i].xy(), w[i + 1].xy()) > 1e-9 {
            ahead = (w[i + 1].y - w[i].y).atan2(w[i + 1].x - w[i].x);
        }
        out[i] = ahead;
    }
    // stationary tails keep the last travelled direction
    let mut last = out.iter().copied().find(|h| !h.is_nan()).unwrap_or(0.0);
    for h in out.iter_mut() {
        if h.is_nan() {
            *h = last;
        } else {
            last = *h;
        }
    }
    out
}

/// Absolute window (ms) during which any of the track's points is inside `rect`.
fn object_window(rect: &OrientedRect, track: &ObjectTrack, from_ms: f64, to_ms: f64) -> Option<(f64, f64)> {
    let span = (to_ms - from_ms) / 1000.0;
    if span < 0.0 {
        return None;
    }
    let lead = (from_ms - track.t0 as f64) / 1000.0;
    let mut win: Option<(f64, f64)> = None;
    for p in &track.points {
        let start = [p[0] + track.velocity[0] * lead, p[1] + track.velocity[1] * lead];
        if let Some((a, b)) = rect.crossing_window(start, track.velocity, span) {
            let (a, b) = (from_ms + a * 1000.0, from_ms + b * 1000.0);
            win = Some(win.map_or((a, b), |(x, y)| (x.min(a), y.max(b))));
        }
    }
    win
}

/// Earliest waypoint of `ego` whose occupancy window (footprint inflated by the
/// margin, widened by the time buffer) overlaps a track's predicted occupancy.
pub fn predict_collision(ego: &Trajectory, footprint: Footprint, tracks: &[ObjectTrack], params: &ConflictParams) -> Option<Conflict> {
    if ego.is_empty() || tracks.is_empty() {
        return None;
    }
    let table = ArcTable::new(ego);
    let headings = waypoint_headings(ego);
    let t_start = table.times[0];
    let t_end = *table.times.last().unwrap();
    let half = footprint.length / 2.0 + params.margin;
    let buffer = params.time_buffer * 1000.0;
    let reach = table.arc.last().unwrap() + footprint.length + 2.0 * params.margin;
    let rects: Vec<OrientedRect> = ego
        .waypoints
        .iter()
        .zip(&headings)
        .map(|(w, h)| OrientedRect::new(w.xy(), *h, footprint.length, footprint.width).inflated(params.margin))
        .collect();
    let origin = ego.waypoints[0].xy();
    let horizon_s = (t_end - t_start) / 1000.0;
    let mut best: Option<Conflict> = None;
    for track in tracks {
        let speed = track.velocity[0].hypot(track.velocity[1]);
        let lead = (t_start - track.t0 as f64) / 1000.0;
        let near = track.points.iter().any(|p| {
            let q = [p[0] + track.velocity[0] * lead, p[1] + track.velocity[1] * lead];
            dist(q, origin) <= reach + speed * horizon_s
        });
        if !near {
            continue;
        }
        let spatial: Vec<Option<(f64, f64)>> = rects.iter().map(|r| object_window(r, track, t_start, t_end)).collect();
        for (k, win) in spatial.iter().enumerate() {
            if best.is_some_and(|b| b.waypoint <= k) {
                break;
            }
            let Some((oa, ob)) = *win else { continue };
            let ea = table.enter(table.arc[k] - half) - buffer;
            let eb = table.leave(table.arc[k] + half) + buffer;
            let (lo, hi) = (ea.max(oa), eb.min(ob));
            if lo <= hi {
                let mut entry = k;
                while entry > 0 && spatial[entry - 1].is_some() {
                    entry -= 1;
                }
                let time_ms = if hi.is_finite() { 0.5 * (lo + hi) } else { lo };
                best = Some(Conflict { waypoint: k, time_ms, zone_entry: entry, entry_distance: table.arc[entry] });
                break;
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerParams {
    pub spacing: f64,
    pub horizon_s: f64,
    pub cruise_speed: f64,
    pub accel: f64,
    pub decel: f64,
    /// Gap kept before the first waypoint of a conflict zone (m).
    pub stop_margin: f64,
    pub conflict: ConflictParams,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            spacing: 2.0,
            horizon_s: 10.0,
            cruise_speed: 30.0 / 3.6,
            accel: 2.5,
            decel: 6.0,
            stop_margin: 2.0,
            conflict: ConflictParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedTrajectory {
    /// Unconstrained trajectory along the path.
    pub free_flow: Trajectory,
    /// Trajectory after braking for the first conflict, if any.
    pub trajectory: Trajectory,
    pub conflict: Option<Conflict>,
    /// Arc length (from the current position) at which to be stopped.
    pub stop_at: Option<f64>,
}

/// Timed waypoints every `spacing` metres along `route` from `progress`,
/// following `profile`, until `horizon_s`.
pub fn free_flow_trajectory(route: &Route, progress: f64, profile: &SpeedProfile, spacing: f64, horizon_s: f64, now: u64) -> Trajectory {
    let mut wps: Vec<Waypoint> = Vec::new();
    let mut k = 0usize;
    loop {
        let s = k as f64 * spacing;
        let t = profile.time_at(s);
        if !t.is_finite() || t > horizon_s {
            break;
        }
        let (p, _) = route.sample(progress + s);
        let ts = now + (t * 1000.0).round() as u64;
        if wps.last().is_none_or(|w| ts > w.timestamp) {
            wps.push(Waypoint::new(p[0], p[1], ts));
        }
        k += 1;
    }
    if wps.len() == 1 {
        let (p, _) = route.sample(progress);
        wps.push(Waypoint::new(p[0], p[1], now + (horizon_s * 1000.0) as u64));
    }
    Trajectory { waypoints: wps }
}

/// Speed-limited trajectory that stops at arc length `stop_at`.
fn braking_trajectory(route: &Route, progress: f64, profile: &SpeedProfile, p: &PlannerParams, stop_at: f64, now: u64) -> Trajectory {
    let v_at = |s: f64| profile.speed_at(s).min((2.0 * p.decel * (stop_at - s).max(0.0)).sqrt());
    let mut wps = vec![{
        let (q, _) = route.sample(progress);
        Waypoint::new(q[0], q[1], now)
    }];
    let mut t = 0.0;
    let mut s = 0.0;
    while s < stop_at {
        let next = (s + p.spacing).min(stop_at);
        let (va, vb) = (v_at(s), v_at(next));
        if va + vb <= 1e-9 {
            break;
        }
        t += 2.0 * (next - s) / (va + vb);
        if t > p.horizon_s {
            break;
        }
        s = next;
        let (q, _) = route.sample(progress + s);
        let ts = now + (t * 1000.0).round() as u64;
        if ts > wps.last().unwrap().timestamp {
            wps.push(Waypoint::new(q[0], q[1], ts));
        }
    }
    let end = now + (p.horizon_s * 1000.0) as u64;
    let last = *wps.last().unwrap();
    if end > last.timestamp {
        wps.push(Waypoint::new(last.x, last.y, end));
    }
    Trajectory { waypoints: wps }
}

/// Free-flow trajectory, conflict check against `tracks`, and a braking
/// trajectory ending before the conflict zone when needed.
pub fn plan_trajectory(
    route: &Route,
    progress: f64,
    speed: f64,
    footprint: Footprint,
    tracks: &[ObjectTrack],
    params: &PlannerParams,
    now: u64,
) -> PlannedTrajectory {
    let profile = SpeedProfile { v0: speed, target: params.cruise_speed, accel: params.accel, decel: params.decel };
    let free_flow = free_flow_trajectory(route, progress, &profile, params.spacing, params.horizon_s, now);
    let conflict = predict_collision(&free_flow, footprint, tracks, &params.conflict);
    match conflict {
        None => PlannedTrajectory { trajectory: free_flow.clone(), free_flow, conflict, stop_at: None },
        Some(c) => {
            let stop_at = (c.entry_distance - params.stop_margin).max(0.0);
            let trajectory = braking_trajectory(route, progress, &profile, params, stop_at, now);
            PlannedTrajectory { free_flow, trajectory, conflict, stop_at: Some(stop_at) }
        }
    }
}

/// Longitudinal command: cruise until the stop point is within stopping
/// distance (plus `lookahead` metres), then brake to halt at it.
pub fn control_command(speed: f64, stop_in: Option<f64>, cruise_speed: f64, decel: f64, lookahead: f64) -> Command {
    match stop_in {
        Some(d) if d <= stopping_distance(speed, decel) + lookahead => {
            if d <= 0.05 {
                Command::Brake { decel: f64::INFINITY }
            } else {
                Command::Brake { decel: speed * speed / (2.0 * d) }
            }
        }
        _ => Command::Cruise { target_speed: cruise_speed },
    }
}

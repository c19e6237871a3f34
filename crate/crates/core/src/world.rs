//! Ground-truth world: lane routes, vehicle kinematics and bird's-eye LiDAR synthesis.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    angular_interval, dist, grid_index, norm, ray_polygon_entry, sub, GridSpec, OrientedRect, Point2, Point3,
    PointCloud, Pose, RigidTransform, VehicleId,
};

/// Direction bits for road cells.
pub mod dir {
    pub const NORTH: u8 = 1;
    pub const EAST: u8 = 2;
    pub const SOUTH: u8 = 4;
    pub const WEST: u8 = 8;
    pub const ANY: u8 = NORTH | EAST | SOUTH | WEST;
}

/// Compass bit for a heading (east = 0 rad).
pub fn heading_bit(heading: f64) -> u8 {
    let a = crate::geometry::normalize_angle(heading);
    if (-PI / 4.0..PI / 4.0).contains(&a) {
        dir::EAST
    } else if (PI / 4.0..3.0 * PI / 4.0).contains(&a) {
        dir::NORTH
    } else if (-3.0 * PI / 4.0..-PI / 4.0).contains(&a) {
        dir::SOUTH
    } else {
        dir::WEST
    }
}

/// Drivability and allowed travel directions over a map-frame lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadMask {
    pub spec: GridSpec,
    /// Per cell: 0 = not drivable, otherwise a set of `dir` bits.
    pub flags: Vec<u8>,
}

impl RoadMask {
    pub fn new(spec: GridSpec) -> Self {
        Self { flags: vec![0; spec.len()], spec }
    }

    /// Everything drivable in every direction.
    pub fn open(spec: GridSpec) -> Self {
        Self { flags: vec![dir::ANY; spec.len()], spec }
    }

    /// Marks an axis-aligned box `[min, max]` with `bits` (OR-ed).
    pub fn paint_box(&mut self, min: Point2, max: Point2, bits: u8) {
        let cs = self.spec.cell_size;
        let x0 = (((min[0] - self.spec.origin[0]) / cs).floor().max(0.0)) as usize;
        let y0 = (((min[1] - self.spec.origin[1]) / cs).floor().max(0.0)) as usize;
        let x1 = (((max[0] - self.spec.origin[0]) / cs).ceil().max(0.0) as usize).min(self.spec.width);
        let y1 = (((max[1] - self.spec.origin[1]) / cs).ceil().max(0.0) as usize).min(self.spec.height);
        for iy in y0..y1 {
            for ix in x0..x1 {
                self.flags[iy * self.spec.width + ix] |= bits;
            }
        }
    }

    pub fn flags_at(&self, p: Point2) -> u8 {
        grid_index(p, &self.spec).map_or(0, |c| self.flags[self.spec.linear(c)])
    }

    pub fn is_drivable(&self, p: Point2) -> bool {
        self.flags_at(p) != 0
    }
}

/// Polyline lane path with arc-length parameterisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub points: Vec<Point2>,
    cumulative: Vec<f64>,
}

impl Route {
    pub fn new(points: Vec<Point2>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidConfig("route needs at least two points".into()));
        }
        let mut cumulative = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in points.windows(2) {
            acc += dist(w[0], w[1]);
            cumulative.push(acc);
        }
        Ok(Self { points, cumulative })
    }

    /// Straight segment followed by a circular arc (positive `turn` = left) and an exit leg.
    pub fn with_arc(start: Point2, heading: f64, straight: f64, radius: f64, turn: f64, exit: f64) -> Result<Self> {
        let (s, c) = heading.sin_cos();
        let mut pts = vec![start];
        let p1 = [start[0] + c * straight, start[1] + s * straight];
        pts.push(p1);
        let side = turn.signum();
        let center = [p1[0] - s * radius * side, p1[1] + c * radius * side];
        let steps = ((turn.abs() * radius) / 0.5).ceil().max(1.0) as usize;
        let start_ang = (p1[1] - center[1]).atan2(p1[0] - center[0]);
        for k in 1..=steps {
            let a = start_ang + turn * k as f64 / steps as f64;
            pts.push([center[0] + radius * a.cos(), center[1] + radius * a.sin()]);
        }
        let h2 = heading + turn;
        let last = *pts.last().unwrap();
        pts.push([last[0] + h2.cos() * exit, last[1] + h2.sin() * exit]);
        Self::new(pts)
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Position and tangent heading at arc length `s` (clamped; the last segment
    /// is extended linearly beyond the end).
    pub fn sample(&self, s: f64) -> (Point2, f64) {
        let s = s.max(0.0);
        let i = self.cumulative.partition_point(|c| *c <= s).clamp(1, self.points.len() - 1);
        let (a, b) = (self.points[i - 1], self.points[i]);
        let seg = self.cumulative[i] - self.cumulative[i - 1];
        let f = if seg > 0.0 { (s - self.cumulative[i - 1]) / seg } else { 0.0 };
        let heading = (b[1] - a[1]).atan2(b[0] - a[0]);
        ([a[0] + (b[0] - a[0]) * f, a[1] + (b[1] - a[1]) * f], heading)
    }

    /// Arc length of the closest point and its unsigned lateral offset.
    pub fn project(&self, p: Point2) -> (f64, f64) {
        let mut best = (0.0, f64::INFINITY);
        for (i, w) in self.points.windows(2).enumerate() {
            let ab = sub(w[1], w[0]);
            let len2 = ab[0] * ab[0] + ab[1] * ab[1];
            let t = if len2 > 0.0 { (((p[0] - w[0][0]) * ab[0] + (p[1] - w[0][1]) * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let q = [w[0][0] + ab[0] * t, w[0][1] + ab[1] * t];
            let d = dist(p, q);
            if d < best.1 {
                best = (self.cumulative[i] + t * len2.sqrt(), d);
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Ego,
    Collider,
    Occluder,
    Background,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    /// Takes part in metadata exchange and sharing.
    Cooperative,
    Passive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub length: f64,
    pub width: f64,
}

impl Footprint {
    pub const CAR: Footprint = Footprint { length: 4.5, width: 1.8 };
    pub const TRUCK: Footprint = Footprint { length: 10.0, width: 2.6 };
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub id: VehicleId,
    pub pose: Pose,
    pub speed: f64,
    pub footprint: Footprint,
    pub role: Role,
    pub capability: Capability,
    pub route: Arc<Route>,
    /// Arc length travelled along `route`.
    pub progress: f64,
}

impl VehicleState {
    pub fn new(
        id: VehicleId,
        route: Arc<Route>,
        progress: f64,
        speed: f64,
        footprint: Footprint,
        role: Role,
        capability: Capability,
    ) -> Result<Self> {
        if speed < 0.0 || footprint.length <= 0.0 || footprint.width <= 0.0 {
            return Err(Error::InvalidConfig(format!("vehicle {id}: negative speed or empty footprint")));
        }
        let (p, h) = route.sample(progress);
        Ok(Self { id, pose: Pose::new(p[0], p[1], 0.0, h, 0), speed, footprint, role, capability, route, progress })
    }

    pub fn rect(&self) -> OrientedRect {
        OrientedRect::new(self.pose.xy(), self.pose.heading, self.footprint.length, self.footprint.width)
    }

    pub fn is_cooperative(&self) -> bool {
        self.capability == Capability::Cooperative
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Command {
    /// Track a target speed within the acceleration limits.
    Cruise { target_speed: f64 },
    /// Decelerate at the given rate (clamped to the braking limit).
    Brake { decel: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicLimits {
    pub max_accel: f64,
    pub max_brake: f64,
}

impl Default for KinematicLimits {
    fn default() -> Self {
        Self { max_accel: 2.5, max_brake: 6.0 }
    }
}

/// Longitudinal point-mass update along the vehicle's route.
pub fn step_vehicle(v: &VehicleState, command: Command, dt_ms: u64, limits: &KinematicLimits) -> VehicleState {
    assert!(dt_ms > 0, "dt must be positive");
    let dt = dt_ms as f64 / 1000.0;
    let v0 = v.speed;
    let v1 = match command {
        Command::Cruise { target_speed } => {
            if target_speed >= v0 {
                (v0 + limits.max_accel * dt).min(target_speed)
            } else {
                (v0 - limits.max_brake * dt).max(target_speed)
            }
        }
        Command::Brake { decel } => v0 - decel.clamp(0.0, limits.max_brake) * dt,
    }
    .max(0.0);
    // Exact distance for a constant-deceleration stop inside the step.
    let travelled = if v1 == 0.0 && v0 > 0.0 {
        let a = match command {
            Command::Brake { decel } => decel.clamp(0.0, limits.max_brake),
            Command::Cruise { .. } => limits.max_brake,
        };
        if a > 0.0 { (v0 * v0 / (2.0 * a)).min(v0 * dt) } else { 0.0 }
    } else {
        0.5 * (v0 + v1) * dt
    };
    let progress = v.progress + travelled;
    let (p, h) = v.route.sample(progress);
    VehicleState {
        pose: Pose::new(p[0], p[1], v.pose.z, h, v.pose.timestamp + dt_ms),
        speed: v1,
        progress,
        ..v.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub range: f64,
    pub angular_resolution: f64,
    /// Returns generated per ray hit (stands in for vertical beam density).
    pub points_per_hit: u32,
    pub mount_height: f64,
    /// Spacing of ground returns along each ray; `None` disables ground returns.
    pub ground_step: Option<f64>,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self { range: 100.0, angular_resolution: 0.0030, points_per_hit: 1, mount_height: 1.8, ground_step: Some(2.0) }
    }
}

impl SensorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.range > 0.0 && self.angular_resolution > 0.0) {
            return Err(Error::InvalidConfig("sensor range and angular resolution must be positive".into()));
        }
        if matches!(self.ground_step, Some(s) if s <= 0.0) {
            return Err(Error::InvalidConfig("ground_step must be positive".into()));
        }
        Ok(())
    }

    pub fn ray_count(&self) -> usize {
        (2.0 * PI / self.angular_resolution).round() as usize
    }

    /// Sensor-to-map transform for a vehicle pose.
    pub fn sensor_transform(&self, pose: &Pose) -> RigidTransform {
        RigidTransform::from_xyz_yaw(pose.x, pose.y, self.mount_height, pose.heading)
    }
}

/// Lowest and highest z (above the road) of synthetic returns from solid objects.
pub const HIT_BAND: (f64, f64) = (0.5, 1.5);

#[derive(Debug, Clone)]
pub struct World {
    pub vehicles: Vec<VehicleState>,
    pub road: Arc<RoadMask>,
    /// Static convex obstacles (buildings, walls) known from the map.
    pub structures: Vec<Vec<Point2>>,
    pub clock_ms: u64,
}

impl World {
    pub fn new(vehicles: Vec<VehicleState>, road: Arc<RoadMask>, structures: Vec<Vec<Point2>>) -> Result<Self> {
        let mut ids: Vec<_> = vehicles.iter().map(|v| v.id).collect();
        ids.sort();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("duplicate vehicle id".into()));
        }
        Ok(Self { vehicles, road, structures, clock_ms: 0 })
    }

    pub fn vehicle(&self, id: VehicleId) -> Option<&VehicleState> {
        self.vehicles.iter().find(|v| v.id == id)
    }

    /// Applies one command per vehicle (in `vehicles` order) and advances the clock.
    pub fn step(&mut self, commands: &[Command], dt_ms: u64, limits: &KinematicLimits) {
        for (v, c) in self.vehicles.iter_mut().zip(commands) {
            *v = step_vehicle(v, *c, dt_ms, limits);
        }
        self.clock_ms += dt_ms;
    }
}

/// First-hit returns along evenly spaced horizontal rays from the observer,
/// expressed in the observer's sensor frame.
pub fn sense_lidar(world: &World, observer: &VehicleState, spec: &SensorSpec) -> PointCloud {
    let origin = observer.pose.xy();
    let n = spec.ray_count();
    let res = 2.0 * PI / n as f64;
    let mut hit = vec![f64::INFINITY; n];

    let vehicle_polys = world
        .vehicles
        .iter()
        .filter(|v| v.id != observer.id)
        .map(|v| v.rect().corners().to_vec());
    for poly in vehicle_polys.chain(world.structures.iter().cloned()) {
        let near = poly.iter().map(|p| dist(*p, origin)).fold(f64::INFINITY, f64::min);
        let far_reach = crate::geometry::point_in_convex(origin, &poly);
        if near > spec.range + 50.0 && !far_reach {
            continue;
        }
        let Some((lo, hi)) = angular_interval(origin, &poly) else { continue };
        let k0 = (lo / res).ceil() as i64;
        let k1 = (hi / res).floor() as i64;
        for k in k0..=k1 {
            let idx = k.rem_euclid(n as i64) as usize;
            let a = idx as f64 * res;
            let d = [a.cos(), a.sin()];
            if let Some(s) = ray_polygon_entry(origin, d, &poly) {
                if s < hit[idx] {
                    hit[idx] = s;
                }
            }
        }
    }

    let to_sensor = spec.sensor_transform(&observer.pose).inverse();
    let pph = spec.points_per_hit.max(1);
    let mut points: Vec<Point3> = Vec::new();
    for (idx, h) in hit.iter().enumerate() {
        let a = idx as f64 * res;
        let d = [a.cos(), a.sin()];
        let reach = h.min(spec.range);
        if let Some(step) = spec.ground_step {
            let mut s = step;
            while s < reach {
                let p = [origin[0] + d[0] * s, origin[1] + d[1] * s];
                if world.road.is_drivable(p) {
                    points.push(to_sensor.apply_point([p[0], p[1], 0.0]));
                }
                s += step;
            }
        }
        if *h <= spec.range {
            let p = [origin[0] + d[0] * h, origin[1] + d[1] * h];
            for i in 0..spec.points_per_hit {
                let z = HIT_BAND.0 + (HIT_BAND.1 - HIT_BAND.0) * (i as f64 + 0.5) / pph as f64;
                points.push(to_sensor.apply_point([p[0], p[1], z]));
            }
        }
    }
    PointCloud::new(points, format!("vehicle:{}", observer.id))
}

/// Minimum distance between two placed footprints; 0 when they overlap.
pub fn min_distance(a: &OrientedRect, b: &OrientedRect) -> f64 {
    a.distance(b)
}

/// Straight-line helper used by scenario fixtures.
pub fn heading_of(a: Point2, b: Point2) -> f64 {
    let d = sub(b, a);
    if norm(d) == 0.0 {
        0.0
    } else {
        d[1].atan2(d[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight(len: f64) -> Arc<Route> {
        Arc::new(Route::new(vec![[0.0, 0.0], [len, 0.0]]).unwrap())
    }

    fn car(id: u32, x: f64, speed: f64) -> VehicleState {
        VehicleState::new(VehicleId(id), straight(1000.0), x, speed, Footprint::CAR, Role::Background, Capability::Cooperative)
            .unwrap()
    }

    fn open_world(vehicles: Vec<VehicleState>) -> World {
        let spec = GridSpec::new([-200.0, -200.0], 0.5, 800, 800).unwrap();
        World::new(vehicles, Arc::new(RoadMask::open(spec)), vec![]).unwrap()
    }

    #[test]
    fn cruise_advances_v_dt() {
        let v = car(1, 0.0, 10.0);
        let n = step_vehicle(&v, Command::Cruise { target_speed: 10.0 }, 100, &KinematicLimits::default());
        assert!((n.progress - 1.0).abs() < 1e-12);
        assert!((n.pose.x - 1.0).abs() < 1e-12);
        assert_eq!(n.pose.timestamp, 100);
    }

    #[test]
    fn brake_reduces_speed() {
        let v = car(1, 0.0, 10.0);
        let n = step_vehicle(&v, Command::Brake { decel: 6.0 }, 100, &KinematicLimits::default());
        assert!((n.speed - 9.4).abs() < 1e-12);
        let s = step_vehicle(&car(1, 0.0, 0.0), Command::Brake { decel: 6.0 }, 100, &KinematicLimits::default());
        assert_eq!(s.speed, 0.0);
        assert_eq!(s.progress, 0.0);
    }

    #[test]
    fn empty_world_gives_ground_only() {
        let obs = car(1, 0.0, 0.0);
        let w = open_world(vec![obs.clone()]);
        let cloud = sense_lidar(&w, &obs, &SensorSpec::default());
        assert!(!cloud.is_empty());
        let mount = SensorSpec::default().mount_height;
        assert!(cloud.points.iter().all(|p| (p[2] + mount).abs() < 1e-9));
    }

    fn hits_on(cloud: &PointCloud) -> usize {
        let mount = SensorSpec::default().mount_height;
        cloud.points.iter().filter(|p| p[2] + mount > 0.2).count()
    }

    #[test]
    fn point_count_halves_with_double_distance() {
        let spec = SensorSpec { ground_step: None, ..Default::default() };
        let obs = car(1, 0.0, 0.0);
        // Object 2 m wide seen broadside: a car rotated 90 degrees is 1.8 wide, so use a
        // square 2x2 footprint to make the subtended width explicit.
        let mk = |x: f64| {
            let mut v = car(2, x, 0.0);
            v.footprint = Footprint { length: 0.01, width: 2.0 };
            v
        };
        let near = sense_lidar(&open_world(vec![obs.clone(), mk(10.0)]), &obs, &spec);
        let far = sense_lidar(&open_world(vec![obs.clone(), mk(20.0)]), &obs, &spec);
        let (a, b) = (hits_on(&near) as f64, hits_on(&far) as f64);
        // 2*atan(1/10)/0.003 = 66.4 rays vs 2*atan(1/20)/0.003 = 33.3 rays
        assert!((a - 66.0).abs() <= 1.0, "near {a}");
        assert!((b - 33.0).abs() <= 1.0, "far {b}");
    }

    #[test]
    fn target_behind_wider_occluder_is_dark() {
        let spec = SensorSpec { ground_step: None, ..Default::default() };
        let obs = car(1, 0.0, 0.0);
        let mut occ = car(2, 10.0, 0.0);
        occ.footprint = Footprint { length: 1.0, width: 4.0 };
        let target = car(3, 20.0, 0.0);
        let w = open_world(vec![obs.clone(), occ, target.clone()]);
        let cloud = sense_lidar(&w, &obs, &spec);
        let to_map = spec.sensor_transform(&obs.pose);
        let on_target = cloud
            .points
            .iter()
            .map(|p| to_map.apply_point(*p))
            .filter(|p| target.rect().inflated(0.01).contains([p[0], p[1]]))
            .count();
        assert_eq!(on_target, 0);
    }

    #[test]
    fn sensing_is_deterministic() {
        let obs = car(1, 0.0, 0.0);
        let w = open_world(vec![obs.clone(), car(2, 15.0, 3.0)]);
        let s = SensorSpec::default();
        assert_eq!(sense_lidar(&w, &obs, &s), sense_lidar(&w, &obs, &s));
    }

    #[test]
    fn route_arc_and_projection() {
        let r = Route::with_arc([0.0, 0.0], PI / 2.0, 10.0, 10.0, PI / 2.0, 10.0).unwrap();
        let (p, h) = r.sample(0.0);
        assert_eq!(p, [0.0, 0.0]);
        assert!((h - PI / 2.0).abs() < 1e-9);
        let (end, _) = r.sample(r.length());
        assert!((end[0] - -20.0).abs() < 1e-6 && (end[1] - 20.0).abs() < 1e-6);
        let (s, lat) = r.project([1.0, 5.0]);
        assert!((s - 5.0).abs() < 1e-9 && (lat - 1.0).abs() < 1e-9);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let spec = GridSpec::new([0.0, 0.0], 0.5, 2, 2).unwrap();
        assert!(World::new(vec![car(1, 0.0, 0.0), car(1, 5.0, 0.0)], Arc::new(RoadMask::new(spec)), vec![]).is_err());
    }
}

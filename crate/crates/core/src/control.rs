//! Per-interval control messages (trajectory beacon + object map), scheduling
//! domain membership, and repair of lost beacons.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{downsample_trajectory, dist, Point2, Pose, Trajectory, VehicleId, Waypoint};
use crate::spatial::{first_conflict_time, visibility_from, ObjectId, RelevanceMode, RelevanceParams, RoadObject};

/// What a sender knows about one peer when building its object map.
#[derive(Debug, Clone, PartialEq)]
pub struct PeerInfo {
    pub id: VehicleId,
    pub position: Point2,
    pub trajectory: Trajectory,
}

/// Motion summary carried with each entry so receivers can repair stale maps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectKinematics {
    pub centroid: Point2,
    pub velocity: Point2,
    pub radius: f64,
    pub track: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectMapEntry {
    pub object_id: ObjectId,
    pub size_bytes: u64,
    /// Indexed like `ControlMessage::peers`.
    pub visibility: Vec<bool>,
    pub relevance: Vec<f64>,
    pub kinematics: ObjectKinematics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlMessage {
    pub sender: VehicleId,
    pub timestamp: u64,
    pub trajectory: Trajectory,
    /// Peers the object map refers to, ascending.
    pub peers: Vec<VehicleId>,
    pub object_map: Vec<ObjectMapEntry>,
}

impl ControlMessage {
    pub fn peer_index(&self, id: VehicleId) -> Option<usize> {
        self.peers.binary_search(&id).ok()
    }
}

/// Settings shared by message construction and repair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapParams {
    pub sensor_range: f64,
    pub relevance: RelevanceParams,
    /// Douglas-Peucker tolerance for the broadcast trajectory (m).
    pub downsample_tolerance: f64,
    /// Shapes this close to a peer are treated as that peer's own body (m).
    pub self_radius: f64,
    /// Radius of the sender's body when used as an occluder during repair (m).
    pub sender_radius: f64,
}

impl Default for MapParams {
    fn default() -> Self {
        Self {
            sensor_range: 100.0,
            relevance: RelevanceParams::default(),
            downsample_tolerance: 0.2,
            self_radius: 1.0,
            sender_radius: 1.2,
        }
    }
}

fn relevance_value(centroid: Point2, t0: u64, velocity: Point2, peer: &Trajectory, now: u64, p: &RelevanceParams) -> f64 {
    if peer.is_empty() {
        return 0.0;
    }
    match first_conflict_time(centroid, t0, velocity, peer, now, now + p.horizon_ms, p.threshold) {
        None => 0.0,
        Some(t) => match p.mode {
            RelevanceMode::Boolean => 1.0,
            RelevanceMode::Reciprocal => 1.0 / (t - now as f64).max(1.0),
        },
    }
}

fn sorted_peers(sender: VehicleId, peers: &[PeerInfo]) -> Vec<&PeerInfo> {
    let mut v: Vec<&PeerInfo> = peers.iter().filter(|p| p.id != sender).collect();
    v.sort_by_key(|p| p.id);
    v.dedup_by_key(|p| p.id);
    v
}

/// Fills visibility/relevance for `targets` (first shapes) against every peer.
fn fill_map(
    peers: &[&PeerInfo],
    targets: &[(Point2, u64, Point2)],
    shapes: &[&[Point2]],
    now: u64,
    params: &MapParams,
) -> (Vec<Vec<bool>>, Vec<Vec<f64>>) {
    let n = targets.len();
    let mut vis = vec![Vec::with_capacity(peers.len()); n];
    let mut rel = vec![Vec::with_capacity(peers.len()); n];
    for peer in peers {
        let v = visibility_from(peer.position, shapes, n, params.sensor_range, params.self_radius);
        for (k, (c, t0, vel)) in targets.iter().enumerate() {
            vis[k].push(v[k]);
            rel[k].push(relevance_value(*c, *t0, *vel, &peer.trajectory, now, &params.relevance));
        }
    }
    (vis, rel)
}

/// Builds the sender's beacon for this interval. `trajectory` must start at the
/// sender's pose; `occluders` are extra shapes (own footprint, static structures).
pub fn build_control_message(
    sender: VehicleId,
    pose: &Pose,
    trajectory: &Trajectory,
    objects: &[RoadObject],
    peers: &[PeerInfo],
    occluders: &[&[Point2]],
    params: &MapParams,
) -> ControlMessage {
    let now = pose.timestamp;
    let peers = sorted_peers(sender, peers);
    let mut shapes: Vec<&[Point2]> = objects.iter().map(|o| o.hull.as_slice()).collect();
    shapes.extend_from_slice(occluders);
    let targets: Vec<_> = objects.iter().map(|o| (o.centroid, o.last_update, o.velocity)).collect();
    let (vis, rel) = fill_map(&peers, &targets, &shapes, now, params);
    let object_map = objects
        .iter()
        .zip(vis.into_iter().zip(rel))
        .map(|(o, (visibility, relevance))| ObjectMapEntry {
            object_id: o.object_id,
            size_bytes: o.size_bytes,
            visibility,
            relevance,
            kinematics: ObjectKinematics {
                centroid: o.centroid,
                velocity: o.velocity,
                radius: o.radius(),
                track: o.track.unwrap_or(u32::MAX),
            },
        })
        .collect();
    ControlMessage {
        sender,
        timestamp: now,
        trajectory: anchored(downsample_trajectory(trajectory, params.downsample_tolerance), pose.xy(), now),
        peers: peers.iter().map(|p| p.id).collect(),
        object_map,
    }
}

/// Drops waypoints before `now` and pins the first waypoint to `start` at `now`.
fn anchored(traj: Trajectory, start: Point2, now: u64) -> Trajectory {
    let mut wps: Vec<Waypoint> = traj.waypoints.into_iter().filter(|w| w.timestamp > now).collect();
    wps.insert(0, Waypoint::new(start[0], start[1], now));
    Trajectory { waypoints: wps }
}

fn disc(c: Point2, r: f64) -> Vec<Point2> {
    let r = r.max(0.05);
    (0..8)
        .map(|i| {
            let a = i as f64 * std::f64::consts::FRAC_PI_4;
            [c[0] + r * a.cos(), c[1] + r * a.sin()]
        })
        .collect()
}

/// Repairs a stale beacon: evicts past waypoints, extrapolates objects to `now`
/// and recomputes visibility and relevance against the current peers.
pub fn compensate_missing(
    last: &ControlMessage,
    now: u64,
    peers: &[PeerInfo],
    occluders: &[&[Point2]],
    params: &MapParams,
) -> ControlMessage {
    let now = now.max(last.timestamp);
    let dt = (now - last.timestamp) as f64 / 1000.0;
    let traj = &last.trajectory;
    let here = traj
        .position_at(now as f64)
        .or_else(|| traj.waypoints.last().map(|w| w.xy()))
        .unwrap_or([0.0, 0.0]);
    let trajectory = if traj.waypoints.iter().any(|w| w.timestamp >= now) {
        let mut wps: Vec<Waypoint> = traj.waypoints.iter().filter(|w| w.timestamp >= now).copied().collect();
        if wps[0].timestamp > now {
            wps.insert(0, Waypoint::new(here[0], here[1], now));
        }
        Trajectory { waypoints: wps }
    } else {
        Trajectory { waypoints: vec![Waypoint::new(here[0], here[1], now)] }
    };

    let kin: Vec<ObjectKinematics> = last
        .object_map
        .iter()
        .map(|e| {
            let k = e.kinematics;
            ObjectKinematics {
                centroid: [k.centroid[0] + k.velocity[0] * dt, k.centroid[1] + k.velocity[1] * dt],
                ..k
            }
        })
        .collect();
    let peers = sorted_peers(last.sender, peers);
    let mut owned: Vec<Vec<Point2>> = kin.iter().map(|k| disc(k.centroid, k.radius)).collect();
    owned.push(disc(here, params.sender_radius));
    let mut shapes: Vec<&[Point2]> = owned.iter().map(|s| s.as_slice()).collect();
    shapes.extend_from_slice(occluders);
    let targets: Vec<_> = kin.iter().map(|k| (k.centroid, now, k.velocity)).collect();
    let (vis, rel) = fill_map(&peers, &targets, &shapes, now, params);
    let object_map = last
        .object_map
        .iter()
        .zip(kin)
        .zip(vis.into_iter().zip(rel))
        .map(|((e, kinematics), (visibility, relevance))| ObjectMapEntry {
            object_id: e.object_id,
            size_bytes: e.size_bytes,
            visibility,
            relevance,
            kinematics,
        })
        .collect();
    ControlMessage {
        sender: last.sender,
        timestamp: now,
        trajectory,
        peers: peers.iter().map(|p| p.id).collect(),
        object_map,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    pub center: Point2,
    pub radio_range: f64,
    pub membership_radius: f64,
    pub guard_band: f64,
}

impl DomainConfig {
    pub fn new(center: Point2) -> Self {
        Self { center, radio_range: 170.0, membership_radius: 85.0, guard_band: 1.8 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radio_range > 0.0) || self.membership_radius > self.radio_range / 2.0 || self.membership_radius < 0.0 {
            return Err(Error::InvalidConfig("membership radius must lie in [0, R/2]".into()));
        }
        if !(self.guard_band >= 0.0) {
            return Err(Error::InvalidConfig("guard band must be non-negative".into()));
        }
        Ok(())
    }

    pub fn effective_radius(&self) -> f64 {
        (self.membership_radius - self.guard_band).max(0.0)
    }
}

/// Ids within the effective membership radius (inclusive), ascending.
pub fn domain_members(poses: &[(VehicleId, Point2)], cfg: &DomainConfig) -> Vec<VehicleId> {
    let r = cfg.effective_radius();
    let mut ids: Vec<VehicleId> = poses.iter().filter(|(_, p)| dist(*p, cfg.center) <= r).map(|(id, _)| *id).collect();
    ids.sort();
    ids.dedup();
    ids
}

/// Little-endian binary encoding. Layout after a u32 byte count of the rest:
/// sender u32, timestamp u64; u16 waypoints of (f32 x, f32 y, u64 t); u16 peers of
/// u32 id; u16 entries of (u64 object id, u32 size, ceil(peers/8) visibility bitmask
/// bytes, f32 relevance per peer); then one (f32 cx, cy, vx, vy, radius, u32 track)
/// record per entry.
pub fn encode(msg: &ControlMessage) -> Vec<u8> {
    let mut b = Vec::with_capacity(encoded_len(msg));
    b.extend_from_slice(&0u32.to_le_bytes());
    b.extend_from_slice(&msg.sender.0.to_le_bytes());
    b.extend_from_slice(&msg.timestamp.to_le_bytes());
    b.extend_from_slice(&(msg.trajectory.waypoints.len() as u16).to_le_bytes());
    for w in &msg.trajectory.waypoints {
        b.extend_from_slice(&(w.x as f32).to_le_bytes());
        b.extend_from_slice(&(w.y as f32).to_le_bytes());
        b.extend_from_slice(&w.timestamp.to_le_bytes());
    }
    b.extend_from_slice(&(msg.peers.len() as u16).to_le_bytes());
    for p in &msg.peers {
        b.extend_from_slice(&p.0.to_le_bytes());
    }
    let mask_len = msg.peers.len().div_ceil(8);
    b.extend_from_slice(&(msg.object_map.len() as u16).to_le_bytes());
    for e in &msg.object_map {
        b.extend_from_slice(&e.object_id.0.to_le_bytes());
        b.extend_from_slice(&(e.size_bytes.min(u32::MAX as u64) as u32).to_le_bytes());
        let mut mask = vec![0u8; mask_len];
        for (j, v) in e.visibility.iter().enumerate() {
            if *v {
                mask[j / 8] |= 1 << (j % 8);
            }
        }
        b.extend_from_slice(&mask);
        for r in &e.relevance {
            b.extend_from_slice(&(*r as f32).to_le_bytes());
        }
    }
    for e in &msg.object_map {
        let k = &e.kinematics;
        for x in [k.centroid[0], k.centroid[1], k.velocity[0], k.velocity[1], k.radius] {
            b.extend_from_slice(&(x as f32).to_le_bytes());
        }
        b.extend_from_slice(&k.track.to_le_bytes());
    }
    let n = (b.len() - 4) as u32;
    b[..4].copy_from_slice(&n.to_le_bytes());
    b
}

/// Size in bytes of `encode(msg)`.
pub fn encoded_len(msg: &ControlMessage) -> usize {
    let p = msg.peers.len();
    let e = msg.object_map.len();
    4 + 4 + 8 + 2 + 16 * msg.trajectory.waypoints.len() + 2 + 4 * p + 2 + e * (12 + p.div_ceil(8) + 4 * p) + e * 24
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Decode(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f32(&mut self) -> Result<f64> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()) as f64)
    }
}

pub fn decode(buf: &[u8]) -> Result<ControlMessage> {
    let mut r = Reader { buf, pos: 0 };
    let len = r.u32()? as usize;
    if len + 4 != buf.len() {
        return Err(Error::Decode(format!("length prefix {len} does not match payload {}", buf.len() - 4)));
    }
    let sender = VehicleId(r.u32()?);
    let timestamp = r.u64()?;
    let nw = r.u16()? as usize;
    let mut waypoints = Vec::with_capacity(nw);
    for _ in 0..nw {
        let x = r.f32()?;
        let y = r.f32()?;
        waypoints.push(Waypoint::new(x, y, r.u64()?));
    }
    let trajectory = Trajectory::new(waypoints)?;
    let np = r.u16()? as usize;
    let peers = (0..np).map(|_| r.u32().map(VehicleId)).collect::<Result<Vec<_>>>()?;
    let ne = r.u16()? as usize;
    let mut object_map = Vec::with_capacity(ne);
    for _ in 0..ne {
        let object_id = ObjectId(r.u64()?);
        let size_bytes = r.u32()? as u64;
        let mask = r.take(np.div_ceil(8))?;
        let visibility = (0..np).map(|j| mask[j / 8] & (1 << (j % 8)) != 0).collect();
        let relevance = (0..np).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
        let kinematics = ObjectKinematics { centroid: [0.0; 2], velocity: [0.0; 2], radius: 0.0, track: 0 };
        object_map.push(ObjectMapEntry { object_id, size_bytes, visibility, relevance, kinematics });
    }
    for e in &mut object_map {
        let (cx, cy, vx, vy, rad) = (r.f32()?, r.f32()?, r.f32()?, r.f32()?, r.f32()?);
        e.kinematics = ObjectKinematics { centroid: [cx, cy], velocity: [vx, vy], radius: rad, track: r.u32()? };
    }
    if r.pos != buf.len() {
        return Err(Error::Decode("trailing bytes".into()));
    }
    Ok(ControlMessage { sender, timestamp, trajectory, peers, object_map })
}

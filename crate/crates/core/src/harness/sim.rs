//! The closed loop: sense, extract, exchange beacons, schedule, broadcast,
//! fuse, plan and drive, once per decision interval with 10 ms physics.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::metrics::STALL_SPEED;
use super::scenario::{build_scenario, Scenario};
use super::{classify_outcome, compute_reaction_time, ScenarioConfig, ScenarioResult, SchedulerKind, StepRecord, DEADLOCK_WINDOW_MS};
use crate::channel::{execute_plan, write_trace, TRACE_HEADER};
use crate::control::{build_control_message, compensate_missing, domain_members, ControlMessage, DomainConfig, MapParams, PeerInfo};
use crate::error::Result;
use crate::geometry::{apply_transform, dist, downsample_trajectory, Point2, Pose, Trajectory, VehicleId};
use crate::planner::{control_command, free_flow_trajectory, plan_trajectory, ObjectTrack, PlannerParams, SpeedProfile};
use crate::scheduler::{
    agnostic_schedule, fptas_plan, greedy_schedule, object_weight, optimal_plan, pair_reward, AgnosticState, ChannelMatrix, FramePlan,
    Item, SchedulerInput,
};
use crate::spatial::{extract_objects_sparse, extrapolate_object, first_conflict_time, shape_visible, RoadObject, Tracker, GROUND_THRESHOLD};
use crate::world::{dir, Command, KinematicLimits, RoadMask, VehicleState, World};

/// Gap the ego keeps before a conflict zone; wider than the near-miss distance (m).
const STOP_MARGIN: f64 = 3.0;
/// Physics step (ms).
pub const PHYSICS_STEP_MS: u64 = 10;
/// Shapes this close to a receiver count as its own body in object maps (m).
const SELF_RADIUS: f64 = 2.6;
/// Distance past the conflict point at which the ego is done (m).
const EXIT_DISTANCE: f64 = 15.0;
/// Gap kept to a vehicle ahead by corridor-following drivers (m).
const STANDOFF: f64 = 2.0;
/// Reaction delay assumed by corridor-following drivers (s).
const DRIVER_REACTION_S: f64 = 0.3;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub result: ScenarioResult,
    /// Per-transmission channel trace, CSV with header.
    pub trace: String,
    pub steps: Vec<StepRecord>,
    /// Ego sense, extract, reason, fuse and plan time per interval (ms).
    pub data_plane_ms: Vec<f64>,
}

fn interval_rng(seed: u64, interval: u64, stream: u64) -> ChaCha8Rng {
    let mut z = seed ^ interval.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ stream.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 31)).wrapping_mul(0x94d0_49bb_1331_11eb);
    ChaCha8Rng::seed_from_u64(z)
}

fn perceive(world: &World, v: &VehicleState, cfg: &ScenarioConfig, tracker: &mut Tracker) -> Result<Vec<RoadObject>> {
    let raw = crate::world::sense_lidar(world, v, &cfg.sensor);
    let cloud = apply_transform(&cfg.sensor.sensor_transform(&v.pose), &raw, "map")?;
    let mut objects = extract_objects_sparse(&cloud, &world.road, v.id, world.clock_ms, GROUND_THRESHOLD);
    // Nearest first.
    let at = v.pose.xy();
    objects.sort_by(|a, b| dist(a.centroid, at).total_cmp(&dist(b.centroid, at)));
    tracker.update(&mut objects, world.clock_ms);
    for o in &mut objects {
        o.size_bytes *= cfg.payload_scale;
        snap_to_lane(o, &world.road);
    }
    Ok(objects)
}

/// Keeps only the along-lane part of a track's velocity where the map has a
/// single direction, removing lateral jitter from partial views.
fn snap_to_lane(o: &mut RoadObject, road: &RoadMask) {
    let u = match road.flags_at(o.centroid) {
        dir::NORTH => [0.0, 1.0],
        dir::SOUTH => [0.0, -1.0],
        dir::EAST => [1.0, 0.0],
        dir::WEST => [-1.0, 0.0],
        _ => return,
    };
    let along = o.velocity[0] * u[0] + o.velocity[1] * u[1];
    o.velocity = [along * u[0], along * u[1]];
    if along != 0.0 {
        o.heading = o.velocity[1].atan2(o.velocity[0]);
    }
}

fn intended_trajectory(v: &VehicleState, target: f64, limits: &KinematicLimits, planner: &PlannerParams, now: u64) -> Trajectory {
    let profile = SpeedProfile { v0: v.speed, target, accel: limits.max_accel, decel: limits.max_brake };
    free_flow_trajectory(&v.route, v.progress, &profile, planner.spacing, planner.horizon_s, now)
}

/// Cruise unless a vehicle (filtered by `sees`) sits in the lane ahead within
/// reaction plus stopping distance, then brake hard.
fn corridor_command(world: &World, idx: usize, target: f64, sees: impl Fn(&VehicleState) -> bool) -> Command {
    let v = &world.vehicles[idx];
    if target <= 0.0 {
        return Command::Cruise { target_speed: 0.0 };
    }
    let rect = v.rect();
    let need = v.speed * DRIVER_REACTION_S + v.speed * v.speed / 12.0 + STANDOFF;
    let half = v.footprint.width / 2.0 + 0.1;
    for u in &world.vehicles {
        if u.id == v.id || dist(u.pose.xy(), v.pose.xy()) > need + 15.0 {
            continue;
        }
        let in_lane = u.rect().corners().iter().any(|c| {
            let (s, lat) = v.route.project(*c);
            lat <= half && s > v.progress
        });
        if in_lane && rect.distance(&u.rect()) < need && sees(u) {
            return Command::Brake { decel: f64::INFINITY };
        }
    }
    Command::Cruise { target_speed: target }
}

fn collider_sees(world: &World, idx: usize, u: &VehicleState) -> bool {
    let me = &world.vehicles[idx];
    let target = u.rect().corners();
    let others: Vec<[Point2; 4]> = world.vehicles.iter().filter(|w| w.id != me.id && w.id != u.id).map(|w| w.rect().corners()).collect();
    let mut occ: Vec<&[Point2]> = others.iter().map(|c| c.as_slice()).collect();
    occ.extend(world.structures.iter().map(|s| s.as_slice()));
    shape_visible(&target, me.pose.xy(), &occ, 100.0)
}

struct Run<'a> {
    cfg: &'a ScenarioConfig,
    sc: Scenario,
    limits: KinematicLimits,
    planner: PlannerParams,
    map_params: MapParams,
    domain: DomainConfig,
    trackers: HashMap<VehicleId, Tracker>,
    last_msgs: HashMap<VehicleId, ControlMessage>,
    starvation: HashMap<(VehicleId, u32), u32>,
    agnostic: AgnosticState,
    /// Received objects held by the ego, keyed by (sender, track).
    held: BTreeMap<(VehicleId, u32), RoadObject>,
    trace: String,
    total_reward: f64,
    schedule_ms: Vec<f64>,
    delays: Vec<f64>,
    /// Ego data-plane time spent so far in the current interval (ms).
    ego_ms: f64,
}

impl Run<'_> {
    /// One interval of perception, sharing and scheduling. Returns the
    /// objects in the ego's fused view.
    fn share(&mut self, k: u64) -> Result<Vec<RoadObject>> {
        let now = self.sc.world.clock_ms;
        let world = &self.sc.world;
        let ego_id = self.sc.ego;
        let coop: Vec<(VehicleId, Point2)> =
            world.vehicles.iter().filter(|v| v.is_cooperative()).map(|v| (v.id, v.pose.xy())).collect();
        let members = if self.cfg.scheduler == SchedulerKind::Single { vec![ego_id] } else { domain_members(&coop, &self.domain) };
        let mut perceivers = members.clone();
        if !perceivers.contains(&ego_id) {
            perceivers.push(ego_id);
            perceivers.sort();
        }
        self.trackers.retain(|id, _| perceivers.contains(id));
        let mut objects: BTreeMap<VehicleId, Vec<RoadObject>> = BTreeMap::new();
        for id in &perceivers {
            let v = world.vehicle(*id).expect("member exists");
            let tracker = self.trackers.entry(*id).or_default();
            let started = Instant::now();
            objects.insert(*id, perceive(world, v, self.cfg, tracker)?);
            if *id == ego_id {
                self.ego_ms = started.elapsed().as_secs_f64() * 1000.0;
            }
        }
        let own = objects.get(&ego_id).cloned().unwrap_or_default();
        if self.cfg.scheduler == SchedulerKind::Single || members.len() < 2 {
            self.schedule_ms.push(0.0);
            return Ok(own);
        }

        let peers: Vec<PeerInfo> = members
            .iter()
            .map(|id| {
                let idx = self.sc.index_of(*id);
                let v = &world.vehicles[idx];
                PeerInfo {
                    id: *id,
                    position: v.pose.xy(),
                    trajectory: downsample_trajectory(
                        &intended_trajectory(v, self.sc.targets[idx], &self.limits, &self.planner, now),
                        self.map_params.downsample_tolerance,
                    ),
                }
            })
            .collect();
        let structures: Vec<&[Point2]> = world.structures.iter().map(|s| s.as_slice()).collect();
        let mut beacon_rng = interval_rng(self.cfg.seed, k, 1);
        let mut msgs: Vec<ControlMessage> = Vec::new();
        for (i, id) in members.iter().enumerate() {
            let v = world.vehicle(*id).expect("member exists");
            let body = v.rect().corners();
            let mut occ: Vec<&[Point2]> = vec![body.as_slice()];
            occ.extend_from_slice(&structures);
            let pose = Pose { timestamp: now, ..v.pose };
            let p = self.cfg.channel.link(dist(v.pose.xy(), self.domain.center));
            if beacon_rng.gen::<f64>() < p {
                let started = Instant::now();
                let fresh = build_control_message(*id, &pose, &peers[i].trajectory, &objects[id], &peers, &occ, &self.map_params);
                if *id == ego_id {
                    self.ego_ms += started.elapsed().as_secs_f64() * 1000.0;
                }
                self.last_msgs.insert(*id, fresh.clone());
                msgs.push(fresh);
            } else if let Some(prev) = self.last_msgs.get(id) {
                msgs.push(compensate_missing(prev, now, &peers, &structures, &self.map_params));
            }
        }
        self.last_msgs.retain(|id, _| members.contains(id));

        let mut items = Vec::new();
        let mut keys = Vec::new();
        for m in &msgs {
            for e in &m.object_map {
                let rewards = members
                    .iter()
                    .map(|j| match m.peer_index(*j) {
                        Some(x) if *j != m.sender => pair_reward(e.visibility[x], e.relevance[x]),
                        _ => 0.0,
                    })
                    .collect();
                let key = (m.sender, e.kinematics.track);
                let starvation = *self.starvation.get(&key).unwrap_or(&0);
                items.push(Item { tx: m.sender, object: e.object_id, size: e.size_bytes.max(1), rewards, starvation });
                keys.push(key);
            }
        }
        let input = SchedulerInput::new(members.clone(), items, self.cfg.channel.budgets(), self.cfg.starvation);
        let started = Instant::now();
        let plan: FramePlan = match self.cfg.scheduler {
            SchedulerKind::Greedy => greedy_schedule(&input),
            SchedulerKind::Optimal => optimal_plan(&input, self.cfg.dp_resolution),
            SchedulerKind::Fptas => fptas_plan(&input, self.cfg.fptas_eps),
            SchedulerKind::Agnostic => agnostic_schedule(&input, &mut self.agnostic),
            SchedulerKind::Single => unreachable!("handled above"),
        };
        self.schedule_ms.push(started.elapsed().as_secs_f64() * 1000.0);

        let pos: HashMap<VehicleId, Point2> = coop.iter().copied().collect();
        let matrix = ChannelMatrix::from_fn(members.clone(), |a, b| self.cfg.channel.link(dist(pos[&a], pos[&b])));
        let log = execute_plan(&plan, &input, &matrix, &self.cfg.channel, interval_rng(self.cfg.seed, k, 2).gen());
        let mut buf = Vec::new();
        write_trace(&mut buf, k, &log).expect("writing to memory");
        self.trace.push_str(&String::from_utf8(buf).expect("ascii trace"));

        let mut delivered = vec![vec![false; members.len()]; input.items.len()];
        for t in &log.transmissions {
            let mut any = false;
            for (rx, ok) in &t.outcomes {
                if *ok {
                    any = true;
                    let j = members.binary_search(rx).expect("receiver is a member");
                    delivered[t.item][j] = true;
                    self.total_reward += input.items[t.item].rewards[j];
                }
            }
            if any {
                self.delays.push(t.end_ms);
            }
            let ego_got = t.outcomes.iter().any(|(rx, ok)| *rx == ego_id && *ok);
            let (tx, track) = keys[t.item];
            if ego_got {
                // Other vehicles' views of the ego itself are dropped.
                let own = world.vehicles[self.sc.index_of(ego_id)].rect().inflated(1.0);
                if let Some(obj) = objects
                    .get(&tx)
                    .and_then(|os| os.iter().find(|o| o.track == Some(track)))
                    .filter(|o| !o.cell_centers().any(|c| own.contains(c)))
                {
                    self.held.insert((tx, track), obj.clone());
                }
            }
        }
        let mut next = HashMap::new();
        for (i, it) in input.items.iter().enumerate() {
            let h = object_weight(it, &input.received[i], &input.peers);
            if h <= 0.0 {
                continue;
            }
            let served = it.rewards.iter().zip(&delivered[i]).all(|(y, d)| *y <= 0.0 || *d);
            next.insert(keys[i], if served { 0 } else { it.starvation + 1 });
        }
        self.starvation = next;
        Ok(own)
    }

    /// Own objects plus held received ones extrapolated to now, without the
    /// ego's own body. The first `fresh` entries were sensed or delivered in
    /// this interval.
    fn fused_view(&mut self, own: Vec<RoadObject>) -> (Vec<RoadObject>, usize) {
        let now = self.sc.world.clock_ms;
        let hold = self.cfg.hold_ms;
        self.held.retain(|_, o| now.saturating_sub(o.last_update) <= hold);
        let ego_rect = self.sc.world.vehicles[self.sc.index_of(self.sc.ego)].rect().inflated(1.0);
        let (new, old): (Vec<&RoadObject>, Vec<&RoadObject>) = self.held.values().partition(|o| o.last_update == now);
        let mut view: Vec<RoadObject> = own.into_iter().chain(new.into_iter().cloned()).filter(|o| !ego_rect.contains(o.centroid)).collect();
        let fresh = view.len();
        view.extend(
            old.into_iter()
                .map(|o| extrapolate_object(o, now - o.last_update))
                .filter(|o| !ego_rect.contains(o.centroid)),
        );
        (view, fresh)
    }
}

/// Runs one scenario to completion.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let sc = build_scenario(cfg)?;
    let limits = KinematicLimits::default();
    let planner = PlannerParams {
        cruise_speed: cfg.ego_speed_kmh / 3.6,
        accel: limits.max_accel,
        decel: limits.max_brake,
        stop_margin: STOP_MARGIN,
        spacing: 1.0,
        ..PlannerParams::default()
    };
    let domain = DomainConfig { radio_range: cfg.channel.radio_range, ..DomainConfig::new(sc.domain_center) };
    domain.validate()?;
    let map_params = MapParams { sensor_range: cfg.sensor.range, relevance: cfg.relevance, self_radius: SELF_RADIUS, ..MapParams::default() };
    let ego_idx = sc.index_of(sc.ego);
    let col_idx = sc.collider.map(|c| sc.index_of(c));
    let mut run = Run {
        cfg,
        sc,
        limits,
        planner,
        map_params,
        domain,
        trackers: HashMap::new(),
        last_msgs: HashMap::new(),
        starvation: HashMap::new(),
        agnostic: AgnosticState::default(),
        held: BTreeMap::new(),
        trace: format!("{TRACE_HEADER}\n"),
        total_reward: 0.0,
        schedule_ms: Vec::new(),
        delays: Vec::new(),
        ego_ms: 0.0,
    };

    let ego_fp = run.sc.world.vehicles[ego_idx].footprint;
    let zone_entry = run.sc.ego_conflict_s - ego_fp.length / 2.0 - 1.5;
    let collider_clear_s = col_idx.map(|c| run.sc.collider_conflict_s.unwrap_or(0.0) + run.sc.world.vehicles[c].footprint.length / 2.0 + 3.0);
    let max_ms = (cfg.max_time_s * 1000.0) as u64;
    let substeps = cfg.channel.interval_ms / PHYSICS_STEP_MS;

    let mut steps: Vec<StepRecord> = Vec::new();
    let mut aware: Option<u64> = None;
    let (mut relevant_intervals, mut seen_intervals) = (0u64, 0u64);
    let mut collider_points = 0usize;
    let mut stalled_since: Option<u64> = None;
    let mut latched_stop: Option<f64> = None;
    let mut data_plane_ms = Vec::new();
    let mut k = 0u64;
    'run: loop {
        let now = run.sc.world.clock_ms;
        let own = run.share(k)?;
        let fuse_started = Instant::now();
        let (view, fresh) = run.fused_view(own);
        let mut fuse_ms = fuse_started.elapsed().as_secs_f64() * 1000.0;
        let world = &run.sc.world;
        let ego = &world.vehicles[ego_idx];

        if let Some(ci) = col_idx {
            let col = &world.vehicles[ci];
            let zone = col.rect().inflated(0.5);
            let matching: Vec<&RoadObject> = view[..fresh].iter().filter(|o| o.cell_centers().any(|c| zone.contains(c))).collect();
            if !matching.is_empty() && aware.is_none() {
                aware = Some(now);
            }
            let free = intended_trajectory(ego, run.planner.cruise_speed, &run.limits, &run.planner, now);
            let vel = [col.speed * col.pose.heading.cos(), col.speed * col.pose.heading.sin()];
            let relevant = first_conflict_time(col.pose.xy(), now, vel, &free, now, now + cfg.relevance.horizon_ms, cfg.relevance.threshold).is_some();
            if relevant {
                relevant_intervals += 1;
                if !matching.is_empty() {
                    seen_intervals += 1;
                }
                collider_points += matching.iter().map(|o| o.cloud.len()).sum::<usize>();
            }
        }

        let plan_started = Instant::now();
        let tracks: Vec<ObjectTrack> = view.iter().map(ObjectTrack::from_object).collect();
        let planned = plan_trajectory(&ego.route, ego.progress, ego.speed, ego.footprint, &tracks, &run.planner, now);
        fuse_ms += plan_started.elapsed().as_secs_f64() * 1000.0;
        data_plane_ms.push(run.ego_ms + fuse_ms);
        // While a conflict persists the stop point only moves back.
        let stop_abs = match (planned.stop_at.map(|s| ego.progress + s), latched_stop) {
            (Some(new), Some(old)) => Some(new.min(old)),
            (new, _) => new,
        };
        latched_stop = stop_abs;

        let mut commands: Vec<Command> = (0..world.vehicles.len())
            .map(|i| {
                let target = run.sc.targets[i];
                if Some(i) == col_idx {
                    corridor_command(world, i, target, |u| collider_sees(world, i, u))
                } else {
                    corridor_command(world, i, target, |_| true)
                }
            })
            .collect();

        for _ in 0..substeps {
            let ego = &run.sc.world.vehicles[ego_idx];
            let stop_in = stop_abs.map(|s| s - ego.progress);
            let lookahead = ego.speed * cfg.channel.interval_ms as f64 / 1000.0 + 0.5;
            commands[ego_idx] = control_command(ego.speed, stop_in, run.planner.cruise_speed, run.planner.decel, lookahead);
            run.sc.world.step(&commands, PHYSICS_STEP_MS, &run.limits);

            let world = &run.sc.world;
            let ego = &world.vehicles[ego_idx];
            let ego_rect = ego.rect();
            let ego_overlap = world.vehicles.iter().enumerate().any(|(i, u)| {
                i != ego_idx && dist(u.pose.xy(), ego.pose.xy()) < 12.0 && ego_rect.distance(&u.rect()) == 0.0
            });
            let col = col_idx.map(|c| &world.vehicles[c]);
            let rec = StepRecord {
                t_ms: world.clock_ms,
                ego_speed: ego.speed,
                ego_to_conflict: zone_entry - ego.progress,
                collider_speed: col.map(|c| c.speed),
                collider_gap: col.map(|c| ego_rect.distance(&c.rect())),
                collider_clear: match (col, collider_clear_s) {
                    (Some(c), Some(s)) => c.progress > s,
                    _ => false,
                },
                ego_overlap,
            };
            steps.push(rec);
            let stalled = rec.ego_speed < STALL_SPEED && rec.collider_speed.is_none_or(|v| v < STALL_SPEED);
            stalled_since = if stalled { stalled_since.or(Some(rec.t_ms)) } else { None };
            let deadlocked = stalled_since.is_some_and(|t| rec.t_ms - t >= DEADLOCK_WINDOW_MS);
            if rec.ego_overlap
                || rec.collider_gap == Some(0.0)
                || deadlocked
                || ego.progress > run.sc.ego_conflict_s + EXIT_DISTANCE
                || rec.t_ms >= max_ms
            {
                break 'run;
            }
        }
        k += 1;
    }

    let outcome = classify_outcome(&steps);
    let has_collider = col_idx.is_some();
    let closest = steps.iter().filter_map(|r| r.collider_gap).fold(f64::INFINITY, f64::min);
    let result = ScenarioResult {
        outcome,
        reaction_time_s: has_collider.then(|| compute_reaction_time(&steps, aware, run.planner.decel)),
        closest_distance_m: has_collider.then_some(closest),
        collider_visible_fraction: (relevant_intervals > 0).then(|| seen_intervals as f64 / relevant_intervals as f64),
        mean_collider_points: if relevant_intervals > 0 { collider_points as f64 / relevant_intervals as f64 } else { 0.0 },
        total_reward: run.total_reward,
        schedule_ms: run.schedule_ms,
        scheduled_delays_ms: run.delays,
        intervals: k + 1,
        sim_time_s: run.sc.world.clock_ms as f64 / 1000.0,
    };
    Ok(RunOutput { result, trace: run.trace, steps, data_plane_ms })
}

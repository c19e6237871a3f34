//! Road layouts and initial placements for the three hazard scenarios.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ScenarioConfig, ScenarioKind};
use crate::error::{Error, Result};
use crate::geometry::{GridSpec, Point2, VehicleId, DEFAULT_CELL_SIZE};
use crate::planner::SpeedProfile;
use crate::world::{dir, Capability, Footprint, KinematicLimits, RoadMask, Role, Route, VehicleState, World};

/// Half extent of every map (m).
const MAP_HALF: f64 = 150.0;
const LANE: f64 = 4.0;
/// Spacing of stationary queue slots and moving slots (m).
const QUEUE_GAP: f64 = 7.0;
const MOVING_GAP: f64 = 10.0;
/// Slots are kept within this distance of the domain centre.
const SLOT_REACH: f64 = 80.0;

/// A built scenario: world plus the bookkeeping the simulation needs.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub world: World,
    pub ego: VehicleId,
    pub occluder: VehicleId,
    pub collider: Option<VehicleId>,
    /// Cruise speed per vehicle (m/s), aligned with `world.vehicles`.
    pub targets: Vec<f64>,
    pub conflict_point: Point2,
    /// Arc length of the conflict point along the ego route.
    pub ego_conflict_s: f64,
    /// Arc length of the conflict point along the collider route.
    pub collider_conflict_s: Option<f64>,
    pub domain_center: Point2,
}

impl Scenario {
    pub fn index_of(&self, id: VehicleId) -> usize {
        self.world.vehicles.iter().position(|v| v.id == id).expect("vehicle in scenario")
    }
}

fn line(a: Point2, b: Point2) -> Arc<Route> {
    Arc::new(Route::new(vec![a, b]).expect("two distinct points"))
}

/// A straight lane through `anchor` travelling along `u`.
struct Lane {
    anchor: Point2,
    u: Point2,
}

impl Lane {
    fn route(&self) -> Arc<Route> {
        let a = [self.anchor[0] - self.u[0] * 2.0 * MAP_HALF, self.anchor[1] - self.u[1] * 2.0 * MAP_HALF];
        let b = [self.anchor[0] + self.u[0] * 2.0 * MAP_HALF, self.anchor[1] + self.u[1] * 2.0 * MAP_HALF];
        line(a, b)
    }

    /// Arc length of the point `anchor + u * t` along `route()`.
    fn progress(&self, t: f64) -> f64 {
        2.0 * MAP_HALF + t
    }
}

#[derive(Clone, Copy)]
struct Slot {
    lane: usize,
    t: f64,
    moving: bool,
}

/// Slots along `lane` at signed offsets from its anchor; `outward` is the sign
/// of offsets that lead away from the centre.
fn slots(out: &mut Vec<Slot>, lane: usize, start: f64, outward: f64, gap: f64, moving: bool) {
    let mut d = start;
    while d <= SLOT_REACH {
        out.push(Slot { lane, t: outward * d, moving });
        d += gap;
    }
}

fn intersection_road() -> (RoadMask, Vec<Vec<Point2>>) {
    let spec = GridSpec::new([-MAP_HALF, -MAP_HALF], DEFAULT_CELL_SIZE, (2.0 * MAP_HALF / DEFAULT_CELL_SIZE) as usize, (2.0 * MAP_HALF / DEFAULT_CELL_SIZE) as usize)
        .expect("valid map grid");
    let mut road = RoadMask::new(spec);
    let w = 2.0 * LANE;
    road.paint_box([0.0, -MAP_HALF], [w, MAP_HALF], dir::NORTH);
    road.paint_box([-w, -MAP_HALF], [0.0, MAP_HALF], dir::SOUTH);
    road.paint_box([-MAP_HALF, -w], [MAP_HALF, 0.0], dir::EAST);
    road.paint_box([-MAP_HALF, 0.0], [MAP_HALF, w], dir::WEST);
    road.paint_box([-w, -w], [w, w], dir::ANY);
    let (a, b) = (10.0, 100.0);
    let buildings = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
        .iter()
        .map(|(sx, sy)| {
            let (x0, x1) = if *sx > 0.0 { (a, b) } else { (-b, -a) };
            let (y0, y1) = if *sy > 0.0 { (a, b) } else { (-b, -a) };
            vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
        })
        .collect();
    (road, buildings)
}

fn straight_road() -> (RoadMask, Vec<Vec<Point2>>) {
    let spec = GridSpec::new([-MAP_HALF, -40.0], DEFAULT_CELL_SIZE, (2.0 * MAP_HALF / DEFAULT_CELL_SIZE) as usize, (80.0 / DEFAULT_CELL_SIZE) as usize)
        .expect("valid map grid");
    let mut road = RoadMask::new(spec);
    road.paint_box([-MAP_HALF, -2.0 * LANE], [MAP_HALF, 0.0], dir::EAST);
    road.paint_box([-MAP_HALF, 0.0], [MAP_HALF, 2.0 * LANE], dir::WEST);
    let walls = vec![
        vec![[-MAP_HALF, 10.0], [MAP_HALF, 10.0], [MAP_HALF, 30.0], [-MAP_HALF, 30.0]],
        vec![[-MAP_HALF, -30.0], [MAP_HALF, -30.0], [MAP_HALF, -10.0], [-MAP_HALF, -10.0]],
    ];
    (road, walls)
}

struct Layout {
    road: RoadMask,
    structures: Vec<Vec<Point2>>,
    ego_route: Arc<Route>,
    conflict: Point2,
    /// Lane, offset of the front bumper from the anchor, and the stopped
    /// vehicles from the front of the queue backwards (the first is the occluder).
    occluders: (Lane, f64, Vec<Footprint>),
    /// Arc length where the ego starts at rest; `None` starts it at cruise
    /// speed `lead_time_s` before the conflict.
    ego_rest_start: Option<f64>,
    collider: Lane,
    lanes: Vec<Lane>,
    slots: Vec<Slot>,
}

const N: Point2 = [0.0, 1.0];
const S: Point2 = [0.0, -1.0];
const E: Point2 = [1.0, 0.0];
const W: Point2 = [-1.0, 0.0];

fn red_light() -> Layout {
    let (road, structures) = intersection_road();
    let ego_route = line([6.0, -MAP_HALF], [6.0, MAP_HALF]);
    let lanes = vec![
        Lane { anchor: [-8.0, -2.0], u: E },  // 0 eastbound inner approach (red)
        Lane { anchor: [8.0, 2.0], u: W },    // 1 westbound inner approach (red)
        Lane { anchor: [8.0, 6.0], u: W },    // 2 westbound outer approach (red)
        Lane { anchor: [2.0, 8.0], u: N },    // 3 northbound inner exit
        Lane { anchor: [-2.0, -8.0], u: S },  // 4 southbound inner exit
        Lane { anchor: [-6.0, -8.0], u: S },  // 5 southbound outer exit
        Lane { anchor: [8.0, -2.0], u: E },   // 6 eastbound inner exit
        Lane { anchor: [-8.0, 2.0], u: W },   // 7 westbound inner exit
        Lane { anchor: [-8.0, 6.0], u: W },   // 8 westbound outer exit
    ];
    let mut s = Vec::new();
    for l in 0..3 {
        slots(&mut s, l, 2.25, -1.0, QUEUE_GAP, false);
    }
    for l in 3..9 {
        slots(&mut s, l, 4.0, 1.0, MOVING_GAP, true);
    }
    Layout {
        road,
        structures,
        ego_route,
        conflict: [6.0, -6.0],
        occluders: (Lane { anchor: [2.0, -8.0], u: N }, -1.0, vec![Footprint::TRUCK, Footprint::CAR, Footprint::CAR]),
        ego_rest_start: None,
        collider: Lane { anchor: [-8.0, -6.0], u: E },
        lanes,
        slots: s,
    }
}

fn left_turn() -> Result<Layout> {
    let (road, structures) = intersection_road();
    let ego_route = Arc::new(Route::with_arc([2.0, -MAP_HALF], FRAC_PI_2, MAP_HALF - 8.0, 10.0, FRAC_PI_2, MAP_HALF)?);
    // Ego arc (centre (-8, -8), radius 10) meets the southbound outer lane.
    let conflict = [-6.0, -8.0 + (100.0f64 - 4.0).sqrt()];
    let lanes = vec![
        Lane { anchor: [-8.0, -2.0], u: E }, // 0 eastbound inner approach (red)
        Lane { anchor: [-8.0, -6.0], u: E }, // 1 eastbound outer approach (red)
        Lane { anchor: [8.0, 2.0], u: W },   // 2 westbound inner approach (red)
        Lane { anchor: [8.0, 6.0], u: W },   // 3 westbound outer approach (red)
        Lane { anchor: [2.0, 8.0], u: N },   // 4 northbound inner exit
        Lane { anchor: [6.0, 8.0], u: N },   // 5 northbound outer exit
        Lane { anchor: [-2.0, -8.0], u: S }, // 6 southbound inner exit
        Lane { anchor: [-8.0, 6.0], u: W },  // 7 westbound outer exit
        Lane { anchor: [8.0, -2.0], u: E },  // 8 eastbound inner exit
        Lane { anchor: [8.0, -6.0], u: E },  // 9 eastbound outer exit
    ];
    let mut s = Vec::new();
    for l in 0..4 {
        slots(&mut s, l, 2.25, -1.0, QUEUE_GAP, false);
    }
    for l in 4..10 {
        slots(&mut s, l, 4.0, 1.0, MOVING_GAP, true);
    }
    Ok(Layout {
        road,
        structures,
        ego_route,
        conflict,
        occluders: (Lane { anchor: [-2.0, 8.0], u: S }, -1.0, vec![Footprint::TRUCK, Footprint::CAR, Footprint::CAR]),
        ego_rest_start: None,
        collider: Lane { anchor: [-6.0, 8.0], u: S },
        lanes,
        slots: s,
    })
}

fn overtaking() -> Result<Layout> {
    let (road, structures) = straight_road();
    let ego_route = Arc::new(Route::new(vec![
        [-MAP_HALF, -2.0],
        [-14.0, -2.0],
        [-4.0, 2.0],
        [10.0, 2.0],
        [20.0, -2.0],
        [MAP_HALF, -2.0],
    ])?);
    let lanes = vec![
        Lane { anchor: [0.0, -6.0], u: E }, // 0 eastbound parking
        Lane { anchor: [0.0, 6.0], u: W },  // 1 westbound parking
        Lane { anchor: [0.0, -2.0], u: E }, // 2 eastbound, ahead of the stopped truck
        Lane { anchor: [-55.0, 2.0], u: W }, // 3 westbound, behind the ego
    ];
    let mut s = Vec::new();
    for l in 0..2 {
        slots(&mut s, l, 0.0, 1.0, QUEUE_GAP, false);
        slots(&mut s, l, QUEUE_GAP, -1.0, QUEUE_GAP, false);
    }
    slots(&mut s, 2, 25.0, 1.0, MOVING_GAP, true);
    let mut d = 10.0;
    while d <= SLOT_REACH - 55.0 {
        s.push(Slot { lane: 3, t: d, moving: true });
        d += MOVING_GAP;
    }
    Ok(Layout {
        road,
        structures,
        ego_route,
        conflict: [0.0, 2.0],
        occluders: (Lane { anchor: [0.0, -2.0], u: E }, 5.0, vec![Footprint::TRUCK]),
        ego_rest_start: Some(MAP_HALF - 16.0),
        collider: Lane { anchor: [0.0, 2.0], u: W },
        lanes,
        slots: s,
    })
}

/// Builds the scenario world for `cfg`. The ego reaches the conflict point
/// after `lead_time_s` at cruise speed and the collider `delta_s` later.
pub fn build_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let layout = match cfg.scenario {
        ScenarioKind::RedLight => red_light(),
        ScenarioKind::LeftTurn => left_turn()?,
        ScenarioKind::Overtaking => overtaking()?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5ce7_a210);
    let v_ego = cfg.ego_speed_kmh / 3.6;
    let v_col = cfg.speed_kmh / 3.6;
    let mut vehicles = Vec::new();
    let mut targets = Vec::new();
    let mut next_id = 0u32;
    let mut add = |route: Arc<Route>, progress: f64, speed: f64, fp: Footprint, role: Role, cap: Capability, target: f64| -> Result<VehicleId> {
        let id = VehicleId(next_id);
        next_id += 1;
        vehicles.push(VehicleState::new(id, route, progress, speed, fp, role, cap)?);
        targets.push(target);
        Ok(id)
    };

    let (ego_conflict_s, _) = layout.ego_route.project(layout.conflict);
    let (ego_start, ego_speed, arrival) = match layout.ego_rest_start {
        Some(start) => {
            let profile = SpeedProfile { v0: 0.0, target: v_ego, accel: KinematicLimits::default().max_accel, decel: KinematicLimits::default().max_brake };
            (start, 0.0, profile.time_at(ego_conflict_s - start))
        }
        None => (ego_conflict_s - v_ego * cfg.lead_time_s, v_ego, cfg.lead_time_s),
    };
    if ego_start < 0.0 || ego_start >= ego_conflict_s {
        return Err(Error::InvalidConfig("lead time does not fit the map".into()));
    }
    let ego = add(layout.ego_route.clone(), ego_start, ego_speed, Footprint::CAR, Role::Ego, Capability::Cooperative, v_ego)?;

    let (occ_lane, front, queue) = &layout.occluders;
    let mut front = *front;
    let mut occluder = None;
    for (i, fp) in queue.iter().enumerate() {
        let role = if i == 0 { Role::Occluder } else { Role::Background };
        let id = add(occ_lane.route(), occ_lane.progress(front - fp.length / 2.0), 0.0, *fp, role, Capability::Cooperative, 0.0)?;
        occluder.get_or_insert(id);
        front -= fp.length + 2.5;
    }
    let occluder = occluder.expect("at least one occluder");

    let (collider, collider_conflict_s) = if cfg.collider {
        let route = layout.collider.route();
        let (s_conf, _) = route.project(layout.conflict);
        let start = s_conf - v_col * (arrival + cfg.delta_s);
        let id = add(route, start, v_col, Footprint::CAR, Role::Collider, Capability::Passive, v_col)?;
        (Some(id), Some(s_conf))
    } else {
        (None, None)
    };

    let fixed = 1 + queue.len() + cfg.collider as usize;
    let wanted = cfg.density.saturating_sub(fixed);
    let mut pool = layout.slots.clone();
    pool.shuffle(&mut rng);
    if pool.len() < wanted {
        return Err(Error::InvalidConfig(format!("only {} background slots for density {}", pool.len(), cfg.density)));
    }
    let mut chosen: Vec<Slot> = pool[..wanted].to_vec();
    chosen.sort_by(|a, b| (a.lane, a.t).partial_cmp(&(b.lane, b.t)).expect("finite slots"));
    // One speed per moving lane keeps spacing constant.
    let lane_speed: Vec<f64> = layout.lanes.iter().map(|_| rng.gen_range(5.0..9.0)).collect();
    for slot in chosen {
        let lane = &layout.lanes[slot.lane];
        let speed = if slot.moving { lane_speed[slot.lane] } else { 0.0 };
        add(lane.route(), lane.progress(slot.t), speed, Footprint::CAR, Role::Background, Capability::Cooperative, speed)?;
    }

    let world = World::new(vehicles, Arc::new(layout.road), layout.structures)?;
    Ok(Scenario {
        world,
        ego,
        occluder,
        collider,
        targets,
        conflict_point: layout.conflict,
        ego_conflict_s,
        collider_conflict_s,
        domain_center: [0.0, 0.0],
    })
}

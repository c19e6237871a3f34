use std::collections::BTreeMap;

use proptest::prelude::*;

use coopercept::channel::{execute_plan, ChannelConfig};
use coopercept::geometry::{
    apply_transform, downsample_trajectory, point_segment_distance, GridSpec, OrientedRect, Point2, PointCloud, RigidTransform,
    Trajectory, VehicleId, Waypoint,
};
use coopercept::scheduler::random::{random_instance, InstanceParams};
use coopercept::scheduler::{
    fptas_schedule, greedy_schedule, knapsack_exact, optimal_plan, priorities, ChannelMatrix, SchedulerInput, DEFAULT_RESOLUTION,
};
use coopercept::spatial::{
    build_occupancy_grid, extract_objects, extract_objects_sparse, shape_visible, window_for_cloud, GROUND_THRESHOLD,
};
use coopercept::world::RoadMask;

fn instance_strategy() -> impl Strategy<Value = SchedulerInput> {
    (2usize..=20, any::<u64>()).prop_map(|(c, seed)| random_instance(&InstanceParams::with_vehicles(c), seed))
}

fn points_strategy() -> impl Strategy<Value = Vec<[f64; 3]>> {
    prop::collection::vec((-20.0..20.0f64, -20.0..20.0f64, prop_oneof![Just(0.0), 0.5..1.5f64]), 1..150)
        .prop_map(|v| v.into_iter().map(|(x, y, z)| [x, y, z]).collect())
}

fn rect(x: f64, y: f64, heading: f64, l: f64, w: f64) -> Vec<Point2> {
    OrientedRect::new([x, y], heading, l, w).corners().to_vec()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn greedy_plans_respect_budgets_and_skip_rule(input in instance_strategy()) {
        let plan = greedy_schedule(&input);
        prop_assert!(plan.check(&input).is_ok());
        let prio = priorities(&input);
        for (i, it) in input.items.iter().enumerate() {
            if prio[i] > 0.0 && !plan.contains(i) {
                for f in 0..input.frame_budgets.len() {
                    prop_assert!(!plan.fits(f, it.size), "item {i} fits frame {f} but was left out");
                }
            }
        }
    }

    #[test]
    fn optimal_plans_are_feasible(input in instance_strategy()) {
        let plan = optimal_plan(&input, DEFAULT_RESOLUTION);
        prop_assert!(plan.check(&input).is_ok());
    }

    #[test]
    fn fptas_bounded_by_exact(
        items in prop::collection::vec((0.0..10.0f64, 1u64..5000), 1..25),
        budget in 0u64..20_000,
        eps in 0.01..0.5f64,
    ) {
        let exact = knapsack_exact(&items, budget, 1);
        let approx = fptas_schedule(&items, budget, eps);
        prop_assert!(approx.bytes <= budget);
        prop_assert!(approx.value <= exact.value + 1e-9);
        prop_assert!(approx.value >= (1.0 - eps) * exact.value - 1e-9);
    }

    #[test]
    fn execution_is_deterministic_and_within_budget(input in instance_strategy(), seed in any::<u64>(), p in 0.0..1.0f64) {
        let plan = greedy_schedule(&input);
        let matrix = ChannelMatrix::uniform(input.peers.clone(), p);
        let cfg = ChannelConfig::default();
        let a = execute_plan(&plan, &input, &matrix, &cfg, seed);
        prop_assert_eq!(&a, &execute_plan(&plan, &input, &matrix, &cfg, seed));
        for (used, budget) in a.frame_bytes.iter().zip(&input.frame_budgets) {
            prop_assert!(used <= budget);
        }
        for t in &a.transmissions {
            prop_assert!(t.end_ms <= cfg.interval_ms as f64 + 1e-9);
            prop_assert!(t.outcomes.iter().all(|(rx, _)| *rx != t.tx));
        }
    }

    #[test]
    fn sparse_and_dense_extraction_agree(points in points_strategy()) {
        let cloud = PointCloud::new(points, "map");
        let mask = RoadMask::open(GridSpec::new([-25.0, -25.0], 0.5, 100, 100).unwrap());
        let sparse = extract_objects_sparse(&cloud, &mask, VehicleId(1), 0, GROUND_THRESHOLD);
        let dense = match window_for_cloud(&cloud, &mask, 1.0) {
            Some(spec) => extract_objects(&build_occupancy_grid(&cloud, &spec, &mask, GROUND_THRESHOLD), &cloud, VehicleId(1), 0, GROUND_THRESHOLD),
            None => Vec::new(),
        };
        let key = |os: &[coopercept::spatial::RoadObject]| -> BTreeMap<u64, (usize, u64)> {
            os.iter().map(|o| (o.object_id.0, (o.cells.len(), o.size_bytes))).collect()
        };
        prop_assert_eq!(key(&sparse), key(&dense));
        let above = cloud.points.iter().filter(|p| p[2] > GROUND_THRESHOLD).count() as u64;
        prop_assert_eq!(sparse.iter().map(|o| o.size_bytes).sum::<u64>(), above * 24);
    }

    #[test]
    fn transform_round_trip(x in -100.0..100.0f64, y in -100.0..100.0f64, yaw in -6.0..6.0f64, points in points_strategy()) {
        let t = RigidTransform::from_xyz_yaw(x, y, 0.0, yaw);
        let cloud = PointCloud::new(points, "a");
        let there = apply_transform(&t, &cloud, "b").unwrap();
        let back = apply_transform(&t.inverse(), &there, "a").unwrap();
        for (p, q) in cloud.points.iter().zip(&back.points) {
            for k in 0..3 {
                prop_assert!((p[k] - q[k]).abs() < 1e-9);
            }
        }
        // Rigid: pairwise distances are preserved.
        if cloud.len() >= 2 {
            let d = |a: [f64; 3], b: [f64; 3]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
            prop_assert!((d(cloud.points[0], cloud.points[1]) - d(there.points[0], there.points[1])).abs() < 1e-9);
        }
    }

    #[test]
    fn downsampled_points_stay_within_tolerance(
        pts in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 2..60),
        tol in 0.05..3.0f64,
    ) {
        let traj = Trajectory::new(pts.iter().enumerate().map(|(i, (x, y))| Waypoint::new(*x, *y, i as u64 * 100)).collect()).unwrap();
        let kept = downsample_trajectory(&traj, tol);
        prop_assert_eq!(kept.waypoints.first(), traj.waypoints.first());
        prop_assert_eq!(kept.waypoints.last(), traj.waypoints.last());
        // Each dropped waypoint lies within tolerance of the retained segment spanning its timestamp.
        for w in &traj.waypoints {
            let seg = kept.waypoints.windows(2).find(|s| s[0].timestamp <= w.timestamp && w.timestamp <= s[1].timestamp).unwrap();
            prop_assert!(point_segment_distance(w.xy(), seg[0].xy(), seg[1].xy()) <= tol + 1e-9);
        }
    }

    #[test]
    fn adding_an_occluder_never_reveals(
        tx in 10.0..40.0f64, ty in -10.0..10.0f64,
        ox in 3.0..30.0f64, oy in -10.0..10.0f64, ol in 1.0..6.0f64,
        px in 3.0..30.0f64, py in -10.0..10.0f64,
    ) {
        let target = rect(tx, ty, 0.3, 4.5, 1.8);
        let a = rect(ox, oy, 1.2, ol, 2.0);
        let b = rect(px, py, 0.0, 3.0, 2.0);
        let one = shape_visible(&target, [0.0, 0.0], &[a.as_slice()], 100.0);
        let two = shape_visible(&target, [0.0, 0.0], &[a.as_slice(), b.as_slice()], 100.0);
        prop_assert!(one || !two);
        prop_assert!(shape_visible(&target, [0.0, 0.0], &[], 100.0));
        prop_assert!(!shape_visible(&target, [0.0, 0.0], &[], 5.0));
    }
}

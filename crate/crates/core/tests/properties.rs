mod common;

use proptest::prelude::*;

use swarmsim::dynamics::{
    confine, limit_speed, pso_velocity, repulsion_velocity, update_agent,
    update_repulsion_strength, Simulation, StepContext,
};
use swarmsim::metrics::{
    bearing, bin_index, heading_bearing, histogram_phi, time_on_target, velocity_fluctuations,
};
use swarmsim::model::{KeyedDraws, SpeedLimit, WallMode};
use swarmsim::topology::knn;
use swarmsim::{AgentState, SimConfig, TargetState, Vec2};

fn vec2(range: f64) -> impl Strategy<Value = Vec2> {
    (-range..range, -range..range).prop_map(|(x, y)| Vec2::new(x, y))
}

// Integer coordinates make ties common and keep rigid motions exact.
fn grid_points(max_n: usize) -> impl Strategy<Value = Vec<Vec2>> {
    prop::collection::vec((0i32..8, 0i32..8), 3..=max_n).prop_map(|v| {
        v.into_iter()
            .map(|(x, y)| Vec2::new(x as f64, y as f64))
            .collect()
    })
}

fn agents_at(points: &[Vec2]) -> Vec<AgentState> {
    points
        .iter()
        .enumerate()
        .map(|(id, &position)| AgentState {
            id,
            class_id: 0,
            position,
            velocity: Vec2::ZERO,
            repulsion_strength: 1.5,
            objective: 0,
        })
        .collect()
}

fn far_target() -> TargetState {
    TargetState {
        position: Vec2::new(1.0e6, 1.0e6),
        heading: Vec2::new(1.0, 0.0),
        speed: 0.0,
        radius: 1.0,
        heading_hold: 10,
    }
}

fn small_config() -> impl Strategy<Value = SimConfig> {
    (
        3usize..25,
        any::<u64>(),
        0.0..6.0f64,
        0.0..12.0f64,
        20.0..200.0f64,
        0usize..3,
        any::<bool>(),
    )
        .prop_flat_map(|(n, seed, v, gain, l, wall, divide)| {
            (2..n, 0..=n).prop_map(move |(k, fast)| {
                let mut cfg = SimConfig {
                    agent_count: n,
                    k,
                    seed,
                    target_speed: v,
                    repulsion_gain: gain,
                    arena_size: l,
                    target_radius: l / 20.0,
                    speed_limit: if divide {
                        SpeedLimit::Divide
                    } else {
                        SpeedLimit::Cap
                    },
                    wall: [WallMode::Clamp, WallMode::Stop, WallMode::Reflect][wall],
                    ..SimConfig::default()
                };
                cfg = cfg.with_fast_count(fast);
                cfg
            })
        })
}

proptest! {
    #[test]
    fn knn_matches_brute_force(points in grid_points(12), k_frac in 0.0..1.0f64) {
        let n = points.len();
        let k = 2 + ((n - 3) as f64 * k_frac) as usize;
        let nbrs = knn(&points, k).unwrap();
        let oracle = common::brute_knn(&points, k);
        for (i, want) in oracle.iter().enumerate() {
            prop_assert_eq!(nbrs.of(i), want.as_slice());
        }
    }

    #[test]
    fn knn_invariant_under_rigid_motion(points in grid_points(12), dx in -50i32..50, dy in -50i32..50) {
        let k = 2;
        let base = knn(&points, k).unwrap();
        let shifted: Vec<Vec2> = points.iter().map(|p| Vec2::new(p.x + dx as f64, p.y + dy as f64)).collect();
        let rotated: Vec<Vec2> = points.iter().map(|p| Vec2::new(-p.y, p.x)).collect();
        prop_assert_eq!(&knn(&shifted, k).unwrap(), &base);
        prop_assert_eq!(&knn(&rotated, k).unwrap(), &base);
    }

    #[test]
    fn pso_without_social_term_is_inertia(v in vec2(5.0), x in vec2(100.0), omega in 0.0..1.5f64, r in 0.0..1.0f64) {
        prop_assert_eq!(pso_velocity(v, x, x, omega, 0.5, r), v * omega);
    }

    #[test]
    fn single_neighbor_repulsion_points_away(a in vec2(50.0), b in vec2(50.0), a_r in 0.375..1.5f64) {
        prop_assume!(a.distance(b) > 1e-3);
        let pts = [a, b, Vec2::new(1.0e5, 1.0e5)];
        let ctx = StepContext::new(&agents_at(&pts), &far_target(), 2, 0);
        let v = repulsion_velocity(0, &ctx, a_r, 6, 1.0, 1.0, &KeyedDraws::new(0));
        let away = a - b;
        prop_assert!(v.dot(away) >= 0.0);
        let cross = v.x * away.y - v.y * away.x;
        prop_assert!(cross.abs() <= 1e-9 * (v.norm() * away.norm()).max(1e-300));
    }

    #[test]
    fn repulsion_translation_invariant(points in grid_points(10), dx in -30i32..30, dy in -30i32..30) {
        let shift = Vec2::new(dx as f64, dy as f64);
        let ctx = StepContext::new(&agents_at(&points), &far_target(), 2, 0);
        let moved: Vec<Vec2> = points.iter().map(|&p| p + shift).collect();
        let ctx2 = StepContext::new(&agents_at(&moved), &far_target(), 2, 0);
        let draws = KeyedDraws::new(9);
        for i in 0..points.len() {
            let a = repulsion_velocity(i, &ctx, 1.0, 6, 2.0, 2.6, &draws);
            let b = repulsion_velocity(i, &ctx2, 1.0, 6, 2.0, 2.6, &draws);
            prop_assert!((a - b).norm() <= 1e-9 * a.norm().max(1.0), "{:?} vs {:?}", a, b);
        }
    }

    #[test]
    fn repulsion_strength_stays_in_bounds(a in 0.375..1.5f64, seen in any::<bool>(), delta in 0.0..1.0f64) {
        let next = update_repulsion_strength(a, seen, delta, (0.375, 1.5));
        prop_assert!((0.375..=1.5).contains(&next));
        if seen { prop_assert!(next <= a) } else { prop_assert!(next >= a) }
    }

    #[test]
    fn speed_limit_caps_and_keeps_direction(v in vec2(20.0), v_max in 0.1..5.0f64) {
        let out = limit_speed(v, v_max);
        prop_assert!(out.norm() <= v_max * (1.0 + 1e-12));
        if v.norm() <= v_max {
            prop_assert_eq!(out, v);
        } else {
            prop_assert!((out.x * v.y - out.y * v.x).abs() <= 1e-9 * v.norm() * v_max);
            prop_assert!(out.dot(v) > 0.0);
        }
    }

    #[test]
    fn confine_stays_inside(p in vec2(150.0), v in vec2(3.0), mode in 0usize..3) {
        let mode = [WallMode::Clamp, WallMode::Stop, WallMode::Reflect][mode];
        let (q, _) = confine(p, v, 100.0, mode);
        prop_assert!((0.0..=100.0).contains(&q.x) && (0.0..=100.0).contains(&q.y));
        if (0.0..=100.0).contains(&p.x) && (0.0..=100.0).contains(&p.y) {
            prop_assert_eq!(confine(p, v, 100.0, mode), (p, v));
        }
    }

    #[test]
    fn fluctuations_sum_to_zero(vs in prop::collection::vec(vec2(3.0), 1..60)) {
        let u = velocity_fluctuations(&vs);
        let s = u.iter().copied().sum::<Vec2>();
        prop_assert!(s.norm() <= 1e-12 * vs.len() as f64 * 3.0);
        for (a, b) in u.iter().zip(common::fluctuations(&vs)) {
            prop_assert!((*a - b).norm() <= 1e-12);
        }
    }

    #[test]
    fn phi_in_range_and_matches_oracle(v in vec2(3.0), x in vec2(100.0), t in vec2(100.0)) {
        let phi = bearing(x, t).map_or(0.0, |b| heading_bearing(v, b));
        prop_assert!((-1.0..=1.0).contains(&phi));
        prop_assert!((phi - common::phi(v, x, t)).abs() <= 1e-12);
    }

    #[test]
    fn histogram_mass_is_agent_count(
        n in 1usize..30, steps in 1usize..20, bins in 2usize..40, seed in any::<u64>()
    ) {
        let mut s = seed | 1;
        let mut draw = || { s ^= s << 13; s ^= s >> 7; s ^= s << 17; (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0 };
        let samples: Vec<Vec<f64>> = (0..steps).map(|_| (0..n).map(|_| draw()).collect()).collect();
        let h = histogram_phi(&samples, bins).unwrap();
        prop_assert!((h.mass() - n as f64).abs() <= 1e-9);
        prop_assert!(bin_index(1.0, bins) == bins - 1 && bin_index(-1.0, bins) == 0);
    }

    #[test]
    fn time_on_target_ignores_order(mut flags in prop::collection::vec(any::<bool>(), 1..200), seed in any::<u64>()) {
        let before = time_on_target(&flags);
        prop_assert!((0.0..=1.0).contains(&before));
        let len = flags.len();
        flags.rotate_left((seed as usize) % len);
        flags.reverse();
        prop_assert_eq!(time_on_target(&flags), before);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulation_invariants_hold(cfg in small_config()) {
        // Dividing by v_max is not a cap, so the speed invariant only holds for Cap.
        let cfg = SimConfig { t_f: 150, speed_limit: SpeedLimit::Cap, ..cfg };
        let mut sim = Simulation::new(cfg.clone()).unwrap();
        for _ in 0..cfg.t_f {
            let out = sim.advance();
            if let Err(e) = common::check_step(&cfg, &out) {
                return Err(TestCaseError::fail(e));
            }
        }
    }

    #[test]
    fn update_order_does_not_matter(cfg in small_config()) {
        let mut sim = Simulation::new(SimConfig { t_f: 30, ..cfg.clone() }).unwrap();
        for _ in 0..20 {
            sim.advance();
        }
        let ctx = StepContext::new(sim.agents(), sim.target(), cfg.k, sim.step_index());
        let draws = KeyedDraws::new(cfg.seed);
        let forward: Vec<AgentState> = sim.agents().iter().map(|a| update_agent(a, &ctx, &cfg, &draws)).collect();
        let mut backward: Vec<AgentState> = sim.agents().iter().rev().map(|a| update_agent(a, &ctx, &cfg, &draws)).collect();
        backward.reverse();
        prop_assert_eq!(forward, backward);
    }

    #[test]
    fn same_seed_same_trajectory(cfg in small_config()) {
        let cfg = SimConfig { t_f: 50, ..cfg };
        let mut a = Simulation::new(cfg.clone()).unwrap();
        let mut b = Simulation::new(cfg).unwrap();
        for _ in 0..50 {
            a.advance();
            b.advance();
        }
        prop_assert_eq!(a.agents(), b.agents());
        prop_assert_eq!(a.target(), b.target());
    }
}

use ctql_core::env::{
    env_step, herder_repulsion, saturate, step_interaction, target_velocity, DriftState, EnvParams, WorldState,
};
use ctql_core::Vec2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn point() -> impl Strategy<Value = Vec2> {
    (-6.0..6.0f64, -6.0..6.0f64).prop_map(|(x, y)| Vec2::new(x, y))
}

fn world(targets: Vec<Vec2>, herders: Vec<Vec2>) -> WorldState {
    let drifts = targets
        .iter()
        .map(|_| DriftState {
            beta: 0.0,
            theta: 0.0,
            time_since_resample: 0.0,
        })
        .collect();
    WorldState {
        targets,
        herders,
        drifts,
        t: 0.0,
    }
}

proptest! {
    #[test]
    fn saturation_never_exceeds_cap(x in -50.0..50.0f64, y in -50.0..50.0f64, cap in 0.01..5.0f64) {
        let s = saturate(Vec2::new(x, y), cap);
        prop_assert!(s.norm() <= cap * (1.0 + 1e-12));
        if Vec2::new(x, y).norm() <= cap {
            prop_assert_eq!(s, Vec2::new(x, y));
        }
    }

    #[test]
    fn interaction_is_monotone_in_distance(d1 in 0.0..5.0f64, d2 in 0.0..5.0f64, rho in 0.1..4.0f64) {
        let (near, far) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let u = |d: f64| step_interaction(Vec2::new(d, 0.0), Vec2::ZERO, rho);
        prop_assert!(u(near) >= u(far));
    }

    #[test]
    fn repulsion_is_additive_over_herders(x_t in point(), hs in prop::collection::vec(point(), 1..5)) {
        prop_assume!(hs.iter().all(|h| (x_t - *h).norm() > 1e-3));
        let whole = herder_repulsion(x_t, &hs, 0.7, 2.5).unwrap();
        let parts = hs
            .iter()
            .map(|h| herder_repulsion(x_t, std::slice::from_ref(h), 0.7, 2.5).unwrap())
            .fold(Vec2::ZERO, |a, b| a + b);
        prop_assert!((whole - parts).norm() <= 1e-9 * (1.0 + whole.norm()));
    }

    #[test]
    fn repulsion_points_away_from_a_lone_herder(x_t in point(), r in 1e-3..2.5f64, dir in 0.0..std::f64::consts::TAU) {
        let h = x_t + Vec2::from_angle(dir) * r;
        let d = x_t - h;
        prop_assume!(d.norm() < 2.5);
        let f = herder_repulsion(x_t, &[h], 1.0, 2.5).unwrap();
        prop_assert!(f.dot(d) > 0.0);
        prop_assert!(f.cross(d).abs() <= 1e-9 * f.norm() * d.norm());
    }

    #[test]
    fn far_herders_and_no_drift_leave_targets_still(x_t in point(), h in point()) {
        prop_assume!((x_t - h).norm() >= 2.5);
        let params = EnvParams::default();
        let w = world(vec![x_t], vec![h]);
        prop_assert_eq!(target_velocity(0, &w, &params).unwrap(), Vec2::ZERO);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let params = EnvParams { beta_max: 0.0, drift_resample_dt: 1e9, ..params };
        let next = env_step(&w, &[Vec2::ZERO], &params, &mut rng).unwrap();
        prop_assert_eq!(next.targets[0], x_t);
        prop_assert_eq!(next.herders[0], h);
    }

    #[test]
    fn stepping_replays_identically(seed in any::<u64>(), steps in 1usize..200) {
        let params = EnvParams { n_targets: 2, n_herders: 2, ..EnvParams::default() };
        let run = || {
            let mut spawn = ChaCha8Rng::seed_from_u64(seed);
            let mut drift = ChaCha8Rng::seed_from_u64(seed ^ 1);
            let mut w = WorldState::spawn(&params, &mut spawn, &mut drift);
            for k in 0..steps {
                let u = Vec2::from_angle(k as f64 * 0.1) * 1.5;
                match env_step(&w, &[u, -u], &params, &mut drift) {
                    Ok(n) => w = n,
                    Err(_) => break,
                }
            }
            w
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn spawned_targets_start_outside_the_goal(seed in any::<u64>()) {
        let params = EnvParams { n_targets: 5, n_herders: 3, ..EnvParams::default() };
        let mut spawn = ChaCha8Rng::seed_from_u64(seed);
        let mut drift = ChaCha8Rng::seed_from_u64(!seed);
        let w = WorldState::spawn(&params, &mut spawn, &mut drift);
        let h = params.spawn_half_width;
        for x in &w.targets {
            prop_assert!((*x - params.x_g).norm() >= params.rho_g);
            prop_assert!(x.x.abs() <= h && x.y.abs() <= h);
        }
        for x in &w.herders {
            prop_assert!(x.x.abs() <= h && x.y.abs() <= h);
        }
    }
}

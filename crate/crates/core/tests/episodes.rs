use ctql_core::harness::{evaluate, evaluate_episode, final_half_start, run_episode, spawn_world, train};
use ctql_core::policy::Branch;
use ctql_core::{AgentKind, EpisodeOptions, PolicyMode, RunConfig};
use proptest::prelude::*;

fn short(seed: u64, mode: PolicyMode) -> RunConfig {
    RunConfig {
        seed,
        mode,
        n_trials: 2,
        steps_per_trial: 150,
        eval_trials: 2,
        ..RunConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn episodes_are_deterministic(seed in any::<u64>()) {
        let c = short(seed, PolicyMode::Ctql);
        let run = || {
            let mut tables = c.empty_tables().unwrap();
            let r = run_episode(&c, &mut tables, seed, &EpisodeOptions { record_every: Some(1), ..EpisodeOptions::training(0) }).unwrap();
            (r, tables)
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn containment_matches_a_recount_from_rows(seed in any::<u64>(), n_targets in 1usize..4) {
        let mut c = short(seed, PolicyMode::Ctql);
        c.env.n_targets = n_targets;
        let tables = train(&c).unwrap().tables;
        let r = evaluate_episode(&c, &tables, 0, Some(1)).unwrap();
        prop_assume!(r.failure.is_none());
        let steps = c.steps_per_trial;
        prop_assert_eq!(r.rows.len(), steps * (c.env.n_targets + c.env.n_herders));
        let per_step = c.env.n_targets + c.env.n_herders;
        let contained = r.rows
            .chunks(per_step)
            .skip(final_half_start(steps))
            .filter(|step| step.iter().filter(|row| row.agent_kind == AgentKind::Target).all(|row| row.in_goal))
            .count();
        prop_assert_eq!(r.containment_fraction, contained as f64 / (steps - final_half_start(steps)) as f64);
        let last = &r.rows[r.rows.len() - per_step..];
        prop_assert_eq!(r.final_all_in_goal, last.iter().filter(|x| x.agent_kind == AgentKind::Target).all(|x| x.in_goal));
        for row in &r.rows {
            prop_assert!(row.radial >= 0.0);
            prop_assert_eq!(row.in_goal, row.radial < c.env.rho_g);
        }
    }

    #[test]
    fn evaluation_leaves_tables_untouched(seed in any::<u64>()) {
        let c = short(seed, PolicyMode::Ctql);
        let tables = train(&c).unwrap().tables;
        let before = tables.clone();
        evaluate(&c, &tables).unwrap();
        prop_assert_eq!(tables, before);
    }

    #[test]
    fn spawns_match_across_modes(seed in any::<u64>()) {
        let a = short(seed, PolicyMode::Ctql);
        let runs: Vec<_> = PolicyMode::ALL
            .iter()
            .map(|&m| evaluate_episode(&RunConfig { mode: m, ..a.clone() }, &a.empty_tables().unwrap(), 1, None).unwrap().initial)
            .collect();
        prop_assert_eq!(&runs[0], &runs[1]);
        prop_assert_eq!(&runs[0], &runs[2]);
        prop_assert_eq!(&runs[0], &spawn_world(&a.env, a.eval_seed(1)));
    }

    #[test]
    fn switching_follows_the_table_sign(seed in any::<u64>()) {
        let c = short(seed, PolicyMode::Ctql);
        let mut tables = c.empty_tables().unwrap();
        for trial in 0..3 {
            let o = EpisodeOptions { audit: true, ..EpisodeOptions::training(trial) };
            let r = run_episode(&c, &mut tables, c.training_seed(trial), &o).unwrap();
            prop_assert_eq!(r.sources.total(), r.engage_steps);
            for d in &r.decisions {
                prop_assert_eq!(d.branch == Some(Branch::Q), d.max_q > 0.0);
            }
        }
    }

    #[test]
    fn positive_tables_make_ctql_and_pureq_agree(seed in any::<u64>(), fill in 0.01..5.0f64) {
        let ctql = short(seed, PolicyMode::Ctql);
        let pureq = RunConfig { mode: PolicyMode::PureQ, ..ctql.clone() };
        let mut tables = ctql.empty_tables().unwrap();
        let n = tables[0].values().len();
        let n_actions = tables[0].n_actions();
        for (k, s) in (0..n / n_actions).map(|k| (k, ctql.grid.unflatten(k))) {
            for a in 0..n_actions {
                tables[0].set(s, a, fill + ((k * 7 + a * 3) % 11) as f64);
            }
        }
        let a = evaluate_episode(&ctql, &tables, 0, Some(1)).unwrap();
        let b = evaluate_episode(&pureq, &tables, 0, Some(1)).unwrap();
        prop_assert_eq!(a.rows, b.rows);
        prop_assert_eq!(a.sources.tutor, 0);
    }
}

#[test]
fn untrained_evaluation_is_the_projected_tutor() {
    let c = short(3, PolicyMode::Ctql);
    let r = evaluate_episode(&c, &c.empty_tables().unwrap(), 0, None).unwrap();
    assert!(r.engage_steps > 0);
    assert_eq!(r.sources.tutor, r.engage_steps);
}

#[test]
fn pure_tutor_never_uses_the_table() {
    let c = short(5, PolicyMode::PureTutor);
    let r = evaluate_episode(&c, &c.empty_tables().unwrap(), 0, None).unwrap();
    assert_eq!(r.sources.q_greedy, 0);
    assert!(train(&c).is_err());
}

#[test]
fn training_series_has_one_entry_per_trial() {
    let c = short(9, PolicyMode::Ctql);
    let out = train(&c).unwrap();
    assert_eq!(out.metrics.len(), c.n_trials);
    assert!(out.rows.is_empty());
}

#[test]
fn zero_steps_are_rejected() {
    let c = RunConfig {
        steps_per_trial: 0,
        ..RunConfig::default()
    };
    assert!(c.validate().is_err());
}

//! Event-log replay against the simulator's own bookkeeping.

use rand::Rng as _;

use socdesign::env::{Action, Event, GridConfig, HarvestEnv};
use socdesign::fiscal::{apply_tax_period, TaxSchedule};
use socdesign::rng::stream_rng;
use socdesign::Error;

#[test]
fn principal_view_matches_event_replay() {
    let env = HarvestEnv::new(GridConfig::default()).unwrap();
    let mut state = env.reset(31).unwrap();
    let schedule = TaxSchedule::default();
    let mut rng = stream_rng(31, 9);
    let n = state.n_agents();
    let w = state.width;

    let start = env.principal_observe(&state);
    let mut apples = start.apples.clone();
    let mut pos: Vec<[usize; 2]> = start.poses.iter().map(|p| [p.x, p.y]).collect();
    let mut period = vec![0u64; n];
    let mut total = vec![0u64; n];
    let mut events = Vec::new();

    for t in 1..=1000u64 {
        let actions: Vec<Action> = (0..n).map(|_| Action::ALL[rng.random_range(0..Action::COUNT)]).collect();
        events.clear();
        env.step_logged(&mut state, &actions, Some(&mut events)).unwrap();
        for e in &events {
            match *e {
                Event::Move { agent, from, to, .. } => {
                    assert_eq!(pos[agent], from);
                    pos[agent] = to;
                }
                Event::Collect { agent, cell, .. } => {
                    assert!(apples[cell[1] * w + cell[0]]);
                    apples[cell[1] * w + cell[0]] = false;
                    period[agent] += 1;
                    total[agent] += 1;
                }
                Event::Respawn { cell, .. } => {
                    assert!(!apples[cell[1] * w + cell[0]]);
                    apples[cell[1] * w + cell[0]] = true;
                }
                Event::Blocked { .. } => {}
            }
        }
        let view = env.principal_observe(&state);
        assert_eq!(view.apples, apples, "step {t}");
        assert_eq!(view.poses.iter().map(|p| [p.x, p.y]).collect::<Vec<_>>(), pos);
        assert_eq!(view.apples_this_period, period);
        assert_eq!(view.collected_total, total);

        if t % 50 == 0 {
            let s = apply_tax_period(&mut state, &schedule, 50).unwrap();
            assert_eq!(s.apples, period.iter().map(|&a| a as f64).collect::<Vec<_>>());
            assert_eq!(s.tax_paid, vec![0.0; n]);
            period.iter_mut().for_each(|a| *a = 0);
            assert_eq!(state.apples_this_period, period);
        }
    }
}

#[test]
fn tax_period_only_on_boundaries() {
    let env = HarvestEnv::new(GridConfig::default()).unwrap();
    let mut state = env.reset(5).unwrap();
    let schedule = TaxSchedule::default();
    assert!(matches!(apply_tax_period(&mut state, &schedule, 50), Err(Error::Contract(_))));
    for _ in 0..49 {
        env.step(&mut state, &[Action::Forward; 7]).unwrap();
    }
    assert!(matches!(apply_tax_period(&mut state, &schedule, 50), Err(Error::Contract(_))));
    env.step(&mut state, &[Action::Forward; 7]).unwrap();
    let round_before = state.apples_this_round.clone();
    apply_tax_period(&mut state, &schedule, 50).unwrap();
    assert_eq!(state.apples_this_round, round_before);
    assert!(state.apples_this_period.iter().all(|&a| a == 0));
}

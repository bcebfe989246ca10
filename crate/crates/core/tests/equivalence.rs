mod common;

use common::{default_problem, max_abs_diff, random_env, rng, Monolithic};
use edgealloc::agents::{Feedback, HyperParams, InitialAction, MessageM2, Network};
use edgealloc::baselines::{Centralized, OnlineController};
use edgealloc::model::clipped_gradient_factor;
use edgealloc::{EnvSample, Network32, Problem32};
use proptest::prelude::*;

fn envs(p: &edgealloc::Problem<f64>, seed: u64, n: usize) -> Vec<EnvSample<f64>> {
    let mut r = rng(seed);
    (0..n).map(|_| random_env(p, &mut r)).collect()
}

#[test]
fn message_passing_matches_the_global_reference() {
    for (d, b, s) in [(1, 1, 1), (2, 2, 2), (3, 2, 1)] {
        let p = default_problem(d, b, s);
        let hp = HyperParams::new(0.05, 3.0);
        let mut net = Network::new(p.clone(), Feedback::Delayed, InitialAction::Zeros);
        let mut mono = Monolithic::new(p.clone());
        for (t, env) in envs(&p, 7, 80).iter().enumerate() {
            let got = net.run_slot(env, &hp);
            let want = mono.step(env, &hp);
            let diff = max_abs_diff(&got.action, &want.action);
            assert!(diff <= 1e-12, "({d},{b},{s}) slot {t}: {diff}");
            assert!(max_abs_diff(&got.duals, &want.duals) <= 1e-12);
            assert!((got.cost - want.cost).abs() <= 1e-12 * want.cost.abs().max(1.0));
        }
        assert!(max_abs_diff(&net.action(), &mono.x) <= 1e-12);
    }
}

#[test]
fn fresh_feedback_matches_the_centralized_controller() {
    let p = default_problem(2, 2, 2);
    let hp = HyperParams::new(0.02, 2.0);
    let mut net = Network::new(p.clone(), Feedback::Fresh, InitialAction::Midpoint);
    let mut cent = Centralized::new(p.clone(), InitialAction::Midpoint);
    for env in envs(&p, 11, 50) {
        let a = net.step(&env, &hp);
        let b = cent.step(&env, &hp);
        assert!(max_abs_diff(&a.action, &b.action) <= 1e-12);
    }
    assert!(max_abs_diff(&net.action(), &cent.action()) <= 1e-12);
}

#[test]
fn delayed_and_fresh_feedback_differ() {
    let p = default_problem(2, 2, 2);
    let hp = HyperParams::new(0.05, 2.0);
    let e = envs(&p, 3, 30);
    let a = Network::new(p.clone(), Feedback::Delayed, InitialAction::Zeros).run(&e, &hp);
    let b = Network::new(p, Feedback::Fresh, InitialAction::Zeros).run(&e, &hp);
    assert!(max_abs_diff(&a.slots[29].action, &b.slots[29].action) > 1e-9);
}

#[test]
fn wire_payloads_are_the_played_variables_and_last_slot_feedback() {
    let p = default_problem(2, 2, 2);
    let t = &p.topology;
    let hp = HyperParams::new(0.05, 3.0);
    let mut net = Network::new(p.clone(), Feedback::Delayed, InitialAction::Zeros);
    net.enable_tap();
    let mut records = Vec::new();
    for env in envs(&p, 5, 25) {
        records.push(net.run_slot(&env, &hp));
    }
    let log = net.wire_log().unwrap();
    assert_eq!(log.len(), 25);
    for (slot, wire) in log.iter().enumerate() {
        let played = &records[slot].action;
        for n in t.nodes() {
            let outputs = p.coupled_outputs(n);
            let sent: Vec<_> = wire.m1.iter().filter(|m| m.sender == n).collect();
            assert_eq!(sent.len(), outputs.len());
            for (pos, receiver) in outputs {
                let m = sent.iter().find(|m| m.receiver == receiver).unwrap();
                assert_eq!(m.value, played[t.action_offset(n) + pos]);
            }

            let fb: Vec<_> = wire.m2.iter().filter(|m| m.sender == n).collect();
            let mut receivers: Vec<_> = fb.iter().map(|m| m.receiver).collect();
            receivers.sort();
            let mut want = t.required_by(n);
            want.sort();
            assert_eq!(receivers, want);
            let flow = t.constraint_index(n, 0).unwrap();
            let expected = if slot == 0 {
                0.0
            } else {
                let prev = &records[slot - 1];
                prev.duals[flow] * clipped_gradient_factor(prev.constraints[flow])
            };
            for m in fb {
                assert!(m.value >= 0.0);
                assert_eq!(m.value, expected);
            }
        }
    }
}

#[test]
fn selfish_mode_puts_no_feedback_on_the_wire() {
    let p = default_problem(2, 2, 2);
    let mut net = Network::new(p.clone(), Feedback::Selfish, InitialAction::Zeros);
    net.enable_tap();
    net.run(&envs(&p, 1, 10), &HyperParams::new(0.05, 2.0));
    assert!(net
        .wire_log()
        .unwrap()
        .iter()
        .all(|w| w.m2.is_empty() && !w.m1.is_empty()));
}

#[test]
fn duals_follow_the_closed_form_and_actions_stay_in_the_box() {
    let p = default_problem(2, 2, 2);
    let hp = HyperParams::new(0.1, 0.5);
    for fb in [Feedback::Delayed, Feedback::Fresh, Feedback::Selfish] {
        let rec = Network::new(p.clone(), fb, InitialAction::Midpoint).run(&envs(&p, 9, 40), &hp);
        for s in &rec.slots {
            assert!(p.space.contains(&s.action));
            for (l, h) in s.duals.iter().zip(&s.clipped) {
                assert!((l - h / (hp.step * hp.sigma)).abs() <= 1e-12 * l.abs().max(1.0));
            }
        }
    }
}

#[test]
fn single_precision_tracks_double_precision() {
    let p = default_problem(2, 2, 2);
    let p32 = Problem32::with_defaults(p.topology.clone()).unwrap();
    let e = envs(&p, 21, 30);
    let e32: Vec<EnvSample<f32>> = e.iter().map(|v| v.cast()).collect();
    let a = Network::new(p, Feedback::Delayed, InitialAction::Zeros)
        .run(&e, &HyperParams::new(0.02, 2.0));
    let b = Network32::new(p32, Feedback::Delayed, InitialAction::Zeros)
        .run(&e32, &HyperParams::new(0.02, 2.0));
    for (sa, sb) in a.slots.iter().zip(&b.slots) {
        for (x, y) in sa.action.iter().zip(&sb.action) {
            assert!(
                (x - *y as f64).abs() <= 1e-3 * x.abs().max(1.0),
                "{x} vs {y}"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn selfish_actions_ignore_injected_feedback(
        seed in any::<u64>(),
        injected in prop::collection::vec(0.0f64..1e3, 1..12),
    ) {
        let p = default_problem(2, 2, 2);
        let t = p.topology.clone();
        let hp = HyperParams::new(0.05, 2.0);
        let e = envs(&p, seed, 15);
        let clean = Network::new(p.clone(), Feedback::Selfish, InitialAction::Zeros).run(&e, &hp);
        let mut dirty = Network::new(p, Feedback::Selfish, InitialAction::Zeros);
        let nodes: Vec<_> = t.nodes().collect();
        for (slot, env) in e.iter().enumerate() {
            let rec = dirty.run_slot_with(env, &hp, |m2| {
                for (i, v) in injected.iter().enumerate() {
                    let sender = nodes[(i + slot) % nodes.len()];
                    for receiver in t.required_by(sender) {
                        m2.push(MessageM2 { sender, receiver, value: *v });
                    }
                }
            });
            prop_assert_eq!(&rec.action, &clean.slots[slot].action);
        }
    }

    #[test]
    fn cooperative_actions_react_to_injected_feedback(seed in any::<u64>(), v in 1.0f64..1e3) {
        let p = default_problem(1, 1, 1);
        let t = p.topology.clone();
        let hp = HyperParams::new(0.05, 2.0);
        let e = envs(&p, seed, 3);
        let mut clean = Network::new(p.clone(), Feedback::Delayed, InitialAction::Midpoint);
        clean.run(&e, &hp);
        let mut dirty = Network::new(p, Feedback::Delayed, InitialAction::Midpoint);
        let server = t.nodes().last().unwrap();
        for env in &e {
            dirty.run_slot_with(env, &hp, |m2| {
                for receiver in t.required_by(server) {
                    m2.push(MessageM2 { sender: server, receiver, value: v });
                }
            });
        }
        prop_assert!(max_abs_diff(&dirty.action(), &clean.action()) > 0.0);
    }
}

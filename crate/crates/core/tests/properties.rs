mod common;

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use dialsim::rl::{Checkpoint, DqnAgent, Experience, QNetwork, Trainer, TrainerConfig, WarmStart};
use dialsim::rng::{episode_rng, root_rng};
use dialsim::synth::goal_from_record;
use dialsim::{
    featurize, state_dim, validate_act, ActLevel, Agent, DialogAct, DialogueStatus, DomainSchema, ErrorModelConfig,
    GoalDatabase, KnowledgeBase, RuleAgentKind, SlotErrorMode, Speaker, UserGoal, UserSimulator,
};
use proptest::prelude::*;
use rand::Rng;

/// What the state vector claims to encode, computed without the encoder.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Observed {
    user: Option<(String, BTreeSet<String>, BTreeSet<String>)>,
    agent: Option<(String, BTreeSet<String>, BTreeSet<String>)>,
    constraints: BTreeSet<String>,
    requests_seen: BTreeSet<String>,
    available: Vec<bool>,
    turn: u32,
    matches: usize,
}

fn frame(act: &Option<DialogAct>) -> Option<(String, BTreeSet<String>, BTreeSet<String>)> {
    act.as_ref().map(|a| {
        (
            a.intent.clone(),
            a.inform_slots.keys().cloned().collect(),
            a.request_slots.keys().cloned().collect(),
        )
    })
}

#[test]
fn featurize_is_injective_over_a_trace() {
    let d = common::movie();
    let env = common::env_with(&d.kb, d.goals.clone(), ActLevel::Act, ErrorModelConfig::off());
    let dim = state_dim(&d.schema);
    assert_eq!(dim, 2 * 11 + 7 * 29 + 3);
    let mut by_vector: HashMap<Vec<u64>, Observed> = HashMap::new();
    let mut by_state: HashMap<Observed, Vec<u64>> = HashMap::new();
    let mut visited = 0;
    for (i, kind) in [RuleAgentKind::RandomRequest, RuleAgentKind::RequestBasics].iter().cycle().take(10).enumerate() {
        let mut agent = kind.build(&d.schema, i as u64);
        let mut rng = episode_rng(21, i as u64);
        let (mut user, first) = env.start(&mut rng).unwrap();
        let mut tracker = env.tracker();
        tracker.update_user(&env.perceive(&first)).unwrap();
        agent.initialize_episode();
        loop {
            let s = tracker.state();
            let x = featurize(s, &d.schema, env.max_turn(), d.kb.len());
            assert_eq!(x.len(), dim);
            assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
            let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
            let obs = Observed {
                user: frame(&s.last_user_act),
                agent: frame(&s.last_agent_act),
                constraints: s.user_constraints.keys().cloned().collect(),
                requests_seen: s.user_requests_seen.clone(),
                available: s.kb_available.clone(),
                turn: s.turn,
                matches: s.kb_result.matches.len(),
            };
            if let Some(prev) = by_vector.insert(key.clone(), obs.clone()) {
                assert_eq!(prev, obs, "two different states share a vector");
            }
            if let Some(prev) = by_state.insert(obs, key.clone()) {
                assert_eq!(prev, key, "one state featurized two ways");
            }
            visited += 1;
            let act = agent.state_to_action(s).unwrap().act().clone().at_turn(s.turn + 1);
            let sent = tracker.update_agent(&act).unwrap();
            let step = env.simulator().next(&mut user, &sent, &mut rng).unwrap();
            tracker.update_user(&env.perceive(&step.act)).unwrap();
            if step.episode_over {
                break;
            }
        }
    }
    assert!(visited > 40, "trace too short: {visited}");
}

#[test]
fn fresh_state_has_empty_agent_sections() {
    let (t, env) = common::tiny_env(ActLevel::Act);
    let mut rng = root_rng(1);
    let (_, first) = env.start(&mut rng).unwrap();
    let mut tracker = env.tracker();
    tracker.update_user(&first).unwrap();
    let x = tracker.featurize();
    let (ni, ns) = (t.schema.num_intents(), t.schema.num_slots());
    let agent = ni + 2 * ns..2 * ni + 4 * ns;
    assert!(x[agent].iter().all(|v| *v == 0.0));
    assert_eq!(x[..ni].iter().sum::<f64>(), 1.0);
}

#[test]
fn goals_are_sampled_uniformly() {
    let d = common::movie();
    let goals: Vec<UserGoal> = d.goals.goals()[..4].to_vec();
    let db = Arc::new(GoalDatabase::new(goals.clone(), &d.schema).unwrap());
    let sim = UserSimulator::new(d.kb.clone(), db);
    let n = 10_000;
    let mut counts = [0usize; 4];
    for i in 0..n {
        let g = sim.sample_goal(&mut episode_rng(3, i)).unwrap();
        counts[goals.iter().position(|x| *x == g).unwrap()] += 1;
    }
    for c in counts {
        let f = c as f64 / n as f64;
        assert!((f - 0.25).abs() <= 0.02, "frequency {f}");
    }
    let one = Arc::new(GoalDatabase::new(goals[..1].to_vec(), &d.schema).unwrap());
    let sim = UserSimulator::new(d.kb.clone(), one);
    for i in 0..50 {
        assert_eq!(sim.sample_goal(&mut episode_rng(4, i)).unwrap(), goals[0]);
    }
}

#[test]
fn first_user_act_shape() {
    let d = common::movie();
    let sim = UserSimulator::new(d.kb.clone(), Arc::new(d.goals.clone()));
    let ticket = d.schema.default_request_slot();
    for i in 0..2000 {
        let (state, act) = sim.initialize_episode(&mut episode_rng(5, i)).unwrap();
        assert_eq!(act.intent, "request");
        assert_eq!(act.turn, 0);
        assert!(!act.inform_slots.is_empty());
        if let Some(m) = state.goal.inform_slots.get("moviename") {
            assert_eq!(act.inform_slots.get("moviename"), Some(m));
        }
        assert_eq!(act.request_slots.len(), 1);
        let asked = act.request_slots.keys().next().unwrap();
        let non_ticket = state.goal.request_slots.keys().any(|s| s != ticket);
        assert_eq!(asked != ticket, non_ticket);
    }
}

#[test]
fn every_act_validates_across_agents_and_noise() {
    let d = common::movie();
    for (p, mode) in [(0.0, SlotErrorMode::Mixed), (0.3, SlotErrorMode::Mixed), (0.2, SlotErrorMode::Value)] {
        let noise = ErrorModelConfig::new(p / 2.0, p, mode).unwrap();
        let env = common::env_with(&d.kb, d.goals.clone(), ActLevel::Act, noise);
        for kind in RuleAgentKind::ALL {
            let mut agent = kind.build(&d.schema, 1);
            for o in env.run_many(&mut agent, 200, 77, 0).unwrap() {
                for act in &o.transcript {
                    let v = validate_act(&d.schema, act);
                    assert!(v.is_empty(), "{kind:?}: {act} -> {v:?}");
                }
            }
        }
    }
}

#[test]
fn immediate_thanks_fails() {
    let (t, env) = common::tiny_env(ActLevel::Act);
    let mut agent = dialsim::ScriptedAgent::new(vec![DialogAct::agent("thanks")]);
    let o = env.run_episode(&mut agent, &mut root_rng(0)).unwrap();
    assert_eq!(o.status, DialogueStatus::Failure);
    assert_eq!(o.total_turns, 2);
    assert_eq!(o.transcript.len(), 3);
    let max_turn = t.schema.max_turn() as f64;
    assert_eq!(o.reward, -1.0 - max_turn);
}

#[test]
fn request_to_unknown_slot_gets_anything() {
    let d = common::movie();
    let env = common::env_with(&d.kb, d.goals.clone(), ActLevel::Act, ErrorModelConfig::off());
    let mut rng = root_rng(2);
    let (mut user, _) = env.start(&mut rng).unwrap();
    let slot = ["genre", "actor", "video_format", "price"]
        .into_iter()
        .find(|s| !user.goal.inform_slots.contains_key(*s) && !user.goal.request_slots.contains_key(*s))
        .unwrap();
    let step = env
        .simulator()
        .next(&mut user, &DialogAct::agent("request").request(slot).at_turn(1), &mut rng)
        .unwrap();
    assert_eq!(step.act.inform_slots[slot], "anything");
}

fn tiny_config() -> TrainerConfig {
    TrainerConfig {
        simulation_epoch_size: 8,
        num_batches: 2,
        warm_start_episodes: 20,
        eval_episodes: 10,
        ..TrainerConfig::default()
    }
}

#[test]
fn epsilon_one_is_uniform() {
    let (t, env) = common::tiny_env(ActLevel::Act);
    let cfg = TrainerConfig {
        epsilon: 1.0,
        ..tiny_config()
    };
    let mut agent = DqnAgent::new(&cfg, t.schema.clone(), env.max_turn(), t.kb.len());
    let (_, first) = env.start(&mut root_rng(0)).unwrap();
    let mut tracker = env.tracker();
    tracker.update_user(&first).unwrap();
    let x = tracker.featurize();
    let n = agent.actions().len();
    let draws = 10_000;
    let mut counts = vec![0usize; n];
    for _ in 0..draws {
        counts[agent.run_policy(&x, tracker.state()).unwrap()] += 1;
    }
    for c in counts {
        let f = c as f64 / draws as f64;
        assert!((f - 1.0 / n as f64).abs() <= 0.02, "{f} vs {}", 1.0 / n as f64);
    }
}

#[test]
fn greedy_policy_is_argmax() {
    let (t, env) = common::tiny_env(ActLevel::Act);
    let mut agent = DqnAgent::new(&tiny_config(), t.schema.clone(), env.max_turn(), t.kb.len());
    agent.set_greedy(true);
    for i in 0..50 {
        let (_, first) = env.start(&mut episode_rng(6, i)).unwrap();
        let mut tracker = env.tracker();
        tracker.update_user(&first).unwrap();
        let x = tracker.featurize();
        let q = agent.network().forward(&x).unwrap();
        let best = (0..q.len()).fold(0, |b, i| if q[i] > q[b] { i } else { b });
        assert_eq!(agent.run_policy(&x, tracker.state()).unwrap(), best);
    }
}

#[test]
fn warm_start_follows_the_rule_agent() {
    let (t, env) = common::tiny_env(ActLevel::Act);
    let cfg = TrainerConfig {
        epsilon: 0.0,
        buffer_capacity: 100_000,
        ..tiny_config()
    };
    let mut dqn = DqnAgent::new(&cfg, t.schema.clone(), env.max_turn(), t.kb.len());
    dqn.set_warm_start(true);
    dqn.set_recording(true);
    let mut rule = RuleAgentKind::RequestBasics.build(&t.schema, 0);
    for i in 0..40 {
        let a = env.run_episode(&mut dqn, &mut episode_rng(8, i)).unwrap();
        let b = env.run_episode(&mut rule, &mut episode_rng(8, i)).unwrap();
        assert_eq!(a.transcript, b.transcript, "episode {i}");
    }
    assert!(dqn.in_warm_start());
    assert!(!dqn.pool().is_empty());
}

#[test]
fn warm_start_stops_at_capacity() {
    let (_, env) = common::tiny_env(ActLevel::Act);
    let cfg = TrainerConfig {
        buffer_capacity: 50,
        warm_start_episodes: 1000,
        ..tiny_config()
    };
    let mut trainer = Trainer::new(cfg, env).unwrap();
    let episodes = trainer.warm_start().unwrap();
    assert!(episodes < 1000);
    assert!(trainer.agent().pool().is_full());
    assert!(!trainer.agent().in_warm_start());
}

#[test]
fn zero_episode_epoch_only_trains() {
    let (_, env) = common::tiny_env(ActLevel::Act);
    let cfg = TrainerConfig {
        simulation_epoch_size: 0,
        ..tiny_config()
    };
    let mut trainer = Trainer::new(cfg.clone(), env.clone()).unwrap();
    trainer.warm_start().unwrap();
    let before = trainer.agent().pool().len();
    let net_before = trainer.agent().network().checksum();
    let row = trainer.run_epoch().unwrap();
    assert_eq!(row.buffer_size, before);
    assert_eq!(trainer.agent().pool().len(), before);
    assert!(!row.flushed);
    assert_ne!(trainer.agent().network().checksum(), net_before);

    let cold = TrainerConfig {
        warm_start: WarmStart::Off,
        ..cfg
    };
    let mut trainer = Trainer::new(cold, env).unwrap();
    assert!(matches!(trainer.run_epoch(), Err(dialsim::Error::EmptyPool)));
}

#[test]
fn target_network_changes_only_at_epoch_end() {
    let (_, env) = common::tiny_env(ActLevel::Act);
    let mut trainer = Trainer::new(tiny_config(), env).unwrap();
    trainer.warm_start().unwrap();
    for _ in 0..3 {
        let target = trainer.agent().target_network().checksum();
        trainer.simulate(4).unwrap();
        let agent = trainer.agent_mut();
        agent.train(16, 3).unwrap();
        assert_eq!(agent.target_network().checksum(), target);
        assert_ne!(agent.network().checksum(), target);
        agent.sync_target();
        assert_eq!(agent.target_network().checksum(), agent.network().checksum());
    }
    let row = trainer.run_epoch().unwrap();
    assert_eq!(row.epoch, 1);
    assert_eq!(
        trainer.agent().target_network().checksum(),
        trainer.agent().network().checksum()
    );
}

#[test]
fn trainer_flushes_follow_the_policy() {
    let (_, env) = common::tiny_env(ActLevel::Act);
    let cfg = TrainerConfig {
        learning_rate: 0.01,
        num_batches: 5,
        simulation_epoch_size: 16,
        eval_episodes: 20,
        ..tiny_config()
    };
    let mut trainer = Trainer::new(cfg, env).unwrap();
    let rows = trainer.run(|_| {}).unwrap();
    assert_eq!(rows.len(), 100);
    // Replay the stated rule over the logged success rates.
    let mut best: Option<f64> = None;
    for r in &rows {
        let expect = match best {
            None => r.success_rate >= 0.30,
            Some(b) => r.success_rate > b,
        };
        if expect {
            best = Some(r.success_rate);
        }
        assert_eq!(r.flushed, expect, "epoch {}", r.epoch);
        assert!(r.buffer_size <= 1000);
    }
}

#[test]
fn checkpoint_round_trip_is_bit_identical() {
    let (t, env) = common::tiny_env(ActLevel::Act);
    let cfg = tiny_config();
    let mut trainer = Trainer::new(cfg.clone(), env.clone()).unwrap();
    trainer.warm_start().unwrap();
    trainer.run_epoch().unwrap();
    let agent = trainer.agent();
    let ckpt = Checkpoint::from_agent(agent, &t.schema, env.max_turn(), t.kb.len(), &cfg);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    ckpt.save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    loaded.check_compatible(&t.schema).unwrap();
    assert!(loaded.check_compatible(&DomainSchema::movie_default()).is_err());
    let restored = loaded.into_agent(t.schema.clone(), t.kb.len()).unwrap();
    let mut rng = root_rng(0);
    for _ in 0..50 {
        let x: Vec<f64> = (0..state_dim(&t.schema)).map(|_| f64::from(rng.gen_range(0..2u8))).collect();
        let a = agent.network().forward(&x).unwrap();
        let b = restored.network().forward(&x).unwrap();
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}

#[test]
fn bellman_target_arithmetic() {
    let target = QNetwork::from_parts(1, 1, 2, vec![0.0], vec![0.0], vec![0.0, 0.0], vec![2.0, -1.0]).unwrap();
    let e = |done| Experience {
        s: vec![1.0],
        a: 0,
        r: 1.0,
        s_next: vec![1.0],
        done,
    };
    let y = QNetwork::targets(&target, &[e(false), e(true)], 0.9).unwrap();
    assert!((y[0] - 2.8).abs() < 1e-12);
    assert_eq!(y[1], 1.0);
}

#[test]
fn frozen_batch_loss_does_not_increase() {
    let mut rng = root_rng(12);
    let mut net = QNetwork::new(6, 8, 3, &mut rng);
    let target = QNetwork::new(6, 8, 3, &mut rng);
    let batch: Vec<Experience> = (0..8)
        .map(|_| Experience {
            s: (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            a: rng.gen_range(0..3),
            r: rng.gen_range(-1.0..1.0),
            s_next: (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            done: rng.gen_bool(0.3),
        })
        .collect();
    let mut last = f64::INFINITY;
    for _ in 0..100 {
        let loss = net.batch_update(&target, &batch, 0.9, 1e-3, None).unwrap();
        assert!(loss <= last + 1e-12, "{loss} > {last}");
        last = loss;
    }
}

#[test]
fn upper_bound_counts_satisfiable_goals() {
    let d = common::movie();
    let mut rng = root_rng(0);
    let mut goals = Vec::new();
    for r in d.kb.records().iter().take(7) {
        goals.push(
            goal_from_record(&d.schema, r, &["moviename", "theater", "starttime", "date", "numberofpeople"], &[], 2)
                .unwrap(),
        );
    }
    for i in 0..3 {
        goals.push(
            UserGoal::new()
                .constrain("moviename", format!("no such film {i}"))
                .constrain("theater", "nowhere")
                .constrain("starttime", "3 am")
                .constrain("date", "never")
                .constrain("numberofpeople", rng.gen_range(1..5).to_string())
                .want("ticket"),
        );
    }
    // Independent oracle: a goal is reachable when some record agrees on
    // every constraint the KB stores.
    let reachable = goals
        .iter()
        .filter(|g| {
            d.kb.records().iter().any(|r| {
                g.inform_slots
                    .iter()
                    .filter(|(s, _)| d.schema.is_lookup(s))
                    .all(|(s, v)| r.get(s).is_some_and(|x| x.eq_ignore_ascii_case(v)))
            })
        })
        .count();
    assert_eq!(reachable, 7);
    let db = GoalDatabase::new(goals, &d.schema).unwrap();
    assert!((dialsim::rl::compute_upper_bound(&db, &d.kb) - 0.7).abs() < 1e-12);
}

#[test]
fn runs_are_reproducible() {
    let d = common::movie();
    let noise = ErrorModelConfig::new(0.1, 0.2, SlotErrorMode::Mixed).unwrap();
    let env = common::env_with(&d.kb, d.goals.clone(), ActLevel::Act, noise);
    let mut a = RuleAgentKind::RandomRequest.build(&d.schema, 4);
    let mut b = RuleAgentKind::RandomRequest.build(&d.schema, 4);
    assert_eq!(env.run_many(&mut a, 30, 9, 0).unwrap(), env.run_many(&mut b, 30, 9, 0).unwrap());
    // Stream i does not depend on what ran before it.
    let mut c = RuleAgentKind::RequestBasics.build(&d.schema, 0);
    let all = env.run_many(&mut c, 10, 9, 0).unwrap();
    let tail = env.run_many(&mut c, 5, 9, 5).unwrap();
    assert_eq!(&all[5..], &tail[..]);
}

fn kb_two(schema: &Arc<DomainSchema>) -> Arc<KnowledgeBase> {
    let row = |pairs: &[(&str, &str)]| pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    Arc::new(
        KnowledgeBase::new(
            schema.clone(),
            vec![
                row(&[("moviename", "deadpool"), ("theater", "carmike summit 16"), ("city", "birmingham"), ("date", "today"), ("starttime", "4 pm")]),
                row(&[("moviename", "deadpool"), ("theater", "amc pacific place 11 theater"), ("city", "seattle"), ("date", "tomorrow"), ("starttime", "9:00 pm")]),
            ],
        )
        .unwrap(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn episode_invariants_hold(seed in any::<u64>(), kind in 0usize..5, p in 0.0f64..0.5) {
        let schema = Arc::new(DomainSchema::movie_default());
        let kb = kb_two(&schema);
        let goals = GoalDatabase::new(
            kb.records()
                .iter()
                .map(|r| goal_from_record(&schema, r, &["moviename", "theater", "starttime", "date", "numberofpeople"], &[], 2).unwrap())
                .collect(),
            &schema,
        )
        .unwrap();
        let noise = ErrorModelConfig::new(p / 3.0, p, SlotErrorMode::Mixed).unwrap();
        let env = common::env_with(&kb, goals, ActLevel::Act, noise);
        let mut agent = RuleAgentKind::ALL[kind].build(&schema, seed);
        let o = env.run_episode(&mut agent, &mut root_rng(seed)).unwrap();
        prop_assert_ne!(o.status, DialogueStatus::NoOutcomeYet);
        prop_assert!(o.total_turns <= env.max_turn() + 2);
        prop_assert_eq!(o.transcript.len() % 2, 1);
        for (i, act) in o.transcript.iter().enumerate() {
            prop_assert_eq!(act.turn as usize, i);
            prop_assert_eq!(act.speaker == Speaker::User, i % 2 == 0);
        }
        let last = o.transcript.last().unwrap();
        prop_assert_eq!(last.turn, o.total_turns);
        // Success needs a booking the user accepted.
        if o.status == DialogueStatus::Success {
            let booked = o.transcript.iter().any(|a| a.speaker == Speaker::Agent && a.inform_slots.get("taskcomplete").is_some_and(|v| v == "taskcomplete"));
            prop_assert!(booked);
        }
    }

    #[test]
    fn zero_noise_is_passthrough(seed in any::<u64>(), kind in 0usize..5) {
        let d = common::tiny();
        let clean = common::env_with(&d.kb, d.goals.clone(), ActLevel::Act, ErrorModelConfig::off());
        let zero = common::env_with(&d.kb, d.goals.clone(), ActLevel::Act, ErrorModelConfig::new(0.0, 0.0, SlotErrorMode::Value).unwrap());
        let mut a = RuleAgentKind::ALL[kind].build(&d.schema, seed);
        let mut b = RuleAgentKind::ALL[kind].build(&d.schema, seed);
        prop_assert_eq!(
            clean.run_episode(&mut a, &mut root_rng(seed)).unwrap(),
            zero.run_episode(&mut b, &mut root_rng(seed)).unwrap()
        );
    }
}

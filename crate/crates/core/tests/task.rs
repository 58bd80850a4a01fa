mod common;

use std::collections::BTreeMap;

use goalworld::rng::stream;
use goalworld::task::*;
use goalworld::world::{EmoteKind, GameAction};
use proptest::prelude::*;
use rand::RngCore;

use common::{kitchen, object};

fn log_with(actions: Vec<Option<GameAction>>) -> EpisodeLog {
    let scenario = kitchen();
    let mut turns = Vec::new();
    for (i, a) in actions.into_iter().enumerate() {
        turns.push(TurnEvent::player(format!("line {i}")));
        turns.push(TurnEvent::env("ok", a));
    }
    EpisodeLog {
        id: "fixture".into(),
        world_id: "w".into(),
        turns_used: turns.len() / 2,
        scenario,
        goal: None,
        turns,
        reward: 0,
        partial: false,
    }
}

#[test]
fn singleton_support_picks_that_action() {
    let s = kitchen();
    let get = GameAction::Get(object(&s, "lantern"));
    let log = log_with(vec![None, Some(get.clone())]);
    let (_, g) = sample_goal(&log, GoalType::GameAct, &mut stream(1, &[])).unwrap();
    assert_eq!(g.target, get);
}

#[test]
fn emote_goal_type_selects_the_emote() {
    let s = kitchen();
    let log = log_with(vec![Some(GameAction::Get(object(&s, "hay"))), Some(GameAction::Emote(EmoteKind::Nudge))]);
    let (_, g) = sample_goal(&log, GoalType::Emote, &mut stream(2, &[])).unwrap();
    assert_eq!(g, Goal::emote(EmoteKind::Nudge));
}

#[test]
fn no_goal_of_requested_type_is_an_error() {
    let log = log_with(vec![None, Some(GameAction::Emote(EmoteKind::Wave))]);
    let err = sample_goal(&log, GoalType::GameAct, &mut stream(3, &[])).unwrap_err();
    assert!(matches!(err, TaskError::NoGoalAvailable { .. }));
}

#[test]
fn goal_sampling_is_uniform_over_two_actions() {
    let s = kitchen();
    let a = GameAction::Get(object(&s, "hay"));
    let b = GameAction::Get(object(&s, "lantern"));
    let log = log_with(vec![Some(a.clone()), Some(b)]);
    let mut rng = stream(4, &[]);
    let n = 10_000;
    let hits = (0..n)
        .filter(|_| sample_goal(&log, GoalType::GameAct, &mut rng).unwrap().1.target == a)
        .count();
    let frac = hits as f64 / n as f64;
    assert!((frac - 0.5).abs() < 0.03, "{frac}");
}

#[test]
fn empty_history_observation_has_only_header_segments() {
    let s = kitchen();
    let obs = flatten_observation(&s.view(Speaker::Player), &[], None);
    let markers: Vec<&str> = obs.tokens.iter().map(String::as_str).filter(|t| t.starts_with('_') && t.ends_with('_')).collect();
    assert_eq!(markers, HEADER_SEGMENTS.to_vec());
    assert_eq!(obs, flatten_observation(&s.view(Speaker::Player), &[], None));
}

#[test]
fn observation_hides_partner_persona_and_orders_history() {
    let s = kitchen();
    let hist = vec![TurnEvent::player("first words"), TurnEvent::env("second words", None)];
    let obs = flatten_observation(&s.view(Speaker::Player), &hist, None);
    let text = obs.to_string();
    assert!(text.contains("i guard the gate"));
    assert!(!text.contains("queen"));
    assert!(text.find("first").unwrap() < text.find("second").unwrap());
    let env_obs = flatten_observation(&s.view(Speaker::Env), &hist, None);
    assert!(env_obs.to_string().contains("queen"));
    assert!(!env_obs.to_string().contains("gate"));
}

#[test]
fn goal_segment_present_only_when_requested() {
    let s = kitchen();
    let g = Goal::new(GameAction::Get(object(&s, "hay")));
    let with = flatten_observation(&s.view(Speaker::Player), &[], Some(&g));
    let without = flatten_observation(&s.view(Speaker::Player), &[], None);
    assert!(with.tokens.iter().any(|t| t == GOAL));
    assert!(!without.tokens.iter().any(|t| t == GOAL));
}

#[test]
fn last_action_difference_is_after_final_partner_act() {
    let s = kitchen();
    let base = vec![TurnEvent::player("hello"), TurnEvent::env("hi", Some(GameAction::Get(object(&s, "hay"))))];
    let mut other = base.clone();
    other[1].action = Some(GameAction::Get(object(&s, "lantern")));
    let a = flatten_observation(&s.view(Speaker::Player), &base, None).tokens;
    let b = flatten_observation(&s.view(Speaker::Player), &other, None).tokens;
    let last_act = a.iter().rposition(|t| t == PARTNER_ACT).unwrap();
    assert_eq!(a[..=last_act], b[..=last_act]);
    assert_ne!(a[last_act + 1..], b[last_act + 1..]);
}

/// Replays a fixed list of env replies.
struct Replay(Vec<Option<GameAction>>);

impl EnvAgent for Replay {
    fn respond(&self, ctx: &EnvContext<'_>, _rng: &mut dyn RngCore) -> Result<EnvResponse, TaskError> {
        let t = ctx.history.iter().filter(|e| e.speaker == Speaker::Player).count() - 1;
        Ok(EnvResponse { utterance: "ok".into(), action: self.0.get(t).cloned().flatten() })
    }
}

#[test]
fn goal_action_at_first_step_rewards_immediately() {
    let s = kitchen();
    let get = GameAction::Get(object(&s, "lantern"));
    let state = EpisodeState::new(s, Goal::new(get.clone()), 3);
    let (next, ev, r, done) = env_step(&state, "take a look at the lantern", &Replay(vec![Some(get.clone())]), &mut stream(0, &[])).unwrap();
    assert_eq!((r, done, next.turns_used), (1, true, 1));
    assert_eq!(ev.action, Some(get));
    let again = env_step(&next, "more", &Replay(vec![]), &mut stream(0, &[]));
    assert!(matches!(again, Err(TaskError::EpisodeDone)));
}

#[test]
fn horizon_exhaustion_without_goal() {
    let s = kitchen();
    let state = EpisodeState::new(s.clone(), Goal::new(GameAction::Get(object(&s, "hay"))), 3);
    let mut st = state;
    let env = Replay(vec![None, None, None]);
    let mut last = (0, false);
    while !st.done {
        let (n, _, r, d) = env_step(&st, "chat", &env, &mut stream(0, &[])).unwrap();
        st = n;
        last = (r, d);
    }
    assert_eq!(last, (0, true));
    assert_eq!(st.turns_used, 3);
}

#[test]
fn emote_goal_reached_at_second_step() {
    let s = kitchen();
    let env = Replay(vec![None, Some(GameAction::Emote(EmoteKind::Nod))]);
    let mut st = EpisodeState::new(s, Goal::emote(EmoteKind::Nod), 3);
    while !st.done {
        st = env_step(&st, "do you agree with me", &env, &mut stream(0, &[])).unwrap().0;
    }
    assert_eq!((st.reward, st.turns_used), (1, 2));
}

#[test]
fn inadmissible_env_action_is_a_fault() {
    let s = kitchen();
    let table = object(&s, "table");
    let st = EpisodeState::new(s, Goal::emote(EmoteKind::Nod), 1);
    let err = env_step(&st, "lift the table", &Replay(vec![Some(GameAction::Get(table))]), &mut stream(0, &[])).unwrap_err();
    assert!(matches!(err, TaskError::EnvAgentFault(_)));
}

struct Say(&'static str);

impl PlayerPolicy for Say {
    fn utter(&self, _: &PlayerContext<'_>, _: &mut dyn RngCore) -> Result<String, TaskError> {
        Ok(self.0.to_string())
    }
}

/// Says the first trigger of the goal, as listed by the templates.
struct Oracle;

impl PlayerPolicy for Oracle {
    fn utter(&self, ctx: &PlayerContext<'_>, _: &mut dyn RngCore) -> Result<String, TaskError> {
        let s = ctx.scenario;
        Ok(templates::trigger_utterances(&ctx.goal.target, &s.world, s.player.id)[0].clone())
    }
}

#[test]
fn silent_policy_never_succeeds_with_trigger_only_env() {
    let s = kitchen();
    let env = ScriptedEnv { comply_prob: 1.0, spontaneous_prob: 0.0 };
    let cfg = TaskConfig { horizon: 3, ..TaskConfig::default() };
    let log = run_episode(&Say(""), &env, &s, &Goal::new(GameAction::Get(object(&s, "hay"))), &cfg, &mut stream(5, &[])).unwrap();
    assert_eq!((log.reward, log.turns_used), (0, 3));
}

#[test]
fn oracle_policy_succeeds_in_one_turn() {
    let s = kitchen();
    let env = ScriptedEnv { comply_prob: 1.0, spontaneous_prob: 0.0 };
    let goals = [
        GameAction::Get(object(&s, "hay")),
        GameAction::Hug(s.player.id),
        GameAction::Emote(EmoteKind::Laugh),
    ];
    for g in goals {
        let log = run_episode(&Oracle, &env, &s, &Goal::new(g), &TaskConfig::default(), &mut stream(6, &[])).unwrap();
        assert_eq!((log.reward, log.turns_used), (1, 1));
    }
}

#[test]
fn identical_seeds_give_identical_logs() {
    let s = kitchen();
    let env = ScriptedEnv::default();
    let g = Goal::new(GameAction::Get(object(&s, "hay")));
    let cfg = TaskConfig { horizon: 3, ..TaskConfig::default() };
    let a = run_episode(&Say("what brings you here"), &env, &s, &g, &cfg, &mut stream(7, &[])).unwrap();
    let b = run_episode(&Say("what brings you here"), &env, &s, &g, &cfg, &mut stream(7, &[])).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn scripted_goal_probability_matches_frequency() {
    let s = kitchen();
    let env = ScriptedEnv { comply_prob: 0.8, spontaneous_prob: 0.3 };
    let world = s.world.clone();
    let admissible = goalworld::world::enumerate_admissible(&world, s.env_char.id);
    let goal = GameAction::Get(object(&s, "hay"));
    for u in ["grab that hay", "tell me about yourself"] {
        let hist = vec![TurnEvent::player(u)];
        let ctx = EnvContext { scenario: &s, world: &world, history: &hist, admissible: &admissible };
        let p = env.goal_probability(&ctx, u, &goal);
        let mut rng = stream(8, &[]);
        let n = 20_000;
        let hits = (0..n).filter(|_| env.respond_rng(&ctx, &mut rng).action.as_ref() == Some(&goal)).count();
        let f = hits as f64 / n as f64;
        assert!((f - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt() + 1e-3, "{u}: {f} vs {p}");
    }
}

fn small_gen() -> GenConfig {
    GenConfig { worlds: 4, unseen_worlds: 2, episodes_per_world: 30, valid_per_world: 2, test_per_world: 5, ..GenConfig::default() }
}

#[test]
fn one_world_one_episode_corpus() {
    let cfg = GenConfig { worlds: 1, unseen_worlds: 0, episodes_per_world: 1, valid_per_world: 0, test_per_world: 0, ..GenConfig::default() };
    let c = generate_synthetic_corpus(&cfg, 1).unwrap();
    assert_eq!(c.logs.len(), 1);
    assert_eq!(c.logs[0].world_id, c.worlds[0].id);
}

#[test]
fn zero_sized_corpus_is_a_config_error() {
    let cfg = GenConfig { worlds: 0, ..GenConfig::default() };
    assert!(matches!(generate_synthetic_corpus(&cfg, 1), Err(TaskError::Config(_))));
}

#[test]
fn splits_are_disjoint_and_unseen_worlds_stay_out_of_train() {
    let c = generate_synthetic_corpus(&small_gen(), 9).unwrap();
    let mut seen = std::collections::BTreeSet::new();
    for l in &c.logs {
        assert!(seen.insert(l.id.clone()), "duplicate id {}", l.id);
    }
    for l in c.split(Split::Train) {
        assert!(!c.manifest.unseen_worlds.contains(&l.world_id));
    }
    for l in c.split(Split::TestUnseen) {
        assert!(c.manifest.unseen_worlds.contains(&l.world_id));
    }
    assert_eq!(c.split(Split::TestSeen).len(), 4 * 5);
}

#[test]
fn generation_is_deterministic_and_round_trips() {
    let a = generate_synthetic_corpus(&small_gen(), 10).unwrap();
    let b = generate_synthetic_corpus(&small_gen(), 10).unwrap();
    assert_eq!(a, b);
    let dir = tempfile::tempdir().unwrap();
    a.save(dir.path()).unwrap();
    assert_eq!(Corpus::load(dir.path()).unwrap(), a);
}

#[test]
fn generated_logs_respect_the_engine_and_player_never_acts() {
    let c = generate_synthetic_corpus(&small_gen(), 11).unwrap();
    for l in &c.logs {
        let mut w = l.scenario.world.clone();
        assert!(l.scenario.same_room());
        for t in &l.turns {
            if t.speaker == Speaker::Player {
                assert!(t.action.is_none());
            } else if let Some(a) = &t.action {
                w = goalworld::world::apply_action(&w, l.scenario.env_char.id, a).unwrap().0;
            }
        }
    }
}

#[test]
fn get_trigger_audit_on_a_thousand_logs() {
    let cfg = GenConfig { worlds: 20, unseen_worlds: 0, episodes_per_world: 50, valid_per_world: 0, test_per_world: 0, ..GenConfig::default() };
    let c = generate_synthetic_corpus(&cfg, 12).unwrap();
    assert_eq!(c.logs.len(), 1000);
    let logs: Vec<&EpisodeLog> = c.logs.iter().collect();
    let (hits, total) = audit_get_trigger(&logs);
    assert!(total > 50, "{total}");
    assert!(hits as f64 >= 0.95 * total as f64, "{hits}/{total}");
}

#[test]
fn gen_config_parses_root_and_section_keys_and_rejects_unknown() {
    let c = GenConfig::parse("worlds = 3\n[gen]\nepisodes_per_world = 7\n").unwrap();
    assert_eq!((c.worlds, c.episodes_per_world), (3, 7));
    assert!(GenConfig::parse("[gen]\nwrolds = 3\n").is_err());
    assert!(GenConfig::parse("[gen]\ncomply_prob = 1.5\n").is_err());
}

#[test]
fn goal_type_distribution_in_corpus_covers_both_types() {
    let c = generate_synthetic_corpus(&small_gen(), 13).unwrap();
    let mut counts: BTreeMap<GoalType, usize> = BTreeMap::new();
    for l in &c.logs {
        for a in l.env_actions() {
            *counts.entry(GoalType::of(a)).or_default() += 1;
        }
    }
    assert!(counts[&GoalType::GameAct] > 0 && counts[&GoalType::Emote] > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn horizon_three_never_worse_than_one(seed in 0u64..1000, u in 0usize..4) {
        let s = kitchen();
        let env = ScriptedEnv::default();
        let utterances = ["grab that hay", "tell me about yourself", "give me a hug", "take a look at the lantern"];
        let g = Goal::new(GameAction::Get(object(&s, "hay")));
        let one = run_episode(&Say(utterances[u]), &env, &s, &g, &TaskConfig { horizon: 1, ..TaskConfig::default() }, &mut stream(seed, &[])).unwrap();
        let three = run_episode(&Say(utterances[u]), &env, &s, &g, &TaskConfig { horizon: 3, ..TaskConfig::default() }, &mut stream(seed, &[])).unwrap();
        prop_assert!(three.reward >= one.reward);
        prop_assert!(three.turns_used <= 3 && three.turns_used >= 1);
    }

    #[test]
    fn observation_is_deterministic_and_excludes_partner_persona(words in proptest::collection::vec("[a-z]{1,6}", 0..6)) {
        let s = kitchen();
        let hist: Vec<TurnEvent> = words.iter().enumerate().map(|(i, w)| if i % 2 == 0 { TurnEvent::player(w.clone()) } else { TurnEvent::env(w.clone(), None) }).collect();
        let a = flatten_observation(&s.view(Speaker::Player), &hist, None);
        prop_assert_eq!(&a, &flatten_observation(&s.view(Speaker::Player), &hist, None));
        prop_assert!(!a.to_string().contains("queen"));
    }
}


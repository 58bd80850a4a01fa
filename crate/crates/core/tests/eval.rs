mod common;

use goalworld::agents::{build_inverse_dataset, InverseModel, RandomUtterance, TopKAgent, TopKVariant, TrainConfig};
use goalworld::neural::EncoderConfig;
use goalworld::eval::*;
use goalworld::rl::utterance_distribution;
use goalworld::rng::stream;
use goalworld::task::templates::{trigger_utterances, trigger_verb};
use goalworld::task::*;
use goalworld::world::GameAction;
use rand::RngCore;

use common::metrics::*;
use common::{kitchen, object, tiny};

fn spec(horizon: usize) -> EvalSpec {
    EvalSpec { model: "fixture".into(), split: "test_seen".into(), goal_type: GoalType::GameAct, horizon, seed: 0 }
}

fn row(rows: &[GoalRow], key: &str) -> (usize, usize, f64) {
    let r = rows.iter().find(|r| r.key == key).unwrap_or_else(|| panic!("no row {key}"));
    (r.count, r.successes, r.success_pct)
}

#[test]
fn four_episode_verb_fixture() {
    let logs = vec![ep("hug", &["a"], 1), ep("hug", &["b"], 1), ep("hug", &["c"], 0), ep("get", &["d"], 0)];
    let b = breakdown_by_goal(&logs);
    assert_eq!(b.verbs.len(), 2);
    assert_eq!(b.verbs[0].key, "hug");
    assert_eq!(row(&b.verbs, "hug").0, 3);
    assert!((row(&b.verbs, "hug").2 - 66.67).abs() < 0.005);
    assert_eq!(row(&b.verbs, "get"), (1, 0, 0.0));
    assert!(b.emotes.is_empty());
}

#[test]
fn single_verb_all_successful() {
    let logs = vec![ep("get", &["a"], 1), ep("get", &["b"], 1)];
    let b = breakdown_by_goal(&logs);
    assert_eq!(b.verbs.len(), 1);
    assert_eq!(row(&b.verbs, "get"), (2, 2, 100.0));
}

#[test]
fn mixed_fixture_breakdown() {
    let b = breakdown_by_goal(&mixed_ten());
    assert_eq!(b.verbs.iter().map(|r| r.key.as_str()).collect::<Vec<_>>(), ["hug", "get", "wear"]);
    assert_eq!(row(&b.verbs, "hug"), (4, 3, 75.0));
    assert_eq!(row(&b.verbs, "get").0, 3);
    assert_eq!(row(&b.verbs, "get").1, 2);
    assert_eq!(row(&b.verbs, "wear"), (1, 0, 0.0));
    assert_eq!(row(&b.emotes, "smile"), (2, 1, 50.0));
    let report = EvalReport::from_logs(&spec(3), &mixed_ten()).unwrap();
    let verb_successes: usize = report.verbs.iter().map(|r| r.successes).sum();
    let emote_successes: usize = report.emotes.iter().map(|r| r.successes).sum();
    assert_eq!(verb_successes + emote_successes, report.successes);
}

#[test]
fn distinct_utterances_have_no_repeats() {
    let st = repeat_stats(&[ep("hug", &["a", "b", "c"], 0)]);
    assert_eq!((st.episode_fraction, st.utterance_fraction), (0.0, 0.0));
}

#[test]
fn one_repeat_in_three() {
    let st = repeat_stats(&[ep("hug", &["a", "a", "b"], 0)]);
    assert_eq!(st.episode_fraction, 1.0);
    assert_eq!(st.repeated_utterances, 1);
    assert_eq!(st.utterance_fraction, 1.0 / 3.0);
}

#[test]
fn mixed_fixture_repeats() {
    let st = repeat_stats(&mixed_ten());
    assert_eq!((st.episodes, st.episodes_with_repeat), (10, 6));
    assert_eq!((st.utterances, st.repeated_utterances), (23, 8));
    assert_eq!(st.episode_fraction, 0.6);
    assert_eq!(st.utterance_fraction, 8.0 / 23.0);
}

#[test]
fn mixed_fixture_mean_turns() {
    assert_eq!(mean_turns(&mixed_ten(), 3), 2.3);
    let report = EvalReport::from_logs(&spec(3), &mixed_ten()).unwrap();
    assert_eq!(report.mean_turns, 2.3);
    assert_eq!(report.mean_reward, 0.6);
    assert!((1.0..=3.0).contains(&report.mean_turns));
}

#[test]
fn failures_count_the_full_horizon() {
    let logs = vec![ep("hug", &["a"], 1), ep("hug", &["a", "b"], 1), ep("hug", &["a", "b"], 0)];
    assert_eq!(mean_turns(&logs, 3), 2.0);
    assert_eq!(mean_turns(&logs, 5), 8.0 / 3.0);
}

#[test]
fn empty_logs_are_an_error() {
    assert!(matches!(EvalReport::from_logs(&spec(1), &[]), Err(EvalError::EmptySplit(_))));
}

#[test]
fn report_json_is_byte_identical_and_round_trips() {
    let a = EvalReport::from_logs(&spec(3), &mixed_ten()).unwrap().to_json();
    let b = EvalReport::from_logs(&spec(3), &mixed_ten()).unwrap().to_json();
    assert_eq!(a, b);
    assert_eq!(EvalReport::from_json(&a).unwrap().to_json(), a);
}

#[test]
fn rendered_report_lines_up() {
    let r = EvalReport::from_logs(&spec(3), &mixed_ten()).unwrap();
    let text = render_report(&r);
    assert!(text.contains("Verb"));
    assert!(text.contains("Emote"));
    assert!(text.contains("75.00"));
    let lines: Vec<&str> = text.lines().take(3).collect();
    let col = |l: &str| l.find("Reward").or_else(|| l.find("0.600"));
    assert_eq!(col(lines[0]).map(|c| c + "Reward".len()), col(lines[2]).map(|c| c + "0.600".len()));
}

// ---- rollouts against the scripted environment ------------------------------

struct Oracle;

impl PlayerPolicy for Oracle {
    fn utter(&self, ctx: &PlayerContext<'_>, _rng: &mut dyn RngCore) -> Result<String, TaskError> {
        Ok(trigger_utterances(&ctx.goal.target, &ctx.scenario.world, ctx.scenario.player.id)[0].clone())
    }
}

struct Silent;

impl PlayerPolicy for Silent {
    fn utter(&self, _ctx: &PlayerContext<'_>, _rng: &mut dyn RngCore) -> Result<String, TaskError> {
        Ok(String::new())
    }
}

fn kitchen_starts() -> Vec<EpisodeStart> {
    let s = kitchen();
    ["lantern", "hay", "hat"]
        .into_iter()
        .map(|o| start(Goal::new(GameAction::Get(object(&s, o)))))
        .collect()
}

#[test]
fn oracle_trigger_policy_always_wins_in_one_turn() {
    let (r, _) = evaluate_policy(&Oracle, &always_comply(), &kitchen_starts(), &spec(1)).unwrap();
    assert_eq!((r.mean_reward, r.mean_turns), (1.0, 1.0));
}

#[test]
fn silent_policy_never_wins() {
    let (r, logs) = evaluate_policy(&Silent, &always_comply(), &kitchen_starts(), &spec(3)).unwrap();
    assert_eq!((r.mean_reward, r.mean_turns), (0.0, 3.0));
    assert!(logs.iter().all(|l| l.turns_used == 3));
}

#[test]
fn evaluation_needs_starts() {
    assert!(matches!(evaluate_policy(&Silent, &always_comply(), &[], &spec(1)), Err(EvalError::EmptySplit(_))));
}

#[test]
fn achievability_follows_the_candidate_space() {
    let fx = achievability_fixture();
    for (st, want) in fx.starts.iter().zip(&fx.achievable) {
        assert_eq!(one_step_achievable(st, &fx.space, &fx.env, 0, 0).unwrap(), *want);
    }
    let space = fx.space.clone();
    let a = achievability_split(|_| Ok(space.clone()), &fx.env, &fx.starts, &fx.logs, 0).unwrap();
    assert_eq!(a, fx.expected);
    assert_eq!(a.achievable.episodes + a.unachievable.episodes, fx.starts.len());
    assert!(matches!(
        achievability_split(|_| Ok(space.clone()), &fx.env, &fx.starts, &fx.logs[..3], 0),
        Err(EvalError::Unpaired(10, 3))
    ));
}

fn seen_starts(count: usize) -> Vec<EpisodeStart> {
    episode_starts(&tiny().corpus.split(Split::TestSeen), GoalType::GameAct, count, 3).unwrap()
}

#[test]
fn random_baseline_matches_the_chance_rate() {
    let corpus = &tiny().corpus;
    let starts = seen_starts(1000);
    let env = ScriptedEnv::default();
    let baseline = RandomUtterance::new(corpus.player_utterances.clone()).unwrap();
    let (r, _) = evaluate_policy(&baseline, &env, &starts, &spec(1)).unwrap();
    let chance = chance_rate(&env, &starts, &corpus.player_utterances);
    assert!((r.mean_reward - chance).abs() <= 0.03, "observed {} vs chance {chance}", r.mean_reward);
}

#[test]
fn longer_horizon_never_loses_an_episode() {
    let corpus = &tiny().corpus;
    let starts = seen_starts(300);
    let env = ScriptedEnv::default();
    let baseline = RandomUtterance::new(corpus.player_utterances.clone()).unwrap();
    let (one, l1) = evaluate_policy(&baseline, &env, &starts, &spec(1)).unwrap();
    let (three, l3) = transfer_1step_3x(&baseline, &env, &starts, &spec(1)).unwrap();
    assert_eq!(three.horizon, 3);
    assert!(three.model.ends_with("(1-step 3x)"));
    assert!(l1.iter().zip(&l3).all(|(a, b)| a.reward <= b.reward));
    assert!(three.mean_reward >= one.mean_reward);
}

#[test]
fn evaluation_is_reproducible() {
    let corpus = &tiny().corpus;
    let starts = seen_starts(100);
    let baseline = RandomUtterance::new(corpus.player_utterances.clone()).unwrap();
    let run = || evaluate_policy(&baseline, &ScriptedEnv::default(), &starts, &spec(3)).unwrap().0.to_json();
    assert_eq!(run(), run());
}

#[test]
fn starts_cycle_through_eligible_logs() {
    let logs = tiny().corpus.split(Split::TestSeen);
    let starts = seen_starts(logs.len() + 5);
    assert_eq!(starts.len(), logs.len() + 5);
    assert!(starts.iter().all(|s| s.goal.goal_type == GoalType::GameAct));
    assert_eq!(starts, seen_starts(logs.len() + 5));
    assert!(matches!(episode_starts(&[], GoalType::Emote, 5, 0), Err(EvalError::EmptySplit(_))));
}

// ---- paired sign test ------------------------------------------------------

#[test]
fn sign_test_closed_forms() {
    let t = paired_sign_test(&[1, 1, 1, 0, 1], &[0, 0, 0, 0, 1]).unwrap();
    assert_eq!((t.a_only, t.b_only), (3, 0));
    assert!((t.p_value - 0.125).abs() < 1e-12);
    let a = [1, 1, 1, 1, 1, 0, 0, 0, 0, 0];
    let b = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
    let t = paired_sign_test(&a, &b).unwrap();
    assert!((t.p_value - 638.0 / 1024.0).abs() < 1e-12);
    assert_eq!(paired_sign_test(&b[..3], &a[..3]).unwrap().p_value, 1.0);
    assert_eq!(t.mean_a, 0.5);
}

#[test]
fn sign_test_rejects_unpaired_samples() {
    assert!(matches!(paired_sign_test(&[1, 0], &[1]), Err(EvalError::Unpaired(2, 1))));
}

// ---- utterance rankings ----------------------------------------------------

#[test]
fn single_start_ranking_is_that_start_distribution() {
    let t = tiny();
    let agent = TopKAgent::new(t.inverse.clone(), 6, TopKVariant::Linear, &mut stream(0, &[])).unwrap();
    let st = seen_starts(1);
    let ranked = top_utterances_by_verb(&agent, &st, 10).unwrap();
    assert_eq!(ranked.len(), 1);
    assert_eq!(ranked[0].verb, st[0].goal.target.goal_key());
    let state = EpisodeState::new(st[0].scenario.clone(), st[0].goal.clone(), 1);
    let mut dist = utterance_distribution(&agent, &agent_obs(&agent, &state)).unwrap();
    dist.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let got: Vec<(&str, f64)> = ranked[0].top.iter().map(|r| (r.utterance.as_str(), r.mean_prob)).collect();
    let want: Vec<(&str, f64)> = dist.iter().take(10).map(|(u, p)| (u.as_str(), *p)).collect();
    assert_eq!(got, want);
}

fn agent_obs(agent: &TopKAgent, state: &EpisodeState) -> Observation {
    goalworld::rl::RlAgent::observe(agent, &state.player_context())
}

#[test]
fn averaged_probabilities_are_probabilities() {
    let t = tiny();
    let agent = TopKAgent::new(t.inverse.clone(), 6, TopKVariant::Linear, &mut stream(0, &[])).unwrap();
    let ranked = top_utterances_by_verb(&agent, &seen_starts(60), 10).unwrap();
    assert!(!ranked.is_empty());
    for v in &ranked {
        assert!(v.top.len() <= 10);
        assert!(v.top.iter().all(|r| (0.0..=1.0).contains(&r.mean_prob)));
        assert!(v.top.windows(2).all(|w| w[0].mean_prob >= w[1].mean_prob));
    }
    assert_eq!(ranked.iter().map(|v| v.episodes).sum::<usize>(), 60);
}

/// Trained on the default corpus, the inverse model's averaged top
/// utterance for a goal verb is one of that verb's trigger templates for at
/// least 8 in 11 verbs.
#[test]
fn top_utterance_carries_the_goal_verb_trigger() {
    let corpus = generate_synthetic_corpus(&GenConfig::default(), 7).unwrap();
    let data = build_inverse_dataset(&corpus.split(Split::Train)).unwrap();
    let (inverse, _) = InverseModel::train(
        &data,
        corpus.player_utterances.clone(),
        true,
        &EncoderConfig::default(),
        &TrainConfig::default(),
        &mut stream(1, &[1]),
    )
    .unwrap();
    let agent = TopKAgent::new(inverse, 20, TopKVariant::Attention, &mut stream(0, &[])).unwrap();
    let starts = episode_starts(&corpus.split(Split::TestSeen), GoalType::GameAct, 1000, 3).unwrap();
    let ranked = top_utterances_by_verb(&agent, &starts, 10).unwrap();
    let missed: Vec<(&str, &str)> = ranked
        .iter()
        .filter(|v| trigger_verb(&v.top[0].utterance).map(|verb| verb.keyword()) != Some(v.verb.as_str()))
        .map(|v| (v.verb.as_str(), v.top[0].utterance.as_str()))
        .collect();
    let hits = ranked.len() - missed.len();
    assert!(ranked.len() >= 11);
    assert!(hits * 11 >= ranked.len() * 8, "{hits} of {} verbs; missed {missed:?}", ranked.len());
}

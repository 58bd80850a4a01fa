//! Hand-counted episode fixtures for the metric functions.

use goalworld::eval::{Achievability, ClassStats, EpisodeStart};
use goalworld::task::templates::trigger_utterances;
use goalworld::task::{EpisodeLog, Goal, ScriptedEnv, TurnEvent};
use goalworld::world::{EmoteKind, GameAction};

use super::{kitchen, object};

pub fn goal_of(name: &str) -> Goal {
    let s = kitchen();
    match name {
        "hug" => Goal::new(GameAction::Hug(s.player.id)),
        "get" => Goal::new(GameAction::Get(object(&s, "lantern"))),
        "wear" => Goal::new(GameAction::Wear(object(&s, "hat"))),
        "smile" => Goal::emote(EmoteKind::Smile),
        other => panic!("no fixture goal {other}"),
    }
}

/// A finished episode: the player said `utts`, the env answered each with
/// filler, and the episode ended with `reward` after the last utterance.
pub fn ep(goal: &str, utts: &[&str], reward: u8) -> EpisodeLog {
    let mut turns = Vec::new();
    for u in utts {
        turns.push(TurnEvent::player(*u));
        turns.push(TurnEvent::env("hm", None));
    }
    EpisodeLog {
        id: format!("{goal}-{}", utts.join("|")),
        world_id: "kitchen".into(),
        scenario: kitchen(),
        goal: Some(goal_of(goal)),
        turns,
        reward,
        turns_used: utts.len(),
        partial: false,
    }
}

pub fn always_comply() -> ScriptedEnv {
    ScriptedEnv { comply_prob: 1.0, spontaneous_prob: 0.0 }
}

pub fn start(goal: Goal) -> EpisodeStart {
    EpisodeStart { id: format!("{:?}", goal.target), world_id: "kitchen".into(), scenario: kitchen(), goal }
}

pub fn mixed_ten() -> Vec<EpisodeLog> {
    vec![
        ep("hug", &["a"], 1),
        ep("hug", &["a", "b"], 1),
        ep("hug", &["a", "a", "a"], 0),
        ep("get", &["x", "y", "z"], 0),
        ep("get", &["x"], 1),
        ep("smile", &["s", "s"], 1),
        ep("smile", &["s", "t", "s"], 0),
        ep("wear", &["w", "w", "w"], 0),
        ep("hug", &["q", " q  "], 1),
        ep("get", &["p", "r", "p"], 1),
    ]
}

/// Ten starts whose goals a three-utterance space can or cannot reach in
/// one turn, with fixed outcomes.
pub struct AchievabilityFixture {
    pub env: ScriptedEnv,
    pub space: Vec<String>,
    pub starts: Vec<EpisodeStart>,
    pub logs: Vec<EpisodeLog>,
    pub achievable: Vec<bool>,
    pub expected: Achievability,
}

pub fn achievability_fixture() -> AchievabilityFixture {
    let s = kitchen();
    let lantern = GameAction::Get(object(&s, "lantern"));
    let hay = GameAction::Get(object(&s, "hay"));
    let smile = GameAction::Emote(EmoteKind::Smile);
    let laugh = GameAction::Emote(EmoteKind::Laugh);
    let space = vec![
        trigger_utterances(&lantern, &s.world, s.player.id)[0].clone(),
        trigger_utterances(&smile, &s.world, s.player.id)[0].clone(),
        "nice weather today".to_string(),
    ];
    let goals = [&lantern, &hay, &smile, &laugh, &lantern, &hay, &lantern, &smile, &laugh, &hay];
    let rewards = [1, 1, 0, 0, 1, 0, 0, 1, 1, 0];
    AchievabilityFixture {
        env: always_comply(),
        space,
        starts: goals.iter().map(|g| start(Goal::new((*g).clone()))).collect(),
        logs: rewards.iter().map(|&r| ep("get", &["x"], r)).collect(),
        achievable: goals.iter().map(|g| **g == lantern || **g == smile).collect(),
        expected: Achievability {
            achievable: ClassStats { episodes: 5, successes: 3, mean_reward: 0.6 },
            unachievable: ClassStats { episodes: 5, successes: 2, mean_reward: 0.4 },
        },
    }
}

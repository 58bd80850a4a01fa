use serde::{Deserialize, Serialize};

use crate::world::{EmoteKind, EntityId, GameAction, WorldGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterRef {
    pub id: EntityId,
    pub name: String,
    pub persona: String,
}

/// Setting, the two participants and the initial world of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub setting_name: String,
    pub setting_desc: String,
    pub player: CharacterRef,
    pub env_char: CharacterRef,
    pub world: WorldGraph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Player,
    Env,
}

impl Speaker {
    pub fn other(self) -> Speaker {
        match self {
            Speaker::Player => Speaker::Env,
            Speaker::Env => Speaker::Player,
        }
    }
}

impl Scenario {
    pub fn character(&self, side: Speaker) -> &CharacterRef {
        match side {
            Speaker::Player => &self.player,
            Speaker::Env => &self.env_char,
        }
    }

    /// What one side may see: its own persona and only the partner's name.
    pub fn view(&self, side: Speaker) -> ScenarioView<'_> {
        ScenarioView { scenario: self, side }
    }

    pub fn same_room(&self) -> bool {
        let w = &self.world;
        match (w.room_of(self.player.id), w.room_of(self.env_char.id)) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScenarioView<'a> {
    scenario: &'a Scenario,
    side: Speaker,
}

impl<'a> ScenarioView<'a> {
    pub fn side(&self) -> Speaker {
        self.side
    }

    pub fn setting_name(&self) -> &'a str {
        &self.scenario.setting_name
    }

    pub fn setting_desc(&self) -> &'a str {
        &self.scenario.setting_desc
    }

    pub fn self_name(&self) -> &'a str {
        &self.scenario.character(self.side).name
    }

    pub fn self_persona(&self) -> &'a str {
        &self.scenario.character(self.side).persona
    }

    pub fn partner_name(&self) -> &'a str {
        &self.scenario.character(self.side.other()).name
    }

    /// Used only to render action names, which both sides can see.
    pub fn world(&self) -> &'a WorldGraph {
        &self.scenario.world
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalType {
    GameAct,
    Emote,
}

impl GoalType {
    pub fn of(a: &GameAction) -> GoalType {
        if a.is_emote() {
            GoalType::Emote
        } else {
            GoalType::GameAct
        }
    }
}

impl std::str::FromStr for GoalType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "act" | "game_act" | "game-act" => Ok(GoalType::GameAct),
            "emote" => Ok(GoalType::Emote),
            _ => Err(format!("goal type must be 'act' or 'emote', got '{s}'")),
        }
    }
}

impl std::fmt::Display for GoalType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GoalType::GameAct => "act",
            GoalType::Emote => "emote",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub target: GameAction,
    pub goal_type: GoalType,
}

impl Goal {
    pub fn new(target: GameAction) -> Self {
        Goal { goal_type: GoalType::of(&target), target }
    }

    pub fn emote(e: EmoteKind) -> Self {
        Goal::new(GameAction::Emote(e))
    }

    pub fn achieved_by(&self, a: Option<&GameAction>) -> bool {
        a == Some(&self.target)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnEvent {
    pub speaker: Speaker,
    pub utterance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<GameAction>,
}

impl TurnEvent {
    pub fn player(utterance: impl Into<String>) -> Self {
        TurnEvent { speaker: Speaker::Player, utterance: utterance.into(), action: None }
    }

    pub fn env(utterance: impl Into<String>, action: Option<GameAction>) -> Self {
        TurnEvent { speaker: Speaker::Env, utterance: utterance.into(), action }
    }
}

/// One dialogue. Corpus logs carry no goal; task rollouts always do.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub id: String,
    #[serde(default)]
    pub world_id: String,
    pub scenario: Scenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<Goal>,
    pub turns: Vec<TurnEvent>,
    pub reward: u8,
    pub turns_used: usize,
    /// Set when a session ended before reward or horizon.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub partial: bool,
}

impl EpisodeLog {
    pub fn env_actions(&self) -> impl Iterator<Item = &GameAction> {
        self.turns
            .iter()
            .filter(|t| t.speaker == Speaker::Env)
            .filter_map(|t| t.action.as_ref())
    }

    pub fn player_utterances(&self) -> impl Iterator<Item = &str> {
        self.turns
            .iter()
            .filter(|t| t.speaker == Speaker::Player)
            .map(|t| t.utterance.as_str())
    }
}

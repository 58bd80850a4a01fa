use serde::{Deserialize, Serialize};

use super::scenario::{Goal, ScenarioView, TurnEvent};
use crate::world::render_action_text;

pub const SETTING_NAME: &str = "_setting_name_";
pub const SETTING_DESC: &str = "_setting_desc_";
pub const PARTNER_NAME: &str = "_partner_name_";
pub const SELF_NAME: &str = "_self_name_";
pub const SELF_PERSONA: &str = "_self_persona_";
pub const GOAL: &str = "_goal_";
pub const PARTNER_SAY: &str = "_partner_say_";
pub const PARTNER_ACT: &str = "_partner_act_";
pub const SELF_SAY: &str = "_self_say_";
pub const SELF_ACT: &str = "_self_act_";

pub const HEADER_SEGMENTS: [&str; 5] =
    [SETTING_NAME, SETTING_DESC, PARTNER_NAME, SELF_NAME, SELF_PERSONA];

/// Lowercased runs of letters, digits and apostrophes.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Whitespace-collapsed lowercase form used for string comparisons.
pub fn normalize_utterance(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Observation {
    pub tokens: Vec<String>,
}

impl Observation {
    pub fn with_topic(&self, c: usize) -> Observation {
        let mut tokens = self.tokens.clone();
        tokens.push(format!("_topic_{c}_"));
        Observation { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl std::fmt::Display for Observation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.tokens.join(" "))
    }
}

fn push_segment(out: &mut Vec<String>, marker: &str, text: &str) {
    out.push(marker.to_string());
    out.extend(tokenize(text));
}

/// Header, optional goal, then history oldest first, all from the viewing
/// side's perspective. The partner's persona never appears.
pub fn flatten_observation(view: &ScenarioView<'_>, history: &[TurnEvent], goal: Option<&Goal>) -> Observation {
    let mut t = Vec::new();
    push_segment(&mut t, SETTING_NAME, view.setting_name());
    push_segment(&mut t, SETTING_DESC, view.setting_desc());
    push_segment(&mut t, PARTNER_NAME, view.partner_name());
    push_segment(&mut t, SELF_NAME, view.self_name());
    push_segment(&mut t, SELF_PERSONA, view.self_persona());
    if let Some(g) = goal {
        push_segment(&mut t, GOAL, &action_text(view, &g.target));
    }
    for ev in history {
        let mine = ev.speaker == view.side();
        push_segment(&mut t, if mine { SELF_SAY } else { PARTNER_SAY }, &ev.utterance);
        if let Some(a) = &ev.action {
            push_segment(&mut t, if mine { SELF_ACT } else { PARTNER_ACT }, &action_text(view, a));
        }
    }
    Observation { tokens: t }
}

fn action_text(view: &ScenarioView<'_>, a: &crate::world::GameAction) -> String {
    render_action_text(a, view.world()).unwrap_or_else(|_| format!("{a:?}"))
}

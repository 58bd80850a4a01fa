use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EntityId;

macro_rules! emotes {
    ($($variant:ident => $name:literal),* $(,)?) => {
        /// The closed set of expressive actions. Emotes never change world state.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum EmoteKind {
            $($variant),*
        }

        impl EmoteKind {
            pub const ALL: [EmoteKind; 22] = [$(EmoteKind::$variant),*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(EmoteKind::$variant => $name),*
                }
            }
        }

        impl FromStr for EmoteKind {
            type Err = ();

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($name => Ok(EmoteKind::$variant),)*
                    _ => Err(()),
                }
            }
        }
    };
}

emotes! {
    Laugh => "laugh",
    Smile => "smile",
    Ponder => "ponder",
    Frown => "frown",
    Nod => "nod",
    Sigh => "sigh",
    Grin => "grin",
    Gasp => "gasp",
    Shrug => "shrug",
    Stare => "stare",
    Scream => "scream",
    Cry => "cry",
    Growl => "growl",
    Blush => "blush",
    Dance => "dance",
    Applaud => "applaud",
    Wave => "wave",
    Groan => "groan",
    Nudge => "nudge",
    Wink => "wink",
    Yawn => "yawn",
    Pout => "pout",
}

impl fmt::Display for EmoteKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Verb of a [`GameAction`], in canonical enumeration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verb {
    Get,
    Drop,
    GetFrom,
    PutIn,
    Give,
    Steal,
    Hit,
    Hug,
    Drink,
    Eat,
    Wear,
    Wield,
    Remove,
    Emote,
}

impl Verb {
    pub const GAME_VERBS: [Verb; 13] = [
        Verb::Get,
        Verb::Drop,
        Verb::GetFrom,
        Verb::PutIn,
        Verb::Give,
        Verb::Steal,
        Verb::Hit,
        Verb::Hug,
        Verb::Drink,
        Verb::Eat,
        Verb::Wear,
        Verb::Wield,
        Verb::Remove,
    ];

    /// Surface keyword; `GetFrom` shares "get" and `PutIn` is "put".
    pub fn keyword(self) -> &'static str {
        match self {
            Verb::Get | Verb::GetFrom => "get",
            Verb::Drop => "drop",
            Verb::PutIn => "put",
            Verb::Give => "give",
            Verb::Steal => "steal",
            Verb::Hit => "hit",
            Verb::Hug => "hug",
            Verb::Drink => "drink",
            Verb::Eat => "eat",
            Verb::Wear => "wear",
            Verb::Wield => "wield",
            Verb::Remove => "remove",
            Verb::Emote => "emote",
        }
    }
}

/// A structured game action or emote. Arity is carried by the variant.
///
/// The derived `Ord` is the canonical enumeration order: verb order as
/// declared, then argument ids ascending, emotes last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameAction {
    Get(EntityId),
    Drop(EntityId),
    /// `(object, source)`
    GetFrom(EntityId, EntityId),
    /// `(object, destination)`
    PutIn(EntityId, EntityId),
    /// `(object, recipient)`
    Give(EntityId, EntityId),
    /// `(object, victim)`
    Steal(EntityId, EntityId),
    Hit(EntityId),
    Hug(EntityId),
    Drink(EntityId),
    Eat(EntityId),
    Wear(EntityId),
    Wield(EntityId),
    Remove(EntityId),
    Emote(EmoteKind),
}

impl GameAction {
    pub fn verb(&self) -> Verb {
        match self {
            GameAction::Get(_) => Verb::Get,
            GameAction::Drop(_) => Verb::Drop,
            GameAction::GetFrom(..) => Verb::GetFrom,
            GameAction::PutIn(..) => Verb::PutIn,
            GameAction::Give(..) => Verb::Give,
            GameAction::Steal(..) => Verb::Steal,
            GameAction::Hit(_) => Verb::Hit,
            GameAction::Hug(_) => Verb::Hug,
            GameAction::Drink(_) => Verb::Drink,
            GameAction::Eat(_) => Verb::Eat,
            GameAction::Wear(_) => Verb::Wear,
            GameAction::Wield(_) => Verb::Wield,
            GameAction::Remove(_) => Verb::Remove,
            GameAction::Emote(_) => Verb::Emote,
        }
    }

    pub fn args(&self) -> Vec<EntityId> {
        match *self {
            GameAction::Get(a)
            | GameAction::Drop(a)
            | GameAction::Hit(a)
            | GameAction::Hug(a)
            | GameAction::Drink(a)
            | GameAction::Eat(a)
            | GameAction::Wear(a)
            | GameAction::Wield(a)
            | GameAction::Remove(a) => vec![a],
            GameAction::GetFrom(a, b)
            | GameAction::PutIn(a, b)
            | GameAction::Give(a, b)
            | GameAction::Steal(a, b) => vec![a, b],
            GameAction::Emote(_) => Vec::new(),
        }
    }

    pub fn is_emote(&self) -> bool {
        matches!(self, GameAction::Emote(_))
    }

    pub fn emote(&self) -> Option<EmoteKind> {
        match self {
            GameAction::Emote(e) => Some(*e),
            _ => None,
        }
    }

    /// Grouping key used by per-goal breakdowns: the surface verb for game
    /// actions ("get" covers get-from), the emote name for emotes.
    pub fn goal_key(&self) -> &'static str {
        match self {
            GameAction::Emote(e) => e.as_str(),
            other => other.verb().keyword(),
        }
    }

    /// Every syntactically well-formed action over `ids`, ignoring entity kinds.
    pub fn all_syntactic(ids: &[EntityId]) -> Vec<GameAction> {
        let mut out = Vec::new();
        for &a in ids {
            out.extend([
                GameAction::Get(a),
                GameAction::Drop(a),
                GameAction::Hit(a),
                GameAction::Hug(a),
                GameAction::Drink(a),
                GameAction::Eat(a),
                GameAction::Wear(a),
                GameAction::Wield(a),
                GameAction::Remove(a),
            ]);
            for &b in ids {
                out.extend([
                    GameAction::GetFrom(a, b),
                    GameAction::PutIn(a, b),
                    GameAction::Give(a, b),
                    GameAction::Steal(a, b),
                ]);
            }
        }
        out.extend(EmoteKind::ALL.iter().map(|&e| GameAction::Emote(e)));
        out.sort();
        out
    }
}

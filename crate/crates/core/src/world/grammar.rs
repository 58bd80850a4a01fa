//! Canonical surface grammar for actions:
//!
//! ```text
//! get NAME | get NAME from NAME | drop NAME | put NAME (in|on) NAME
//! give NAME to NAME | steal NAME from NAME | hit NAME | hug NAME
//! drink NAME | eat NAME | wear NAME | wield NAME | remove NAME | EMOTE
//! ```
//!
//! Names resolve against entities in the actor's room (including what it
//! holds) by longest token match.

use std::str::FromStr;

use thiserror::Error;

use super::{EmoteKind, EntityId, GameAction, PropertyFlag, WorldError, WorldGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty command")]
    Empty,
    #[error("unknown verb '{0}'")]
    UnknownVerb(String),
    #[error("'{0}' is missing an argument")]
    MissingArgument(String),
    #[error("no entity named '{0}' here")]
    UnresolvedName(String),
    #[error("'{name}' is ambiguous: {candidates:?}")]
    Ambiguous { name: String, candidates: Vec<EntityId> },
    #[error("expected '{expected}' but found '{found}'")]
    ExpectedKeyword { expected: String, found: String },
    #[error("unexpected trailing text '{0}'")]
    Trailing(String),
}

/// Lowercase canonical text of `a`.
pub fn render_action_text(a: &GameAction, w: &WorldGraph) -> Result<String, WorldError> {
    let n = |id: EntityId| -> Result<String, WorldError> {
        w.name(id)
            .map(|s| s.to_lowercase())
            .ok_or(WorldError::UnknownEntity(id))
    };
    Ok(match *a {
        GameAction::Get(o) => format!("get {}", n(o)?),
        GameAction::Drop(o) => format!("drop {}", n(o)?),
        GameAction::GetFrom(o1, o2) => format!("get {} from {}", n(o1)?, n(o2)?),
        GameAction::PutIn(o1, o2) => {
            let into = w
                .entity(o2)
                .ok_or(WorldError::UnknownEntity(o2))?
                .has(PropertyFlag::Container);
            let prep = if into { "in" } else { "on" };
            format!("put {} {prep} {}", n(o1)?, n(o2)?)
        }
        GameAction::Give(o, c) => format!("give {} to {}", n(o)?, n(c)?),
        GameAction::Steal(o, c) => format!("steal {} from {}", n(o)?, n(c)?),
        GameAction::Hit(c) => format!("hit {}", n(c)?),
        GameAction::Hug(c) => format!("hug {}", n(c)?),
        GameAction::Drink(o) => format!("drink {}", n(o)?),
        GameAction::Eat(o) => format!("eat {}", n(o)?),
        GameAction::Wear(o) => format!("wear {}", n(o)?),
        GameAction::Wield(o) => format!("wield {}", n(o)?),
        GameAction::Remove(o) => format!("remove {}", n(o)?),
        GameAction::Emote(e) => e.as_str().to_string(),
    })
}

struct Resolver<'a> {
    scope: Vec<(EntityId, Vec<String>)>,
    tokens: &'a [String],
    pos: usize,
}

impl<'a> Resolver<'a> {
    fn rest(&self) -> &'a [String] {
        &self.tokens[self.pos..]
    }

    fn name(&mut self, verb: &str) -> Result<EntityId, ParseError> {
        let rest = self.rest();
        if rest.is_empty() {
            return Err(ParseError::MissingArgument(verb.to_string()));
        }
        let best = self
            .scope
            .iter()
            .filter(|(_, name)| !name.is_empty() && rest.starts_with(name))
            .map(|(_, name)| name.len())
            .max();
        let Some(len) = best else {
            return Err(ParseError::UnresolvedName(rest.join(" ")));
        };
        let matches: Vec<EntityId> = self
            .scope
            .iter()
            .filter(|(_, name)| name.len() == len && rest.starts_with(name))
            .map(|(id, _)| *id)
            .collect();
        if matches.len() > 1 {
            return Err(ParseError::Ambiguous { name: rest[..len].join(" "), candidates: matches });
        }
        self.pos += len;
        Ok(matches[0])
    }

    fn keyword(&mut self, verb: &str, options: &[&str]) -> Result<String, ParseError> {
        match self.rest().first() {
            None => Err(ParseError::MissingArgument(verb.to_string())),
            Some(t) if options.contains(&t.as_str()) => {
                self.pos += 1;
                Ok(t.clone())
            }
            Some(t) => Err(ParseError::ExpectedKeyword {
                expected: options.join("|"),
                found: t.clone(),
            }),
        }
    }

    fn finish(&self) -> Result<(), ParseError> {
        if self.rest().is_empty() {
            Ok(())
        } else {
            Err(ParseError::Trailing(self.rest().join(" ")))
        }
    }
}

/// Parses canonical action text against the actor's local scope.
pub fn parse_action_text(
    s: &str,
    w: &WorldGraph,
    actor: EntityId,
) -> Result<GameAction, ParseError> {
    let tokens: Vec<String> = s.split_whitespace().map(|t| t.to_lowercase()).collect();
    let Some((verb, _)) = tokens.split_first() else {
        return Err(ParseError::Empty);
    };
    let verb = verb.as_str();

    if let Ok(e) = EmoteKind::from_str(verb) {
        if tokens.len() > 1 {
            return Err(ParseError::Trailing(tokens[1..].join(" ")));
        }
        return Ok(GameAction::Emote(e));
    }

    let scope = w
        .local_entities(actor)
        .into_iter()
        .filter_map(|id| {
            w.name(id)
                .map(|n| (id, n.split_whitespace().map(|t| t.to_lowercase()).collect()))
        })
        .collect();
    let mut r = Resolver { scope, tokens: &tokens, pos: 1 };

    let action = match verb {
        "get" => {
            let o1 = r.name(verb)?;
            if r.rest().is_empty() {
                GameAction::Get(o1)
            } else {
                r.keyword(verb, &["from"])?;
                GameAction::GetFrom(o1, r.name(verb)?)
            }
        }
        "put" => {
            let o1 = r.name(verb)?;
            r.keyword(verb, &["in", "on"])?;
            GameAction::PutIn(o1, r.name(verb)?)
        }
        "give" => {
            let o = r.name(verb)?;
            r.keyword(verb, &["to"])?;
            GameAction::Give(o, r.name(verb)?)
        }
        "steal" => {
            let o = r.name(verb)?;
            r.keyword(verb, &["from"])?;
            GameAction::Steal(o, r.name(verb)?)
        }
        "drop" => GameAction::Drop(r.name(verb)?),
        "hit" => GameAction::Hit(r.name(verb)?),
        "hug" => GameAction::Hug(r.name(verb)?),
        "drink" => GameAction::Drink(r.name(verb)?),
        "eat" => GameAction::Eat(r.name(verb)?),
        "wear" => GameAction::Wear(r.name(verb)?),
        "wield" => GameAction::Wield(r.name(verb)?),
        "remove" => GameAction::Remove(r.name(verb)?),
        other => return Err(ParseError::UnknownVerb(other.to_string())),
    };
    r.finish()?;
    Ok(action)
}

//! Constraint and outcome rules for the game actions.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{
    ContainmentMode, ContainmentState, EntityId, EntityKind, GameAction, PropertyFlag,
    WorldError, WorldGraph,
};

pub const SAME_ROOM_OBJECT: &str = "actor and object in same room";
pub const SAME_ROOM_OBJECT2: &str = "actor and object2 in same room";
pub const SAME_ROOM_AGENT: &str = "actor and agent in same room";
pub const GETTABLE: &str = "object is gettable";
pub const GETTABLE1: &str = "object1 is gettable";
pub const CARRYING: &str = "actor is carrying object";
pub const CARRYING1: &str = "actor is carrying object1";
pub const SURFACE_OR_CONTAINER: &str = "object2 is surface or container";
pub const HOLDS_OBJECT1: &str = "object2 is carrying object1";
pub const MEMBER_OF_ACTOR: &str = "object is a member of actor";
pub const MEMBER_OF_AGENT: &str = "object is a member of agent";
pub const IS_DRINK: &str = "object is a drink";
pub const IS_FOOD: &str = "object is a food";
pub const IS_WEARABLE: &str = "object is wearable";
pub const IS_WEAPON: &str = "object is a weapon";
pub const WEARING_OR_WIELDING: &str = "actor is wearing/wielding object";
pub const WEARABLE_OR_WEAPON: &str = "object is wearable or a weapon";
pub const IS_OBJECT: &str = "object is an object";
pub const IS_OBJECT1: &str = "object1 is an object";
pub const IS_OBJECT2: &str = "object2 is an object";
pub const DISTINCT_OBJECTS: &str = "object1 and object2 differ";
pub const IS_CHARACTER: &str = "agent is a character";
pub const NOT_SELF: &str = "agent is not the actor";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintResult {
    Ok,
    Failed(Vec<&'static str>),
}

impl ConstraintResult {
    pub fn is_ok(&self) -> bool {
        matches!(self, ConstraintResult::Ok)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    StateChange,
    InformAgentOfAttack,
    InformAgentOfHug,
    InformActorOfDrinking,
    InformActorOfEating,
    Emote,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::StateChange => "state change",
            EventKind::InformAgentOfAttack => "inform agent of attack",
            EventKind::InformAgentOfHug => "inform agent of hug",
            EventKind::InformActorOfDrinking => "inform actor of drinking successfully",
            EventKind::InformActorOfEating => "inform actor of eating successfully",
            EventKind::Emote => "emote",
        })
    }
}

/// Narration emitted by [`apply_action`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventText {
    pub kind: EventKind,
    pub text: String,
}

struct Checker<'w> {
    w: &'w WorldGraph,
    actor: EntityId,
    room: Option<EntityId>,
    failed: Vec<&'static str>,
}

impl<'w> Checker<'w> {
    fn require(&mut self, cond: bool, name: &'static str) {
        if !cond {
            self.failed.push(name);
        }
    }

    fn kind(&self, id: EntityId) -> EntityKind {
        self.w.entity(id).map(|e| e.kind).unwrap_or(EntityKind::Location)
    }

    fn has(&self, id: EntityId, flag: PropertyFlag) -> bool {
        self.w.entity(id).is_some_and(|e| e.has(flag))
    }

    fn state(&self, id: EntityId) -> Option<ContainmentState> {
        self.w.containment(id)
    }

    fn held(&self, id: EntityId, holder: EntityId, modes: &[ContainmentMode]) -> bool {
        self.state(id)
            .is_some_and(|c| c.holder == holder && modes.contains(&c.mode))
    }

    fn on_floor(&self, id: EntityId) -> bool {
        match self.room {
            Some(room) => self.held(id, room, &[ContainmentMode::InRoom]),
            None => false,
        }
    }

    /// An object the actor can reach: on the floor of its room or in its hands.
    fn reachable(&self, id: EntityId) -> bool {
        self.on_floor(id) || self.held(id, self.actor, &[ContainmentMode::CarriedBy])
    }

    fn carrying(&self, id: EntityId) -> bool {
        self.held(id, self.actor, &[ContainmentMode::CarriedBy])
    }

    fn member_of(&self, id: EntityId, holder: EntityId) -> bool {
        self.state(id)
            .is_some_and(|c| c.holder == holder && c.mode.is_membership())
    }

    fn agent_rows(&mut self, agent: EntityId) {
        let is_char = self.kind(agent) == EntityKind::Character;
        self.require(is_char, IS_CHARACTER);
        self.require(agent != self.actor, NOT_SELF);
        if is_char && agent != self.actor {
            self.require(self.on_floor(agent), SAME_ROOM_AGENT);
        }
    }
}

fn ensure_known(w: &WorldGraph, actor: EntityId, a: &GameAction) -> Result<(), WorldError> {
    for id in std::iter::once(actor).chain(a.args()) {
        if !w.contains(id) {
            return Err(WorldError::UnknownEntity(id));
        }
    }
    match w.entity(actor) {
        Some(e) if e.is_character() => Ok(()),
        _ => Err(WorldError::NotACharacter(actor)),
    }
}

/// Evaluates every constraint row for `a`. Pure.
pub fn check_action(
    w: &WorldGraph,
    actor: EntityId,
    a: &GameAction,
) -> Result<ConstraintResult, WorldError> {
    ensure_known(w, actor, a)?;
    let room = w
        .containment(actor)
        .filter(|c| c.mode == ContainmentMode::InRoom)
        .map(|c| c.holder);
    let mut ck = Checker { w, actor, room, failed: Vec::new() };
    let obj = EntityKind::Object;

    match *a {
        GameAction::Get(o) => {
            ck.require(ck.kind(o) == obj, IS_OBJECT);
            ck.require(ck.on_floor(o), SAME_ROOM_OBJECT);
            ck.require(ck.has(o, PropertyFlag::Gettable), GETTABLE);
        }
        GameAction::Drop(o) => {
            ck.require(ck.kind(o) == obj, IS_OBJECT);
            ck.require(ck.carrying(o), CARRYING);
            ck.require(ck.has(o, PropertyFlag::Gettable), GETTABLE);
        }
        GameAction::GetFrom(o1, o2) => {
            ck.require(ck.kind(o1) == obj, IS_OBJECT1);
            ck.require(ck.kind(o2) == obj, IS_OBJECT2);
            ck.require(ck.reachable(o2), SAME_ROOM_OBJECT2);
            ck.require(ck.has(o1, PropertyFlag::Gettable), GETTABLE1);
            ck.require(
                ck.has(o2, PropertyFlag::Surface) || ck.has(o2, PropertyFlag::Container),
                SURFACE_OR_CONTAINER,
            );
            ck.require(
                ck.held(o1, o2, &[ContainmentMode::InsideOf, ContainmentMode::OnSurfaceOf]),
                HOLDS_OBJECT1,
            );
        }
        GameAction::PutIn(o1, o2) => {
            ck.require(ck.kind(o1) == obj, IS_OBJECT1);
            ck.require(ck.kind(o2) == obj, IS_OBJECT2);
            ck.require(o1 != o2, DISTINCT_OBJECTS);
            ck.require(ck.reachable(o2), SAME_ROOM_OBJECT2);
            ck.require(
                ck.has(o2, PropertyFlag::Surface) || ck.has(o2, PropertyFlag::Container),
                SURFACE_OR_CONTAINER,
            );
            ck.require(ck.carrying(o1), CARRYING1);
        }
        GameAction::Give(o, agent) => {
            ck.require(ck.kind(o) == obj, IS_OBJECT);
            ck.agent_rows(agent);
            ck.require(ck.member_of(o, actor), MEMBER_OF_ACTOR);
        }
        GameAction::Steal(o, agent) => {
            ck.require(ck.kind(o) == obj, IS_OBJECT);
            ck.agent_rows(agent);
            ck.require(agent != actor && ck.member_of(o, agent), MEMBER_OF_AGENT);
        }
        GameAction::Hit(agent) | GameAction::Hug(agent) => {
            ck.agent_rows(agent);
        }
        GameAction::Drink(o) => {
            ck.require(ck.kind(o) == obj, IS_OBJECT);
            ck.require(ck.carrying(o), CARRYING);
            ck.require(ck.has(o, PropertyFlag::Drink), IS_DRINK);
        }
        GameAction::Eat(o) => {
            ck.require(ck.kind(o) == obj, IS_OBJECT);
            ck.require(ck.carrying(o), CARRYING);
            ck.require(ck.has(o, PropertyFlag::Food), IS_FOOD);
        }
        GameAction::Wear(o) => {
            ck.require(ck.kind(o) == obj, IS_OBJECT);
            ck.require(ck.carrying(o), CARRYING);
            ck.require(ck.has(o, PropertyFlag::Wearable), IS_WEARABLE);
        }
        GameAction::Wield(o) => {
            ck.require(ck.kind(o) == obj, IS_OBJECT);
            ck.require(ck.carrying(o), CARRYING);
            ck.require(ck.has(o, PropertyFlag::Weapon), IS_WEAPON);
        }
        GameAction::Remove(o) => {
            ck.require(ck.kind(o) == obj, IS_OBJECT);
            ck.require(
                ck.held(o, actor, &[ContainmentMode::WornBy, ContainmentMode::WieldedBy]),
                WEARING_OR_WIELDING,
            );
            ck.require(
                ck.has(o, PropertyFlag::Wearable) || ck.has(o, PropertyFlag::Weapon),
                WEARABLE_OR_WEAPON,
            );
        }
        GameAction::Emote(_) => {}
    }

    Ok(if ck.failed.is_empty() {
        ConstraintResult::Ok
    } else {
        ConstraintResult::Failed(ck.failed)
    })
}

/// Applies the outcome row of `a`, returning the successor world. The input
/// world is untouched; a failed constraint check is refused.
pub fn apply_action(
    w: &WorldGraph,
    actor: EntityId,
    a: &GameAction,
) -> Result<(WorldGraph, EventText), WorldError> {
    if let ConstraintResult::Failed(failed) = check_action(w, actor, a)? {
        return Err(WorldError::ConstraintViolation {
            action: *a,
            failed: failed.iter().map(|s| s.to_string()).collect(),
        });
    }
    let name = |id: EntityId| w.name(id).unwrap_or("?").to_string();
    let me = name(actor);
    let room = w.containment(actor).map(|c| c.holder).expect("checked actor placement");
    let mut next = w.clone();
    let carry = |id| ContainmentState::new(id, ContainmentMode::CarriedBy);

    let event = match *a {
        GameAction::Get(o) => {
            next.set_containment(o, carry(actor));
            state_change(format!("{me} gets {}", name(o)))
        }
        GameAction::Drop(o) => {
            next.set_containment(o, ContainmentState::new(room, ContainmentMode::InRoom));
            state_change(format!("{me} drops {}", name(o)))
        }
        GameAction::GetFrom(o1, o2) => {
            next.set_containment(o1, carry(actor));
            state_change(format!("{me} gets {} from {}", name(o1), name(o2)))
        }
        GameAction::PutIn(o1, o2) => {
            let into = w.entity(o2).is_some_and(|e| e.has(PropertyFlag::Container));
            let mode = if into { ContainmentMode::InsideOf } else { ContainmentMode::OnSurfaceOf };
            next.set_containment(o1, ContainmentState::new(o2, mode));
            let prep = if into { "in" } else { "on" };
            state_change(format!("{me} puts {} {prep} {}", name(o1), name(o2)))
        }
        GameAction::Give(o, agent) => {
            next.set_containment(o, carry(agent));
            state_change(format!("{me} gives {} to {}", name(o), name(agent)))
        }
        GameAction::Steal(o, agent) => {
            next.set_containment(o, carry(actor));
            state_change(format!("{me} steals {} from {}", name(o), name(agent)))
        }
        GameAction::Hit(agent) => EventText {
            kind: EventKind::InformAgentOfAttack,
            text: format!("{me} hits {}", name(agent)),
        },
        GameAction::Hug(agent) => EventText {
            kind: EventKind::InformAgentOfHug,
            text: format!("{me} hugs {}", name(agent)),
        },
        GameAction::Drink(o) => EventText {
            kind: EventKind::InformActorOfDrinking,
            text: format!("{me} drinks {}", name(o)),
        },
        GameAction::Eat(o) => EventText {
            kind: EventKind::InformActorOfEating,
            text: format!("{me} eats {}", name(o)),
        },
        GameAction::Wear(o) => {
            next.set_containment(o, ContainmentState::new(actor, ContainmentMode::WornBy));
            state_change(format!("{me} wears {}", name(o)))
        }
        GameAction::Wield(o) => {
            next.set_containment(o, ContainmentState::new(actor, ContainmentMode::WieldedBy));
            state_change(format!("{me} wields {}", name(o)))
        }
        GameAction::Remove(o) => {
            next.set_containment(o, carry(actor));
            state_change(format!("{me} removes {}", name(o)))
        }
        GameAction::Emote(e) => EventText { kind: EventKind::Emote, text: format!("{me} {e}s") },
    };
    Ok((next, event))
}

fn state_change(text: String) -> EventText {
    EventText { kind: EventKind::StateChange, text }
}

/// Every action the actor may take right now, in canonical order, emotes last.
pub fn enumerate_admissible(w: &WorldGraph, actor: EntityId) -> Vec<GameAction> {
    let local = w.local_entities(actor);
    GameAction::all_syntactic(&local)
        .into_iter()
        .filter(|a| matches!(check_action(w, actor, a), Ok(ConstraintResult::Ok)))
        .collect()
}

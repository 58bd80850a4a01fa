//! Graph world engine: entities, containment, the constrained game actions,
//! emotes, admissible-action enumeration and the action text grammar.
//!
//! Worlds are values. [`apply_action`] returns a new graph and never mutates
//! its input, so a world may be shared read-only across rollouts.

mod action;
mod entity;
mod grammar;
mod graph;
mod io;
pub mod random;
mod rules;

use thiserror::Error;

pub use action::{EmoteKind, GameAction, Verb};
pub use entity::{ContainmentMode, ContainmentState, Entity, EntityId, EntityKind, PropertyFlag};
pub use grammar::{parse_action_text, render_action_text, ParseError};
pub use graph::{validate_world, ContainmentEntry, ValidationReport, Violation, WorldFile, WorldGraph};
pub use io::{load_world_file, save_world_file, LightScenario};
pub use rules::{
    apply_action, check_action, enumerate_admissible, ConstraintResult, EventKind, EventText,
};

/// Constraint row names, as reported in [`ConstraintResult::Failed`].
pub mod constraints {
    pub use super::rules::{
        CARRYING, CARRYING1, DISTINCT_OBJECTS, GETTABLE, GETTABLE1, HOLDS_OBJECT1, IS_CHARACTER,
        IS_DRINK, IS_FOOD, IS_OBJECT, IS_OBJECT1, IS_OBJECT2, IS_WEAPON, IS_WEARABLE,
        MEMBER_OF_ACTOR, MEMBER_OF_AGENT, NOT_SELF, SAME_ROOM_AGENT, SAME_ROOM_OBJECT,
        SAME_ROOM_OBJECT2, SURFACE_OR_CONTAINER, WEARABLE_OR_WEAPON, WEARING_OR_WIELDING,
    };
}

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
    #[error("entity {0} is not a character")]
    NotACharacter(EntityId),
    #[error("duplicate entity id {0}")]
    DuplicateId(EntityId),
    #[error("action {action:?} violates constraints: {failed:?}")]
    ConstraintViolation { action: GameAction, failed: Vec<String> },
    #[error("world file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

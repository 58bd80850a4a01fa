use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Stable identifier of a node in a [`WorldGraph`](super::WorldGraph).
///
/// Ids are allocated monotonically and never reused after removal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u32);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Location,
    Character,
    Object,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyFlag {
    Gettable,
    Surface,
    Container,
    Drink,
    Food,
    Wearable,
    Weapon,
}

impl PropertyFlag {
    pub const ALL: [PropertyFlag; 7] = [
        PropertyFlag::Gettable,
        PropertyFlag::Surface,
        PropertyFlag::Container,
        PropertyFlag::Drink,
        PropertyFlag::Food,
        PropertyFlag::Wearable,
        PropertyFlag::Weapon,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub kind: EntityKind,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub properties: BTreeSet<PropertyFlag>,
}

impl Entity {
    pub fn has(&self, flag: PropertyFlag) -> bool {
        self.properties.contains(&flag)
    }

    pub fn is_character(&self) -> bool {
        self.kind == EntityKind::Character
    }

    pub fn is_object(&self) -> bool {
        self.kind == EntityKind::Object
    }
}

/// How an entity is held by its holder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContainmentMode {
    InRoom,
    CarriedBy,
    InsideOf,
    OnSurfaceOf,
    WornBy,
    WieldedBy,
}

impl ContainmentMode {
    /// Modes under which a character "has" an object (member-of in the action table).
    pub fn is_membership(self) -> bool {
        matches!(
            self,
            ContainmentMode::CarriedBy | ContainmentMode::WornBy | ContainmentMode::WieldedBy
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContainmentState {
    pub holder: EntityId,
    pub mode: ContainmentMode,
}

impl ContainmentState {
    pub fn new(holder: EntityId, mode: ContainmentMode) -> Self {
        ContainmentState { holder, mode }
    }
}

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ContainmentMode, ContainmentState, Entity, EntityId, EntityKind, PropertyFlag};

/// Typed node/edge store for locations, characters and objects.
///
/// Containment edges form a forest rooted at locations; `paths` is a
/// symmetric relation between locations stored as ordered pairs `(lo, hi)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WorldGraph {
    entities: BTreeMap<EntityId, Entity>,
    containment: BTreeMap<EntityId, ContainmentState>,
    paths: BTreeSet<(EntityId, EntityId)>,
    next_id: u32,
}

impl WorldGraph {
    pub fn new() -> Self {
        Self::default()
    }

    fn alloc(&mut self) -> EntityId {
        let id = EntityId(self.next_id);
        self.next_id += 1;
        id
    }

    fn insert(
        &mut self,
        kind: EntityKind,
        name: &str,
        description: &str,
        properties: BTreeSet<PropertyFlag>,
    ) -> EntityId {
        let id = self.alloc();
        self.entities.insert(
            id,
            Entity {
                id,
                kind,
                name: name.to_string(),
                description: description.to_string(),
                properties,
            },
        );
        id
    }

    pub fn add_location(&mut self, name: &str, description: &str) -> EntityId {
        self.insert(EntityKind::Location, name, description, BTreeSet::new())
    }

    pub fn add_character(&mut self, name: &str, description: &str, room: EntityId) -> EntityId {
        let id = self.insert(EntityKind::Character, name, description, BTreeSet::new());
        self.containment
            .insert(id, ContainmentState::new(room, ContainmentMode::InRoom));
        id
    }

    pub fn add_object(
        &mut self,
        name: &str,
        description: &str,
        properties: impl IntoIterator<Item = PropertyFlag>,
        placement: ContainmentState,
    ) -> EntityId {
        let id = self.insert(
            EntityKind::Object,
            name,
            description,
            properties.into_iter().collect(),
        );
        self.containment.insert(id, placement);
        id
    }

    pub fn add_path(&mut self, a: EntityId, b: EntityId) {
        let key = if a <= b { (a, b) } else { (b, a) };
        self.paths.insert(key);
    }

    /// Removes an entity, its containment edge and its paths. Anything it
    /// held is dropped into its room. The id is never reallocated.
    pub fn remove_entity(&mut self, id: EntityId) -> Option<Entity> {
        let room = self.room_of(id).filter(|&r| r != id);
        let removed = self.entities.remove(&id)?;
        self.containment.remove(&id);
        let children: Vec<EntityId> = self
            .containment
            .iter()
            .filter(|(_, c)| c.holder == id)
            .map(|(&e, _)| e)
            .collect();
        for child in children {
            match room {
                Some(r) => {
                    self.containment
                        .insert(child, ContainmentState::new(r, ContainmentMode::InRoom));
                }
                None => {
                    self.containment.remove(&child);
                }
            }
        }
        self.paths.retain(|&(a, b)| a != id && b != id);
        Some(removed)
    }

    pub fn entity(&self, id: EntityId) -> Option<&Entity> {
        self.entities.get(&id)
    }

    pub fn contains(&self, id: EntityId) -> bool {
        self.entities.contains_key(&id)
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn ids(&self) -> Vec<EntityId> {
        self.entities.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn name(&self, id: EntityId) -> Option<&str> {
        self.entities.get(&id).map(|e| e.name.as_str())
    }

    pub fn containment(&self, id: EntityId) -> Option<ContainmentState> {
        self.containment.get(&id).copied()
    }

    pub fn containment_map(&self) -> &BTreeMap<EntityId, ContainmentState> {
        &self.containment
    }

    pub fn paths(&self) -> impl Iterator<Item = (EntityId, EntityId)> + '_ {
        self.paths.iter().copied()
    }

    /// Overwrites a containment edge without any checks; `validate_world`
    /// reports whatever this breaks.
    pub fn set_containment(&mut self, id: EntityId, state: ContainmentState) {
        self.containment.insert(id, state);
    }

    /// Location reached by following holder edges, or `None` on a dangling
    /// edge or a cycle.
    pub fn room_of(&self, id: EntityId) -> Option<EntityId> {
        let mut cur = id;
        for _ in 0..=self.entities.len() {
            let e = self.entities.get(&cur)?;
            if e.kind == EntityKind::Location {
                return Some(cur);
            }
            cur = self.containment.get(&cur)?.holder;
        }
        None
    }

    /// Non-location entities sharing the actor's room, excluding the actor.
    pub fn local_entities(&self, actor: EntityId) -> Vec<EntityId> {
        let Some(room) = self.room_of(actor) else {
            return Vec::new();
        };
        self.entities
            .values()
            .filter(|e| e.id != actor && e.kind != EntityKind::Location)
            .filter(|e| self.room_of(e.id) == Some(room))
            .map(|e| e.id)
            .collect()
    }

    pub fn characters_in(&self, room: EntityId) -> Vec<EntityId> {
        self.entities
            .values()
            .filter(|e| e.is_character())
            .filter(|e| {
                self.containment
                    .get(&e.id)
                    .is_some_and(|c| c.holder == room && c.mode == ContainmentMode::InRoom)
            })
            .map(|e| e.id)
            .collect()
    }

    /// Everything whose immediate holder is `holder`.
    pub fn held_by(&self, holder: EntityId) -> Vec<(EntityId, ContainmentMode)> {
        self.containment
            .iter()
            .filter(|(_, c)| c.holder == holder)
            .map(|(&e, c)| (e, c.mode))
            .collect()
    }

    pub fn validate(&self) -> ValidationReport {
        validate_world(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DanglingEntity { entity: EntityId },
    DanglingHolder { entity: EntityId, holder: EntityId },
    MissingContainment { entity: EntityId },
    LocationContained { entity: EntityId },
    LocationHasProperties { entity: EntityId },
    NonObjectProperty { entity: EntityId, flag: PropertyFlag },
    CharacterNotInRoom { entity: EntityId },
    ModeRequiresFlag { entity: EntityId, mode: ContainmentMode, flag: PropertyFlag },
    HolderRequiresFlag { entity: EntityId, holder: EntityId, mode: ContainmentMode, flag: PropertyFlag },
    HolderKind { entity: EntityId, holder: EntityId, mode: ContainmentMode, expected: EntityKind },
    ContainmentCycle { ids: Vec<EntityId> },
    PathEndpointNotLocation { endpoint: EntityId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DanglingEntity { entity } => {
                write!(f, "{entity}: containment entry for unknown entity")
            }
            Violation::DanglingHolder { entity, holder } => {
                write!(f, "{entity}: holder {holder} does not exist")
            }
            Violation::MissingContainment { entity } => {
                write!(f, "{entity}: non-location entity has no holder")
            }
            Violation::LocationContained { entity } => {
                write!(f, "{entity}: locations cannot be contained")
            }
            Violation::LocationHasProperties { entity } => {
                write!(f, "{entity}: locations carry no property flags")
            }
            Violation::NonObjectProperty { entity, flag } => {
                write!(f, "{entity}: only objects may be {flag:?}")
            }
            Violation::CharacterNotInRoom { entity } => {
                write!(f, "{entity}: characters must be InRoom")
            }
            Violation::ModeRequiresFlag { entity, mode, flag } => {
                write!(f, "{entity}: {mode:?} requires {flag:?}")
            }
            Violation::HolderRequiresFlag { entity, holder, mode, flag } => {
                write!(f, "{entity}: {mode:?} requires holder {holder} to be {flag:?}")
            }
            Violation::HolderKind { entity, holder, mode, expected } => {
                write!(f, "{entity}: {mode:?} requires holder {holder} to be a {expected:?}")
            }
            Violation::ContainmentCycle { ids } => {
                let names: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
                write!(f, "containment cycle through {}", names.join(", "))
            }
            Violation::PathEndpointNotLocation { endpoint } => {
                write!(f, "{endpoint}: path endpoint is not a location")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists every invariant violation in `w`. Violations are data, not faults.
pub fn validate_world(w: &WorldGraph) -> ValidationReport {
    let mut out = Vec::new();

    for e in w.entities.values() {
        match e.kind {
            EntityKind::Location => {
                if !e.properties.is_empty() {
                    out.push(Violation::LocationHasProperties { entity: e.id });
                }
                if w.containment.contains_key(&e.id) {
                    out.push(Violation::LocationContained { entity: e.id });
                }
            }
            EntityKind::Character => {
                for &flag in &e.properties {
                    out.push(Violation::NonObjectProperty { entity: e.id, flag });
                }
                if !w.containment.contains_key(&e.id) {
                    out.push(Violation::MissingContainment { entity: e.id });
                }
            }
            EntityKind::Object => {
                if !w.containment.contains_key(&e.id) {
                    out.push(Violation::MissingContainment { entity: e.id });
                }
            }
        }
    }

    for (&id, c) in &w.containment {
        let Some(e) = w.entities.get(&id) else {
            out.push(Violation::DanglingEntity { entity: id });
            continue;
        };
        let Some(holder) = w.entities.get(&c.holder) else {
            out.push(Violation::DanglingHolder { entity: id, holder: c.holder });
            continue;
        };
        if e.kind == EntityKind::Location {
            continue;
        }
        if e.kind == EntityKind::Character && c.mode != ContainmentMode::InRoom {
            out.push(Violation::CharacterNotInRoom { entity: id });
        }
        let need_flag = match c.mode {
            ContainmentMode::WornBy => Some(PropertyFlag::Wearable),
            ContainmentMode::WieldedBy => Some(PropertyFlag::Weapon),
            _ => None,
        };
        if let Some(flag) = need_flag {
            if !e.has(flag) {
                out.push(Violation::ModeRequiresFlag { entity: id, mode: c.mode, flag });
            }
        }
        let expected_kind = match c.mode {
            ContainmentMode::InRoom => EntityKind::Location,
            ContainmentMode::CarriedBy | ContainmentMode::WornBy | ContainmentMode::WieldedBy => {
                EntityKind::Character
            }
            ContainmentMode::InsideOf | ContainmentMode::OnSurfaceOf => EntityKind::Object,
        };
        if holder.kind != expected_kind {
            out.push(Violation::HolderKind {
                entity: id,
                holder: c.holder,
                mode: c.mode,
                expected: expected_kind,
            });
        } else {
            let holder_flag = match c.mode {
                ContainmentMode::InsideOf => Some(PropertyFlag::Container),
                ContainmentMode::OnSurfaceOf => Some(PropertyFlag::Surface),
                _ => None,
            };
            if let Some(flag) = holder_flag {
                if !holder.has(flag) {
                    out.push(Violation::HolderRequiresFlag {
                        entity: id,
                        holder: c.holder,
                        mode: c.mode,
                        flag,
                    });
                }
            }
        }
    }

    // Cycles: walk each chain; a revisit inside the current walk is a cycle.
    let mut reported: BTreeSet<Vec<EntityId>> = BTreeSet::new();
    for &start in w.containment.keys() {
        let mut seen: Vec<EntityId> = Vec::new();
        let mut cur = start;
        loop {
            if let Some(pos) = seen.iter().position(|&s| s == cur) {
                let mut cycle = seen[pos..].to_vec();
                cycle.sort();
                if reported.insert(cycle.clone()) {
                    out.push(Violation::ContainmentCycle { ids: cycle });
                }
                break;
            }
            seen.push(cur);
            match w.containment.get(&cur) {
                Some(c) if w.entities.contains_key(&c.holder) => cur = c.holder,
                _ => break,
            }
        }
    }

    for &(a, b) in &w.paths {
        for end in [a, b] {
            if w.entities.get(&end).map(|e| e.kind) != Some(EntityKind::Location) {
                out.push(Violation::PathEndpointNotLocation { endpoint: end });
            }
        }
    }

    ValidationReport { violations: out }
}

/// On-disk form: `{"entities": [...], "containment": [...], "paths": [[a, b], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldFile {
    pub entities: Vec<Entity>,
    #[serde(default)]
    pub containment: Vec<ContainmentEntry>,
    #[serde(default)]
    pub paths: Vec<(EntityId, EntityId)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next_id: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContainmentEntry {
    pub entity: EntityId,
    pub holder: EntityId,
    pub mode: ContainmentMode,
}

impl From<&WorldGraph> for WorldFile {
    fn from(w: &WorldGraph) -> Self {
        WorldFile {
            entities: w.entities.values().cloned().collect(),
            containment: w
                .containment
                .iter()
                .map(|(&entity, c)| ContainmentEntry { entity, holder: c.holder, mode: c.mode })
                .collect(),
            paths: w.paths.iter().copied().collect(),
            next_id: Some(w.next_id),
        }
    }
}

impl TryFrom<WorldFile> for WorldGraph {
    type Error = super::WorldError;

    fn try_from(f: WorldFile) -> Result<Self, Self::Error> {
        let mut w = WorldGraph::new();
        for e in f.entities {
            if w.entities.contains_key(&e.id) {
                return Err(super::WorldError::DuplicateId(e.id));
            }
            w.next_id = w.next_id.max(e.id.0 + 1);
            w.entities.insert(e.id, e);
        }
        for c in f.containment {
            if w.containment.contains_key(&c.entity) {
                return Err(super::WorldError::DuplicateId(c.entity));
            }
            w.containment
                .insert(c.entity, ContainmentState::new(c.holder, c.mode));
        }
        for (a, b) in f.paths {
            w.add_path(a, b);
        }
        if let Some(n) = f.next_id {
            w.next_id = w.next_id.max(n);
        }
        Ok(w)
    }
}

impl Serialize for WorldGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        WorldFile::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for WorldGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let f = WorldFile::deserialize(d)?;
        WorldGraph::try_from(f).map_err(serde::de::Error::custom)
    }
}

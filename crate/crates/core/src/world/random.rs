//! Seeded random small worlds, used for exhaustive engine checks.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{ContainmentMode, ContainmentState, EntityId, PropertyFlag, WorldGraph};

#[derive(Debug, Clone, Copy)]
pub struct RandomWorldLimits {
    pub max_rooms: usize,
    pub max_characters: usize,
    pub max_objects: usize,
}

impl Default for RandomWorldLimits {
    fn default() -> Self {
        RandomWorldLimits { max_rooms: 3, max_characters: 4, max_objects: 6 }
    }
}

const ROOM_NAMES: &[&str] = &["armory", "great hall", "old kitchen", "crypt", "stable"];
const CHARACTER_NAMES: &[&str] = &["guard", "old knight", "merchant", "priest", "horse", "thief"];
const OBJECT_NAMES: &[&str] = &[
    "apple", "rusty sword", "old chest", "dinner table", "coin", "cloak", "wine", "bread",
    "lantern", "shield", "sack", "dagger",
];

/// A valid world with unique names. Every world has at least one room and
/// one character.
pub fn random_world<R: Rng>(rng: &mut R, limits: RandomWorldLimits) -> (WorldGraph, Vec<EntityId>) {
    let mut w = WorldGraph::new();
    let n_rooms = rng.gen_range(1..=limits.max_rooms.max(1));
    let n_chars = rng.gen_range(1..=limits.max_characters.max(1));
    let n_objs = rng.gen_range(0..=limits.max_objects);

    let rooms: Vec<EntityId> = ROOM_NAMES
        .choose_multiple(rng, n_rooms)
        .map(|n| w.add_location(n, ""))
        .collect();
    for pair in rooms.windows(2) {
        w.add_path(pair[0], pair[1]);
    }

    let mut chars = Vec::new();
    for name in CHARACTER_NAMES.choose_multiple(rng, n_chars).copied().collect::<Vec<_>>() {
        // Bias toward the first room so interactions are common.
        let room = if rng.gen_bool(0.7) { rooms[0] } else { *rooms.choose(rng).unwrap() };
        chars.push(w.add_character(name, "", room));
    }

    let mut objs: Vec<(EntityId, Vec<PropertyFlag>)> = Vec::new();
    for name in OBJECT_NAMES.choose_multiple(rng, n_objs).copied().collect::<Vec<_>>() {
        let flags: Vec<PropertyFlag> = PropertyFlag::ALL
            .iter()
            .copied()
            .filter(|_| rng.gen_bool(0.3))
            .collect();
        let mut options: Vec<ContainmentState> = rooms
            .iter()
            .map(|&r| ContainmentState::new(r, ContainmentMode::InRoom))
            .collect();
        for &c in &chars {
            options.push(ContainmentState::new(c, ContainmentMode::CarriedBy));
            if flags.contains(&PropertyFlag::Wearable) {
                options.push(ContainmentState::new(c, ContainmentMode::WornBy));
            }
            if flags.contains(&PropertyFlag::Weapon) {
                options.push(ContainmentState::new(c, ContainmentMode::WieldedBy));
            }
        }
        // Only earlier objects can hold this one, so no cycles can form.
        for (holder, hflags) in &objs {
            if hflags.contains(&PropertyFlag::Container) {
                options.push(ContainmentState::new(*holder, ContainmentMode::InsideOf));
            }
            if hflags.contains(&PropertyFlag::Surface) {
                options.push(ContainmentState::new(*holder, ContainmentMode::OnSurfaceOf));
            }
        }
        let place = *options.choose(rng).unwrap();
        let id = w.add_object(name, "", flags.iter().copied(), place);
        objs.push((id, flags));
    }
    (w, chars)
}

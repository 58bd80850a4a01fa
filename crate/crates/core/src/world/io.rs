use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ContainmentMode, ContainmentState, PropertyFlag, WorldError, WorldGraph};

/// A LIGHT-style scenario: one setting, its characters and its objects.
///
/// Objects are placed on the floor unless `contained_in` names another
/// object, or a character lists them under carrying/wearing/wielding.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LightScenario {
    pub setting: LightSetting,
    #[serde(default)]
    pub characters: Vec<LightCharacter>,
    #[serde(default)]
    pub objects: Vec<LightObject>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LightSetting {
    pub name: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LightCharacter {
    pub name: String,
    #[serde(default)]
    pub persona: String,
    #[serde(default)]
    pub carrying: Vec<String>,
    #[serde(default)]
    pub wearing: Vec<String>,
    #[serde(default)]
    pub wielding: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LightObject {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub is_gettable: bool,
    #[serde(default)]
    pub is_surface: bool,
    #[serde(default)]
    pub is_container: bool,
    #[serde(default)]
    pub is_drink: bool,
    #[serde(default)]
    pub is_food: bool,
    #[serde(default)]
    pub is_wearable: bool,
    #[serde(default)]
    pub is_weapon: bool,
    #[serde(default)]
    pub contained_in: Option<String>,
}

impl LightObject {
    fn flags(&self) -> Vec<PropertyFlag> {
        [
            (self.is_gettable, PropertyFlag::Gettable),
            (self.is_surface, PropertyFlag::Surface),
            (self.is_container, PropertyFlag::Container),
            (self.is_drink, PropertyFlag::Drink),
            (self.is_food, PropertyFlag::Food),
            (self.is_wearable, PropertyFlag::Wearable),
            (self.is_weapon, PropertyFlag::Weapon),
        ]
        .into_iter()
        .filter(|(on, _)| *on)
        .map(|(_, f)| f)
        .collect()
    }
}

impl LightScenario {
    /// Builds a single-room world. Unknown holder names are a format error.
    pub fn to_world(&self) -> Result<WorldGraph, WorldError> {
        let mut w = WorldGraph::new();
        let room = w.add_location(&self.setting.name, &self.setting.description);
        let mut chars = Vec::new();
        for c in &self.characters {
            chars.push(w.add_character(&c.name, &c.persona, room));
        }
        let floor = ContainmentState::new(room, ContainmentMode::InRoom);
        let mut objs = Vec::new();
        for o in &self.objects {
            objs.push(w.add_object(&o.name, &o.description, o.flags(), floor));
        }
        let find_obj = |name: &str| {
            self.objects
                .iter()
                .position(|o| o.name == name)
                .ok_or_else(|| WorldError::Format(format!("unknown object '{name}'")))
        };
        for (i, o) in self.objects.iter().enumerate() {
            if let Some(holder) = &o.contained_in {
                let h = find_obj(holder)?;
                let mode = if self.objects[h].is_container {
                    ContainmentMode::InsideOf
                } else {
                    ContainmentMode::OnSurfaceOf
                };
                w.set_containment(objs[i], ContainmentState::new(objs[h], mode));
            }
        }
        for (c, id) in self.characters.iter().zip(&chars) {
            for (names, mode) in [
                (&c.carrying, ContainmentMode::CarriedBy),
                (&c.wearing, ContainmentMode::WornBy),
                (&c.wielding, ContainmentMode::WieldedBy),
            ] {
                for n in names {
                    w.set_containment(objs[find_obj(n)?], ContainmentState::new(*id, mode));
                }
            }
        }
        Ok(w)
    }
}

/// Loads either the native world schema or a LIGHT-style scenario.
pub fn load_world_file(path: &Path) -> Result<WorldGraph, WorldError> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| WorldError::Format(e.to_string()))?;
    if value.get("entities").is_some() {
        serde_json::from_value(value).map_err(|e| WorldError::Format(e.to_string()))
    } else if value.get("setting").is_some() {
        let s: LightScenario =
            serde_json::from_value(value).map_err(|e| WorldError::Format(e.to_string()))?;
        s.to_world()
    } else {
        Err(WorldError::Format(
            "expected 'entities' (world schema) or 'setting' (scenario schema)".into(),
        ))
    }
}

pub fn save_world_file(path: &Path, w: &WorldGraph) -> Result<(), WorldError> {
    let text = serde_json::to_string_pretty(w).map_err(|e| WorldError::Format(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::observation::normalize_utterance;
use super::scenario::{CharacterRef, EpisodeLog, Scenario, Speaker, TurnEvent};
use super::templates::{
    env_ack, trigger_utterances, ADJECTIVES, CHARACTERS, ENV_CANNOT, ENV_FILLER, ENV_REFUSE,
    OBJECT_KINDS, PERSONA_TRAITS, PLAYER_FILLER, SETTINGS,
};
use super::TaskError;
use crate::config::{ConfigError, ConfigFile, Section};
use crate::rng::stream;
use crate::world::{
    apply_action, check_action, enumerate_admissible, ContainmentMode, ContainmentState, EmoteKind,
    EntityId, GameAction, PropertyFlag, Verb, WorldGraph,
};

/// Synthetic corpus parameters. Probabilities are per player turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub worlds: usize,
    pub unseen_worlds: usize,
    pub episodes_per_world: usize,
    pub valid_per_world: usize,
    pub test_per_world: usize,
    pub min_turns: usize,
    pub max_turns: usize,
    pub characters: usize,
    pub min_objects: usize,
    pub max_objects: usize,
    pub trigger_prob: f64,
    pub emote_trigger_prob: f64,
    pub followup_prob: f64,
    pub mistrigger_prob: f64,
    pub comply_prob: f64,
    pub spontaneous_prob: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            worlds: 24,
            unseen_worlds: 6,
            episodes_per_world: 100,
            valid_per_world: 2,
            test_per_world: 12,
            min_turns: 2,
            max_turns: 5,
            characters: 3,
            min_objects: 4,
            max_objects: 8,
            trigger_prob: 0.7,
            emote_trigger_prob: 0.35,
            followup_prob: 0.6,
            mistrigger_prob: 0.1,
            comply_prob: 0.97,
            spontaneous_prob: 0.05,
        }
    }
}

const GEN_KEYS: &[&str] = &[
    "worlds", "unseen_worlds", "episodes_per_world", "valid_per_world", "test_per_world",
    "min_turns", "max_turns", "characters", "min_objects", "max_objects", "trigger_prob",
    "emote_trigger_prob", "followup_prob", "mistrigger_prob", "comply_prob", "spontaneous_prob",
];

impl GenConfig {
    pub fn from_section(s: &Section, allowed_extra: &[&str]) -> Result<Self, ConfigError> {
        s.only(GEN_KEYS, allowed_extra)?;
        let mut c = GenConfig::default();
        s.read("worlds", &mut c.worlds)?;
        s.read("unseen_worlds", &mut c.unseen_worlds)?;
        s.read("episodes_per_world", &mut c.episodes_per_world)?;
        s.read("valid_per_world", &mut c.valid_per_world)?;
        s.read("test_per_world", &mut c.test_per_world)?;
        s.read("min_turns", &mut c.min_turns)?;
        s.read("max_turns", &mut c.max_turns)?;
        s.read("characters", &mut c.characters)?;
        s.read("min_objects", &mut c.min_objects)?;
        s.read("max_objects", &mut c.max_objects)?;
        s.read("trigger_prob", &mut c.trigger_prob)?;
        s.read("emote_trigger_prob", &mut c.emote_trigger_prob)?;
        s.read("followup_prob", &mut c.followup_prob)?;
        s.read("mistrigger_prob", &mut c.mistrigger_prob)?;
        s.read("comply_prob", &mut c.comply_prob)?;
        s.read("spontaneous_prob", &mut c.spontaneous_prob)?;
        c.validate_with(s)?;
        Ok(c)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_section(&ConfigFile::parse(text)?.section_or_root("gen"), &[])
    }

    fn validate_with(&self, s: &Section) -> Result<(), ConfigError> {
        for (k, v) in [("worlds", self.worlds), ("episodes_per_world", self.episodes_per_world)] {
            if v == 0 {
                return Err(s.invalid(k, v, "must be at least 1"));
            }
        }
        if self.min_turns == 0 || self.max_turns < self.min_turns {
            return Err(s.invalid("max_turns", self.max_turns, "need 1 <= min_turns <= max_turns"));
        }
        if self.characters < 2 || self.characters > CHARACTERS.len() {
            return Err(s.invalid("characters", self.characters, "need at least 2 characters"));
        }
        if self.max_objects < self.min_objects || self.max_objects > OBJECT_KINDS.len() {
            return Err(s.invalid("max_objects", self.max_objects, "need min_objects <= max_objects <= 32"));
        }
        for (k, p) in [
            ("trigger_prob", self.trigger_prob),
            ("emote_trigger_prob", self.emote_trigger_prob),
            ("followup_prob", self.followup_prob),
            ("mistrigger_prob", self.mistrigger_prob),
            ("comply_prob", self.comply_prob),
            ("spontaneous_prob", self.spontaneous_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(s.invalid(k, p, "must be a probability"));
            }
        }
        if self.trigger_prob + self.mistrigger_prob > 1.0 {
            return Err(s.invalid("mistrigger_prob", self.mistrigger_prob, "trigger_prob + mistrigger_prob exceeds 1"));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.validate_with(&ConfigFile::default().section("gen"))
    }

    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("worlds", self.worlds.to_string()),
            ("unseen_worlds", self.unseen_worlds.to_string()),
            ("episodes_per_world", self.episodes_per_world.to_string()),
            ("valid_per_world", self.valid_per_world.to_string()),
            ("test_per_world", self.test_per_world.to_string()),
            ("min_turns", self.min_turns.to_string()),
            ("max_turns", self.max_turns.to_string()),
            ("characters", self.characters.to_string()),
            ("min_objects", self.min_objects.to_string()),
            ("max_objects", self.max_objects.to_string()),
            ("trigger_prob", self.trigger_prob.to_string()),
            ("emote_trigger_prob", self.emote_trigger_prob.to_string()),
            ("followup_prob", self.followup_prob.to_string()),
            ("mistrigger_prob", self.mistrigger_prob.to_string()),
            ("comply_prob", self.comply_prob.to_string()),
            ("spontaneous_prob", self.spontaneous_prob.to_string()),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Valid,
    TestSeen,
    TestUnseen,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Train, Split::Valid, Split::TestSeen, Split::TestUnseen];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::TestSeen => "test_seen",
            Split::TestUnseen => "test_unseen",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Split::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| format!("split must be one of train, valid, test_seen, test_unseen; got '{s}'"))
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldRecord {
    pub id: String,
    pub setting_name: String,
    pub setting_desc: String,
    pub characters: Vec<CharacterRef>,
    pub world: WorldGraph,
    pub unseen: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seen_worlds: Vec<String>,
    pub unseen_worlds: Vec<String>,
    pub train: Vec<String>,
    pub valid: Vec<String>,
    pub test_seen: Vec<String>,
    pub test_unseen: Vec<String>,
}

impl SplitManifest {
    pub fn ids(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::TestSeen => &self.test_seen,
            Split::TestUnseen => &self.test_unseen,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub config: GenConfig,
    pub seed: u64,
    pub worlds: Vec<WorldRecord>,
    pub logs: Vec<EpisodeLog>,
    pub manifest: SplitManifest,
    /// Deduplicated player utterances of the training split, sorted.
    pub player_utterances: Vec<String>,
    /// Deduplicated environment utterances of the training split, sorted.
    pub env_utterances: Vec<String>,
}

impl Corpus {
    pub fn split(&self, split: Split) -> Vec<&EpisodeLog> {
        let ids: BTreeSet<&str> = self.manifest.ids(split).iter().map(String::as_str).collect();
        self.logs.iter().filter(|l| ids.contains(l.id.as_str())).collect()
    }

    pub fn world(&self, id: &str) -> Option<&WorldRecord> {
        self.worlds.iter().find(|w| w.id == id)
    }
}

fn make_world<R: Rng>(cfg: &GenConfig, id: String, unseen: bool, rng: &mut R) -> WorldRecord {
    let &(setting_name, setting_desc) = SETTINGS.choose(rng).unwrap();
    let mut w = WorldGraph::new();
    let room = w.add_location(setting_name, setting_desc);

    let mut characters = Vec::new();
    for &name in CHARACTERS.choose_multiple(rng, cfg.characters) {
        let traits: Vec<&str> = PERSONA_TRAITS.choose_multiple(rng, 2).copied().collect();
        let persona = format!("i am a {name}. {}. {}.", traits[0], traits[1]);
        let cid = w.add_character(name, &persona, room);
        characters.push(CharacterRef { id: cid, name: name.to_string(), persona });
    }

    let n_objects = rng.gen_range(cfg.min_objects..=cfg.max_objects);
    let mut holders: Vec<(EntityId, PropertyFlag)> = Vec::new();
    for &(noun, flags) in OBJECT_KINDS.choose_multiple(rng, n_objects) {
        let name = if rng.gen_bool(0.5) {
            format!("{} {noun}", ADJECTIVES.choose(rng).unwrap())
        } else {
            noun.to_string()
        };
        let gettable = flags.contains(&PropertyFlag::Gettable);
        let roll: f64 = rng.gen();
        let place = if !gettable || roll < 0.45 {
            ContainmentState::new(room, ContainmentMode::InRoom)
        } else if roll < 0.75 || holders.is_empty() {
            let owner = characters.choose(rng).unwrap().id;
            let mode = if flags.contains(&PropertyFlag::Wearable) && rng.gen_bool(0.5) {
                ContainmentMode::WornBy
            } else if flags.contains(&PropertyFlag::Weapon) && rng.gen_bool(0.5) {
                ContainmentMode::WieldedBy
            } else {
                ContainmentMode::CarriedBy
            };
            ContainmentState::new(owner, mode)
        } else {
            let &(holder, flag) = holders.choose(rng).unwrap();
            let mode = if flag == PropertyFlag::Container {
                ContainmentMode::InsideOf
            } else {
                ContainmentMode::OnSurfaceOf
            };
            ContainmentState::new(holder, mode)
        };
        let oid = w.add_object(&name, "", flags.iter().copied(), place);
        for f in [PropertyFlag::Container, PropertyFlag::Surface] {
            if flags.contains(&f) {
                holders.push((oid, f));
            }
        }
    }
    WorldRecord {
        id,
        setting_name: setting_name.to_string(),
        setting_desc: setting_desc.to_string(),
        characters,
        world: w,
        unseen,
    }
}

const MISTRIGGER_VERBS: [Verb; 6] = [Verb::Drop, Verb::Drink, Verb::Eat, Verb::Wear, Verb::Wield, Verb::Remove];

fn fill(template: &str, sc: &Scenario) -> String {
    template
        .replace("{setting}", &sc.setting_name)
        .replace("{partner}", &sc.env_char.name)
        .replace("{self}", &sc.player.name)
}

fn mentions_any(a: &GameAction, objs: &BTreeSet<EntityId>) -> bool {
    a.args().iter().any(|x| objs.contains(x))
}

/// One scripted dialogue. Player turns are triggers, mis-triggers or filler;
/// the environment complies with triggers and occasionally acts unprompted.
fn make_log<R: Rng>(cfg: &GenConfig, rec: &WorldRecord, id: String, rng: &mut R) -> EpisodeLog {
    let pair: Vec<&CharacterRef> = rec.characters.choose_multiple(rng, 2).collect();
    let scenario = Scenario {
        setting_name: rec.setting_name.clone(),
        setting_desc: rec.setting_desc.clone(),
        player: pair[0].clone(),
        env_char: pair[1].clone(),
        world: rec.world.clone(),
    };
    let (player, env) = (scenario.player.id, scenario.env_char.id);
    let mut world = rec.world.clone();
    let mut acquired: BTreeSet<EntityId> = BTreeSet::new();
    let mut turns = Vec::new();
    let n = rng.gen_range(cfg.min_turns..=cfg.max_turns);

    for _ in 0..n {
        let admissible = enumerate_admissible(&world, env);
        let game: Vec<&GameAction> = admissible.iter().filter(|a| !a.is_emote()).collect();
        let roll: f64 = rng.gen();
        let (utterance, reply, action) = if roll < cfg.trigger_prob {
            let target = if game.is_empty() || rng.gen_bool(cfg.emote_trigger_prob) {
                GameAction::Emote(*EmoteKind::ALL.choose(rng).unwrap())
            } else {
                let follow: Vec<&&GameAction> = game.iter().filter(|a| mentions_any(a, &acquired)).collect();
                if !follow.is_empty() && rng.gen_bool(cfg.followup_prob) {
                    (**follow.choose(rng).unwrap()).clone()
                } else {
                    (*game.choose(rng).unwrap()).clone()
                }
            };
            let u = trigger_utterances(&target, &world, player).choose(rng).unwrap().clone();
            if rng.gen_bool(cfg.comply_prob) {
                (u, env_ack(&target).choose(rng).unwrap().to_string(), Some(target))
            } else {
                (u, ENV_REFUSE.choose(rng).unwrap().to_string(), None)
            }
        } else if roll < cfg.trigger_prob + cfg.mistrigger_prob {
            let local = world.local_entities(env);
            let bad: Vec<GameAction> = GameAction::all_syntactic(&local)
                .into_iter()
                .filter(|a| MISTRIGGER_VERBS.contains(&a.verb()))
                .filter(|a| matches!(check_action(&world, env, a), Ok(r) if !r.is_ok()))
                .collect();
            match bad.choose(rng) {
                Some(a) => {
                    let u = trigger_utterances(a, &world, player).choose(rng).unwrap().clone();
                    (u, ENV_CANNOT.choose(rng).unwrap().to_string(), None)
                }
                None => (fill(PLAYER_FILLER.choose(rng).unwrap(), &scenario), ENV_FILLER.choose(rng).unwrap().to_string(), None),
            }
        } else {
            let u = fill(PLAYER_FILLER.choose(rng).unwrap(), &scenario);
            if rng.gen_bool(cfg.spontaneous_prob) {
                let a = admissible.choose(rng).unwrap().clone();
                (u, env_ack(&a).choose(rng).unwrap().to_string(), Some(a))
            } else {
                (u, ENV_FILLER.choose(rng).unwrap().to_string(), None)
            }
        };

        turns.push(TurnEvent::player(utterance));
        if let Some(a) = &action {
            world = apply_action(&world, env, a).expect("generator picks admissible actions").0;
            for x in a.args() {
                if matches!(world.containment(x), Some(c) if c.holder == env && c.mode.is_membership()) {
                    acquired.insert(x);
                }
            }
        }
        turns.push(TurnEvent::env(reply, action));
    }
    EpisodeLog {
        id,
        world_id: rec.id.clone(),
        scenario,
        goal: None,
        turns_used: n,
        turns,
        reward: 0,
        partial: false,
    }
}

fn dedup_sorted<'a>(it: impl Iterator<Item = &'a str>) -> Vec<String> {
    it.map(normalize_utterance).collect::<BTreeSet<_>>().into_iter().collect()
}

/// Worlds, scripted logs, utterance candidate lists and the split manifest.
/// Every world and log has its own RNG stream, so the result does not depend
/// on how the work is scheduled.
pub fn generate_synthetic_corpus(cfg: &GenConfig, seed: u64) -> Result<Corpus, TaskError> {
    cfg.validate()?;
    let total = cfg.worlds + cfg.unseen_worlds;
    let worlds: Vec<WorldRecord> = (0..total)
        .into_par_iter()
        .map(|i| {
            let unseen = i >= cfg.worlds;
            make_world(cfg, format!("w{i:03}"), unseen, &mut stream(seed, &[0, i as u64]))
        })
        .collect();

    let mut jobs: Vec<(usize, Split, usize)> = Vec::new();
    for (wi, rec) in worlds.iter().enumerate() {
        if rec.unseen {
            jobs.extend((0..cfg.test_per_world).map(|e| (wi, Split::TestUnseen, e)));
        } else {
            jobs.extend((0..cfg.episodes_per_world).map(|e| (wi, Split::Train, e)));
            jobs.extend((0..cfg.valid_per_world).map(|e| (wi, Split::Valid, e)));
            jobs.extend((0..cfg.test_per_world).map(|e| (wi, Split::TestSeen, e)));
        }
    }
    jobs.sort_by_key(|&(_, split, _)| split);
    let logs: Vec<(Split, EpisodeLog)> = jobs
        .par_iter()
        .map(|&(wi, split, e)| {
            let rec = &worlds[wi];
            let id = format!("{}-{}-{e:04}", rec.id, split.as_str());
            let mut rng = stream(seed, &[1, wi as u64, split as u64, e as u64]);
            (split, make_log(cfg, rec, id, &mut rng))
        })
        .collect();

    let mut manifest = SplitManifest::default();
    for rec in &worlds {
        if rec.unseen {
            manifest.unseen_worlds.push(rec.id.clone());
        } else {
            manifest.seen_worlds.push(rec.id.clone());
        }
    }
    for (split, log) in &logs {
        match split {
            Split::Train => manifest.train.push(log.id.clone()),
            Split::Valid => manifest.valid.push(log.id.clone()),
            Split::TestSeen => manifest.test_seen.push(log.id.clone()),
            Split::TestUnseen => manifest.test_unseen.push(log.id.clone()),
        }
    }
    let train: Vec<&EpisodeLog> = logs.iter().filter(|(s, _)| *s == Split::Train).map(|(_, l)| l).collect();
    let player_utterances = dedup_sorted(train.iter().flat_map(|l| l.player_utterances()));
    let env_utterances = dedup_sorted(
        train
            .iter()
            .flat_map(|l| l.turns.iter().filter(|t| t.speaker == Speaker::Env).map(|t| t.utterance.as_str())),
    );
    Ok(Corpus {
        config: cfg.clone(),
        seed,
        worlds,
        logs: logs.into_iter().map(|(_, l)| l).collect(),
        manifest,
        player_utterances,
        env_utterances,
    })
}

/// Compliance audit for the "take a look at <obj>" trigger: how many such
/// player turns are answered by `Get(<obj>)`.
pub fn audit_get_trigger(logs: &[&EpisodeLog]) -> (usize, usize) {
    let mut hits = 0;
    let mut total = 0;
    for log in logs {
        let w = &log.scenario.world;
        for pair in log.turns.windows(2) {
            let (p, e) = (&pair[0], &pair[1]);
            if p.speaker != Speaker::Player || e.speaker != Speaker::Env {
                continue;
            }
            let Some(name) = normalize_utterance(&p.utterance).strip_prefix("take a look at the ").map(str::to_string) else {
                continue;
            };
            total += 1;
            let obj = w
                .entities()
                .find(|x| x.is_object() && x.name.to_lowercase() == name)
                .map(|x| x.id);
            if obj.is_some() && e.action == obj.map(GameAction::Get) {
                hits += 1;
            }
        }
    }
    (hits, total)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<(), TaskError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, &item).map_err(|e| TaskError::Schema(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, TaskError> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| TaskError::Schema(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct UtteranceFile {
    player: Vec<String>,
    env: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct CorpusMeta {
    seed: u64,
    config: GenConfig,
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), TaskError> {
    let s = serde_json::to_string_pretty(v).map_err(|e| TaskError::Schema(e.to_string()))?;
    std::fs::write(path, s + "\n")?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, TaskError> {
    let s = std::fs::read_to_string(path)?;
    serde_json::from_str(&s).map_err(|e| TaskError::Schema(format!("{}: {e}", path.display())))
}

impl Corpus {
    /// Layout: `corpus.json`, `manifest.json`, `utterances.json`,
    /// `worlds/<id>.json`, `logs/<split>.jsonl`.
    pub fn save(&self, dir: &Path) -> Result<(), TaskError> {
        std::fs::create_dir_all(dir.join("worlds"))?;
        std::fs::create_dir_all(dir.join("logs"))?;
        write_json(&dir.join("corpus.json"), &CorpusMeta { seed: self.seed, config: self.config.clone() })?;
        write_json(&dir.join("manifest.json"), &self.manifest)?;
        write_json(
            &dir.join("utterances.json"),
            &UtteranceFile { player: self.player_utterances.clone(), env: self.env_utterances.clone() },
        )?;
        for w in &self.worlds {
            write_json(&dir.join("worlds").join(format!("{}.json", w.id)), w)?;
        }
        for split in Split::ALL {
            write_jsonl(&dir.join("logs").join(format!("{split}.jsonl")), self.split(split))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, TaskError> {
        let meta: CorpusMeta = read_json(&dir.join("corpus.json"))?;
        let manifest: SplitManifest = read_json(&dir.join("manifest.json"))?;
        let utt: UtteranceFile = read_json(&dir.join("utterances.json"))?;
        let mut worlds = Vec::new();
        for id in manifest.seen_worlds.iter().chain(&manifest.unseen_worlds) {
            worlds.push(read_json::<WorldRecord>(&dir.join("worlds").join(format!("{id}.json")))?);
        }
        let mut by_id: BTreeMap<String, EpisodeLog> = BTreeMap::new();
        for split in Split::ALL {
            let path = dir.join("logs").join(format!("{split}.jsonl"));
            for log in read_jsonl::<EpisodeLog>(&path)? {
                by_id.insert(log.id.clone(), log);
            }
        }
        let mut logs = Vec::new();
        for split in Split::ALL {
            for id in manifest.ids(split) {
                let log = by_id
                    .remove(id)
                    .ok_or_else(|| TaskError::Schema(format!("manifest lists missing log {id}")))?;
                logs.push(log);
            }
        }
        Ok(Corpus {
            config: meta.config,
            seed: meta.seed,
            worlds,
            logs,
            manifest,
            player_utterances: utt.player,
            env_utterances: utt.env,
        })
    }
}

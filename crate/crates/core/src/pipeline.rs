//! Run configuration, on-disk layout and the train/evaluate steps shared by
//! the command-line tool and the acceptance suite.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::agents::{
    build_inverse_dataset, pretrain_topic_components, ActMode, EnvAgentConfig, EnvironmentAgent,
    InverseModel, RandomUtterance, TopKAgent, TopKVariant, TopicAgent, TopicConfig, TrainConfig,
};
use crate::config::{render_section, ConfigError, ConfigFile, Section};
use crate::eval::{
    achievability_split, agent_space, episode_starts, evaluate_policy, EvalError, EvalReport,
    EvalSpec, EpisodeStart,
};
use crate::neural::EncoderConfig;
use crate::rl::{A2CConfig, EpisodeSampler, RlAgent, RlError, RlPolicy, TrainStats};
use crate::rng::stream;
use crate::task::{Corpus, EnvAgent, GenConfig, GoalType, PlayerPolicy, Split, TaskConfig, TaskError};

pub const DATA_ENV: &str = "GOALWORLD_DATA";
pub const DEFAULT_DATA_DIR: &str = "goalworld-data";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Inverse,
    InverseNoGoal,
    Topic,
    TopK,
    TopKBi,
    Random,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Inverse,
        ModelKind::InverseNoGoal,
        ModelKind::Topic,
        ModelKind::TopK,
        ModelKind::TopKBi,
        ModelKind::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Inverse => "inverse",
            ModelKind::InverseNoGoal => "inverse-nogoal",
            ModelKind::Topic => "topic",
            ModelKind::TopK => "topk",
            ModelKind::TopKBi => "topkbi",
            ModelKind::Random => "random",
        }
    }

    pub fn is_rl(self) -> bool {
        matches!(self, ModelKind::Topic | ModelKind::TopK | ModelKind::TopKBi)
    }
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("model must be one of inverse, inverse-nogoal, topic, topk, topkbi, random; got '{s}'"))
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where corpus, checkpoints, metrics and reports live.
#[derive(Debug, Clone, PartialEq)]
pub struct Paths {
    pub corpus: PathBuf,
    pub checkpoints: PathBuf,
    pub reports: PathBuf,
    pub metrics: PathBuf,
}

impl Paths {
    pub fn under(root: &Path) -> Self {
        Paths {
            corpus: root.join("corpus"),
            checkpoints: root.join("checkpoints"),
            reports: root.join("reports"),
            metrics: root.join("metrics"),
        }
    }

    /// `$GOALWORLD_DATA`, else `./goalworld-data`.
    pub fn default_root() -> PathBuf {
        std::env::var_os(DATA_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR))
    }

    pub fn env_agent(&self) -> PathBuf {
        self.checkpoints.join("env.gwck")
    }

    pub fn inverse(&self, goal_conditioned: bool) -> PathBuf {
        self.checkpoints.join(if goal_conditioned { "inverse.gwck" } else { "inverse-nogoal.gwck" })
    }

    pub fn topic_pretrained(&self, clusters: usize) -> PathBuf {
        self.checkpoints.join(format!("topic-c{clusters}.gwck"))
    }

    /// Checkpoint of an RL-trained agent.
    pub fn rl_checkpoint(&self, tag: &str) -> PathBuf {
        self.checkpoints.join(format!("{tag}.gwck"))
    }
}

/// Every knob of a run. Sections: `[task]`, `[model]`, `[encoder]`,
/// `[env_agent]`, `[inverse]`, `[topic]`, `[a2c]`, `[eval]`, `[paths]`, plus
/// `seed` at top level. `[gen]` is read by corpus generation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub task: TaskConfig,
    pub model: ModelKind,
    pub clusters: Option<usize>,
    pub topk: Option<usize>,
    pub encoder: EncoderConfig,
    pub env_agent: EnvAgentConfig,
    pub inverse: TrainConfig,
    pub topic: TopicConfig,
    pub a2c: A2CConfig,
    pub gen: GenConfig,
    pub eval_episodes: usize,
    pub eval_seed: u64,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            task: TaskConfig::default(),
            model: ModelKind::Topic,
            clusters: None,
            topk: None,
            encoder: EncoderConfig::default(),
            env_agent: EnvAgentConfig::default(),
            inverse: TrainConfig::default(),
            topic: TopicConfig::default(),
            a2c: A2CConfig::default(),
            gen: GenConfig::default(),
            eval_episodes: 1000,
            eval_seed: 1,
            paths: Paths::under(&Paths::default_root()),
        }
    }
}

fn read_train(s: &Section, prefix: &str, c: &mut TrainConfig) -> Result<(), ConfigError> {
    s.read(&format!("{prefix}epochs"), &mut c.epochs)?;
    s.read(&format!("{prefix}batch_size"), &mut c.batch_size)?;
    s.read(&format!("{prefix}learning_rate"), &mut c.learning_rate)?;
    s.read(&format!("{prefix}clip_norm"), &mut c.clip_norm)?;
    if c.batch_size < 2 {
        return Err(s.invalid(&format!("{prefix}batch_size"), c.batch_size, "must be at least 2"));
    }
    if !(c.learning_rate > 0.0) {
        return Err(s.invalid(&format!("{prefix}learning_rate"), c.learning_rate, "must be positive"));
    }
    Ok(())
}

fn train_pairs(prefix: &str, c: &TrainConfig) -> Vec<(String, String)> {
    vec![
        (format!("{prefix}epochs"), c.epochs.to_string()),
        (format!("{prefix}batch_size"), c.batch_size.to_string()),
        (format!("{prefix}learning_rate"), c.learning_rate.to_string()),
        (format!("{prefix}clip_norm"), c.clip_norm.to_string()),
    ]
}

const TRAIN_KEYS: [&str; 4] = ["epochs", "batch_size", "learning_rate", "clip_norm"];

fn prefixed(prefix: &str) -> Vec<String> {
    TRAIN_KEYS.iter().map(|k| format!("{prefix}{k}")).collect()
}

fn only(s: &Section, keys: &[String]) -> Result<(), ConfigError> {
    let keys: Vec<&str> = keys.iter().map(String::as_str).collect();
    s.only(&keys, &[])
}

fn optional_positive(s: &Section, key: &str) -> Result<Option<usize>, ConfigError> {
    match s.raw(key) {
        None => Ok(None),
        Some(_) => {
            let v: usize = s.require(key)?;
            if v == 0 {
                return Err(s.invalid(key, v, "must be at least 1"));
            }
            Ok(Some(v))
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_file(&ConfigFile::parse(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_file(&ConfigFile::load(path)?)
    }

    pub fn from_file(f: &ConfigFile) -> Result<Self, ConfigError> {
        const SECTIONS: [&str; 11] =
            ["", "gen", "task", "model", "encoder", "env_agent", "inverse", "topic", "a2c", "eval", "paths"];
        if let Some(name) = f.sections.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
            return Err(ConfigError::Unknown(format!("[{name}]")));
        }
        let mut c = RunConfig::default();

        let root = f.section("");
        root.only(&["seed"], &[])?;
        root.read("seed", &mut c.seed)?;

        c.gen = GenConfig::from_section(&f.section("gen"), &[])?;

        let task = f.section("task");
        task.only(&["horizon", "goal_type"], &[])?;
        task.read("horizon", &mut c.task.horizon)?;
        task.read("goal_type", &mut c.task.goal_type)?;
        if c.task.horizon == 0 {
            return Err(task.invalid("horizon", 0, "must be at least 1"));
        }

        let model = f.section("model");
        model.only(&["kind", "clusters", "topk"], &[])?;
        model.read("kind", &mut c.model)?;
        c.clusters = optional_positive(&model, "clusters")?;
        c.topk = optional_positive(&model, "topk")?;

        let enc = f.section("encoder");
        enc.only(&["hash_dim", "dim", "init_scale"], &[])?;
        enc.read("hash_dim", &mut c.encoder.hash_dim)?;
        enc.read("dim", &mut c.encoder.dim)?;
        enc.read("init_scale", &mut c.encoder.init_scale)?;
        if c.encoder.hash_dim == 0 || c.encoder.dim == 0 {
            return Err(enc.invalid("dim", c.encoder.dim, "dimensions must be at least 1"));
        }
        c.env_agent.encoder = c.encoder;

        let env = f.section("env_agent");
        let mut keys = prefixed("speech_");
        keys.extend(prefixed("actions_"));
        keys.push("max_negatives".into());
        only(&env, &keys)?;
        read_train(&env, "speech_", &mut c.env_agent.speech)?;
        read_train(&env, "actions_", &mut c.env_agent.actions)?;
        env.read("max_negatives", &mut c.env_agent.max_negatives)?;

        let inv = f.section("inverse");
        only(&inv, &prefixed(""))?;
        read_train(&inv, "", &mut c.inverse)?;

        let topic = f.section("topic");
        let mut keys = prefixed("");
        keys.extend(["hidden", "init_scale", "logit_scale"].map(String::from));
        only(&topic, &keys)?;
        topic.read("hidden", &mut c.topic.hidden)?;
        topic.read("init_scale", &mut c.topic.init_scale)?;
        topic.read("logit_scale", &mut c.topic.logit_scale)?;
        read_train(&topic, "", &mut c.topic.utterance_model)?;

        let base = A2CConfig::for_horizon(c.task.horizon);
        c.a2c = A2CConfig::from_section(&f.section("a2c"), base)?;
        if f.section("a2c").raw("horizon").is_some() && c.a2c.horizon != c.task.horizon {
            return Err(f.section("a2c").invalid("horizon", c.a2c.horizon, "must equal task.horizon"));
        }
        c.a2c.horizon = c.task.horizon;
        c.a2c.goal_type = c.task.goal_type;

        let ev = f.section("eval");
        ev.only(&["episodes", "seed"], &[])?;
        ev.read("episodes", &mut c.eval_episodes)?;
        ev.read("seed", &mut c.eval_seed)?;
        if c.eval_episodes == 0 {
            return Err(ev.invalid("episodes", 0, "must be at least 1"));
        }

        let paths = f.section("paths");
        paths.only(&["data", "corpus", "checkpoints", "reports", "metrics"], &[])?;
        if let Some(d) = paths.raw("data") {
            c.paths = Paths::under(Path::new(d));
        }
        for (key, slot) in [
            ("corpus", &mut c.paths.corpus),
            ("checkpoints", &mut c.paths.checkpoints),
            ("reports", &mut c.paths.reports),
            ("metrics", &mut c.paths.metrics),
        ] {
            if let Some(p) = paths.raw(key) {
                *slot = PathBuf::from(p);
            }
        }
        Ok(c)
    }

    /// Fails with the missing key when the model kind needs a
    /// hyperparameter that is not set.
    pub fn check_model(&self) -> Result<(), ConfigError> {
        match self.model {
            ModelKind::Topic if self.clusters.is_none() => Err(ConfigError::Missing("model.clusters".into())),
            ModelKind::TopK | ModelKind::TopKBi if self.topk.is_none() => Err(ConfigError::Missing("model.topk".into())),
            _ => Ok(()),
        }
    }

    pub fn set_horizon(&mut self, n: usize) {
        self.task.horizon = n;
        self.a2c.horizon = n;
        self.a2c.batch_episodes = A2CConfig::for_horizon(n).batch_episodes;
    }

    pub fn set_goal_type(&mut self, g: GoalType) {
        self.task.goal_type = g;
        self.a2c.goal_type = g;
    }

    /// The whole configuration in the grammar accepted by [`RunConfig::parse`].
    pub fn render(&self) -> String {
        let mut out = format!("seed = {}\n\n", self.seed);
        let gen = self.gen.pairs();
        out += &render_section("gen", &gen);
        out += "\n";
        out += &render_section(
            "task",
            &[("horizon", self.task.horizon.to_string()), ("goal_type", self.task.goal_type.to_string())],
        );
        out += "\n";
        let mut model = vec![("kind", self.model.to_string())];
        if let Some(c) = self.clusters {
            model.push(("clusters", c.to_string()));
        }
        if let Some(k) = self.topk {
            model.push(("topk", k.to_string()));
        }
        out += &render_section("model", &model);
        out += "\n";
        out += &render_section(
            "encoder",
            &[
                ("hash_dim", self.encoder.hash_dim.to_string()),
                ("dim", self.encoder.dim.to_string()),
                ("init_scale", self.encoder.init_scale.to_string()),
            ],
        );
        out += "\n";
        let mut env = train_pairs("speech_", &self.env_agent.speech);
        env.extend(train_pairs("actions_", &self.env_agent.actions));
        env.push(("max_negatives".into(), self.env_agent.max_negatives.to_string()));
        out += &render_owned("env_agent", &env);
        out += "\n";
        out += &render_owned("inverse", &train_pairs("", &self.inverse));
        out += "\n";
        let mut topic = vec![
            ("hidden".to_string(), self.topic.hidden.to_string()),
            ("init_scale".to_string(), self.topic.init_scale.to_string()),
            ("logit_scale".to_string(), self.topic.logit_scale.to_string()),
        ];
        topic.extend(train_pairs("", &self.topic.utterance_model));
        out += &render_owned("topic", &topic);
        out += "\n";
        let a2c: Vec<_> = self.a2c.pairs().into_iter().filter(|(k, _)| *k != "horizon" && *k != "goal_type").collect();
        out += &render_section("a2c", &a2c);
        out += "\n";
        out += &render_section(
            "eval",
            &[("episodes", self.eval_episodes.to_string()), ("seed", self.eval_seed.to_string())],
        );
        out += "\n";
        out += &render_section(
            "paths",
            &[
                ("corpus", self.paths.corpus.display().to_string()),
                ("checkpoints", self.paths.checkpoints.display().to_string()),
                ("reports", self.paths.reports.display().to_string()),
                ("metrics", self.paths.metrics.display().to_string()),
            ],
        );
        out
    }

    /// Name under which an RL checkpoint of this configuration is stored.
    pub fn rl_tag(&self) -> String {
        let size = match self.model {
            ModelKind::Topic => format!("-c{}", self.clusters.unwrap_or(0)),
            ModelKind::TopK | ModelKind::TopKBi => format!("-k{}", self.topk.unwrap_or(0)),
            _ => String::new(),
        };
        format!("{}{size}-n{}-{}", self.model, self.task.horizon, self.task.goal_type)
    }

    /// Hyperparameters recorded in a report's config stanza.
    pub fn stanza(&self) -> Vec<(String, String)> {
        let mut v = vec![
            ("model".to_string(), self.model.to_string()),
            ("horizon".to_string(), self.task.horizon.to_string()),
            ("goal_type".to_string(), self.task.goal_type.to_string()),
            ("seed".to_string(), self.seed.to_string()),
        ];
        if let Some(c) = self.clusters {
            v.push(("clusters".into(), c.to_string()));
        }
        if let Some(k) = self.topk {
            v.push(("topk".into(), k.to_string()));
        }
        if self.model.is_rl() {
            v.push(("a2c.max_updates".into(), self.a2c.max_updates.to_string()));
        }
        v
    }
}

fn render_owned(name: &str, pairs: &[(String, String)]) -> String {
    let refs: Vec<(&str, String)> = pairs.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
    render_section(name, &refs)
}

/// RNG stream ids for each pipeline stage under the run seed.
mod streams {
    pub const ENV_AGENT: u64 = 100;
    pub const INVERSE: u64 = 101;
    pub const INVERSE_NOGOAL: u64 = 102;
    pub const TOPICS: u64 = 103;
    pub const TOPK_HEAD: u64 = 104;
    pub const RL: u64 = 105;
}

pub fn train_env_agent(corpus: &Corpus, cfg: &RunConfig) -> Result<EnvironmentAgent, TaskError> {
    let train = corpus.split(Split::Train);
    let mut rng = stream(cfg.seed, &[streams::ENV_AGENT]);
    Ok(EnvironmentAgent::train(&train, corpus.env_utterances.clone(), &cfg.env_agent, &mut rng)?.0)
}

pub fn train_inverse(corpus: &Corpus, cfg: &RunConfig, goal_conditioned: bool) -> Result<InverseModel, TaskError> {
    let data = build_inverse_dataset(&corpus.split(Split::Train))?;
    let id = if goal_conditioned { streams::INVERSE } else { streams::INVERSE_NOGOAL };
    let mut rng = stream(cfg.seed, &[id]);
    let (m, _) = InverseModel::train(
        &data,
        corpus.player_utterances.clone(),
        goal_conditioned,
        &cfg.encoder,
        &cfg.inverse,
        &mut rng,
    )?;
    Ok(m)
}

pub fn fit_topics(corpus: &Corpus, inverse: &InverseModel, cfg: &RunConfig) -> Result<TopicAgent, TaskError> {
    let clusters = cfg.clusters.ok_or_else(|| ConfigError::Missing("model.clusters".into()))?;
    let data = build_inverse_dataset(&corpus.split(Split::Train))?;
    let topic = TopicConfig { clusters, ..cfg.topic };
    let mut rng = stream(cfg.seed, &[streams::TOPICS, clusters as u64]);
    Ok(pretrain_topic_components(inverse, &data, &topic, &mut rng)?.0)
}

pub fn new_topk(inverse: &InverseModel, cfg: &RunConfig) -> Result<TopKAgent, TaskError> {
    let k = cfg.topk.ok_or_else(|| ConfigError::Missing("model.topk".into()))?;
    let variant = if cfg.model == ModelKind::TopKBi { TopKVariant::Linear } else { TopKVariant::Attention };
    let mut rng = stream(cfg.seed, &[streams::TOPK_HEAD, k as u64]);
    Ok(TopKAgent::new(inverse.clone(), k, variant, &mut rng)?)
}

/// A2C on the training split's episodes.
pub fn train_rl<A: RlAgent>(
    agent: &mut A,
    env: &dyn EnvAgent,
    corpus: &Corpus,
    cfg: &RunConfig,
    metrics: Option<&mut dyn std::io::Write>,
) -> Result<Vec<TrainStats>, RlError> {
    let sampler = EpisodeSampler::new(corpus.split(Split::Train).into_iter().cloned(), cfg.task.goal_type)?;
    let seed = crate::rng::derive_seed(cfg.seed, &[streams::RL, cfg.task.horizon as u64]);
    crate::rl::train(agent, env, &sampler, &cfg.a2c, seed, metrics)
}

/// Fixed evaluation starts for a split under the run's goal type.
pub fn eval_starts(corpus: &Corpus, split: Split, cfg: &RunConfig) -> Result<Vec<EpisodeStart>, EvalError> {
    episode_starts(&corpus.split(split), cfg.task.goal_type, cfg.eval_episodes, cfg.eval_seed)
}

struct Borrowed<'a, P>(&'a P);

impl<P: PlayerPolicy> PlayerPolicy for Borrowed<'_, P> {
    fn utter(&self, ctx: &crate::task::PlayerContext<'_>, rng: &mut dyn rand::RngCore) -> Result<String, TaskError> {
        self.0.utter(ctx, rng)
    }
}

/// A loaded or freshly built player of any kind.
pub enum Player {
    Random(RandomUtterance),
    Inverse(InverseModel),
    Topic(TopicAgent),
    TopK(TopKAgent),
}

impl Player {
    pub fn policy(&self) -> Box<dyn PlayerPolicy + '_> {
        match self {
            Player::Random(p) => Box::new(Borrowed(p)),
            Player::Inverse(p) => Box::new(Borrowed(p)),
            Player::Topic(a) => Box::new(RlPolicy { agent: a, mode: ActMode::Greedy }),
            Player::TopK(a) => Box::new(RlPolicy { agent: a, mode: ActMode::Greedy }),
        }
    }

    pub fn frozen_checksum(&self) -> Option<u64> {
        match self {
            Player::Topic(a) => Some(a.frozen_checksum()),
            Player::TopK(a) => Some(a.frozen_checksum()),
            Player::Inverse(m) => Some(m.checksum()),
            Player::Random(_) => None,
        }
    }
}

/// Greedy evaluation with the achievability split for RL agents.
pub fn evaluate(
    player: &Player,
    env: &dyn EnvAgent,
    starts: &[EpisodeStart],
    split: Split,
    cfg: &RunConfig,
) -> Result<(EvalReport, Vec<crate::task::EpisodeLog>), EvalError> {
    let spec = EvalSpec {
        model: cfg.model.to_string(),
        split: split.to_string(),
        goal_type: cfg.task.goal_type,
        horizon: cfg.task.horizon,
        seed: cfg.eval_seed,
    };
    let policy = player.policy();
    let (mut report, logs) = evaluate_policy(policy.as_ref(), env, starts, &spec)?;
    report.achievability = match player {
        Player::Topic(a) => Some(achievability_split(agent_space(a), env, starts, &logs, cfg.eval_seed)?),
        Player::TopK(a) => Some(achievability_split(agent_space(a), env, starts, &logs, cfg.eval_seed)?),
        _ => None,
    };
    report.config = cfg.stanza().into_iter().collect();
    Ok((report, logs))
}

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use goalworld::agents::{EnvironmentAgent, InverseModel, RandomUtterance, TopKAgent, TopicAgent};
use goalworld::eval::{render_report, render_reports, EvalReport};
use goalworld::pipeline::{self, ModelKind, Paths, Player, RunConfig};
use goalworld::rl::RlAgent;
use goalworld::task::{generate_synthetic_corpus, Corpus, GoalType, Split, Speaker};
use goalworld::world::{apply_action, load_world_file, validate_world};

use crate::fail::Fail;
use crate::{Common, GoalTypeArg, ModelArgs};

fn parse_list(flag: &str, raw: &str) -> Result<Vec<usize>, Fail> {
    let values: Result<Vec<usize>, _> = raw.split(',').map(|s| s.trim().parse::<usize>()).collect();
    match values {
        Ok(v) if !v.is_empty() && v.iter().all(|&x| x > 0) => Ok(v),
        _ => Err(Fail::Usage(format!("--{flag} expects positive integers, got '{raw}'"))),
    }
}

fn parse_one(flag: &str, raw: &str) -> Result<usize, Fail> {
    match parse_list(flag, raw)?.as_slice() {
        [x] => Ok(*x),
        _ => Err(Fail::Usage(format!("--{flag} takes a single value here, got '{raw}'"))),
    }
}

/// Config file, then command-line overrides.
pub fn resolve(common: &Common, model: Option<&ModelArgs>) -> Result<RunConfig, Fail> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(out) = &common.out {
        cfg.paths = Paths::under(out);
    }
    if let Some(m) = model {
        if let Some(kind) = &m.model {
            cfg.model = kind.parse().map_err(Fail::Usage)?;
        }
        if let Some(c) = &m.clusters {
            cfg.clusters = Some(parse_one("clusters", c)?);
        }
        if let Some(k) = &m.topk {
            cfg.topk = Some(parse_one("topk", k)?);
        }
        if let Some(n) = m.horizon {
            if n == 0 {
                return Err(Fail::Usage("--horizon must be at least 1".into()));
            }
            cfg.set_horizon(n);
        }
        if let Some(g) = m.goal_type {
            cfg.set_goal_type(match g {
                GoalTypeArg::Act => GoalType::GameAct,
                GoalTypeArg::Emote => GoalType::Emote,
            });
        }
        if let Some(s) = m.steps {
            cfg.a2c.max_updates = s;
        }
    }
    Ok(cfg)
}

/// Prints the configuration when asked; true means the command is done.
fn printed(common: &Common, cfg: &RunConfig) -> bool {
    if common.print_config {
        print!("{}", cfg.render());
    }
    common.print_config
}

pub fn load_corpus(cfg: &RunConfig) -> Result<Corpus, Fail> {
    let dir = &cfg.paths.corpus;
    if !dir.join("corpus.json").exists() {
        return Err(Fail::Data(format!("no corpus at {}; run `goalworld gen` first", dir.display())));
    }
    Ok(Corpus::load(dir)?)
}

fn require_file(path: &Path, hint: &str) -> Result<(), Fail> {
    if path.exists() {
        Ok(())
    } else {
        Err(Fail::Data(format!("missing {}; run `goalworld {hint}` first", path.display())))
    }
}

pub fn load_env_agent(cfg: &RunConfig) -> Result<EnvironmentAgent, Fail> {
    let p = cfg.paths.env_agent();
    require_file(&p, "train-inverse")?;
    Ok(EnvironmentAgent::load(&p)?)
}

fn load_inverse(cfg: &RunConfig, goal_conditioned: bool) -> Result<InverseModel, Fail> {
    let p = cfg.paths.inverse(goal_conditioned);
    require_file(&p, "train-inverse")?;
    Ok(InverseModel::load(&p)?)
}

pub fn gen(common: &Common) -> Result<(), Fail> {
    let cfg = resolve(common, None)?;
    if printed(common, &cfg) {
        return Ok(());
    }
    let corpus = generate_synthetic_corpus(&cfg.gen, cfg.seed)?;
    corpus.save(&cfg.paths.corpus)?;
    println!(
        "corpus: {} worlds, {} logs, {} player utterances -> {}",
        corpus.worlds.len(),
        corpus.logs.len(),
        corpus.player_utterances.len(),
        cfg.paths.corpus.display()
    );
    Ok(())
}

pub fn train_inverse(common: &Common) -> Result<(), Fail> {
    let cfg = resolve(common, None)?;
    if printed(common, &cfg) {
        return Ok(());
    }
    let corpus = load_corpus(&cfg)?;
    fs::create_dir_all(&cfg.paths.checkpoints)?;
    let env = pipeline::train_env_agent(&corpus, &cfg)?;
    env.save(&cfg.paths.env_agent())?;
    println!("env agent: checksum {:016x} -> {}", env.checksum(), cfg.paths.env_agent().display());
    for goal_conditioned in [true, false] {
        let m = pipeline::train_inverse(&corpus, &cfg, goal_conditioned)?;
        let path = cfg.paths.inverse(goal_conditioned);
        m.save(&path)?;
        println!("inverse (goal={goal_conditioned}): checksum {:016x} -> {}", m.checksum(), path.display());
    }
    Ok(())
}

fn topic_pretrained(cfg: &RunConfig, corpus: &Corpus) -> Result<TopicAgent, Fail> {
    let clusters = cfg.clusters.expect("checked by check_model");
    let path = cfg.paths.topic_pretrained(clusters);
    if path.exists() {
        return Ok(TopicAgent::load(&path)?);
    }
    let inverse = load_inverse(cfg, true)?;
    let agent = pipeline::fit_topics(corpus, &inverse, cfg)?;
    fs::create_dir_all(&cfg.paths.checkpoints)?;
    agent.save(&path)?;
    Ok(agent)
}

pub fn fit_topics(common: &Common, model: &ModelArgs) -> Result<(), Fail> {
    let mut cfg = resolve(common, Some(model))?;
    cfg.model = ModelKind::Topic;
    if printed(common, &cfg) {
        return Ok(());
    }
    cfg.check_model()?;
    let corpus = load_corpus(&cfg)?;
    let inverse = load_inverse(&cfg, true)?;
    let agent = pipeline::fit_topics(&corpus, &inverse, &cfg)?;
    fs::create_dir_all(&cfg.paths.checkpoints)?;
    let path = cfg.paths.topic_pretrained(agent.clusters());
    agent.save(&path)?;
    println!(
        "topics: C={} inertia {:.4} frozen checksum {:016x} -> {}",
        agent.clusters(),
        agent.kmeans.inertia,
        agent.frozen_checksum(),
        path.display()
    );
    Ok(())
}

fn train_and_save<A: RlAgent>(
    agent: &mut A,
    cfg: &RunConfig,
    corpus: &Corpus,
    save: impl Fn(&A, &Path) -> Result<(), goalworld::agents::AgentError>,
) -> Result<PathBuf, Fail> {
    let env = load_env_agent(cfg)?;
    let env_before = env.checksum();
    let frozen_before = agent.frozen_checksum();
    fs::create_dir_all(&cfg.paths.metrics)?;
    let tag = cfg.rl_tag();
    let metrics_path = cfg.paths.metrics.join(format!("{tag}.jsonl"));
    let mut metrics = BufWriter::new(File::create(&metrics_path)?);
    let stats = pipeline::train_rl(agent, &env, corpus, cfg, Some(&mut metrics))?;
    drop(metrics);
    let frozen_after = agent.frozen_checksum();
    if frozen_after != frozen_before || env.checksum() != env_before {
        return Err(Fail::Runtime("frozen parameters changed during RL training".into()));
    }
    let path = cfg.paths.rl_checkpoint(&tag);
    save(agent, &path)?;
    let tail = &stats[stats.len().saturating_sub(10)..];
    let recent = if tail.is_empty() { 0.0 } else { tail.iter().map(|s| s.mean_reward).sum::<f64>() / tail.len() as f64 };
    println!(
        "{tag}: {} updates, recent batch reward {recent:.3}, frozen checksum {frozen_after:016x} -> {}",
        stats.len(),
        path.display()
    );
    Ok(path)
}

fn train_rl_cfg(cfg: &RunConfig, corpus: &Corpus) -> Result<PathBuf, Fail> {
    fs::create_dir_all(&cfg.paths.checkpoints)?;
    match cfg.model {
        ModelKind::Topic => {
            let mut agent = topic_pretrained(cfg, corpus)?;
            train_and_save(&mut agent, cfg, corpus, |a, p| a.save(p))
        }
        ModelKind::TopK | ModelKind::TopKBi => {
            let inverse = load_inverse(cfg, true)?;
            let mut agent = pipeline::new_topk(&inverse, cfg)?;
            train_and_save(&mut agent, cfg, corpus, |a, p| a.save(p))
        }
        other => Err(Fail::Usage(format!("train-rl needs --model topic, topk or topkbi, got {other}"))),
    }
}

pub fn train_rl(common: &Common, model: &ModelArgs) -> Result<(), Fail> {
    let cfg = resolve(common, Some(model))?;
    if printed(common, &cfg) {
        return Ok(());
    }
    if !cfg.model.is_rl() {
        return Err(Fail::Usage(format!("train-rl needs --model topic, topk or topkbi, got {}", cfg.model)));
    }
    cfg.check_model()?;
    let corpus = load_corpus(&cfg)?;
    train_rl_cfg(&cfg, &corpus)?;
    Ok(())
}

fn load_player(cfg: &RunConfig, corpus: &Corpus, checkpoint: Option<&Path>) -> Result<Player, Fail> {
    Ok(match cfg.model {
        ModelKind::Random => Player::Random(RandomUtterance::new(corpus.player_utterances.clone())?),
        ModelKind::Inverse => Player::Inverse(load_inverse(cfg, true)?),
        ModelKind::InverseNoGoal => Player::Inverse(load_inverse(cfg, false)?),
        kind => {
            let path = match checkpoint {
                Some(p) => p.to_path_buf(),
                None => {
                    cfg.check_model()?;
                    cfg.paths.rl_checkpoint(&cfg.rl_tag())
                }
            };
            require_file(&path, "train-rl")?;
            if kind == ModelKind::Topic {
                Player::Topic(TopicAgent::load(&path)?)
            } else {
                Player::TopK(TopKAgent::load(&path)?)
            }
        }
    })
}

fn report_name(cfg: &RunConfig, split: Split, checkpoint: Option<&Path>) -> String {
    let base = if cfg.model.is_rl() { cfg.rl_tag() } else { format!("{}-n{}-{}", cfg.model, cfg.task.horizon, cfg.task.goal_type) };
    match checkpoint.and_then(|p| p.file_stem()) {
        Some(stem) => format!("{base}-from-{}-{split}.json", stem.to_string_lossy()),
        None => format!("{base}-{split}.json"),
    }
}

fn eval_cfg(cfg: &RunConfig, corpus: &Corpus, split: Split, checkpoint: Option<&Path>) -> Result<(EvalReport, PathBuf), Fail> {
    let env = load_env_agent(cfg)?;
    let player = load_player(cfg, corpus, checkpoint)?;
    let starts = pipeline::eval_starts(corpus, split, cfg)?;
    let (mut report, _) = pipeline::evaluate(&player, &env, &starts, split, cfg)?;
    if let Some(p) = checkpoint {
        report.config.insert("checkpoint".into(), p.display().to_string());
    }
    fs::create_dir_all(&cfg.paths.reports)?;
    let path = cfg.paths.reports.join(report_name(cfg, split, checkpoint));
    fs::write(&path, report.to_json())?;
    Ok((report, path))
}

pub fn eval(common: &Common, model: &ModelArgs, split: Split, checkpoint: Option<&Path>) -> Result<(), Fail> {
    let cfg = resolve(common, Some(model))?;
    if printed(common, &cfg) {
        return Ok(());
    }
    let corpus = load_corpus(&cfg)?;
    let (report, path) = eval_cfg(&cfg, &corpus, split, checkpoint)?;
    print!("{}", render_report(&report));
    println!("report -> {}", path.display());
    Ok(())
}

pub fn sweep(common: &Common, model: &ModelArgs, split: Split) -> Result<(), Fail> {
    let mut single = model.clone();
    single.clusters = None;
    single.topk = None;
    let base = resolve(common, Some(&single))?;
    let (flag, raw) = match base.model {
        ModelKind::Topic => ("clusters", model.clusters.as_deref()),
        ModelKind::TopK | ModelKind::TopKBi => ("topk", model.topk.as_deref()),
        other => return Err(Fail::Usage(format!("sweep needs --model topic, topk or topkbi, got {other}"))),
    };
    let values = match raw {
        Some(r) => parse_list(flag, r)?,
        None => match (flag, base.clusters, base.topk) {
            ("clusters", Some(c), _) => vec![c],
            ("topk", _, Some(k)) => vec![k],
            _ => return Err(Fail::Config(format!("missing config key 'model.{flag}'"))),
        },
    };
    if printed(common, &base) {
        return Ok(());
    }
    let corpus = load_corpus(&base)?;
    let mut reports = Vec::new();
    for v in values {
        let mut cfg = base.clone();
        if flag == "clusters" {
            cfg.clusters = Some(v);
        } else {
            cfg.topk = Some(v);
        }
        train_rl_cfg(&cfg, &corpus)?;
        let (report, path) = eval_cfg(&cfg, &corpus, split, None)?;
        println!("report -> {}", path.display());
        reports.push(report);
    }
    print!("{}", render_reports(&reports));
    Ok(())
}

pub fn report(paths: &[PathBuf]) -> Result<(), Fail> {
    let mut reports = Vec::new();
    for p in paths {
        let text = fs::read_to_string(p).map_err(|e| Fail::Data(format!("{}: {e}", p.display())))?;
        reports.push(EvalReport::from_json(&text).map_err(|e| Fail::Data(format!("{}: {e}", p.display())))?);
    }
    print!("{}", render_reports(&reports));
    for r in &reports {
        println!();
        print!("{}", render_report(r));
    }
    Ok(())
}

/// Worlds must validate, every logged env action must be legal when
/// replayed, and seen and unseen worlds must not overlap.
pub fn validate(common: &Common, world: Option<&Path>) -> Result<(), Fail> {
    let cfg = resolve(common, None)?;
    if printed(common, &cfg) {
        return Ok(());
    }
    if let Some(path) = world {
        let w = load_world_file(path)?;
        let report = validate_world(&w);
        if !report.is_empty() {
            return Err(Fail::Data(format!("{}: {:?}", path.display(), report.violations)));
        }
        println!("{}: ok ({} entities)", path.display(), w.len());
        return Ok(());
    }
    let corpus = load_corpus(&cfg)?;
    let mut problems = Vec::new();
    for rec in &corpus.worlds {
        let report = validate_world(&rec.world);
        if !report.is_empty() {
            problems.push(format!("world {}: {:?}", rec.id, report.violations));
        }
    }
    for log in &corpus.logs {
        let mut w = log.scenario.world.clone();
        for t in log.turns.iter().filter(|t| t.speaker == Speaker::Env) {
            if let Some(a) = &t.action {
                match apply_action(&w, log.scenario.env_char.id, a) {
                    Ok((next, _)) => w = next,
                    Err(e) => {
                        problems.push(format!("log {}: {e}", log.id));
                        break;
                    }
                }
            }
        }
    }
    let m = &corpus.manifest;
    if m.seen_worlds.iter().any(|w| m.unseen_worlds.contains(w)) {
        problems.push("a world is listed as both seen and unseen".into());
    }
    if !problems.is_empty() {
        for p in &problems {
            eprintln!("{p}");
        }
        return Err(Fail::Data(format!("{} problems in {}", problems.len(), cfg.paths.corpus.display())));
    }
    println!("corpus ok: {} worlds, {} logs", corpus.worlds.len(), corpus.logs.len());
    Ok(())
}

pub fn load_player_for(cfg: &RunConfig, corpus: &Corpus) -> Result<Player, Fail> {
    load_player(cfg, corpus, None)
}

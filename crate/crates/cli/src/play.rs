use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::PathBuf;

use goalworld::agents::NO_ACTION;
use goalworld::pipeline::{self, ModelKind, Player};
use goalworld::rng::stream;
use goalworld::task::{
    apply_env_action, env_step, run_episode, EnvAgent, EpisodeLog, EpisodeState, ScriptedEnv, Speaker,
    Split, TaskConfig, TurnEvent,
};
use goalworld::world::{enumerate_admissible, render_action_text, GameAction};

use crate::commands::{load_corpus, load_env_agent, resolve};
use crate::fail::Fail;
use crate::{Common, EnvKind, ModelArgs, Side};

pub struct PlayArgs {
    pub side: Side,
    pub split: Split,
    pub episode: usize,
    pub env: EnvKind,
    pub input: Option<PathBuf>,
    pub log: Option<PathBuf>,
}

struct Lines {
    inner: Box<dyn BufRead>,
}

impl Lines {
    /// Next line without its newline; `None` at end of input.
    fn next(&mut self) -> Result<Option<String>, Fail> {
        let mut s = String::new();
        if self.inner.read_line(&mut s)? == 0 {
            return Ok(None);
        }
        Ok(Some(s.trim_end_matches(['\n', '\r']).to_string()))
    }
}

fn header(out: &mut impl Write, state: &EpisodeState, side: Speaker) -> io::Result<()> {
    let sc = &state.scenario;
    let me = sc.character(side);
    writeln!(out, "setting: {} - {}", sc.setting_name, sc.setting_desc)?;
    writeln!(out, "you are {}: {}", me.name, me.persona)?;
    writeln!(out, "talking to {}", sc.character(side.other()).name)?;
    if side == Speaker::Player {
        let goal = render_action_text(&state.goal.target, &state.world).unwrap_or_default();
        writeln!(out, "goal: make {} {goal}", sc.env_char.name)?;
    }
    writeln!(out, "turns: {}", state.horizon)
}

fn show_turn(out: &mut impl Write, state: &EpisodeState, t: &TurnEvent) -> io::Result<()> {
    let name = &state.scenario.character(t.speaker).name;
    writeln!(out, "{name}: {}", t.utterance)?;
    if let Some(a) = &t.action {
        writeln!(out, "  * {name} does: {}", render_action_text(a, &state.world).unwrap_or_default())?;
    }
    Ok(())
}

fn finish(out: &mut impl Write, state: &EpisodeState) -> io::Result<()> {
    let verdict = if state.reward == 1 { "goal achieved" } else { "goal not achieved" };
    writeln!(out, "{verdict} after {} turn(s)", state.turns_used)
}

fn env_agent(cfg: &goalworld::pipeline::RunConfig, kind: EnvKind) -> Result<Box<dyn EnvAgent>, Fail> {
    Ok(match kind {
        EnvKind::Learned => Box::new(load_env_agent(cfg)?),
        EnvKind::Scripted => Box::new(ScriptedEnv::default()),
    })
}

/// Human speaks for the player; each input line is one utterance.
fn as_player(
    state: &mut EpisodeState,
    env: &dyn EnvAgent,
    lines: &mut Lines,
    seed: u64,
    out: &mut impl Write,
) -> Result<bool, Fail> {
    let mut rng = stream(seed, &[0]);
    while !state.done {
        write!(out, "> ")?;
        out.flush()?;
        let Some(u) = lines.next()? else { return Ok(true) };
        let (next, event, _, _) = env_step(state, &u, env, &mut rng)?;
        show_turn(out, &next, &next.history[next.history.len() - 2])?;
        show_turn(out, state, &event)?;
        *state = next;
    }
    Ok(false)
}

/// Human answers as the environment: an utterance line, then a menu index.
fn as_env(
    state: &mut EpisodeState,
    player: &Player,
    lines: &mut Lines,
    seed: u64,
    out: &mut impl Write,
) -> Result<bool, Fail> {
    let policy = player.policy();
    let mut rng = stream(seed, &[0]);
    while !state.done {
        let u = policy.utter(&state.player_context(), &mut rng)?;
        let said = TurnEvent::player(u);
        show_turn(out, state, &said)?;
        state.history.push(said);
        write!(out, "say> ")?;
        out.flush()?;
        let Some(reply) = lines.next()? else {
            state.history.pop();
            return Ok(true);
        };
        let admissible: Vec<GameAction> = enumerate_admissible(&state.world, state.scenario.env_char.id);
        writeln!(out, "  0) {NO_ACTION}")?;
        for (i, a) in admissible.iter().enumerate() {
            writeln!(out, "  {}) {}", i + 1, render_action_text(a, &state.world).unwrap_or_default())?;
        }
        let action = loop {
            write!(out, "act> ")?;
            out.flush()?;
            let Some(line) = lines.next()? else {
                state.history.pop();
                return Ok(true);
            };
            match line.trim().parse::<usize>() {
                Ok(0) => break None,
                Ok(i) if i <= admissible.len() => break Some(admissible[i - 1].clone()),
                _ => writeln!(out, "pick a number from 0 to {}", admissible.len())?,
            }
        };
        let world_before = state.world.clone();
        apply_env_action(state, action.as_ref())?;
        let event = TurnEvent::env(reply, action);
        let shown = EpisodeState { world: world_before, ..state.clone() };
        show_turn(out, &shown, &event)?;
        state.history.push(event);
    }
    Ok(false)
}

pub fn play(common: &Common, model: &ModelArgs, args: PlayArgs) -> Result<(), Fail> {
    let mut cfg = resolve(common, Some(model))?;
    if common.print_config {
        print!("{}", cfg.render());
        return Ok(());
    }
    if model.model.is_none() && args.side != Side::Player {
        cfg.model = ModelKind::Inverse;
    }
    let corpus = load_corpus(&cfg)?;
    let starts = pipeline::eval_starts(&corpus, args.split, &cfg)?;
    let start = starts
        .get(args.episode)
        .ok_or_else(|| Fail::Usage(format!("--episode {} out of range (0..{})", args.episode, starts.len())))?;
    let mut state = EpisodeState::new(start.scenario.clone(), start.goal.clone(), cfg.task.horizon);
    let stdout = io::stdout();
    let mut out = stdout.lock();

    let log: EpisodeLog = match args.side {
        Side::Spectate => {
            let env = env_agent(&cfg, args.env)?;
            let player = crate::commands::load_player_for(&cfg, &corpus)?;
            header(&mut out, &state, Speaker::Player)?;
            let task = TaskConfig { horizon: cfg.task.horizon, goal_type: cfg.task.goal_type, seed: cfg.seed };
            let mut rng = stream(cfg.seed, &[0]);
            let mut log = run_episode(player.policy().as_ref(), env.as_ref(), &start.scenario, &start.goal, &task, &mut rng)?;
            let mut replay = state.clone();
            for pair in log.turns.chunks(2) {
                for t in pair {
                    show_turn(&mut out, &replay, t)?;
                }
                if let Some(a) = pair.get(1).and_then(|t| t.action.as_ref()) {
                    apply_env_action(&mut replay, Some(a))?;
                }
            }
            log.id = start.id.clone();
            log.world_id = start.world_id.clone();
            state.reward = log.reward;
            state.turns_used = log.turns_used;
            log
        }
        side => {
            let mut lines = Lines {
                inner: match &args.input {
                    Some(p) => Box::new(BufReader::new(File::open(p).map_err(|e| Fail::Data(format!("{}: {e}", p.display())))?)),
                    None => Box::new(BufReader::new(io::stdin())),
                },
            };
            let partial = if side == Side::Player {
                let env = env_agent(&cfg, args.env)?;
                header(&mut out, &state, Speaker::Player)?;
                as_player(&mut state, env.as_ref(), &mut lines, cfg.seed, &mut out)?
            } else {
                let player = crate::commands::load_player_for(&cfg, &corpus)?;
                header(&mut out, &state, Speaker::Env)?;
                as_env(&mut state, &player, &mut lines, cfg.seed, &mut out)?
            };
            let mut log = state.clone().into_log(start.id.clone(), start.world_id.clone());
            log.partial = partial;
            if partial {
                writeln!(out, "input ended; saving partial log")?;
            }
            log
        }
    };
    finish(&mut out, &state)?;

    let path = args.log.unwrap_or_else(|| cfg.paths.reports.parent().unwrap_or(&cfg.paths.reports).join("play.jsonl"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = OpenOptions::new().create(true).append(true).open(&path)?;
    let line = serde_json::to_string(&log).map_err(|e| Fail::Runtime(e.to_string()))?;
    writeln!(f, "{line}")?;
    writeln!(out, "log -> {}", path.display())?;
    Ok(())
}

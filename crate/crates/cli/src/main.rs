mod commands;
mod fail;
mod play;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fail::Fail;

#[derive(Parser)]
#[command(name = "goalworld", version, about = "Goal-oriented dialogue agents in a text-adventure world")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
pub struct Common {
    /// Run configuration file (key = value lines under [section] headers).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Data root; defaults to $GOALWORLD_DATA or ./goalworld-data.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    pub print_config: bool,
}

#[derive(Args, Clone, Default)]
pub struct ModelArgs {
    /// inverse, inverse-nogoal, topic, topk, topkbi or random.
    #[arg(long)]
    pub model: Option<String>,
    /// Topic count; `sweep` takes a comma-separated list.
    #[arg(long)]
    pub clusters: Option<String>,
    /// Candidate count; `sweep` takes a comma-separated list.
    #[arg(long)]
    pub topk: Option<String>,
    /// A2C updates.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, value_enum)]
    pub goal_type: Option<GoalTypeArg>,
    /// Turns per episode.
    #[arg(long)]
    pub horizon: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum GoalTypeArg {
    Act,
    Emote,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Train,
    Valid,
    #[value(name = "test_seen", alias = "test-seen")]
    TestSeen,
    #[value(name = "test_unseen", alias = "test-unseen")]
    TestUnseen,
}

impl SplitArg {
    pub fn split(self) -> goalworld::task::Split {
        use goalworld::task::Split;
        match self {
            SplitArg::Train => Split::Train,
            SplitArg::Valid => Split::Valid,
            SplitArg::TestSeen => Split::TestSeen,
            SplitArg::TestUnseen => Split::TestUnseen,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum Side {
    /// You speak for the player; the environment agent answers.
    Player,
    /// You answer as the environment and pick its actions.
    Env,
    /// Watch a model play against the environment agent.
    Spectate,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum EnvKind {
    Learned,
    Scripted,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus.
    Gen {
        #[command(flatten)]
        common: Common,
    },
    /// Train the environment agent and both inverse models.
    TrainInverse {
        #[command(flatten)]
        common: Common,
    },
    /// Cluster observation embeddings and fit the topic-conditioned scorer.
    FitTopics {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Train a topic or top-k policy with A2C.
    TrainRl {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Evaluate a model on a split and write its report.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "test_seen")]
        split: SplitArg,
        /// Evaluate this RL checkpoint instead of the one named by the config.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Fit, train and evaluate over a grid of cluster or candidate counts.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "test_seen")]
        split: SplitArg,
    },
    /// Render evaluation reports as text tables.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
    /// Play one episode interactively or watch a model play.
    Play {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "player")]
        side: Side,
        #[arg(long, value_enum, default_value = "test_seen")]
        split: SplitArg,
        /// Index into the split's evaluation episodes.
        #[arg(long, default_value_t = 0)]
        episode: usize,
        #[arg(long, value_enum, default_value = "learned")]
        env: EnvKind,
        /// Read input lines from this file instead of stdin.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Where to append the episode log (JSONL).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Check worlds and logs of the corpus, or a single world file.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        world: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), Fail> {
    match cli.command {
        Command::Gen { common } => commands::gen(&common),
        Command::TrainInverse { common } => commands::train_inverse(&common),
        Command::FitTopics { common, model } => commands::fit_topics(&common, &model),
        Command::TrainRl { common, model } => commands::train_rl(&common, &model),
        Command::Eval { common, model, split, checkpoint } => {
            commands::eval(&common, &model, split.split(), checkpoint.as_deref())
        }
        Command::Sweep { common, model, split } => commands::sweep(&common, &model, split.split()),
        Command::Report { reports } => commands::report(&reports),
        Command::Play { common, model, side, split, episode, env, input, log } => {
            play::play(&common, &model, play::PlayArgs { side, split: split.split(), episode, env, input, log })
        }
        Command::Validate { common, world } => commands::validate(&common, world.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return Fail::Usage(first.to_string()).report();
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}

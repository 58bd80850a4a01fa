use std::process::ExitCode;

use goalworld::agents::AgentError;
use goalworld::config::ConfigError;
use goalworld::eval::EvalError;
use goalworld::neural::NeuralError;
use goalworld::rl::RlError;
use goalworld::task::TaskError;
use goalworld::world::WorldError;

/// A failed command, classified by exit status.
#[derive(Debug)]
pub enum Fail {
    Usage(String),
    Config(String),
    Data(String),
    Runtime(String),
}

impl Fail {
    fn parts(&self) -> (&'static str, u8, &str) {
        match self {
            Fail::Usage(m) => ("usage", 2, m),
            Fail::Config(m) => ("config", 3, m),
            Fail::Data(m) => ("data", 4, m),
            Fail::Runtime(m) => ("runtime", 1, m),
        }
    }

    /// Prints `error kind=<kind> code=<n>: <message>` on one line.
    pub fn report(&self) -> ExitCode {
        let (kind, code, msg) = self.parts();
        let msg = msg.split_whitespace().collect::<Vec<_>>().join(" ");
        eprintln!("error kind={kind} code={code}: {msg}");
        ExitCode::from(code)
    }
}

impl From<ConfigError> for Fail {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io(io) => Fail::Data(format!("config file: {io}")),
            other => Fail::Config(other.to_string()),
        }
    }
}

impl From<TaskError> for Fail {
    fn from(e: TaskError) -> Self {
        match e {
            TaskError::Config(c) => c.into(),
            other => Fail::Data(other.to_string()),
        }
    }
}

impl From<AgentError> for Fail {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::Neural(NeuralError::Io(io)) => Fail::Data(format!("checkpoint: {io}")),
            AgentError::CorpusTooSmall { .. } | AgentError::EmptyCorpus | AgentError::EmptyDataset => {
                Fail::Data(e.to_string())
            }
            AgentError::Checkpoint(_)
            | AgentError::Neural(NeuralError::Checkpoint(_) | NeuralError::TooFewPoints { .. }) => {
                Fail::Data(e.to_string())
            }
            other => Fail::Runtime(other.to_string()),
        }
    }
}

impl From<EvalError> for Fail {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Task(t) => t.into(),
            EvalError::Agent(a) => a.into(),
            other => Fail::Data(other.to_string()),
        }
    }
}

impl From<RlError> for Fail {
    fn from(e: RlError) -> Self {
        match e {
            RlError::Task(t) => t.into(),
            RlError::Agent(a) => a.into(),
            other => Fail::Data(other.to_string()),
        }
    }
}

impl From<WorldError> for Fail {
    fn from(e: WorldError) -> Self {
        Fail::Data(e.to_string())
    }
}

impl From<std::io::Error> for Fail {
    fn from(e: std::io::Error) -> Self {
        Fail::Data(e.to_string())
    }
}

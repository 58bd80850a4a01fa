use rand::{Rng, RngCore};

use super::AgentError;
use crate::task::{PlayerContext, PlayerPolicy, TaskError};

/// Uniform draw from the candidate corpus, ignoring the context.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomUtterance {
    pub texts: Vec<String>,
}

impl RandomUtterance {
    pub fn new(texts: Vec<String>) -> Result<Self, AgentError> {
        if texts.is_empty() {
            return Err(AgentError::EmptyCorpus);
        }
        Ok(RandomUtterance { texts })
    }
}

impl PlayerPolicy for RandomUtterance {
    fn utter(&self, _ctx: &PlayerContext<'_>, rng: &mut dyn RngCore) -> Result<String, TaskError> {
        Ok(self.texts[rng.gen_range(0..self.texts.len())].clone())
    }
}

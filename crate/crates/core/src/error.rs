use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("agent `{agent}` failed: {source}")]
    Agent {
        agent: String,
        #[source]
        source: Box<Error>,
    },

    #[error("plugin error: {0}")]
    Plugin(String),

    #[error("plugin timed out after {0:.3} s")]
    Timeout(f64),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// Wraps `self` as a failure of the named agent.
    pub fn in_agent(self, agent: &str) -> Self {
        Error::Agent {
            agent: agent.to_string(),
            source: Box::new(self),
        }
    }
}

pub(crate) fn ensure_len(what: &str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::shape(format!(
            "{what}: expected length {expected}, got {got}"
        )));
    }
    Ok(())
}

pub(crate) fn ensure_finite(what: &str, v: &[f64]) -> Result<()> {
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::numeric(format!(
            "{what}: non-finite value at index {i}"
        )));
    }
    Ok(())
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter inequality does not hold; the message names it.
    #[error("invalid parameters: {0}")]
    Validation(String),

    #[error("demand {d} outside the operating range [0, {d_star}]")]
    Domain { d_star: f64, d: f64 },

    #[error("reduction n={n} exceeds demand d={d}")]
    ReductionTooLarge { d: f64, n: f64 },

    #[error("zero demand is unreachable on a semi-infinite operating zone")]
    UnreachableDemand,

    #[error("window w={w} must be smaller than the billing cycle tau={tau}")]
    Window { w: usize, tau: usize },

    #[error("instance too large for exact oracle: {states} states exceed budget {budget}")]
    TooLarge { states: u128, budget: u128 },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("timestamps must be sorted (event {index} starts before its predecessor)")]
    Unsorted { index: usize },

    #[error("refusing to overwrite {0} without the overwrite flag")]
    Exists(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

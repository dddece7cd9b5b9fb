use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("model failed validation: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("numerical invariant breached: {0}")]
    InvariantBreach(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    /// Prefixes the message with `ctx`, keeping the variant.
    pub fn context(self, ctx: &str) -> Self {
        match self {
            Error::InvalidArgument(m) => Error::InvalidArgument(format!("{ctx}: {m}")),
            Error::Precondition(m) => Error::Precondition(format!("{ctx}: {m}")),
            Error::Parse { location, message } => Error::Parse {
                location,
                message: format!("{ctx}: {message}"),
            },
            Error::Validation(v) => {
                Error::Validation(v.into_iter().map(|m| format!("{ctx}: {m}")).collect())
            }
            Error::InvariantBreach(m) => Error::InvariantBreach(format!("{ctx}: {m}")),
            io @ Error::Io { .. } => io,
        }
    }
}

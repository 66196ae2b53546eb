use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("frame {got} presented after frame {last}; frames must be strictly increasing")]
    FrameOrder { last: u32, got: u32 },

    #[error("track merging requires a static scene (sequence `{0}` is dynamic)")]
    DynamicScene(String),

    #[error("objective failed at params {params:?}: {message}")]
    Objective { params: Vec<f64>, message: String },

    #[error("no ground-truth boxes; average precision is undefined")]
    NoGroundTruth,

    #[error("sequence `{sequence}`, stage {stage}: {source}")]
    Sequence {
        sequence: String,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: msg.into(),
        }
    }

    /// True for failures caused by the numbers rather than by inputs or I/O.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerical(_) => true,
            Error::Sequence { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    /// Attaches the sequence and pipeline stage an error came from.
    pub fn in_sequence(self, sequence: impl Into<String>, stage: &'static str) -> Self {
        Error::Sequence {
            sequence: sequence.into(),
            stage,
            source: Box::new(self),
        }
    }
}

use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("sequence has {len} frames but the smoothing window is {window}; skip smoothing for this sequence")]
    SequenceTooShort { len: usize, window: usize },

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("training data for {0} contains a single class")]
    SingleClass(String),

    #[error("cannot build {folds} folds from {participants} participants")]
    TooFewParticipants { folds: usize, participants: usize },

    #[error("script validation failed: {0}")]
    Script(String),

    #[error("stage {stage} of fold {fold} consumed rows of test participant {participant}")]
    Leak {
        stage: String,
        fold: usize,
        participant: String,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

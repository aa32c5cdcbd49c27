use std::path::{Path, PathBuf};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] bodycue_core::Error),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn data(path: &Path, msg: impl std::fmt::Display) -> Self {
        Error::Data(format!("{}: {msg}", path.display()))
    }

    /// Process exit status: 2 config, 3 data, 4 model.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) => 2,
            Error::Model(_) => 4,
            Error::Core(bodycue_core::Error::Script(_)) => 2,
            Error::Data(_) | Error::Io { .. } | Error::Core(_) => 3,
        }
    }
}

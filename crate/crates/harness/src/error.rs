use burstsim::ConfigError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Parse(String),
    /// Semantic problem at a key path such as `component[3].map`.
    #[error("{path}: {msg}")]
    Config { path: String, msg: String },
    #[error("{path}: {source}")]
    Netlist {
        path: String,
        #[source]
        source: ConfigError,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    pub fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Self::Config {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub fn netlist(path: impl Into<String>, source: ConfigError) -> Self {
        Self::Netlist {
            path: path.into(),
            source,
        }
    }

    /// Key path of the offending entry, if any.
    pub fn path(&self) -> Option<&str> {
        match self {
            Self::Config { path, .. } | Self::Netlist { path, .. } | Self::Io { path, .. } => Some(path),
            _ => None,
        }
    }
}

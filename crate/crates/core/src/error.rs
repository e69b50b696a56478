use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
    #[error("port {0} is not connected")]
    Unconnected(String),
    #[error("port {0} is connected more than once")]
    DoubleConnect(String),
    #[error("data width mismatch on link {link}: master drives {master} bytes, slave expects {slave} bytes")]
    WidthMismatch {
        link: String,
        master: usize,
        slave: usize,
    },
    #[error("ID width mismatch on link {link}: master drives {master} bits, slave accepts {slave} bits")]
    IdWidthMismatch { link: String, master: u8, slave: u8 },
    #[error("combinational loop through {0}")]
    CombinationalLoop(String),
    #[error("valid depends combinationally on ready in {0}")]
    ReadyToValid(String),
}

impl ConfigError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        ConfigError::Invalid(msg.into())
    }
}

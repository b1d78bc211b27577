use thiserror::Error;

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("fsm id must not be empty")]
    EmptyId,
    #[error("fsm id `{0}` is already registered")]
    DuplicateId(String),
    #[error("publish rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("cannot bind {address}: {source}")]
    BindFailure {
        address: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot start server runtime: {0}")]
    Runtime(#[source] std::io::Error),
}

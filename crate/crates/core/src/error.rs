use thiserror::Error;

/// An event or measure name outside the ten inputs / four outputs.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown event or measure name `{0}`")]
pub struct UnknownName(pub String);

use thiserror::Error;

use crate::engine::Violation;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("invalid cache geometry: {0}")]
    Geometry(String),
    #[error("invalid scheme `{input}`: {reason}")]
    Scheme { input: String, reason: String },
    #[error("invalid workload: {0}")]
    Workload(String),
    #[error("invalid sweep plan: {0}")]
    Plan(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceErrorKind {
    #[error("expected 3 space-separated fields, found {0}")]
    FieldCount(usize),
    #[error("unknown opcode `{0}`")]
    UnknownOpcode(String),
    #[error("malformed core id `{0}`")]
    MalformedCore(String),
    #[error("core {0} out of range (max 15)")]
    CoreOutOfRange(u64),
    #[error("malformed hex address `{0}`")]
    MalformedAddress(String),
}

/// A rejected trace line. `line` is 1-based; `column` is the 1-based byte
/// column of the offending field.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}, column {column}: {kind}")]
pub struct TraceError {
    pub line: u64,
    pub column: usize,
    pub kind: TraceErrorKind,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("malformed trace: {0}")]
    Trace(#[from] TraceError),
    #[error("malformed trace: line {line}: core {core} is not below the configured {num_cores} cores")]
    CoreOutOfRange {
        line: u64,
        core: usize,
        num_cores: usize,
    },
    #[error("coherence violation after reference {step}: {violation}")]
    Violation { step: u64, violation: Violation },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

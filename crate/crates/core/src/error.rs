use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),

    #[error("delta is only defined for finite-excitation environments")]
    DeltaUndefined,

    #[error("kernel violation: {0}")]
    Kernel(String),

    #[error("coupling condition fails: no prefix with strict inequality (m0 undefined)")]
    NoStrictPrefix,

    #[error("horizon guard exceeded: requested {requested}, limit {limit}")]
    HorizonGuard { requested: usize, limit: usize },

    #[error("arrow window ({site}, {visit}) is not materialized")]
    NotMaterialized { site: i64, visit: u32 },

    #[error("site {site} exceeded the cookie cap of {cap}")]
    CookieCap { site: i64, cap: u32 },

    #[error("insufficient regenerations: {blocks} interior blocks, need at least {needed}")]
    InsufficientRegenerations { blocks: usize, needed: usize },

    #[error("coupling violated on replica {replica}: {what}")]
    CouplingViolation { replica: u64, what: String },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

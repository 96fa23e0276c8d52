use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates an invariant. `field` names the offending key.
    #[error("invalid config `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    /// A systolic-tier kernel is slower than the ReRAM stage budget allows.
    #[error(
        "systolic stage infeasible: kernel {kernel} takes {kernel_delay_s:.6e} s, \
         budget is {budget_s:.6e} s (slowest ReRAM stage {reram_delay_s:.6e} s)"
    )]
    Infeasible {
        kernel: String,
        kernel_delay_s: f64,
        budget_s: f64,
        reram_delay_s: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{0:?} dataflow is not modeled")]
    UnsupportedDataflow(crate::systolic::Dataflow),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("no route from node {src} to node {dst}")]
    Unreachable { src: usize, dst: usize },

    #[error("stage {0} has no placement")]
    Unplaced(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors that originate in user configuration.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig { .. } | Error::UnknownPreset(_) | Error::Parse(_)
        )
    }
}

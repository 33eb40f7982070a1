use std::io;

use causal_core::algo_icm::AlgoError;
use causal_core::cause_effect::DiscoveryError;
use causal_core::graph::GraphError;
use causal_core::half_sibling::HsrError;
use causal_core::scm::ScmError;
use causal_core::ssl_bench::SslError;
use thiserror::Error;

/// Machine-readable failure category, printed as `error[<code>]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCode {
    Syntax,
    Schema,
    UnknownKind,
    Cycle,
    Arity,
    InvalidModel,
    PairFormat,
    Metadata,
    Usage,
    Io,
    Numeric,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Syntax => "syntax",
            ErrorCode::Schema => "schema",
            ErrorCode::UnknownKind => "unknown-kind",
            ErrorCode::Cycle => "cycle",
            ErrorCode::Arity => "arity",
            ErrorCode::InvalidModel => "invalid-model",
            ErrorCode::PairFormat => "pair-format",
            ErrorCode::Metadata => "metadata",
            ErrorCode::Usage => "usage",
            ErrorCode::Io => "io",
            ErrorCode::Numeric => "numeric",
        }
    }

    /// Process exit status: 2 usage, 3 data format (including I/O), 4 numeric.
    pub fn exit_status(self) -> u8 {
        match self {
            ErrorCode::Usage => 2,
            ErrorCode::Numeric => 4,
            _ => 3,
        }
    }
}

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub code: ErrorCode,
    pub message: String,
}

impl CliError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Usage, message)
    }

    pub fn numeric(message: impl ToString) -> Self {
        Self::new(ErrorCode::Numeric, message.to_string())
    }

    pub fn io(path: &std::path::Path, e: io::Error) -> Self {
        Self::new(ErrorCode::Io, format!("{}: {e}", path.display()))
    }
}

impl From<ScmError> for CliError {
    fn from(e: ScmError) -> Self {
        let code = match &e {
            ScmError::Graph(GraphError::Cycle(_)) => ErrorCode::Cycle,
            ScmError::ArityMismatch { .. } => ErrorCode::Arity,
            ScmError::UnknownTarget(_) => ErrorCode::Usage,
            _ => ErrorCode::InvalidModel,
        };
        Self::new(code, e.to_string())
    }
}

impl From<DiscoveryError> for CliError {
    fn from(e: DiscoveryError) -> Self {
        let inner = match &e {
            DiscoveryError::Pair { source, .. } => source.as_ref(),
            other => other,
        };
        let code = match inner {
            DiscoveryError::LengthMismatch(..) | DiscoveryError::EmptyBatch => ErrorCode::PairFormat,
            DiscoveryError::TooFewSamples { .. } | DiscoveryError::ConstantColumn(_) => ErrorCode::PairFormat,
            _ => ErrorCode::Numeric,
        };
        Self::new(code, e.to_string())
    }
}

impl From<HsrError> for CliError {
    fn from(e: HsrError) -> Self {
        let code = match &e {
            HsrError::InvalidSpec(_) => ErrorCode::Usage,
            HsrError::Regression(_) | HsrError::NonFinite => ErrorCode::Numeric,
            _ => ErrorCode::InvalidModel,
        };
        Self::new(code, e.to_string())
    }
}

impl From<AlgoError> for CliError {
    fn from(e: AlgoError) -> Self {
        let code = match &e {
            AlgoError::NotReversible => ErrorCode::Numeric,
            _ => ErrorCode::Usage,
        };
        Self::new(code, e.to_string())
    }
}

impl From<SslError> for CliError {
    fn from(e: SslError) -> Self {
        Self::new(ErrorCode::Usage, e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

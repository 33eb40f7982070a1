//! JSON model files.
//!
//! ```json
//! {
//!   "seed": 7,
//!   "nodes": [
//!     {"name": "X", "noise": {"kind": "bernoulli", "p": 0.5}, "mechanism": {"kind": "passthrough"}},
//!     {"name": "Y", "parents": ["X"], "noise": {"kind": "bernoulli", "p": 0.5},
//!      "mechanism": {"kind": "selector", "family": [{"terms": ["identity"]}, {"terms": ["not"]}]}}
//!   ]
//! }
//! ```

use causal_core::scm::{NodeSpec, Scm};
use serde::{Deserialize, Serialize};
use serde_json::error::Category;

use crate::error::{CliError, ErrorCode, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScmSpecFile {
    pub nodes: Vec<NodeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Maps a serde_json failure to a syntax, unknown-kind or schema error with
/// its position.
pub fn json_error(e: serde_json::Error) -> CliError {
    let code = match e.classify() {
        Category::Syntax | Category::Eof => ErrorCode::Syntax,
        Category::Data if e.to_string().contains("unknown variant") => ErrorCode::UnknownKind,
        _ => ErrorCode::Schema,
    };
    CliError::new(code, format!("line {}, column {}: {e}", e.line(), e.column()))
}

pub fn parse_spec_file(text: &str) -> Result<ScmSpecFile> {
    serde_json::from_str(text).map_err(json_error)
}

/// Parses a model document into an [`Scm`] (nodes in declaration order).
pub fn parse_scm_spec(text: &str) -> Result<Scm> {
    let file = parse_spec_file(text)?;
    Ok(Scm::new(file.nodes)?)
}

//! Library side of the `causal` binary: input parsing, reports and the
//! subcommand implementations.

pub mod cli;
pub mod commands;
pub mod error;
pub mod pairs;
pub mod report;
pub mod spec;

pub use cli::Cli;
pub use commands::{run, run_from};
pub use error::{CliError, ErrorCode};
pub use pairs::{parse_pairs, read_pair_file};
pub use report::{write_report, Report};
pub use spec::{parse_scm_spec, ScmSpecFile};

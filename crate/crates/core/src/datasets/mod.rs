//! Synthetic rulebase generation, reference reasoners and dataset IO.

use std::path::PathBuf;

use thiserror::Error;

pub mod brute;
pub mod chain;
pub mod external;
pub mod generate;
pub mod io;
pub mod render;
pub mod theory;

pub use brute::{brute_force_label, naive_cwa_closure, MAX_ENUMERATION_ATOMS};
pub use chain::{forward_chain, label_statement, Closure};
pub use external::{convert_external, ConversionReport, MappingProfile};
pub use generate::{generate_dataset, generate_theory, GeneratedInstance, RulebaseSpec};
pub use io::{load_canonical, load_pairs, read_jsonl, write_jsonl};
pub use theory::{Atom, Attribute, Rule, RuleForm, Sign, Theory};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid rulebase spec: {0}")]
    InvalidSpec(String),
    #[error("no valid theory after {0} attempts")]
    GenerationRetryExceeded(usize),
    #[error("theory derives both a literal and its negation: {0}")]
    InconsistencyDetected(String),
    #[error("negation is not stratified")]
    UnstratifiedNegation,
    #[error("negative literal {0} cannot be a fact or rule head under the closed world")]
    NegativeLiteralUnderCwa(String),
    #[error("{0} propositions is too many to enumerate")]
    TooLargeForEnumeration(usize),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {reason}")]
    Validation { line: usize, reason: String },
    #[error("unknown mapping profile '{0}'")]
    UnknownProfile(String),
    #[error("record {record}: expected field '{field}' is absent")]
    SchemaMismatch { record: usize, field: String },
}

impl DatasetError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> DatasetError {
        DatasetError::Io { path: path.into(), source }
    }
}

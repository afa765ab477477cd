//! Receiver-side semantics: symbol correction, multi-user recovery and
//! triplet-to-text rendering.

mod correct;
mod recover;
mod template;

use thiserror::Error;

use crate::codebook::CodecError;
use crate::embed::EmbedError;

pub use correct::{correct, sim, top3, CandidateSet, Corrected, CorrectionPath};
pub use recover::{recover_all, recover_for_user, Recovered};
pub use template::{verbalize, verbalize_all, TemplateTable, Verbalizer};

#[derive(Debug, Error)]
pub enum RxError {
    #[error("similarity needs equal non-zero lengths, got {0} and {1}")]
    Length(usize, usize),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("no received symbols to recover from")]
    NoSymbols,
    #[error("private knowledge graph is empty")]
    EmptyPrivateKg,
    #[error("template line {line}: {msg}")]
    Template { line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

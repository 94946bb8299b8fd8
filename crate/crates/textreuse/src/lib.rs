//! Text-reuse toolkit: synthetic corpus generation, span-level detection of
//! reused passages between document pairs, and the plagdet metric family.
//!
//! The crate is organized around character spans ([`span::Span`]) and reuse
//! cases ([`span::ReuseCase`]). Corpora live on disk in a pairs/susp/src/truth
//! layout ([`format`]); detectors ([`lexical`], [`vector`]) turn document
//! pairs into detection cases; the [`eval`] module scores detections against
//! truth; [`generate`] builds annotated corpora with a pluggable
//! [`paraphrase`] provider. [`pipeline`] wires these into the batch commands
//! exposed by the CLI.

pub mod error;
pub mod eval;
pub mod exec;
pub mod format;
pub mod generate;
pub mod lexical;
pub mod paraphrase;
pub mod pipeline;
pub mod span;
pub mod text;
pub mod vector;

pub use error::{Error, Result};

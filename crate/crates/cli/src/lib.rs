//! Command-line driver for `cainf` documents.
//!
//! Documents are JSON with a versioned header; [`doc`] reads and writes them and
//! [`commands`] runs the subcommands without touching the filesystem.

pub mod commands;
pub mod doc;

pub use commands::{run_command, Command, Flags, Inputs, Outcome};
pub use doc::{parse_document, serialize, AlgebraDoc, DocError, Document};

//! Library surface of the `smc` command-line front end: configuration,
//! run dispatch and output serialization, kept separate from the binary so
//! the acceptance suite can drive whole runs in-process.

pub mod config;
pub mod engine;
pub mod output;

//! Library side of the CLI: command implementations and the experiment
//! harness, exposed so integration tests can drive them directly.

pub mod commands;
pub mod experiments;
pub mod svg;

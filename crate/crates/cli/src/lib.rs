//! Command implementations behind the `cde` binary. Every command returns
//! its printable output and an exit status instead of printing, so the
//! integration tests can drive them directly.

pub mod bench;
pub mod commands;
pub mod io;
pub mod props;

pub use io::{CliError, CliResult};

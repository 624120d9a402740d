//! Library surface of the command-line driver, used by the binary and the
//! acceptance suite.

pub mod commands;
pub mod config;
pub mod svg;

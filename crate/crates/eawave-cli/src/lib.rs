//! Library surface of the command-line driver, exposed so integration
//! tests can exercise configuration parsing and the command entry points.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod report;

//! File formats, configuration, parallel sweeps and the command layer for the
//! `bellbath` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;
pub mod sweep;
pub mod validate;

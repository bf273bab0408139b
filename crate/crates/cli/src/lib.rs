//! Command-line front end for `ale-core`: configuration, run persistence,
//! ensembles, aggregation and rendering.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod render;

//! Command line driver, configuration, run persistence and SVG plots for
//! the `cmz-core` imitation toolkit.

pub mod cli;
pub mod config;
pub mod plot;
pub mod run;

//! Command-line front end: run configuration, reports, plots and the
//! embedded benchmark suite.

pub mod bench;
pub mod config;
pub mod plot;
pub mod report;

//! File formats, reports and the command line for `mvactive-core` campaigns.

pub mod cli;
pub mod config;
pub mod dataset_io;
pub mod exec;
pub mod report;

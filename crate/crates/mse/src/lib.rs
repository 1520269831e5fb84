//! File formats, a rayon executor, JSON reports and the `mse` command line
//! on top of `mse-core`.

pub mod cli;
pub mod data;
pub mod par;
pub mod report;

//! File formats, CSV tables and the command-line front end for the
//! `norbip-core` solver.

pub mod cli;
pub mod format;
pub mod tables;

//! Command line and HTTP front ends for the glassbox workbench.

pub mod api;
pub mod commands;
pub mod errors;

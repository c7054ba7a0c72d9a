//! Command-line driver and HTTP service for the space-time cube engine.

pub mod api;
pub mod cli;

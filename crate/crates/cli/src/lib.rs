//! File formats and command drivers for the `catstream` binary.

pub mod commands;
pub mod config;
pub mod discretize;
pub mod fixture;
pub mod observations;
pub mod scenarios;

//! Data ingestion, synthetic markets, pipeline stages and the `genco`
//! command line.

pub mod commands;
pub mod config;
pub mod data;
pub mod pipeline;
pub mod report;
pub mod synth;

//! Day-ahead offering strategy for a price-making generator.

pub mod curves;
pub mod market;
pub mod regression;
pub mod scenarios;
pub mod optimizer;
pub mod backtest;

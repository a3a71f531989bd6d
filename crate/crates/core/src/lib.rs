//! Backtesting of battery arbitrage across German electricity spot markets.

pub mod accounting;
pub mod benchmark;
pub mod engine;
pub mod error;
pub mod forecast;
pub mod market;
pub mod model;
pub mod optimizer;
pub mod report;

pub use error::{Error, Result};

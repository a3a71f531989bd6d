//! Rolling-window trading loop.
//!
//! Auction-like scenarios (DAA, IDA and the ID1/ID3/IDFULL indices) run
//! once per delivery day and trade the whole day at realized prices,
//! optimizing over a look-ahead. Continuous intraday re-optimizes every
//! few minutes, trades the nearest eligible products at the current
//! clearing price and freezes products as they approach gate closure.

mod config;
mod ledger;
mod run;
mod select;

pub use config::{
    auction_instant, BessFile, CidConfig, CidFile, ScenarioConfig, ScenarioFile, TradingFile, DEFAULT_DURATION_H,
    DEFAULT_ETA_RT, DEFAULT_E_MAX_MWH,
};
pub use ledger::{Ledger, LedgerMeta, SkipRecord, TradeRecord, Venue};
pub use run::{run_scenario, ScenarioRun, MIN_TRADE_MW};
pub use select::{select_sets, SelectedSets};

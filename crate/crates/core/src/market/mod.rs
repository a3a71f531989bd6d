//! Market data: auction prices, continuous-intraday ticks, clearing prices,
//! intraday indices and a seeded synthetic market.

mod auctions;
mod indices;
pub mod synthetic;
mod trades;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

pub use auctions::{ingest_auctions, read_auctions, write_auctions, AuctionMarket, AuctionPrices, AUCTIONS_HEADER};
pub use indices::{compute_indices, write_indices, IndexTable, IndexValues, INDICES_HEADER};
pub use synthetic::{gen_synthetic, SyntheticData, SyntheticSpec};
pub use trades::{ingest_trades, read_trades, write_trades, Trade, TradeStore, TRADES_HEADER};

use crate::model::MARKET_ZONE;

/// Intraday index definitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IndexKind {
    Id1,
    Id3,
    IdFull,
}

impl IndexKind {
    /// Look-back before delivery start; `None` means the whole session.
    pub fn window(self) -> Option<Duration> {
        match self {
            IndexKind::Id1 => Some(Duration::hours(1)),
            IndexKind::Id3 => Some(Duration::hours(3)),
            IndexKind::IdFull => None,
        }
    }
}

pub(crate) fn parse_timestamp(s: &str) -> Result<DateTime<Utc>, String> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| format!("invalid timestamp {s:?}: {e}"))
}

/// ISO-8601 with the market-local numeric offset, e.g. `2023-06-01T14:30:00+02:00`.
pub fn format_local(t: DateTime<Utc>) -> String {
    t.with_timezone(&MARKET_ZONE).format("%Y-%m-%dT%H:%M:%S%:z").to_string()
}

/// Everything a scenario run reads: ticks, auction prices and the index
/// table derived from the ticks.
#[derive(Debug, Clone)]
pub struct MarketData {
    pub store: TradeStore,
    pub auctions: AuctionPrices,
    pub indices: IndexTable,
}

impl MarketData {
    pub fn new(store: TradeStore, auctions: AuctionPrices) -> Self {
        let indices = compute_indices(&store);
        Self {
            store,
            auctions,
            indices,
        }
    }
}

//! Price forecasts fed to the window optimizer.
//!
//! Continuous intraday uses a two-regime rule: far from delivery the
//! product's IDA clearing price, close to delivery the mean of its most
//! recent trades. Auction-like markets are forecast with their realized
//! price (perfect foresight).

use chrono::{DateTime, Duration, Utc};

use crate::error::{Error, Result};
use crate::market::{AuctionMarket, AuctionPrices, IndexKind, IndexTable, TradeStore};
use crate::model::{PriceSource, Product};

pub const DEFAULT_LIQUIDITY_HORIZON_H: f64 = 5.0;
pub const DEFAULT_FORECAST_TRADES: usize = 4;

#[derive(Debug, Clone, Copy)]
pub struct ForecastContext<'a> {
    pub store: &'a TradeStore,
    pub auctions: &'a AuctionPrices,
    liquidity_horizon: Duration,
    forecast_trades: usize,
}

impl<'a> ForecastContext<'a> {
    pub fn new(store: &'a TradeStore, auctions: &'a AuctionPrices) -> Self {
        Self {
            store,
            auctions,
            liquidity_horizon: Duration::seconds((DEFAULT_LIQUIDITY_HORIZON_H * 3600.0) as i64),
            forecast_trades: DEFAULT_FORECAST_TRADES,
        }
    }

    pub fn with_liquidity_horizon(mut self, horizon: Duration) -> Result<Self> {
        if horizon <= Duration::zero() {
            return Err(Error::config("liquidity horizon must be positive"));
        }
        self.liquidity_horizon = horizon;
        Ok(self)
    }

    pub fn with_forecast_trades(mut self, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::config("forecast trade count must be at least 1"));
        }
        self.forecast_trades = count;
        Ok(self)
    }

    pub fn liquidity_horizon(&self) -> Duration {
        self.liquidity_horizon
    }

    pub fn forecast_trades(&self) -> usize {
        self.forecast_trades
    }

    fn ida_price(&self, product: &Product) -> Result<f64> {
        self.auctions
            .get(AuctionMarket::Ida, product)
            .ok_or_else(|| Error::DataGap {
                what: "IDA price".into(),
                product: *product,
            })
    }
}

/// CID price forecast for `product` at trading time `t`.
///
/// Lead time above the liquidity horizon: IDA price. Otherwise the mean of
/// the last `forecast_trades` trades executed at or before `t` (fewer if
/// fewer exist, IDA if none).
pub fn cid_forecast(ctx: &ForecastContext<'_>, product: &Product, t: DateTime<Utc>) -> Result<f64> {
    if product.lead_time(t) > ctx.liquidity_horizon {
        return ctx.ida_price(product);
    }
    let recent = ctx.store.last_trades_at(product, t, ctx.forecast_trades);
    if recent.is_empty() {
        return ctx.ida_price(product);
    }
    Ok(recent.iter().map(|tr| tr.price).sum::<f64>() / recent.len() as f64)
}

/// Realized auction price or index value, used as its own forecast.
pub fn auction_forecast(
    auctions: &AuctionPrices,
    indices: &IndexTable,
    source: PriceSource,
    product: &Product,
) -> Result<f64> {
    let (value, what) = match source {
        PriceSource::Daa => (auctions.get(AuctionMarket::Daa, product), "DAA price"),
        PriceSource::Ida => (auctions.get(AuctionMarket::Ida, product), "IDA price"),
        PriceSource::Id1 => (indices.get(product, IndexKind::Id1), "ID1 index"),
        PriceSource::Id3 => (indices.get(product, IndexKind::Id3), "ID3 index"),
        PriceSource::IdFull => (indices.get(product, IndexKind::IdFull), "IDFULL index"),
    };
    value.ok_or_else(|| Error::DataGap {
        what: what.into(),
        product: *product,
    })
}

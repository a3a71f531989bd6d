use std::path::Path;

use chrono::{DateTime, Duration, NaiveDate, NaiveTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{DEFAULT_FORECAST_TRADES, DEFAULT_LIQUIDITY_HORIZON_H};
use crate::model::{BessConfig, Market, MARKET_ZONE};

/// Durations are stored as whole minutes so that ledgers stay readable.
mod minutes {
    use chrono::Duration;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i64(d.num_minutes())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::minutes(i64::deserialize(d)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CidConfig {
    /// Products with less lead time than this are frozen.
    #[serde(with = "minutes", rename = "min_lead_min")]
    pub min_lead: Duration,
    /// Optimization horizon measured from the first eligible product.
    #[serde(with = "minutes", rename = "horizon_min")]
    pub horizon: Duration,
    #[serde(with = "minutes", rename = "liquidity_horizon_min")]
    pub liquidity_horizon: Duration,
    pub forecast_trades: usize,
}

impl Default for CidConfig {
    fn default() -> Self {
        Self {
            min_lead: Duration::minutes(35),
            horizon: Duration::hours(8),
            liquidity_horizon: Duration::minutes((DEFAULT_LIQUIDITY_HORIZON_H * 60.0) as i64),
            forecast_trades: DEFAULT_FORECAST_TRADES,
        }
    }
}

/// One scenario: market, battery, simulated delivery days and loop
/// parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub market: Market,
    pub bess: BessConfig,
    /// First simulated delivery day (local).
    pub start: NaiveDate,
    /// Day after the last simulated delivery day.
    pub end: NaiveDate,
    /// First loop instant. Auction scenarios use one instant per delivery
    /// day at the market's gate time instead.
    pub t0: DateTime<Utc>,
    #[serde(with = "minutes", rename = "dt_trade_min")]
    pub dt_trade: Duration,
    pub n_opt: usize,
    pub n_trade: usize,
    pub cid: CidConfig,
}

impl ScenarioConfig {
    /// Defaults for `market`: daily full-day trading with two days of
    /// optimization for auction-like markets; 5 minute re-optimization over
    /// 32 quarter-hours trading the next 3 for continuous intraday.
    pub fn new(market: Market, bess: BessConfig, start: NaiveDate, days: u32) -> Result<Self> {
        if days == 0 {
            return Err(Error::config("scenario needs at least one delivery day"));
        }
        let end = start + Duration::days(i64::from(days));
        let cid = CidConfig::default();
        let (dt_trade, n_opt, n_trade) = if market.is_continuous() {
            (Duration::minutes(5), 32, 3)
        } else {
            let per_day = 24 * 60 / market.product_duration().minutes() as usize;
            (Duration::days(1), 2 * per_day, per_day)
        };
        let mut cfg = Self {
            market,
            bess,
            start,
            end,
            t0: DateTime::UNIX_EPOCH,
            dt_trade,
            n_opt,
            n_trade,
            cid,
        };
        cfg.t0 = cfg.default_t0()?;
        Ok(cfg)
    }

    /// Default first loop instant: the gate time on the day before `start`
    /// for auctions, `start` minus the horizon for continuous trading.
    pub fn default_t0(&self) -> Result<DateTime<Utc>> {
        let (day_start, _) = crate::model::local_day_bounds(self.start, MARKET_ZONE)?;
        if self.market.is_continuous() {
            let t = day_start - self.cid.horizon;
            let step = self.dt_trade.num_seconds().max(1);
            let aligned = t.timestamp().div_euclid(step) * step;
            return Utc
                .timestamp_opt(aligned, 0)
                .single()
                .ok_or_else(|| Error::config("t0 out of range"));
        }
        auction_instant(self.market, self.start)
    }

    pub fn days(&self) -> u32 {
        (self.end - self.start).num_days().max(0) as u32
    }

    pub fn delivery_days(&self) -> impl Iterator<Item = NaiveDate> {
        let start = self.start;
        (0..self.days()).map(move |i| start + Duration::days(i64::from(i)))
    }

    /// Days optimized per auction run (trading day included).
    pub fn lookahead_days(&self) -> usize {
        self.n_opt.div_ceil(self.n_trade.max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.end <= self.start {
            return Err(Error::config("scenario date range is empty"));
        }
        if self.n_trade == 0 || self.n_trade > self.n_opt {
            return Err(Error::config(format!(
                "need 0 < n_trade <= n_opt, got n_trade={} n_opt={}",
                self.n_trade, self.n_opt
            )));
        }
        if self.dt_trade <= Duration::zero() {
            return Err(Error::config("dt_trade must be positive"));
        }
        if self.market.is_continuous() {
            let c = &self.cid;
            if c.min_lead < Duration::zero() || c.horizon <= Duration::zero() || c.liquidity_horizon <= Duration::zero() {
                return Err(Error::config("cid time spans must be positive"));
            }
            if c.forecast_trades == 0 {
                return Err(Error::config("cid.forecast_trades must be at least 1"));
            }
        } else {
            if self.dt_trade != Duration::days(1) {
                return Err(Error::config("auction-like markets trade once per day (dt_trade = 1440 min)"));
            }
            if self.n_opt % self.n_trade != 0 {
                return Err(Error::config("auction-like markets need n_opt to be a whole number of days"));
            }
        }
        Ok(())
    }
}

/// Loop instant for delivery day `day`: 12:00 (DAA) or 15:00 (IDA and the
/// intraday indices) local time on the previous day.
pub fn auction_instant(market: Market, day: NaiveDate) -> Result<DateTime<Utc>> {
    let hour = if market == Market::Daa { 12 } else { 15 };
    let prev = day.pred_opt().ok_or_else(|| Error::config(format!("day {day} has no predecessor")))?;
    let naive = prev.and_time(NaiveTime::from_hms_opt(hour, 0, 0).expect("valid time"));
    MARKET_ZONE
        .from_local_datetime(&naive)
        .earliest()
        .map(|t| t.with_timezone(&Utc))
        .ok_or_else(|| Error::config(format!("no local {hour}:00 on {prev}")))
}

/// Scenario file schema (TOML). Every key is optional except `market`;
/// explicit power limits and efficiencies override the ones derived from
/// `duration_h` and `eta_rt`.
///
/// ```toml
/// market = "CID_F"
/// start = "2023-01-01"
/// days = 7
///
/// [bess]
/// e_max_mwh = 1.0
/// duration_h = 2.0
/// eta_rt = 0.92
///
/// [trading]
/// dt_trade_min = 5
/// n_opt = 32
/// n_trade = 3
///
/// [cid]
/// min_lead_min = 35
/// horizon_h = 8.0
/// liquidity_horizon_h = 5.0
/// forecast_trades = 4
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub market: Option<Market>,
    pub start: Option<NaiveDate>,
    pub days: Option<u32>,
    pub t0: Option<DateTime<Utc>>,
    pub bess: BessFile,
    pub trading: TradingFile,
    pub cid: CidFile,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BessFile {
    pub e_max_mwh: Option<f64>,
    pub duration_h: Option<f64>,
    pub eta_rt: Option<f64>,
    pub p_buy_max_mw: Option<f64>,
    pub p_sell_max_mw: Option<f64>,
    pub eta_c: Option<f64>,
    pub eta_d: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TradingFile {
    pub dt_trade_min: Option<i64>,
    pub n_opt: Option<usize>,
    pub n_trade: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CidFile {
    pub min_lead_min: Option<i64>,
    pub horizon_h: Option<f64>,
    pub liquidity_horizon_h: Option<f64>,
    pub forecast_trades: Option<usize>,
}

pub const DEFAULT_E_MAX_MWH: f64 = 1.0;
pub const DEFAULT_ETA_RT: f64 = 0.92;
pub const DEFAULT_DURATION_H: f64 = 1.0;

fn hours(h: f64, name: &str) -> Result<Duration> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::config(format!("{name} must be positive, got {h}")));
    }
    Ok(Duration::seconds((h * 3600.0).round() as i64))
}

impl ScenarioFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("scenario file: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    /// Values set in `other` win.
    pub fn overlay(mut self, other: &ScenarioFile) -> Self {
        macro_rules! take {
            ($($field:ident).+) => {
                if other.$($field).+.is_some() {
                    self.$($field).+ = other.$($field).+.clone();
                }
            };
        }
        take!(market);
        take!(start);
        take!(days);
        take!(t0);
        take!(bess.e_max_mwh);
        take!(bess.duration_h);
        take!(bess.eta_rt);
        take!(bess.p_buy_max_mw);
        take!(bess.p_sell_max_mw);
        take!(bess.eta_c);
        take!(bess.eta_d);
        take!(trading.dt_trade_min);
        take!(trading.n_opt);
        take!(trading.n_trade);
        take!(cid.min_lead_min);
        take!(cid.horizon_h);
        take!(cid.liquidity_horizon_h);
        take!(cid.forecast_trades);
        self
    }

    pub fn bess(&self) -> Result<BessConfig> {
        let b = &self.bess;
        let e_max = b.e_max_mwh.unwrap_or(DEFAULT_E_MAX_MWH);
        let base = BessConfig::from_discharge_duration(
            e_max,
            b.duration_h.unwrap_or(DEFAULT_DURATION_H),
            b.eta_rt.unwrap_or(DEFAULT_ETA_RT),
        )?;
        BessConfig::new(
            e_max,
            b.p_buy_max_mw.unwrap_or(base.p_buy_max()),
            b.p_sell_max_mw.unwrap_or(base.p_sell_max()),
            b.eta_c.unwrap_or(base.eta_c()),
            b.eta_d.unwrap_or(base.eta_d()),
        )
    }

    /// Resolves into a validated config. `fallback_start`/`fallback_days`
    /// cover files that leave the range to the data.
    pub fn resolve(&self, fallback_start: NaiveDate, fallback_days: u32) -> Result<ScenarioConfig> {
        let market = self.market.ok_or_else(|| Error::config("scenario market is not set"))?;
        let mut cfg = ScenarioConfig::new(
            market,
            self.bess()?,
            self.start.unwrap_or(fallback_start),
            self.days.unwrap_or(fallback_days),
        )?;
        if let Some(m) = self.trading.dt_trade_min {
            cfg.dt_trade = Duration::minutes(m);
        }
        if let Some(n) = self.trading.n_opt {
            cfg.n_opt = n;
        }
        if let Some(n) = self.trading.n_trade {
            cfg.n_trade = n;
        }
        if let Some(m) = self.cid.min_lead_min {
            cfg.cid.min_lead = Duration::minutes(m);
        }
        if let Some(h) = self.cid.horizon_h {
            cfg.cid.horizon = hours(h, "cid.horizon_h")?;
        }
        if let Some(h) = self.cid.liquidity_horizon_h {
            cfg.cid.liquidity_horizon = hours(h, "cid.liquidity_horizon_h")?;
        }
        if let Some(n) = self.cid.forecast_trades {
            cfg.cid.forecast_trades = n;
        }
        cfg.t0 = match self.t0 {
            Some(t) => t,
            None => cfg.default_t0()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn defaults_per_market() {
        let bess = BessConfig::from_discharge_duration(1.0, 2.0, 0.92).unwrap();
        let daa = ScenarioConfig::new(Market::Daa, bess, day(2023, 1, 2), 1).unwrap();
        assert_eq!((daa.n_opt, daa.n_trade), (48, 24));
        assert_eq!(daa.lookahead_days(), 2);
        assert_eq!(daa.t0, Utc.with_ymd_and_hms(2023, 1, 1, 11, 0, 0).unwrap());
        let ida = ScenarioConfig::new(Market::Ida, bess, day(2023, 7, 2), 1).unwrap();
        assert_eq!((ida.n_opt, ida.n_trade), (192, 96));
        assert_eq!(ida.t0, Utc.with_ymd_and_hms(2023, 7, 1, 13, 0, 0).unwrap());
        let cid = ScenarioConfig::new(Market::CidForecast, bess, day(2023, 1, 2), 3).unwrap();
        assert_eq!((cid.n_opt, cid.n_trade, cid.dt_trade), (32, 3, Duration::minutes(5)));
        assert_eq!(cid.t0, Utc.with_ymd_and_hms(2023, 1, 1, 15, 0, 0).unwrap());
        assert_eq!(cid.days(), 3);
        for cfg in [daa, ida, cid] {
            cfg.validate().unwrap();
        }
    }

    #[test]
    fn file_overrides_and_overlay() {
        let file = ScenarioFile::from_toml(
            r#"
            market = "CID_PF"
            start = "2023-03-01"
            days = 2
            [bess]
            duration_h = 4.0
            [cid]
            liquidity_horizon_h = 3.0
            forecast_trades = 6
            "#,
        )
        .unwrap();
        let cli = ScenarioFile {
            days: Some(5),
            ..Default::default()
        };
        let cfg = file.overlay(&cli).resolve(day(2000, 1, 1), 1).unwrap();
        assert_eq!(cfg.market, Market::CidPerfectForesight);
        assert_eq!(cfg.start, day(2023, 3, 1));
        assert_eq!(cfg.days(), 5);
        assert!((cfg.bess.p_buy_max() - 0.25).abs() < 1e-12);
        assert_eq!(cfg.cid.liquidity_horizon, Duration::hours(3));
        assert_eq!(cfg.cid.forecast_trades, 6);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(ScenarioFile::from_toml("market = \"DAA\"\nbogus = 1").is_err());
        assert!(ScenarioFile::default().resolve(day(2023, 1, 1), 1).is_err());
        let bad = ScenarioFile::from_toml("market = \"CID_F\"\n[trading]\nn_opt = 2\nn_trade = 3").unwrap();
        assert!(bad.resolve(day(2023, 1, 1), 1).is_err());
        let bad = ScenarioFile::from_toml("market = \"DAA\"\n[trading]\ndt_trade_min = 60").unwrap();
        assert!(bad.resolve(day(2023, 1, 1), 1).is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let bess = BessConfig::from_discharge_duration(1.0, 3.0, 0.8).unwrap();
        let cfg = ScenarioConfig::new(Market::Id3, bess, day(2023, 5, 5), 2).unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"dt_trade_min\":1440"));
        let back: ScenarioConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }
}

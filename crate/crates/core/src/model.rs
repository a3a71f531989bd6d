//! Domain types shared across the crate: products, battery parameters,
//! schedules and committed positions.
//!
//! All instants are UTC. Market-local time only shows up when building a
//! product grid for a delivery day or when attributing products to days.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Duration, NaiveDate, TimeZone, Timelike, Utc};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// German market zone (CET/CEST).
pub const MARKET_ZONE: Tz = chrono_tz::Europe::Berlin;

/// Tolerance used for schedule feasibility checks (MWh and MW).
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum ProductDuration {
    QuarterHour,
    Hour,
}

impl ProductDuration {
    pub fn from_minutes(minutes: u32) -> Result<Self> {
        match minutes {
            15 => Ok(Self::QuarterHour),
            60 => Ok(Self::Hour),
            other => Err(Error::config(format!(
                "unsupported product duration {other} min (expected 15 or 60)"
            ))),
        }
    }

    pub fn minutes(self) -> u32 {
        match self {
            Self::QuarterHour => 15,
            Self::Hour => 60,
        }
    }

    pub fn hours(self) -> f64 {
        f64::from(self.minutes()) / 60.0
    }

    pub fn span(self) -> Duration {
        Duration::minutes(i64::from(self.minutes()))
    }
}

impl TryFrom<u32> for ProductDuration {
    type Error = Error;

    fn try_from(value: u32) -> Result<Self> {
        Self::from_minutes(value)
    }
}

impl From<ProductDuration> for u32 {
    fn from(value: ProductDuration) -> Self {
        value.minutes()
    }
}

/// A deliverable power slot. Identified by its UTC delivery start and its
/// duration; ordering is by start, then duration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Product {
    delivery_start: DateTime<Utc>,
    #[serde(rename = "duration_min")]
    duration: ProductDuration,
}

impl Product {
    /// Builds a product, rejecting starts that are off the duration grid.
    pub fn new(delivery_start: DateTime<Utc>, duration: ProductDuration) -> Result<Self> {
        let aligned = delivery_start.second() == 0
            && delivery_start.nanosecond() == 0
            && delivery_start.minute() % duration.minutes() == 0;
        if !aligned {
            return Err(Error::config(format!(
                "delivery start {delivery_start} is not aligned to the {} min grid",
                duration.minutes()
            )));
        }
        Ok(Self {
            delivery_start,
            duration,
        })
    }

    pub fn delivery_start(&self) -> DateTime<Utc> {
        self.delivery_start
    }

    pub fn delivery_end(&self) -> DateTime<Utc> {
        self.delivery_start + self.duration.span()
    }

    pub fn duration(&self) -> ProductDuration {
        self.duration
    }

    /// Duration in hours, the `δ` that converts MW into MWh.
    pub fn hours(&self) -> f64 {
        self.duration.hours()
    }

    pub fn lead_time(&self, now: DateTime<Utc>) -> Duration {
        self.delivery_start - now
    }

    /// Local delivery day the product is attributed to.
    pub fn delivery_day(&self, zone: Tz) -> NaiveDate {
        self.delivery_start.with_timezone(&zone).date_naive()
    }
}

impl fmt::Display for Product {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}min",
            self.delivery_start.format("%Y-%m-%dT%H:%M:%SZ"),
            self.duration.minutes()
        )
    }
}

fn local_midnight(day: NaiveDate, zone: Tz) -> Result<DateTime<Utc>> {
    let naive = day
        .and_hms_opt(0, 0, 0)
        .ok_or_else(|| Error::config(format!("invalid day {day}")))?;
    zone.from_local_datetime(&naive)
        .earliest()
        .map(|t| t.with_timezone(&Utc))
        .ok_or_else(|| Error::config(format!("local midnight of {day} does not exist in {zone}")))
}

/// UTC bounds `[start, end)` of a local calendar day.
pub fn local_day_bounds(day: NaiveDate, zone: Tz) -> Result<(DateTime<Utc>, DateTime<Utc>)> {
    let next = day
        .succ_opt()
        .ok_or_else(|| Error::config(format!("day {day} has no successor")))?;
    Ok((local_midnight(day, zone)?, local_midnight(next, zone)?))
}

/// Every product of the given duration delivered within the local day.
/// DST days yield 23/25 hours (92/100 quarter-hours).
pub fn product_grid(day: NaiveDate, zone: Tz, duration_min: u32) -> Result<Vec<Product>> {
    let duration = ProductDuration::from_minutes(duration_min)?;
    let (start, end) = local_day_bounds(day, zone)?;
    let mut out = Vec::with_capacity(100);
    let mut t = start;
    while t < end {
        out.push(Product::new(t, duration)?);
        t += duration.span();
    }
    Ok(out)
}

/// Battery parameters. Power limits are in MW, energy in MWh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BessConfig {
    e_max: f64,
    p_buy_max: f64,
    p_sell_max: f64,
    eta_c: f64,
    eta_d: f64,
}

impl BessConfig {
    pub fn new(e_max: f64, p_buy_max: f64, p_sell_max: f64, eta_c: f64, eta_d: f64) -> Result<Self> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(e_max) || !positive(p_buy_max) || !positive(p_sell_max) {
            return Err(Error::config(format!(
                "battery capacity and power limits must be positive (e_max={e_max}, p_buy_max={p_buy_max}, p_sell_max={p_sell_max})"
            )));
        }
        for (name, eta) in [("eta_c", eta_c), ("eta_d", eta_d)] {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::config(format!("{name} must lie in (0, 1], got {eta}")));
            }
        }
        Ok(Self {
            e_max,
            p_buy_max,
            p_sell_max,
            eta_c,
            eta_d,
        })
    }

    /// Symmetric battery that fully discharges in `delta_hours` with the
    /// given round-trip efficiency split evenly between both directions.
    pub fn from_discharge_duration(e_max: f64, delta_hours: f64, eta_rt: f64) -> Result<Self> {
        if !(delta_hours.is_finite() && delta_hours > 0.0) {
            return Err(Error::config(format!(
                "discharge duration must be positive, got {delta_hours}"
            )));
        }
        if !(eta_rt > 0.0 && eta_rt <= 1.0) {
            return Err(Error::config(format!(
                "round-trip efficiency must lie in (0, 1], got {eta_rt}"
            )));
        }
        let p_max = e_max / delta_hours;
        let eta = eta_rt.sqrt();
        Self::new(e_max, p_max, p_max, eta, eta)
    }

    pub fn e_max(&self) -> f64 {
        self.e_max
    }

    pub fn p_buy_max(&self) -> f64 {
        self.p_buy_max
    }

    pub fn p_sell_max(&self) -> f64 {
        self.p_sell_max
    }

    pub fn eta_c(&self) -> f64 {
        self.eta_c
    }

    pub fn eta_d(&self) -> f64 {
        self.eta_d
    }

    pub fn eta_rt(&self) -> f64 {
        self.eta_c * self.eta_d
    }

    /// Energy after one interval starting at `e_prev`.
    pub fn next_energy(&self, e_prev: f64, buy_mw: f64, sell_mw: f64, hours: f64) -> f64 {
        e_prev + (buy_mw * self.eta_c - sell_mw / self.eta_d) * hours
    }

    pub fn with_power(&self, p_buy_max: f64, p_sell_max: f64) -> Result<Self> {
        Self::new(self.e_max, p_buy_max, p_sell_max, self.eta_c, self.eta_d)
    }
}

/// Shorthand for [`BessConfig::from_discharge_duration`].
pub fn bess_from_discharge_duration(e_max: f64, delta_hours: f64, eta_rt: f64) -> Result<BessConfig> {
    BessConfig::from_discharge_duration(e_max, delta_hours, eta_rt)
}

/// Charge (`buy_mw`) or discharge (`sell_mw`) for one product and the
/// energy level at the end of its interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub product: Product,
    pub buy_mw: f64,
    pub sell_mw: f64,
    pub energy_end_mwh: f64,
}

impl ScheduleEntry {
    pub fn idle(product: Product, energy_mwh: f64) -> Self {
        Self {
            product,
            buy_mw: 0.0,
            sell_mw: 0.0,
            energy_end_mwh: energy_mwh,
        }
    }

    /// Signed net purchase, `buy - sell`.
    pub fn net_buy_mw(&self) -> f64 {
        self.buy_mw - self.sell_mw
    }
}

/// Checks a schedule chain starting at `e_initial` against the battery
/// model: nonnegative exclusive powers within limits, energy within
/// `[0, e_max]` and energy balance residuals. Returns the first violation.
pub fn check_schedule(entries: &[ScheduleEntry], e_initial: f64, bess: &BessConfig) -> Result<(), String> {
    let tol = FEASIBILITY_TOL;
    let mut e_prev = e_initial;
    for entry in entries {
        let p = &entry.product;
        if entry.buy_mw < 0.0 || entry.sell_mw < 0.0 {
            return Err(format!("{p}: negative power"));
        }
        if entry.buy_mw.min(entry.sell_mw) != 0.0 {
            return Err(format!("{p}: simultaneous charge and discharge"));
        }
        if entry.buy_mw > bess.p_buy_max() + tol || entry.sell_mw > bess.p_sell_max() + tol {
            return Err(format!("{p}: power limit exceeded"));
        }
        if entry.energy_end_mwh < -tol || entry.energy_end_mwh > bess.e_max() + tol {
            return Err(format!("{p}: energy {} outside [0, {}]", entry.energy_end_mwh, bess.e_max()));
        }
        let expected = bess.next_energy(e_prev, entry.buy_mw, entry.sell_mw, p.hours());
        let residual = (entry.energy_end_mwh - expected).abs();
        if residual > tol {
            return Err(format!("{p}: energy balance residual {residual:e}"));
        }
        e_prev = entry.energy_end_mwh;
    }
    Ok(())
}

/// Trading status of a product in a [`PositionBook`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositionStatus {
    Open,
    Frozen { at: DateTime<Utc> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductPositions {
    /// `(trading_time, net_buy_mw)` snapshots, strictly increasing in time.
    pub snapshots: Vec<(DateTime<Utc>, f64)>,
    pub status: PositionStatus,
}

/// Committed net positions per product over trading time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PositionBook {
    products: BTreeMap<Product, ProductPositions>,
}

impl PositionBook {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records the committed position of `product` at `at`. Fails when the
    /// product is frozen or `at` does not advance past the last snapshot.
    pub fn commit(&mut self, product: Product, at: DateTime<Utc>, net_buy_mw: f64) -> Result<(), String> {
        let entry = self.products.entry(product).or_insert_with(|| ProductPositions {
            snapshots: Vec::new(),
            status: PositionStatus::Open,
        });
        if let PositionStatus::Frozen { at: frozen } = entry.status {
            return Err(format!("{product} frozen at {frozen}, cannot commit at {at}"));
        }
        if let Some((last, _)) = entry.snapshots.last() {
            if *last >= at {
                return Err(format!("{product}: snapshot at {at} does not follow {last}"));
            }
        }
        entry.snapshots.push((at, net_buy_mw));
        Ok(())
    }

    pub fn freeze(&mut self, product: Product, at: DateTime<Utc>) {
        let entry = self.products.entry(product).or_insert_with(|| ProductPositions {
            snapshots: Vec::new(),
            status: PositionStatus::Open,
        });
        if entry.status == PositionStatus::Open {
            entry.status = PositionStatus::Frozen { at };
        }
    }

    /// Position of `product` according to the latest snapshot at or before `t`.
    pub fn position_at(&self, product: &Product, t: DateTime<Utc>) -> f64 {
        self.products
            .get(product)
            .and_then(|pp| {
                let idx = pp.snapshots.partition_point(|(ts, _)| *ts <= t);
                idx.checked_sub(1).map(|i| pp.snapshots[i].1)
            })
            .unwrap_or(0.0)
    }

    pub fn current(&self, product: &Product) -> f64 {
        self.products
            .get(product)
            .and_then(|pp| pp.snapshots.last().map(|(_, v)| *v))
            .unwrap_or(0.0)
    }

    pub fn status(&self, product: &Product) -> PositionStatus {
        self.products
            .get(product)
            .map(|pp| pp.status)
            .unwrap_or(PositionStatus::Open)
    }

    pub fn get(&self, product: &Product) -> Option<&ProductPositions> {
        self.products.get(product)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Product, &ProductPositions)> {
        self.products.iter()
    }
}

/// Market scenarios a backtest can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Market {
    #[serde(rename = "DAA")]
    Daa,
    #[serde(rename = "IDA")]
    Ida,
    #[serde(rename = "IDFULL")]
    IdFull,
    #[serde(rename = "ID3")]
    Id3,
    #[serde(rename = "ID1")]
    Id1,
    #[serde(rename = "CID_F")]
    CidForecast,
    #[serde(rename = "CID_PF")]
    CidPerfectForesight,
}

impl Market {
    pub const ALL: [Market; 7] = [
        Market::Daa,
        Market::Ida,
        Market::IdFull,
        Market::Id3,
        Market::Id1,
        Market::CidForecast,
        Market::CidPerfectForesight,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Market::Daa => "DAA",
            Market::Ida => "IDA",
            Market::IdFull => "IDFULL",
            Market::Id3 => "ID3",
            Market::Id1 => "ID1",
            Market::CidForecast => "CID_F",
            Market::CidPerfectForesight => "CID_PF",
        }
    }

    pub fn is_continuous(self) -> bool {
        matches!(self, Market::CidForecast | Market::CidPerfectForesight)
    }

    /// Single-price source for auction-like scenarios.
    pub fn price_source(self) -> Option<PriceSource> {
        match self {
            Market::Daa => Some(PriceSource::Daa),
            Market::Ida => Some(PriceSource::Ida),
            Market::IdFull => Some(PriceSource::IdFull),
            Market::Id3 => Some(PriceSource::Id3),
            Market::Id1 => Some(PriceSource::Id1),
            Market::CidForecast | Market::CidPerfectForesight => None,
        }
    }

    /// Product length traded in this scenario.
    pub fn product_duration(self) -> ProductDuration {
        match self {
            Market::Daa => ProductDuration::Hour,
            _ => ProductDuration::QuarterHour,
        }
    }
}

impl fmt::Display for Market {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Market {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Market::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::config(format!("unknown market {s:?}")))
    }
}

/// Where an auction-like scenario takes its per-product price from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PriceSource {
    Daa,
    Ida,
    IdFull,
    Id3,
    Id1,
}

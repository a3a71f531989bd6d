//! Seeded synthetic market: hourly day-ahead prices, quarter-hourly
//! intraday auction prices and continuous-intraday ticks.
//!
//! Price model:
//! * a daily level following an AR(1) process around a seasonal mean,
//!   plus a two-peak hourly shape with a seasonal midday solar dip;
//! * IDA quarter-hours = covering DAA hour + a ramp/noise term that is
//!   demeaned within the hour;
//! * ticks arrive as a Poisson process whose intensity ramps up linearly
//!   over the last hours before gate closure, with prices following an
//!   Ornstein-Uhlenbeck walk around the IDA price whose volatility grows
//!   towards delivery.
//!
//! A fixed seed and spec always produce the same data, byte for byte.

use std::f64::consts::PI;
use std::fs::File;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Datelike, Duration, NaiveDate, TimeZone, Timelike, Utc, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{write_auctions, write_trades, AuctionMarket, AuctionPrices, MarketData, Trade, TradeStore};
use crate::error::{Error, Result};
use crate::model::{product_grid, Product, MARKET_ZONE};

/// Minimum number of trades every product gets in its last hour.
pub const MIN_LAST_HOUR_TRADES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    /// First delivery day.
    pub start: NaiveDate,
    /// Number of delivery days with ticks.
    pub days: u32,
    /// Extra days after the range that only get auction prices.
    pub lookahead_days: u32,
    pub base_price: f64,
    pub seasonal_amplitude: f64,
    pub daily_amplitude: f64,
    pub solar_dip: f64,
    pub weekend_discount: f64,
    pub day_level_sd: f64,
    pub day_level_persistence: f64,
    pub hourly_noise_sd: f64,
    pub ida_noise_sd: f64,
    pub ida_ramp_factor: f64,
    /// OU volatility in €/MWh per sqrt(minute), far from delivery.
    pub tick_volatility: f64,
    /// Extra volatility multiple reached at gate closure.
    pub tick_vol_boost: f64,
    /// OU mean reversion rate per minute.
    pub tick_reversion: f64,
    /// Local hour on the day before delivery when continuous trading opens.
    pub session_open_hour: u32,
    pub gate_close_min: u32,
    /// Trades per minute outside the ramp.
    pub base_intensity: f64,
    /// Trades per minute at gate closure.
    pub peak_intensity: f64,
    pub ramp_hours: f64,
    pub mean_volume: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2023, 1, 1).expect("valid date"),
            days: 2,
            lookahead_days: 1,
            base_price: 95.0,
            seasonal_amplitude: 20.0,
            daily_amplitude: 30.0,
            solar_dip: 50.0,
            weekend_discount: 15.0,
            day_level_sd: 12.0,
            day_level_persistence: 0.7,
            hourly_noise_sd: 6.0,
            ida_noise_sd: 8.0,
            ida_ramp_factor: 0.5,
            tick_volatility: 1.5,
            tick_vol_boost: 2.0,
            tick_reversion: 0.03,
            session_open_hour: 16,
            gate_close_min: 5,
            base_intensity: 0.01,
            peak_intensity: 2.0,
            ramp_hours: 3.0,
            mean_volume: 2.0,
        }
    }
}

impl SyntheticSpec {
    pub fn new(start: NaiveDate, days: u32) -> Self {
        Self {
            start,
            days,
            ..Self::default()
        }
    }

    /// Last delivery day carrying ticks.
    pub fn end(&self) -> NaiveDate {
        self.start + Duration::days(i64::from(self.days.max(1)) - 1)
    }

    fn validate(&self) -> Result<()> {
        if self.days == 0 {
            return Err(Error::config("synthetic date range is empty"));
        }
        let positive = [
            ("tick_reversion", self.tick_reversion),
            ("base_intensity", self.base_intensity),
            ("peak_intensity", self.peak_intensity),
            ("ramp_hours", self.ramp_hours),
            ("mean_volume", self.mean_volume),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("synthetic {name} must be positive")));
            }
        }
        if self.peak_intensity < self.base_intensity {
            return Err(Error::config("peak_intensity must be at least base_intensity"));
        }
        if self.session_open_hour > 23 || self.gate_close_min == 0 || self.gate_close_min >= 60 {
            return Err(Error::config("session_open_hour must be 0..=23 and gate_close_min 1..=59"));
        }
        Ok(())
    }
}

/// Generated auction prices and ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub spec: SyntheticSpec,
    pub auctions: AuctionPrices,
    /// Grouped by product in delivery order, each in execution order.
    pub trades: Vec<Trade>,
}

impl SyntheticData {
    pub fn store(&self) -> Result<TradeStore> {
        TradeStore::from_trades(self.trades.clone())
    }

    pub fn into_market_data(self) -> Result<MarketData> {
        let store = TradeStore::from_trades(self.trades)?;
        Ok(MarketData::new(store, self.auctions))
    }

    pub fn auctions_csv(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        write_auctions(&self.auctions, &mut buf).expect("writing to memory");
        buf
    }

    pub fn trades_csv(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        write_trades(&self.trades, &mut buf).expect("writing to memory");
        buf
    }

    /// Writes `auctions.csv` and `trades.csv` into `dir`.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let auctions = dir.join("auctions.csv");
        let trades = dir.join("trades.csv");
        let f = File::create(&auctions).map_err(|e| Error::io(&auctions, e))?;
        write_auctions(&self.auctions, f).map_err(|e| Error::io(&auctions, e))?;
        let f = File::create(&trades).map_err(|e| Error::io(&trades, e))?;
        write_trades(&self.trades, f).map_err(|e| Error::io(&trades, e))?;
        Ok((auctions, trades))
    }
}

fn bump(hour: f64, center: f64, width: f64) -> f64 {
    let z = (hour - center) / width;
    (-0.5 * z * z).exp()
}

fn round_cents(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn local_hour(t: DateTime<Utc>) -> f64 {
    let local = t.with_timezone(&MARKET_ZONE);
    f64::from(local.hour()) + f64::from(local.minute()) / 60.0
}

pub fn gen_synthetic(seed: u64, spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut auctions = AuctionPrices::new();
    let total_days = spec.days + spec.lookahead_days;

    let mut level_dev = 0.0;
    for offset in 0..total_days {
        let day = spec.start + Duration::days(i64::from(offset));
        let doy = f64::from(day.ordinal());
        let seasonal = spec.seasonal_amplitude * (2.0 * PI * (doy - 15.0) / 365.0).cos();
        let summer = 0.5 * (1.0 + (2.0 * PI * (doy - 172.0) / 365.0).cos());
        let weekend = matches!(day.weekday(), Weekday::Sat | Weekday::Sun);
        level_dev = spec.day_level_persistence * level_dev + spec.day_level_sd * normal(&mut rng);
        let level = spec.base_price + seasonal + level_dev - if weekend { spec.weekend_discount } else { 0.0 };
        let solar = spec.solar_dip * (0.3 + 0.7 * summer);

        let hours = product_grid(day, MARKET_ZONE, 60)?;
        let mut daa = Vec::with_capacity(hours.len());
        for p in &hours {
            let h = local_hour(p.delivery_start()) + 0.5;
            let shape = spec.daily_amplitude
                * (0.5 * bump(h, 8.0, 2.0) + 0.9 * bump(h, 19.0, 2.5) - 0.6 * bump(h, 3.5, 2.5))
                - solar * bump(h, 13.0, 2.5);
            let price = round_cents(level + shape + spec.hourly_noise_sd * normal(&mut rng));
            daa.push(price);
            auctions
                .insert(AuctionMarket::Daa, *p, price)
                .map_err(Error::Config)?;
        }

        for (i, hour) in hours.iter().enumerate() {
            let prev = daa[i.saturating_sub(1)];
            let next = daa[(i + 1).min(daa.len() - 1)];
            let slope = 0.5 * (next - prev) * spec.ida_ramp_factor;
            let mut dev = [0.0; 4];
            for (k, d) in dev.iter_mut().enumerate() {
                *d = slope * (k as f64 - 1.5) / 4.0 + spec.ida_noise_sd * normal(&mut rng);
            }
            let mean = dev.iter().sum::<f64>() / 4.0;
            for (k, d) in dev.iter().enumerate() {
                let start = hour.delivery_start() + Duration::minutes(15 * k as i64);
                let q = Product::new(start, crate::model::ProductDuration::QuarterHour)?;
                auctions
                    .insert(AuctionMarket::Ida, q, round_cents(daa[i] + d - mean))
                    .map_err(Error::Config)?;
            }
        }
    }

    let mut trades = Vec::new();
    for offset in 0..spec.days {
        let day = spec.start + Duration::days(i64::from(offset));
        let open_local = (day - Duration::days(1))
            .and_hms_opt(spec.session_open_hour, 0, 0)
            .ok_or_else(|| Error::config("invalid session open hour"))?;
        let open = MARKET_ZONE
            .from_local_datetime(&open_local)
            .earliest()
            .ok_or_else(|| Error::config("session open falls into a DST gap"))?
            .with_timezone(&Utc);
        for product in product_grid(day, MARKET_ZONE, 15)? {
            let ida = auctions
                .get(AuctionMarket::Ida, &product)
                .expect("IDA price generated above");
            gen_product_ticks(&mut rng, spec, product, open, ida, &mut trades);
        }
    }

    Ok(SyntheticData {
        spec: spec.clone(),
        auctions,
        trades,
    })
}

fn gen_product_ticks(
    rng: &mut ChaCha8Rng,
    spec: &SyntheticSpec,
    product: Product,
    open: DateTime<Utc>,
    ida: f64,
    out: &mut Vec<Trade>,
) {
    // times are minutes relative to delivery start (negative)
    let start = product.delivery_start();
    let open_min = (open - start).num_seconds() as f64 / 60.0;
    let close_min = -f64::from(spec.gate_close_min);
    let ramp_min = -spec.ramp_hours * 60.0;
    if open_min >= close_min {
        return;
    }

    let mut times = Vec::new();
    let base = Exp::new(spec.base_intensity).expect("positive rate");
    let mut t = open_min;
    let flat_end = ramp_min.min(close_min);
    loop {
        t += base.sample(rng);
        if t >= flat_end {
            break;
        }
        times.push(t);
    }
    let peak = Exp::new(spec.peak_intensity).expect("positive rate");
    let mut t = open_min.max(ramp_min);
    loop {
        t += peak.sample(rng);
        if t >= close_min {
            break;
        }
        let frac = 1.0 + t / (spec.ramp_hours * 60.0);
        let rate = spec.base_intensity + (spec.peak_intensity - spec.base_intensity) * frac;
        if rng.gen::<f64>() * spec.peak_intensity < rate {
            times.push(t);
        }
    }

    let theta = spec.tick_reversion;
    let sigma_at = |t: f64| {
        let ramp = (1.0 + t / (spec.ramp_hours * 60.0)).clamp(0.0, 1.0);
        spec.tick_volatility * (1.0 + spec.tick_vol_boost * ramp)
    };
    let volume = Exp::new(1.0 / spec.mean_volume).expect("positive mean");
    let mut x = ida + sigma_at(open_min) / (2.0 * theta).sqrt() * normal(rng);
    let mut last = open_min;
    let first = out.len();
    for &t in &times {
        let dt = t - last;
        let decay = (-theta * dt).exp();
        let sd = sigma_at(t) * ((1.0 - decay * decay) / (2.0 * theta)).sqrt();
        x = ida + (x - ida) * decay + sd * normal(rng);
        last = t;
        out.push(tick(product, t, x, volume.sample(rng)));
    }

    let last_hour = out[first..]
        .iter()
        .filter(|tr| tr.exec_time >= start - Duration::hours(1))
        .count();
    if last_hour < MIN_LAST_HOUR_TRADES {
        for _ in last_hour..MIN_LAST_HOUR_TRADES {
            let t = rng.gen_range(-60.0..close_min);
            let price = ida + sigma_at(t) / (2.0 * theta).sqrt() * normal(rng);
            out.push(tick(product, t, price, volume.sample(rng)));
        }
        out[first..].sort_by_key(|tr| tr.exec_time);
    }
}

fn tick(product: Product, minutes_before: f64, price: f64, volume: f64) -> Trade {
    let secs = (minutes_before * 60.0).floor() as i64;
    Trade {
        product,
        exec_time: product.delivery_start() + Duration::seconds(secs),
        price: round_cents(price),
        volume: ((volume * 10.0).round() / 10.0).max(0.1),
    }
}

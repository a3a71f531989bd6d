//! Profit and cycle accounting on ledgers.

use std::collections::{BTreeMap, HashMap};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::engine::Ledger;
use crate::model::{BessConfig, Market, PositionBook, Product, ScheduleEntry, MARKET_ZONE};

/// Revenue of an auction-like ledger: `Σ π (s - b) δ` over dispatched
/// products, with `π` the price each product was traded at.
pub fn auction_profit(ledger: &Ledger) -> f64 {
    let prices: HashMap<Product, f64> = ledger.trades.iter().map(|t| (t.product, t.price)).collect();
    ledger
        .dispatched
        .iter()
        .map(|d| {
            let price = prices.get(&d.product).copied().unwrap_or(0.0);
            price * (d.sell_mw - d.buy_mw) * d.product.hours()
        })
        .sum()
}

/// Cash flow of a continuous ledger: every trade pays `price · volume · δ`
/// when buying and receives it when selling.
pub fn cid_profit(ledger: &Ledger) -> f64 {
    ledger
        .trades
        .iter()
        .map(|t| t.price * -t.volume_mw * t.product.hours())
        .sum()
}

pub fn profit(ledger: &Ledger) -> f64 {
    if ledger.meta.config.market.is_continuous() {
        cid_profit(ledger)
    } else {
        auction_profit(ledger)
    }
}

fn cycle_contribution(bess: &BessConfig, buy: f64, sell: f64, hours: f64) -> f64 {
    (buy * bess.eta_c() + sell / bess.eta_d()) * hours / (2.0 * bess.e_max())
}

/// Full equivalent cycles of a dispatched schedule.
pub fn cycles(dispatched: &[ScheduleEntry], bess: &BessConfig) -> f64 {
    dispatched
        .iter()
        .map(|d| cycle_contribution(bess, d.buy_mw, d.sell_mw, d.product.hours()))
        .sum()
}

/// Cycles counted on every executed trade instead of the dispatched
/// schedule, so that re-trading the same product counts again.
pub fn virtual_cycles(ledger: &Ledger, bess: &BessConfig) -> f64 {
    ledger
        .trades
        .iter()
        .map(|t| cycle_contribution(bess, t.volume_mw.max(0.0), (-t.volume_mw).max(0.0), t.product.hours()))
        .sum()
}

/// `None` when the battery never cycled.
pub fn profit_per_cycle(total_profit: f64, daily_cycles: f64, days: u32) -> Option<f64> {
    let total_cycles = daily_cycles * f64::from(days);
    (total_cycles > 0.0).then(|| total_profit / total_cycles)
}

/// Cash flow recomputed from position snapshots, each change valued at the
/// price of the trade executed at that instant. Used to cross-check
/// [`cid_profit`].
pub fn cash_from_positions(book: &PositionBook, ledger: &Ledger) -> f64 {
    let prices: HashMap<(Product, chrono::DateTime<chrono::Utc>), f64> =
        ledger.trades.iter().map(|t| ((t.product, t.exec_time), t.price)).collect();
    let mut total = 0.0;
    for (product, positions) in book.iter() {
        let mut previous = 0.0;
        for &(at, position) in &positions.snapshots {
            let price = prices.get(&(*product, at)).copied().unwrap_or(f64::NAN);
            total += price * (previous - position) * product.hours();
            previous = position;
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRow {
    pub day: NaiveDate,
    pub profit: f64,
    pub cycles: f64,
    pub virtual_cycles: f64,
    pub trades: usize,
}

impl DayRow {
    fn empty(day: NaiveDate) -> Self {
        Self {
            day,
            profit: 0.0,
            cycles: 0.0,
            virtual_cycles: 0.0,
            trades: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub market: Market,
    pub e_max_mwh: f64,
    pub p_max_mw: f64,
    pub days: u32,
    pub total_profit: f64,
    pub total_cycles: f64,
    pub total_virtual_cycles: f64,
    pub daily_cycles: f64,
    pub daily_virtual_cycles: f64,
    pub profit_per_cycle: Option<f64>,
    pub residual_energy_mwh: f64,
    pub trade_count: usize,
    pub skipped_count: usize,
    pub per_day: Vec<DayRow>,
}

impl ScenarioReport {
    pub fn from_ledger(ledger: &Ledger) -> Self {
        let cfg = &ledger.meta.config;
        let bess = &cfg.bess;
        let continuous = cfg.market.is_continuous();

        let mut rows: BTreeMap<NaiveDate, DayRow> = cfg.delivery_days().map(|day| (day, DayRow::empty(day))).collect();
        fn row<'a>(rows: &'a mut BTreeMap<NaiveDate, DayRow>, p: &Product) -> &'a mut DayRow {
            let day = p.delivery_day(MARKET_ZONE);
            rows.entry(day).or_insert_with(|| DayRow::empty(day))
        }
        let prices: HashMap<Product, f64> = ledger.trades.iter().map(|t| (t.product, t.price)).collect();
        for d in &ledger.dispatched {
            let r = row(&mut rows, &d.product);
            r.cycles += cycle_contribution(bess, d.buy_mw, d.sell_mw, d.product.hours());
            if !continuous {
                let price = prices.get(&d.product).copied().unwrap_or(0.0);
                r.profit += price * (d.sell_mw - d.buy_mw) * d.product.hours();
            }
        }
        for t in &ledger.trades {
            let r = row(&mut rows, &t.product);
            r.virtual_cycles += cycle_contribution(bess, t.volume_mw.max(0.0), (-t.volume_mw).max(0.0), t.product.hours());
            r.trades += 1;
            if continuous {
                r.profit += t.price * -t.volume_mw * t.product.hours();
            }
        }

        let days = cfg.days();
        let total_profit = profit(ledger);
        let total_cycles = cycles(&ledger.dispatched, bess);
        let total_virtual_cycles = virtual_cycles(ledger, bess);
        let daily_cycles = total_cycles / f64::from(days.max(1));
        let daily_virtual_cycles = total_virtual_cycles / f64::from(days.max(1));
        Self {
            market: cfg.market,
            e_max_mwh: bess.e_max(),
            p_max_mw: bess.p_sell_max(),
            days,
            total_profit,
            total_cycles,
            total_virtual_cycles,
            daily_cycles,
            daily_virtual_cycles,
            profit_per_cycle: profit_per_cycle(total_profit, daily_cycles, days),
            residual_energy_mwh: ledger.meta.residual_energy_mwh,
            trade_count: ledger.trades.len(),
            skipped_count: ledger.skipped.len(),
            per_day: rows.into_values().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{LedgerMeta, ScenarioConfig, TradeRecord, Venue};
    use crate::model::ProductDuration;
    use chrono::{DateTime, Duration, TimeZone, Utc};

    fn bess(eta_rt: f64) -> BessConfig {
        BessConfig::from_discharge_duration(1.0, 1.0, eta_rt).unwrap()
    }

    fn hour(h: u32) -> Product {
        Product::new(Utc.with_ymd_and_hms(2023, 6, 1, h, 0, 0).unwrap(), ProductDuration::Hour).unwrap()
    }

    fn quarter(h: u32) -> Product {
        Product::new(Utc.with_ymd_and_hms(2023, 6, 1, h, 0, 0).unwrap(), ProductDuration::QuarterHour).unwrap()
    }

    fn at(h: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2023, 5, 31, h, 0, 0).unwrap()
    }

    fn ledger(market: Market, bess: BessConfig) -> Ledger {
        let cfg = ScenarioConfig::new(market, bess, NaiveDate::from_ymd_opt(2023, 6, 1).unwrap(), 1).unwrap();
        Ledger {
            meta: LedgerMeta {
                config: cfg,
                residual_energy_mwh: 0.0,
                windows_solved: 0,
                truncated_windows: 0,
            },
            trades: Vec::new(),
            dispatched: Vec::new(),
            skipped: Vec::new(),
        }
    }

    fn trade(product: Product, exec_time: DateTime<Utc>, volume_mw: f64, price: f64) -> TradeRecord {
        TradeRecord {
            exec_time,
            product,
            volume_mw,
            price,
            market: Venue::Cid,
        }
    }

    fn entry(product: Product, buy_mw: f64, sell_mw: f64, energy_end_mwh: f64) -> ScheduleEntry {
        ScheduleEntry {
            product,
            buy_mw,
            sell_mw,
            energy_end_mwh,
        }
    }

    #[test]
    fn auction_profit_of_the_arbitrage_instance() {
        let b = bess(0.92);
        let mut l = ledger(Market::Daa, b);
        l.trades = vec![trade(hour(8), at(10), 1.0, 10.0), trade(hour(9), at(10), -0.92, 100.0)];
        l.dispatched = vec![entry(hour(8), 1.0, 0.0, b.eta_c()), entry(hour(9), 0.0, 0.92, 0.0)];
        assert!((auction_profit(&l) - 82.0).abs() < 1e-9);
        assert_eq!(auction_profit(&ledger(Market::Daa, b)), 0.0);
    }

    #[test]
    fn lossless_round_trip_at_one_price_earns_nothing() {
        let b = bess(1.0);
        let mut l = ledger(Market::Daa, b);
        l.trades = vec![trade(hour(8), at(10), 1.0, 50.0), trade(hour(9), at(10), -1.0, 50.0)];
        l.dispatched = vec![entry(hour(8), 1.0, 0.0, 1.0), entry(hour(9), 0.0, 1.0, 0.0)];
        assert_eq!(auction_profit(&l), 0.0);
    }

    #[test]
    fn cid_profit_counts_every_trade() {
        let b = bess(0.92);
        let mut l = ledger(Market::CidForecast, b);
        assert_eq!(cid_profit(&l), 0.0);
        l.trades = vec![trade(quarter(10), at(20), 1.0, 20.0), trade(quarter(10), at(21), -1.0, 60.0)];
        assert!((cid_profit(&l) - 10.0).abs() < 1e-12);
        l.trades = vec![trade(quarter(10), at(20), 0.5, 40.0)];
        assert!((cid_profit(&l) + 5.0).abs() < 1e-12);
    }

    #[test]
    fn cycle_normalization() {
        for eta_rt in [0.8, 0.92, 1.0] {
            let b = bess(eta_rt);
            let full = [entry(hour(8), 1.0 / b.eta_c(), 0.0, 1.0), entry(hour(9), 0.0, b.eta_d(), 0.0)];
            assert!((cycles(&full, &b) - 1.0).abs() < 1e-9);
            assert!((cycles(&full[..1], &b) - 0.5).abs() < 1e-9);
        }
        assert_eq!(cycles(&[entry(hour(8), 0.0, 0.0, 0.0)], &bess(0.92)), 0.0);
    }

    #[test]
    fn virtual_cycles_count_churn() {
        let b = bess(0.92);
        let mut l = ledger(Market::CidForecast, b);
        assert_eq!(virtual_cycles(&l, &b), 0.0);
        l.trades = vec![trade(quarter(10), at(20), 1.0, 20.0), trade(quarter(10), at(21), -1.0, 60.0)];
        l.dispatched = vec![entry(quarter(10), 0.0, 0.0, 0.0)];
        assert!(virtual_cycles(&l, &b) > 0.0);
        assert_eq!(cycles(&l.dispatched, &b), 0.0);
    }

    #[test]
    fn single_trades_give_equal_virtual_cycles() {
        let b = bess(0.92);
        let mut l = ledger(Market::Ida, b);
        let p1 = quarter(8);
        let p2 = Product::new(p1.delivery_start() + Duration::minutes(15), ProductDuration::QuarterHour).unwrap();
        l.trades = vec![trade(p1, at(13), 0.7, 10.0), trade(p2, at(13), -0.3, 90.0)];
        l.dispatched = vec![entry(p1, 0.7, 0.0, 0.7 * 0.25 * b.eta_c()), entry(p2, 0.0, 0.3, 0.0)];
        assert_eq!(virtual_cycles(&l, &b), cycles(&l.dispatched, &b));
    }

    #[test]
    fn profit_per_cycle_identity() {
        let ppc = profit_per_cycle(40_590.0, 2.0, 365).unwrap();
        assert_eq!(ppc * (2.0 * 365.0), 40_590.0);
        assert!((ppc - 55.6).abs() < 0.01);
        assert!(profit_per_cycle(10.0, 0.0, 365).is_none());
    }

    #[test]
    fn report_attributes_days() {
        let b = bess(0.92);
        let mut l = ledger(Market::CidForecast, b);
        l.trades = vec![trade(quarter(10), at(20), 1.0, 20.0), trade(quarter(10), at(21), -0.5, 60.0)];
        l.dispatched = vec![entry(quarter(10), 0.5, 0.0, 0.5 * 0.25 * b.eta_c())];
        let report = ScenarioReport::from_ledger(&l);
        assert_eq!(report.days, 1);
        assert_eq!(report.per_day.len(), 1);
        assert_eq!(report.per_day[0].trades, 2);
        assert!((report.per_day[0].profit - report.total_profit).abs() < 1e-12);
        assert!(report.daily_virtual_cycles >= report.daily_cycles);
    }
}

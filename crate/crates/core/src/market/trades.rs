use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::ops::Range;
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::{format_local, parse_timestamp, IndexKind};
use crate::error::{Error, Result};
use crate::model::{Product, ProductDuration};

pub const TRADES_HEADER: [&str; 5] = ["delivery_start", "duration_min", "exec_time", "price_eur_mwh", "volume_mw"];

/// One executed continuous-intraday transaction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trade {
    pub product: Product,
    pub exec_time: DateTime<Utc>,
    pub price: f64,
    pub volume: f64,
}

impl Trade {
    pub fn validate(&self) -> Result<(), String> {
        if self.exec_time >= self.product.delivery_start() {
            return Err(format!(
                "trade at {} is not before delivery start {}",
                self.exec_time,
                self.product.delivery_start()
            ));
        }
        if !(self.volume.is_finite() && self.volume > 0.0) {
            return Err(format!("volume must be positive, got {}", self.volume));
        }
        if !self.price.is_finite() {
            return Err(format!("price must be finite, got {}", self.price));
        }
        Ok(())
    }
}

/// Immutable trade collection grouped by product. Within a product, trades
/// are ordered by execution time with ties kept in ingestion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TradeStore {
    trades: Vec<Trade>,
    ranges: BTreeMap<Product, Range<usize>>,
    by_time: Vec<u32>,
}

impl TradeStore {
    /// Builds a store, rejecting trades that violate [`Trade::validate`].
    /// Error line numbers are 1-based positions in `trades`.
    pub fn from_trades(mut trades: Vec<Trade>) -> Result<Self> {
        for (i, trade) in trades.iter().enumerate() {
            trade.validate().map_err(|message| Error::Validation {
                source_name: "<memory>".into(),
                line: i as u64 + 1,
                message,
            })?;
        }
        if trades.len() > u32::MAX as usize {
            return Err(Error::config("too many trades for one store"));
        }
        // stable: equal keys keep ingestion order
        trades.sort_by(|a, b| (a.product, a.exec_time).cmp(&(b.product, b.exec_time)));

        let mut ranges = BTreeMap::new();
        let mut start = 0;
        for i in 1..=trades.len() {
            if i == trades.len() || trades[i].product != trades[start].product {
                ranges.insert(trades[start].product, start..i);
                start = i;
            }
        }

        let mut by_time: Vec<u32> = (0..trades.len() as u32).collect();
        by_time.sort_by_key(|&i| trades[i as usize].exec_time);

        Ok(Self {
            trades,
            ranges,
            by_time,
        })
    }

    pub fn len(&self) -> usize {
        self.trades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trades.is_empty()
    }

    pub fn products(&self) -> impl Iterator<Item = &Product> {
        self.ranges.keys()
    }

    /// Trades of one product in execution order.
    pub fn trades_of(&self, product: &Product) -> &[Trade] {
        self.ranges
            .get(product)
            .map(|r| &self.trades[r.clone()])
            .unwrap_or(&[])
    }

    /// All trades ordered by execution time.
    pub fn iter_by_time(&self) -> impl Iterator<Item = &Trade> {
        self.by_time.iter().map(|&i| &self.trades[i as usize])
    }

    /// All trades grouped by product.
    pub fn iter(&self) -> impl Iterator<Item = &Trade> {
        self.trades.iter()
    }

    /// Mean price of the product's trades executed in `(t, t + 1 min]`.
    pub fn clearing_price(&self, product: &Product, t: DateTime<Utc>) -> Option<f64> {
        let trades = self.trades_of(product);
        let lo = trades.partition_point(|tr| tr.exec_time <= t);
        let hi = trades.partition_point(|tr| tr.exec_time <= t + Duration::minutes(1));
        let window = &trades[lo..hi];
        if window.is_empty() {
            return None;
        }
        let sum: f64 = window.iter().map(|tr| tr.price).sum();
        Some(sum / window.len() as f64)
    }

    /// Volume-weighted average price over `[start - w, start)`, where `w`
    /// depends on the index kind (whole session for [`IndexKind::IdFull`]).
    pub fn index_price(&self, product: &Product, kind: IndexKind) -> Option<f64> {
        let trades = self.trades_of(product);
        let end = product.delivery_start();
        let lo = match kind.window() {
            Some(w) => trades.partition_point(|tr| tr.exec_time < end - w),
            None => 0,
        };
        let hi = trades.partition_point(|tr| tr.exec_time < end);
        let window = &trades[lo..hi];
        if window.is_empty() {
            return None;
        }
        let (pv, v) = window
            .iter()
            .fold((0.0, 0.0), |(pv, v), tr| (pv + tr.price * tr.volume, v + tr.volume));
        Some(pv / v)
    }

    /// Most recent `count` trades of the product executed at or before `t`.
    pub fn last_trades_at(&self, product: &Product, t: DateTime<Utc>, count: usize) -> &[Trade] {
        let trades = self.trades_of(product);
        let hi = trades.partition_point(|tr| tr.exec_time <= t);
        &trades[hi.saturating_sub(count)..hi]
    }
}

fn parse_row(record: &csv::StringRecord) -> Result<Trade, (bool, String)> {
    let field = |i: usize| record.get(i).map(str::trim).unwrap_or("");
    let delivery_start = parse_timestamp(field(0)).map_err(|e| (true, e))?;
    let minutes: u32 = field(1)
        .parse()
        .map_err(|_| (true, format!("invalid duration_min {:?}", field(1))))?;
    let exec_time = parse_timestamp(field(2)).map_err(|e| (true, e))?;
    let price: f64 = field(3)
        .parse()
        .map_err(|_| (true, format!("invalid price {:?}", field(3))))?;
    let volume: f64 = field(4)
        .parse()
        .map_err(|_| (true, format!("invalid volume {:?}", field(4))))?;
    let duration = ProductDuration::from_minutes(minutes).map_err(|e| (false, e.to_string()))?;
    let product = Product::new(delivery_start, duration).map_err(|e| (false, e.to_string()))?;
    let trade = Trade {
        product,
        exec_time,
        price,
        volume,
    };
    trade.validate().map_err(|e| (false, e))?;
    Ok(trade)
}

pub(crate) fn check_header(record: &csv::StringRecord, expected: &[&str], source_name: &str) -> Result<()> {
    let got: Vec<&str> = record.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Parse {
            source_name: source_name.into(),
            line: 1,
            message: format!("expected header {:?}, found {:?}", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

/// Parses a trades CSV stream. `source_name` labels diagnostics.
pub fn read_trades<R: Read>(reader: R, source_name: &str) -> Result<TradeStore> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut record = csv::StringRecord::new();
    let mut trades = Vec::new();
    let mut seen_header = false;
    loop {
        let more = rdr.read_record(&mut record).map_err(|e| Error::Parse {
            source_name: source_name.into(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        if !more {
            break;
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if !seen_header {
            check_header(&record, &TRADES_HEADER, source_name)?;
            seen_header = true;
            continue;
        }
        if record.len() != TRADES_HEADER.len() {
            return Err(Error::Parse {
                source_name: source_name.into(),
                line,
                message: format!("expected {} fields, found {}", TRADES_HEADER.len(), record.len()),
            });
        }
        match parse_row(&record) {
            Ok(trade) => trades.push(trade),
            Err((true, message)) => {
                return Err(Error::Parse {
                    source_name: source_name.into(),
                    line,
                    message,
                })
            }
            Err((false, message)) => {
                return Err(Error::Validation {
                    source_name: source_name.into(),
                    line,
                    message,
                })
            }
        }
    }
    if !seen_header {
        return Err(Error::Parse {
            source_name: source_name.into(),
            line: 1,
            message: "missing header".into(),
        });
    }
    TradeStore::from_trades(trades)
}

/// Reads and validates a trades file.
pub fn ingest_trades(path: impl AsRef<Path>) -> Result<TradeStore> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_trades(BufReader::new(file), &path.display().to_string())
}

/// Writes trades in the ingest schema, in the order given.
pub fn write_trades<'a, W: Write>(trades: impl IntoIterator<Item = &'a Trade>, writer: W) -> std::io::Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "{}", TRADES_HEADER.join(","))?;
    for tr in trades {
        writeln!(
            w,
            "{},{},{},{},{}",
            format_local(tr.product.delivery_start()),
            tr.product.duration().minutes(),
            format_local(tr.exec_time),
            tr.price,
            tr.volume
        )?;
    }
    w.flush()
}

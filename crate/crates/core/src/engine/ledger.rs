use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::ScenarioConfig;
use crate::error::{Error, Result};
use crate::market::{format_local, TRADES_HEADER};
use crate::model::{Market, Product, ScheduleEntry};

/// Where a trade was executed. Both continuous scenarios trade on `CID`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Venue {
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
    #[serde(rename = "CID")]
    Cid,
}

impl From<Market> for Venue {
    fn from(market: Market) -> Self {
        match market {
            Market::Daa => Venue::Daa,
            Market::Ida => Venue::Ida,
            Market::IdFull => Venue::IdFull,
            Market::Id3 => Venue::Id3,
            Market::Id1 => Venue::Id1,
            Market::CidForecast | Market::CidPerfectForesight => Venue::Cid,
        }
    }
}

/// An executed trade. `volume_mw > 0` buys (charging side).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub exec_time: DateTime<Utc>,
    pub product: Product,
    pub volume_mw: f64,
    pub price: f64,
    pub market: Venue,
}

/// A position change the optimizer wanted but no clearing price existed for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub exec_time: DateTime<Utc>,
    pub product: Product,
    pub intended_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerMeta {
    pub config: ScenarioConfig,
    /// Energy left in the battery after the last dispatched product.
    pub residual_energy_mwh: f64,
    pub windows_solved: usize,
    /// Loop instants where fewer products than configured were available.
    pub truncated_windows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    pub meta: LedgerMeta,
    pub trades: Vec<TradeRecord>,
    pub dispatched: Vec<ScheduleEntry>,
    pub skipped: Vec<SkipRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum Record {
    Meta(LedgerMeta),
    Trade(TradeRecord),
    Dispatch(ScheduleEntry),
    Skip(SkipRecord),
}

impl Ledger {
    /// Per-product sum of signed trade volumes.
    pub fn traded_positions(&self) -> BTreeMap<Product, f64> {
        let mut out = BTreeMap::new();
        for t in &self.trades {
            *out.entry(t.product).or_insert(0.0) += t.volume_mw;
        }
        out
    }

    /// Newline-delimited JSON: one meta record, then trades, dispatch
    /// entries and skipped changes in that order.
    pub fn write_ndjson<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = BufWriter::new(writer);
        let mut line = |rec: &Record| -> Result<()> {
            serde_json::to_writer(&mut w, rec)?;
            w.write_all(b"\n").map_err(|e| Error::io("<ledger>", e))
        };
        line(&Record::Meta(self.meta.clone()))?;
        for t in &self.trades {
            line(&Record::Trade(*t))?;
        }
        for d in &self.dispatched {
            line(&Record::Dispatch(*d))?;
        }
        for s in &self.skipped {
            line(&Record::Skip(*s))?;
        }
        w.flush().map_err(|e| Error::io("<ledger>", e))
    }

    pub fn read_ndjson<R: Read>(reader: R, path: &Path) -> Result<Self> {
        let corrupt = |line: usize, message: String| Error::Corrupt {
            path: path.to_path_buf(),
            message: format!("line {line}: {message}"),
        };
        let mut meta = None;
        let mut trades = Vec::new();
        let mut dispatched = Vec::new();
        let mut skipped = Vec::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line).map_err(|e| corrupt(i + 1, e.to_string()))?;
            match rec {
                Record::Meta(m) if meta.is_none() => meta = Some(m),
                Record::Meta(_) => return Err(corrupt(i + 1, "duplicate meta record".into())),
                Record::Trade(t) => trades.push(t),
                Record::Dispatch(d) => dispatched.push(d),
                Record::Skip(s) => skipped.push(s),
            }
        }
        let meta = meta.ok_or_else(|| corrupt(0, "missing meta record".into()))?;
        Ok(Self {
            meta,
            trades,
            dispatched,
            skipped,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_ndjson(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_ndjson(file, path)
    }

    /// Trades in the ingest CSV layout plus `signed_volume_mw`.
    pub fn write_trades_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = BufWriter::new(writer);
        writeln!(w, "{},signed_volume_mw", TRADES_HEADER.join(","))?;
        for t in &self.trades {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                format_local(t.product.delivery_start()),
                t.product.duration().minutes(),
                format_local(t.exec_time),
                t.price,
                t.volume_mw.abs(),
                t.volume_mw
            )?;
        }
        w.flush()
    }
}

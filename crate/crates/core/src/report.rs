//! Per-interval series and summary documents for single ledgers.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::accounting::ScenarioReport;
use crate::engine::{Ledger, SkipRecord};
use crate::error::{Error, Result};
use crate::market::format_local;
use crate::model::Product;

pub const SERIES_HEADER: [&str; 4] = ["interval", "power_mw", "energy_mwh", "profit_eur"];

/// One row per dispatched product. `power_mw` is the net charging power
/// (`buy - sell`), `profit_eur` the cash attributed to that product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalRow {
    pub product: Product,
    pub power_mw: f64,
    pub energy_mwh: f64,
    pub profit_eur: f64,
}

pub fn interval_series(ledger: &Ledger) -> Vec<IntervalRow> {
    let continuous = ledger.meta.config.market.is_continuous();
    let mut cash: HashMap<Product, f64> = HashMap::new();
    let mut price: HashMap<Product, f64> = HashMap::new();
    for t in &ledger.trades {
        *cash.entry(t.product).or_insert(0.0) += t.price * -t.volume_mw * t.product.hours();
        price.insert(t.product, t.price);
    }
    ledger
        .dispatched
        .iter()
        .map(|d| {
            let profit_eur = if continuous {
                cash.get(&d.product).copied().unwrap_or(0.0)
            } else {
                price.get(&d.product).copied().unwrap_or(0.0) * (d.sell_mw - d.buy_mw) * d.product.hours()
            };
            IntervalRow {
                product: d.product,
                power_mw: d.net_buy_mw(),
                energy_mwh: d.energy_end_mwh,
                profit_eur,
            }
        })
        .collect()
}

pub fn write_series<W: Write>(rows: &[IntervalRow], writer: W) -> std::io::Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "{}", SERIES_HEADER.join(","))?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            format_local(r.product.delivery_start()),
            r.power_mw,
            r.energy_mwh,
            r.profit_eur
        )?;
    }
    w.flush()
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary<'a> {
    pub report: ScenarioReport,
    pub windows_solved: usize,
    pub truncated_windows: usize,
    pub skipped: &'a [SkipRecord],
}

pub fn summary(ledger: &Ledger) -> Summary<'_> {
    Summary {
        report: ScenarioReport::from_ledger(ledger),
        windows_solved: ledger.meta.windows_solved,
        truncated_windows: ledger.meta.truncated_windows,
        skipped: &ledger.skipped,
    }
}

pub fn write_summary<W: Write>(ledger: &Ledger, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    serde_json::to_writer_pretty(&mut w, &summary(ledger))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io("<summary>", e))
}

/// Files written for one ledger.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub series: PathBuf,
    pub summary: PathBuf,
}

/// Writes `<stem>.series.csv` and `<stem>.summary.json` into `out_dir`.
pub fn write_report(ledger: &Ledger, out_dir: &Path, stem: &str) -> Result<ReportFiles> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let series = out_dir.join(format!("{stem}.series.csv"));
    let summary_path = out_dir.join(format!("{stem}.summary.json"));
    let file = File::create(&series).map_err(|e| Error::io(&series, e))?;
    write_series(&interval_series(ledger), file).map_err(|e| Error::io(&series, e))?;
    let file = File::create(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
    write_summary(ledger, file)?;
    Ok(ReportFiles {
        series,
        summary: summary_path,
    })
}

/// Loads each ledger and writes its report next to the others in
/// `out_dir`. Stops at the first unreadable ledger.
pub fn report_ledgers(paths: &[PathBuf], out_dir: &Path) -> Result<Vec<ReportFiles>> {
    let mut out = Vec::with_capacity(paths.len());
    for (i, path) in paths.iter().enumerate() {
        let ledger = Ledger::load(path)?;
        let stem = path
            .file_name()
            .and_then(|n| n.to_str())
            .map(|n| n.trim_end_matches(".ndjson").trim_end_matches(".jsonl").to_string())
            .unwrap_or_else(|| format!("ledger{i}"));
        out.push(write_report(&ledger, out_dir, &stem)?);
    }
    Ok(out)
}

//! The market × battery-duration matrix and its tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::accounting::ScenarioReport;
use crate::engine::{run_scenario, Ledger, ScenarioFile};
use crate::error::{Error, Result};
use crate::market::MarketData;
use crate::model::Market;

pub const DURATIONS_H: [u32; 5] = [1, 2, 3, 4, 5];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSpec {
    pub markets: Vec<Market>,
    pub durations_h: Vec<u32>,
    /// Settings shared by every cell; market and duration are set per cell.
    pub template: ScenarioFile,
    pub start: NaiveDate,
    pub days: u32,
    /// Worker threads; 0 uses every available core.
    pub jobs: usize,
}

impl BenchmarkSpec {
    pub fn full(start: NaiveDate, days: u32) -> Self {
        Self {
            markets: Market::ALL.to_vec(),
            durations_h: DURATIONS_H.to_vec(),
            template: ScenarioFile::default(),
            start,
            days,
            jobs: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.markets.is_empty() {
            return Err(Error::config("benchmark needs at least one market"));
        }
        if self.durations_h.is_empty() {
            return Err(Error::config("benchmark needs at least one battery duration"));
        }
        if let Some(d) = self.durations_h.iter().find(|d| !DURATIONS_H.contains(d)) {
            return Err(Error::config(format!("battery duration {d} h is not one of 1..=5")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CellOutput {
    pub report: ScenarioReport,
    pub ledger: Ledger,
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub market: Market,
    pub duration_h: u32,
    pub outcome: std::result::Result<CellOutput, String>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkResult {
    pub markets: Vec<Market>,
    pub durations_h: Vec<u32>,
    /// Row-major: markets, then durations.
    pub cells: Vec<Cell>,
}

fn run_cell(spec: &BenchmarkSpec, data: &MarketData, market: Market, duration_h: u32) -> Cell {
    let mut file = spec.template.clone();
    file.market = Some(market);
    file.bess.duration_h = Some(f64::from(duration_h));
    let outcome = file
        .resolve(spec.start, spec.days)
        .and_then(|cfg| run_scenario(&cfg, data))
        .map(|run| CellOutput {
            report: ScenarioReport::from_ledger(&run.ledger),
            ledger: run.ledger,
        })
        .map_err(|e| e.to_string());
    Cell {
        market,
        duration_h,
        outcome,
    }
}

/// Runs every cell. Cells run in parallel, each one sequentially; a failing
/// cell is recorded and does not stop the others.
pub fn run_benchmark(spec: &BenchmarkSpec, data: &MarketData) -> Result<BenchmarkResult> {
    spec.validate()?;
    let pairs: Vec<(Market, u32)> = spec
        .markets
        .iter()
        .flat_map(|&m| spec.durations_h.iter().map(move |&d| (m, d)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    let cells = pool.install(|| pairs.par_iter().map(|&(m, d)| run_cell(spec, data, m, d)).collect());
    Ok(BenchmarkResult {
        markets: spec.markets.clone(),
        durations_h: spec.durations_h.clone(),
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TableValue {
    Value(f64),
    /// Defined quantity that does not exist, e.g. profit per cycle without cycles.
    Undefined,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<TableValue>)>,
    /// Decimals in the aligned text rendering.
    pub decimals: usize,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("market");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (label, values) in &self.rows {
            out.push_str(label);
            for v in values {
                out.push(',');
                match v {
                    TableValue::Value(x) => write!(out, "{x:.6}").expect("write to string"),
                    TableValue::Undefined => {}
                    TableValue::Failed => out.push_str("FAILED"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        let render = |v: &TableValue| match v {
            TableValue::Value(x) => format!("{x:.*}", self.decimals),
            TableValue::Undefined => "n/a".to_string(),
            TableValue::Failed => "FAILED".to_string(),
        };
        let label_width = self.rows.iter().map(|(l, _)| l.len()).chain([6]).max().unwrap_or(6);
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.len()).collect();
        for (_, values) in &self.rows {
            for (w, v) in widths.iter_mut().zip(values) {
                *w = (*w).max(render(v).len());
            }
        }
        let mut out = format!("{}\n", self.title);
        write!(out, "{:<label_width$}", "market").expect("write to string");
        for (c, w) in self.columns.iter().zip(&widths) {
            write!(out, "  {c:>w$}").expect("write to string");
        }
        out.push('\n');
        for (label, values) in &self.rows {
            write!(out, "{label:<label_width$}").expect("write to string");
            for (v, w) in values.iter().zip(&widths) {
                write!(out, "  {:>w$}", render(v)).expect("write to string");
            }
            out.push('\n');
        }
        out
    }
}

impl BenchmarkResult {
    pub fn cell(&self, market: Market, duration_h: u32) -> Option<&Cell> {
        self.cells.iter().find(|c| c.market == market && c.duration_h == duration_h)
    }

    pub fn failures(&self) -> Vec<&Cell> {
        self.cells.iter().filter(|c| c.outcome.is_err()).collect()
    }

    fn columns(&self) -> Vec<String> {
        self.durations_h.iter().map(|d| format!("{d}h")).collect()
    }

    fn row(&self, market: Market, value: impl Fn(&ScenarioReport) -> Option<f64>) -> Vec<TableValue> {
        self.durations_h
            .iter()
            .map(|&d| match self.cell(market, d).map(|c| &c.outcome) {
                Some(Ok(out)) => value(&out.report).map_or(TableValue::Undefined, TableValue::Value),
                _ => TableValue::Failed,
            })
            .collect()
    }

    pub fn profits_table(&self) -> Table {
        Table {
            title: "Total profit (EUR)".into(),
            columns: self.columns(),
            rows: self
                .markets
                .iter()
                .map(|&m| (m.to_string(), self.row(m, |r| Some(r.total_profit))))
                .collect(),
            decimals: 2,
        }
    }

    /// Average daily cycles, with an extra virtual-cycle row per
    /// continuous market.
    pub fn cycles_table(&self) -> Table {
        let mut rows: Vec<(String, Vec<TableValue>)> = self
            .markets
            .iter()
            .map(|&m| (m.to_string(), self.row(m, |r| Some(r.daily_cycles))))
            .collect();
        for &m in self.markets.iter().filter(|m| m.is_continuous()) {
            rows.push((format!("{m}_virtual"), self.row(m, |r| Some(r.daily_virtual_cycles))));
        }
        Table {
            title: "Average daily cycles".into(),
            columns: self.columns(),
            rows,
            decimals: 3,
        }
    }

    pub fn profit_per_cycle_table(&self) -> Table {
        Table {
            title: "Profit per cycle (EUR/cycle)".into(),
            columns: self.columns(),
            rows: self
                .markets
                .iter()
                .map(|&m| (m.to_string(), self.row(m, |r| r.profit_per_cycle)))
                .collect(),
            decimals: 2,
        }
    }

    /// Writes `profits`, `cycles` and `profit_per_cycle` as `.csv` and
    /// `.txt`, plus `reports.json` with every successful cell's report.
    pub fn write_tables(&self, out_dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let mut written = Vec::new();
        for (name, table) in [
            ("profits", self.profits_table()),
            ("cycles", self.cycles_table()),
            ("profit_per_cycle", self.profit_per_cycle_table()),
        ] {
            for (ext, body) in [("csv", table.to_csv()), ("txt", table.to_text())] {
                let path = out_dir.join(format!("{name}.{ext}"));
                std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
                written.push(path);
            }
        }
        let reports: Vec<&ScenarioReport> = self
            .cells
            .iter()
            .filter_map(|c| c.outcome.as_ref().ok().map(|o| &o.report))
            .collect();
        let path = out_dir.join("reports.json");
        let body = serde_json::to_vec_pretty(&reports)?;
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        let start = NaiveDate::from_ymd_opt(2023, 1, 1).unwrap();
        let mut spec = BenchmarkSpec::full(start, 1);
        spec.validate().unwrap();
        spec.markets.clear();
        assert!(spec.validate().is_err());
        let mut spec = BenchmarkSpec::full(start, 1);
        spec.durations_h = vec![6];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn table_rendering_marks_failures() {
        let table = Table {
            title: "t".into(),
            columns: vec!["1h".into(), "2h".into()],
            rows: vec![
                ("DAA".into(), vec![TableValue::Value(1.5), TableValue::Failed]),
                ("CID_F".into(), vec![TableValue::Undefined, TableValue::Value(-2.0)]),
            ],
            decimals: 2,
        };
        assert_eq!(table.to_csv(), "market,1h,2h\nDAA,1.500000,FAILED\nCID_F,,-2.000000\n");
        let text = table.to_text();
        assert!(text.contains("FAILED") && text.contains("n/a") && text.contains("-2.00"));
    }
}

//! Ledger export, reload and per-interval report files.

use bessbt::engine::{run_scenario, Ledger, ScenarioConfig};
use bessbt::market::{gen_synthetic, SyntheticSpec};
use bessbt::model::{BessConfig, Market};
use bessbt::report::write_report;
use chrono::NaiveDate;

fn main() -> bessbt::Result<()> {
    let start = NaiveDate::from_ymd_opt(2023, 1, 9).unwrap();
    let data = gen_synthetic(1, &SyntheticSpec::new(start, 1))?.into_market_data()?;
    let bess = BessConfig::from_discharge_duration(1.0, 1.0, 0.92)?;
    let run = run_scenario(&ScenarioConfig::new(Market::CidForecast, bess, start, 1)?, &data)?;

    let dir = std::env::temp_dir().join("bessbt-ledger-report");
    std::fs::create_dir_all(&dir).map_err(|e| bessbt::Error::Io { path: dir.clone(), source: e })?;
    let path = dir.join("cid_f.ndjson");
    run.ledger.save(&path)?;
    let reloaded = Ledger::load(&path)?;
    assert_eq!(reloaded, run.ledger);

    let files = write_report(&reloaded, &dir, "cid_f")?;
    let series = std::fs::read_to_string(&files.series).expect("series written");
    println!("{} ({} rows)", files.series.display(), series.lines().count() - 1);
    for line in series.lines().take(4) {
        println!("  {line}");
    }
    println!("{}", files.summary.display());
    Ok(())
}

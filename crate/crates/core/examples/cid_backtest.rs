//! Continuous intraday with forecasts versus current clearing prices.

use bessbt::accounting::{cash_from_positions, ScenarioReport};
use bessbt::engine::{run_scenario, ScenarioConfig};
use bessbt::market::{gen_synthetic, SyntheticSpec};
use bessbt::model::{check_schedule, BessConfig, Market};
use chrono::NaiveDate;

fn main() -> bessbt::Result<()> {
    let start = NaiveDate::from_ymd_opt(2023, 9, 4).unwrap();
    let data = gen_synthetic(42, &SyntheticSpec::new(start, 3))?.into_market_data()?;
    let bess = BessConfig::from_discharge_duration(1.0, 1.0, 0.92)?;
    for market in [Market::CidForecast, Market::CidPerfectForesight] {
        let cfg = ScenarioConfig::new(market, bess, start, 3)?;
        let run = run_scenario(&cfg, &data)?;
        check_schedule(&run.ledger.dispatched, 0.0, &bess).expect("feasible dispatch");
        let r = ScenarioReport::from_ledger(&run.ledger);
        println!(
            "{market:<6} profit {:8.2} EUR (from positions {:8.2})  cycles/day {:.3} virtual {:.3}  trades {} skipped {}",
            r.total_profit,
            cash_from_positions(&run.book, &run.ledger),
            r.daily_cycles,
            r.daily_virtual_cycles,
            r.trade_count,
            r.skipped_count
        );
    }
    Ok(())
}

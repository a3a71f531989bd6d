//! Day-ahead, intraday-auction and index scenarios on one synthetic week.

use bessbt::accounting::ScenarioReport;
use bessbt::engine::{run_scenario, ScenarioConfig};
use bessbt::market::{gen_synthetic, SyntheticSpec};
use bessbt::model::{check_schedule, BessConfig, Market};
use chrono::NaiveDate;

fn main() -> bessbt::Result<()> {
    let start = NaiveDate::from_ymd_opt(2023, 9, 4).unwrap();
    let data = gen_synthetic(42, &SyntheticSpec::new(start, 7))?.into_market_data()?;
    let bess = BessConfig::from_discharge_duration(1.0, 2.0, 0.92)?;
    for market in [Market::Daa, Market::Ida, Market::IdFull, Market::Id3, Market::Id1] {
        let cfg = ScenarioConfig::new(market, bess, start, 7)?;
        let run = run_scenario(&cfg, &data)?;
        check_schedule(&run.ledger.dispatched, 0.0, &bess).expect("feasible dispatch");
        let r = ScenarioReport::from_ledger(&run.ledger);
        println!(
            "{market:<6} profit {:8.2} EUR  cycles/day {:.3}  EUR/cycle {:>7}  trades {}",
            r.total_profit,
            r.daily_cycles,
            r.profit_per_cycle.map_or("n/a".into(), |v| format!("{v:.2}")),
            r.trade_count
        );
    }
    Ok(())
}

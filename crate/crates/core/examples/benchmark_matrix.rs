//! A small market x duration matrix rendered as the three result tables.

use bessbt::benchmark::{run_benchmark, BenchmarkSpec};
use bessbt::market::{gen_synthetic, SyntheticSpec};
use chrono::NaiveDate;

fn main() -> bessbt::Result<()> {
    let start = NaiveDate::from_ymd_opt(2023, 5, 1).unwrap();
    let days = 3;
    let data = gen_synthetic(42, &SyntheticSpec::new(start, days))?.into_market_data()?;
    let mut spec = BenchmarkSpec::full(start, days);
    spec.durations_h = vec![1, 3, 5];
    let result = run_benchmark(&spec, &data)?;
    for table in [result.profits_table(), result.cycles_table(), result.profit_per_cycle_table()] {
        println!("{}", table.to_text());
    }
    println!("failed cells: {}", result.failures().len());
    Ok(())
}

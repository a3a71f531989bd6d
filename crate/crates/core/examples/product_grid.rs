//! Delivery-day product grids in market-local time, including DST days.

use bessbt::model::{product_grid, MARKET_ZONE};
use chrono::NaiveDate;

fn main() -> bessbt::Result<()> {
    for (label, day) in [
        ("regular", NaiveDate::from_ymd_opt(2023, 6, 1).unwrap()),
        ("spring forward", NaiveDate::from_ymd_opt(2023, 3, 26).unwrap()),
        ("fall back", NaiveDate::from_ymd_opt(2023, 10, 29).unwrap()),
    ] {
        let hours = product_grid(day, MARKET_ZONE, 60)?;
        let quarters = product_grid(day, MARKET_ZONE, 15)?;
        println!(
            "{day} ({label}): {} hourly, {} quarter-hourly, first {} last {}",
            hours.len(),
            quarters.len(),
            quarters[0],
            quarters[quarters.len() - 1]
        );
    }
    Ok(())
}

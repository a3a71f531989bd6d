//! The two continuous-intraday forecast regimes around the liquidity horizon.

use bessbt::forecast::{cid_forecast, ForecastContext};
use bessbt::market::{gen_synthetic, AuctionMarket, SyntheticSpec};
use chrono::{Duration, NaiveDate};

fn main() -> bessbt::Result<()> {
    let spec = SyntheticSpec::new(NaiveDate::from_ymd_opt(2023, 2, 1).unwrap(), 1);
    let data = gen_synthetic(3, &spec)?.into_market_data()?;
    let ctx = ForecastContext::new(&data.store, &data.auctions);
    let product = *data.store.products().nth(70).expect("product with ticks");
    let ida = data.auctions.get(AuctionMarket::Ida, &product).expect("IDA price");
    println!("{product}: IDA {ida:.2}");
    for minutes in [420, 301, 299, 180, 60, 36] {
        let t = product.delivery_start() - Duration::minutes(minutes);
        let forecast = cid_forecast(&ctx, &product, t)?;
        let clearing = data.store.clearing_price(&product, t);
        println!(
            "lead {minutes:>3} min: forecast {forecast:7.2}  clearing {}",
            clearing.map_or("   none".to_string(), |c| format!("{c:7.2}"))
        );
    }
    Ok(())
}

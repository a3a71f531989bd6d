//! Seeded synthetic market: auction prices, ticks and intraday indices.

use bessbt::market::{gen_synthetic, AuctionMarket, IndexKind, SyntheticSpec};
use chrono::NaiveDate;

fn main() -> bessbt::Result<()> {
    let spec = SyntheticSpec::new(NaiveDate::from_ymd_opt(2023, 6, 5).unwrap(), 2);
    let synthetic = gen_synthetic(7, &spec)?;
    let again = gen_synthetic(7, &spec)?;
    assert_eq!(synthetic.trades_csv(), again.trades_csv(), "same seed, same bytes");

    let data = synthetic.into_market_data()?;
    println!("{} auction prices, {} ticks", data.auctions.len(), data.store.len());
    for product in data.store.products().step_by(16).take(6) {
        let ida = data.auctions.get(AuctionMarket::Ida, product).unwrap_or(f64::NAN);
        println!(
            "{product}: IDA {ida:7.2}  IDFULL {:7.2}  ID3 {:7.2}  ID1 {:7.2}  ticks {}",
            data.indices.get(product, IndexKind::IdFull).unwrap_or(f64::NAN),
            data.indices.get(product, IndexKind::Id3).unwrap_or(f64::NAN),
            data.indices.get(product, IndexKind::Id1).unwrap_or(f64::NAN),
            data.store.trades_of(product).len()
        );
    }
    Ok(())
}

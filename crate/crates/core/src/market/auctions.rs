use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::trades::check_header;
use super::{format_local, parse_timestamp};
use crate::error::{Error, Result};
use crate::model::{Product, ProductDuration};

pub const AUCTIONS_HEADER: [&str; 4] = ["market", "delivery_start", "duration_min", "price_eur_mwh"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AuctionMarket {
    #[serde(rename = "DAA")]
    Daa,
    #[serde(rename = "IDA")]
    Ida,
}

impl AuctionMarket {
    pub fn as_str(self) -> &'static str {
        match self {
            AuctionMarket::Daa => "DAA",
            AuctionMarket::Ida => "IDA",
        }
    }

    /// DAA clears hourly products, IDA quarter-hourly ones.
    pub fn product_duration(self) -> ProductDuration {
        match self {
            AuctionMarket::Daa => ProductDuration::Hour,
            AuctionMarket::Ida => ProductDuration::QuarterHour,
        }
    }
}

impl FromStr for AuctionMarket {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "DAA" => Ok(AuctionMarket::Daa),
            "IDA" => Ok(AuctionMarket::Ida),
            other => Err(format!("unknown auction market {other:?}")),
        }
    }
}

/// Single clearing price per (auction, product).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuctionPrices {
    prices: BTreeMap<(AuctionMarket, Product), f64>,
}

impl AuctionPrices {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, market: AuctionMarket, product: Product, price: f64) -> Result<(), String> {
        if product.duration() != market.product_duration() {
            return Err(format!(
                "{} prices must be for {} min products, got {product}",
                market.as_str(),
                market.product_duration().minutes()
            ));
        }
        if !price.is_finite() {
            return Err(format!("price must be finite, got {price}"));
        }
        if self.prices.insert((market, product), price).is_some() {
            return Err(format!("duplicate {} price for {product}", market.as_str()));
        }
        Ok(())
    }

    pub fn get(&self, market: AuctionMarket, product: &Product) -> Option<f64> {
        self.prices.get(&(market, *product)).copied()
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (AuctionMarket, &Product, f64)> {
        self.prices.iter().map(|((m, p), v)| (*m, p, *v))
    }
}

pub fn read_auctions<R: Read>(reader: R, source_name: &str) -> Result<AuctionPrices> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut out = AuctionPrices::new();
    let mut record = csv::StringRecord::new();
    let mut seen_header = false;
    let parse_err = |line: u64, message: String| Error::Parse {
        source_name: source_name.into(),
        line,
        message,
    };
    loop {
        let more = rdr
            .read_record(&mut record)
            .map_err(|e| parse_err(e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?;
        if !more {
            break;
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if !seen_header {
            check_header(&record, &AUCTIONS_HEADER, source_name)?;
            seen_header = true;
            continue;
        }
        if record.len() != AUCTIONS_HEADER.len() {
            return Err(parse_err(line, format!("expected 4 fields, found {}", record.len())));
        }
        let field = |i: usize| record.get(i).map(str::trim).unwrap_or("");
        let market: AuctionMarket = field(0).parse().map_err(|e| parse_err(line, e))?;
        let start = parse_timestamp(field(1)).map_err(|e| parse_err(line, e))?;
        let minutes: u32 = field(2)
            .parse()
            .map_err(|_| parse_err(line, format!("invalid duration_min {:?}", field(2))))?;
        let price: f64 = field(3)
            .parse()
            .map_err(|_| parse_err(line, format!("invalid price {:?}", field(3))))?;
        let invalid = |message: String| Error::Validation {
            source_name: source_name.into(),
            line,
            message,
        };
        let duration = ProductDuration::from_minutes(minutes).map_err(|e| invalid(e.to_string()))?;
        let product = Product::new(start, duration).map_err(|e| invalid(e.to_string()))?;
        out.insert(market, product, price).map_err(invalid)?;
    }
    if !seen_header {
        return Err(parse_err(1, "missing header".into()));
    }
    Ok(out)
}

pub fn ingest_auctions(path: impl AsRef<Path>) -> Result<AuctionPrices> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_auctions(BufReader::new(file), &path.display().to_string())
}

/// Writes DAA rows then IDA rows, each in delivery order.
pub fn write_auctions<W: Write>(prices: &AuctionPrices, writer: W) -> std::io::Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "{}", AUCTIONS_HEADER.join(","))?;
    for (market, product, price) in prices.iter() {
        writeln!(
            w,
            "{},{},{},{}",
            market.as_str(),
            format_local(product.delivery_start()),
            product.duration().minutes(),
            price
        )?;
    }
    w.flush()
}

use std::collections::BTreeMap;
use std::io::{BufWriter, Write};

use serde::{Deserialize, Serialize};

use super::{format_local, IndexKind, TradeStore};
use crate::model::Product;

pub const INDICES_HEADER: [&str; 5] = ["delivery_start", "duration_min", "id1", "idfull", "id3"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IndexValues {
    pub id1: Option<f64>,
    pub id3: Option<f64>,
    pub idfull: Option<f64>,
}

impl IndexValues {
    pub fn get(&self, kind: IndexKind) -> Option<f64> {
        match kind {
            IndexKind::Id1 => self.id1,
            IndexKind::Id3 => self.id3,
            IndexKind::IdFull => self.idfull,
        }
    }
}

/// ID1/ID3/IDFULL per product.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IndexTable {
    values: BTreeMap<Product, IndexValues>,
}

impl IndexTable {
    pub fn get(&self, product: &Product, kind: IndexKind) -> Option<f64> {
        self.values.get(product).and_then(|v| v.get(kind))
    }

    pub fn insert(&mut self, product: Product, values: IndexValues) {
        self.values.insert(product, values);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Product, &IndexValues)> {
        self.values.iter()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn compute_indices(store: &TradeStore) -> IndexTable {
    let mut table = IndexTable::default();
    for product in store.products() {
        table.insert(
            *product,
            IndexValues {
                id1: store.index_price(product, IndexKind::Id1),
                id3: store.index_price(product, IndexKind::Id3),
                idfull: store.index_price(product, IndexKind::IdFull),
            },
        );
    }
    table
}

/// Index export; absent values are written as empty fields.
pub fn write_indices<W: Write>(table: &IndexTable, writer: W) -> std::io::Result<()> {
    let mut w = BufWriter::new(writer);
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    writeln!(w, "{}", INDICES_HEADER.join(","))?;
    for (product, v) in table.iter() {
        writeln!(
            w,
            "{},{},{},{},{}",
            format_local(product.delivery_start()),
            product.duration().minutes(),
            opt(v.id1),
            opt(v.idfull),
            opt(v.id3)
        )?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::Trade;
    use crate::model::ProductDuration;
    use chrono::{Duration, TimeZone, Utc};

    #[test]
    fn export_leaves_absent_fields_empty() {
        let p = Product::new(Utc.with_ymd_and_hms(2023, 6, 1, 13, 0, 0).unwrap(), ProductDuration::QuarterHour).unwrap();
        let store = TradeStore::from_trades(vec![Trade {
            product: p,
            exec_time: p.delivery_start() - Duration::hours(2),
            price: 70.0,
            volume: 1.0,
        }])
        .unwrap();
        let table = compute_indices(&store);
        let mut buf = Vec::new();
        write_indices(&table, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "delivery_start,duration_min,id1,idfull,id3\n2023-06-01T15:00:00+02:00,15,,70,70\n"
        );
    }
}

use chrono::{DateTime, Duration, Utc};

use super::ScenarioConfig;
use crate::model::{Product, MARKET_ZONE};

/// Products traded (`trade`) and optimized (`opt`) at one loop instant.
/// `trade` is always a prefix of `opt`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectedSets {
    pub trade: Vec<Product>,
    pub opt: Vec<Product>,
    /// Fewer products than configured were available.
    pub truncated: bool,
}

impl SelectedSets {
    pub fn is_subset(&self) -> bool {
        self.trade.iter().all(|p| self.opt.contains(p))
    }
}

/// Picks the trade and optimization sets at `t` from `universe` (sorted by
/// delivery start, already-frozen products removed).
///
/// Auction-like markets: all products of the next local delivery day are
/// traded and the following days up to the look-ahead are optimized too.
/// Continuous intraday: products with at least `cid.min_lead` lead time
/// and starting within `cid.horizon` of the first such product, at most
/// `n_opt` of them; the first `n_trade` are traded.
pub fn select_sets(cfg: &ScenarioConfig, t: DateTime<Utc>, universe: &[Product]) -> SelectedSets {
    if cfg.market.is_continuous() {
        let first = universe.partition_point(|p| p.lead_time(t) < cfg.cid.min_lead);
        let eligible = &universe[first..];
        let opt: Vec<Product> = match eligible.first() {
            None => Vec::new(),
            Some(head) => {
                let limit = head.delivery_start() + cfg.cid.horizon;
                eligible
                    .iter()
                    .take_while(|p| p.delivery_start() < limit)
                    .take(cfg.n_opt)
                    .copied()
                    .collect()
            }
        };
        let trade: Vec<Product> = opt.iter().take(cfg.n_trade).copied().collect();
        let truncated = trade.len() < cfg.n_trade;
        return SelectedSets { trade, opt, truncated };
    }

    let day = t.with_timezone(&MARKET_ZONE).date_naive() + Duration::days(1);
    let last = day + Duration::days(cfg.lookahead_days() as i64);
    let opt: Vec<Product> = universe
        .iter()
        .filter(|p| {
            let d = p.delivery_day(MARKET_ZONE);
            d >= day && d < last
        })
        .copied()
        .collect();
    let trade: Vec<Product> = opt.iter().take_while(|p| p.delivery_day(MARKET_ZONE) == day).copied().collect();
    let days_present = opt
        .iter()
        .map(|p| p.delivery_day(MARKET_ZONE))
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    let truncated = trade.is_empty() || days_present < cfg.lookahead_days();
    SelectedSets { trade, opt, truncated }
}

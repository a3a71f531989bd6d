use chrono::{DateTime, Duration, Utc};

use super::config::auction_instant;
use super::ledger::{Ledger, LedgerMeta, SkipRecord, TradeRecord, Venue};
use super::select::select_sets;
use super::ScenarioConfig;
use crate::error::{Error, Result};
use crate::forecast::{auction_forecast, cid_forecast, ForecastContext};
use crate::market::MarketData;
use crate::model::{product_grid, BessConfig, Market, PositionBook, PriceSource, Product, ScheduleEntry, FEASIBILITY_TOL, MARKET_ZONE};
use crate::optimizer::{solve_window, Mode, WindowDump, WindowProblem, WindowSolution};

/// Position changes at or below this size are not traded.
pub const MIN_TRADE_MW: f64 = 1e-10;

/// Output of one scenario run.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub ledger: Ledger,
    pub book: PositionBook,
    /// The last window solved, for debugging.
    pub last_window: Option<WindowDump>,
}

/// Runs the rolling-window loop for one scenario.
pub fn run_scenario(cfg: &ScenarioConfig, data: &MarketData) -> Result<ScenarioRun> {
    cfg.validate()?;
    if cfg.market.is_continuous() {
        run_continuous(cfg, data)
    } else {
        run_auction(cfg, data)
    }
}

fn advance_energy(bess: &BessConfig, e: f64, entry_buy: f64, entry_sell: f64, hours: f64) -> f64 {
    let next = bess.next_energy(e, entry_buy, entry_sell, hours);
    if next < 0.0 && next > -FEASIBILITY_TOL {
        0.0
    } else if next > bess.e_max() && next < bess.e_max() + FEASIBILITY_TOL {
        bess.e_max()
    } else {
        next
    }
}

fn entry_for(bess: &BessConfig, product: Product, net_buy: f64, e: &mut f64) -> ScheduleEntry {
    let (buy, sell) = if net_buy >= 0.0 { (net_buy, 0.0) } else { (0.0, -net_buy) };
    *e = advance_energy(bess, *e, buy, sell, product.hours());
    ScheduleEntry {
        product,
        buy_mw: buy,
        sell_mw: sell,
        energy_end_mwh: *e,
    }
}

fn solve_or_abort(prob: &WindowProblem, mode: Mode, at: DateTime<Utc>) -> Result<WindowSolution> {
    let sol = solve_window(prob, mode)?;
    if !sol.is_optimal() {
        return Err(Error::Infeasible {
            at,
            reason: "no feasible schedule for the window".into(),
            dump: Box::new(WindowDump {
                at: Some(at),
                mode,
                problem: prob.clone(),
                solution: Some(sol),
            }),
        });
    }
    Ok(sol)
}

fn is_index(source: PriceSource) -> bool {
    matches!(source, PriceSource::Id1 | PriceSource::Id3 | PriceSource::IdFull)
}

/// Look-ahead days enter the window only when their prices are known:
/// every product for auctions, at least one product for indices.
fn day_available(data: &MarketData, source: PriceSource, products: &[Product]) -> bool {
    let known = |p: &Product| auction_forecast(&data.auctions, &data.indices, source, p).is_ok();
    if is_index(source) {
        products.iter().any(known)
    } else {
        !products.is_empty() && products.iter().all(known)
    }
}

fn run_auction(cfg: &ScenarioConfig, data: &MarketData) -> Result<ScenarioRun> {
    let source = cfg.market.price_source().expect("auction-like market");
    let minutes = cfg.market.product_duration().minutes();
    let venue = Venue::from(cfg.market);
    let bess = cfg.bess;

    let mut book = PositionBook::new();
    let mut trades = Vec::new();
    let mut dispatched: Vec<ScheduleEntry> = Vec::new();
    let mut e = 0.0;
    let mut windows = 0;
    let mut truncated = 0;
    let mut last_window = None;

    for day in cfg.delivery_days() {
        let t = auction_instant(cfg.market, day)?;
        let mut universe = product_grid(day, MARKET_ZONE, minutes)?;
        for k in 1..cfg.lookahead_days() {
            let grid = product_grid(day + Duration::days(k as i64), MARKET_ZONE, minutes)?;
            if !day_available(data, source, &grid) {
                break;
            }
            universe.extend(grid);
        }
        let sets = select_sets(cfg, t, &universe);
        assert!(sets.is_subset(), "trade set must be part of the optimization set");
        truncated += usize::from(sets.truncated);

        let mut forecasts = Vec::with_capacity(sets.opt.len());
        let mut pinned = Vec::with_capacity(sets.opt.len());
        for p in &sets.opt {
            match auction_forecast(&data.auctions, &data.indices, source, p) {
                Ok(price) => {
                    forecasts.push(price);
                    pinned.push(None);
                }
                // no index: the product cannot be traded
                Err(Error::DataGap { .. }) if is_index(source) => {
                    forecasts.push(0.0);
                    pinned.push(Some(0.0));
                }
                Err(err) => return Err(err),
            }
        }
        let prefix_start = dispatched.len().saturating_sub(cfg.n_trade);
        let prob = WindowProblem::new(sets.opt.clone(), forecasts, bess, e)
            .with_pinned(pinned)
            .with_frozen_prefix(dispatched[prefix_start..].to_vec());
        let sol = solve_or_abort(&prob, Mode::Auction, t)?;
        windows += 1;

        for (i, p) in sets.trade.iter().enumerate() {
            let net = sol.schedule[i].net_buy_mw();
            if net != 0.0 {
                trades.push(TradeRecord {
                    exec_time: t,
                    product: *p,
                    volume_mw: net,
                    price: prob.forecasts[i],
                    market: venue,
                });
                book.commit(*p, t, net).map_err(Error::config)?;
            }
            book.freeze(*p, t);
            dispatched.push(entry_for(&bess, *p, net, &mut e));
        }
        last_window = Some(WindowDump {
            at: Some(t),
            mode: Mode::Auction,
            problem: prob,
            solution: Some(sol),
        });
    }

    Ok(ScenarioRun {
        ledger: Ledger {
            meta: LedgerMeta {
                config: cfg.clone(),
                residual_energy_mwh: e,
                windows_solved: windows,
                truncated_windows: truncated,
            },
            trades,
            dispatched,
            skipped: Vec::new(),
        },
        book,
        last_window,
    })
}

fn run_continuous(cfg: &ScenarioConfig, data: &MarketData) -> Result<ScenarioRun> {
    let bess = cfg.bess;
    let store = &data.store;
    let ctx = ForecastContext::new(store, &data.auctions)
        .with_liquidity_horizon(cfg.cid.liquidity_horizon)?
        .with_forecast_trades(cfg.cid.forecast_trades)?;
    let perfect = cfg.market == Market::CidPerfectForesight;
    let venue = Venue::from(cfg.market);

    let mut universe = Vec::new();
    for day in cfg.delivery_days() {
        universe.extend(product_grid(day, MARKET_ZONE, 15)?);
    }

    let mut book = PositionBook::new();
    let mut trades = Vec::new();
    let mut skipped = Vec::new();
    let mut dispatched: Vec<ScheduleEntry> = Vec::with_capacity(universe.len());
    let mut e = 0.0;
    let mut windows = 0;
    let mut truncated = 0;
    let mut last_window = None;
    let mut next = 0;
    let mut t = cfg.t0;
    let mut t_prev: Option<DateTime<Utc>> = None;

    while next < universe.len() {
        // products leaving eligibility are frozen at the last instant they were eligible
        while next < universe.len() && universe[next].lead_time(t) < cfg.cid.min_lead {
            let p = universe[next];
            book.freeze(p, t_prev.unwrap_or(t));
            dispatched.push(entry_for(&bess, p, book.current(&p), &mut e));
            next += 1;
        }
        if next == universe.len() {
            break;
        }

        let sets = select_sets(cfg, t, &universe[next..]);
        assert!(sets.is_subset(), "trade set must be part of the optimization set");
        truncated += usize::from(sets.truncated);

        let mut forecasts = Vec::with_capacity(sets.opt.len());
        for p in &sets.opt {
            let realized = if perfect { store.clearing_price(p, t) } else { None };
            forecasts.push(match realized {
                Some(price) => price,
                None => cid_forecast(&ctx, p, t)?,
            });
        }
        let prev: Vec<f64> = sets.opt.iter().map(|p| book.current(p)).collect();
        let prefix_start = dispatched.partition_point(|d| d.product.delivery_end() <= t);
        let mut prob = WindowProblem::new(sets.opt.clone(), forecasts, bess, e)
            .with_prev_position(prev.clone())
            .with_frozen_prefix(dispatched[prefix_start..].to_vec());
        let mut sol = solve_or_abort(&prob, Mode::Cid, t)?;
        windows += 1;

        let prices: Vec<Option<f64>> = sets.trade.iter().map(|p| store.clearing_price(p, t)).collect();
        // illiquid products keep their position; re-solve around them
        loop {
            let mut changed = false;
            for (i, p) in sets.trade.iter().enumerate() {
                let delta = sol.schedule[i].net_buy_mw() - prev[i];
                if delta.abs() > MIN_TRADE_MW && prices[i].is_none() && prob.pinned[i].is_none() {
                    skipped.push(SkipRecord {
                        exec_time: t,
                        product: *p,
                        intended_mw: delta,
                    });
                    prob.pinned[i] = Some(prev[i]);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            sol = solve_or_abort(&prob, Mode::Cid, t)?;
        }

        for (i, p) in sets.trade.iter().enumerate() {
            let target = sol.schedule[i].net_buy_mw();
            let delta = target - prev[i];
            if delta.abs() <= MIN_TRADE_MW {
                continue;
            }
            let price = prices[i].expect("illiquid products are pinned");
            trades.push(TradeRecord {
                exec_time: t,
                product: *p,
                volume_mw: delta,
                price,
                market: venue,
            });
            book.commit(*p, t, target).map_err(Error::config)?;
        }
        last_window = Some((t, prob, sol));
        t_prev = Some(t);
        t += cfg.dt_trade;
    }

    Ok(ScenarioRun {
        ledger: Ledger {
            meta: LedgerMeta {
                config: cfg.clone(),
                residual_energy_mwh: e,
                windows_solved: windows,
                truncated_windows: truncated,
            },
            trades,
            dispatched,
            skipped,
        },
        book,
        last_window: last_window.map(|(at, problem, solution)| WindowDump {
            at: Some(at),
            mode: Mode::Cid,
            problem,
            solution: Some(solution),
        }),
    })
}

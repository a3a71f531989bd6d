//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero when any
//! criterion fails.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hasher;
use std::io::Write;
use std::time::{Duration as StdDuration, Instant};

use bessbt::accounting::{cycles, profit_per_cycle};
use bessbt::benchmark::{run_benchmark, BenchmarkResult, BenchmarkSpec, DURATIONS_H};
use bessbt::engine::{run_scenario, Ledger, ScenarioConfig};
use bessbt::forecast::{cid_forecast, ForecastContext};
use bessbt::market::{
    compute_indices, gen_synthetic, AuctionMarket, AuctionPrices, IndexKind, MarketData, SyntheticSpec, Trade, TradeStore,
};
use bessbt::model::{check_schedule, BessConfig, Market, Product, ProductDuration, ScheduleEntry};
use bessbt::optimizer::{brute_force_oracle, solve_relaxation, solve_window, Mode, WindowProblem};
use chrono::{DateTime, Duration, NaiveDate, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const OBJECTIVE_TOL: f64 = 1e-6;
const FEASIBILITY_TOL: f64 = 1e-9;
const CYCLE_TOL: f64 = 1e-9;
const POSITION_TOL: f64 = 1e-9;
const INDEX_TOL: f64 = 1e-9;
const PUBLISHED_REL_TOL: f64 = 0.02;
const ORACLE_BUDGET: StdDuration = StdDuration::from_secs(30);
const MATRIX_BUDGET: StdDuration = StdDuration::from_secs(600);
const SEED: u64 = 42;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn hours_from(t0: DateTime<Utc>, n: usize) -> Vec<Product> {
    (0..n)
        .map(|i| Product::new(t0 + Duration::hours(i as i64), ProductDuration::Hour).unwrap())
        .collect()
}

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2023, 6, 1, 0, 0, 0).unwrap()
}

fn feasible_binary(schedule: &[ScheduleEntry], e0: f64, bess: &BessConfig) -> Result<(), String> {
    check_schedule(schedule, e0, bess)?;
    for s in schedule {
        if s.buy_mw > FEASIBILITY_TOL && s.sell_mw > FEASIBILITY_TOL {
            return Err(format!("{} buys and sells at once", s.product));
        }
    }
    Ok(())
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let started = Instant::now();
    let mut worst = 0.0f64;
    for case in 0..500 {
        let n = rng.gen_range(1..=8);
        let eta_rt: f64 = [0.8, 0.92, 1.0][rng.gen_range(0..3)];
        let split: f64 = rng.gen_range(0.2..0.8);
        let e_max = rng.gen_range(0.5..4.0);
        let p_buy = rng.gen_range(0.2..2.0);
        let p_sell = rng.gen_range(0.2..2.0);
        let bess = BessConfig::new(e_max, p_buy, p_sell, eta_rt.powf(split), eta_rt.powf(1.0 - split)).unwrap();
        let prices: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..200.0)).collect();
        let e0 = rng.gen_range(0.0..=e_max);
        let mode = if case % 2 == 0 { Mode::Auction } else { Mode::Cid };
        let mut prob = WindowProblem::new(hours_from(t0(), n), prices, bess, e0);
        if mode == Mode::Cid {
            let prev = (0..n).map(|_| rng.gen_range(-p_sell..p_buy)).collect();
            prob = prob.with_prev_position(prev);
        }
        let exact = solve_window(&prob, mode).map_err(|e| format!("case {case}: {e}"))?;
        let oracle = brute_force_oracle(&prob, mode).map_err(|e| format!("case {case}: {e}"))?;
        ensure(exact.is_optimal() == oracle.is_optimal(), || format!("case {case}: status differs"))?;
        if exact.is_optimal() {
            let gap = (exact.objective - oracle.objective).abs();
            worst = worst.max(gap);
            ensure(gap <= OBJECTIVE_TOL, || {
                format!("case {case}: {} vs oracle {}", exact.objective, oracle.objective)
            })?;
            feasible_binary(&exact.schedule, e0, &bess).map_err(|e| format!("case {case}: {e}"))?;
        }
    }
    let elapsed = started.elapsed();
    ensure(elapsed < ORACLE_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("500 instances, worst gap {worst:.2e}, {elapsed:.2?}"))
}

/// Maximizes `c·x` over a 2-D polygon `{x : a·x <= b}` by enumerating the
/// intersections of every pair of constraint lines.
fn polygon_max(c: [f64; 2], rows: &[([f64; 2], f64)]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for (i, (a1, b1)) in rows.iter().enumerate() {
        for (a2, b2) in &rows[i + 1..] {
            let det = a1[0] * a2[1] - a1[1] * a2[0];
            if det.abs() < 1e-12 {
                continue;
            }
            let x = [(b1 * a2[1] - b2 * a1[1]) / det, (a1[0] * b2 - a2[0] * b1) / det];
            if rows.iter().all(|(a, b)| a[0] * x[0] + a[1] * x[1] <= b + 1e-12) {
                let v = c[0] * x[0] + c[1] * x[1];
                best = Some(best.map_or(v, |w: f64| w.max(v)));
            }
        }
    }
    best
}

fn binary_necessity() -> Outcome {
    let (price, e_max, p, eta_c, eta_d, e0) = (-50.0, 1.0, 1.0, 0.5, 0.5, 1.0);
    // x = (buy, sell) over one hour
    let c = [-price, price];
    let mut rows = vec![
        ([-1.0, 0.0], 0.0),
        ([1.0, 0.0], p),
        ([0.0, -1.0], 0.0),
        ([0.0, 1.0], p),
        ([eta_c, -1.0 / eta_d], e_max - e0),
        ([-eta_c, 1.0 / eta_d], e0),
    ];
    let relaxed = polygon_max(c, &rows).ok_or("empty relaxation")?;
    rows.push(([0.0, 1.0], 0.0));
    let buy_only = polygon_max(c, &rows).ok_or("empty buy-only")?;
    rows.pop();
    rows.push(([1.0, 0.0], 0.0));
    let sell_only = polygon_max(c, &rows).ok_or("empty sell-only")?;
    let exact_oracle = buy_only.max(sell_only);

    let bess = BessConfig::new(e_max, p, p, eta_c, eta_d).unwrap();
    let prob = WindowProblem::new(hours_from(t0(), 1), vec![price], bess, e0);
    let milp = solve_window(&prob, Mode::Auction).map_err(|e| e.to_string())?;
    let lp = solve_relaxation(&prob, Mode::Auction).map_err(|e| e.to_string())?;
    ensure((exact_oracle - 0.0).abs() <= OBJECTIVE_TOL && (relaxed - 37.5).abs() <= OBJECTIVE_TOL, || {
        format!("oracle gives {exact_oracle} / {relaxed}")
    })?;
    ensure((milp.objective - exact_oracle).abs() <= OBJECTIVE_TOL, || format!("MILP {}", milp.objective))?;
    ensure((lp.objective - relaxed).abs() <= OBJECTIVE_TOL, || format!("relaxation {}", lp.objective))?;
    Ok(format!("MILP {:.6}, relaxation {:.6}", milp.objective, lp.objective))
}

fn hand_checked_arbitrage() -> Outcome {
    let eta = 0.92f64.sqrt();
    let bess = BessConfig::new(1.0, 1.0, 1.0, eta, eta).unwrap();
    // charge a full hour at 10, then discharge everything stored at 100
    let bought = 1.0f64.min(1.0 / eta);
    let sold = (bought * eta * eta).min(1.0);
    let expected = 100.0 * sold - 10.0 * bought;
    let prob = WindowProblem::new(hours_from(t0(), 2), vec![10.0, 100.0], bess, 0.0);
    let sol = solve_window(&prob, Mode::Auction).map_err(|e| e.to_string())?;
    ensure((expected - 82.0).abs() <= OBJECTIVE_TOL, || format!("hand value {expected}"))?;
    ensure((sol.objective - expected).abs() <= OBJECTIVE_TOL, || format!("objective {}", sol.objective))?;
    Ok(format!("objective {:.6}", sol.objective))
}

fn cycle_normalization() -> Outcome {
    let mut seen = Vec::new();
    for eta_rt in [0.8, 0.92, 1.0] {
        let eta = f64::sqrt(eta_rt);
        let e_max = 2.0;
        let bess = BessConfig::new(e_max, 4.0, 4.0, eta, eta).unwrap();
        let [p1, p2] = [0, 1].map(|i| hours_from(t0(), 2)[i]);
        let schedule = vec![
            ScheduleEntry {
                product: p1,
                buy_mw: e_max / eta,
                sell_mw: 0.0,
                energy_end_mwh: e_max,
            },
            ScheduleEntry {
                product: p2,
                buy_mw: 0.0,
                sell_mw: e_max * eta,
                energy_end_mwh: 0.0,
            },
        ];
        check_schedule(&schedule, 0.0, &bess)?;
        let c = cycles(&schedule, &bess);
        ensure((c - 1.0).abs() <= CYCLE_TOL, || format!("eta_rt {eta_rt}: {c}"))?;
        seen.push(format!("{eta_rt}: {c:.12}"));
    }
    Ok(seen.join(", "))
}

fn forecast_regime() -> Outcome {
    let product = Product::new(Utc.with_ymd_and_hms(2023, 6, 1, 18, 0, 0).unwrap(), ProductDuration::QuarterHour).unwrap();
    let start = product.delivery_start();
    let ticks = [(420, 80.0), (400, 91.5), (360, 87.25), (330, 95.0), (310, 101.0), (302, 99.5)];
    let trades: Vec<Trade> = ticks
        .iter()
        .map(|&(m, price)| Trade {
            product,
            exec_time: start - Duration::minutes(m),
            price,
            volume: 1.0,
        })
        .collect();
    let store = TradeStore::from_trades(trades).map_err(|e| e.to_string())?;
    let mut auctions = AuctionPrices::new();
    let ida = 73.0;
    auctions.insert(AuctionMarket::Ida, product, ida)?;
    let ctx = ForecastContext::new(&store, &auctions);

    let five_h = Duration::hours(5);
    let above = cid_forecast(&ctx, &product, start - five_h - Duration::seconds(1)).map_err(|e| e.to_string())?;
    let below = cid_forecast(&ctx, &product, start - five_h + Duration::seconds(1)).map_err(|e| e.to_string())?;
    let last_four = ticks[ticks.len() - 4..].iter().map(|t| t.1).sum::<f64>() / 4.0;
    ensure(above == ida, || format!("lead 5h+1s: {above}, IDA {ida}"))?;
    ensure(below == last_four, || format!("lead 5h-1s: {below}, last four {last_four}"))?;
    Ok(format!("5h+1s -> {above} (IDA), 5h-1s -> {below} (last four)"))
}

/// `std::io::Write` sink that only hashes what it receives.
struct HashingWriter(std::collections::hash_map::DefaultHasher);

impl HashingWriter {
    fn new() -> Self {
        Self(std::collections::hash_map::DefaultHasher::new())
    }
}

impl Write for HashingWriter {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.write(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

fn ledger_hash(ledger: &Ledger) -> u64 {
    let mut w = HashingWriter::new();
    ledger.write_ndjson(&mut w).expect("hashing never fails");
    w.0.finish()
}

fn year_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2023, 1, 1).unwrap()
}

const YEAR_DAYS: u32 = 365;

struct Year {
    data: MarketData,
    data_hash: u64,
    result: BenchmarkResult,
    elapsed: StdDuration,
}

fn synthetic_year() -> bessbt::Result<(MarketData, u64)> {
    let synthetic = gen_synthetic(SEED, &SyntheticSpec::new(year_start(), YEAR_DAYS))?;
    let mut w = HashingWriter::new();
    w.write_all(&synthetic.auctions_csv()).expect("hashing");
    w.write_all(&synthetic.trades_csv()).expect("hashing");
    let hash = w.0.finish();
    Ok((synthetic.into_market_data()?, hash))
}

fn run_year() -> Result<Year, String> {
    let (data, data_hash) = synthetic_year().map_err(|e| e.to_string())?;
    let started = Instant::now();
    let result = run_benchmark(&BenchmarkSpec::full(year_start(), YEAR_DAYS), &data).map_err(|e| e.to_string())?;
    Ok(Year {
        data,
        data_hash,
        result,
        elapsed: started.elapsed(),
    })
}

fn cells(year: &Year) -> Result<Vec<(Market, u32, &bessbt::benchmark::CellOutput)>, String> {
    year.result
        .cells
        .iter()
        .map(|c| match &c.outcome {
            Ok(out) => Ok((c.market, c.duration_h, out)),
            Err(e) => Err(format!("{} {}h failed: {e}", c.market, c.duration_h)),
        })
        .collect()
}

fn end_to_end(year: &Result<Year, String>) -> Outcome {
    let year = year.as_ref().map_err(Clone::clone)?;
    let cells = cells(year)?;
    ensure(cells.len() == 35, || format!("{} cells", cells.len()))?;
    let mut worst = 0.0f64;
    for (market, d, out) in &cells {
        let ledger = &out.ledger;
        let bess = &ledger.meta.config.bess;
        check_schedule(&ledger.dispatched, 0.0, bess).map_err(|e| format!("{market} {d}h: {e}"))?;
        let traded = ledger.traded_positions();
        for entry in &ledger.dispatched {
            let sum = traded.get(&entry.product).copied().unwrap_or(0.0);
            let gap = (sum - entry.net_buy_mw()).abs();
            worst = worst.max(gap);
            ensure(gap <= POSITION_TOL, || format!("{market} {d}h {}: traded {sum}, dispatched {}", entry.product, entry.net_buy_mw()))?;
        }
        ensure(traded.keys().all(|p| ledger.dispatched.iter().any(|e| e.product == *p)), || {
            format!("{market} {d}h traded an undispatched product")
        })?;
    }
    ensure(year.elapsed < MATRIX_BUDGET, || format!("matrix took {:.1?}", year.elapsed))?;

    let (_, rerun_hash) = synthetic_year().map_err(|e| e.to_string())?;
    ensure(rerun_hash == year.data_hash, || "synthetic data differs between runs".into())?;
    let mut spec = BenchmarkSpec::full(year_start(), YEAR_DAYS);
    spec.jobs = 1;
    let rerun = run_benchmark(&spec, &year.data).map_err(|e| e.to_string())?;
    for (cell, again) in year.result.cells.iter().zip(&rerun.cells) {
        let (Ok(a), Ok(b)) = (&cell.outcome, &again.outcome) else {
            return Err(format!("{} {}h failed on rerun", cell.market, cell.duration_h));
        };
        ensure(ledger_hash(&a.ledger) == ledger_hash(&b.ledger), || {
            format!("{} {}h ledger differs on rerun", cell.market, cell.duration_h)
        })?;
    }
    Ok(format!(
        "35 cells feasible, worst position gap {worst:.1e} MW, matrix {:.1?}, rerun identical",
        year.elapsed
    ))
}

/// Synthetic market in which every tick of a product trades at its integer
/// IDA price, so the forecast and the clearing price always agree.
fn truthful_market() -> bessbt::Result<MarketData> {
    let synthetic = gen_synthetic(SEED, &SyntheticSpec::new(NaiveDate::from_ymd_opt(2023, 3, 6).unwrap(), 3))?;
    let mut auctions = AuctionPrices::new();
    for (market, product, price) in synthetic.auctions.iter() {
        auctions.insert(market, *product, price.round()).map_err(|e| bessbt::Error::Config(e))?;
    }
    let trades: Vec<Trade> = synthetic
        .trades
        .iter()
        .map(|t| Trade {
            price: auctions.get(AuctionMarket::Ida, &t.product).expect("IDA for every traded product"),
            ..*t
        })
        .collect();
    Ok(MarketData::new(TradeStore::from_trades(trades)?, auctions))
}

fn truthful_forecasts() -> Outcome {
    let data = truthful_market().map_err(|e| e.to_string())?;
    let start = NaiveDate::from_ymd_opt(2023, 3, 6).unwrap();
    let bess = BessConfig::from_discharge_duration(1.0, 1.0, 0.92).unwrap();
    let run = |market| {
        ScenarioConfig::new(market, bess, start, 3)
            .and_then(|cfg| run_scenario(&cfg, &data))
            .map_err(|e| e.to_string())
    };
    let f = run(Market::CidForecast)?.ledger;
    let pf = run(Market::CidPerfectForesight)?.ledger;
    ensure(!f.trades.is_empty(), || "no trades".into())?;
    ensure(f.trades == pf.trades, || "trades differ".into())?;
    ensure(f.dispatched == pf.dispatched, || "dispatch differs".into())?;
    ensure(f.skipped == pf.skipped, || "skips differ".into())?;
    Ok(format!("{} trades, {} dispatched, identical", f.trades.len(), f.dispatched.len()))
}

fn index_oracle() -> Outcome {
    let synthetic = gen_synthetic(SEED, &SyntheticSpec::new(NaiveDate::from_ymd_opt(2023, 8, 14).unwrap(), 1))
        .map_err(|e| e.to_string())?;
    let table = compute_indices(&synthetic.store().map_err(|e| e.to_string())?);
    let mut by_product: BTreeMap<Product, Vec<&Trade>> = BTreeMap::new();
    for t in &synthetic.trades {
        by_product.entry(t.product).or_default().push(t);
    }
    let windows = [(IndexKind::Id1, Some(60)), (IndexKind::Id3, Some(180)), (IndexKind::IdFull, None)];
    let mut checked = 0;
    let mut worst = 0.0f64;
    for (product, trades) in &by_product {
        let start = product.delivery_start();
        for (kind, minutes) in windows {
            let from = minutes.map(|m| start - Duration::minutes(m));
            let (mut pv, mut v) = (0.0, 0.0);
            for t in trades {
                if t.exec_time < start && from.map_or(true, |f| t.exec_time >= f) {
                    pv += t.price * t.volume;
                    v += t.volume;
                }
            }
            let expected = (v > 0.0).then(|| pv / v);
            let got = table.get(product, kind);
            match (expected, got) {
                (None, None) => {}
                (Some(e), Some(g)) => {
                    worst = worst.max((e - g).abs());
                    ensure((e - g).abs() <= INDEX_TOL, || format!("{product} {kind:?}: {g} vs {e}"))?;
                }
                _ => return Err(format!("{product} {kind:?}: {got:?} vs {expected:?}")),
            }
            checked += 1;
        }
    }
    ensure(by_product.len() == 96, || format!("{} products", by_product.len()))?;
    Ok(format!("{checked} index values, worst gap {worst:.1e}"))
}

fn profit_per_cycle_arithmetic(year: &Result<Year, String>) -> Outcome {
    let year = year.as_ref().map_err(Clone::clone)?;
    for (market, d, out) in cells(year)? {
        let r = &out.report;
        let expected = (r.daily_cycles > 0.0).then(|| r.total_profit / (r.daily_cycles * f64::from(r.days)));
        ensure(r.profit_per_cycle == expected, || {
            format!("{market} {d}h: {:?} vs {expected:?}", r.profit_per_cycle)
        })?;
    }
    let (profit, daily, days, published) = (40_590.0, 2.00, 365, 55.71);
    let ppc = profit_per_cycle(profit, daily, days).ok_or("no cycles")?;
    let rel = (ppc - published).abs() / published;
    ensure(rel <= PUBLISHED_REL_TOL, || format!("{ppc:.2} vs {published}"))?;
    Ok(format!("35 cells exact; {ppc:.2} vs published {published} ({:.2}%)", rel * 100.0))
}

fn virtual_cycles(year: &Result<Year, String>) -> Outcome {
    let year = year.as_ref().map_err(Clone::clone)?;
    let mut min_margin = f64::INFINITY;
    for (market, d, out) in cells(year)? {
        for row in &out.report.per_day {
            if market.is_continuous() {
                min_margin = min_margin.min(row.virtual_cycles - row.cycles);
                ensure(row.virtual_cycles >= row.cycles - CYCLE_TOL, || {
                    format!("{market} {d}h {}: virtual {} < {}", row.day, row.virtual_cycles, row.cycles)
                })?;
            } else {
                ensure(row.virtual_cycles == row.cycles, || {
                    format!("{market} {d}h {}: virtual {} != {}", row.day, row.virtual_cycles, row.cycles)
                })?;
            }
        }
    }
    Ok(format!("all days hold; smallest continuous margin {min_margin:.3}"))
}

fn qualitative_ordering(year: &Result<Year, String>) -> Outcome {
    let year = year.as_ref().map_err(Clone::clone)?;
    let reports: HashMap<(Market, u32), &bessbt::accounting::ScenarioReport> =
        cells(year)?.into_iter().map(|(m, d, out)| ((m, d), &out.report)).collect();
    let mut problems = Vec::new();
    for d in DURATIONS_H {
        let (daa, ida) = (reports[&(Market::Daa, d)].total_profit, reports[&(Market::Ida, d)].total_profit);
        if daa > ida {
            problems.push(format!("{d}h: DAA {daa:.0} > IDA {ida:.0}"));
        }
    }
    for m in Market::ALL {
        for w in DURATIONS_H.windows(2) {
            let (short, long) = (reports[&(m, w[0])].daily_cycles, reports[&(m, w[1])].daily_cycles);
            if short < long {
                problems.push(format!("{m}: {}h {short:.3} < {}h {long:.3} cycles/day", w[0], w[1]));
            }
        }
    }
    ensure(problems.is_empty(), || problems.join("; "))?;
    Ok("DAA <= IDA for every duration; cycles non-increasing with duration".into())
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, outcome: Outcome| {
        match outcome {
            Ok(detail) => println!("PASS {n:>2} {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {n:>2} {name}: {detail}");
            }
        }
        std::io::stdout().flush().ok();
    };
    report(1, "optimizer oracle equivalence", oracle_equivalence());
    report(2, "binary necessity", binary_necessity());
    report(3, "hand-checked arbitrage", hand_checked_arbitrage());
    report(4, "cycle normalization", cycle_normalization());
    report(5, "forecast regime", forecast_regime());
    let year = run_year();
    report(6, "engine end-to-end feasibility", end_to_end(&year));
    report(7, "truthful forecasts give equal CID ledgers", truthful_forecasts());
    report(8, "index oracle", index_oracle());
    report(9, "profit-per-cycle arithmetic", profit_per_cycle_arithmetic(&year));
    report(10, "virtual vs dispatched cycles", virtual_cycles(&year));
    report(11, "qualitative ordering", qualitative_ordering(&year));
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

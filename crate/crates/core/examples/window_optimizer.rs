//! Exact window optimization, its LP relaxation and the brute-force oracle.

use bessbt::model::{BessConfig, Product, ProductDuration};
use bessbt::optimizer::{brute_force_oracle, solve_relaxation, solve_window, Mode, WindowProblem};
use chrono::{TimeZone, Utc};

fn hours(n: usize) -> Vec<Product> {
    let t0 = Utc.with_ymd_and_hms(2023, 6, 1, 0, 0, 0).unwrap();
    (0..n)
        .map(|i| Product::new(t0 + chrono::Duration::hours(i as i64), ProductDuration::Hour).unwrap())
        .collect()
}

fn main() -> bessbt::Result<()> {
    let eta = 0.92f64.sqrt();
    let bess = BessConfig::new(1.0, 1.0, 1.0, eta, eta)?;
    let prob = WindowProblem::new(hours(2), vec![10.0, 100.0], bess, 0.0);
    let sol = solve_window(&prob, Mode::Auction)?;
    println!("buy low, sell high: objective {:.4} EUR", sol.objective);
    for e in &sol.schedule {
        println!("  {}  buy {:.4}  sell {:.4}  energy {:.4}", e.product, e.buy_mw, e.sell_mw, e.energy_end_mwh);
    }

    // negative price, full battery, lossy conversion
    let lossy = BessConfig::new(1.0, 1.0, 1.0, 0.5, 0.5)?;
    let prob = WindowProblem::new(hours(1), vec![-50.0], lossy, 1.0);
    let relax = solve_relaxation(&prob, Mode::Auction)?;
    let exact = solve_window(&prob, Mode::Auction)?;
    println!(
        "negative price: relaxation {:.2} EUR (buy {:.2} and sell {:.2} at once), exact {:.2} EUR",
        relax.objective, relax.buy_mw[0], relax.sell_mw[0], exact.objective
    );

    let prices = vec![55.0, 20.0, -5.0, 80.0, 120.0, 60.0, 10.0, 95.0];
    let bess = BessConfig::from_discharge_duration(1.0, 2.0, 0.85)?;
    let prob = WindowProblem::new(hours(prices.len()), prices, bess, 0.3);
    let exact = solve_window(&prob, Mode::Auction)?;
    let oracle = brute_force_oracle(&prob, Mode::Auction)?;
    println!("8 products: branch-and-bound {:.6}, oracle {:.6}", exact.objective, oracle.objective);
    Ok(())
}

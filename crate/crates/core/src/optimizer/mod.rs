//! Exact scheduling of one trading window.
//!
//! The battery model per product `p` with duration `δ`:
//!
//! ```text
//! 0 <= e_p <= E_max
//! 0 <= b_p <= α_p P_buy,  0 <= s_p <= (1 - α_p) P_sell,  α_p ∈ {0, 1}
//! e_p = e_{p-1} + (b_p η_c - s_p / η_d) δ
//! ```
//!
//! The objective maximizes `Σ π_p (s_p - b_p) δ` (auction form) or the value
//! of the change against the previously committed position (continuous
//! form). Ties are broken towards the least traded volume with a tiny
//! volume penalty.
//!
//! [`solve_window`] runs depth-first branch-and-bound over the exclusivity
//! binaries, with the LP relaxation that drops `α` and keeps the plain
//! power boxes. [`brute_force_oracle`] enumerates every `α` assignment
//! instead and solves each LP with an unrelated textbook simplex.

mod oracle;
mod simplex;

use serde::{Deserialize, Serialize};

pub use oracle::{brute_force_oracle, ORACLE_MAX_PRODUCTS};

use crate::error::{Error, Result};
use crate::model::{BessConfig, Product, ScheduleEntry, FEASIBILITY_TOL};
use simplex::{BoundedLp, LpOutcome};

/// Weight of the traded-volume penalty (€ per MWh traded).
pub const TIE_BREAK_WEIGHT: f64 = 1e-9;
/// Absolute optimality gap used for pruning.
pub const BNB_GAP: f64 = 1e-7;
/// Overlap `min(b, s)` above which a product is branched on.
pub const BRANCH_TOL: f64 = 1e-9;
const SNAP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Auction,
    Cid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
}

/// One window to optimize. `forecasts`, `prev_position` and `pinned` are
/// indexed like `products`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowProblem {
    pub products: Vec<Product>,
    pub forecasts: Vec<f64>,
    pub bess: BessConfig,
    pub e_initial: f64,
    /// Signed net purchase committed before this step (zero in auction form).
    pub prev_position: Vec<f64>,
    /// Frozen products preceding the window; they determine `e_initial`.
    pub frozen_prefix: Vec<ScheduleEntry>,
    /// Products whose net position cannot change in this step.
    pub pinned: Vec<Option<f64>>,
}

impl WindowProblem {
    pub fn new(products: Vec<Product>, forecasts: Vec<f64>, bess: BessConfig, e_initial: f64) -> Self {
        let n = products.len();
        Self {
            products,
            forecasts,
            bess,
            e_initial,
            prev_position: vec![0.0; n],
            frozen_prefix: Vec::new(),
            pinned: vec![None; n],
        }
    }

    pub fn with_prev_position(mut self, prev: Vec<f64>) -> Self {
        self.prev_position = prev;
        self
    }

    pub fn with_pinned(mut self, pinned: Vec<Option<f64>>) -> Self {
        self.pinned = pinned;
        self
    }

    pub fn with_frozen_prefix(mut self, prefix: Vec<ScheduleEntry>) -> Self {
        self.frozen_prefix = prefix;
        self
    }

    pub fn len(&self) -> usize {
        self.products.len()
    }

    pub fn is_empty(&self) -> bool {
        self.products.is_empty()
    }

    pub(crate) fn validate(&self, mode: Mode) -> Result<()> {
        let n = self.products.len();
        if self.forecasts.len() != n || self.prev_position.len() != n || self.pinned.len() != n {
            return Err(Error::config(format!(
                "window vectors disagree in length (products {n}, forecasts {}, prev {}, pinned {})",
                self.forecasts.len(),
                self.prev_position.len(),
                self.pinned.len()
            )));
        }
        if let Some(bad) = self.forecasts.iter().find(|f| !f.is_finite()) {
            return Err(Error::config(format!("non-finite forecast {bad}")));
        }
        if mode == Mode::Auction && self.prev_position.iter().any(|&v| v != 0.0) {
            return Err(Error::config("auction mode requires an all-zero previous position"));
        }
        let p_cap = self.bess.p_buy_max().max(self.bess.p_sell_max()) + FEASIBILITY_TOL;
        if self.prev_position.iter().any(|v| v.abs() > p_cap) {
            return Err(Error::config("previous position exceeds battery power limits"));
        }
        for (pin, p) in self.pinned.iter().zip(&self.products) {
            if let Some(v) = pin {
                if *v > self.bess.p_buy_max() + FEASIBILITY_TOL || -*v > self.bess.p_sell_max() + FEASIBILITY_TOL {
                    return Err(Error::config(format!("pinned position {v} of {p} exceeds power limits")));
                }
            }
        }
        if let Some(last) = self.frozen_prefix.last() {
            if (last.energy_end_mwh - self.e_initial).abs() > FEASIBILITY_TOL {
                return Err(Error::config("frozen prefix does not end at e_initial"));
            }
        }
        Ok(())
    }

    fn e_initial_feasible(&self) -> bool {
        self.e_initial >= -FEASIBILITY_TOL && self.e_initial <= self.bess.e_max() + FEASIBILITY_TOL
    }

    fn clamped_e_initial(&self) -> f64 {
        self.e_initial.clamp(0.0, self.bess.e_max())
    }

    /// Primary objective of a schedule (without the tie-break penalty).
    pub fn objective_of(&self, schedule: &[ScheduleEntry], mode: Mode) -> f64 {
        let mut total = 0.0;
        for (i, entry) in schedule.iter().enumerate() {
            let delta = entry.product.hours();
            let prev = match mode {
                Mode::Auction => 0.0,
                Mode::Cid => self.prev_position[i],
            };
            // prev is a net purchase; (s - b) - (s_prev - b_prev)
            total += self.forecasts[i] * (entry.sell_mw - entry.buy_mw + prev) * delta;
        }
        total
    }

    /// Rebuilds a feasible schedule from raw powers: snaps round-off at the
    /// bounds, nets out sub-tolerance overlaps keeping the energy change,
    /// and recomputes the energy chain.
    pub(crate) fn assemble(&self, buy: &[f64], sell: &[f64]) -> Vec<ScheduleEntry> {
        let bess = &self.bess;
        let snap = |v: f64, hi: f64| {
            if v < SNAP_TOL {
                0.0
            } else if (v - hi).abs() < SNAP_TOL {
                hi
            } else {
                v
            }
        };
        let mut e = self.clamped_e_initial();
        let mut out = Vec::with_capacity(self.products.len());
        for (i, product) in self.products.iter().enumerate() {
            let mut b = snap(buy[i], bess.p_buy_max());
            let mut s = snap(sell[i], bess.p_sell_max());
            if b > 0.0 && s > 0.0 {
                let net = b * bess.eta_c() - s / bess.eta_d();
                if net >= 0.0 {
                    b = net / bess.eta_c();
                    s = 0.0;
                } else {
                    s = -net * bess.eta_d();
                    b = 0.0;
                }
            }
            e = bess.next_energy(e, b, s, product.hours());
            if e < 0.0 && e > -FEASIBILITY_TOL {
                e = 0.0;
            } else if e > bess.e_max() && e < bess.e_max() + FEASIBILITY_TOL {
                e = bess.e_max();
            }
            out.push(ScheduleEntry {
                product: *product,
                buy_mw: b,
                sell_mw: s,
                energy_end_mwh: e,
            });
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSolution {
    pub schedule: Vec<ScheduleEntry>,
    pub objective: f64,
    pub status: SolveStatus,
}

impl WindowSolution {
    pub(crate) fn infeasible() -> Self {
        Self {
            schedule: Vec::new(),
            objective: 0.0,
            status: SolveStatus::Infeasible,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// A problem/solution pair for bug reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowDump {
    pub at: Option<chrono::DateTime<chrono::Utc>>,
    pub mode: Mode,
    pub problem: WindowProblem,
    pub solution: Option<WindowSolution>,
}

/// LP relaxation result (exclusivity dropped); powers may overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct Relaxation {
    pub status: SolveStatus,
    pub objective: f64,
    pub buy_mw: Vec<f64>,
    pub sell_mw: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Branch {
    Free,
    BuyOnly,
    SellOnly,
}

fn build_lp(prob: &WindowProblem, branches: &[Branch]) -> BoundedLp {
    let n = prob.products.len();
    let bess = &prob.bess;
    let mut cost = Vec::with_capacity(2 * n);
    let mut lower = Vec::with_capacity(2 * n);
    let mut upper = Vec::with_capacity(2 * n);
    for i in 0..n {
        let delta = prob.products[i].hours();
        let price = prob.forecasts[i];
        cost.push((-price - TIE_BREAK_WEIGHT) * delta);
        cost.push((price - TIE_BREAK_WEIGHT) * delta);
        let (mut b_range, mut s_range) = match prob.pinned[i] {
            Some(v) if v >= 0.0 => ((v, v), (0.0, 0.0)),
            Some(v) => ((0.0, 0.0), (-v, -v)),
            None => ((0.0, bess.p_buy_max()), (0.0, bess.p_sell_max())),
        };
        match branches[i] {
            Branch::Free => {}
            Branch::BuyOnly => s_range.1 = s_range.1.min(0.0),
            Branch::SellOnly => b_range.1 = b_range.1.min(0.0),
        }
        lower.extend([b_range.0, s_range.0]);
        upper.extend([b_range.1, s_range.1]);
    }

    // row i: energy change from the window start to the end of product i
    let e0 = prob.clamped_e_initial();
    let mut rows = vec![0.0; n * 2 * n];
    for q in 0..n {
        let delta = prob.products[q].hours();
        let charge = bess.eta_c() * delta;
        let discharge = -delta / bess.eta_d();
        for i in q..n {
            rows[i * 2 * n + 2 * q] = charge;
            rows[i * 2 * n + 2 * q + 1] = discharge;
        }
    }
    BoundedLp {
        cost,
        lower,
        upper,
        rows,
        row_lower: vec![-e0; n],
        row_upper: vec![bess.e_max() - e0; n],
    }
}

fn solve_lp(prob: &WindowProblem, branches: &[Branch]) -> Result<Option<(Vec<f64>, Vec<f64>, f64)>> {
    let lp = build_lp(prob, branches);
    match lp.solve().map_err(Error::Solver)? {
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Optimal { x, objective } => {
            let buy = x.iter().step_by(2).copied().collect();
            let sell = x.iter().skip(1).step_by(2).copied().collect();
            Ok(Some((buy, sell, objective)))
        }
    }
}

/// Solves the LP relaxation with the exclusivity binaries dropped.
pub fn solve_relaxation(prob: &WindowProblem, mode: Mode) -> Result<Relaxation> {
    prob.validate(mode)?;
    let n = prob.len();
    let infeasible = Relaxation {
        status: SolveStatus::Infeasible,
        objective: 0.0,
        buy_mw: Vec::new(),
        sell_mw: Vec::new(),
    };
    if !prob.e_initial_feasible() {
        return Ok(infeasible);
    }
    match solve_lp(prob, &vec![Branch::Free; n])? {
        None => Ok(infeasible),
        Some((buy, sell, _)) => {
            let mut objective = 0.0;
            for i in 0..n {
                let prev = if mode == Mode::Cid { prob.prev_position[i] } else { 0.0 };
                objective += prob.forecasts[i] * (sell[i] - buy[i] + prev) * prob.products[i].hours();
            }
            Ok(Relaxation {
                status: SolveStatus::Optimal,
                objective,
                buy_mw: buy,
                sell_mw: sell,
            })
        }
    }
}

/// Globally optimal schedule for one window.
pub fn solve_window(prob: &WindowProblem, mode: Mode) -> Result<WindowSolution> {
    prob.validate(mode)?;
    if !prob.e_initial_feasible() {
        return Ok(WindowSolution::infeasible());
    }
    if prob.is_empty() {
        return Ok(WindowSolution {
            schedule: Vec::new(),
            objective: 0.0,
            status: SolveStatus::Optimal,
        });
    }

    let n = prob.len();
    let mut incumbent: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut stack = vec![vec![Branch::Free; n]];
    while let Some(branches) = stack.pop() {
        let Some((buy, sell, bound)) = solve_lp(prob, &branches)? else {
            continue;
        };
        if let Some((best, _, _)) = &incumbent {
            if bound <= best + BNB_GAP {
                continue;
            }
        }
        let candidate = (0..n)
            .map(|i| (i, buy[i].min(sell[i])))
            .filter(|&(_, overlap)| overlap > BRANCH_TOL)
            .fold(None, |acc: Option<(usize, f64)>, (i, v)| match acc {
                Some((_, best)) if best >= v => acc,
                _ => Some((i, v)),
            });
        match candidate {
            None => incumbent = Some((bound, buy, sell)),
            Some((i, _)) => {
                let prefer_buy = buy[i] * prob.bess.eta_c() >= sell[i] / prob.bess.eta_d();
                let (first, second) = if prefer_buy {
                    (Branch::BuyOnly, Branch::SellOnly)
                } else {
                    (Branch::SellOnly, Branch::BuyOnly)
                };
                let mut later = branches.clone();
                later[i] = second;
                let mut sooner = branches;
                sooner[i] = first;
                stack.push(later);
                stack.push(sooner);
            }
        }
    }

    match incumbent {
        None => Ok(WindowSolution::infeasible()),
        Some((_, buy, sell)) => {
            let schedule = prob.assemble(&buy, &sell);
            let objective = prob.objective_of(&schedule, mode);
            Ok(WindowSolution {
                schedule,
                objective,
                status: SolveStatus::Optimal,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{check_schedule, ProductDuration};
    use chrono::{Duration, TimeZone, Utc};

    pub(crate) fn products(n: usize, duration: ProductDuration) -> Vec<Product> {
        let t0 = Utc.with_ymd_and_hms(2023, 6, 1, 0, 0, 0).unwrap();
        (0..n)
            .map(|i| Product::new(t0 + duration.span() * i as i32, duration).unwrap())
            .collect()
    }

    fn arbitrage_instance() -> WindowProblem {
        let eta = 0.92f64.sqrt();
        let bess = BessConfig::new(1.0, 1.0, 1.0, eta, eta).unwrap();
        WindowProblem::new(products(2, ProductDuration::Hour), vec![10.0, 100.0], bess, 0.0)
    }

    #[test]
    fn hand_checked_arbitrage() {
        let prob = arbitrage_instance();
        let sol = solve_window(&prob, Mode::Auction).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.objective - 82.0).abs() < 1e-6, "{}", sol.objective);
        assert!((sol.schedule[0].buy_mw - 1.0).abs() < 1e-9);
        assert!((sol.schedule[1].sell_mw - 0.92).abs() < 1e-9);
        check_schedule(&sol.schedule, 0.0, &prob.bess).unwrap();
    }

    #[test]
    fn flat_prices_with_losses_do_nothing() {
        let bess = BessConfig::from_discharge_duration(1.0, 1.0, 0.92).unwrap();
        let prob = WindowProblem::new(products(6, ProductDuration::QuarterHour), vec![42.0; 6], bess, 0.0);
        let sol = solve_window(&prob, Mode::Auction).unwrap();
        assert_eq!(sol.objective, 0.0);
        assert!(sol.schedule.iter().all(|e| e.buy_mw == 0.0 && e.sell_mw == 0.0));
    }

    #[test]
    fn flat_prices_lossless_prefers_no_volume() {
        let bess = BessConfig::from_discharge_duration(1.0, 1.0, 1.0).unwrap();
        let prob = WindowProblem::new(products(4, ProductDuration::Hour), vec![30.0; 4], bess, 0.0);
        let sol = solve_window(&prob, Mode::Auction).unwrap();
        assert!(sol.objective.abs() < 1e-6);
        assert!(sol.schedule.iter().all(|e| e.buy_mw == 0.0 && e.sell_mw == 0.0));
    }

    #[test]
    fn binary_is_needed_at_negative_prices() {
        let bess = BessConfig::new(1.0, 1.0, 1.0, 0.5, 0.5).unwrap();
        let prob = WindowProblem::new(products(1, ProductDuration::Hour), vec![-50.0], bess, 1.0);
        let relax = solve_relaxation(&prob, Mode::Auction).unwrap();
        assert!((relax.objective - 37.5).abs() < 1e-6, "{}", relax.objective);
        let sol = solve_window(&prob, Mode::Auction).unwrap();
        assert!(sol.objective.abs() < 1e-6, "{}", sol.objective);
        check_schedule(&sol.schedule, 1.0, &bess).unwrap();
    }

    #[test]
    fn infeasible_initial_energy() {
        let mut prob = arbitrage_instance();
        prob.e_initial = 2.0;
        assert_eq!(solve_window(&prob, Mode::Auction).unwrap().status, SolveStatus::Infeasible);
        prob.e_initial = -0.1;
        assert_eq!(solve_window(&prob, Mode::Auction).unwrap().status, SolveStatus::Infeasible);
    }

    #[test]
    fn empty_window_is_trivially_optimal() {
        let bess = BessConfig::from_discharge_duration(1.0, 1.0, 0.92).unwrap();
        let prob = WindowProblem::new(vec![], vec![], bess, 0.0);
        let sol = solve_window(&prob, Mode::Cid).unwrap();
        assert!(sol.is_optimal());
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn auction_mode_rejects_previous_positions() {
        let prob = arbitrage_instance().with_prev_position(vec![0.5, 0.0]);
        assert!(matches!(solve_window(&prob, Mode::Auction), Err(Error::Config(_))));
        assert!(solve_window(&prob, Mode::Cid).is_ok());
    }

    #[test]
    fn cid_objective_values_the_change() {
        let prob = arbitrage_instance().with_prev_position(vec![1.0, -0.92]);
        let sol = solve_window(&prob, Mode::Cid).unwrap();
        // the previous position already is optimal: nothing left to gain
        assert!(sol.objective.abs() < 1e-6, "{}", sol.objective);
    }

    #[test]
    fn pinned_products_keep_their_position() {
        let prob = arbitrage_instance().with_pinned(vec![Some(0.5), None]);
        let sol = solve_window(&prob, Mode::Auction).unwrap();
        assert_eq!(sol.schedule[0].buy_mw, 0.5);
        assert!((sol.schedule[1].sell_mw - 0.46).abs() < 1e-9);
        assert!((sol.objective - (0.46 * 100.0 - 5.0)).abs() < 1e-6);
    }

    #[test]
    fn pinned_start_outside_bounds_uses_phase_one() {
        // pinned sell in the second product needs an earlier charge
        let bess = BessConfig::new(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let prob = WindowProblem::new(products(2, ProductDuration::Hour), vec![50.0, 10.0], bess, 0.0)
            .with_pinned(vec![None, Some(-0.5)]);
        let sol = solve_window(&prob, Mode::Auction).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.schedule[0].buy_mw - 0.5).abs() < 1e-9);
        check_schedule(&sol.schedule, 0.0, &bess).unwrap();
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let mut prob = arbitrage_instance();
        prob.forecasts.pop();
        assert!(solve_window(&prob, Mode::Auction).is_err());
    }

    #[test]
    fn frozen_prefix_must_match_initial_energy() {
        let prob = arbitrage_instance();
        let p = Product::new(prob.products[0].delivery_start() - Duration::hours(1), ProductDuration::Hour).unwrap();
        let entry = ScheduleEntry { product: p, buy_mw: 0.0, sell_mw: 0.0, energy_end_mwh: 0.3 };
        let bad = prob.clone().with_frozen_prefix(vec![entry]);
        assert!(solve_window(&bad, Mode::Auction).is_err());
        let mut ok = prob.with_frozen_prefix(vec![entry]);
        ok.e_initial = 0.3;
        assert!(solve_window(&ok, Mode::Auction).is_ok());
    }
}

//! Exhaustive reference solver for small windows.
//!
//! Every assignment of the exclusivity binaries fixes one allowed direction
//! per product, which leaves a plain LP in `n` variables. Each LP is solved
//! with a textbook two-phase tableau simplex under Bland's rule, written
//! independently of the bounded solver used by [`super::solve_window`].

use super::{Mode, SolveStatus, WindowProblem, WindowSolution, TIE_BREAK_WEIGHT};
use crate::error::{Error, Result};

pub const ORACLE_MAX_PRODUCTS: usize = 12;

const EPS: f64 = 1e-11;

/// `max c·x` subject to `G x <= h`, `x >= 0`. `None` when infeasible.
fn textbook_lp(c: &[f64], g: &[Vec<f64>], h: &[f64]) -> Option<Vec<f64>> {
    let n = c.len();
    let m = h.len();
    let n_art = h.iter().filter(|&&v| v < 0.0).count();
    let width = n + m + n_art + 1;
    let rhs = width - 1;
    let mut tab = vec![vec![0.0; width]; m];
    let mut basis = vec![0usize; m];
    let mut art = n + m;
    for i in 0..m {
        let sign = if h[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            tab[i][j] = sign * g[i][j];
        }
        tab[i][n + i] = sign;
        tab[i][rhs] = sign * h[i];
        if h[i] < 0.0 {
            tab[i][art] = 1.0;
            basis[i] = art;
            art += 1;
        } else {
            basis[i] = n + i;
        }
    }

    let run = |tab: &mut Vec<Vec<f64>>, basis: &mut Vec<usize>, obj: &[f64], allowed: usize| {
        loop {
            // reduced costs for maximization
            let reduced = |j: usize| -> f64 {
                let mut r = obj[j];
                for (i, &b) in basis.iter().enumerate() {
                    r -= obj[b] * tab[i][j];
                }
                r
            };
            let Some(enter) = (0..allowed).find(|&j| !basis.contains(&j) && reduced(j) > EPS) else {
                return;
            };
            let mut leave: Option<usize> = None;
            for i in 0..tab.len() {
                if tab[i][enter] > EPS {
                    let ratio = tab[i][rhs] / tab[i][enter];
                    leave = match leave {
                        None => Some(i),
                        Some(l) => {
                            let best = tab[l][rhs] / tab[l][enter];
                            if ratio < best - EPS || (ratio <= best + EPS && basis[i] < basis[l]) {
                                Some(i)
                            } else {
                                Some(l)
                            }
                        }
                    };
                }
            }
            let Some(r) = leave else {
                return;
            };
            let piv = tab[r][enter];
            for v in tab[r].iter_mut() {
                *v /= piv;
            }
            let pivot_row = tab[r].clone();
            for (i, row) in tab.iter_mut().enumerate() {
                if i != r && row[enter] != 0.0 {
                    let f = row[enter];
                    for (v, p) in row.iter_mut().zip(&pivot_row) {
                        *v -= f * p;
                    }
                }
            }
            basis[r] = enter;
        }
    };

    if n_art > 0 {
        let mut phase1 = vec![0.0; width - 1];
        for v in phase1[n + m..].iter_mut() {
            *v = -1.0;
        }
        run(&mut tab, &mut basis, &phase1, n + m + n_art);
        let infeasibility: f64 = basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= n + m)
            .map(|(i, _)| tab[i][rhs])
            .sum();
        if infeasibility > 1e-9 {
            return None;
        }
        // drive degenerate artificials out of the basis
        for i in 0..m {
            if basis[i] >= n + m {
                if let Some(j) = (0..n + m).find(|&j| tab[i][j].abs() > EPS && !basis.contains(&j)) {
                    let piv = tab[i][j];
                    for v in tab[i].iter_mut() {
                        *v /= piv;
                    }
                    let pivot_row = tab[i].clone();
                    for (k, row) in tab.iter_mut().enumerate() {
                        if k != i && row[j] != 0.0 {
                            let f = row[j];
                            for (v, p) in row.iter_mut().zip(&pivot_row) {
                                *v -= f * p;
                            }
                        }
                    }
                    basis[i] = j;
                }
            }
        }
    }

    let mut obj = vec![0.0; width - 1];
    obj[..n].copy_from_slice(c);
    run(&mut tab, &mut basis, &obj, n + m);

    let mut x = vec![0.0; n];
    for (i, &b) in basis.iter().enumerate() {
        if b < n {
            x[b] = tab[i][rhs].max(0.0);
        }
    }
    Some(x)
}

/// Reference optimum by enumerating all `2^n` exclusivity assignments.
/// Ties between assignments keep the first one found.
pub fn brute_force_oracle(prob: &WindowProblem, mode: Mode) -> Result<WindowSolution> {
    prob.validate(mode)?;
    let n = prob.len();
    if n > ORACLE_MAX_PRODUCTS {
        return Err(Error::Size {
            products: n,
            max: ORACLE_MAX_PRODUCTS,
        });
    }
    if !prob.e_initial_feasible() {
        return Ok(WindowSolution::infeasible());
    }
    let bess = &prob.bess;
    let e0 = prob.clamped_e_initial();

    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    for mask in 0u32..(1u32 << n) {
        let buying = |i: usize| mask & (1 << i) != 0;
        if (0..n).any(|i| matches!(prob.pinned[i], Some(v) if (v >= 0.0) != buying(i))) {
            continue;
        }

        // free variables: one per unpinned product, in its allowed direction
        let mut vars = Vec::new();
        let mut energy_coef = Vec::new();
        let mut cost = Vec::new();
        let mut cap = Vec::new();
        let mut fixed_energy = vec![0.0; n];
        let mut fixed_cost = 0.0;
        let mut running = 0.0;
        for i in 0..n {
            let delta = prob.products[i].hours();
            let price = prob.forecasts[i];
            let (k, c, p_max) = if buying(i) {
                (bess.eta_c() * delta, (-price - TIE_BREAK_WEIGHT) * delta, bess.p_buy_max())
            } else {
                (-delta / bess.eta_d(), (price - TIE_BREAK_WEIGHT) * delta, bess.p_sell_max())
            };
            match prob.pinned[i] {
                Some(v) => {
                    running += k * v.abs();
                    fixed_cost += c * v.abs();
                }
                None => {
                    vars.push(i);
                    energy_coef.push(k);
                    cost.push(c);
                    cap.push(p_max);
                }
            }
            fixed_energy[i] = running;
        }

        let nv = vars.len();
        let mut g = Vec::new();
        let mut h = Vec::new();
        for i in 0..n {
            let row: Vec<f64> = (0..nv).map(|v| if vars[v] <= i { energy_coef[v] } else { 0.0 }).collect();
            g.push(row.clone());
            h.push(bess.e_max() - e0 - fixed_energy[i]);
            g.push(row.iter().map(|a| -a).collect());
            h.push(e0 + fixed_energy[i]);
        }
        for v in 0..nv {
            let mut row = vec![0.0; nv];
            row[v] = 1.0;
            g.push(row);
            h.push(cap[v]);
        }

        let Some(x) = textbook_lp(&cost, &g, &h) else {
            continue;
        };
        let value = fixed_cost + x.iter().zip(&cost).map(|(a, c)| a * c).sum::<f64>();
        if best.as_ref().map_or(true, |(b, _, _)| value > *b) {
            let mut buy = vec![0.0; n];
            let mut sell = vec![0.0; n];
            for i in 0..n {
                if let Some(v) = prob.pinned[i] {
                    if v >= 0.0 {
                        buy[i] = v;
                    } else {
                        sell[i] = -v;
                    }
                }
            }
            for (v, &i) in vars.iter().enumerate() {
                if buying(i) {
                    buy[i] = x[v];
                } else {
                    sell[i] = x[v];
                }
            }
            best = Some((value, buy, sell));
        }
    }

    Ok(match best {
        None => WindowSolution::infeasible(),
        Some((_, buy, sell)) => {
            let schedule = prob.assemble(&buy, &sell);
            let objective = prob.objective_of(&schedule, mode);
            WindowSolution {
                schedule,
                objective,
                status: SolveStatus::Optimal,
            }
        }
    })
}

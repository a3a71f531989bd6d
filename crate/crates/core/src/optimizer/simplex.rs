//! Dense bounded-variable primal simplex.
//!
//! Solves `max c·x` subject to `row_lower <= A x <= row_upper` and
//! `lower <= x <= upper`. Every structural variable needs a finite lower
//! bound; the search starts with all of them at that bound and the row
//! activities basic. Rows whose starting activity is out of range get an
//! artificial column and are repaired by a phase-one pass.

const PIVOT_TOL: f64 = 1e-11;
const DUAL_TOL: f64 = 1e-10;
const PRIMAL_TOL: f64 = 1e-9;
const RATIO_TIE: f64 = 1e-12;
const DEGENERATE_RUN: usize = 30;

#[derive(Debug, Clone)]
pub(crate) struct BoundedLp {
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Row-major `rows.len() == row_lower.len() * cost.len()`.
    pub rows: Vec<f64>,
    pub row_lower: Vec<f64>,
    pub row_upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
}

struct Tableau {
    m: usize,
    cols: usize,
    t: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    xb: Vec<f64>,
    d: Vec<f64>,
}

impl Tableau {
    fn value(&self, j: usize) -> f64 {
        match self.state[j] {
            State::Lower => self.lower[j],
            State::Upper => self.upper[j],
            State::Basic => {
                let row = self.basis.iter().position(|&b| b == j).expect("basic column in basis");
                self.xb[row]
            }
        }
    }

    fn price(&mut self, cost: &[f64]) {
        self.d.clear();
        self.d.extend_from_slice(cost);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.t[i * self.cols..(i + 1) * self.cols];
            for (d, &tij) in self.d.iter_mut().zip(row) {
                *d -= cb * tij;
            }
        }
    }

    fn entering(&self, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.cols {
            if self.upper[j] <= self.lower[j] {
                continue;
            }
            let score = match self.state[j] {
                State::Basic => continue,
                State::Lower if self.d[j] > DUAL_TOL => self.d[j],
                State::Upper if self.d[j] < -DUAL_TOL => -self.d[j],
                _ => continue,
            };
            if bland {
                return Some(j);
            }
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        best.map(|(j, _)| j)
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let cols = self.cols;
        let piv = self.t[r * cols + j];
        {
            let row = &mut self.t[r * cols..(r + 1) * cols];
            for v in row.iter_mut() {
                *v /= piv;
            }
            row[j] = 1.0;
        }
        let (before, rest) = self.t.split_at_mut(r * cols);
        let (prow, after) = rest.split_at_mut(cols);
        for row in before.chunks_exact_mut(cols).chain(after.chunks_exact_mut(cols)) {
            let f = row[j];
            if f == 0.0 {
                continue;
            }
            for (v, &p) in row.iter_mut().zip(prow.iter()) {
                *v -= f * p;
            }
            row[j] = 0.0;
        }
        let dj = self.d[j];
        if dj != 0.0 {
            for (d, &p) in self.d.iter_mut().zip(prow.iter()) {
                *d -= dj * p;
            }
            self.d[j] = 0.0;
        }
    }

    /// Runs primal simplex iterations for the given cost vector.
    fn optimize(&mut self, cost: &[f64]) -> Result<(), String> {
        self.price(cost);
        let limit = 50 * (self.m + self.cols) + 1000;
        let mut degenerate = 0;
        let mut alpha = vec![0.0; self.m];
        for _ in 0..limit {
            let bland = degenerate > DEGENERATE_RUN;
            let Some(j) = self.entering(bland) else {
                return Ok(());
            };
            let dir = if self.state[j] == State::Lower { 1.0 } else { -1.0 };

            let mut leave: Option<usize> = None;
            let mut theta = f64::INFINITY;
            for i in 0..self.m {
                let a = -self.t[i * self.cols + j] * dir;
                alpha[i] = a;
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let b = self.basis[i];
                let limit_i = if a < 0.0 {
                    (self.xb[i] - self.lower[b]).max(0.0) / -a
                } else if self.upper[b].is_finite() {
                    (self.upper[b] - self.xb[i]).max(0.0) / a
                } else {
                    continue;
                };
                let take = match leave {
                    None => true,
                    Some(l) => {
                        if limit_i < theta - RATIO_TIE {
                            true
                        } else if limit_i <= theta + RATIO_TIE {
                            if bland {
                                b < self.basis[l]
                            } else {
                                a.abs() > alpha[l].abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if take {
                    leave = Some(i);
                    theta = limit_i;
                }
            }

            let span = self.upper[j] - self.lower[j];
            if span.is_finite() && span <= theta {
                for (x, a) in self.xb.iter_mut().zip(&alpha) {
                    *x += a * span;
                }
                self.state[j] = if self.state[j] == State::Lower { State::Upper } else { State::Lower };
                degenerate = 0;
                continue;
            }
            let Some(r) = leave else {
                return Err("unbounded direction".into());
            };
            if theta <= RATIO_TIE {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            let entering_value = self.value(j) + dir * theta;
            for (x, a) in self.xb.iter_mut().zip(&alpha) {
                *x += a * theta;
            }
            let leaving = self.basis[r];
            self.state[leaving] = if alpha[r] < 0.0 { State::Lower } else { State::Upper };
            self.basis[r] = j;
            self.state[j] = State::Basic;
            self.xb[r] = entering_value;
            self.pivot(r, j);
        }
        Err("iteration limit reached".into())
    }
}

impl BoundedLp {
    pub fn solve(&self) -> Result<LpOutcome, String> {
        let n = self.cost.len();
        let m = self.row_lower.len();
        debug_assert_eq!(self.rows.len(), n * m);
        if self.lower.iter().any(|l| !l.is_finite()) {
            return Err("structural lower bounds must be finite".into());
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| l > u) {
            return Ok(LpOutcome::Infeasible);
        }

        let activity: Vec<f64> = (0..m)
            .map(|i| {
                self.rows[i * n..(i + 1) * n]
                    .iter()
                    .zip(&self.lower)
                    .map(|(a, l)| a * l)
                    .sum()
            })
            .collect();
        let infeasible_rows: Vec<usize> = (0..m)
            .filter(|&i| activity[i] < self.row_lower[i] - PRIMAL_TOL || activity[i] > self.row_upper[i] + PRIMAL_TOL)
            .collect();

        let k = infeasible_rows.len();
        let cols = n + m + k;
        let mut lower = Vec::with_capacity(cols);
        let mut upper = Vec::with_capacity(cols);
        lower.extend_from_slice(&self.lower);
        upper.extend_from_slice(&self.upper);
        lower.extend_from_slice(&self.row_lower);
        upper.extend_from_slice(&self.row_upper);
        lower.extend(std::iter::repeat(0.0).take(k));
        upper.extend(std::iter::repeat(f64::INFINITY).take(k));

        let mut state = vec![State::Lower; cols];
        let mut basis = vec![0; m];
        let mut xb = vec![0.0; m];
        let mut t = vec![0.0; m * cols];
        let mut art_of_row = vec![None; m];
        for (a, &i) in infeasible_rows.iter().enumerate() {
            art_of_row[i] = Some(n + m + a);
        }

        for i in 0..m {
            // row i of [A | -I | sigma e_i] divided by the basic coefficient
            let (diag, sigma) = match art_of_row[i] {
                None => {
                    basis[i] = n + i;
                    state[n + i] = State::Basic;
                    xb[i] = activity[i];
                    (-1.0, 0.0)
                }
                Some(col) => {
                    let below = activity[i] < self.row_lower[i];
                    let bound = if below { self.row_lower[i] } else { self.row_upper[i] };
                    state[n + i] = if below { State::Lower } else { State::Upper };
                    let sigma = if below { 1.0 } else { -1.0 };
                    basis[i] = col;
                    state[col] = State::Basic;
                    xb[i] = (bound - activity[i]).abs();
                    (sigma, sigma)
                }
            };
            let row = &mut t[i * cols..(i + 1) * cols];
            for (dst, &a) in row[..n].iter_mut().zip(&self.rows[i * n..(i + 1) * n]) {
                *dst = a / diag;
            }
            row[n + i] = -1.0 / diag;
            if let Some(col) = art_of_row[i] {
                row[col] = sigma / diag;
            }
        }

        let mut tab = Tableau {
            m,
            cols,
            t,
            lower,
            upper,
            state,
            basis,
            xb,
            d: Vec::with_capacity(cols),
        };

        if k > 0 {
            let mut phase1 = vec![0.0; cols];
            for c in phase1[n + m..].iter_mut() {
                *c = -1.0;
            }
            tab.optimize(&phase1)?;
            let residual: f64 = (n + m..cols).map(|j| tab.value(j)).sum();
            if residual > 1e-8 {
                return Ok(LpOutcome::Infeasible);
            }
            for j in n + m..cols {
                tab.upper[j] = 0.0;
                if tab.state[j] == State::Upper {
                    tab.state[j] = State::Lower;
                }
            }
        }

        let mut cost = vec![0.0; cols];
        cost[..n].copy_from_slice(&self.cost);
        tab.optimize(&cost)?;

        let mut x = vec![0.0; n];
        for (j, xj) in x.iter_mut().enumerate() {
            if tab.state[j] != State::Basic {
                *xj = tab.value(j);
            }
        }
        for (i, &b) in tab.basis.iter().enumerate() {
            if b < n {
                x[b] = tab.xb[i];
            }
        }
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = xj.clamp(self.lower[j], self.upper[j]);
        }
        let objective = x.iter().zip(&self.cost).map(|(a, c)| a * c).sum();
        Ok(LpOutcome::Optimal { x, objective })
    }
}

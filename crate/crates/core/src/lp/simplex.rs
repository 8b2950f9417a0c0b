//! Dense two-phase primal simplex with native variable bounds.
//!
//! Solves `min c'x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  lo <= x <= hi`.
//! Bounded variables are handled by bound flips instead of extra rows, so a
//! capped-simplex constraint costs nothing beyond its column. Pricing is
//! Dantzig's rule; after a run of degenerate pivots it switches to Bland's
//! rule, which cannot cycle.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;
const DEGENERATE_RUN: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// A dense LP. Rows of `a_ub`/`a_eq` must have `c.len()` entries and `bounds`
/// one `(lo, hi)` pair per variable; infinite bounds are allowed.
#[derive(Clone, Debug, Default)]
pub struct LpProblem {
    pub c: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row multipliers `y` with `c - A'y` the reduced costs; `<= 0` for the
    /// inequality rows of a minimization.
    pub duals_ub: Vec<f64>,
    pub duals_eq: Vec<f64>,
    /// Largest constraint or bound violation of `x`.
    pub residual: f64,
    pub iterations: usize,
}

/// How an original variable maps onto nonnegative internal columns.
#[derive(Clone, Copy, Debug)]
enum VarMap {
    /// `x = lo + col`
    Shift { col: usize, lo: f64 },
    /// `x = hi - col`
    Flip { col: usize, hi: f64 },
    /// `x = pos - neg`
    Split { pos: usize, neg: usize },
}

struct Tableau {
    m: usize,
    ncols: usize,
    /// `B^{-1} A`, row-major.
    t: Vec<f64>,
    /// Original constraint matrix, kept for the final residual refinement.
    a: Vec<f64>,
    b: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    basic_row: Vec<Option<usize>>,
    /// Column whose `B^{-1}` image is `sign * B^{-1} e_i`, per row.
    unit_col: Vec<(usize, f64)>,
    barred: Vec<bool>,
    iterations: usize,
    budget: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn row(&self, i: usize) -> &[f64] {
        &self.t[i * self.ncols..(i + 1) * self.ncols]
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (dj, tij) in d.iter_mut().zip(self.row(i)) {
                    *dj -= cb * tij;
                }
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, q: usize, d: &mut [f64]) {
        let n = self.ncols;
        let piv = self.t[r * n + q];
        for v in &mut self.t[r * n..(r + 1) * n] {
            *v /= piv;
        }
        let prow: Vec<f64> = self.t[r * n..(r + 1) * n].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * n + q];
            if f != 0.0 {
                for (v, p) in self.t[i * n..(i + 1) * n].iter_mut().zip(&prow) {
                    *v -= f * p;
                }
                self.t[i * n + q] = 0.0;
            }
        }
        let f = d[q];
        if f != 0.0 {
            for (dj, p) in d.iter_mut().zip(&prow) {
                *dj -= f * p;
            }
            d[q] = 0.0;
        }
        let leaving = self.basis[r];
        self.basic_row[leaving] = None;
        self.basis[r] = q;
        self.basic_row[q] = Some(r);
    }

    fn run_phase(&mut self, cost: &[f64]) -> Result<PhaseEnd> {
        let mut d = self.reduced_costs(cost);
        let mut bland = false;
        let mut degenerate_run = 0usize;
        loop {
            // pricing
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.ncols {
                if self.basic_row[j].is_some() || self.barred[j] || self.hi[j] <= 0.0 {
                    continue;
                }
                let at_lower = self.x[j] == 0.0;
                let improving = if at_lower { d[j] < -COST_TOL } else { d[j] > COST_TOL };
                if !improving {
                    continue;
                }
                if bland {
                    entering = Some((j, d[j]));
                    break;
                }
                if entering.is_none_or(|(_, best)| d[j].abs() > best.abs()) {
                    entering = Some((j, d[j]));
                }
            }
            let Some((q, _)) = entering else {
                return Ok(PhaseEnd::Optimal);
            };

            self.iterations += 1;
            if self.iterations > self.budget {
                return Err(Error::Solver(format!(
                    "simplex iteration budget {} exhausted ({} rows, {} columns, bland={bland})",
                    self.budget, self.m, self.ncols
                )));
            }

            let dir = if self.x[q] == 0.0 { 1.0 } else { -1.0 };
            // ratio test
            let mut theta = f64::INFINITY;
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let tiq = self.t[i * self.ncols + q];
                if tiq.abs() <= PIVOT_TOL {
                    continue;
                }
                let rate = -dir * tiq;
                let bvar = self.basis[i];
                let limit = if rate < 0.0 {
                    (self.x[bvar] / -rate).max(0.0)
                } else if self.hi[bvar].is_finite() {
                    ((self.hi[bvar] - self.x[bvar]) / rate).max(0.0)
                } else {
                    continue;
                };
                let take = match leave {
                    None => true,
                    Some((r, _)) if (limit - theta).abs() <= 1e-14 => {
                        if bland {
                            bvar < self.basis[r]
                        } else {
                            tiq.abs() > self.t[r * self.ncols + q].abs()
                        }
                    }
                    Some(_) => limit < theta,
                };
                if take {
                    theta = limit;
                    leave = Some((i, rate));
                }
            }
            if self.hi[q] <= theta {
                // bound flip wins (or nothing blocks)
                leave = None;
                theta = self.hi[q];
            }
            if !theta.is_finite() {
                return Ok(PhaseEnd::Unbounded);
            }

            if theta <= DEGENERATE_STEP {
                degenerate_run += 1;
                if degenerate_run > DEGENERATE_RUN {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }

            for i in 0..self.m {
                let tiq = self.t[i * self.ncols + q];
                if tiq != 0.0 {
                    let bvar = self.basis[i];
                    self.x[bvar] -= dir * theta * tiq;
                }
            }
            match leave {
                None => {
                    // bound flip
                    self.x[q] = if dir > 0.0 { self.hi[q] } else { 0.0 };
                }
                Some((r, rate)) => {
                    let bvar = self.basis[r];
                    self.x[bvar] = if rate < 0.0 { 0.0 } else { self.hi[bvar] };
                    self.x[q] = if dir > 0.0 { theta } else { self.hi[q] - theta };
                    self.pivot(r, q, &mut d);
                }
            }
        }
    }

    /// `B^{-1}` column for row `i`.
    fn binv_col(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        let (col, sign) = self.unit_col[i];
        (0..self.m).map(move |k| self.t[k * self.ncols + col] / sign)
    }

    /// Recomputes basic values from the nonbasic ones to shed drift.
    fn refine(&mut self) {
        let mut rhs = self.b.clone();
        for j in 0..self.ncols {
            if self.basic_row[j].is_none() && self.x[j] != 0.0 {
                for (i, r) in rhs.iter_mut().enumerate() {
                    *r -= self.a[i * self.ncols + j] * self.x[j];
                }
            }
        }
        let mut xb = vec![0.0; self.m];
        for (i, &ri) in rhs.iter().enumerate() {
            if ri == 0.0 {
                continue;
            }
            for (k, v) in self.binv_col(i).enumerate() {
                xb[k] += v * ri;
            }
        }
        for (k, &bvar) in self.basis.iter().enumerate() {
            self.x[bvar] = xb[k].clamp(0.0, self.hi[bvar]);
        }
    }
}

/// Solves a dense LP exactly (up to floating point) by the simplex method.
///
/// Infeasible and unbounded problems are reported through
/// [`LpSolution::status`]; errors are reserved for malformed input and for
/// exhausting the pivot budget.
pub fn generic_lp(p: &LpProblem) -> Result<LpSolution> {
    let nv = p.c.len();
    if p.bounds.len() != nv {
        return Err(Error::DimensionMismatch {
            context: "LP bounds",
            expected: nv,
            got: p.bounds.len(),
        });
    }
    if p.a_ub.len() != p.b_ub.len() || p.a_eq.len() != p.b_eq.len() {
        return Err(Error::DimensionMismatch {
            context: "LP right-hand side",
            expected: p.a_ub.len() + p.a_eq.len(),
            got: p.b_ub.len() + p.b_eq.len(),
        });
    }
    for row in p.a_ub.iter().chain(&p.a_eq) {
        if row.len() != nv {
            return Err(Error::DimensionMismatch {
                context: "LP constraint row",
                expected: nv,
                got: row.len(),
            });
        }
    }
    if p.c.iter().chain(p.b_ub.iter()).chain(p.b_eq.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Solver("non-finite LP data".into()));
    }
    for &(lo, hi) in &p.bounds {
        if lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY || lo.is_nan() || hi.is_nan() {
            return Err(Error::Solver(format!("invalid variable bounds [{lo}, {hi}]")));
        }
    }

    // internal structural columns
    let mut maps = Vec::with_capacity(nv);
    let mut col_hi: Vec<f64> = Vec::new();
    for &(lo, hi) in &p.bounds {
        let col = col_hi.len();
        if lo.is_finite() {
            maps.push(VarMap::Shift { col, lo });
            col_hi.push(hi - lo);
        } else if hi.is_finite() {
            maps.push(VarMap::Flip { col, hi });
            col_hi.push(f64::INFINITY);
        } else {
            maps.push(VarMap::Split { pos: col, neg: col + 1 });
            col_hi.push(f64::INFINITY);
            col_hi.push(f64::INFINITY);
        }
    }
    let n_struct = col_hi.len();
    let m_ub = p.a_ub.len();
    let m = m_ub + p.a_eq.len();
    let rows: Vec<&Vec<f64>> = p.a_ub.iter().chain(&p.a_eq).collect();
    let rhs: Vec<f64> = p.b_ub.iter().chain(&p.b_eq).copied().collect();

    // shifted right-hand side with every structural column at zero
    let mut b = rhs.clone();
    for (i, row) in rows.iter().enumerate() {
        for (j, map) in maps.iter().enumerate() {
            match *map {
                VarMap::Shift { lo, .. } if lo != 0.0 => b[i] -= row[j] * lo,
                VarMap::Flip { hi, .. } if hi != 0.0 => b[i] -= row[j] * hi,
                _ => {}
            }
        }
    }

    let needs_art: Vec<bool> = (0..m).map(|i| i >= m_ub || b[i] < 0.0).collect();
    let n_art = needs_art.iter().filter(|&&v| v).count();
    let ncols = n_struct + m_ub + n_art;
    let mut a = vec![0.0; m * ncols];
    let mut basis = vec![0usize; m];
    let mut unit_col = vec![(0usize, 1.0); m];
    let mut art_cols = Vec::with_capacity(n_art);
    let mut hi = col_hi;
    hi.extend(std::iter::repeat_n(f64::INFINITY, m_ub + n_art));
    let mut next_art = n_struct + m_ub;
    for i in 0..m {
        let arow = &mut a[i * ncols..(i + 1) * ncols];
        for (j, map) in maps.iter().enumerate() {
            let v = rows[i][j];
            match *map {
                VarMap::Shift { col, .. } => arow[col] = v,
                VarMap::Flip { col, .. } => arow[col] = -v,
                VarMap::Split { pos, neg } => {
                    arow[pos] = v;
                    arow[neg] = -v;
                }
            }
        }
        if i < m_ub {
            arow[n_struct + i] = 1.0;
            unit_col[i] = (n_struct + i, 1.0);
            basis[i] = n_struct + i;
        }
        if needs_art[i] {
            let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
            arow[next_art] = sign;
            if i >= m_ub {
                unit_col[i] = (next_art, sign);
            }
            basis[i] = next_art;
            art_cols.push(next_art);
            next_art += 1;
        }
    }

    // B^{-1} A with B diagonal
    let mut t = a.clone();
    let mut x = vec![0.0; ncols];
    for i in 0..m {
        let piv = a[i * ncols + basis[i]];
        for v in &mut t[i * ncols..(i + 1) * ncols] {
            *v /= piv;
        }
        x[basis[i]] = b[i] / piv;
    }
    let mut basic_row = vec![None; ncols];
    for (i, &j) in basis.iter().enumerate() {
        basic_row[j] = Some(i);
    }

    let mut tab = Tableau {
        m,
        ncols,
        t,
        a,
        b,
        hi,
        x,
        basis,
        basic_row,
        unit_col,
        barred: vec![false; ncols],
        iterations: 0,
        budget: 50_000 + 50 * (m + ncols),
    };

    let bscale = 1.0 + rhs.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if n_art > 0 {
        let mut phase1 = vec![0.0; ncols];
        for &j in &art_cols {
            phase1[j] = 1.0;
        }
        tab.run_phase(&phase1)?;
        let infeas: f64 = art_cols.iter().map(|&j| tab.x[j]).sum();
        if infeas > 1e-9 * bscale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: vec![f64::NAN; nv],
                objective: f64::NAN,
                duals_ub: vec![],
                duals_eq: vec![],
                residual: infeas,
                iterations: tab.iterations,
            });
        }
        for &j in &art_cols {
            tab.hi[j] = 0.0;
            tab.barred[j] = true;
            if tab.basic_row[j].is_none() {
                tab.x[j] = 0.0;
            }
        }
    }

    let mut cost = vec![0.0; ncols];
    for (j, map) in maps.iter().enumerate() {
        match *map {
            VarMap::Shift { col, .. } => cost[col] = p.c[j],
            VarMap::Flip { col, .. } => cost[col] = -p.c[j],
            VarMap::Split { pos, neg } => {
                cost[pos] = p.c[j];
                cost[neg] = -p.c[j];
            }
        }
    }
    let end = tab.run_phase(&cost)?;
    if let PhaseEnd::Unbounded = end {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: vec![f64::NAN; nv],
            objective: f64::NEG_INFINITY,
            duals_ub: vec![],
            duals_eq: vec![],
            residual: 0.0,
            iterations: tab.iterations,
        });
    }
    tab.refine();

    let xs: Vec<f64> = maps
        .iter()
        .map(|map| match *map {
            VarMap::Shift { col, lo } => lo + tab.x[col],
            VarMap::Flip { col, hi } => hi - tab.x[col],
            VarMap::Split { pos, neg } => tab.x[pos] - tab.x[neg],
        })
        .collect();
    let objective = p.c.iter().zip(&xs).map(|(c, x)| c * x).sum();

    let mut y = vec![0.0; m];
    for (k, &bvar) in tab.basis.iter().enumerate() {
        let cb = cost[bvar];
        if cb == 0.0 {
            continue;
        }
        for (i, yi) in y.iter_mut().enumerate() {
            let (col, sign) = tab.unit_col[i];
            *yi += cb * tab.t[k * ncols + col] / sign;
        }
    }
    let duals_eq = y.split_off(m_ub);

    let mut residual = 0.0f64;
    for (i, row) in rows.iter().enumerate() {
        let ax: f64 = row.iter().zip(&xs).map(|(a, x)| a * x).sum();
        let viol = if i < m_ub { ax - rhs[i] } else { (ax - rhs[i]).abs() };
        residual = residual.max(viol);
    }
    for (&(lo, hi), &xj) in p.bounds.iter().zip(&xs) {
        residual = residual.max(lo - xj).max(xj - hi);
    }

    Ok(LpSolution {
        status: LpStatus::Optimal,
        x: xs,
        objective,
        duals_ub: y,
        duals_eq,
        residual,
        iterations: tab.iterations,
    })
}

//! Dense-tableau two-phase simplex method with Bland's anti-cycling rule.
//!
//! Problems handled here are small (a few hundred variables at most), so
//! the whole tableau is kept in memory.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// `minimize c^T x` subject to `A_eq x = b_eq`, `A_ub x <= b_ub` and
/// per-variable bounds `lower <= x <= upper`.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram<T> {
    pub objective: Vec<T>,
    pub eq_matrix: Vec<Vec<T>>,
    pub eq_rhs: Vec<T>,
    pub ub_matrix: Vec<Vec<T>>,
    pub ub_rhs: Vec<T>,
    /// `(lower, upper)`; `lower` may be `-inf`, `upper` `+inf`.
    pub bounds: Vec<(T, T)>,
}

impl<T: Real> LinearProgram<T> {
    /// Program over `n` nonnegative variables with no constraints yet.
    pub fn new(objective: Vec<T>) -> Self {
        let n = objective.len();
        Self { objective, bounds: vec![(T::zero(), T::infinity()); n], ..Default::default() }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_eq(&mut self, row: Vec<T>, rhs: T) {
        self.eq_matrix.push(row);
        self.eq_rhs.push(rhs);
    }

    pub fn add_le(&mut self, row: Vec<T>, rhs: T) {
        self.ub_matrix.push(row);
        self.ub_rhs.push(rhs);
    }

    pub fn add_ge(&mut self, row: Vec<T>, rhs: T) {
        self.ub_matrix.push(row.into_iter().map(|v| -v).collect());
        self.ub_rhs.push(-rhs);
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let bad = |m: String| Err(Error::MalformedLp(m));
        if self.bounds.len() != n {
            return bad(format!("{} bounds for {n} variables", self.bounds.len()));
        }
        if self.eq_matrix.len() != self.eq_rhs.len() || self.ub_matrix.len() != self.ub_rhs.len() {
            return bad("row count differs from right-hand side length".into());
        }
        if self.eq_matrix.iter().chain(&self.ub_matrix).any(|r| r.len() != n) {
            return bad("constraint row of wrong length".into());
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == T::infinity() {
                return bad(format!("variable {j} has invalid bounds"));
            }
        }
        let finite = self
            .objective
            .iter()
            .chain(self.eq_rhs.iter())
            .chain(self.ub_rhs.iter())
            .chain(self.eq_matrix.iter().flatten())
            .chain(self.ub_matrix.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return bad("non-finite coefficient".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    pub x: Vec<T>,
    pub value: T,
    /// Multipliers of the equality rows followed by the `<=` rows, such that
    /// `c - A^T y` are the reduced costs; `<=` multipliers are nonpositive.
    pub duals: Vec<T>,
    pub pivots: usize,
}

/// How each original variable maps onto standard-form columns.
#[derive(Debug, Clone, Copy)]
enum VarMap<T> {
    /// `x = offset + col`.
    Shifted { col: usize, offset: T },
    /// `x = pos - neg`.
    Free { pos: usize, neg: usize },
}

struct Tableau<T> {
    /// `rows x (cols + 1)`, last column is the right-hand side.
    a: Vec<T>,
    rows: usize,
    cols: usize,
    basis: Vec<usize>,
    /// Original row index of each tableau row.
    origin: Vec<usize>,
    pivots: usize,
    max_pivots: usize,
    tol: T,
}

impl<T: Real> Tableau<T> {
    fn at(&self, r: usize, c: usize) -> T {
        self.a[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> T {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, r: usize, c: usize, cost: &mut [T]) -> Result<()> {
        self.pivots += 1;
        if self.pivots > self.max_pivots {
            return Err(Error::Breakdown(format!("simplex exceeded {} pivots", self.max_pivots)));
        }
        let w = self.cols + 1;
        let p = self.a[r * w + c];
        for j in 0..w {
            self.a[r * w + j] = self.a[r * w + j] / p;
        }
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.a[i * w + c];
            if f != T::zero() {
                for j in 0..w {
                    self.a[i * w + j] = self.a[i * w + j] - f * self.a[r * w + j];
                }
            }
        }
        let f = cost[c];
        if f != T::zero() {
            for j in 0..w {
                cost[j] = cost[j] - f * self.a[r * w + j];
            }
        }
        self.basis[r] = c;
        Ok(())
    }

    /// Reduced-cost row for costs `c` (length `cols`), last entry `-value`.
    fn reduced_costs(&self, c: &[T]) -> Vec<T> {
        let mut cost: Vec<T> = c.iter().copied().chain(std::iter::once(T::zero())).collect();
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = c[b];
            if cb != T::zero() {
                for j in 0..=self.cols {
                    cost[j] = cost[j] - cb * self.at(r, j);
                }
            }
        }
        cost
    }

    /// Runs primal simplex with Bland's rule on columns where `allowed` holds.
    /// Returns `false` if unbounded.
    fn optimize(&mut self, cost: &mut [T], allowed: &dyn Fn(usize) -> bool) -> Result<bool> {
        loop {
            let entering = (0..self.cols).find(|&j| allowed(j) && cost[j] < -self.tol);
            let Some(c) = entering else { return Ok(true) };
            let mut leave: Option<(usize, T)> = None;
            for r in 0..self.rows {
                let v = self.at(r, c);
                if v > self.tol {
                    let ratio = self.rhs(r).max(T::zero()) / v;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            let tie = (ratio - lratio).abs() <= self.tol * (T::one() + lratio.abs());
                            if (tie && self.basis[r] < self.basis[lr]) || (!tie && ratio < lratio) {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else { return Ok(false) };
            self.pivot(r, c, cost)?;
        }
    }
}

/// Solves `lp` to optimality or reports infeasibility/unboundedness.
pub fn simplex_solve<T: Real>(lp: &LinearProgram<T>) -> Result<LpSolution<T>> {
    lp.validate()?;
    let n = lp.num_vars();
    let zero = T::zero();
    let tol = T::lit(1e-11).max(T::epsilon() * T::lit(64.0));

    // Standard-form columns for the original variables.
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0;
    let mut bound_rows: Vec<(usize, T)> = Vec::new();
    for &(lo, hi) in &lp.bounds {
        if lo.is_finite() {
            maps.push(VarMap::Shifted { col: ncols, offset: lo });
            if hi.is_finite() {
                bound_rows.push((ncols, hi - lo));
            }
            ncols += 1;
        } else {
            maps.push(VarMap::Free { pos: ncols, neg: ncols + 1 });
            if hi.is_finite() {
                return Err(Error::MalformedLp("upper bound on a variable without lower bound".into()));
            }
            ncols += 2;
        }
    }
    let struct_cols = ncols;

    // Rows: equalities, inequalities, bound rows.
    let m_eq = lp.eq_matrix.len();
    let m_ub = lp.ub_matrix.len();
    let m = m_eq + m_ub + bound_rows.len();
    let slack_start = ncols;
    ncols += m_ub + bound_rows.len();

    let expand = |row: &[T], rhs: T| -> (Vec<T>, T) {
        let mut out = vec![zero; struct_cols];
        let mut b = rhs;
        for (j, &v) in row.iter().enumerate() {
            match maps[j] {
                VarMap::Shifted { col, offset } => {
                    out[col] = v;
                    b = b - v * offset;
                }
                VarMap::Free { pos, neg } => {
                    out[pos] = v;
                    out[neg] = -v;
                }
            }
        }
        (out, b)
    };

    let mut rows: Vec<(Vec<T>, T, Option<usize>)> = Vec::with_capacity(m);
    for (row, &rhs) in lp.eq_matrix.iter().zip(&lp.eq_rhs) {
        let (r, b) = expand(row, rhs);
        rows.push((r, b, None));
    }
    for (i, (row, &rhs)) in lp.ub_matrix.iter().zip(&lp.ub_rhs).enumerate() {
        let (r, b) = expand(row, rhs);
        rows.push((r, b, Some(slack_start + i)));
    }
    for (i, &(col, cap)) in bound_rows.iter().enumerate() {
        let mut r = vec![zero; struct_cols];
        r[col] = T::one();
        rows.push((r, cap, Some(slack_start + m_ub + i)));
    }

    // Row equilibration and sign normalization; remember factors for duals.
    let mut row_factor = vec![T::one(); m];
    let art_start = ncols;
    let mut needs_art = vec![false; m];
    for (i, (r, b, slack)) in rows.iter_mut().enumerate() {
        let scale = r.iter().fold(b.abs(), |s, v| s.max(v.abs()));
        let mut f = if scale > zero { T::one() / scale } else { T::one() };
        if *b < zero {
            f = -f;
        }
        row_factor[i] = f;
        for v in r.iter_mut() {
            *v = *v * f;
        }
        *b = *b * f;
        needs_art[i] = slack.is_none() || f < zero;
    }
    let n_art = needs_art.iter().filter(|&&x| x).count();
    let total = ncols + n_art;

    let w = total + 1;
    let mut a = vec![zero; m * w];
    let mut basis = vec![0; m];
    let mut next_art = art_start;
    for (i, (r, b, slack)) in rows.iter().enumerate() {
        a[i * w..i * w + struct_cols].copy_from_slice(r);
        if let Some(s) = slack {
            a[i * w + s] = row_factor[i];
        }
        a[i * w + total] = *b;
        if needs_art[i] {
            a[i * w + next_art] = T::one();
            basis[i] = next_art;
            next_art += 1;
        } else {
            basis[i] = slack.expect("slack row");
        }
    }

    let mut tab = Tableau { a, rows: m, cols: total, basis, origin: (0..m).collect(), pivots: 0, max_pivots: 50_000 + 50 * (m + total), tol };

    // Phase 1.
    if n_art > 0 {
        let c1: Vec<T> = (0..total).map(|j| if j >= art_start { T::one() } else { zero }).collect();
        let mut cost = tab.reduced_costs(&c1);
        tab.optimize(&mut cost, &|_| true)?;
        let infeas = -cost[total];
        if infeas > T::lit(1e-9) {
            return Ok(LpSolution { status: LpStatus::Infeasible, x: vec![], value: T::nan(), duals: vec![], pivots: tab.pivots });
        }
        // Drive remaining artificials out of the basis or drop their rows.
        let mut r = 0;
        while r < tab.rows {
            if tab.basis[r] >= art_start {
                let col = (0..art_start).find(|&j| tab.at(r, j).abs() > tol);
                match col {
                    Some(c) => {
                        let mut dummy = vec![zero; total + 1];
                        tab.pivot(r, c, &mut dummy)?;
                    }
                    None => {
                        // Redundant row.
                        let w = tab.cols + 1;
                        tab.a.drain(r * w..(r + 1) * w);
                        tab.basis.remove(r);
                        tab.origin.remove(r);
                        tab.rows -= 1;
                        continue;
                    }
                }
            }
            r += 1;
        }
    }

    // Phase 2.
    let mut c2 = vec![zero; total];
    for (j, map) in maps.iter().enumerate() {
        match *map {
            VarMap::Shifted { col, .. } => c2[col] = lp.objective[j],
            VarMap::Free { pos, neg } => {
                c2[pos] = lp.objective[j];
                c2[neg] = -lp.objective[j];
            }
        }
    }
    let mut cost = tab.reduced_costs(&c2);
    let bounded = tab.optimize(&mut cost, &|j| j < art_start)?;
    if !bounded {
        return Ok(LpSolution { status: LpStatus::Unbounded, x: vec![], value: T::neg_infinity(), duals: vec![], pivots: tab.pivots });
    }

    let mut col_val = vec![zero; total];
    for (r, &b) in tab.basis.iter().enumerate() {
        col_val[b] = tab.rhs(r).max(zero);
    }
    let x: Vec<T> = maps
        .iter()
        .map(|map| match *map {
            VarMap::Shifted { col, offset } => offset + col_val[col],
            VarMap::Free { pos, neg } => col_val[pos] - col_val[neg],
        })
        .collect();
    let value = lp.objective.iter().zip(&x).map(|(&c, &v)| c * v).sum();

    let duals = row_duals(&rows, &row_factor, &tab, &c2, m_eq + m_ub);

    Ok(LpSolution { status: LpStatus::Optimal, x, value, duals, pivots: tab.pivots })
}

/// Solves `B^T y = c_B` over the rows still in the tableau and maps the
/// result back to the caller's row scaling. Dropped rows get zero.
fn row_duals<T: Real>(
    rows: &[(Vec<T>, T, Option<usize>)],
    row_factor: &[T],
    tab: &Tableau<T>,
    cost: &[T],
    keep: usize,
) -> Vec<T> {
    let struct_cols = rows.first().map_or(0, |r| r.0.len());
    let entry = |i: usize, j: usize| -> T {
        if j < struct_cols {
            rows[i].0[j]
        } else if rows[i].2 == Some(j) {
            row_factor[i]
        } else {
            T::zero()
        }
    };
    let k = tab.basis.len();
    // Row c of the system is column basis[c] of B, i.e. B^T.
    let mut sys: Vec<Vec<T>> = tab
        .basis
        .iter()
        .map(|&j| {
            let mut r: Vec<T> = tab.origin.iter().map(|&i| entry(i, j)).collect();
            r.push(cost[j]);
            r
        })
        .collect();
    let mut y_scaled = vec![T::zero(); rows.len()];
    if let Some(sol) = gauss_solve(&mut sys) {
        for (idx, &i) in tab.origin.iter().enumerate().take(k) {
            y_scaled[i] = sol[idx];
        }
    }
    (0..keep).map(|i| y_scaled[i] * row_factor[i]).collect()
}

fn gauss_solve<T: Real>(a: &mut [Vec<T>]) -> Option<Vec<T>> {
    let n = a.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap())?;
        if a[p][c].abs() <= T::lit(1e-14) {
            return None;
        }
        a.swap(c, p);
        for i in 0..n {
            if i != c {
                let f = a[i][c] / a[c][c];
                for j in c..=n {
                    let v = a[c][j];
                    a[i][j] = a[i][j] - f * v;
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

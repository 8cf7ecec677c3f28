//! Machinery shared by the dual solvers: linear domain constraints on the
//! multipliers, the ellipsoid driver with price scaling, and slot stretching
//! to meet energy budgets.

use std::cell::RefCell;

use log::debug;

use crate::error::Result;
use crate::model::Allocation;
use crate::numerics::{ellipsoid_maximize_until, EllipsoidOptions, OracleAnswer};
use crate::scalar::Real;

/// Linear constraint `c0 + w^T y >= floor` on a multiplier vector.
#[derive(Debug, Clone)]
pub(crate) struct DomainRow<T> {
    pub c0: T,
    pub w: Vec<(usize, T)>,
    pub floor: T,
}

impl<T: Real> DomainRow<T> {
    pub fn new(c0: T, w: Vec<(usize, T)>, floor: T) -> Self {
        Self { c0, w, floor }
    }

    /// `y[i] >= floor`.
    pub fn at_least(i: usize, floor: T) -> Self {
        Self { c0: T::zero(), w: vec![(i, T::one())], floor }
    }

    pub fn eval(&self, y: &[T]) -> T {
        self.c0 + self.w.iter().map(|&(i, v)| v * y[i]).sum::<T>()
    }
}

pub(crate) fn inside<T: Real>(rows: &[DomainRow<T>], y: &[T]) -> bool {
    rows.iter().all(|r| r.eval(y) >= r.floor)
}

/// Deepest violated row at `y` (by distance to its hyperplane) as a cut.
pub(crate) fn domain_cut<T: Real>(rows: &[DomainRow<T>], y: &[T]) -> Option<OracleAnswer<T>> {
    let mut worst: Option<(T, &DomainRow<T>)> = None;
    for r in rows {
        let gap = r.floor - r.eval(y);
        if gap > T::zero() {
            let norm = r.w.iter().map(|&(_, v)| v * v).sum::<T>().sqrt();
            let score = gap / norm;
            if worst.is_none_or(|(s, _)| score > s) {
                worst = Some((score, r));
            }
        }
    }
    worst.map(|(_, r)| {
        let mut normal = vec![T::zero(); y.len()];
        for &(i, v) in &r.w {
            normal[i] = normal[i] - v;
        }
        OracleAnswer::Cut { normal, depth: r.floor - r.eval(y) }
    })
}

/// Smallest `s >= 1` (to bisection accuracy) with `energy(s) <= budget`,
/// for `energy` decreasing in `s`; `None` when no stretch is enough.
pub(crate) fn fit_budget<T: Real>(budget: T, energy: impl Fn(T) -> T) -> Option<T> {
    let one = T::one();
    if energy(one) <= budget {
        return Some(one);
    }
    let two = T::lit(2.0);
    let mut lo = one;
    let mut hi = two;
    let mut doublings = 0;
    while !(energy(hi) <= budget) {
        lo = hi;
        hi = hi * two;
        doublings += 1;
        if doublings > 200 {
            return None;
        }
    }
    for _ in 0..100 {
        let mid = T::lit(0.5) * (lo + hi);
        if energy(mid) <= budget {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= T::epsilon() * hi {
            break;
        }
    }
    Some(hi)
}

/// One evaluation of a dual function at an unscaled multiplier vector.
pub(crate) struct DualEval<T> {
    pub value: T,
    /// Constraint residuals in the multiplier layout (supergradient).
    pub residuals: Vec<T>,
}

/// A dual problem in the form the driver needs.
pub(crate) struct DualSetup<T> {
    pub rows: Vec<DomainRow<T>>,
    /// Factor turning a search coordinate into a multiplier. Time prices use
    /// 1, energy prices `tau / budget`, so all coordinates are O(1).
    pub unit: Vec<T>,
    /// Latency scale; dual values are searched in units of `tau`.
    pub tau: T,
    /// Feasible starting primal and its latency.
    pub reference: Option<(T, Allocation<T>)>,
    pub eps: T,
    /// Stop once `(primal - dual) / primal` falls below this.
    pub gap_target: T,
    /// Skip further restarts once the gap is below this.
    pub gap_accept: T,
    pub max_restarts: usize,
    /// Stop after the first run whose ellipsoid converged, even without a
    /// primal certificate.
    pub accept_converged: bool,
}

pub(crate) struct DualOutcome<T> {
    /// Best dual value (unscaled).
    pub value: T,
    /// Unscaled multipliers achieving it.
    pub point: Vec<T>,
    pub primal: Option<(T, Allocation<T>)>,
    pub iterations: usize,
    pub restarts: usize,
}

/// Maximizes a dual function with the ellipsoid method. `eval` returns the
/// dual value and residuals at an unscaled multiplier vector; `recover`, called
/// whenever the dual value improves, may return a feasible primal
/// `(latency, allocation)` whose best is kept and used as a stopping
/// certificate.
pub(crate) fn maximize_dual<T, E, P>(setup: DualSetup<T>, mut eval: E, mut recover: P) -> Result<DualOutcome<T>>
where
    T: Real,
    E: FnMut(&[T]) -> Result<DualEval<T>>,
    P: FnMut(&[T]) -> Option<(T, Allocation<T>)>,
{
    let n = setup.unit.len();
    let tau = setup.tau;
    let unit = &setup.unit;
    let primal = RefCell::new(setup.reference);
    let mut best_value = T::neg_infinity();
    let mut best_point = Vec::new();
    let mut iterations = 0;
    let mut restarts = 0;

    for attempt in 0..=setup.max_restarts {
        restarts = attempt;
        let mut opts = EllipsoidOptions::for_dim(n);
        opts.eps = setup.eps;
        opts.radius = opts.radius * T::lit(10f64.powi(attempt as i32));
        opts.max_iter *= 1 << attempt;
        let mut seen = T::neg_infinity();
        let oracle = |y: &[T]| -> Result<OracleAnswer<T>> {
            if let Some(cut) = domain_cut(&setup.rows, y) {
                return Ok(cut);
            }
            let m: Vec<T> = y.iter().zip(unit).map(|(&v, &u)| v * u).collect();
            let DualEval { value, residuals } = eval(&m)?;
            let scaled = value / tau;
            if scaled > seen {
                seen = scaled;
                if let Some((lat, alloc)) = recover(&m) {
                    let mut p = primal.borrow_mut();
                    if p.as_ref().is_none_or(|(best, _)| lat < *best) {
                        *p = Some((lat, alloc));
                    }
                }
            }
            let supergradient = residuals.iter().zip(unit).map(|(&r, &u)| r * u / tau).collect();
            Ok(OracleAnswer::Value { value: scaled, supergradient })
        };
        let stop = |bv: T| match primal.borrow().as_ref() {
            Some((p, _)) => *p - bv * tau <= setup.gap_target * *p,
            None => false,
        };
        let out = ellipsoid_maximize_until(oracle, &opts, stop)?;
        iterations += out.iterations;
        if out.best_value * tau > best_value {
            best_value = out.best_value * tau;
            best_point = out.best_point.iter().zip(unit).map(|(&v, &u)| v * u).collect();
        }
        let gap = primal.borrow().as_ref().map(|(p, _)| (*p - best_value) / *p);
        debug!(
            "dual run {attempt}: bound {best_value:e}, gap {gap:?}, {} iterations, converged {}",
            out.iterations, out.converged
        );
        let done = match gap {
            Some(g) => g <= setup.gap_accept,
            None => false,
        } || (setup.accept_converged && out.converged);
        if done {
            break;
        }
    }
    Ok(DualOutcome { value: best_value, point: best_point, primal: primal.into_inner(), iterations, restarts })
}

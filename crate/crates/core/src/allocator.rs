//! Optimal slot, rate and frequency allocation for a fixed assignment.
//!
//! The allocation problem is convex once the assignment is fixed. It is
//! solved through its Lagrangian dual: for a given multiplier vector every
//! slot has a closed-form minimizer (Lambert W for the radio slots, a cube
//! root for the CPU slots), and the concave dual function is maximized with
//! the ellipsoid method. A primal allocation is recovered from the dual
//! iterates and made exactly feasible by stretching slots.
//!
//! Multiplier layout (`3K + 3` entries):
//! `[eta, beta0, lambda0, zeta0, lambda_1..lambda_K, beta_2..beta_K, zeta_1..zeta_K]`
//! where `eta` prices "all offloading ends before helper 1 downloads",
//! `beta_k` helper `k`'s execution deadline, `beta0` the local deadline,
//! `lambda` the energy budgets and `zeta` the frequency caps.

use crate::dual::{fit_budget, inside, maximize_dual, DomainRow, DualEval, DualSetup};
use crate::error::{Error, Result};
use crate::model::{
    canonicalize, compute_energy, total_latency_recursive, transmit_energy, Allocation, Assignment, Loads, Scenario,
};
use crate::numerics::lambert::tilde_f;
use crate::result::{Diagnostics, Scheme, SchemeResult, Status};
use crate::scalar::Real;

/// Smallest admissible value of a closed-form coefficient or energy price.
pub const COEFF_GUARD: f64 = 1e-12;

/// Lagrange multipliers of the allocation problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint<T> {
    pub eta: T,
    pub beta0: T,
    pub lambda0: T,
    pub zeta0: T,
    /// Energy prices of the helpers.
    pub lambda: Vec<T>,
    /// Deadline prices of helpers `2..K` (length `K - 1`).
    pub beta: Vec<T>,
    /// Frequency-cap prices of the helpers.
    pub zeta: Vec<T>,
}

/// Position of each multiplier in the flat vector.
#[derive(Debug, Clone, Copy)]
pub struct DualLayout {
    pub k: usize,
}

impl DualLayout {
    pub const ETA: usize = 0;
    pub const BETA0: usize = 1;
    pub const LAMBDA0: usize = 2;
    pub const ZETA0: usize = 3;

    pub fn dim(self) -> usize {
        3 * self.k + 3
    }

    pub fn lambda(self, k: usize) -> usize {
        4 + k
    }

    /// Index of `beta` for helper `k >= 1` (zero-based helper index).
    pub fn beta(self, k: usize) -> usize {
        debug_assert!(k >= 1);
        3 + self.k + k
    }

    pub fn zeta(self, k: usize) -> usize {
        2 * self.k + 3 + k
    }
}

/// The closed-form coefficients derived from a dual point: `a` prices the
/// download slots, `b` the helper execution windows, `d` the offloading
/// slots and `local` the local execution time.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients<T> {
    pub a: Vec<T>,
    pub b: Vec<T>,
    pub d: Vec<T>,
    pub local: T,
}

impl<T: Real> DualPoint<T> {
    pub fn uniform(k: usize, v: T) -> Self {
        Self {
            eta: v,
            beta0: v,
            lambda0: v,
            zeta0: v,
            lambda: vec![v; k],
            beta: vec![v; k.saturating_sub(1)],
            zeta: vec![v; k],
        }
    }

    pub fn num_helpers(&self) -> usize {
        self.lambda.len()
    }

    pub fn layout(&self) -> DualLayout {
        DualLayout { k: self.num_helpers() }
    }

    pub fn from_slice(k: usize, y: &[T]) -> Self {
        let lay = DualLayout { k };
        assert_eq!(y.len(), lay.dim(), "dual vector length");
        Self {
            eta: y[DualLayout::ETA],
            beta0: y[DualLayout::BETA0],
            lambda0: y[DualLayout::LAMBDA0],
            zeta0: y[DualLayout::ZETA0],
            lambda: (0..k).map(|j| y[lay.lambda(j)]).collect(),
            beta: (1..k).map(|j| y[lay.beta(j)]).collect(),
            zeta: (0..k).map(|j| y[lay.zeta(j)]).collect(),
        }
    }

    pub fn to_vec(&self) -> Vec<T> {
        let lay = self.layout();
        let mut y = vec![T::zero(); lay.dim()];
        y[DualLayout::ETA] = self.eta;
        y[DualLayout::BETA0] = self.beta0;
        y[DualLayout::LAMBDA0] = self.lambda0;
        y[DualLayout::ZETA0] = self.zeta0;
        for j in 0..lay.k {
            y[lay.lambda(j)] = self.lambda[j];
            y[lay.zeta(j)] = self.zeta[j];
            if j >= 1 {
                y[lay.beta(j)] = self.beta[j - 1];
            }
        }
        y
    }

    /// `beta` of helper `k`, zero for the first helper.
    pub fn beta_at(&self, k: usize) -> T {
        if k == 0 {
            T::zero()
        } else {
            self.beta[k - 1]
        }
    }

    pub fn coefficients(&self) -> Coefficients<T> {
        let k = self.num_helpers();
        let one = T::one();
        // suffix[j] = sum_{i >= j} beta_i
        let mut suffix = vec![T::zero(); k + 1];
        for j in (0..k).rev() {
            suffix[j] = suffix[j + 1] + self.beta_at(j);
        }
        let a = (0..k).map(|j| one - self.beta0 - suffix[j + 1]).collect();
        let b = (0..k)
            .map(|j| {
                if j == 0 {
                    one - self.eta - self.beta0 - suffix[1] - self.zeta[0]
                } else {
                    self.beta_at(j) - self.zeta[j]
                }
            })
            .collect();
        let d = (0..k)
            .map(|j| if j == 0 { one - self.beta0 } else { self.eta + suffix[j] })
            .collect();
        Coefficients { a, b, d, local: self.beta0 - self.zeta0 }
    }

    /// True when every multiplier is nonnegative and every coefficient and
    /// energy price is at least [`COEFF_GUARD`].
    pub fn is_interior(&self) -> bool {
        let y = self.to_vec();
        inside(&domain_rows::<T>(self.num_helpers()), &y)
    }
}

/// Slot lengths minimizing the Lagrangian. Entries are `+inf` when the
/// matching coefficient is not positive while the slot carries load.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormTimes<T> {
    pub t_off: Vec<T>,
    pub t_dl: Vec<T>,
    pub t_c: Vec<T>,
    pub t0_c: T,
}

impl<T: Real> ClosedFormTimes<T> {
    pub fn is_finite(&self) -> bool {
        self.t_off.iter().chain(&self.t_dl).chain(&self.t_c).all(|t| t.is_finite()) && self.t0_c.is_finite()
    }

    pub fn to_allocation(&self) -> Allocation<T> {
        Allocation { t_off: self.t_off.clone(), t_dl: self.t_dl.clone(), t_c: self.t_c.clone(), t0_c: self.t0_c }
    }
}

pub(crate) fn radio_slot<T: Real>(bits: T, coeff: T, gain: T, price: T, bandwidth: T) -> T {
    if bits <= T::zero() {
        T::zero()
    } else if coeff <= T::zero() {
        T::infinity()
    } else if price <= T::zero() {
        T::zero()
    } else {
        bits / tilde_f(coeff * gain / price, bandwidth)
    }
}

/// CPU frequency minimizing `coeff * t + price * kappa * c^3 / t^2`.
pub fn optimal_frequency<T: Real>(coeff: T, price: T, kappa: T) -> T {
    (coeff / (T::lit(2.0) * price * kappa)).cbrt()
}

fn cpu_slot<T: Real>(cycles: T, coeff: T, price: T, kappa: T) -> T {
    if cycles <= T::zero() {
        T::zero()
    } else if coeff <= T::zero() {
        T::infinity()
    } else if price <= T::zero() {
        T::zero()
    } else {
        cycles / optimal_frequency(coeff, price, kappa)
    }
}

/// Minimizers of the Lagrangian over the slot lengths for fixed multipliers.
pub fn closed_form_times<T: Real>(scenario: &Scenario<T>, loads: &Loads<T>, dual: &DualPoint<T>) -> ClosedFormTimes<T> {
    let c = dual.coefficients();
    let bw = scenario.bandwidth_hz;
    let k = scenario.num_helpers();
    let mut out = ClosedFormTimes { t_off: vec![T::zero(); k], t_dl: vec![T::zero(); k], t_c: vec![T::zero(); k], t0_c: T::zero() };
    for (j, h) in scenario.helpers.iter().enumerate() {
        out.t_off[j] = radio_slot(loads.offload_bits[j], c.d[j], h.uplink_gain_per_w, dual.lambda0, bw);
        out.t_dl[j] = radio_slot(loads.download_bits[j], c.a[j], h.downlink_gain_per_w, dual.lambda[j], bw);
        out.t_c[j] = cpu_slot(loads.helper_cycles[j], c.b[j], dual.lambda[j], h.capacitance);
    }
    out.t0_c = cpu_slot(loads.local_cycles, c.local, dual.lambda0, scenario.local.capacitance);
    out
}

/// Constraint left-hand sides (feasible when `<= 0`) in the multiplier
/// layout: time relations in seconds, energies in joules.
pub fn constraint_residuals<T: Real>(scenario: &Scenario<T>, loads: &Loads<T>, alloc: &Allocation<T>) -> Result<Vec<T>> {
    let k = scenario.num_helpers();
    let lay = DualLayout { k };
    let bw = scenario.bandwidth_hz;
    let mut r = vec![T::zero(); lay.dim()];
    let head = alloc.t_off[0] + alloc.t_c[0];
    let total_off: T = alloc.t_off.iter().copied().sum();
    let total_dl: T = alloc.t_dl.iter().copied().sum();
    r[DualLayout::ETA] = total_off - head;
    r[DualLayout::BETA0] = alloc.t0_c - head - total_dl;
    let mut e0 = compute_energy(loads.local_cycles, scenario.local.capacitance, alloc.t0_c)?;
    for (j, h) in scenario.helpers.iter().enumerate() {
        e0 = e0 + transmit_energy(loads.offload_bits[j], alloc.t_off[j], h.uplink_gain_per_w, bw)?;
    }
    r[DualLayout::LAMBDA0] = e0 - scenario.local.energy_budget_j;
    r[DualLayout::ZETA0] = loads.local_cycles / scenario.local.max_frequency_hz - alloc.t0_c;
    let mut off_prefix = T::zero();
    let mut dl_prefix = T::zero();
    for (j, h) in scenario.helpers.iter().enumerate() {
        off_prefix = off_prefix + alloc.t_off[j];
        let e = compute_energy(loads.helper_cycles[j], h.capacitance, alloc.t_c[j])?
            + transmit_energy(loads.download_bits[j], alloc.t_dl[j], h.downlink_gain_per_w, bw)?;
        r[lay.lambda(j)] = e - h.energy_budget_j;
        r[lay.zeta(j)] = loads.helper_cycles[j] / h.max_frequency_hz - alloc.t_c[j];
        if j >= 1 {
            r[lay.beta(j)] = alloc.t_c[j] - head - dl_prefix + off_prefix;
        }
        dl_prefix = dl_prefix + alloc.t_dl[j];
    }
    Ok(r)
}

/// Lagrangian at an arbitrary allocation: reformulated latency plus the
/// priced constraint residuals.
pub fn lagrangian<T: Real>(scenario: &Scenario<T>, loads: &Loads<T>, dual: &DualPoint<T>, alloc: &Allocation<T>) -> Result<T> {
    let res = constraint_residuals(scenario, loads, alloc)?;
    let y = dual.to_vec();
    Ok(alloc.reformulated_latency() + y.iter().zip(&res).map(|(&m, &r)| m * r).sum::<T>())
}

/// Dual function value and a supergradient (the constraint residuals at
/// the Lagrangian minimizer).
pub fn dual_value_p2<T: Real>(scenario: &Scenario<T>, loads: &Loads<T>, dual: &DualPoint<T>) -> Result<(T, Vec<T>)> {
    let times = closed_form_times(scenario, loads, dual);
    if !dual.is_interior() || !times.is_finite() {
        return Err(Error::Breakdown("dual point is outside the domain of the closed forms".into()));
    }
    let alloc = times.to_allocation();
    let res = constraint_residuals(scenario, loads, &alloc)?;
    let y = dual.to_vec();
    let value = alloc.reformulated_latency() + y.iter().zip(&res).map(|(&m, &r)| m * r).sum::<T>();
    Ok((value, res))
}

/// Dual domain: nonnegative multipliers, positive energy prices and
/// positive closed-form coefficients.
pub(crate) fn domain_rows<T: Real>(k: usize) -> Vec<DomainRow<T>> {
    let lay = DualLayout { k };
    let one = T::one();
    let guard = T::lit(COEFF_GUARD);
    let mut rows = Vec::new();
    let mut nonneg = |i: usize, floor: T| rows.push(DomainRow::at_least(i, floor));
    nonneg(DualLayout::ETA, T::zero());
    nonneg(DualLayout::BETA0, T::zero());
    nonneg(DualLayout::ZETA0, T::zero());
    nonneg(DualLayout::LAMBDA0, guard);
    for j in 0..k {
        nonneg(lay.lambda(j), guard);
        nonneg(lay.zeta(j), T::zero());
        if j >= 1 {
            nonneg(lay.beta(j), T::zero());
        }
    }
    let betas_from = |from: usize| (from.max(1)..k).map(|i| (lay.beta(i), -one)).collect::<Vec<_>>();
    for j in 0..k {
        // a_j = 1 - beta0 - sum_{i > j} beta_i
        let mut w = vec![(DualLayout::BETA0, -one)];
        w.extend(betas_from(j + 1));
        rows.push(DomainRow::new(one, w, guard));
        // b_j
        if j == 0 {
            let mut w = vec![(DualLayout::ETA, -one), (DualLayout::BETA0, -one), (lay.zeta(0), -one)];
            w.extend(betas_from(1));
            rows.push(DomainRow::new(one, w, guard));
        } else {
            rows.push(DomainRow::new(T::zero(), vec![(lay.beta(j), one), (lay.zeta(j), -one)], guard));
        }
        // d_j
        if j == 0 {
            rows.push(DomainRow::new(one, vec![(DualLayout::BETA0, -one)], guard));
        } else {
            let mut w = vec![(DualLayout::ETA, one)];
            w.extend(betas_from(j).into_iter().map(|(i, v)| (i, -v)));
            rows.push(DomainRow::new(T::zero(), w, guard));
        }
    }
    rows.push(DomainRow::new(T::zero(), vec![(DualLayout::BETA0, one), (DualLayout::ZETA0, -one)], guard));
    rows
}

/// Whether any allocation meets the energy budgets: transmit energy
/// decreases towards `bits * ln 2 / (B * gain)` as slots grow, while
/// computation energy vanishes.
pub fn energy_feasible<T: Real>(scenario: &Scenario<T>, loads: &Loads<T>) -> bool {
    let per_bit = T::LN_2() / scenario.bandwidth_hz;
    let floor0: T = scenario
        .helpers
        .iter()
        .zip(&loads.offload_bits)
        .map(|(h, &b)| b * per_bit / h.uplink_gain_per_w)
        .sum();
    if !(floor0 < scenario.local.energy_budget_j) {
        return false;
    }
    scenario
        .helpers
        .iter()
        .zip(&loads.download_bits)
        .all(|(h, &r)| r * per_bit / h.downlink_gain_per_w < h.energy_budget_j)
}

/// Makes an allocation exactly feasible without touching its latency more
/// than necessary: zero-load slots are dropped, CPU slots are lengthened to
/// respect the frequency caps, every device's slots are stretched by a
/// common factor until its energy fits, and idle time is moved into the
/// ordering slack. Returns `None` when some budget cannot be met.
pub fn repair_allocation<T: Real>(scenario: &Scenario<T>, loads: &Loads<T>, alloc: &Allocation<T>) -> Option<Allocation<T>> {
    let k = scenario.num_helpers();
    let bw = scenario.bandwidth_hz;
    let mut a = alloc.clone();
    let fallback_rate = bw;
    let fix = |t: T, load: T, fallback: T| {
        if load <= T::zero() {
            T::zero()
        } else if t > T::zero() && t.is_finite() {
            t
        } else {
            fallback
        }
    };
    for j in 0..k {
        let h = &scenario.helpers[j];
        a.t_off[j] = fix(a.t_off[j], loads.offload_bits[j], loads.offload_bits[j] / fallback_rate);
        a.t_dl[j] = fix(a.t_dl[j], loads.download_bits[j], loads.download_bits[j] / fallback_rate);
        let min_c = loads.helper_cycles[j] / h.max_frequency_hz;
        a.t_c[j] = fix(a.t_c[j], loads.helper_cycles[j], min_c).max(min_c);
    }
    let min0 = loads.local_cycles / scenario.local.max_frequency_hz;
    a.t0_c = fix(a.t0_c, loads.local_cycles, min0).max(min0);

    let inf = T::infinity();
    let local_energy = |s: T| {
        let mut e = compute_energy(loads.local_cycles, scenario.local.capacitance, s * a.t0_c).unwrap_or(inf);
        for (j, h) in scenario.helpers.iter().enumerate() {
            e = e + transmit_energy(loads.offload_bits[j], s * a.t_off[j], h.uplink_gain_per_w, bw).unwrap_or(inf);
        }
        e
    };
    let s0 = fit_budget(scenario.local.energy_budget_j, local_energy)?;
    for t in a.t_off.iter_mut() {
        *t = *t * s0;
    }
    a.t0_c = a.t0_c * s0;
    for (j, h) in scenario.helpers.iter().enumerate() {
        let (tc, tdl) = (a.t_c[j], a.t_dl[j]);
        let energy = |s: T| {
            compute_energy(loads.helper_cycles[j], h.capacitance, s * tc).unwrap_or(inf)
                + transmit_energy(loads.download_bits[j], s * tdl, h.downlink_gain_per_w, bw).unwrap_or(inf)
        };
        let s = fit_budget(h.energy_budget_j, energy)?;
        a.t_c[j] = tc * s;
        a.t_dl[j] = tdl * s;
    }
    canonicalize(&mut a, true);
    Some(a)
}

/// A cheap feasible allocation: every link at rate `B`, every CPU at its
/// cap, then repaired. Used as the latency scale of the dual problem.
pub fn reference_allocation<T: Real>(scenario: &Scenario<T>, loads: &Loads<T>) -> Option<Allocation<T>> {
    let bw = scenario.bandwidth_hz;
    let base = Allocation {
        t_off: loads.offload_bits.iter().map(|&b| b / bw).collect(),
        t_dl: loads.download_bits.iter().map(|&r| r / bw).collect(),
        t_c: loads.helper_cycles.iter().zip(&scenario.helpers).map(|(&c, h)| c / h.max_frequency_hz).collect(),
        t0_c: loads.local_cycles / scenario.local.max_frequency_hz,
    };
    repair_allocation(scenario, loads, &base)
}

#[derive(Debug, Clone)]
pub struct P2Options<T> {
    /// Relative primal-dual gap accepted as optimal.
    pub gap_tol: T,
    /// Accuracy of the scaled dual maximization.
    pub eps: T,
    /// Extra ellipsoid runs with a larger ball when the gap stays open.
    pub max_restarts: usize,
}

impl<T: Real> Default for P2Options<T> {
    fn default() -> Self {
        Self { gap_tol: T::lit(1e-4), eps: T::lit(1e-10).max(T::epsilon() * T::lit(100.0)), max_restarts: 2 }
    }
}

/// Outcome of the allocation problem for one load vector.
#[derive(Debug, Clone)]
pub struct P2Solution<T> {
    pub allocation: Allocation<T>,
    /// Frame latency of `allocation`; `+inf` when infeasible.
    pub latency: T,
    /// Best dual bound (a lower bound on the optimal latency).
    pub dual_bound: T,
    pub status: Status,
    pub iterations: usize,
    pub restarts: usize,
    pub best_dual: Option<DualPoint<T>>,
}

impl<T: Real> P2Solution<T> {
    pub fn relative_gap(&self) -> T {
        if self.latency > T::zero() {
            ((self.latency - self.dual_bound) / self.latency).max(T::zero())
        } else {
            T::zero()
        }
    }

    fn diagnostics(&self) -> Diagnostics {
        Diagnostics {
            dual_bound_s: Some(self.dual_bound.as_f64()),
            relative_gap: Some(self.relative_gap().as_f64()),
            iterations: self.iterations,
            restarts: self.restarts,
            subproblems: 1,
            notes: Vec::new(),
        }
    }
}

/// Solves the allocation problem for the given device loads.
pub fn solve_p2_loads<T: Real>(scenario: &Scenario<T>, loads: &Loads<T>, opts: &P2Options<T>) -> Result<P2Solution<T>> {
    let k = scenario.num_helpers();
    let mut sol = P2Solution {
        allocation: Allocation::zeros(k),
        latency: T::infinity(),
        dual_bound: T::infinity(),
        status: Status::Infeasible,
        iterations: 0,
        restarts: 0,
        best_dual: None,
    };
    if !energy_feasible(scenario, loads) {
        return Ok(sol);
    }
    let Some(reference) = reference_allocation(scenario, loads) else {
        return Ok(sol);
    };
    let tau = total_latency_recursive(&reference);
    if !(tau > T::zero()) {
        // Nothing to transmit or compute.
        sol.latency = T::zero();
        sol.dual_bound = T::zero();
        sol.status = Status::Optimal;
        return Ok(sol);
    }

    let lay = DualLayout { k };
    let mut unit = vec![T::one(); lay.dim()];
    unit[DualLayout::LAMBDA0] = tau / scenario.local.energy_budget_j;
    for (j, h) in scenario.helpers.iter().enumerate() {
        unit[lay.lambda(j)] = tau / h.energy_budget_j;
    }
    let setup = DualSetup {
        rows: domain_rows(k),
        unit,
        tau,
        reference: Some((tau, reference)),
        eps: opts.eps,
        gap_target: opts.gap_tol * T::lit(0.1),
        gap_accept: opts.gap_tol,
        max_restarts: opts.max_restarts,
        accept_converged: false,
    };
    let eval = |m: &[T]| -> Result<DualEval<T>> {
        let dual = DualPoint::from_slice(k, m);
        let times = closed_form_times(scenario, loads, &dual);
        if !times.is_finite() {
            return Err(Error::Breakdown("closed-form slot is unbounded inside the dual domain".into()));
        }
        let alloc = times.to_allocation();
        let residuals = constraint_residuals(scenario, loads, &alloc)?;
        let value = alloc.reformulated_latency() + m.iter().zip(&residuals).map(|(&y, &r)| y * r).sum::<T>();
        Ok(DualEval { value, residuals })
    };
    let recover = |m: &[T]| {
        let times = closed_form_times(scenario, loads, &DualPoint::from_slice(k, m));
        let fixed = repair_allocation(scenario, loads, &times.to_allocation())?;
        Some((total_latency_recursive(&fixed), fixed))
    };
    let out = maximize_dual(setup, eval, recover)?;
    let (latency, allocation) = out.primal.expect("reference allocation is always kept");
    sol.allocation = allocation;
    sol.latency = latency;
    sol.dual_bound = out.value.min(latency);
    sol.iterations = out.iterations;
    sol.restarts = out.restarts;
    sol.best_dual = (!out.point.is_empty()).then(|| DualPoint::from_slice(k, &out.point));
    sol.status = if sol.relative_gap() <= opts.gap_tol { Status::Optimal } else { Status::Suboptimal };
    Ok(sol)
}

/// Solves the allocation problem for a binary assignment and packages the
/// result under `scheme`.
pub fn solve_p2_as<T: Real>(scheme: Scheme, scenario: &Scenario<T>, assignment: &Assignment<T>) -> Result<SchemeResult<T>> {
    assignment.validate(scenario, false, T::lit(1e-9))?;
    let loads = Loads::new(scenario, assignment);
    let sol = solve_p2_loads(scenario, &loads, &P2Options::default())?;
    if sol.status == Status::Infeasible {
        return Ok(SchemeResult::infeasible(
            scheme,
            scenario,
            assignment.clone(),
            "offloaded data needs more than an energy budget even with unbounded slots",
        ));
    }
    let diag = sol.diagnostics();
    SchemeResult::new(scheme, scenario, assignment.clone(), sol.allocation, sol.latency, sol.status, diag)
}

/// Optimal allocation for a fixed binary assignment.
pub fn solve_p2<T: Real>(scenario: &Scenario<T>, assignment: &Assignment<T>) -> Result<SchemeResult<T>> {
    solve_p2_as(Scheme::Joint, scenario, assignment)
}

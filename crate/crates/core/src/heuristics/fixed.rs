//! Fixed-frequency benchmark: every CPU runs at its cap, so only the radio
//! slots and the assignment are optimized.
//!
//! With computation times fixed, the start `I1` of helper 1's download can no
//! longer be folded into helper 1's execution window, so it stays a variable.
//! The multipliers, in order, are
//!
//! ```text
//! eta      sum t_off          <= I1
//! nu       t1_off + t1_c      <= I1
//! beta0    t0_c               <= I1 + sum t_dl
//! lambda0  local energy       <= E0
//! lambda_k helper k energy    <= E_k
//! beta_k   (k >= 2) t_k_c     <= I1 + sum_{j<k} t_j_dl - sum_{j<=k} t_j_off
//! ```
//!
//! for a dimension of `2K + 3`. `I1 >= 0` enters the Lagrangian with
//! coefficient `1 - eta - nu - beta0 - sum beta_k`, which the domain keeps
//! nonnegative, so the minimizing `I1` is zero.

use crate::allocator::{radio_slot, P2Options, P2Solution, COEFF_GUARD};
use crate::dual::{fit_budget, maximize_dual, DomainRow, DualEval, DualSetup};
use crate::error::{Error, Result};
use crate::model::{
    canonicalize, device_usage, rate_fn, total_latency_recursive, transmit_energy, Allocation,
    Assignment, Loads, Scenario,
};
use crate::numerics::lambert::tilde_f;
use crate::relax::{energy_floor_feasible, latency_scale, retrieve, round_and_adjust, solve_assignment_lp, spread_assignment, FrozenSpeeds};
use crate::result::{Diagnostics, Scheme, SchemeResult, Status};
use crate::scalar::Real;

/// Multipliers of the fixed-frequency problem.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedDual<T> {
    pub eta: T,
    pub nu: T,
    pub beta0: T,
    pub lambda0: T,
    pub lambda: Vec<T>,
    /// Deadline prices of helpers `2..K` (length `K - 1`).
    pub beta: Vec<T>,
}

/// Position of each multiplier in the flat vector.
#[derive(Debug, Clone, Copy)]
pub struct FixedLayout {
    pub k: usize,
}

impl FixedLayout {
    pub const ETA: usize = 0;
    pub const NU: usize = 1;
    pub const BETA0: usize = 2;
    pub const LAMBDA0: usize = 3;

    pub fn dim(self) -> usize {
        2 * self.k + 3
    }

    pub fn lambda(self, k: usize) -> usize {
        4 + k
    }

    pub fn beta(self, k: usize) -> usize {
        debug_assert!(k >= 1);
        3 + self.k + k
    }
}

/// Radio-slot coefficients (`a` downloads, `d` offloads) and the price of `I1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedCoefficients<T> {
    pub a: Vec<T>,
    pub d: Vec<T>,
    pub head: T,
}

impl<T: Real> FixedDual<T> {
    pub fn from_slice(k: usize, y: &[T]) -> Self {
        let lay = FixedLayout { k };
        assert_eq!(y.len(), lay.dim(), "dual vector length");
        Self {
            eta: y[FixedLayout::ETA],
            nu: y[FixedLayout::NU],
            beta0: y[FixedLayout::BETA0],
            lambda0: y[FixedLayout::LAMBDA0],
            lambda: (0..k).map(|j| y[lay.lambda(j)]).collect(),
            beta: (1..k).map(|j| y[lay.beta(j)]).collect(),
        }
    }

    pub fn to_vec(&self) -> Vec<T> {
        let k = self.lambda.len();
        let lay = FixedLayout { k };
        let mut y = vec![T::zero(); lay.dim()];
        y[FixedLayout::ETA] = self.eta;
        y[FixedLayout::NU] = self.nu;
        y[FixedLayout::BETA0] = self.beta0;
        y[FixedLayout::LAMBDA0] = self.lambda0;
        for j in 0..k {
            y[lay.lambda(j)] = self.lambda[j];
            if j >= 1 {
                y[lay.beta(j)] = self.beta[j - 1];
            }
        }
        y
    }

    fn beta_at(&self, k: usize) -> T {
        if k == 0 {
            T::zero()
        } else {
            self.beta[k - 1]
        }
    }

    /// Deadline price on helper `k`'s execution: `nu` for the first helper.
    fn execution_price(&self, k: usize) -> T {
        if k == 0 {
            self.nu
        } else {
            self.beta[k - 1]
        }
    }

    pub fn coefficients(&self) -> FixedCoefficients<T> {
        let k = self.lambda.len();
        let one = T::one();
        let mut suffix = vec![T::zero(); k + 1];
        for j in (0..k).rev() {
            suffix[j] = suffix[j + 1] + self.beta_at(j);
        }
        FixedCoefficients {
            a: (0..k).map(|j| one - self.beta0 - suffix[j + 1]).collect(),
            d: (0..k)
                .map(|j| if j == 0 { self.eta + self.nu + suffix[1] } else { self.eta + suffix[j] })
                .collect(),
            head: one - self.eta - self.nu - self.beta0 - suffix[0],
        }
    }
}

fn fixed_domain_rows<T: Real>(k: usize) -> Vec<DomainRow<T>> {
    let lay = FixedLayout { k };
    let one = T::one();
    let guard = T::lit(COEFF_GUARD);
    let mut rows = vec![
        DomainRow::at_least(FixedLayout::ETA, T::zero()),
        DomainRow::at_least(FixedLayout::NU, T::zero()),
        DomainRow::at_least(FixedLayout::BETA0, T::zero()),
        DomainRow::at_least(FixedLayout::LAMBDA0, guard),
    ];
    for j in 0..k {
        rows.push(DomainRow::at_least(lay.lambda(j), guard));
        if j >= 1 {
            rows.push(DomainRow::at_least(lay.beta(j), T::zero()));
        }
    }
    let betas_from = |from: usize, s: T| (from.max(1)..k).map(|i| (lay.beta(i), s)).collect::<Vec<_>>();
    for j in 0..k {
        let mut w = vec![(FixedLayout::BETA0, -one)];
        w.extend(betas_from(j + 1, -one));
        rows.push(DomainRow::new(one, w, guard));
        let mut w = vec![(FixedLayout::ETA, one)];
        if j == 0 {
            w.push((FixedLayout::NU, one));
        }
        w.extend(betas_from(j, one));
        rows.push(DomainRow::new(T::zero(), w, guard));
    }
    let mut w = vec![(FixedLayout::ETA, -one), (FixedLayout::NU, -one), (FixedLayout::BETA0, -one)];
    w.extend(betas_from(1, -one));
    rows.push(DomainRow::new(one, w, T::zero()));
    rows
}

/// Execution times at the frequency caps.
fn capped_times<T: Real>(scenario: &Scenario<T>, loads: &Loads<T>) -> (Vec<T>, T) {
    let tc = loads.helper_cycles.iter().zip(&scenario.helpers).map(|(&c, h)| c / h.max_frequency_hz).collect();
    (tc, loads.local_cycles / scenario.local.max_frequency_hz)
}

/// Computation energy at the caps: helpers first, local user last.
fn capped_energy<T: Real>(scenario: &Scenario<T>, loads: &Loads<T>) -> Vec<T> {
    let mut e: Vec<T> = loads
        .helper_cycles
        .iter()
        .zip(&scenario.helpers)
        .map(|(&c, h)| h.capacitance * c * h.max_frequency_hz * h.max_frequency_hz)
        .collect();
    let f0 = scenario.local.max_frequency_hz;
    e.push(scenario.local.capacitance * loads.local_cycles * f0 * f0);
    e
}

/// Whether the budgets leave room for transmission once computation at the
/// caps is paid for.
pub fn fixed_energy_feasible<T: Real>(scenario: &Scenario<T>, loads: &Loads<T>) -> bool {
    let per_bit = T::LN_2() / scenario.bandwidth_hz;
    let ec = capped_energy(scenario, loads);
    let k = scenario.num_helpers();
    let floor0: T = scenario.helpers.iter().zip(&loads.offload_bits).map(|(h, &b)| b * per_bit / h.uplink_gain_per_w).sum();
    if !(ec[k] + floor0 < scenario.local.energy_budget_j) {
        return false;
    }
    scenario
        .helpers
        .iter()
        .enumerate()
        .all(|(j, h)| ec[j] + loads.download_bits[j] * per_bit / h.downlink_gain_per_w < h.energy_budget_j)
}

/// Radio slots minimizing the Lagrangian.
fn closed_form_radio<T: Real>(scenario: &Scenario<T>, loads: &Loads<T>, dual: &FixedDual<T>) -> (Vec<T>, Vec<T>) {
    let c = dual.coefficients();
    let bw = scenario.bandwidth_hz;
    let off = scenario
        .helpers
        .iter()
        .enumerate()
        .map(|(j, h)| radio_slot(loads.offload_bits[j], c.d[j], h.uplink_gain_per_w, dual.lambda0, bw))
        .collect();
    let dl = scenario
        .helpers
        .iter()
        .enumerate()
        .map(|(j, h)| radio_slot(loads.download_bits[j], c.a[j], h.downlink_gain_per_w, dual.lambda[j], bw))
        .collect();
    (off, dl)
}

/// Constraint residuals in the multiplier layout, for radio slots and `I1`.
pub fn fixed_residuals<T: Real>(
    scenario: &Scenario<T>,
    loads: &Loads<T>,
    t_off: &[T],
    t_dl: &[T],
    i1: T,
) -> Result<Vec<T>> {
    let k = scenario.num_helpers();
    let lay = FixedLayout { k };
    let bw = scenario.bandwidth_hz;
    let (tc, t0) = capped_times(scenario, loads);
    let ec = capped_energy(scenario, loads);
    let mut r = vec![T::zero(); lay.dim()];
    r[FixedLayout::ETA] = t_off.iter().copied().sum::<T>() - i1;
    r[FixedLayout::NU] = t_off[0] + tc[0] - i1;
    r[FixedLayout::BETA0] = t0 - i1 - t_dl.iter().copied().sum::<T>();
    let mut e0 = ec[k];
    let mut off_prefix = T::zero();
    let mut dl_prefix = T::zero();
    for (j, h) in scenario.helpers.iter().enumerate() {
        e0 = e0 + transmit_energy(loads.offload_bits[j], t_off[j], h.uplink_gain_per_w, bw)?;
        r[lay.lambda(j)] = ec[j] + transmit_energy(loads.download_bits[j], t_dl[j], h.downlink_gain_per_w, bw)?
            - h.energy_budget_j;
        off_prefix = off_prefix + t_off[j];
        if j >= 1 {
            r[lay.beta(j)] = tc[j] - i1 - dl_prefix + off_prefix;
        }
        dl_prefix = dl_prefix + t_dl[j];
    }
    r[FixedLayout::LAMBDA0] = e0 - scenario.local.energy_budget_j;
    Ok(r)
}

/// Dual function and supergradient for fixed loads.
pub fn dual_value_fixed<T: Real>(scenario: &Scenario<T>, loads: &Loads<T>, dual: &FixedDual<T>) -> Result<(T, Vec<T>)> {
    let y = dual.to_vec();
    if !crate::dual::inside(&fixed_domain_rows(scenario.num_helpers()), &y) {
        return Err(Error::Breakdown("dual point is outside the domain of the closed forms".into()));
    }
    let (off, dl) = closed_form_radio(scenario, loads, dual);
    if off.iter().chain(&dl).any(|t| !t.is_finite()) {
        return Err(Error::Breakdown("closed-form slot is unbounded inside the dual domain".into()));
    }
    let res = fixed_residuals(scenario, loads, &off, &dl, T::zero())?;
    let value = dl.iter().copied().sum::<T>() + y.iter().zip(&res).map(|(&m, &r)| m * r).sum::<T>();
    Ok((value, res))
}

/// Feasible allocation from radio slots: each device's radio slots are
/// stretched until its budget holds, CPUs stay at their caps, then idle
/// time is absorbed by helper 1's execution window and the downloads.
fn repair_fixed<T: Real>(scenario: &Scenario<T>, loads: &Loads<T>, t_off: &[T], t_dl: &[T]) -> Option<Allocation<T>> {
    let bw = scenario.bandwidth_hz;
    let inf = T::infinity();
    let ec = capped_energy(scenario, loads);
    let k = scenario.num_helpers();
    let fix = |t: T, load: T| {
        if load <= T::zero() {
            T::zero()
        } else if t > T::zero() && t.is_finite() {
            t
        } else {
            load / bw
        }
    };
    let off: Vec<T> = t_off.iter().zip(&loads.offload_bits).map(|(&t, &b)| fix(t, b)).collect();
    let mut dl: Vec<T> = t_dl.iter().zip(&loads.download_bits).map(|(&t, &b)| fix(t, b)).collect();
    let s0 = fit_budget(scenario.local.energy_budget_j - ec[k], |s: T| {
        scenario
            .helpers
            .iter()
            .enumerate()
            .map(|(j, h)| transmit_energy(loads.offload_bits[j], s * off[j], h.uplink_gain_per_w, bw).unwrap_or(inf))
            .sum()
    })?;
    for (j, h) in scenario.helpers.iter().enumerate() {
        let t = dl[j];
        let s = fit_budget(h.energy_budget_j - ec[j], |s: T| {
            transmit_energy(loads.download_bits[j], s * t, h.downlink_gain_per_w, bw).unwrap_or(inf)
        })?;
        dl[j] = t * s;
    }
    let (t_c, t0_c) = capped_times(scenario, loads);
    let mut a = Allocation { t_off: off.iter().map(|&t| t * s0).collect(), t_dl: dl, t_c, t0_c };
    canonicalize(&mut a, true);
    Some(a)
}

/// Minimum latency for given loads with every CPU at its cap.
pub fn solve_fixed_loads<T: Real>(scenario: &Scenario<T>, loads: &Loads<T>, opts: &P2Options<T>) -> Result<P2Solution<T>> {
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
    if !fixed_energy_feasible(scenario, loads) {
        return Ok(sol);
    }
    let bw = scenario.bandwidth_hz;
    let base_off: Vec<T> = loads.offload_bits.iter().map(|&b| b / bw).collect();
    let base_dl: Vec<T> = loads.download_bits.iter().map(|&b| b / bw).collect();
    let Some(reference) = repair_fixed(scenario, loads, &base_off, &base_dl) else {
        return Ok(sol);
    };
    let tau = total_latency_recursive(&reference);
    if !(tau > T::zero()) {
        sol.allocation = reference;
        sol.latency = T::zero();
        sol.dual_bound = T::zero();
        sol.status = Status::Optimal;
        return Ok(sol);
    }
    let lay = FixedLayout { k };
    let mut unit = vec![T::one(); lay.dim()];
    unit[FixedLayout::LAMBDA0] = tau / scenario.local.energy_budget_j;
    for (j, h) in scenario.helpers.iter().enumerate() {
        unit[lay.lambda(j)] = tau / h.energy_budget_j;
    }
    let setup = DualSetup {
        rows: fixed_domain_rows(k),
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
        let (value, residuals) = dual_value_fixed(scenario, loads, &FixedDual::from_slice(k, m))?;
        Ok(DualEval { value, residuals })
    };
    let recover = |m: &[T]| {
        let (off, dl) = closed_form_radio(scenario, loads, &FixedDual::from_slice(k, m));
        let a = repair_fixed(scenario, loads, &off, &dl)?;
        Some((total_latency_recursive(&a), a))
    };
    let out = maximize_dual(setup, eval, recover)?;
    let (latency, allocation) = out.primal.expect("reference allocation is always kept");
    sol.allocation = allocation;
    sol.latency = latency;
    sol.dual_bound = out.value.min(latency);
    sol.iterations = out.iterations;
    sol.restarts = out.restarts;
    sol.status = if sol.relative_gap() <= opts.gap_tol { Status::Optimal } else { Status::Suboptimal };
    Ok(sol)
}

/// Fixed-frequency allocation for a binary assignment. Energies and
/// frequencies are reported with every loaded CPU at its cap; helper 1's
/// execution window may include idle time.
pub fn solve_fixed_as<T: Real>(scheme: Scheme, scenario: &Scenario<T>, assignment: &Assignment<T>) -> Result<SchemeResult<T>> {
    assignment.validate(scenario, false, T::lit(1e-9))?;
    let loads = Loads::new(scenario, assignment);
    let sol = solve_fixed_loads(scenario, &loads, &P2Options::default())?;
    if sol.status == Status::Infeasible {
        return Ok(SchemeResult::infeasible(
            scheme,
            scenario,
            assignment.clone(),
            "computation at the frequency caps leaves no energy for transmission",
        ));
    }
    let diag = Diagnostics {
        dual_bound_s: Some(sol.dual_bound.as_f64()),
        relative_gap: Some(sol.relative_gap().as_f64()),
        iterations: sol.iterations,
        restarts: sol.restarts,
        subproblems: 1,
        notes: Vec::new(),
    };
    let mut at_caps = sol.allocation.clone();
    at_caps.t_c = capped_times(scenario, &loads).0;
    let (energy, freq) = device_usage(scenario, &loads, &at_caps)?;
    let mut r = SchemeResult::new(scheme, scenario, assignment.clone(), sol.allocation, sol.latency, sol.status, diag)?;
    r.energy_j = energy;
    r.frequency_hz = freq;
    Ok(r)
}

/// Lagrangian cost of each task on each device at a fixed-frequency dual point.
pub fn fixed_phi_coefficients<T: Real>(scenario: &Scenario<T>, dual: &FixedDual<T>) -> Vec<Vec<T>> {
    let c = dual.coefficients();
    let bw = scenario.bandwidth_hz;
    let per_bit = |coeff: T, price: T, gain: T| {
        let x = tilde_f(coeff * gain / price, bw);
        coeff / x + price * rate_fn(x, bw) / (gain * x)
    };
    let costs: Vec<(T, T, T)> = scenario
        .helpers
        .iter()
        .enumerate()
        .map(|(j, h)| {
            let f = h.max_frequency_hz;
            (
                per_bit(c.d[j], dual.lambda0, h.uplink_gain_per_w),
                per_bit(c.a[j], dual.lambda[j], h.downlink_gain_per_w),
                dual.lambda[j] * h.capacitance * f * f + dual.execution_price(j) / f,
            )
        })
        .collect();
    let loc = &scenario.local;
    let f0 = loc.max_frequency_hz;
    let local = dual.beta0 / f0 + dual.lambda0 * loc.capacitance * f0 * f0;
    let term = |size: T, unit: T| if size > T::zero() { size * unit } else { T::zero() };
    scenario
        .tasks
        .iter()
        .map(|t| {
            let mut row: Vec<T> = costs
                .iter()
                .map(|&(off, dl, cyc)| term(t.input_bits, off) + term(t.output_bits, dl) + term(t.cycles, cyc))
                .collect();
            row.push(term(t.cycles, local));
            row
        })
        .collect()
}

/// Dual function of the relaxed fixed-frequency problem, its supergradient
/// and the minimizing weights.
pub fn dual_value_fixed_relaxed<T: Real>(scenario: &Scenario<T>, dual: &FixedDual<T>) -> Result<(T, Vec<T>, Assignment<T>)> {
    if !crate::dual::inside(&fixed_domain_rows(scenario.num_helpers()), &dual.to_vec()) {
        return Err(Error::Breakdown("dual point is outside the domain of the closed forms".into()));
    }
    let (pi, lp_value) = solve_assignment_lp(&fixed_phi_coefficients(scenario, dual))?;
    let loads = Loads::new(scenario, &pi);
    let (off, dl) = closed_form_radio(scenario, &loads, dual);
    let res = fixed_residuals(scenario, &loads, &off, &dl, T::zero())?;
    let budgets = dual.lambda0 * scenario.local.energy_budget_j
        + dual.lambda.iter().zip(&scenario.helpers).map(|(&l, h)| l * h.energy_budget_j).sum::<T>();
    Ok((lp_value - budgets, res, pi))
}

/// The fixed-frequency scheme: relax the assignment, retrieve and round it
/// as in the joint scheme, then allocate the radio slots.
pub fn solve_fixed_frequency<T: Real>(scenario: &Scenario<T>) -> Result<SchemeResult<T>> {
    let k = scenario.num_helpers();
    let loc = &scenario.local;
    let f0 = loc.max_frequency_hz;
    let feasible = energy_floor_feasible(
        scenario,
        |j| {
            let h = &scenario.helpers[j];
            h.capacitance * h.max_frequency_hz * h.max_frequency_hz
        },
        loc.capacitance * f0 * f0,
    )?;
    if !feasible {
        return Ok(SchemeResult::infeasible(
            Scheme::Fixed,
            scenario,
            spread_assignment(scenario),
            "computation at the frequency caps exceeds the energy budgets for every assignment",
        ));
    }
    let tau = latency_scale(scenario);
    let lay = FixedLayout { k };
    let mut unit = vec![T::one(); lay.dim()];
    unit[FixedLayout::LAMBDA0] = tau / loc.energy_budget_j;
    for (j, h) in scenario.helpers.iter().enumerate() {
        unit[lay.lambda(j)] = tau / h.energy_budget_j;
    }
    let setup = DualSetup {
        rows: fixed_domain_rows(k),
        unit,
        tau,
        reference: None,
        eps: T::lit(1e-6).max(T::epsilon() * T::lit(100.0)),
        gap_target: T::zero(),
        gap_accept: T::zero(),
        max_restarts: 1,
        accept_converged: true,
    };
    let eval = |m: &[T]| -> Result<DualEval<T>> {
        let (value, residuals, _) = dual_value_fixed_relaxed(scenario, &FixedDual::from_slice(k, m))?;
        Ok(DualEval { value, residuals })
    };
    let out = maximize_dual(setup, eval, |_| None)?;
    let dual = FixedDual::from_slice(k, &out.point);
    let c = dual.coefficients();
    let bw = scenario.bandwidth_hz;
    let speeds = FrozenSpeeds {
        offload_rate: scenario
            .helpers
            .iter()
            .enumerate()
            .map(|(j, h)| tilde_f(c.d[j] * h.uplink_gain_per_w / dual.lambda0, bw))
            .collect(),
        download_rate: scenario
            .helpers
            .iter()
            .enumerate()
            .map(|(j, h)| tilde_f(c.a[j] * h.downlink_gain_per_w / dual.lambda[j], bw))
            .collect(),
        helper_frequency: scenario.helpers.iter().map(|h| h.max_frequency_hz).collect(),
        local_frequency: f0,
    };
    let (fractional, slack) = retrieve(scenario, &speeds, tau, || {
        Ok(solve_assignment_lp(&fixed_phi_coefficients(scenario, &dual))?.0)
    })?;
    let assignment = round_and_adjust(&fractional)?;
    let mut r = solve_fixed_as(Scheme::Fixed, scenario, &assignment)?;
    if r.is_feasible() {
        let lb = out.value.min(r.latency_s);
        r.diagnostics.dual_bound_s = Some(lb.as_f64());
        r.diagnostics.relative_gap = Some(((r.latency_s - lb) / r.latency_s).max(T::zero()).as_f64());
        r.diagnostics.iterations += out.iterations;
        if r.diagnostics.relative_gap.is_some_and(|g| g > 1e-4) {
            r.status = Status::Suboptimal;
        }
    }
    r.diagnostics.notes.push(match slack {
        Some(s) => format!("retrieval LP solved with slack {:e}", s.as_f64()),
        None => "retrieval LP infeasible at every slack; used the LP1 weights".to_string(),
    });
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocator::solve_p2_loads;
    use crate::model::{check_feasible, CheckOptions};
    use crate::scenario::{gen_instance, GenConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(k: usize, l: usize, seed: u64) -> Scenario<f64> {
        gen_instance(&GenConfig { helpers: k, tasks: l, seed, ..GenConfig::default() }, 0).unwrap()
    }

    #[test]
    fn layout_round_trip() {
        let y: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let d = FixedDual::from_slice(3, &y);
        assert_eq!(d.to_vec(), y);
        assert_eq!(FixedLayout { k: 3 }.dim(), 9);
    }

    #[test]
    fn dual_value_matches_finite_differences() {
        let s = instance(2, 5, 3);
        let asg = Assignment::from_devices(&[0, 1, 2, 0, 1], 3);
        let loads = Loads::new(&s, &asg);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        while checked < 10 {
            let mut y: Vec<f64> = (0..7).map(|_| rng.random_range(0.0..0.2)).collect();
            y[FixedLayout::LAMBDA0] = rng.random_range(1.0..20.0);
            y[4] = rng.random_range(0.1..5.0);
            y[5] = rng.random_range(0.1..5.0);
            let d = FixedDual::from_slice(2, &y);
            let Ok((g, res)) = dual_value_fixed(&s, &loads, &d) else { continue };
            // The Lagrangian is minimized, so the value is concave and the
            // residuals form a supergradient.
            for i in 0..7 {
                let mut z = y.clone();
                z[i] += 1e-3 * (1.0 + y[i]);
                if let Ok((gz, _)) = dual_value_fixed(&s, &loads, &FixedDual::from_slice(2, &z)) {
                    assert!(gz <= g + res[i] * (z[i] - y[i]) + 1e-12 * g.abs().max(1e-9));
                }
            }
            checked += 1;
        }
    }

    #[test]
    fn fixed_is_never_better_than_joint_per_assignment() {
        for seed in 0..4 {
            let s = instance(2, 4, 60 + seed);
            for dev in [[0, 1, 2, 2], [2, 1, 0, 0], [0, 0, 1, 2]] {
                let asg = Assignment::from_devices(&dev, 3);
                let loads = Loads::new(&s, &asg);
                let fx = solve_fixed_loads(&s, &loads, &P2Options::default()).unwrap();
                if fx.status == Status::Infeasible {
                    continue;
                }
                let p2 = solve_p2_loads(&s, &loads, &P2Options::default()).unwrap();
                assert!(p2.latency <= fx.latency * (1.0 + 1e-4), "{} vs {}", p2.latency, fx.latency);
                assert!(fx.relative_gap() <= 1e-4);
                let r = solve_fixed_as(Scheme::Fixed, &s, &asg).unwrap();
                let rep = check_feasible(&s, &r.assignment, &r.allocation, &CheckOptions::default());
                assert!(rep.passes(), "{:?}", rep.failures().collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn tiny_budgets_are_infeasible() {
        let mut s = instance(2, 4, 9);
        let cmin = s.tasks.iter().map(|t| t.cycles).fold(f64::INFINITY, f64::min);
        for h in &mut s.helpers {
            h.energy_budget_j = 0.5 * h.capacitance * cmin * h.max_frequency_hz.powi(2);
        }
        let f0 = s.local.max_frequency_hz;
        s.local.energy_budget_j = 0.5 * s.local.capacitance * cmin * f0 * f0;
        let r = solve_fixed_frequency(&s).unwrap();
        assert_eq!(r.status, Status::Infeasible);
        assert!(r.latency_s.is_infinite());
    }

    #[test]
    fn scheme_runs_and_is_feasible() {
        let s = instance(2, 5, 11);
        let r = solve_fixed_frequency(&s).unwrap();
        assert!(r.is_feasible());
        let rep = check_feasible(&s, &r.assignment, &r.allocation, &CheckOptions::default());
        assert!(rep.passes());
        for (f, h) in r.frequency_hz.iter().zip(&s.helpers) {
            assert!(*f == 0.0 || (*f - h.max_frequency_hz).abs() <= 1e-9 * h.max_frequency_hz);
        }
    }
}

//! Convex relaxation of the joint assignment and allocation problem.
//!
//! Letting the assignment weights take values in `[0, 1]` makes the problem
//! convex. Its Lagrangian separates: for fixed multipliers the slot lengths
//! per unit of load have closed forms, which leaves a transportation-like LP
//! over the weights (`LP1`). The dual is maximized with the ellipsoid method;
//! the fractional assignment is then retrieved from a second LP (`LP2`) with
//! rates and frequencies frozen at the dual optimum, rounded to a binary
//! assignment and handed to the allocation solver.

use log::debug;

use crate::allocator::{
    closed_form_times, constraint_residuals, domain_rows, optimal_frequency, reference_allocation, solve_p2_loads,
    DualLayout, DualPoint, P2Options,
};
use crate::dual::{maximize_dual, DualEval, DualSetup};
use crate::error::{Error, Result};
use crate::model::{
    canonicalize, local_execution_latency, rate_fn, total_latency_recursive, Allocation, Assignment, Loads, Scenario,
};
use crate::numerics::lambert::tilde_f;
use crate::numerics::{simplex_solve, LinearProgram, LpStatus};
use crate::result::{Diagnostics, Scheme, SchemeResult, Status};
use crate::scalar::Real;

/// Right-hand-side slack tried in turn when the retrieval LP is infeasible
/// because the multipliers are only approximately optimal.
pub const LP2_RELAXATIONS: [f64; 5] = [1e-7, 1e-6, 1e-5, 1e-4, 1e-3];

/// Lagrangian cost of putting task `l` on device `k`, for a dual point
/// inside the domain: every slot at its optimal rate or frequency, priced
/// with the multipliers. Column `K` is the local user.
pub fn phi_coefficients<T: Real>(scenario: &Scenario<T>, dual: &DualPoint<T>) -> Vec<Vec<T>> {
    let c = dual.coefficients();
    let bw = scenario.bandwidth_hz;
    let per_bit = |coeff: T, price: T, gain: T| {
        let x = tilde_f(coeff * gain / price, bw);
        coeff / x + price * rate_fn(x, bw) / (gain * x)
    };
    let per_cycle = |coeff: T, price: T, kappa: T, cap_price: T, fmax: T| {
        let f = optimal_frequency(coeff, price, kappa);
        coeff / f + price * kappa * f * f + cap_price / fmax
    };
    let helper_costs: Vec<(T, T, T)> = scenario
        .helpers
        .iter()
        .enumerate()
        .map(|(j, h)| {
            (
                per_bit(c.d[j], dual.lambda0, h.uplink_gain_per_w),
                per_bit(c.a[j], dual.lambda[j], h.downlink_gain_per_w),
                per_cycle(c.b[j], dual.lambda[j], h.capacitance, dual.zeta[j], h.max_frequency_hz),
            )
        })
        .collect();
    let loc = &scenario.local;
    let local = per_cycle(c.local, dual.lambda0, loc.capacitance, dual.zeta0, loc.max_frequency_hz);
    scenario
        .tasks
        .iter()
        .map(|t| {
            let mut row: Vec<T> = helper_costs
                .iter()
                .map(|&(off, dl, cyc)| {
                    // Skip zero loads so an infinite unit price never meets a zero size.
                    let term = |size: T, unit: T| if size > T::zero() { size * unit } else { T::zero() };
                    term(t.input_bits, off) + term(t.output_bits, dl) + term(t.cycles, cyc)
                })
                .collect();
            row.push(if t.cycles > T::zero() { t.cycles * local } else { T::zero() });
            row
        })
        .collect()
}

/// `min sum phi * pi` over row-stochastic weights whose columns each hold at
/// least unit weight. Returns the weights and the optimal value.
pub fn solve_assignment_lp<T: Real>(phi: &[Vec<T>]) -> Result<(Assignment<T>, T)> {
    let l = phi.len();
    let d = phi.first().map_or(0, Vec::len);
    if l < d {
        return Err(Error::InvalidAssignment(format!("{l} tasks cannot occupy {d} devices")));
    }
    let mut lp = LinearProgram::new(phi.iter().flatten().copied().collect());
    add_assignment_rows(&mut lp, l, d);
    let sol = simplex_solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Breakdown(format!("assignment LP reported {:?}", sol.status)));
    }
    Ok((weights_from(&sol.x, l, d), sol.value))
}

fn add_assignment_rows<T: Real>(lp: &mut LinearProgram<T>, l: usize, d: usize) {
    let n = lp.num_vars();
    for i in 0..l {
        let mut row = vec![T::zero(); n];
        row[i * d..(i + 1) * d].iter_mut().for_each(|v| *v = T::one());
        lp.add_eq(row, T::one());
    }
    for k in 0..d {
        let mut row = vec![T::zero(); n];
        for i in 0..l {
            row[i * d + k] = T::one();
        }
        lp.add_ge(row, T::one());
    }
}

fn weights_from<T: Real>(x: &[T], l: usize, d: usize) -> Assignment<T> {
    let clean = |v: T| v.max(T::zero()).min(T::one());
    Assignment::from_weights((0..l).map(|i| x[i * d..(i + 1) * d].iter().map(|&v| clean(v)).collect()).collect())
}

/// Fractional assignment minimizing the Lagrangian at `dual`.
pub fn solve_lp1<T: Real>(scenario: &Scenario<T>, dual: &DualPoint<T>) -> Result<Assignment<T>> {
    Ok(solve_assignment_lp(&phi_coefficients(scenario, dual))?.0)
}

/// Dual function of the relaxation at an interior point: the LP1 optimum
/// minus the priced energy budgets. Also returns the supergradient and
/// the minimizing weights.
pub fn dual_value_p1<T: Real>(scenario: &Scenario<T>, dual: &DualPoint<T>) -> Result<(T, Vec<T>, Assignment<T>)> {
    if !dual.is_interior() {
        return Err(Error::Breakdown("dual point is outside the domain of the closed forms".into()));
    }
    let phi = phi_coefficients(scenario, dual);
    let (pi, lp_value) = solve_assignment_lp(&phi)?;
    let loads = Loads::new(scenario, &pi);
    let times = closed_form_times(scenario, &loads, dual).to_allocation();
    let residuals = constraint_residuals(scenario, &loads, &times)?;
    let budgets: T = dual.lambda0 * scenario.local.energy_budget_j
        + dual.lambda.iter().zip(&scenario.helpers).map(|(&l, h)| l * h.energy_budget_j).sum::<T>();
    Ok((lp_value - budgets, residuals, pi))
}

/// Rates and frequencies frozen for the retrieval LP.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenSpeeds<T> {
    pub offload_rate: Vec<T>,
    pub download_rate: Vec<T>,
    pub helper_frequency: Vec<T>,
    pub local_frequency: T,
}

impl<T: Real> FrozenSpeeds<T> {
    /// Slot lengths implied by a (possibly fractional) assignment.
    pub fn allocation(&self, scenario: &Scenario<T>, assignment: &Assignment<T>) -> Allocation<T> {
        let loads = Loads::new(scenario, assignment);
        let div = |load: T, speed: T| if load > T::zero() { load / speed } else { T::zero() };
        Allocation {
            t_off: loads.offload_bits.iter().zip(&self.offload_rate).map(|(&b, &r)| div(b, r)).collect(),
            t_dl: loads.download_bits.iter().zip(&self.download_rate).map(|(&b, &r)| div(b, r)).collect(),
            t_c: loads.helper_cycles.iter().zip(&self.helper_frequency).map(|(&c, &f)| div(c, f)).collect(),
            t0_c: div(loads.local_cycles, self.local_frequency),
        }
    }
}

/// Optimal rates and frequencies at a dual point, frequencies clamped to
/// their caps. The second value is the largest relative clamp.
pub fn frozen_speeds<T: Real>(scenario: &Scenario<T>, dual: &DualPoint<T>) -> (FrozenSpeeds<T>, T) {
    let c = dual.coefficients();
    let bw = scenario.bandwidth_hz;
    let mut clamp = T::zero();
    let mut capped = |f: T, cap: T| {
        if f > cap {
            clamp = clamp.max(f / cap - T::one());
            cap
        } else {
            f
        }
    };
    let helper_frequency = scenario
        .helpers
        .iter()
        .enumerate()
        .map(|(j, h)| capped(optimal_frequency(c.b[j], dual.lambda[j], h.capacitance), h.max_frequency_hz))
        .collect();
    let loc = &scenario.local;
    let local_frequency = capped(optimal_frequency(c.local, dual.lambda0, loc.capacitance), loc.max_frequency_hz);
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
        helper_frequency,
        local_frequency,
    };
    (speeds, clamp)
}

/// Retrieval LP: with speeds frozen every slot, energy and ordering
/// relation is linear in the weights. Variables are the weights (row-major)
/// followed by the start `I1` of helper 1's download. Energy rows are
/// normalized by the budgets and time rows by `tau`; every inequality is
/// relaxed by `slack`.
pub fn build_lp2<T: Real>(scenario: &Scenario<T>, speeds: &FrozenSpeeds<T>, tau: T, slack: T) -> LinearProgram<T> {
    let k = scenario.num_helpers();
    let l = scenario.num_tasks();
    let d = k + 1;
    let n = l * d + 1;
    let head = l * d;
    let bw = scenario.bandwidth_hz;
    let idx = |task: usize, dev: usize| task * d + dev;
    let per = |size: T, speed: T| if size > T::zero() { size / speed } else { T::zero() };

    let mut obj = vec![T::zero(); n];
    obj[head] = T::one() / tau;
    for (i, t) in scenario.tasks.iter().enumerate() {
        for j in 0..k {
            obj[idx(i, j)] = per(t.output_bits, speeds.download_rate[j]) / tau;
        }
    }
    let mut lp = LinearProgram::new(obj);

    // Energy budgets.
    let loc = &scenario.local;
    let mut row = vec![T::zero(); n];
    for (i, t) in scenario.tasks.iter().enumerate() {
        for (j, h) in scenario.helpers.iter().enumerate() {
            let r = speeds.offload_rate[j];
            row[idx(i, j)] = per(t.input_bits, r) * rate_fn(r, bw) / h.uplink_gain_per_w / loc.energy_budget_j;
        }
        let f0 = speeds.local_frequency;
        row[idx(i, k)] = loc.capacitance * t.cycles * f0 * f0 / loc.energy_budget_j;
    }
    lp.add_le(row, T::one() + slack);
    for (j, h) in scenario.helpers.iter().enumerate() {
        let mut row = vec![T::zero(); n];
        let (r, f) = (speeds.download_rate[j], speeds.helper_frequency[j]);
        for (i, t) in scenario.tasks.iter().enumerate() {
            let e = h.capacitance * t.cycles * f * f + per(t.output_bits, r) * rate_fn(r, bw) / h.downlink_gain_per_w;
            row[idx(i, j)] = e / h.energy_budget_j;
        }
        lp.add_le(row, T::one() + slack);
    }

    // Time relations, as coefficient rows over the weights.
    let slot = |pick: &dyn Fn(usize, usize) -> T| {
        let mut r = vec![T::zero(); n];
        for i in 0..l {
            for j in 0..d {
                r[idx(i, j)] = pick(i, j) / tau;
            }
        }
        r
    };
    let t = &scenario.tasks;
    let off = |j: usize| move |i: usize, jj: usize| if jj == j { per(t[i].input_bits, speeds.offload_rate[j]) } else { T::zero() };
    let dl = |j: usize| move |i: usize, jj: usize| if jj == j { per(t[i].output_bits, speeds.download_rate[j]) } else { T::zero() };
    let cpu = |j: usize| {
        move |i: usize, jj: usize| {
            if jj != j {
                T::zero()
            } else if j == k {
                per(t[i].cycles, speeds.local_frequency)
            } else {
                per(t[i].cycles, speeds.helper_frequency[j])
            }
        }
    };
    let add = |a: &mut Vec<T>, b: Vec<T>, s: T| a.iter_mut().zip(b).for_each(|(x, y)| *x = *x + s * y);
    let one = T::one();
    let minus_head = |mut r: Vec<T>| {
        r[head] = -one / tau;
        r
    };

    // Helper 1 finishes executing before it downloads.
    let mut r = slot(&off(0));
    add(&mut r, slot(&cpu(0)), one);
    lp.add_le(minus_head(r), slack);
    // All offloading ends before helper 1 downloads.
    let mut r = vec![T::zero(); n];
    for j in 0..k {
        add(&mut r, slot(&off(j)), one);
    }
    lp.add_le(minus_head(r), slack);
    // Helper j finishes executing before its download slot starts.
    for j in 1..k {
        let mut r = slot(&cpu(j));
        for i in 0..j {
            add(&mut r, slot(&dl(i)), -one);
        }
        for i in 0..=j {
            add(&mut r, slot(&off(i)), one);
        }
        lp.add_le(minus_head(r), slack);
    }
    // Local execution ends with the frame.
    let mut r = slot(&cpu(k));
    for i in 0..k {
        add(&mut r, slot(&dl(i)), -one);
    }
    lp.add_le(minus_head(r), slack);

    add_assignment_rows(&mut lp, l, d);
    lp
}

/// Solves the retrieval LP with increasing slack; falls back to
/// `fallback` when every attempt is infeasible. Returns the weights and the
/// slack used.
pub(crate) fn retrieve<T: Real>(
    scenario: &Scenario<T>,
    speeds: &FrozenSpeeds<T>,
    tau: T,
    fallback: impl FnOnce() -> Result<Assignment<T>>,
) -> Result<(Assignment<T>, Option<T>)> {
    let d = scenario.num_devices();
    let l = scenario.num_tasks();
    for &s in &LP2_RELAXATIONS {
        let sol = simplex_solve(&build_lp2(scenario, speeds, tau, T::lit(s)))?;
        if sol.status == LpStatus::Optimal {
            return Ok((weights_from(&sol.x, l, d), Some(T::lit(s))));
        }
    }
    Ok((fallback()?, None))
}

/// Solution of the relaxed problem.
#[derive(Debug, Clone)]
pub struct P1Solution<T> {
    /// Fractional assignment from the retrieval LP.
    pub assignment: Assignment<T>,
    /// Slots of `assignment` at the frozen speeds, in canonical form.
    pub allocation: Allocation<T>,
    /// Best dual value: a lower bound on the latency of every binary assignment.
    pub lower_bound: T,
    /// Latency of `allocation`.
    pub primal_value: T,
    pub dual: DualPoint<T>,
    /// Slack the retrieval LP needed, `None` if it fell back to LP1's weights.
    pub lp2_slack: Option<T>,
    /// Largest relative frequency clamp applied before building LP2.
    pub frequency_clamp: T,
    pub iterations: usize,
}

/// Whether some fractional assignment respects the energy floors reached
/// with unbounded slots (transmission energy tends to `bits ln2 / (B gain)`).
pub fn relaxation_feasible<T: Real>(scenario: &Scenario<T>) -> Result<bool> {
    energy_floor_feasible(scenario, |_| T::zero(), T::zero())
}

/// Shared by the fixed-frequency variant, whose computation energy per
/// cycle is fixed: `helper_cycle_energy(j)` and `local_cycle_energy`.
pub(crate) fn energy_floor_feasible<T: Real>(
    scenario: &Scenario<T>,
    helper_cycle_energy: impl Fn(usize) -> T,
    local_cycle_energy: T,
) -> Result<bool> {
    let k = scenario.num_helpers();
    let l = scenario.num_tasks();
    let d = k + 1;
    let margin = T::one() - T::lit(1e-9);
    let per_bit = T::LN_2() / scenario.bandwidth_hz;
    let mut lp = LinearProgram::new(vec![T::zero(); l * d]);
    let loc = &scenario.local;
    let mut row = vec![T::zero(); l * d];
    for (i, t) in scenario.tasks.iter().enumerate() {
        for (j, h) in scenario.helpers.iter().enumerate() {
            row[i * d + j] = t.input_bits * per_bit / h.uplink_gain_per_w / loc.energy_budget_j;
        }
        row[i * d + k] = t.cycles * local_cycle_energy / loc.energy_budget_j;
    }
    lp.add_le(row, margin);
    for (j, h) in scenario.helpers.iter().enumerate() {
        let mut row = vec![T::zero(); l * d];
        for (i, t) in scenario.tasks.iter().enumerate() {
            row[i * d + j] =
                (t.output_bits * per_bit / h.downlink_gain_per_w + t.cycles * helper_cycle_energy(j)) / h.energy_budget_j;
        }
        lp.add_le(row, margin);
    }
    add_assignment_rows(&mut lp, l, d);
    Ok(simplex_solve(&lp)?.status == LpStatus::Optimal)
}

/// Round-robin assignment, used only to set latency scales.
pub(crate) fn spread_assignment<T: Real>(scenario: &Scenario<T>) -> Assignment<T> {
    let d = scenario.num_devices();
    Assignment::from_devices(&(0..scenario.num_tasks()).map(|i| i % d).collect::<Vec<_>>(), d)
}

/// A positive latency scale for the scenario.
pub(crate) fn latency_scale<T: Real>(scenario: &Scenario<T>) -> T {
    let loads = Loads::new(scenario, &spread_assignment(scenario));
    let tau = reference_allocation(scenario, &loads)
        .map(|a| total_latency_recursive(&a))
        .unwrap_or_else(|| local_execution_latency(scenario));
    if tau > T::zero() && tau.is_finite() {
        tau
    } else {
        T::one()
    }
}

/// Solves the relaxed problem: dual by the ellipsoid method over LP1, then
/// the retrieval LP at the best multipliers. `Ok(None)` when even the
/// relaxation cannot meet the energy budgets.
pub fn solve_p1<T: Real>(scenario: &Scenario<T>) -> Result<Option<P1Solution<T>>> {
    if !relaxation_feasible(scenario)? {
        return Ok(None);
    }
    let k = scenario.num_helpers();
    let lay = DualLayout { k };
    let tau = latency_scale(scenario);
    let mut unit = vec![T::one(); lay.dim()];
    unit[DualLayout::LAMBDA0] = tau / scenario.local.energy_budget_j;
    for (j, h) in scenario.helpers.iter().enumerate() {
        unit[lay.lambda(j)] = tau / h.energy_budget_j;
    }
    let setup = DualSetup {
        rows: domain_rows(k),
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
        let (value, residuals, _) = dual_value_p1(scenario, &DualPoint::from_slice(k, m))?;
        Ok(DualEval { value, residuals })
    };
    let out = maximize_dual(setup, eval, |_| None)?;
    let dual = DualPoint::from_slice(k, &out.point);

    let (speeds, clamp) = frozen_speeds(scenario, &dual);
    if clamp > T::lit(1e-6) {
        debug!("frequency clamped by {clamp:e} before retrieval");
    }
    let (assignment, lp2_slack) = retrieve(scenario, &speeds, tau, || solve_lp1(scenario, &dual))?;
    let mut allocation = speeds.allocation(scenario, &assignment);
    canonicalize(&mut allocation, true);
    let primal_value = total_latency_recursive(&allocation);
    Ok(Some(P1Solution {
        assignment,
        allocation,
        lower_bound: out.value,
        primal_value,
        dual,
        lp2_slack,
        frequency_clamp: clamp,
        iterations: out.iterations,
    }))
}

/// Binary assignment from fractional weights: each task goes to its
/// heaviest device (lowest index on ties); then, while some device is
/// empty (lowest index first), the task with the largest weight for it
/// among those on devices holding at least two tasks is moved there
/// (lowest task index on ties).
pub fn round_and_adjust<T: Real>(fractional: &Assignment<T>) -> Result<Assignment<T>> {
    let l = fractional.num_tasks();
    let d = fractional.num_devices();
    if l < d {
        return Err(Error::InvalidAssignment(format!("{l} tasks cannot occupy {d} devices")));
    }
    let mut dev = fractional.devices();
    loop {
        let mut count = vec![0usize; d];
        for &k in &dev {
            count[k] += 1;
        }
        let Some(empty) = (0..d).find(|&k| count[k] == 0) else { break };
        let mut pick: Option<usize> = None;
        for i in 0..l {
            if count[dev[i]] >= 2 && pick.is_none_or(|p| fractional.weights[i][empty] > fractional.weights[p][empty]) {
                pick = Some(i);
            }
        }
        let i = pick.expect("a device holds two tasks while another is empty");
        dev[i] = empty;
    }
    Ok(Assignment::from_devices(&dev, d))
}

/// The proposed scheme: relax, retrieve, round, then allocate optimally.
pub fn algorithm1<T: Real>(scenario: &Scenario<T>) -> Result<SchemeResult<T>> {
    let Some(p1) = solve_p1(scenario)? else {
        return Ok(SchemeResult::infeasible(
            Scheme::Joint,
            scenario,
            spread_assignment(scenario),
            "no assignment can meet the energy budgets",
        ));
    };
    let assignment = round_and_adjust(&p1.assignment)?;
    let loads = Loads::new(scenario, &assignment);
    let p2 = solve_p2_loads(scenario, &loads, &P2Options::default())?;
    let mut notes = vec![match p1.lp2_slack {
        Some(s) => format!("retrieval LP solved with slack {:e}", s.as_f64()),
        None => "retrieval LP infeasible at every slack; used the LP1 weights".to_string(),
    }];
    if p1.frequency_clamp > T::lit(1e-6) {
        notes.push(format!("frequencies clamped by up to {:e} before retrieval", p1.frequency_clamp.as_f64()));
    }
    if p2.status == Status::Infeasible {
        let mut r = SchemeResult::infeasible(Scheme::Joint, scenario, assignment, "rounded assignment cannot meet the energy budgets");
        r.diagnostics.notes.extend(notes);
        return Ok(r);
    }
    notes.push(format!("allocation gap {:e}", p2.relative_gap().as_f64()));
    let lb = p1.lower_bound.min(p2.latency);
    let gap = if p2.latency > T::zero() { (p2.latency - lb) / p2.latency } else { T::zero() };
    let status = if gap <= T::lit(1e-4) && p2.status == Status::Optimal { Status::Optimal } else { Status::Suboptimal };
    let diag = Diagnostics {
        dual_bound_s: Some(lb.as_f64()),
        relative_gap: Some(gap.as_f64()),
        iterations: p1.iterations + p2.iterations,
        restarts: p2.restarts,
        subproblems: 1,
        notes,
    };
    SchemeResult::new(Scheme::Joint, scenario, assignment, p2.allocation, p2.latency, status, diag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{check_feasible, CheckOptions};
    use crate::scenario::{gen_instance, GenConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(k: usize, l: usize, seed: u64) -> Scenario<f64> {
        gen_instance(&GenConfig { helpers: k, tasks: l, seed, ..GenConfig::default() }, 0).unwrap()
    }

    fn random_interior(k: usize, rng: &mut ChaCha8Rng) -> DualPoint<f64> {
        loop {
            let y: Vec<f64> = (0..DualLayout { k }.dim()).map(|_| rng.random_range(0.0..0.3)).collect();
            let mut d = DualPoint::from_slice(k, &y);
            d.lambda0 = rng.random_range(1.0..50.0);
            for l in &mut d.lambda {
                *l = rng.random_range(0.1..10.0);
            }
            if d.is_interior() {
                return d;
            }
        }
    }

    #[test]
    fn phi_of_empty_task_is_zero_and_linear_in_size() {
        let mut s = instance(2, 4, 1);
        s.tasks[0] = crate::model::Task { input_bits: 0.0, output_bits: 0.0, cycles: 0.0 };
        s.tasks[2] = crate::model::Task {
            input_bits: 2.0 * s.tasks[1].input_bits,
            output_bits: 2.0 * s.tasks[1].output_bits,
            cycles: 2.0 * s.tasks[1].cycles,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let phi = phi_coefficients(&s, &random_interior(2, &mut rng));
        assert!(phi[0].iter().all(|&v| v == 0.0));
        for k in 0..3 {
            assert!((phi[2][k] - 2.0 * phi[1][k]).abs() <= 1e-12 * phi[2][k]);
        }
    }

    /// Term-by-term re-evaluation of one entry at explicit rates.
    #[test]
    fn phi_matches_term_by_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = instance(2, 3, 2);
        let bw = s.bandwidth_hz;
        for _ in 0..20 {
            let d = random_interior(2, &mut rng);
            let c = d.coefficients();
            let phi = phi_coefficients(&s, &d);
            for (l, t) in s.tasks.iter().enumerate() {
                for (k, h) in s.helpers.iter().enumerate() {
                    let r_off = tilde_f(c.d[k] * h.uplink_gain_per_w / d.lambda0, bw);
                    let r_dl = tilde_f(c.a[k] * h.downlink_gain_per_w / d.lambda[k], bw);
                    let f = (c.b[k] / (2.0 * d.lambda[k] * h.capacitance)).cbrt();
                    let expect = c.a[k] * t.output_bits / r_dl
                        + c.b[k] * t.cycles / f
                        + c.d[k] * t.input_bits / r_off
                        + d.lambda[k] * h.capacitance * t.cycles * f * f
                        + d.lambda0 / h.uplink_gain_per_w * rate_fn(r_off, bw) * t.input_bits / r_off
                        + d.lambda[k] / h.downlink_gain_per_w * rate_fn(r_dl, bw) * t.output_bits / r_dl
                        + d.zeta[k] * t.cycles / h.max_frequency_hz;
                    assert!((phi[l][k] - expect).abs() <= 1e-10 * expect, "{} vs {expect}", phi[l][k]);
                }
                let f0 = (c.local / (2.0 * d.lambda0 * s.local.capacitance)).cbrt();
                let expect = c.local * t.cycles / f0
                    + d.lambda0 * s.local.capacitance * t.cycles * f0 * f0
                    + d.zeta0 * t.cycles / s.local.max_frequency_hz;
                assert!((phi[l][2] - expect).abs() <= 1e-10 * expect);
            }
        }
    }

    #[test]
    fn lp1_with_dominant_column() {
        // Column 0 is cheapest in every row: two tasks stay there, the
        // cheapest remaining choice fills column 1.
        let phi: Vec<Vec<f64>> = vec![vec![1.0, 5.0], vec![1.0, 3.0], vec![1.0, 4.0]];
        let (a, v) = solve_assignment_lp(&phi).unwrap();
        assert!((v - (1.0 + 3.0 + 1.0)).abs() < 1e-12);
        assert_eq!(a.devices(), vec![0, 1, 0]);
        assert!((a.column_sum(1) - 1.0).abs() < 1e-12);
        // Identical columns: any vertex does, value is unchanged.
        let phi: Vec<Vec<f64>> = vec![vec![2.0, 2.0], vec![1.0, 1.0], vec![3.0, 3.0]];
        let (a, v) = solve_assignment_lp(&phi).unwrap();
        assert!((v - 6.0).abs() < 1e-12);
        assert!(a.is_binary());
    }

    #[test]
    fn lp1_beats_uniform_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = instance(3, 7, 3);
        for _ in 0..10 {
            let d = random_interior(3, &mut rng);
            let phi = phi_coefficients(&s, &d);
            let (_, v) = solve_assignment_lp(&phi).unwrap();
            let uniform: f64 = phi.iter().flatten().sum::<f64>() / 4.0;
            assert!(v <= uniform + 1e-12);
        }
    }

    #[test]
    fn lp1_value_matches_lagrangian() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let s = instance(2, 5, 4);
        for _ in 0..20 {
            let d = random_interior(2, &mut rng);
            let (g, res, pi) = dual_value_p1(&s, &d).unwrap();
            let loads = Loads::new(&s, &pi);
            let times = closed_form_times(&s, &loads, &d).to_allocation();
            let lag = crate::allocator::lagrangian(&s, &loads, &d, &times).unwrap();
            assert!((g - lag).abs() <= 1e-8 * g.abs().max(1e-6), "{g} vs {lag}");
            assert_eq!(res.len(), 9);
        }
    }

    #[test]
    fn rounding_examples() {
        let a = Assignment::from_weights(vec![vec![0.6, 0.3, 0.1], vec![0.2, 0.7, 0.1], vec![0.1, 0.2, 0.7]]);
        assert_eq!(round_and_adjust(&a).unwrap().devices(), vec![0, 1, 2]);
        let b = Assignment::from_weights(vec![vec![0.8, 0.15, 0.05], vec![0.7, 0.1, 0.2], vec![0.9, 0.05, 0.05]]);
        assert_eq!(round_and_adjust(&b).unwrap().devices(), vec![1, 2, 0]);
        let c = Assignment::from_weights(vec![vec![0.5, 0.5]]);
        assert!(round_and_adjust(&c).is_err());
    }

    #[test]
    fn rounding_is_idempotent_on_valid_binaries() {
        let a = Assignment::<f64>::from_devices(&[2, 0, 1, 1, 0], 3);
        assert_eq!(round_and_adjust(&a).unwrap(), a);
    }

    #[test]
    fn p1_bounds_and_feasibility() {
        for seed in 0..4 {
            let s = instance(2, 5, 40 + seed);
            let p1 = solve_p1(&s).unwrap().unwrap();
            assert!(p1.lower_bound <= p1.primal_value * (1.0 + 1e-9));
            let opts = CheckOptions { require_binary: false, tol: crate::model::Tolerances { relative: 1e-3, ..Default::default() }, ..Default::default() };
            let rep = check_feasible(&s, &p1.assignment, &p1.allocation, &opts);
            let ordering_ok = rep
                .checks
                .iter()
                .filter(|c| c.name.contains("deadline") || c.name.contains("offload-before"))
                .all(|c| c.residual <= 1e-7);
            assert!(ordering_ok);
            let r = algorithm1(&s).unwrap();
            assert!(r.is_feasible());
            assert!(r.latency_s >= p1.lower_bound * (1.0 - 1e-9));
            let rep = check_feasible(&s, &r.assignment, &r.allocation, &CheckOptions::default());
            assert!(rep.passes(), "{:?}", rep.failures().collect::<Vec<_>>());
        }
    }
}

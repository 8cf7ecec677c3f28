//! System model: problem instances, assignments, slot allocations and the
//! energy/latency formulas of the three-phase TDMA protocol.
//!
//! Device indexing follows the assignment matrix: columns `0..K` are the
//! helpers in their fixed TDMA order, column `K` is the local user.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// One independent task of the local user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task<T> {
    /// Input data to offload, in bits.
    pub input_bits: T,
    /// Result data to download, in bits.
    pub output_bits: T,
    /// CPU cycles needed to execute the task.
    pub cycles: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Helper<T> {
    /// Offloading channel power gain divided by the helper's noise power (1/W).
    pub uplink_gain_per_w: T,
    /// Downloading channel power gain divided by the local user's noise power (1/W).
    pub downlink_gain_per_w: T,
    pub energy_budget_j: T,
    pub max_frequency_hz: T,
    /// Effective switched capacitance (J s^2 / cycle^3).
    pub capacitance: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalDevice<T> {
    pub energy_budget_j: T,
    pub max_frequency_hz: T,
    pub capacitance: T,
}

/// Immutable problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario<T> {
    pub bandwidth_hz: T,
    pub local: LocalDevice<T>,
    pub helpers: Vec<Helper<T>>,
    pub tasks: Vec<Task<T>>,
}

impl<T: Real> Scenario<T> {
    /// Builds a scenario and checks its invariants.
    pub fn new(
        bandwidth_hz: T,
        local: LocalDevice<T>,
        helpers: Vec<Helper<T>>,
        tasks: Vec<Task<T>>,
    ) -> Result<Self> {
        let s = Self { bandwidth_hz, local, helpers, tasks };
        s.validate()?;
        Ok(s)
    }

    pub fn num_helpers(&self) -> usize {
        self.helpers.len()
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    /// Number of devices, helpers plus the local user.
    pub fn num_devices(&self) -> usize {
        self.helpers.len() + 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        let k = self.helpers.len();
        let l = self.tasks.len();
        if k == 0 {
            return bad("at least one helper is required".into());
        }
        if l < k + 1 {
            return bad(format!("{l} tasks cannot occupy {} devices", k + 1));
        }
        let pos = |v: T| v.is_finite() && v > T::zero();
        let nonneg = |v: T| v.is_finite() && v >= T::zero();
        if !pos(self.bandwidth_hz) {
            return bad("bandwidth must be positive".into());
        }
        let loc = &self.local;
        if !(pos(loc.energy_budget_j) && pos(loc.max_frequency_hz) && pos(loc.capacitance)) {
            return bad("local energy budget, frequency cap and capacitance must be positive".into());
        }
        for (i, h) in self.helpers.iter().enumerate() {
            let ok = [
                h.uplink_gain_per_w,
                h.downlink_gain_per_w,
                h.energy_budget_j,
                h.max_frequency_hz,
                h.capacitance,
            ]
            .into_iter()
            .all(pos);
            if !ok {
                return bad(format!("helper {} has a non-positive parameter", i + 1));
            }
        }
        for (i, t) in self.tasks.iter().enumerate() {
            if !(nonneg(t.input_bits) && nonneg(t.output_bits) && nonneg(t.cycles)) {
                return bad(format!("task {} has a negative size", i + 1));
            }
        }
        Ok(())
    }

    pub fn total_cycles(&self) -> T {
        self.tasks.iter().map(|t| t.cycles).sum()
    }

    /// `f(x) = 2^(x/B) - 1`, the transmit-power multiplier for rate `x`.
    pub fn rate_fn(&self, rate: T) -> T {
        rate_fn(rate, self.bandwidth_hz)
    }
}

/// `2^(x/B) - 1`.
pub fn rate_fn<T: Real>(rate: T, bandwidth: T) -> T {
    (rate * T::LN_2() / bandwidth).exp_m1()
}

/// Energy of sending `bits` in a slot of `duration` seconds over a link with
/// normalized gain `gain`.
pub fn transmit_energy<T: Real>(bits: T, duration: T, gain: T, bandwidth: T) -> Result<T> {
    if bits <= T::zero() {
        return Ok(T::zero());
    }
    if !(duration > T::zero()) {
        return Err(Error::ZeroDuration { what: "transmission", load: bits.as_f64() });
    }
    Ok(rate_fn(bits / duration, bandwidth) * duration / gain)
}

/// Dynamic CPU energy `kappa * cycles^3 / t^2`.
pub fn compute_energy<T: Real>(cycles: T, kappa: T, duration: T) -> Result<T> {
    if cycles <= T::zero() {
        return Ok(T::zero());
    }
    if !(duration > T::zero()) {
        return Err(Error::ZeroDuration { what: "computation", load: cycles.as_f64() });
    }
    Ok(kappa * cycles.powi(3) / (duration * duration))
}

/// CPU frequency needed to run `cycles` in `duration` seconds.
pub fn frequency_of<T: Real>(cycles: T, duration: T) -> T {
    if cycles <= T::zero() {
        T::zero()
    } else {
        cycles / duration
    }
}

/// Task-to-device weights, `L x (K+1)`; column `K` is the local user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment<T> {
    pub weights: Vec<Vec<T>>,
}

impl<T: Real> Assignment<T> {
    pub fn from_weights(weights: Vec<Vec<T>>) -> Self {
        Self { weights }
    }

    /// Binary assignment from the device index of each task.
    pub fn from_devices(devices: &[usize], num_devices: usize) -> Self {
        let weights = devices
            .iter()
            .map(|&d| {
                let mut row = vec![T::zero(); num_devices];
                row[d] = T::one();
                row
            })
            .collect();
        Self { weights }
    }

    /// Every task on the local user.
    pub fn all_local(num_tasks: usize, num_devices: usize) -> Self {
        Self::from_devices(&vec![num_devices - 1; num_tasks], num_devices)
    }

    pub fn num_tasks(&self) -> usize {
        self.weights.len()
    }

    pub fn num_devices(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn is_binary(&self) -> bool {
        self.weights
            .iter()
            .flatten()
            .all(|&w| w == T::zero() || w == T::one())
    }

    /// Device holding task `l` in a binary assignment (largest weight, lowest index on ties).
    pub fn device_of(&self, l: usize) -> usize {
        argmax(&self.weights[l])
    }

    /// Device index of every task (argmax per row).
    pub fn devices(&self) -> Vec<usize> {
        (0..self.num_tasks()).map(|l| self.device_of(l)).collect()
    }

    pub fn column_sum(&self, k: usize) -> T {
        self.weights.iter().map(|r| r[k]).sum()
    }

    /// Checks shape and, for the given tolerance, that rows sum to one and
    /// entries lie in `[0, 1]`. With `require_all_busy`, also that every
    /// column holds at least unit weight.
    pub fn validate(&self, scenario: &Scenario<T>, require_all_busy: bool, tol: T) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidAssignment(m));
        if self.weights.len() != scenario.num_tasks() {
            return bad(format!("{} rows for {} tasks", self.weights.len(), scenario.num_tasks()));
        }
        let d = scenario.num_devices();
        for (l, row) in self.weights.iter().enumerate() {
            if row.len() != d {
                return bad(format!("row {} has {} columns, expected {d}", l + 1, row.len()));
            }
            if row.iter().any(|&w| !(w >= -tol && w <= T::one() + tol)) {
                return bad(format!("row {} has a weight outside [0, 1]", l + 1));
            }
            let s: T = row.iter().copied().sum();
            if (s - T::one()).abs() > tol {
                return bad(format!("row {} sums to {s}", l + 1));
            }
        }
        if require_all_busy {
            for k in 0..d {
                if self.column_sum(k) < T::one() - tol {
                    return bad(format!("device {} has no task", k + 1));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn argmax<T: Real>(row: &[T]) -> usize {
    let mut best = 0;
    for (k, &w) in row.iter().enumerate() {
        if w > row[best] {
            best = k;
        }
    }
    best
}

/// Aggregate load per device implied by an assignment. Every solver only
/// sees the assignment through these sums.
#[derive(Debug, Clone, PartialEq)]
pub struct Loads<T> {
    pub offload_bits: Vec<T>,
    pub download_bits: Vec<T>,
    pub helper_cycles: Vec<T>,
    pub local_cycles: T,
}

impl<T: Real> Loads<T> {
    pub fn new(scenario: &Scenario<T>, assignment: &Assignment<T>) -> Self {
        let k = scenario.num_helpers();
        let mut loads = Self {
            offload_bits: vec![T::zero(); k],
            download_bits: vec![T::zero(); k],
            helper_cycles: vec![T::zero(); k],
            local_cycles: T::zero(),
        };
        for (task, row) in scenario.tasks.iter().zip(&assignment.weights) {
            for (j, &w) in row.iter().enumerate() {
                if w == T::zero() {
                    continue;
                }
                if j == k {
                    loads.local_cycles = loads.local_cycles + w * task.cycles;
                } else {
                    loads.offload_bits[j] = loads.offload_bits[j] + w * task.input_bits;
                    loads.download_bits[j] = loads.download_bits[j] + w * task.output_bits;
                    loads.helper_cycles[j] = loads.helper_cycles[j] + w * task.cycles;
                }
            }
        }
        loads
    }

    pub fn num_helpers(&self) -> usize {
        self.offload_bits.len()
    }
}

/// Slot durations of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation<T> {
    /// Offloading slot per helper (s).
    pub t_off: Vec<T>,
    /// Downloading slot per helper (s).
    pub t_dl: Vec<T>,
    /// Execution window per helper (s).
    pub t_c: Vec<T>,
    /// Local execution time (s).
    pub t0_c: T,
}

impl<T: Real> Allocation<T> {
    pub fn zeros(k: usize) -> Self {
        Self { t_off: vec![T::zero(); k], t_dl: vec![T::zero(); k], t_c: vec![T::zero(); k], t0_c: T::zero() }
    }

    /// Latency in the reformulated form `t1_off + t1_c + sum(t_dl)`. Equals
    /// [`total_latency_recursive`] on allocations passing the ordering
    /// constraints of [`check_feasible`].
    pub fn reformulated_latency(&self) -> T {
        self.t_off[0] + self.t_c[0] + self.t_dl.iter().copied().sum::<T>()
    }

    fn all_times(&self) -> impl Iterator<Item = T> + '_ {
        self.t_off
            .iter()
            .chain(&self.t_dl)
            .chain(&self.t_c)
            .copied()
            .chain(std::iter::once(self.t0_c))
    }
}

/// Total energy the local user spends offloading.
pub fn offload_energy<T: Real>(scenario: &Scenario<T>, assignment: &Assignment<T>, t_off: &[T]) -> Result<T> {
    let loads = Loads::new(scenario, assignment);
    let mut total = T::zero();
    for (k, h) in scenario.helpers.iter().enumerate() {
        total = total + transmit_energy(loads.offload_bits[k], t_off[k], h.uplink_gain_per_w, scenario.bandwidth_hz)?;
    }
    Ok(total)
}

/// Energy each helper spends returning its results.
pub fn download_energy<T: Real>(scenario: &Scenario<T>, assignment: &Assignment<T>, t_dl: &[T]) -> Result<Vec<T>> {
    let loads = Loads::new(scenario, assignment);
    scenario
        .helpers
        .iter()
        .enumerate()
        .map(|(k, h)| transmit_energy(loads.download_bits[k], t_dl[k], h.downlink_gain_per_w, scenario.bandwidth_hz))
        .collect()
}

/// Per-device energy use (helpers first, local user last) and CPU frequencies.
pub fn device_usage<T: Real>(scenario: &Scenario<T>, loads: &Loads<T>, alloc: &Allocation<T>) -> Result<(Vec<T>, Vec<T>)> {
    let b = scenario.bandwidth_hz;
    let mut energy = Vec::with_capacity(scenario.num_devices());
    let mut freq = Vec::with_capacity(scenario.num_devices());
    let mut local = compute_energy(loads.local_cycles, scenario.local.capacitance, alloc.t0_c)?;
    for (k, h) in scenario.helpers.iter().enumerate() {
        local = local + transmit_energy(loads.offload_bits[k], alloc.t_off[k], h.uplink_gain_per_w, b)?;
        let e = compute_energy(loads.helper_cycles[k], h.capacitance, alloc.t_c[k])?
            + transmit_energy(loads.download_bits[k], alloc.t_dl[k], h.downlink_gain_per_w, b)?;
        energy.push(e);
        freq.push(frequency_of(loads.helper_cycles[k], alloc.t_c[k]));
    }
    energy.push(local);
    freq.push(frequency_of(loads.local_cycles, alloc.t0_c));
    Ok((energy, freq))
}

/// Completion time of the whole frame from the waiting-time recursion:
/// helper 1 may start returning results once its execution is done and all
/// offloading slots are over, each later helper once its own execution is
/// done and its predecessor has finished downloading.
pub fn total_latency_recursive<T: Real>(alloc: &Allocation<T>) -> T {
    let k = alloc.t_off.len();
    let total_off: T = alloc.t_off.iter().copied().sum();
    let mut wait = (alloc.t_off[0] + alloc.t_c[0]).max(total_off);
    let mut offloaded = alloc.t_off[0];
    for j in 1..k {
        offloaded = offloaded + alloc.t_off[j];
        wait = (offloaded + alloc.t_c[j]).max(wait + alloc.t_dl[j - 1]);
    }
    let done = wait + alloc.t_dl[k - 1];
    alloc.t0_c.max(done)
}

/// Total latency when every task runs locally under the energy and
/// frequency limits of the local user.
pub fn local_execution_latency<T: Real>(scenario: &Scenario<T>) -> T {
    let c = scenario.total_cycles();
    let loc = &scenario.local;
    let energy_limited = (loc.capacitance * c.powi(3) / loc.energy_budget_j).sqrt();
    energy_limited.max(c / loc.max_frequency_hz)
}

/// Feasibility tolerances.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances<T> {
    /// Relative slack on energy budgets and frequency caps.
    pub relative: T,
    /// Absolute slack on time relations (s).
    pub time: T,
    /// Slack on assignment row sums and entries.
    pub assignment: T,
}

impl<T: Real> Default for Tolerances<T> {
    fn default() -> Self {
        Self { relative: T::lit(1e-9), time: T::lit(1e-12), assignment: T::lit(1e-9) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintCheck {
    pub name: String,
    /// Positive values are violations (in the constraint's own units,
    /// relative for energies and frequencies).
    pub residual: f64,
    pub limit: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub checks: Vec<ConstraintCheck>,
}

impl FeasibilityReport {
    pub fn passes(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConstraintCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&ConstraintCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Options for [`check_feasible`].
#[derive(Debug, Clone, Copy)]
pub struct CheckOptions<T> {
    pub tol: Tolerances<T>,
    /// Require every device to hold at least one task.
    pub require_all_busy: bool,
    /// Require a 0/1 assignment.
    pub require_binary: bool,
}

impl<T: Real> Default for CheckOptions<T> {
    fn default() -> Self {
        Self { tol: Tolerances::default(), require_all_busy: true, require_binary: true }
    }
}

/// Evaluates every constraint of the reformulated latency problem: energy
/// budgets, frequency caps, assignment validity, nonnegative slots and the
/// three ordering relations that make `t1_off + t1_c + sum(t_dl)` the frame
/// latency.
pub fn check_feasible<T: Real>(
    scenario: &Scenario<T>,
    assignment: &Assignment<T>,
    alloc: &Allocation<T>,
    opts: &CheckOptions<T>,
) -> FeasibilityReport {
    let tol = opts.tol;
    let mut checks = Vec::new();
    let mut push = |name: String, residual: T, limit: T| {
        let r = residual.as_f64();
        let lim = limit.as_f64();
        checks.push(ConstraintCheck { name, residual: r, limit: lim, pass: r <= lim });
    };

    let k = scenario.num_helpers();
    let shape_ok = assignment.num_tasks() == scenario.num_tasks()
        && assignment.weights.iter().all(|r| r.len() == k + 1)
        && alloc.t_off.len() == k
        && alloc.t_dl.len() == k
        && alloc.t_c.len() == k;
    if !shape_ok {
        push("shape".into(), T::one(), T::zero());
        return FeasibilityReport { checks };
    }

    // Assignment.
    for (l, row) in assignment.weights.iter().enumerate() {
        let s: T = row.iter().copied().sum();
        push(format!("task-assigned-once[{}]", l + 1), (s - T::one()).abs(), tol.assignment);
        let out_of_range = row
            .iter()
            .map(|&w| (-w).max(w - T::one()))
            .fold(T::neg_infinity(), T::max);
        push(format!("weight-range[{}]", l + 1), out_of_range, tol.assignment);
    }
    if opts.require_all_busy {
        for j in 0..=k {
            push(format!("device-nonempty[{}]", j + 1), T::one() - assignment.column_sum(j), tol.assignment);
        }
    }
    if opts.require_binary {
        let dev = assignment
            .weights
            .iter()
            .flatten()
            .map(|&w| w.min(T::one() - w).abs())
            .fold(T::zero(), T::max);
        push("binary".into(), dev, tol.assignment);
    }

    // Slots.
    let most_negative = alloc.all_times().fold(T::zero(), |m, t| m.max(-t));
    let nan = alloc.all_times().any(|t| !t.is_finite());
    push("nonnegative-times".into(), if nan { T::infinity() } else { most_negative }, T::zero());

    let loads = Loads::new(scenario, assignment);
    let b = scenario.bandwidth_hz;
    let energy = |r: Result<T>| r.unwrap_or(T::infinity());

    // Energy budgets.
    let mut e0 = energy(compute_energy(loads.local_cycles, scenario.local.capacitance, alloc.t0_c));
    for (j, h) in scenario.helpers.iter().enumerate() {
        e0 = e0 + energy(transmit_energy(loads.offload_bits[j], alloc.t_off[j], h.uplink_gain_per_w, b));
    }
    push("local-energy".into(), e0 / scenario.local.energy_budget_j - T::one(), tol.relative);
    for (j, h) in scenario.helpers.iter().enumerate() {
        let e = energy(compute_energy(loads.helper_cycles[j], h.capacitance, alloc.t_c[j]))
            + energy(transmit_energy(loads.download_bits[j], alloc.t_dl[j], h.downlink_gain_per_w, b));
        push(format!("helper-energy[{}]", j + 1), e / h.energy_budget_j - T::one(), tol.relative);
    }

    // Frequency caps, as relative excess of the needed frequency.
    let cap = |cycles: T, t: T, fmax: T| {
        if cycles <= T::zero() {
            T::neg_infinity()
        } else if t <= T::zero() {
            T::infinity()
        } else {
            cycles / t / fmax - T::one()
        }
    };
    push(
        "local-frequency-cap".into(),
        cap(loads.local_cycles, alloc.t0_c, scenario.local.max_frequency_hz),
        tol.relative,
    );
    for (j, h) in scenario.helpers.iter().enumerate() {
        push(
            format!("helper-frequency-cap[{}]", j + 1),
            cap(loads.helper_cycles[j], alloc.t_c[j], h.max_frequency_hz),
            tol.relative,
        );
    }

    // Ordering relations.
    let head = alloc.t_off[0] + alloc.t_c[0];
    let total_off: T = alloc.t_off.iter().copied().sum();
    push("offload-before-first-download".into(), total_off - head, tol.time);
    let mut off_prefix = alloc.t_off[0];
    let mut dl_prefix = T::zero();
    for j in 1..k {
        off_prefix = off_prefix + alloc.t_off[j];
        dl_prefix = dl_prefix + alloc.t_dl[j - 1];
        let slack = head + dl_prefix - off_prefix;
        push(format!("helper-compute-deadline[{}]", j + 1), alloc.t_c[j] - slack, tol.time);
    }
    let total_dl: T = alloc.t_dl.iter().copied().sum();
    push("local-compute-deadline".into(), alloc.t0_c - (head + total_dl), tol.time);

    FeasibilityReport { checks }
}

/// Turns any allocation that respects the energy budgets and frequency caps
/// into one that also satisfies the ordering relations of
/// [`check_feasible`], without changing the recursive frame latency. Idle
/// time is absorbed by stretching helper 1's execution window and the
/// download slots, which can only lower energy use.
///
/// When `stretch_first_execution` is false helper 1's execution window is
/// kept and the returned value is the first download start instead.
pub fn canonicalize<T: Real>(alloc: &mut Allocation<T>, stretch_first_execution: bool) -> T {
    let k = alloc.t_off.len();
    let total_off: T = alloc.t_off.iter().copied().sum();
    let first_start = (alloc.t_off[0] + alloc.t_c[0]).max(total_off);
    if stretch_first_execution {
        alloc.t_c[0] = first_start - alloc.t_off[0];
    }
    let mut wait = first_start;
    let mut offloaded = alloc.t_off[0];
    for j in 1..k {
        offloaded = offloaded + alloc.t_off[j];
        let ready = offloaded + alloc.t_c[j];
        let free = wait + alloc.t_dl[j - 1];
        if ready > free {
            alloc.t_dl[j - 1] = alloc.t_dl[j - 1] + (ready - free);
        }
        wait = wait + alloc.t_dl[j - 1];
    }
    let done = wait + alloc.t_dl[k - 1];
    if alloc.t0_c > done {
        alloc.t_dl[k - 1] = alloc.t_dl[k - 1] + (alloc.t0_c - done);
    }
    first_start
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny() -> Scenario<f64> {
        Scenario::new(
            312_500.0,
            LocalDevice { energy_budget_j: 1e-3, max_frequency_hz: 0.9e9, capacitance: 1e-28 },
            vec![Helper {
                uplink_gain_per_w: 1.0,
                downlink_gain_per_w: 1.0,
                energy_budget_j: 1e-2,
                max_frequency_hz: 1.8e9,
                capacitance: 1e-28,
            }],
            vec![
                Task { input_bits: 312_500.0, output_bits: 1000.0, cycles: 1e7 },
                Task { input_bits: 0.0, output_bits: 0.0, cycles: 2e6 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn rate_fn_values() {
        let b = 312_500.0f64;
        assert_eq!(rate_fn(0.0f64, b), 0.0);
        assert!((rate_fn(b, b) - 1.0).abs() < 1e-15);
        assert!((rate_fn(2.0 * b, b) - 3.0).abs() < 1e-14);
        assert!((rate_fn(1.0f32, 1.0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn offload_energy_cases() {
        let s = tiny();
        let local = Assignment::all_local(2, 2);
        assert_eq!(offload_energy(&s, &local, &[0.0]).unwrap(), 0.0);
        let a = Assignment::from_devices(&[0, 1], 2);
        let e = offload_energy(&s, &a, &[1.0]).unwrap();
        assert!((e - 1.0).abs() < 1e-12);
        assert!(offload_energy(&s, &a, &[2.0]).unwrap() < e);
        assert!(matches!(offload_energy(&s, &a, &[0.0]), Err(Error::ZeroDuration { .. })));
    }

    #[test]
    fn download_energy_cases() {
        let mut s = tiny();
        s.tasks[0].output_bits = 312_500.0;
        let local = Assignment::all_local(2, 2);
        assert_eq!(download_energy(&s, &local, &[0.0]).unwrap(), vec![0.0]);
        let a = Assignment::from_devices(&[0, 1], 2);
        let e = download_energy(&s, &a, &[1.0]).unwrap()[0];
        assert!((e - 1.0).abs() < 1e-12);
        assert!(download_energy(&s, &a, &[2.0]).unwrap()[0] < e);
    }

    #[test]
    fn compute_energy_and_frequency() {
        assert_eq!(compute_energy(0.0f64, 1e-28, 1.0).unwrap(), 0.0);
        let e = compute_energy(1e7f64, 1e-28, 1e-2).unwrap();
        assert!((e - 1e-3).abs() < 1e-15);
        let e2 = compute_energy(1e7f64, 1e-28, 2e-2).unwrap();
        assert!((e2 - e / 4.0).abs() < 1e-16);
        assert!((frequency_of(1e7f64, 1e-2) - 1e9).abs() < 1e-3);
        assert_eq!(frequency_of(0.0f64, 0.5), 0.0);
        let t = 3.3e-3f64;
        assert!((frequency_of(1e7, t) * t - 1e7).abs() < 1e-6);
    }

    #[test]
    fn recursion_examples() {
        let a = Allocation { t_off: vec![2.0], t_dl: vec![4.0], t_c: vec![3.0], t0_c: 1.0 };
        assert_eq!(total_latency_recursive(&a), 9.0);
        let b = Allocation { t_off: vec![1.0, 5.0], t_dl: vec![1.0, 1.0], t_c: vec![1.0, 0.5], t0_c: 0.0 };
        assert_eq!(total_latency_recursive(&b), 8.0);
    }

    #[test]
    fn canonical_form_keeps_latency() {
        let mut b = Allocation { t_off: vec![1.0, 5.0], t_dl: vec![1.0, 1.0], t_c: vec![1.0, 0.5], t0_c: 9.5 };
        let before = total_latency_recursive(&b);
        canonicalize(&mut b, true);
        assert_eq!(total_latency_recursive(&b), before);
        assert_eq!(b.reformulated_latency(), before);
    }

    #[test]
    fn local_latency_limits() {
        let mut s = tiny();
        // Frequency-limited once the budget is huge.
        s.local.energy_budget_j = 1e9;
        let c = s.total_cycles();
        assert!((local_execution_latency(&s) - c / 0.9e9).abs() < 1e-15);
    }

    #[test]
    fn empty_tasks_are_feasible() {
        let mut s = tiny();
        for t in &mut s.tasks {
            *t = Task { input_bits: 0.0, output_bits: 0.0, cycles: 0.0 };
        }
        let a = Assignment::from_devices(&[0, 1], 2);
        let alloc = Allocation { t_off: vec![0.5], t_dl: vec![0.5], t_c: vec![0.5], t0_c: 0.5 };
        assert!(check_feasible(&s, &a, &alloc, &CheckOptions::default()).passes());
    }

    #[test]
    fn ordering_violation_is_reported() {
        let s = Scenario::new(
            1e6,
            LocalDevice { energy_budget_j: 1.0, max_frequency_hz: 1e9, capacitance: 1e-28 },
            vec![
                Helper {
                    uplink_gain_per_w: 1e3,
                    downlink_gain_per_w: 1e3,
                    energy_budget_j: 1.0,
                    max_frequency_hz: 1e9,
                    capacitance: 1e-28,
                };
                2
            ],
            vec![Task { input_bits: 1e3, output_bits: 1e3, cycles: 1e6 }; 3],
        )
        .unwrap();
        let a = Assignment::from_devices(&[0, 1, 2], 3);
        // Second offload slot ends one second after helper 1 finishes.
        let alloc = Allocation { t_off: vec![1.0, 2.0], t_dl: vec![1.0, 1.0], t_c: vec![1.0, 0.5], t0_c: 0.5 };
        let rep = check_feasible(&s, &a, &alloc, &CheckOptions::default());
        let c = rep.get("offload-before-first-download").unwrap();
        assert!(!c.pass);
        assert!((c.residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scenario_invariants() {
        let s = tiny();
        let mut bad = s.clone();
        bad.helpers[0].energy_budget_j = 0.0;
        assert!(bad.validate().is_err());
        let mut few = s.clone();
        few.tasks.truncate(1);
        assert!(few.validate().is_err());
    }
}

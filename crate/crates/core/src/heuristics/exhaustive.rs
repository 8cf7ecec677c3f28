//! Exhaustive search over every assignment that keeps each device busy.

use rayon::prelude::*;

use crate::allocator::{solve_p2_loads, P2Options, P2Solution};
use crate::error::{Error, Result};
use crate::heuristics::fixed::{solve_fixed_as, solve_fixed_loads};
use crate::model::{Assignment, Loads, Scenario};
use crate::result::{Diagnostics, Scheme, SchemeResult, Status};
use crate::scalar::Real;

/// Largest number of assignments searched by default.
pub const DEFAULT_ENUMERATION_CAP: u128 = 100_000;

fn binomial(n: u128, k: u128) -> Option<u128> {
    (0..k).try_fold(1u128, |acc, i| Some(acc.checked_mul(n - i)? / (i + 1)))
}

/// Number of assignments of `tasks` tasks to `helpers + 1` devices leaving
/// none idle, by inclusion-exclusion. Saturates at `u128::MAX`.
pub fn surjection_count(helpers: usize, tasks: usize) -> u128 {
    let d = helpers as u128 + 1;
    let count = || -> Option<u128> {
        let mut plus = d.checked_pow(tasks as u32)?;
        let mut minus = 0u128;
        for i in 1..=d - 1 {
            let term = binomial(d, i)?.checked_mul((d - i).checked_pow(tasks as u32)?)?;
            if i % 2 == 1 {
                minus = minus.checked_add(term)?;
            } else {
                plus = plus.checked_add(term)?;
            }
        }
        Some(plus - minus)
    };
    count().unwrap_or(u128::MAX)
}

/// Calls `visit` on every surjective map from `tasks` tasks onto
/// `devices` devices, in lexicographic order. Branches that can no longer
/// cover every device are cut, so only surjections are produced.
pub fn for_each_surjection(devices: usize, tasks: usize, mut visit: impl FnMut(&[usize])) {
    fn go(pos: usize, cur: &mut Vec<usize>, count: &mut [usize], missing: usize, tasks: usize, visit: &mut dyn FnMut(&[usize])) {
        if pos == tasks {
            visit(cur);
            return;
        }
        let left = tasks - pos;
        for dev in 0..count.len() {
            let fills = count[dev] == 0;
            let still = missing - usize::from(fills);
            if still > left - 1 {
                continue;
            }
            count[dev] += 1;
            cur.push(dev);
            go(pos + 1, cur, count, still, tasks, visit);
            cur.pop();
            count[dev] -= 1;
        }
    }
    if devices == 0 || tasks < devices {
        return;
    }
    let mut count = vec![0; devices];
    go(0, &mut Vec::with_capacity(tasks), &mut count, devices, tasks, &mut visit);
}

/// Every surjective assignment, as device indices per task.
pub fn surjections(devices: usize, tasks: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for_each_surjection(devices, tasks, |s| out.push(s.to_vec()));
    out
}

pub fn surjection_count_by_enumeration(helpers: usize, tasks: usize) -> u128 {
    let mut n = 0u128;
    for_each_surjection(helpers + 1, tasks, |_| n += 1);
    n
}

fn search<T: Real>(
    scenario: &Scenario<T>,
    cap: u128,
    solve: impl Fn(&Loads<T>) -> Result<P2Solution<T>> + Sync,
) -> Result<Option<(Assignment<T>, P2Solution<T>, usize)>> {
    let k = scenario.num_helpers();
    let count = surjection_count(k, scenario.num_tasks());
    if count > cap {
        return Err(Error::TooManyAssignments { count, cap });
    }
    let all = surjections(k + 1, scenario.num_tasks());
    let solved = all
        .par_iter()
        .map(|dev| {
            let asg = Assignment::from_devices(dev, k + 1);
            solve(&Loads::new(scenario, &asg)).map(|s| (asg, s))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = solved.len();
    // First strict minimum in enumeration order.
    let mut best: Option<(Assignment<T>, P2Solution<T>)> = None;
    for (asg, sol) in solved {
        if sol.status != Status::Infeasible && best.as_ref().is_none_or(|(_, b)| sol.latency < b.latency) {
            best = Some((asg, sol));
        }
    }
    Ok(best.map(|(a, s)| (a, s, n)))
}

/// Optimal assignment by solving the allocation problem for every
/// assignment. Refuses when there are more than `cap` of them.
pub fn exhaustive_optimal<T: Real>(scenario: &Scenario<T>, cap: u128) -> Result<SchemeResult<T>> {
    let opts = P2Options::default();
    let Some((asg, sol, n)) = search(scenario, cap, |loads| solve_p2_loads(scenario, loads, &opts))? else {
        let asg = Assignment::all_local(scenario.num_tasks(), scenario.num_devices());
        return Ok(SchemeResult::infeasible(Scheme::Exhaustive, scenario, asg, "no assignment meets the energy budgets"));
    };
    let diag = Diagnostics {
        dual_bound_s: Some(sol.dual_bound.as_f64()),
        relative_gap: Some(sol.relative_gap().as_f64()),
        iterations: sol.iterations,
        restarts: sol.restarts,
        subproblems: n,
        notes: Vec::new(),
    };
    SchemeResult::new(Scheme::Exhaustive, scenario, asg, sol.allocation, sol.latency, sol.status, diag)
}

/// Exhaustive search with every CPU at its frequency cap.
pub fn exhaustive_fixed<T: Real>(scenario: &Scenario<T>, cap: u128) -> Result<SchemeResult<T>> {
    let opts = P2Options::default();
    let Some((asg, _, n)) = search(scenario, cap, |loads| solve_fixed_loads(scenario, loads, &opts))? else {
        let asg = Assignment::all_local(scenario.num_tasks(), scenario.num_devices());
        return Ok(SchemeResult::infeasible(Scheme::Fixed, scenario, asg, "no assignment meets the energy budgets at the caps"));
    };
    let mut r = solve_fixed_as(Scheme::Fixed, scenario, &asg)?;
    r.diagnostics.subproblems = n;
    Ok(r)
}

//! Greedy assignment: fix the obvious placements, then add the remaining
//! tasks one at a time wherever the optimal allocation is fastest.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::allocator::{solve_p2_as, solve_p2_loads, P2Options};
use crate::error::Result;
use crate::model::{Assignment, Helper, Loads, Scenario, Task};
use crate::result::{Scheme, SchemeResult};
use crate::scalar::Real;

/// Better of two passes, one ordering tasks by input size and helpers by
/// uplink gain, the other by output size and downlink gain. In each pass the
/// largest task stays local, the `K` smallest go to the helpers in order of
/// decreasing gain, and each remaining task, smallest first, joins the
/// device with the lowest optimal latency for the tasks placed so far.
///
/// Ties go to the smaller helper index, the smaller device index and the
/// input-size pass.
pub fn greedy_assign<T: Real>(scenario: &Scenario<T>) -> Result<SchemeResult<T>> {
    let (by_input, by_output) = rayon::join(
        || pass(scenario, |t| t.input_bits, |h| h.uplink_gain_per_w),
        || pass(scenario, |t| t.output_bits, |h| h.downlink_gain_per_w),
    );
    let (a, b) = (by_input?, by_output?);
    let solves = a.diagnostics.subproblems + b.diagnostics.subproblems;
    let mut best = if b.latency_s < a.latency_s { b } else { a };
    best.diagnostics.subproblems = solves;
    Ok(best)
}

fn pass<T: Real>(
    scenario: &Scenario<T>,
    key: impl Fn(&Task<T>) -> T,
    gain: impl Fn(&Helper<T>) -> T,
) -> Result<SchemeResult<T>> {
    let k = scenario.num_helpers();
    let l = scenario.num_tasks();
    let d = k + 1;
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&x, &y| key(&scenario.tasks[x]).partial_cmp(&key(&scenario.tasks[y])).unwrap_or(Ordering::Equal));

    let mut weights = vec![vec![T::zero(); d]; l];
    weights[order[l - 1]][k] = T::one();
    let mut free: Vec<usize> = (0..k).collect();
    for &task in &order[..k] {
        let mut best = 0;
        for (pos, &h) in free.iter().enumerate() {
            if gain(&scenario.helpers[h]) > gain(&scenario.helpers[free[best]]) {
                best = pos;
            }
        }
        weights[task][free.remove(best)] = T::one();
    }

    let opts = P2Options::default();
    let mut solves = 0;
    for &task in &order[k..l - 1] {
        let latencies = (0..d)
            .into_par_iter()
            .map(|j| {
                let mut trial = weights.clone();
                trial[task][j] = T::one();
                let loads = Loads::new(scenario, &Assignment::from_weights(trial));
                solve_p2_loads(scenario, &loads, &opts).map(|s| s.latency)
            })
            .collect::<Result<Vec<T>>>()?;
        solves += d;
        let mut best = 0;
        for (j, &v) in latencies.iter().enumerate() {
            if v < latencies[best] {
                best = j;
            }
        }
        weights[task][best] = T::one();
    }
    let mut r = solve_p2_as(Scheme::Greedy, scenario, &Assignment::from_weights(weights))?;
    r.diagnostics.subproblems = solves + 1;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{check_feasible, CheckOptions};
    use crate::scenario::{gen_instance, GenConfig};

    fn instance(k: usize, l: usize, seed: u64) -> Scenario<f64> {
        gen_instance(&GenConfig { helpers: k, tasks: l, seed, ..GenConfig::default() }, 0).unwrap()
    }

    #[test]
    fn forced_phase_follows_channels() {
        let mut s = instance(2, 3, 1);
        s.helpers[0].uplink_gain_per_w = 1.0;
        s.helpers[1].uplink_gain_per_w = 10.0;
        s.helpers[0].downlink_gain_per_w = 1.0;
        s.helpers[1].downlink_gain_per_w = 10.0;
        s.tasks[0].input_bits = 100.0;
        s.tasks[1].input_bits = 200.0;
        s.tasks[2].input_bits = 300.0;
        s.tasks[0].output_bits = 100.0;
        s.tasks[1].output_bits = 200.0;
        s.tasks[2].output_bits = 300.0;
        let r = greedy_assign(&s).unwrap();
        // Smallest task to the best channel, next to the other helper, largest local.
        assert_eq!(r.assignment.devices(), vec![1, 0, 2]);
        assert_eq!(r.diagnostics.subproblems, 2);
    }

    #[test]
    fn deterministic_and_feasible() {
        let s = instance(2, 6, 3);
        let a = greedy_assign(&s).unwrap();
        let b = greedy_assign(&s).unwrap();
        assert_eq!(a, b);
        let rep = check_feasible(&s, &a.assignment, &a.allocation, &CheckOptions::default());
        assert!(rep.passes());
        assert_eq!(a.diagnostics.subproblems, 2 * (3 * 3 + 1));
    }
}

//! Benchmark schemes: fixed frequency, greedy assignment, exhaustive search,
//! random assignment and local execution.

mod exhaustive;
mod fixed;
mod greedy;

pub use exhaustive::{
    exhaustive_fixed, exhaustive_optimal, for_each_surjection, surjection_count, surjection_count_by_enumeration,
    surjections, DEFAULT_ENUMERATION_CAP,
};
pub use fixed::{
    dual_value_fixed, dual_value_fixed_relaxed, fixed_energy_feasible, fixed_phi_coefficients, fixed_residuals,
    solve_fixed_as, solve_fixed_frequency, solve_fixed_loads, FixedCoefficients, FixedDual, FixedLayout,
};
pub use greedy::greedy_assign;

use rand::Rng;

use crate::allocator::solve_p2_as;
use crate::error::Result;
use crate::model::{canonicalize, local_execution_latency, Allocation, Assignment, Scenario};
use crate::relax::round_and_adjust;
use crate::result::{Diagnostics, Scheme, SchemeResult, Status};
use crate::scalar::Real;

/// Uniform random weights, rounded and adjusted like the relaxed solution,
/// then allocated optimally.
pub fn random_assignment<T: Real, R: Rng + ?Sized>(scenario: &Scenario<T>, rng: &mut R) -> Result<SchemeResult<T>> {
    let d = scenario.num_devices();
    let weights = (0..scenario.num_tasks())
        .map(|_| (0..d).map(|_| T::lit(rng.random::<f64>())).collect())
        .collect();
    let assignment = round_and_adjust(&Assignment::from_weights(weights))?;
    solve_p2_as(Scheme::Random, scenario, &assignment)
}

/// Every task on the local user at the lowest latency its energy budget and
/// frequency cap allow.
pub fn local_only<T: Real>(scenario: &Scenario<T>) -> Result<SchemeResult<T>> {
    let k = scenario.num_helpers();
    let latency = local_execution_latency(scenario);
    let mut alloc = Allocation::zeros(k);
    alloc.t0_c = latency;
    canonicalize(&mut alloc, true);
    let assignment = Assignment::all_local(scenario.num_tasks(), k + 1);
    SchemeResult::new(Scheme::Local, scenario, assignment, alloc, latency, Status::Optimal, Diagnostics::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{check_feasible, CheckOptions};
    use crate::scenario::{gen_instance, GenConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn instance(k: usize, l: usize, seed: u64) -> Scenario<f64> {
        gen_instance(&GenConfig { helpers: k, tasks: l, seed, ..GenConfig::default() }, 0).unwrap()
    }

    #[test]
    fn local_only_matches_closed_form_and_checks() {
        let s = instance(2, 5, 1);
        let r = local_only(&s).unwrap();
        assert_eq!(r.latency_s, local_execution_latency(&s));
        let opts = CheckOptions { require_all_busy: false, ..CheckOptions::default() };
        let rep = check_feasible(&s, &r.assignment, &r.allocation, &opts);
        assert!(rep.passes(), "{:?}", rep.failures().collect::<Vec<_>>());
    }

    #[test]
    fn random_is_reproducible_and_valid() {
        let s = instance(2, 5, 2);
        let a = random_assignment(&s, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = random_assignment(&s, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.latency_s, b.latency_s);
        a.assignment.validate(&s, true, 1e-12).unwrap();
    }
}

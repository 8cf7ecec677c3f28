//! Experiment engine, validation oracles and scheme dispatch used by the
//! command-line front end.

mod experiment;
mod oracle;
mod validate;

pub use experiment::{
    run_experiment, ExperimentConfig, ExperimentReport, ExperimentRow, FailureRecord, OrderingViolation, Sweep,
    SweepParameter, CSV_HEADER,
};
pub use oracle::{grid_oracle_p2, GridOracle};
pub use validate::{validate_result, validate_scenario, ValidationCheck, ValidationReport};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::heuristics::{
    exhaustive_optimal, greedy_assign, local_only, random_assignment, solve_fixed_frequency, DEFAULT_ENUMERATION_CAP,
};
use crate::model::{check_feasible, CheckOptions, FeasibilityReport, Scenario};
use crate::relax::algorithm1;
use crate::result::{Scheme, SchemeResult};
use crate::scalar::Real;

/// Settings shared by every scheme run.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Seed of the random-assignment scheme.
    pub seed: u64,
    /// Largest number of assignments the exhaustive scheme may search.
    pub enumeration_cap: u128,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { seed: 0, enumeration_cap: DEFAULT_ENUMERATION_CAP }
    }
}

/// Runs one scheme on a scenario.
pub fn run_scheme<T: Real>(scheme: Scheme, scenario: &Scenario<T>, opts: &RunOptions) -> Result<SchemeResult<T>> {
    match scheme {
        Scheme::Joint => algorithm1(scenario),
        Scheme::Fixed => solve_fixed_frequency(scenario),
        Scheme::Greedy => greedy_assign(scenario),
        Scheme::Random => random_assignment(scenario, &mut ChaCha8Rng::seed_from_u64(opts.seed)),
        Scheme::Local => local_only(scenario),
        Scheme::Exhaustive => exhaustive_optimal(scenario, opts.enumeration_cap),
    }
}

/// Feasibility check of a scheme's output. The local-only scheme leaves the
/// helpers idle, so it is not required to keep every device busy.
pub fn check_result<T: Real>(scenario: &Scenario<T>, result: &SchemeResult<T>) -> FeasibilityReport {
    let opts = CheckOptions { require_all_busy: result.scheme != Scheme::Local, ..CheckOptions::default() };
    check_feasible(scenario, &result.assignment, &result.allocation, &opts)
}

//! Scheme identifiers and the common result record every solver returns.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{device_usage, Allocation, Assignment, Loads, Scenario};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Convex relaxation, rounding and optimal allocation.
    Joint,
    /// Helpers and local user at their maximum frequencies.
    Fixed,
    Greedy,
    Random,
    Local,
    Exhaustive,
}

impl Scheme {
    pub const ALL: [Scheme; 6] =
        [Scheme::Joint, Scheme::Fixed, Scheme::Greedy, Scheme::Random, Scheme::Local, Scheme::Exhaustive];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Joint => "joint",
            Scheme::Fixed => "fixed",
            Scheme::Greedy => "greedy",
            Scheme::Random => "random",
            Scheme::Local => "local",
            Scheme::Exhaustive => "exhaustive",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme `{s}` (expected one of joint, fixed, greedy, random, local, exhaustive)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    /// Certified within the solver tolerance.
    Optimal,
    /// Feasible, but no optimality certificate (heuristic or gap too large).
    Suboptimal,
    Infeasible,
}

/// Solver bookkeeping attached to a result.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Best dual (lower) bound on the latency, when a dual method was used.
    pub dual_bound_s: Option<f64>,
    /// `(latency - dual_bound) / latency`.
    pub relative_gap: Option<f64>,
    pub iterations: usize,
    pub restarts: usize,
    /// Number of continuous subproblems solved.
    pub subproblems: usize,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeResult<T> {
    pub scheme: Scheme,
    pub assignment: Assignment<T>,
    pub allocation: Allocation<T>,
    /// Frame latency; `+inf` when infeasible.
    pub latency_s: T,
    /// Energy per device, helpers first, local user last.
    pub energy_j: Vec<T>,
    /// CPU frequency per device, same order.
    pub frequency_hz: Vec<T>,
    pub status: Status,
    pub diagnostics: Diagnostics,
}

impl<T: Real> SchemeResult<T> {
    /// Fills energies and frequencies from the allocation.
    pub fn new(
        scheme: Scheme,
        scenario: &Scenario<T>,
        assignment: Assignment<T>,
        allocation: Allocation<T>,
        latency_s: T,
        status: Status,
        diagnostics: Diagnostics,
    ) -> Result<Self> {
        let loads = Loads::new(scenario, &assignment);
        let (energy_j, frequency_hz) = device_usage(scenario, &loads, &allocation)?;
        Ok(Self { scheme, assignment, allocation, latency_s, energy_j, frequency_hz, status, diagnostics })
    }

    /// Placeholder for a scheme that found no feasible operating point.
    pub fn infeasible(scheme: Scheme, scenario: &Scenario<T>, assignment: Assignment<T>, note: impl Into<String>) -> Self {
        let d = scenario.num_devices();
        Self {
            scheme,
            assignment,
            allocation: Allocation::zeros(scenario.num_helpers()),
            latency_s: T::infinity(),
            energy_j: vec![T::zero(); d],
            frequency_hz: vec![T::zero(); d],
            status: Status::Infeasible,
            diagnostics: Diagnostics { notes: vec![note.into()], ..Diagnostics::default() },
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.status != Status::Infeasible
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{s}\""));
        }
        assert!("optimal".parse::<Scheme>().is_err());
    }
}

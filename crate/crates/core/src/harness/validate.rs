//! Bundled consistency checks for one scenario.

use std::fmt::Write as _;

use serde::Serialize;

use super::check_result;
use crate::allocator::{solve_p2_loads, P2Options};
use crate::error::Result;
use crate::heuristics::{exhaustive_optimal, surjection_count, DEFAULT_ENUMERATION_CAP};
use crate::model::{total_latency_recursive, Loads, Scenario};
use crate::numerics::lambert::{lambert_w0, tilde_f};
use crate::relax::{algorithm1, solve_p1};
use crate::result::SchemeResult;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationCheck {
    pub name: String,
    /// `None` when the check was skipped.
    pub pass: Option<bool>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
}

impl ValidationReport {
    /// True when no check failed (skipped checks do not count).
    pub fn passes(&self) -> bool {
        self.checks.iter().all(|c| c.pass != Some(false))
    }

    pub fn get(&self, name: &str) -> Option<&ValidationCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let tag = match c.pass {
                Some(true) => "PASS",
                Some(false) => "FAIL",
                None => "SKIP",
            };
            let _ = writeln!(s, "{tag}  {:<22} {}", c.name, c.detail);
        }
        s
    }

    fn push(&mut self, name: &str, pass: Option<bool>, detail: String) {
        self.checks.push(ValidationCheck { name: name.to_string(), pass, detail });
    }
}

const RECURSION_TOL: f64 = 1e-9;
const GAP_TOL: f64 = 1e-4;
const LAMBERT_TOL: f64 = 1e-12;

/// Checks on a given result: feasibility and agreement of the recursive
/// frame latency with the reported latency and with the reformulated
/// objective.
pub fn validate_result(scenario: &Scenario<f64>, result: &SchemeResult<f64>) -> ValidationReport {
    let mut rep = ValidationReport { checks: Vec::new() };
    if !result.is_feasible() {
        rep.push("feasibility", None, "scheme reported no feasible point".into());
        return rep;
    }
    let fr = check_result(scenario, result);
    let worst = fr.failures().map(|c| format!("{} ({:e})", c.name, c.residual)).collect::<Vec<_>>();
    rep.push(
        "feasibility",
        Some(fr.passes()),
        if worst.is_empty() { format!("{} constraints hold", fr.checks.len()) } else { worst.join(", ") },
    );
    let rec = total_latency_recursive(&result.allocation);
    let reform = result.allocation.reformulated_latency();
    let scale = rec.abs().max(f64::MIN_POSITIVE);
    let diff = (rec - reform).abs().max((rec - result.latency_s).abs()) / scale;
    rep.push(
        "recursion-equivalence",
        Some(diff <= RECURSION_TOL),
        format!("recursive {rec:e} s, reformulated {reform:e} s, reported {:e} s", result.latency_s),
    );
    rep
}

/// Runs the joint scheme on `scenario` and every bundled oracle: output
/// feasibility, latency recursion, duality gap of the allocation, the
/// relaxation sandwich (when the assignments can be enumerated) and Lambert
/// W round trips.
pub fn validate_scenario(scenario: &Scenario<f64>) -> Result<ValidationReport> {
    let joint = algorithm1(scenario)?;
    let mut rep = validate_result(scenario, &joint);

    if joint.is_feasible() {
        let loads = Loads::new(scenario, &joint.assignment);
        let p2 = solve_p2_loads(scenario, &loads, &P2Options::default())?;
        let gap = p2.relative_gap();
        rep.push("duality-gap", Some(gap <= GAP_TOL), format!("relative gap {gap:e}"));
    } else {
        rep.push("duality-gap", None, "joint scheme infeasible".into());
    }

    let count = surjection_count(scenario.num_helpers(), scenario.num_tasks());
    if count > DEFAULT_ENUMERATION_CAP {
        rep.push("sandwich", None, format!("too large to enumerate ({count} assignments)"));
    } else {
        let lb = solve_p1(scenario)?.map(|p| p.lower_bound);
        let ex = exhaustive_optimal(scenario, DEFAULT_ENUMERATION_CAP)?;
        match lb {
            Some(lb) if ex.is_feasible() => {
                let tol = GAP_TOL * ex.latency_s;
                let ok = lb <= ex.latency_s + tol && ex.latency_s <= joint.latency_s + tol;
                rep.push(
                    "sandwich",
                    Some(ok),
                    format!("bound {lb:e} s <= optimum {:e} s <= joint {:e} s", ex.latency_s, joint.latency_s),
                );
            }
            _ => rep.push("sandwich", Some(!joint.is_feasible()), "no feasible assignment".into()),
        }
    }

    let mut worst = 0.0f64;
    for i in -40..=40 {
        let x = 10f64.powf(i as f64 / 4.0);
        let w = lambert_w0(x)?;
        worst = worst.max((w * w.exp() - x).abs() / x);
    }
    let mut worst_f = 0.0f64;
    let bw = scenario.bandwidth_hz;
    for i in -20..=20 {
        // `f(x) - x f'(x) = -y` defines the inverse used for the rates.
        let y = 10f64.powf(i as f64 / 4.0);
        let x = tilde_f(y, bw);
        let c = std::f64::consts::LN_2 / bw;
        let g = (c * x).exp_m1() - c * x * (c * x).exp();
        worst_f = worst_f.max((g + y).abs() / y);
    }
    rep.push(
        "lambert-round-trip",
        Some(worst <= LAMBERT_TOL && worst_f <= 1e-9),
        format!("W residual {worst:e}, rate inverse residual {worst_f:e}"),
    );
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{gen_instance, GenConfig};

    #[test]
    fn fresh_scenario_passes_and_corruption_is_caught() {
        let s = gen_instance::<f64>(&GenConfig { helpers: 2, tasks: 5, seed: 21, ..GenConfig::default() }, 0).unwrap();
        let rep = validate_scenario(&s).unwrap();
        assert!(rep.passes(), "{}", rep.table());
        assert!(rep.checks.iter().all(|c| c.pass == Some(true)));

        let mut bad = algorithm1(&s).unwrap();
        bad.allocation.t_c[0] *= 0.5;
        let rep = validate_result(&s, &bad);
        assert_eq!(rep.get("recursion-equivalence").unwrap().pass, Some(false));
    }

    #[test]
    fn sandwich_is_skipped_for_large_instances() {
        let s = gen_instance::<f64>(&GenConfig { helpers: 3, tasks: 20, seed: 2, ..GenConfig::default() }, 0).unwrap();
        let rep = validate_scenario(&s).unwrap();
        let sandwich = rep.get("sandwich").unwrap();
        assert_eq!(sandwich.pass, None);
        assert!(sandwich.detail.contains("too large to enumerate"));
    }
}

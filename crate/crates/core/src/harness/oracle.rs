//! Brute-force check of the allocation solver on single-helper instances.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{total_latency_recursive, transmit_energy, Allocation, Assignment, Loads, Scenario};

/// Best grid point found by [`grid_oracle_p2`].
#[derive(Debug, Clone)]
pub struct GridOracle {
    pub latency: f64,
    pub allocation: Allocation<f64>,
    pub evaluations: usize,
    /// Times the search box had to be enlarged.
    pub widenings: usize,
}

const REFINEMENTS: usize = 4;
const SHRINK: f64 = 10.0;
const MAX_WIDENINGS: usize = 30;
const MAX_SHIFTS: usize = 400;

/// Log-spaced grid of one radio slot.
struct Axis {
    lo: f64,
    hi: f64,
    active: bool,
}

impl Axis {
    fn values(&self, n: usize) -> Vec<f64> {
        if !self.active {
            return vec![0.0];
        }
        (0..n).map(|i| (self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64).exp()).collect()
    }

    fn centre_on(&mut self, c: f64, half: f64) {
        if self.active {
            self.lo = c.ln() - half;
            self.hi = c.ln() + half;
        }
    }
}

/// Shortest CPU slot for `cycles` that stays within `energy` and the
/// frequency cap, from inverting `kappa C^3 / t^2`.
fn shortest_cpu_slot(cycles: f64, kappa: f64, max_frequency: f64, energy: f64) -> Option<f64> {
    if cycles <= 0.0 {
        return (energy >= 0.0).then_some(0.0);
    }
    if !(energy > 0.0) {
        return None;
    }
    Some((kappa * cycles.powi(3) / energy).sqrt().max(cycles / max_frequency))
}

/// Minimum latency of the allocation problem for a single-helper scenario.
///
/// The frame latency only grows with each slot, so for fixed radio slots the
/// best CPU slots are the shortest ones the leftover energy allows. That
/// leaves a search over the offload and download slots, done on a
/// `resolution x resolution` log-spaced grid. At each box size the grid is
/// re-centred on the best point until that stops helping, then the box
/// shrinks tenfold, [`REFINEMENTS`] times. The box grows whenever no grid
/// point is feasible. Slots without load stay at zero.
///
/// The result is feasible, hence never below the true optimum.
pub fn grid_oracle_p2(scenario: &Scenario<f64>, assignment: &Assignment<f64>, resolution: usize) -> Result<GridOracle> {
    if scenario.num_helpers() != 1 || scenario.num_tasks() > 3 {
        return Err(Error::InvalidScenario("the grid oracle needs one helper and at most three tasks".into()));
    }
    if resolution < 3 {
        return Err(Error::Config("grid resolution must be at least 3".into()));
    }
    assignment.validate(scenario, false, 1e-12)?;
    let loads = Loads::new(scenario, assignment);
    let h = &scenario.helpers[0];
    let loc = &scenario.local;
    let bw = scenario.bandwidth_hz;

    // Start around unit spectral efficiency.
    let mut axes: Vec<Axis> = [loads.offload_bits[0], loads.download_bits[0]]
        .iter()
        .map(|&bits| {
            let g = (bits / bw).max(1e-30);
            Axis { lo: (g / 100.0).ln(), hi: (g * 100.0).ln(), active: bits > 0.0 }
        })
        .collect();

    // Slot lengths for given radio slots, or `None` when over budget.
    let complete = |t_off: f64, t_dl: f64| -> Option<[f64; 4]> {
        let e_off = transmit_energy(loads.offload_bits[0], t_off, h.uplink_gain_per_w, bw).ok()?;
        let e_dl = transmit_energy(loads.download_bits[0], t_dl, h.downlink_gain_per_w, bw).ok()?;
        let t0 = shortest_cpu_slot(loads.local_cycles, loc.capacitance, loc.max_frequency_hz, loc.energy_budget_j - e_off)?;
        let t_c = shortest_cpu_slot(loads.helper_cycles[0], h.capacitance, h.max_frequency_hz, h.energy_budget_j - e_dl)?;
        Some([t_off, t_c, t_dl, t0])
    };
    let latency = |p: &[f64; 4]| (p[0] + p[1] + p[2]).max(p[3]);

    let mut evaluations = 0;
    let mut widenings = 0;
    let mut round = 0;
    let mut shifts = 0;
    let mut best: Option<(f64, [f64; 4])> = None;
    loop {
        let off = axes[0].values(resolution);
        let dl = axes[1].values(resolution);
        evaluations += off.len() * dl.len();
        let found = off
            .par_iter()
            .enumerate()
            .filter_map(|(i, &a)| {
                dl.iter()
                    .enumerate()
                    .filter_map(|(k, &c)| complete(a, c).map(|p| (latency(&p), (i, k), p)))
                    .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
            })
            .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));

        let Some((lat, _, point)) = found else {
            // Nothing feasible: longer radio slots use less energy.
            for a in axes.iter_mut().filter(|a| a.active) {
                a.hi += SHRINK.ln();
            }
            widenings += 1;
            if widenings > MAX_WIDENINGS {
                return Err(Error::Breakdown("grid oracle found no feasible point".into()));
            }
            continue;
        };
        let improved = best.is_none_or(|(b, _)| lat < b * (1.0 - 1e-12));
        if improved {
            best = Some((lat, point));
            if shifts < MAX_SHIFTS {
                shifts += 1;
                for (a, c) in axes.iter_mut().zip([point[0], point[2]]) {
                    let half = 0.5 * (a.hi - a.lo);
                    a.centre_on(c, half);
                }
                continue;
            }
        }
        if round == REFINEMENTS {
            break;
        }
        let (_, centre) = best.expect("set above");
        for (a, c) in axes.iter_mut().zip([centre[0], centre[2]]) {
            let half = (a.hi - a.lo) / (2.0 * SHRINK);
            a.centre_on(c, half);
        }
        round += 1;
    }

    let (_, p) = best.expect("at least one round succeeded");
    let allocation = Allocation { t_off: vec![p[0]], t_c: vec![p[1]], t_dl: vec![p[2]], t0_c: p[3] };
    Ok(GridOracle { latency: total_latency_recursive(&allocation), allocation, evaluations, widenings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocator::solve_p2;
    use crate::scenario::{gen_instance, GenConfig};

    #[test]
    fn agrees_with_the_dual_solver() {
        let cfg = GenConfig { helpers: 1, tasks: 2, seed: 3, ..GenConfig::default() };
        for i in 0..3 {
            let s = gen_instance::<f64>(&cfg, i).unwrap();
            let asg = Assignment::from_devices(&[0, 1], 2);
            let grid = grid_oracle_p2(&s, &asg, 64).unwrap();
            let p2 = solve_p2(&s, &asg).unwrap();
            assert!(grid.latency >= p2.diagnostics.dual_bound_s.unwrap() * (1.0 - 1e-9));
            assert!((grid.latency - p2.latency_s).abs() <= 1e-3 * p2.latency_s, "{} vs {}", grid.latency, p2.latency_s);
        }
    }

    #[test]
    fn empty_helper_and_tight_budget() {
        let cfg = GenConfig { helpers: 1, tasks: 2, seed: 4, ..GenConfig::default() };
        let mut s = gen_instance::<f64>(&cfg, 0).unwrap();
        // Tight local budget pushes the offload slot far beyond the start box.
        s.tasks[0].input_bits = 1e4;
        let floor = 1e4 * std::f64::consts::LN_2 / (s.bandwidth_hz * s.helpers[0].uplink_gain_per_w);
        let f0 = s.local.max_frequency_hz;
        s.local.energy_budget_j = 1.5 * floor + s.local.capacitance * s.tasks[1].cycles * f0 * f0;
        let asg = Assignment::from_devices(&[0, 1], 2);
        let p2 = solve_p2(&s, &asg).unwrap();
        let grid = grid_oracle_p2(&s, &asg, 64).unwrap();
        assert!(p2.is_feasible());
        assert!((grid.latency - p2.latency_s).abs() <= 1e-3 * p2.latency_s, "{} vs {}", grid.latency, p2.latency_s);
        // Helper with no load at all.
        s.tasks[0] = crate::model::Task { input_bits: 0.0, output_bits: 0.0, cycles: 0.0 };
        let grid = grid_oracle_p2(&s, &asg, 64).unwrap();
        assert_eq!(grid.allocation.t_off[0], 0.0);
        let p2 = solve_p2(&s, &asg).unwrap();
        assert!((grid.latency - p2.latency_s).abs() <= 1e-3 * p2.latency_s);
    }

    #[test]
    fn rejects_larger_instances() {
        let s = gen_instance::<f64>(&GenConfig { helpers: 2, tasks: 3, ..GenConfig::default() }, 0).unwrap();
        assert!(grid_oracle_p2(&s, &Assignment::from_devices(&[0, 1, 2], 3), 8).is_err());
    }
}

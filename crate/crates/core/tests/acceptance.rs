//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit when any
//! criterion fails. Runs without the libtest harness so the lines always
//! show.

use std::process::ExitCode;
use std::time::Instant;

use mec_core::allocator::{closed_form_times, solve_p2, DualLayout, DualPoint};
use mec_core::harness::{grid_oracle_p2, run_experiment, run_scheme, ExperimentConfig, RunOptions};
use mec_core::heuristics::{
    exhaustive_optimal, for_each_surjection, solve_fixed_as, surjection_count, surjection_count_by_enumeration,
    DEFAULT_ENUMERATION_CAP,
};
use mec_core::model::{local_execution_latency, rate_fn, Loads};
use mec_core::numerics::{lambert_w0, tilde_f};
use mec_core::relax::{algorithm1, solve_p1};
use mec_core::scenario::{gen_instance, GenConfig};
use mec_core::{Assignment, Scenario, Scheme};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn instance(helpers: usize, tasks: usize, seed: u64, index: u64) -> Scenario {
    gen_instance(&GenConfig { helpers, tasks, seed, ..GenConfig::default() }, index).unwrap()
}

fn local_tables() -> Outcome {
    let grid = [1.00e6, 2.29e6, 3.57e6, 4.86e6, 6.14e6, 7.43e6, 8.71e6, 10.0e6];
    let tables: [(usize, f64, [f64; 8]); 2] = [
        (7, -30.0, [7.77, 20.2, 39.5, 62.7, 89.2, 119.0, 151.0, 185.0]),
        (10, -33.0, [14.1, 48.9, 95.5, 151.0, 215.0, 286.0, 364.0, 447.0]),
    ];
    let mut worst = 0.0f64;
    for (tasks, e0, expected_ms) in tables {
        for (&c, &ms) in grid.iter().zip(&expected_ms) {
            let cfg = GenConfig { helpers: 1, tasks, cycles: [c, c], local_energy_db: e0, ..GenConfig::default() };
            let s: Scenario = gen_instance(&cfg, 0).unwrap();
            let got = 1e3 * local_execution_latency(&s);
            worst = worst.max((got - ms).abs() / ms);
        }
    }
    outcome(worst <= 0.01, format!("worst relative deviation {:.3}%", 100.0 * worst))
}

fn sandwich() -> Outcome {
    let mut ok = true;
    let mut p1_gaps = Vec::new();
    let mut a1_gaps = Vec::new();
    let n = 50;
    for i in 0..n {
        let s = instance(2, 5, 2024, i);
        let ex = exhaustive_optimal(&s, DEFAULT_ENUMERATION_CAP).unwrap();
        let a1 = algorithm1(&s).unwrap();
        let lb = solve_p1(&s).unwrap().map(|p| p.lower_bound);
        match lb {
            Some(lb) if ex.is_feasible() => {
                let tol = 1e-4 * ex.latency_s;
                ok &= lb <= ex.latency_s + tol && ex.latency_s <= a1.latency_s + tol;
                p1_gaps.push((ex.latency_s - lb) / ex.latency_s);
                a1_gaps.push((a1.latency_s - ex.latency_s) / ex.latency_s);
            }
            _ => ok &= !a1.is_feasible(),
        }
    }
    let med = median(a1_gaps.clone());
    outcome(
        ok && a1_gaps.len() >= 50 && med <= 0.10,
        format!(
            "{} instances, bound gap median {:.2}%, joint gap median {:.2}% (max {:.2}%)",
            a1_gaps.len(),
            100.0 * median(p1_gaps),
            100.0 * med,
            100.0 * a1_gaps.iter().cloned().fold(0.0, f64::max)
        ),
    )
}

fn grid_agreement() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_gap = 0.0f64;
    for i in 0..20 {
        let s = instance(1, 2, 77, i);
        let asg = Assignment::from_devices(&[(i % 2) as usize, 1 - (i % 2) as usize], 2);
        let p2 = solve_p2(&s, &asg).unwrap();
        let grid = grid_oracle_p2(&s, &asg, 48).unwrap();
        worst = worst.max((grid.latency - p2.latency_s).abs() / p2.latency_s);
        worst_gap = worst_gap.max(p2.diagnostics.relative_gap.unwrap_or(f64::INFINITY));
    }
    outcome(
        worst <= 5e-3 && worst_gap <= 1e-4,
        format!("worst grid deviation {worst:.2e}, worst duality gap {worst_gap:.2e}"),
    )
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

fn closed_forms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let s = instance(3, 8, 5, 0);
    let devices: Vec<usize> = (0..8).map(|i| i % 4).collect();
    let loads = Loads::new(&s, &Assignment::from_devices(&devices, 4));
    let bw = s.bandwidth_hz;
    let ln2 = std::f64::consts::LN_2;
    // Derivative of the Lagrangian in each slot, scaled by its coefficient.
    let radio = |bits: f64, time: f64, coeff: f64, price: f64, gain: f64| {
        let x = bits / time;
        let fp = ln2 / bw * (x * ln2 / bw).exp();
        ((price / gain * (rate_fn(x, bw) - x * fp) + coeff) / coeff).abs()
    };
    let cpu = |cycles: f64, time: f64, coeff: f64, price: f64, kappa: f64| {
        ((coeff - 2.0 * price * kappa * (cycles / time).powi(3)) / coeff).abs()
    };
    let mut stat = 0.0f64;
    for _ in 0..100 {
        let d = random_interior(3, &mut rng);
        let c = d.coefficients();
        let t = closed_form_times(&s, &loads, &d);
        for (j, h) in s.helpers.iter().enumerate() {
            stat = stat.max(radio(loads.offload_bits[j], t.t_off[j], c.d[j], d.lambda0, h.uplink_gain_per_w));
            stat = stat.max(radio(loads.download_bits[j], t.t_dl[j], c.a[j], d.lambda[j], h.downlink_gain_per_w));
            stat = stat.max(cpu(loads.helper_cycles[j], t.t_c[j], c.b[j], d.lambda[j], h.capacitance));
        }
        stat = stat.max(cpu(loads.local_cycles, t.t0_c, c.local, d.lambda0, s.local.capacitance));
    }
    let mut w_err = 0.0f64;
    for i in -60..=60 {
        let x = 10f64.powf(i as f64 / 5.0);
        let w = lambert_w0(x).unwrap();
        w_err = w_err.max((w * w.exp() - x).abs() / x);
    }
    let mut f_err = 0.0f64;
    for i in -30..=30 {
        let y = 10f64.powf(i as f64 / 5.0);
        let x = tilde_f(y, bw);
        let u = ln2 * x / bw;
        f_err = f_err.max((u.exp_m1() - u * u.exp() + y).abs() / y);
    }
    outcome(
        stat <= 1e-8 && w_err <= 1e-12 && f_err <= 1e-9,
        format!("stationarity {stat:.1e}, Lambert W {w_err:.1e}, rate inverse {f_err:.1e}"),
    )
}

fn ordering() -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    let mut pairs = 0;
    let instances: Vec<Scenario> =
        (0..20).map(|i| instance(2, 5, 2024, i)).chain((0..20).map(|i| instance(1, 3, 77, i))).collect();
    for (n, s) in instances.iter().enumerate() {
        let ex = exhaustive_optimal(s, DEFAULT_ENUMERATION_CAP).unwrap();
        for scheme in [Scheme::Joint, Scheme::Greedy, Scheme::Random] {
            let r = run_scheme(scheme, s, &RunOptions { seed: n as u64, ..RunOptions::default() }).unwrap();
            checked += 1;
            if r.is_feasible() && r.latency_s < ex.latency_s * (1.0 - 1e-4) {
                bad.push(format!("{scheme} on instance {n}"));
            }
        }
        if n % 8 == 0 {
            // Every assignment of a few instances.
            let d = s.num_helpers() + 1;
            for_each_surjection(d, s.num_tasks(), |devs| {
                let asg = Assignment::from_devices(devs, d);
                let fixed = solve_fixed_as(Scheme::Fixed, s, &asg).unwrap();
                if fixed.is_feasible() {
                    pairs += 1;
                    let p2 = solve_p2(s, &asg).unwrap();
                    if fixed.latency_s < p2.latency_s * (1.0 - 1e-4) {
                        bad.push(format!("fixed below allocation optimum on instance {n}, {devs:?}"));
                    }
                }
            });
        }
    }
    outcome(
        bad.is_empty() && pairs > 0,
        format!("{checked} scheme runs, {pairs} fixed/optimal pairs, violations: {:?}", bad),
    )
}

fn counting() -> Outcome {
    let headline = surjection_count(2, 5) == 150 && surjection_count_by_enumeration(2, 5) == 150;
    let mut all = true;
    for k in 1..=3 {
        for l in 1..=8 {
            all &= surjection_count(k, l) == surjection_count_by_enumeration(k, l);
        }
    }
    outcome(headline && all, format!("K=2, L=5 gives {}; formula and enumeration agree for K<=3, L<=8: {all}", surjection_count(2, 5)))
}

fn sweep(parameter: &str, values: &[f64], extra: &str) -> ExperimentConfig {
    let values = values.iter().map(|v| format!("{v:.1}")).collect::<Vec<_>>().join(", ");
    ExperimentConfig::from_toml(&format!(
        "realizations = 50\nschemes = [\"joint\", \"fixed\"]\n[generator]\nhelpers = 2\ntasks = 5\nseed = 42\n{extra}\n\
         [sweep]\nparameter = \"{parameter}\"\nvalues = [{values}]\n"
    ))
    .unwrap()
}

fn trends() -> Outcome {
    let helper = run_experiment(&sweep("helper_energy_db", &[-40.0, -35.0, -30.0, -25.0, -20.0, -15.0, -10.0], "")).unwrap();
    let local = run_experiment(&sweep(
        "local_energy_db",
        &[-40.0, -37.0, -34.0, -31.0, -28.0, -25.0],
        "helper_energy_db = -10.0",
    ))
    .unwrap();
    let means = |rep: &mec_core::harness::ExperimentReport, scheme: Scheme| -> Vec<Option<f64>> {
        rep.rows.iter().filter(|r| r.scheme == scheme).map(|r| r.mean_latency_s).collect()
    };
    let non_increasing = |m: &[Option<f64>]| {
        m.iter().all(Option::is_some) && m.windows(2).all(|w| w[1].unwrap() <= 1.02 * w[0].unwrap())
    };
    let joint_h = means(&helper, Scheme::Joint);
    let joint_l = means(&local, Scheme::Joint);
    let fixed: Vec<(usize, usize)> =
        helper.rows.iter().filter(|r| r.scheme == Scheme::Fixed).map(|r| (r.n_feasible, r.n_total)).collect();
    let threshold = fixed.first().is_some_and(|&(f, _)| f == 0) && fixed.last().is_some_and(|&(f, n)| f == n);
    let ms = |m: &[Option<f64>]| m.iter().map(|x| x.map_or("-".into(), |v| format!("{:.2}", 1e3 * v))).collect::<Vec<String>>();
    outcome(
        non_increasing(&joint_h) && non_increasing(&joint_l) && threshold,
        format!(
            "joint vs E_k {:?} ms, vs E_0 {:?} ms, fixed feasible {:?}",
            ms(&joint_h),
            ms(&joint_l),
            fixed.iter().map(|p| p.0).collect::<Vec<_>>()
        ),
    )
}

fn reproducibility() -> Outcome {
    let cfg = ExperimentConfig::from_toml(
        "realizations = 6\nschemes = [\"joint\", \"fixed\", \"greedy\", \"random\", \"local\", \"exhaustive\"]\n\
         [generator]\nhelpers = 2\ntasks = 4\nseed = 13\n[sweep]\nparameter = \"task_bits\"\nvalues = [2000.0, 8000.0]\n",
    )
    .unwrap();
    let a = run_experiment(&cfg).unwrap().to_csv().unwrap();
    let b = run_experiment(&cfg).unwrap().to_csv().unwrap();
    outcome(a == b && a.lines().count() == 13, format!("{} bytes, identical: {}", a.len(), a == b))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("local-execution tables", local_tables),
        ("sandwich bound", sandwich),
        ("allocation solver vs grid oracle", grid_agreement),
        ("closed forms and Lambert W", closed_forms),
        ("scheme ordering", ordering),
        ("assignment counting", counting),
        ("energy trends", trends),
        ("reproducible CSV", reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        println!(
            "{} {}. {name}: {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

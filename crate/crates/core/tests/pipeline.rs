use mec_core::harness::{check_result, run_experiment, run_scheme, validate_scenario, ExperimentConfig, RunOptions};
use mec_core::model::local_execution_latency;
use mec_core::relax::algorithm1;
use mec_core::scenario::{gen_instance, load_scenario, save_scenario, GenConfig, ScenarioFile};
use mec_core::{Error, Scenario, Scheme};

fn cfg(helpers: usize, tasks: usize, seed: u64) -> GenConfig {
    GenConfig { helpers, tasks, seed, ..GenConfig::default() }
}

#[test]
fn scenario_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.scn.json");
    let c = cfg(3, 6, 4);
    let s: Scenario = gen_instance(&c, 0).unwrap();
    save_scenario(&path, &ScenarioFile::generated(s.clone(), &c)).unwrap();
    let back = load_scenario(&path).unwrap();
    assert_eq!(back.scenario, s);
    assert_eq!(back.seed, Some(4));

    let text = std::fs::read_to_string(&path).unwrap().replace("\"schema_version\": 1", "\"schema_version\": 9");
    assert!(matches!(ScenarioFile::from_json(&text, "x"), Err(Error::SchemaVersion { found: 9, .. })));
}

#[test]
fn every_scheme_is_feasible_and_no_better_than_exhaustive() {
    for seed in 0..3 {
        let s: Scenario = gen_instance(&cfg(2, 4, seed), 0).unwrap();
        let ex = run_scheme(Scheme::Exhaustive, &s, &RunOptions::default()).unwrap();
        for scheme in Scheme::ALL {
            let r = run_scheme(scheme, &s, &RunOptions { seed, ..RunOptions::default() }).unwrap();
            if !r.is_feasible() {
                assert_eq!(scheme, Scheme::Fixed);
                continue;
            }
            assert!(check_result(&s, &r).passes(), "{scheme}");
            if scheme != Scheme::Local {
                assert!(r.latency_s >= ex.latency_s * (1.0 - 1e-4), "{scheme}");
            }
        }
        let local = run_scheme(Scheme::Local, &s, &RunOptions::default()).unwrap();
        assert_eq!(local.latency_s, local_execution_latency(&s));
    }
}

#[test]
fn single_precision_joint_scheme_tracks_double() {
    let c = cfg(2, 4, 6);
    let s64: Scenario = gen_instance(&c, 0).unwrap();
    let s32: mec_core::model::Scenario<f32> = gen_instance(&c, 0).unwrap();
    let a = algorithm1(&s64).unwrap();
    let b = algorithm1(&s32).unwrap();
    assert!(b.is_feasible());
    assert!(((b.latency_s as f64) - a.latency_s).abs() <= 0.05 * a.latency_s, "{} vs {}", b.latency_s, a.latency_s);
}

#[test]
fn validation_report_on_a_fresh_scenario() {
    let s: Scenario = gen_instance(&cfg(2, 5, 30), 0).unwrap();
    let rep = validate_scenario(&s).unwrap();
    assert!(rep.passes(), "{}", rep.table());
    assert_eq!(rep.checks.len(), 5);
}

#[test]
fn experiment_files() {
    let cfg = ExperimentConfig::from_toml(
        "name = \"cyc\"\nrealizations = 3\nschemes = [\"local\", \"greedy\"]\n[generator]\nhelpers = 1\ntasks = 3\n\
         [sweep]\nparameter = \"task_cycles\"\nvalues = [1e6, 3e6]\n",
    )
    .unwrap();
    let rep = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let sidecar = rep.write(dir.path().join("cyc.csv")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(sidecar).unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 4);
    // Local latency grows with the computation load.
    let local: Vec<f64> = rep.rows.iter().filter(|r| r.scheme == Scheme::Local).map(|r| r.mean_latency_s.unwrap()).collect();
    assert!(local[1] > local[0]);

    assert!(ExperimentConfig::from_toml("schemes = []\n[sweep]\nparameter = \"bogus\"\nvalues = [1.0]\n").is_err());
}

//! Parameter sweeps over many channel realizations.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_result, run_scheme, RunOptions};
use crate::error::{Error, Result};
use crate::heuristics::{surjection_count, DEFAULT_ENUMERATION_CAP};
use crate::result::{Scheme, SchemeResult};
use crate::scenario::{gen_instance, GenConfig};

pub const CSV_HEADER: [&str; 6] = ["sweep_value", "scheme", "mean_latency_s", "std", "n_feasible", "n_total"];

/// Offset mixed into the seed of the random-assignment scheme so it does
/// not share a stream with the channel draws.
const RANDOM_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Relative slack when comparing a scheme against exhaustive search; both
/// solve the allocation problem to this gap.
const ORDERING_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Energy budget of every helper (dB re 1 J).
    HelperEnergyDb,
    /// Energy budget of the local user (dB re 1 J).
    LocalEnergyDb,
    /// Common frequency cap of the helpers (Hz).
    HelperMaxFrequencyHz,
    /// Common input and output length of every task (bits).
    TaskBits,
    /// Common computation load of every task (cycles).
    TaskCycles,
    TaskCount,
}

impl SweepParameter {
    /// Generator settings at one sweep point.
    pub fn apply(self, base: &GenConfig, value: f64) -> Result<GenConfig> {
        let mut cfg = base.clone();
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!("task count {value} is not a positive integer")))
            }
        };
        match self {
            SweepParameter::HelperEnergyDb => cfg.helper_energy_db = value,
            SweepParameter::LocalEnergyDb => cfg.local_energy_db = value,
            SweepParameter::HelperMaxFrequencyHz => cfg.helper_max_frequency_hz = [value, value],
            SweepParameter::TaskBits => {
                cfg.input_bits = [value, value];
                cfg.output_bits = [value, value];
            }
            SweepParameter::TaskCycles => cfg.cycles = [value, value],
            SweepParameter::TaskCount => cfg.tasks = count()?,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

/// Experiment description, read from TOML.
///
/// ```toml
/// realizations = 50
/// schemes = ["joint", "fixed", "greedy", "random", "local"]
///
/// [generator]
/// helpers = 2
/// tasks = 5
/// seed = 7
///
/// [sweep]
/// parameter = "helper_energy_db"
/// values = [-30.0, -25.0, -20.0]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    pub schemes: Vec<Scheme>,
    #[serde(default)]
    pub generator: GenConfig,
    pub sweep: Sweep,
    /// Exhaustive search is skipped at points with more assignments than this.
    #[serde(default = "default_cap")]
    pub enumeration_cap: u64,
}

fn default_realizations() -> usize {
    50
}

fn default_cap() -> u64 {
    DEFAULT_ENUMERATION_CAP as u64
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::Config("at least one realization is required".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("no schemes selected".into()));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::Config("sweep has no values".into()));
        }
        for &v in &self.sweep.values {
            if !v.is_finite() {
                return Err(Error::Config(format!("sweep value {v} is not finite")));
            }
            self.sweep.parameter.apply(&self.generator, v)?;
        }
        Ok(())
    }
}

/// One CSV row: a scheme at one sweep point, averaged over the feasible
/// realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub sweep_value: f64,
    pub scheme: Scheme,
    /// `None` when no realization was feasible.
    pub mean_latency_s: Option<f64>,
    /// Sample standard deviation; `None` with fewer than two feasible runs.
    pub std: Option<f64>,
    pub n_feasible: usize,
    /// Realizations attempted, including solver failures.
    pub n_total: usize,
}

/// A realization excluded because its solver failed or returned an
/// allocation that does not pass the feasibility check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub sweep_value: f64,
    pub realization: u64,
    pub scheme: Scheme,
    pub error: String,
}

/// A realization where some scheme beat exhaustive search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingViolation {
    pub sweep_value: f64,
    pub realization: u64,
    pub scheme: Scheme,
    pub latency_s: f64,
    pub exhaustive_latency_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<ExperimentRow>,
    pub failures: Vec<FailureRecord>,
    pub ordering_violations: Vec<OrderingViolation>,
    pub notes: Vec<String>,
}

type Outcome = std::result::Result<SchemeResult<f64>, String>;

fn run_realization(cfg: &GenConfig, schemes: &[Scheme], index: u64, cap: u128) -> Vec<Outcome> {
    let scenario = match gen_instance::<f64>(cfg, index) {
        Ok(s) => s,
        Err(e) => return schemes.iter().map(|_| Err(e.to_string())).collect(),
    };
    let opts = RunOptions { seed: cfg.seed ^ RANDOM_STREAM ^ index, enumeration_cap: cap };
    schemes
        .iter()
        .map(|&scheme| {
            let r = run_scheme(scheme, &scenario, &opts).map_err(|e| e.to_string())?;
            if r.is_feasible() {
                let rep = check_result(&scenario, &r);
                let bad = rep.failures().next().map(|c| format!("output violates {} by {:e}", c.name, c.residual));
                if let Some(msg) = bad {
                    return Err(msg);
                }
            }
            Ok(r)
        })
        .collect()
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (Some(mean), None);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var.sqrt()))
}

/// Runs every scheme on every realization at every sweep point.
/// Realizations run in parallel; results are gathered in index order, so
/// the report depends only on the configuration.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let mut report = ExperimentReport {
        config: config.clone(),
        rows: Vec::new(),
        failures: Vec::new(),
        ordering_violations: Vec::new(),
        notes: Vec::new(),
    };
    let cap = config.enumeration_cap as u128;
    for &value in &config.sweep.values {
        let cfg = config.sweep.parameter.apply(&config.generator, value)?;
        let count = surjection_count(cfg.helpers, cfg.tasks);
        let schemes: Vec<Scheme> = config
            .schemes
            .iter()
            .copied()
            .filter(|&s| {
                let keep = s != Scheme::Exhaustive || count <= cap;
                if !keep {
                    let note = format!("exhaustive search skipped at {value}: {count} assignments exceed the cap of {cap}");
                    warn!("{note}");
                    report.notes.push(note);
                }
                keep
            })
            .collect();
        info!("sweep point {value}: {} realizations, {} schemes", config.realizations, schemes.len());
        let outcomes: Vec<Vec<Outcome>> = (0..config.realizations as u64)
            .into_par_iter()
            .map(|i| run_realization(&cfg, &schemes, i, cap))
            .collect();

        for (pos, &scheme) in schemes.iter().enumerate() {
            let mut latencies = Vec::new();
            for (i, per) in outcomes.iter().enumerate() {
                match &per[pos] {
                    Ok(r) if r.is_feasible() => latencies.push(r.latency_s),
                    Ok(_) => {}
                    Err(e) => {
                        warn!("{scheme} failed on realization {i} at {value}: {e}");
                        report.failures.push(FailureRecord {
                            sweep_value: value,
                            realization: i as u64,
                            scheme,
                            error: e.clone(),
                        });
                    }
                }
            }
            let (mean, std) = mean_std(&latencies);
            report.rows.push(ExperimentRow {
                sweep_value: value,
                scheme,
                mean_latency_s: mean,
                std,
                n_feasible: latencies.len(),
                n_total: config.realizations,
            });
        }

        if let Some(ex) = schemes.iter().position(|&s| s == Scheme::Exhaustive) {
            for (i, per) in outcomes.iter().enumerate() {
                let Ok(best) = &per[ex] else { continue };
                if !best.is_feasible() {
                    continue;
                }
                for (pos, &scheme) in schemes.iter().enumerate() {
                    // Local execution leaves helpers idle, outside the searched set.
                    if scheme == Scheme::Local || scheme == Scheme::Exhaustive {
                        continue;
                    }
                    if let Ok(r) = &per[pos] {
                        if r.is_feasible() && best.latency_s > r.latency_s * (1.0 + ORDERING_TOL) {
                            report.ordering_violations.push(OrderingViolation {
                                sweep_value: value,
                                realization: i as u64,
                                scheme,
                                latency_s: r.latency_s,
                                exhaustive_latency_s: best.latency_s,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(report)
}

fn num(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

impl ExperimentReport {
    /// CSV body with a header row. Missing statistics are empty fields.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).map_err(std::io::Error::from)?;
        for r in &self.rows {
            w.write_record([
                format!("{}", r.sweep_value),
                r.scheme.to_string(),
                num(r.mean_latency_s),
                num(r.std),
                r.n_feasible.to_string(),
                r.n_total.to_string(),
            ])
            .map_err(std::io::Error::from)?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("CSV is UTF-8"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes the CSV to `path` and the full report next to it with a
    /// `.json` extension. Returns the sidecar path.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<std::path::PathBuf> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()?)?;
        let sidecar = path.with_extension("json");
        let mut json = self.to_json();
        json.push('\n');
        fs::write(&sidecar, json)?;
        Ok(sidecar)
    }

    /// Human-readable table of the rows.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>14}  {:<10} {:>14} {:>12} {:>9}", "value", "scheme", "mean (ms)", "std (ms)", "feasible");
        for r in &self.rows {
            let ms = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:.4}", 1e3 * x));
            let _ = writeln!(
                s,
                "{:>14}  {:<10} {:>14} {:>12} {:>5}/{}",
                r.sweep_value,
                r.scheme,
                ms(r.mean_latency_s),
                ms(r.std),
                r.n_feasible,
                r.n_total
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig::from_toml(
            r#"
            realizations = 3
            schemes = ["local", "random", "exhaustive"]
            [generator]
            helpers = 1
            tasks = 3
            seed = 5
            [sweep]
            parameter = "task_cycles"
            values = [1e6, 2e6]
            "#,
        )
        .unwrap()
    }

    #[test]
    fn config_errors_are_reported() {
        assert!(ExperimentConfig::from_toml("schemes = []\n[sweep]\nparameter = \"task_bits\"\nvalues = [1.0]").is_err());
        assert!(ExperimentConfig::from_toml("schemes = [\"magic\"]\n[sweep]\nparameter = \"task_bits\"\nvalues = [1.0]").is_err());
        let bad_count = "schemes = [\"local\"]\n[sweep]\nparameter = \"task_count\"\nvalues = [2.5]";
        assert!(ExperimentConfig::from_toml(bad_count).is_err());
        let unknown = "schemes = [\"local\"]\nfoo = 1\n[sweep]\nparameter = \"task_bits\"\nvalues = [1.0]";
        assert!(ExperimentConfig::from_toml(unknown).is_err());
    }

    #[test]
    fn rows_and_csv_layout() {
        let rep = run_experiment(&small()).unwrap();
        assert_eq!(rep.rows.len(), 6);
        assert!(rep.failures.is_empty());
        assert!(rep.ordering_violations.is_empty());
        let csv = rep.to_csv().unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "sweep_value,scheme,mean_latency_s,std,n_feasible,n_total");
        assert!(lines.next().unwrap().starts_with("1000000,local,"));
        // Local latency with identical tasks does not depend on the channels.
        assert!(rep.rows[0].std.unwrap() <= 1e-12 * rep.rows[0].mean_latency_s.unwrap());
    }

    #[test]
    fn exhaustive_is_skipped_above_the_cap() {
        let mut cfg = small();
        cfg.enumeration_cap = 1;
        let rep = run_experiment(&cfg).unwrap();
        assert_eq!(rep.rows.len(), 4);
        assert_eq!(rep.notes.len(), 2);
    }
}

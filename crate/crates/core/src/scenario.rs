//! Random instance generation (distance-based pathloss with Rayleigh fading,
//! uniform task sizes) and the versioned JSON scenario format.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Helper, LocalDevice, Scenario, Task};
use crate::scalar::Real;

/// Version written to and required from `.scn.json` files.
pub const SCHEMA_VERSION: u64 = 1;

/// Generator settings. Energies are in dB relative to 1 J, the noise density
/// in dBm/Hz, distances in km; everything else is SI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub helpers: usize,
    pub tasks: usize,
    pub distance_km: [f64; 2],
    pub pathloss_intercept_db: f64,
    pub pathloss_slope_db: f64,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub input_bits: [f64; 2],
    pub output_bits: [f64; 2],
    pub cycles: [f64; 2],
    pub local_energy_db: f64,
    pub helper_energy_db: f64,
    pub local_max_frequency_hz: f64,
    pub helper_max_frequency_hz: [f64; 2],
    pub capacitance: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            helpers: 2,
            tasks: 5,
            distance_km: [0.0, 0.5],
            pathloss_intercept_db: 128.1,
            pathloss_slope_db: 37.6,
            bandwidth_hz: 312_500.0,
            noise_psd_dbm_per_hz: -169.0,
            input_bits: [0.0, 1e4],
            output_bits: [0.0, 1e4],
            cycles: [0.0, 5e6],
            local_energy_db: -30.0,
            helper_energy_db: -20.0,
            local_max_frequency_hz: 0.9e9,
            helper_max_frequency_hz: [1.5e9, 2e9],
            capacitance: 1e-28,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.helpers == 0 {
            return bad("at least one helper is required".into());
        }
        if self.tasks < self.helpers + 1 {
            return bad(format!("{} tasks cannot occupy {} devices", self.tasks, self.helpers + 1));
        }
        let ranges = [
            ("distance_km", self.distance_km),
            ("input_bits", self.input_bits),
            ("output_bits", self.output_bits),
            ("cycles", self.cycles),
            ("helper_max_frequency_hz", self.helper_max_frequency_hz),
        ];
        for (name, [lo, hi]) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
                return bad(format!("{name} must be a range [lo, hi] with 0 <= lo <= hi"));
            }
        }
        if self.helper_max_frequency_hz[0] <= 0.0 {
            return bad("helper frequencies must be positive".into());
        }
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("local_max_frequency_hz", self.local_max_frequency_hz),
            ("capacitance", self.capacitance),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive"));
            }
        }
        for (name, v) in [
            ("pathloss_intercept_db", self.pathloss_intercept_db),
            ("pathloss_slope_db", self.pathloss_slope_db),
            ("noise_psd_dbm_per_hz", self.noise_psd_dbm_per_hz),
            ("local_energy_db", self.local_energy_db),
            ("helper_energy_db", self.helper_energy_db),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        Ok(())
    }

    /// Receiver noise power `PSD * B` in watts.
    pub fn noise_power_w(&self) -> f64 {
        db_to_linear(self.noise_psd_dbm_per_hz + 10.0 * self.bandwidth_hz.log10() - 30.0)
    }

    /// Pathloss in dB at `distance_km`, clamped to at least 1 m.
    pub fn pathloss_db(&self, distance_km: f64) -> f64 {
        self.pathloss_intercept_db + self.pathloss_slope_db * distance_km.max(1e-3).log10()
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// `|xi|^2` for a zero-mean unit-variance circularly symmetric complex Gaussian.
fn rayleigh_power<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    0.5 * (re * re + im * im)
}

/// Draws one instance. Uplink and downlink fades are independent; the two
/// directions share the helper's distance.
pub fn gen_scenario<T: Real, R: Rng + ?Sized>(cfg: &GenConfig, rng: &mut R) -> Result<Scenario<T>> {
    cfg.validate()?;
    let noise = cfg.noise_power_w();
    let mut helpers = Vec::with_capacity(cfg.helpers);
    for _ in 0..cfg.helpers {
        let d = uniform(rng, cfg.distance_km);
        let path = db_to_linear(-cfg.pathloss_db(d));
        let up = path * rayleigh_power(rng) / noise;
        let down = path * rayleigh_power(rng) / noise;
        let fmax = uniform(rng, cfg.helper_max_frequency_hz);
        helpers.push(Helper {
            uplink_gain_per_w: T::lit(up),
            downlink_gain_per_w: T::lit(down),
            energy_budget_j: T::lit(db_to_linear(cfg.helper_energy_db)),
            max_frequency_hz: T::lit(fmax),
            capacitance: T::lit(cfg.capacitance),
        });
    }
    let tasks = (0..cfg.tasks)
        .map(|_| Task {
            input_bits: T::lit(uniform(rng, cfg.input_bits)),
            output_bits: T::lit(uniform(rng, cfg.output_bits)),
            cycles: T::lit(uniform(rng, cfg.cycles)),
        })
        .collect();
    let local = LocalDevice {
        energy_budget_j: T::lit(db_to_linear(cfg.local_energy_db)),
        max_frequency_hz: T::lit(cfg.local_max_frequency_hz),
        capacitance: T::lit(cfg.capacitance),
    };
    Scenario::new(T::lit(cfg.bandwidth_hz), local, helpers, tasks)
}

/// The generator used for realization `index` of a run seeded with `seed`.
/// Different sweep points reuse the same per-index streams.
pub fn instance_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ index)
}

/// Realization `index` of the configured run.
pub fn gen_instance<T: Real>(cfg: &GenConfig, index: u64) -> Result<Scenario<T>> {
    gen_scenario(cfg, &mut instance_rng(cfg.seed, index))
}

/// On-disk layout of a `.scn.json` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u64,
    /// Seed and generator settings, when the scenario was generated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GenConfig>,
    pub scenario: Scenario<f64>,
}

impl ScenarioFile {
    pub fn new(scenario: Scenario<f64>) -> Self {
        Self { schema_version: SCHEMA_VERSION, seed: None, generator: None, scenario }
    }

    pub fn generated(scenario: Scenario<f64>, cfg: &GenConfig) -> Self {
        Self { schema_version: SCHEMA_VERSION, seed: Some(cfg.seed), generator: Some(cfg.clone()), scenario }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Parses and validates a file body; `origin` names it in errors.
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let parse_err = |e: serde_json::Error| Error::Parse {
            path: origin.to_string(),
            msg: format!("line {}, column {}: {e}", e.line(), e.column()),
        };
        let value: serde_json::Value = serde_json::from_str(text).map_err(parse_err)?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(SCHEMA_VERSION) => {}
            Some(found) => return Err(Error::SchemaVersion { found, expected: SCHEMA_VERSION }),
            None => {
                return Err(Error::Parse { path: origin.to_string(), msg: "missing integer field `schema_version`".into() })
            }
        }
        let file: ScenarioFile = serde_json::from_str(text).map_err(parse_err)?;
        file.scenario.validate()?;
        Ok(file)
    }
}

pub fn save_scenario(path: impl AsRef<Path>, file: &ScenarioFile) -> Result<()> {
    let mut text = file.to_json();
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    ScenarioFile::from_json(&text, &path.display().to_string())
}

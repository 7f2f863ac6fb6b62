//! Experiment configuration: a flat-sectioned TOML file with every knob of
//! the pipeline. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{self, StateSpaceSystem};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub trajectory: TrajectoryConfig,
    #[serde(default)]
    pub recovery: RecoveryConfig,
    #[serde(default)]
    pub rom: RomConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// `random`, `heat`, `penzl`, or `file`.
    pub kind: String,
    /// Order for `random` and `heat`.
    #[serde(default = "default_order")]
    pub order: usize,
    /// Time step for `heat` (default 1e-2) and `penzl` (default 1e-4).
    #[serde(default)]
    pub dt: Option<f64>,
    /// Seed for `random`.
    #[serde(default)]
    pub seed: u64,
    /// System file for `file`.
    #[serde(default)]
    pub path: Option<String>,
}

fn default_order() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    /// Number of time steps `T`; the trajectory has `T + 1` samples.
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Input signal kind; `gaussian` (i.i.d. standard normal) is the only
    /// built-in.
    #[serde(default = "default_input")]
    pub input: String,
    #[serde(default = "default_input_seed")]
    pub input_seed: u64,
}

fn default_steps() -> usize {
    1000
}

fn default_input() -> String {
    "gaussian".into()
}

fn default_input_seed() -> u64 {
    1
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            steps: default_steps(),
            input: default_input(),
            input_seed: default_input_seed(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoveryConfig {
    #[serde(default = "default_freq_count")]
    pub freq_count: usize,
    #[serde(default = "default_omega_min")]
    pub omega_min: f64,
    #[serde(default = "default_omega_max")]
    pub omega_max: f64,
    /// `log` or `linear`, endpoint exclusive.
    #[serde(default = "default_spacing")]
    pub spacing: String,
    /// Working depth; 0 means estimate from the data and adapt.
    #[serde(default)]
    pub n_used: usize,
    #[serde(default = "default_t_factor")]
    pub t_factor: usize,
    #[serde(default = "default_k_windows")]
    pub k_windows: usize,
    #[serde(default = "default_w_keep")]
    pub w_keep: usize,
    #[serde(default = "default_tau")]
    pub tau1: f64,
    #[serde(default = "default_tau")]
    pub tau2: f64,
    #[serde(default = "default_tau")]
    pub rank_tol: f64,
    /// Indicator target for depth adaptation (auto mode).
    #[serde(default = "default_s_target")]
    pub s_target: f64,
    /// Depth cap for adaptation; 0 means `steps / t_factor`.
    #[serde(default)]
    pub n_max: usize,
    #[serde(default = "default_true")]
    pub derivatives: bool,
}

fn default_freq_count() -> usize {
    100
}

fn default_omega_min() -> f64 {
    1e-3
}

fn default_omega_max() -> f64 {
    std::f64::consts::PI
}

fn default_spacing() -> String {
    "log".into()
}

fn default_t_factor() -> usize {
    3
}

fn default_k_windows() -> usize {
    20
}

fn default_w_keep() -> usize {
    10
}

fn default_tau() -> f64 {
    1e-10
}

fn default_s_target() -> f64 {
    1e-2
}

fn default_true() -> bool {
    true
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RomConfig {
    /// `loewner`, `hermite-loewner`, or `vector-fitting`.
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_rom_order")]
    pub order: usize,
    #[serde(default = "default_vf_iters")]
    pub vf_iters: usize,
    /// Exponent applied to the per-point indicator to form vector-fitting
    /// weights; 0 disables weighting.
    #[serde(default)]
    pub vf_weight_exponent: f64,
}

fn default_method() -> String {
    "loewner".into()
}

fn default_rom_order() -> usize {
    10
}

fn default_vf_iters() -> usize {
    20
}

impl Default for RomConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
}

fn default_dir() -> String {
    "out".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Overrides both the system seed and the input seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.system.seed = seed;
        self.trajectory.input_seed = seed.wrapping_add(1000);
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.system.kind.as_str() {
            "random" | "heat" | "penzl" | "file" => {}
            other => {
                return Err(Error::Config(format!(
                    "unknown system kind '{other}' (expected random|heat|penzl|file)"
                )))
            }
        }
        if self.system.kind == "file" && self.system.path.is_none() {
            return Err(Error::Config("system kind 'file' needs a path".into()));
        }
        if self.trajectory.input != "gaussian" {
            return Err(Error::Config(format!(
                "unknown input kind '{}' (expected gaussian)",
                self.trajectory.input
            )));
        }
        if self.trajectory.steps < 4 {
            return Err(Error::Config("trajectory needs at least 4 steps".into()));
        }
        match self.recovery.spacing.as_str() {
            "log" | "linear" => {}
            other => {
                return Err(Error::Config(format!(
                    "unknown spacing '{other}' (expected log|linear)"
                )))
            }
        }
        if self.recovery.spacing == "log" && self.recovery.omega_min <= 0.0 {
            return Err(Error::Config(
                "log spacing needs a positive omega_min".into(),
            ));
        }
        if self.recovery.omega_min >= self.recovery.omega_max {
            return Err(Error::Config("omega_min must be below omega_max".into()));
        }
        if self.recovery.freq_count == 0 {
            return Err(Error::Config("freq_count must be positive".into()));
        }
        if self.recovery.t_factor < 1 || self.recovery.w_keep < 1 {
            return Err(Error::Config(
                "t_factor and w_keep must be at least 1".into(),
            ));
        }
        if self.recovery.k_windows < self.recovery.w_keep {
            return Err(Error::Config("k_windows must be at least w_keep".into()));
        }
        if self.recovery.tau1 <= 0.0 || self.recovery.tau2 <= 0.0 || self.recovery.rank_tol <= 0.0
        {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        match self.rom.method.as_str() {
            "loewner" | "hermite-loewner" | "vector-fitting" => {}
            other => {
                return Err(Error::Config(format!(
                    "unknown rom method '{other}' (expected loewner|hermite-loewner|vector-fitting)"
                )))
            }
        }
        if self.rom.order < 1 {
            return Err(Error::Config("rom order must be at least 1".into()));
        }
        Ok(())
    }

    /// Builds (or loads) the configured system.
    pub fn make_system(&self) -> Result<StateSpaceSystem> {
        match self.system.kind.as_str() {
            "random" => lti::random_stable_system(self.system.order, self.system.seed),
            "heat" => lti::heat_rod_system(self.system.order, self.system.dt.unwrap_or(1e-2)),
            "penzl" => lti::penzl_system(self.system.dt.unwrap_or(1e-4)),
            "file" => crate::io::read_state_space_json(Path::new(
                self.system.path.as_deref().expect("validated"),
            )),
            _ => unreachable!("validated"),
        }
    }

    /// Evaluation angles per the recovery section, endpoint exclusive.
    pub fn frequencies(&self) -> Vec<f64> {
        let r = &self.recovery;
        spaced(r.omega_min, r.omega_max, r.freq_count, &r.spacing)
    }
}

/// `count` angles in `[lo, hi)`, log or linear spacing.
pub fn spaced(lo: f64, hi: f64, count: usize, spacing: &str) -> Vec<f64> {
    (0..count)
        .map(|i| {
            let f = i as f64 / count as f64;
            if spacing == "log" {
                lo * (hi / lo).powf(f)
            } else {
                lo + (hi - lo) * f
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml_str("[system]\nkind = \"random\"\n").unwrap();
        assert_eq!(cfg.system.order, 100);
        assert_eq!(cfg.trajectory.steps, 1000);
        assert_eq!(cfg.recovery.k_windows, 20);
        assert_eq!(cfg.recovery.w_keep, 10);
        assert_eq!(cfg.recovery.tau1, 1e-10);
        assert_eq!(cfg.rom.method, "loewner");
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = ExperimentConfig::from_toml_str(
            "[system]\nkind = \"random\"\nbogus_knob = 3\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(ExperimentConfig::from_toml_str("[system]\nkind = \"nope\"\n").is_err());
        assert!(ExperimentConfig::from_toml_str(
            "[system]\nkind = \"random\"\n[recovery]\nspacing = \"cubic\"\n"
        )
        .is_err());
        assert!(ExperimentConfig::from_toml_str(
            "[system]\nkind = \"file\"\n"
        )
        .is_err());
    }

    #[test]
    fn frequency_grid_is_endpoint_exclusive() {
        let cfg = ExperimentConfig::from_toml_str(
            "[system]\nkind = \"random\"\n[recovery]\nfreq_count = 10\nomega_min = 1e-3\n",
        )
        .unwrap();
        let f = cfg.frequencies();
        assert_eq!(f.len(), 10);
        assert_eq!(f[0], 1e-3);
        assert!(*f.last().unwrap() < std::f64::consts::PI);
        assert!(f.windows(2).all(|w| w[0] < w[1]));
    }
}

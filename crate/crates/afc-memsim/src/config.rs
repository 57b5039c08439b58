//! Experiment configuration: a versioned TOML schema with shipped presets.
//!
//! All randomness in a run flows from the single `seed` here; derived
//! streams (atom sampling, counting, bootstrap) use fixed labels via
//! [`crate::util::derive_seed`], so a config plus seed pins every output
//! byte.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::comb::{CombSpec, ToothShape};
use crate::grid::SpectralGrid;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("unknown preset `{0}` (available: paper_200ns, paper_500ns, ideal)")]
    UnknownPreset(String),
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombConfig {
    pub tooth_spacing_mhz: f64,
    pub tooth_fwhm_mhz: f64,
    pub peak_optical_depth: f64,
    pub background_depth: f64,
    pub bandwidth_mhz: f64,
    pub tooth_shape: ToothShape,
}

impl CombConfig {
    pub fn to_spec(&self) -> CombSpec {
        CombSpec {
            tooth_spacing_mhz: self.tooth_spacing_mhz,
            tooth_fwhm_mhz: self.tooth_fwhm_mhz,
            peak_optical_depth: self.peak_optical_depth,
            background_depth: self.background_depth,
            bandwidth_mhz: self.bandwidth_mhz,
            tooth_shape: self.tooth_shape,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub n_points: usize,
    pub span_mhz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Intensity FWHM of the probe pulse, ns.
    pub fwhm_ns: f64,
    /// Detection gate width around each echo, ns.
    pub gate_ns: f64,
    /// Number of echo orders to gate.
    pub n_echoes: usize,
    /// Detector jitter folded into reported traces (0 disables), ns.
    #[serde(default)]
    pub detector_jitter_ns: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub crystal1_length_mm: f64,
    pub crystal2_length_mm: f64,
    /// Birefringent phase of V relative to H per crystal millimeter, rad.
    pub birefringence_rad_per_mm: f64,
    /// Pump-balance knob: optical depth of crystal 2 relative to crystal 1.
    pub crystal2_depth_scale: f64,
    /// Residual V absorption relative to the H transition.
    pub v_depth_ratio: f64,
    /// Compensation phase plate, rad; used when auto_null_phase is false.
    pub phase_plate_rad: f64,
    /// Solve for the phase plate angle that best restores the identity.
    pub auto_null_phase: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub mean_photon_number: f64,
    pub detection_efficiency: f64,
    pub path_transmission: f64,
    /// Dark events per second per detector; the per-gate probability is
    /// this rate times the echo gate width.
    pub dark_counts_per_sec: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingConfig {
    pub prep_repeats: u32,
    pub sweep_mhz: f64,
    pub sweep_us: f64,
    pub wait_ms: f64,
    pub probe_pulses: u32,
    pub probe_rate_mhz: f64,
    pub cycle_rate_hz: f64,
}

impl TimingConfig {
    /// Probe trials per wall-clock second.
    pub fn trials_per_second(&self) -> f64 {
        self.probe_pulses as f64 * self.cycle_rate_hz
    }

    /// Total duration of one prep + wait + probe cycle, us.
    pub fn cycle_duration_us(&self) -> f64 {
        self.prep_repeats as f64 * self.sweep_us
            + self.wait_ms * 1000.0
            + self.probe_pulses as f64 / self.probe_rate_mhz
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    /// Integration time per tomography setting, seconds.
    pub integration_s: f64,
    pub n_bootstrap: usize,
    pub mle_tol: f64,
    pub mle_max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyConfig {
    pub storage_times_ns: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub n_atoms: usize,
}

/// Complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Schema version; currently 1.
    pub version: u32,
    pub seed: u64,
    pub comb: CombConfig,
    pub grid: GridConfig,
    pub probe: ProbeConfig,
    pub chain: ChainConfig,
    pub noise: NoiseConfig,
    pub timing: TimingConfig,
    pub acquisition: AcquisitionConfig,
    pub efficiency: EfficiencyConfig,
    pub oracle: OracleConfig,
}

pub const PRESET_PAPER_200NS: &str = include_str!("../presets/paper_200ns.toml");
pub const PRESET_PAPER_500NS: &str = include_str!("../presets/paper_500ns.toml");
pub const PRESET_IDEAL: &str = include_str!("../presets/ideal.toml");

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Load from a filesystem path, or fall back to a built-in preset name
    /// (`paper_200ns`, `paper_500ns`, `ideal`).
    pub fn load(path_or_preset: &str) -> Result<Self, ConfigError> {
        let p = std::path::Path::new(path_or_preset);
        if p.exists() {
            let text = std::fs::read_to_string(p)
                .map_err(|e| ConfigError::Read { path: path_or_preset.into(), source: e })?;
            return Self::from_toml(&text);
        }
        match path_or_preset {
            "paper_200ns" => Self::from_toml(PRESET_PAPER_200NS),
            "paper_500ns" => Self::from_toml(PRESET_PAPER_500NS),
            "ideal" => Self::from_toml(PRESET_IDEAL),
            other => Err(ConfigError::UnknownPreset(other.into())),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != 1 {
            return Err(invalid("version", format!("unsupported schema version {}", self.version)));
        }
        let c = &self.comb;
        if !(c.tooth_spacing_mhz > 0.0) {
            return Err(invalid("comb.tooth_spacing_mhz", "must be > 0"));
        }
        if !(c.tooth_fwhm_mhz > 0.0 && c.tooth_fwhm_mhz < c.tooth_spacing_mhz) {
            return Err(invalid("comb.tooth_fwhm_mhz", "must be in (0, tooth_spacing_mhz)"));
        }
        if c.peak_optical_depth < 0.0 {
            return Err(invalid("comb.peak_optical_depth", "must be >= 0"));
        }
        if c.background_depth < 0.0 {
            return Err(invalid("comb.background_depth", "must be >= 0"));
        }
        if c.bandwidth_mhz < 2.0 * c.tooth_spacing_mhz {
            return Err(invalid("comb.bandwidth_mhz", "must be >= 2 * tooth_spacing_mhz"));
        }
        let grid = SpectralGrid::new(self.grid.n_points, self.grid.span_mhz)
            .map_err(|e| invalid("grid", e.to_string()))?;
        self.comb
            .to_spec()
            .validate_grid(&grid)
            .map_err(|e| invalid("grid", e.to_string()))?;
        if !(self.probe.fwhm_ns > 0.0) {
            return Err(invalid("probe.fwhm_ns", "must be > 0"));
        }
        if !(self.probe.gate_ns > 0.0) {
            return Err(invalid("probe.gate_ns", "must be > 0"));
        }
        if self.probe.gate_ns >= 1000.0 / c.tooth_spacing_mhz {
            return Err(invalid("probe.gate_ns", "gates overlap: must be < 1000/tooth_spacing_mhz ns"));
        }
        if self.probe.n_echoes == 0 {
            return Err(invalid("probe.n_echoes", "must be >= 1"));
        }
        if self.probe.detector_jitter_ns < 0.0 {
            return Err(invalid("probe.detector_jitter_ns", "must be >= 0"));
        }
        let ch = &self.chain;
        if !(ch.crystal1_length_mm > 0.0) {
            return Err(invalid("chain.crystal1_length_mm", "must be > 0"));
        }
        if !(ch.crystal2_length_mm > 0.0) {
            return Err(invalid("chain.crystal2_length_mm", "must be > 0"));
        }
        if !(ch.crystal2_depth_scale > 0.0) {
            return Err(invalid("chain.crystal2_depth_scale", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&ch.v_depth_ratio) {
            return Err(invalid("chain.v_depth_ratio", "must be in [0, 1]"));
        }
        let n = &self.noise;
        if !(n.mean_photon_number > 0.0) {
            return Err(invalid("noise.mean_photon_number", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&n.detection_efficiency) {
            return Err(invalid("noise.detection_efficiency", "must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&n.path_transmission) {
            return Err(invalid("noise.path_transmission", "must be in [0, 1]"));
        }
        if n.dark_counts_per_sec < 0.0 {
            return Err(invalid("noise.dark_counts_per_sec", "must be >= 0"));
        }
        let t = &self.timing;
        if !(t.probe_rate_mhz > 0.0) {
            return Err(invalid("timing.probe_rate_mhz", "must be > 0"));
        }
        if !(t.cycle_rate_hz > 0.0) {
            return Err(invalid("timing.cycle_rate_hz", "must be > 0"));
        }
        let cycle_budget_us = 1e6 / t.cycle_rate_hz;
        if t.cycle_duration_us() > cycle_budget_us {
            return Err(invalid(
                "timing",
                format!(
                    "prep + wait + probe = {:.1} us exceeds the {:.1} us cycle at {} Hz",
                    t.cycle_duration_us(),
                    cycle_budget_us,
                    t.cycle_rate_hz
                ),
            ));
        }
        if !(self.acquisition.integration_s > 0.0) {
            return Err(invalid("acquisition.integration_s", "must be > 0"));
        }
        if self.acquisition.n_bootstrap < 2 {
            return Err(invalid("acquisition.n_bootstrap", "must be >= 2"));
        }
        if !(self.acquisition.mle_tol > 0.0) {
            return Err(invalid("acquisition.mle_tol", "must be > 0"));
        }
        if self.acquisition.mle_max_iter == 0 {
            return Err(invalid("acquisition.mle_max_iter", "must be >= 1"));
        }
        if self.efficiency.storage_times_ns.iter().any(|&t| t <= 0.0) {
            return Err(invalid("efficiency.storage_times_ns", "times must be > 0"));
        }
        if self.oracle.n_atoms == 0 {
            return Err(invalid("oracle.n_atoms", "must be >= 1"));
        }
        Ok(())
    }

    pub fn spectral_grid(&self) -> SpectralGrid {
        SpectralGrid::new(self.grid.n_points, self.grid.span_mhz).expect("validated grid")
    }

    /// Tomography trials per setting implied by the timing model and the
    /// integration time.
    pub fn trials_per_setting(&self) -> u64 {
        (self.timing.trials_per_second() * self.acquisition.integration_s).round() as u64
    }

    /// Dark probability per detector per echo gate.
    pub fn dark_prob_per_gate(&self) -> f64 {
        self.noise.dark_counts_per_sec * self.probe.gate_ns * 1e-9
    }

    /// Short hex digest of the canonical serialized config.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_validate() {
        for name in ["paper_200ns", "paper_500ns", "ideal"] {
            let cfg = ExperimentConfig::load(name).unwrap();
            assert_eq!(cfg.version, 1, "{name}");
        }
    }

    #[test]
    fn preset_round_trips_losslessly() {
        let cfg = ExperimentConfig::load("paper_200ns").unwrap();
        let text = cfg.to_toml();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn unknown_preset_is_an_error() {
        assert!(matches!(
            ExperimentConfig::load("paper200ns_typo"),
            Err(ConfigError::UnknownPreset(_))
        ));
    }

    #[test]
    fn validation_names_the_field() {
        let mut cfg = ExperimentConfig::load("paper_200ns").unwrap();
        cfg.comb.tooth_fwhm_mhz = 99.0;
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("comb.tooth_fwhm_mhz"), "{err}");
    }

    #[test]
    fn timing_bookkeeping_matches_paper_defaults() {
        let cfg = ExperimentConfig::load("paper_200ns").unwrap();
        assert_eq!(cfg.timing.trials_per_second(), 64_000.0);
        // 100 x 100 us prep + 1.2 ms wait + 1.6 ms probe fits the 25 ms cycle.
        assert!(cfg.timing.cycle_duration_us() <= 25_000.0);
    }

    #[test]
    fn overlong_cycle_rejected() {
        let mut cfg = ExperimentConfig::load("paper_200ns").unwrap();
        cfg.timing.cycle_rate_hz = 200.0; // 5 ms budget < 12.8 ms cycle
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("timing"), "{err}");
    }
}

//! Experiment orchestration: compose the comb, polarization, and
//! tomography machinery into the three experiments, and emit reproducible
//! reports.
//!
//! Seed discipline: every experiment derives its random streams from the
//! config seed with fixed labels (atom sampling, counting, bootstrap), so a
//! given config and seed reproduce every table byte for byte.

use serde::Serialize;
use thiserror::Error;

use crate::comb::{
    analytic_efficiency, extract_echoes, propagate_pulse, CombError, CombSpec, EchoReport,
    PulseWaveform, TransferFunction,
};
use crate::config::{ConfigError, ExperimentConfig};
use crate::ensemble::{oracle_vs_transfer, EnsembleError, OracleComparison};
use crate::polar::{DeviceChain, JonesMatrix, MemoryElement};
use crate::tomo::{
    average_fidelity, bootstrap_fidelity, channel_from_jones, inversion_consistency,
    linear_inversion_chi, mle_chi, process_fidelity, simulate_counts, ChiMatrix, NoiseModel,
    TomographyDataset, TomoError,
};
use crate::util::derive_seed;

pub const SEED_LABEL_ATOMS: u64 = 1;
pub const SEED_LABEL_COUNTS: u64 = 2;
pub const SEED_LABEL_BOOTSTRAP: u64 = 3;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Comb(#[from] CombError),
    #[error(transparent)]
    Tomo(#[from] TomoError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error("storage time {storage_time_ns} ns needs finesse > 1 at tooth width {tooth_fwhm_mhz} MHz (got {finesse:.3})")]
    FinesseTooLow { storage_time_ns: f64, tooth_fwhm_mhz: f64, finesse: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Envelope for every experiment report.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport<T: Serialize> {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub results: T,
}

impl<T: Serialize> RunReport<T> {
    fn new(experiment: &str, cfg: &ExperimentConfig, results: T) -> Self {
        Self {
            experiment: experiment.into(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION").into(),
            results,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EchoTraceResults {
    pub storage_time_ns: f64,
    pub eta1: f64,
    pub transmitted_fraction: f64,
    pub echoes: Vec<crate::comb::Echo>,
    pub trials_per_second: f64,
    /// Expected detected clicks per time bin per second of acquisition.
    pub trace: Vec<TracePoint>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TracePoint {
    pub time_ns: f64,
    pub counts_per_bin_per_s: f64,
}

/// Propagate the probe through the prepared comb and report the detected
/// time trace with transmitted pulse and echoes.
pub fn run_echo_trace(cfg: &ExperimentConfig) -> Result<RunReport<EchoTraceResults>, RunnerError> {
    cfg.validate()?;
    let (out, pulse, report) = propagate_probe(cfg, &cfg.comb.to_spec())?;
    let eta1 = report.echoes.first().map(|e| e.efficiency).unwrap_or(0.0);

    // Detected-rate trace, optionally smoothed by detector jitter.
    let scale = cfg.timing.trials_per_second()
        * cfg.noise.mean_photon_number
        * cfg.noise.detection_efficiency
        * cfg.noise.path_transmission
        / (pulse.energy() / pulse.dt_ns);
    let mut energies: Vec<f64> = out.envelope.iter().map(|e| e.norm_sqr()).collect();
    if cfg.probe.detector_jitter_ns > 0.0 {
        energies = gaussian_smooth(&energies, cfg.probe.detector_jitter_ns / out.dt_ns);
    }
    let storage = cfg.comb.to_spec().storage_time_ns();
    let t_lo = -200.0;
    let t_hi = (cfg.probe.n_echoes as f64 + 0.7) * storage;
    let trace = energies
        .iter()
        .enumerate()
        .filter_map(|(i, &p)| {
            let t = out.time_at(i);
            (t >= t_lo && t <= t_hi)
                .then_some(TracePoint { time_ns: t, counts_per_bin_per_s: scale * p })
        })
        .collect();

    Ok(RunReport::new(
        "echo",
        cfg,
        EchoTraceResults {
            storage_time_ns: storage,
            eta1,
            transmitted_fraction: report.transmitted_fraction,
            echoes: report.echoes,
            trials_per_second: cfg.timing.trials_per_second(),
            trace,
        },
    ))
}

fn propagate_probe(
    cfg: &ExperimentConfig,
    spec: &CombSpec,
) -> Result<(PulseWaveform, PulseWaveform, EchoReport), RunnerError> {
    let grid = cfg.spectral_grid();
    let tf = TransferFunction::from_spec(spec, &grid)?;
    let pulse = PulseWaveform::gaussian(&grid, -0.15 * grid.window_ns(), 0.0, cfg.probe.fwhm_ns);
    let out = propagate_pulse(&pulse, &tf)?;
    let report = extract_echoes(
        &out,
        0.0,
        pulse.energy(),
        spec.tooth_spacing_mhz,
        cfg.probe.n_echoes,
        cfg.probe.gate_ns,
    )?;
    Ok((out, pulse, report))
}

fn gaussian_smooth(x: &[f64], sigma_samples: f64) -> Vec<f64> {
    if sigma_samples <= 0.0 {
        return x.to_vec();
    }
    let half = (4.0 * sigma_samples).ceil() as i64;
    let kernel: Vec<f64> = (-half..=half)
        .map(|i| (-0.5 * (i as f64 / sigma_samples).powi(2)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let n = x.len() as i64;
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                let j = i + k as i64 - half;
                if j >= 0 && j < n {
                    acc += w * x[j as usize];
                }
            }
            acc / norm
        })
        .collect()
}

/// Build the device chain from the config: both crystals share the comb,
/// crystal 2 optionally rescaled in depth, each carrying its birefringent
/// phase from the crystal length.
pub fn build_chain(cfg: &ExperimentConfig) -> Result<DeviceChain, RunnerError> {
    let spec = cfg.comb.to_spec();
    let grid = cfg.spectral_grid();
    let ch = &cfg.chain;
    let crystal1 = MemoryElement::from_comb(
        &spec,
        &grid,
        cfg.probe.fwhm_ns,
        ch.v_depth_ratio,
        ch.crystal1_length_mm * ch.birefringence_rad_per_mm,
    )?;
    let spec2 = CombSpec {
        peak_optical_depth: spec.peak_optical_depth * ch.crystal2_depth_scale,
        ..spec
    };
    let crystal2 = MemoryElement::from_comb(
        &spec2,
        &grid,
        cfg.probe.fwhm_ns,
        ch.v_depth_ratio,
        ch.crystal2_length_mm * ch.birefringence_rad_per_mm,
    )?;
    Ok(DeviceChain {
        crystal1,
        crystal2,
        hwp3_deg: 45.0,
        phase_plate_rad: ch.phase_plate_rad,
        hwp4_deg: 45.0,
    })
}

/// Find the phase-plate angle that maximizes the echo channel's fidelity to
/// the identity: coarse scan plus golden-section refinement. Returns the
/// angle in (-pi, pi].
pub fn auto_null_phase_plate(chain: &DeviceChain) -> f64 {
    let objective = |theta: f64| -> f64 {
        DeviceChain { phase_plate_rad: theta, ..*chain }.echo_channel_matrix().fidelity_to_identity()
    };
    let n_scan = 720;
    let mut best = (0.0, f64::NEG_INFINITY);
    for i in 0..n_scan {
        let theta = -std::f64::consts::PI + (i as f64 + 0.5) * std::f64::consts::TAU / n_scan as f64;
        let f = objective(theta);
        if f > best.1 {
            best = (theta, f);
        }
    }
    // Golden-section refinement around the best scan cell.
    let width = std::f64::consts::TAU / n_scan as f64;
    let (mut lo, mut hi) = (best.0 - width, best.0 + width);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..64 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if objective(a) < objective(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    let theta = 0.5 * (lo + hi);
    // Snap to 0 when the optimum is numerically at the origin.
    let snapped = if theta.abs() < 1e-9 { 0.0 } else { theta };
    let wrapped = snapped.rem_euclid(std::f64::consts::TAU);
    if wrapped > std::f64::consts::PI {
        wrapped - std::f64::consts::TAU
    } else {
        wrapped
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QptResults {
    pub storage_time_ns: f64,
    pub eta1: f64,
    pub signal_probability: f64,
    pub noise_fraction: f64,
    pub trials_per_setting: u64,
    pub phase_plate_rad: f64,
    pub auto_nulled: bool,
    pub pure_channel_fidelity: f64,
    pub chi_model_real: [[f64; 4]; 4],
    pub chi_model_imag: [[f64; 4]; 4],
    pub chi_linear_real: [[f64; 4]; 4],
    pub chi_linear_imag: [[f64; 4]; 4],
    pub chi_real: [[f64; 4]; 4],
    pub chi_imag: [[f64; 4]; 4],
    pub f_p: f64,
    pub f_p_linear: f64,
    pub f_p_std: f64,
    pub f_avg: f64,
    pub bound_margin: f64,
    pub max_imag_chi: f64,
    pub inversion_consistency: f64,
    pub mle_converged: bool,
    pub mle_iterations: usize,
    pub total_clicks: u64,
}

/// Bundle of everything run_qpt produced, for callers that need the raw
/// dataset alongside the report.
pub struct QptRun {
    pub report: RunReport<QptResults>,
    pub dataset: TomographyDataset,
    pub chi_mle: ChiMatrix,
    pub chi_linear: ChiMatrix,
    pub echo_matrix: JonesMatrix,
}

/// Full quantum-process-tomography experiment on the configured chain.
/// `trials_override` replaces the config's trials per setting when given.
pub fn run_qpt(cfg: &ExperimentConfig, trials_override: Option<u64>) -> Result<QptRun, RunnerError> {
    cfg.validate()?;
    let spec = cfg.comb.to_spec();
    let (_, _, echo_report) = propagate_probe(cfg, &spec)?;
    let eta1 = echo_report.echoes.first().map(|e| e.efficiency).unwrap_or(0.0);

    let mut chain = build_chain(cfg)?;
    let auto_nulled = cfg.chain.auto_null_phase;
    if auto_nulled {
        chain.phase_plate_rad = auto_null_phase_plate(&chain);
    }
    let echo_matrix = chain.echo_channel_matrix();

    let noise = NoiseModel {
        mean_photon_number: cfg.noise.mean_photon_number,
        memory_efficiency: eta1,
        detection_efficiency: cfg.noise.detection_efficiency,
        path_transmission: cfg.noise.path_transmission,
        dark_prob_per_gate: cfg.dark_prob_per_gate(),
        gate_ns: cfg.probe.gate_ns,
    };
    let pure_noise = NoiseModel { dark_prob_per_gate: 0.0, ..noise };

    // The simulation truth is the pure channel of the echo-gate Jones map;
    // dark counts enter at the click level inside simulate_counts. The
    // model chi additionally folds the dark share in as white noise and is
    // what tomography should recover.
    let chi_pure = channel_from_jones(&echo_matrix, &pure_noise)?;
    let chi_model = channel_from_jones(&echo_matrix, &noise)?;

    let trials = trials_override.unwrap_or_else(|| cfg.trials_per_setting());
    let dataset = simulate_counts(&chi_pure, &noise, trials, derive_seed(cfg.seed, SEED_LABEL_COUNTS))?;

    let chi_linear = linear_inversion_chi(&dataset)?;
    let outcome = mle_chi(&dataset, cfg.acquisition.mle_tol, cfg.acquisition.mle_max_iter);
    let target = ChiMatrix::identity_process();
    let f_p = process_fidelity(&outcome.chi, &target)?;
    let f_p_linear = process_fidelity(&chi_linear, &target)?;
    let boot = bootstrap_fidelity(
        &dataset,
        cfg.acquisition.n_bootstrap,
        derive_seed(cfg.seed, SEED_LABEL_BOOTSTRAP),
        cfg.acquisition.mle_tol,
        cfg.acquisition.mle_max_iter,
    )?;
    let f_avg = average_fidelity(f_p);

    let (chi_model_real, chi_model_imag) = chi_model.tables();
    let (chi_linear_real, chi_linear_imag) = chi_linear.tables();
    let (chi_real, chi_imag) = outcome.chi.tables();
    let results = QptResults {
        storage_time_ns: spec.storage_time_ns(),
        eta1,
        signal_probability: noise.signal_probability(),
        noise_fraction: noise.noise_fraction(),
        trials_per_setting: trials,
        phase_plate_rad: chain.phase_plate_rad,
        auto_nulled,
        pure_channel_fidelity: echo_matrix.fidelity_to_identity(),
        chi_model_real,
        chi_model_imag,
        chi_linear_real,
        chi_linear_imag,
        chi_real,
        chi_imag,
        f_p,
        f_p_linear,
        f_p_std: boot.std,
        f_avg,
        bound_margin: f_avg - 2.0 / 3.0,
        max_imag_chi: outcome.chi.max_imag_entry(),
        inversion_consistency: inversion_consistency(&dataset, &chi_linear),
        mle_converged: outcome.converged,
        mle_iterations: outcome.iterations,
        total_clicks: dataset.cells.iter().map(|c| c.clicks).sum(),
    };
    Ok(QptRun {
        report: RunReport::new("qpt", cfg, results),
        dataset,
        chi_mle: outcome.chi,
        chi_linear,
        echo_matrix,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EfficiencyPoint {
    pub storage_time_ns: f64,
    pub tooth_spacing_mhz: f64,
    pub finesse: f64,
    pub eta1: f64,
    /// Closed-form gaussian estimate where applicable (finesse >= 2).
    pub eta_analytic: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EfficiencyResults {
    pub tooth_fwhm_mhz: f64,
    pub points: Vec<EfficiencyPoint>,
}

/// Efficiency versus storage time at fixed minimal tooth width: each
/// storage time t sets the comb spacing to 1000/t MHz, so the finesse
/// shrinks as t grows.
pub fn run_efficiency_curve(
    cfg: &ExperimentConfig,
    storage_times_ns: &[f64],
) -> Result<RunReport<EfficiencyResults>, RunnerError> {
    cfg.validate()?;
    let gamma = cfg.comb.tooth_fwhm_mhz;
    let mut points = Vec::with_capacity(storage_times_ns.len());
    for &t_ns in storage_times_ns {
        let spacing = 1000.0 / t_ns;
        let finesse = spacing / gamma;
        if finesse <= 1.0 {
            return Err(RunnerError::FinesseTooLow {
                storage_time_ns: t_ns,
                tooth_fwhm_mhz: gamma,
                finesse,
            });
        }
        let spec = CombSpec { tooth_spacing_mhz: spacing, ..cfg.comb.to_spec() };
        let (_, _, report) = propagate_probe(cfg, &spec)?;
        let eta1 = report.echoes.first().map(|e| e.efficiency).unwrap_or(0.0);
        let eta_analytic = analytic_efficiency(&spec).ok();
        points.push(EfficiencyPoint {
            storage_time_ns: t_ns,
            tooth_spacing_mhz: spacing,
            finesse,
            eta1,
            eta_analytic,
        });
    }
    Ok(RunReport::new(
        "efficiency",
        cfg,
        EfficiencyResults { tooth_fwhm_mhz: gamma, points },
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleResults {
    pub n_atoms: usize,
    pub comparison: OracleComparison,
}

/// Cross-validate the transfer-function engine against the discrete-atom
/// oracle on the configured comb.
pub fn run_oracle(cfg: &ExperimentConfig) -> Result<RunReport<OracleResults>, RunnerError> {
    cfg.validate()?;
    let comparison = oracle_vs_transfer(
        &cfg.comb.to_spec(),
        cfg.oracle.n_atoms,
        derive_seed(cfg.seed, SEED_LABEL_ATOMS),
    )?;
    Ok(RunReport::new("oracle", cfg, OracleResults { n_atoms: cfg.oracle.n_atoms, comparison }))
}

#[derive(Debug, Clone, Serialize)]
pub struct NullPhaseResults {
    pub phase_plate_rad: f64,
    pub fidelity_before: f64,
    pub fidelity_after: f64,
}

/// Solve for the compensation phase-plate angle on the configured chain.
pub fn run_null_phase(cfg: &ExperimentConfig) -> Result<RunReport<NullPhaseResults>, RunnerError> {
    cfg.validate()?;
    let chain = build_chain(cfg)?;
    let before = chain.echo_channel_matrix().fidelity_to_identity();
    let theta = auto_null_phase_plate(&chain);
    let nulled = DeviceChain { phase_plate_rad: theta, ..chain };
    let after = nulled.echo_channel_matrix().fidelity_to_identity();
    Ok(RunReport::new(
        "null-phase",
        cfg,
        NullPhaseResults { phase_plate_rad: theta, fidelity_before: before, fidelity_after: after },
    ))
}

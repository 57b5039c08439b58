//! Atomic-frequency-comb absorption spectra, causal transfer functions, and
//! pulse propagation.
//!
//! The absorber is described by a power-absorption exponent `alpha(f)`
//! (transmitted intensity `exp(-alpha)`). The complex amplitude response is
//! `t(f) = exp(-alpha/2 + i*phi)` where `phi` is the Hilbert-transform
//! partner of `alpha/2`, so the medium is causal and echo timing emerges
//! from the dispersion rather than being inserted by hand. A comb with
//! tooth spacing `Δ` MHz re-emits absorbed light at multiples of
//! `1000/Δ` ns after the transmitted pulse.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{fft_forward, fft_inverse, hilbert, GridError, SpectralGrid};

pub const LN2: f64 = std::f64::consts::LN_2;

#[derive(Debug, Error)]
pub enum CombError {
    #[error("invalid comb spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("spectral leakage: fraction {fraction:.3e} of pulse energy lies outside |f| < {limit_mhz} MHz")]
    SpectralLeakage { fraction: f64, limit_mhz: f64 },
    #[error("pulse grid mismatch: pulse has {pulse_len} samples at dt={pulse_dt_ns} ns, grid wants {grid_len} at dt={grid_dt_ns} ns")]
    GridMismatch { pulse_len: usize, pulse_dt_ns: f64, grid_len: usize, grid_dt_ns: f64 },
    #[error("overlapping gates: gate width {gate_ns} ns >= echo period {period_ns} ns")]
    OverlappingGates { gate_ns: f64, period_ns: f64 },
    #[error("analytic efficiency needs gaussian teeth, got {0:?}")]
    UnsupportedShape(ToothShape),
    #[error("finesse {0:.3} too low for the analytic estimate (needs F >= 2)")]
    FinesseTooLow(f64),
}

/// Spectral shape of one comb tooth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToothShape {
    Gaussian,
    Lorentzian,
    Square,
}

/// Parametric description of a prepared comb.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombSpec {
    /// Tooth spacing Δ (ordinary frequency, MHz).
    pub tooth_spacing_mhz: f64,
    /// Tooth FWHM γ (MHz). Finesse F = Δ/γ.
    pub tooth_fwhm_mhz: f64,
    /// Peak optical depth d of one tooth (above background).
    pub peak_optical_depth: f64,
    /// Unstructured background depth d0.
    pub background_depth: f64,
    /// Total comb extent (MHz); teeth exist only inside this band.
    pub bandwidth_mhz: f64,
    pub tooth_shape: ToothShape,
}

impl CombSpec {
    pub fn finesse(&self) -> f64 {
        self.tooth_spacing_mhz / self.tooth_fwhm_mhz
    }

    /// Storage time 1/Δ in ns.
    pub fn storage_time_ns(&self) -> f64 {
        1000.0 / self.tooth_spacing_mhz
    }

    pub fn validate(&self) -> Result<(), CombError> {
        let fail = |m: String| Err(CombError::InvalidSpec(m));
        if !(self.tooth_spacing_mhz > 0.0) {
            return fail(format!("tooth_spacing_mhz must be > 0, got {}", self.tooth_spacing_mhz));
        }
        if !(self.tooth_fwhm_mhz > 0.0 && self.tooth_fwhm_mhz < self.tooth_spacing_mhz) {
            return fail(format!(
                "tooth_fwhm_mhz must be in (0, tooth_spacing_mhz), got {} vs {}",
                self.tooth_fwhm_mhz, self.tooth_spacing_mhz
            ));
        }
        if self.peak_optical_depth < 0.0 {
            return fail(format!("peak_optical_depth must be >= 0, got {}", self.peak_optical_depth));
        }
        if self.background_depth < 0.0 {
            return fail(format!("background_depth must be >= 0, got {}", self.background_depth));
        }
        if self.bandwidth_mhz < 2.0 * self.tooth_spacing_mhz {
            return fail(format!(
                "bandwidth_mhz must be >= 2*tooth_spacing_mhz, got {} vs {}",
                self.bandwidth_mhz,
                2.0 * self.tooth_spacing_mhz
            ));
        }
        Ok(())
    }

    /// Check that `grid` resolves the teeth and spans the band with margin.
    pub fn validate_grid(&self, grid: &SpectralGrid) -> Result<(), CombError> {
        let limit = self.tooth_fwhm_mhz / 10.0;
        if grid.resolution_mhz() > limit * (1.0 + 1e-12) {
            return Err(GridError::TooCoarse {
                resolution_mhz: grid.resolution_mhz(),
                limit_mhz: limit,
            }
            .into());
        }
        if grid.span_mhz < 4.0 * self.bandwidth_mhz {
            return Err(GridError::SpanTooNarrow {
                span_mhz: grid.span_mhz,
                bandwidth_mhz: self.bandwidth_mhz,
            }
            .into());
        }
        Ok(())
    }

    /// Absorption exponent at detuning `f` MHz from comb center.
    pub fn alpha_at(&self, f: f64) -> f64 {
        let delta = self.tooth_spacing_mhz;
        let gamma = self.tooth_fwhm_mhz;
        let half_band = self.bandwidth_mhz / 2.0;
        let mut alpha = self.background_depth;
        if self.peak_optical_depth > 0.0 {
            // Teeth centered on integer multiples of Δ inside the band.
            // Sum the few neighbors whose tails reach f.
            let n_center = (f / delta).round() as i64;
            let reach = match self.tooth_shape {
                ToothShape::Gaussian => 2,
                ToothShape::Lorentzian => 64,
                ToothShape::Square => 1,
            };
            for n in (n_center - reach)..=(n_center + reach) {
                let center = n as f64 * delta;
                if center.abs() > half_band + 1e-9 {
                    continue;
                }
                let x = f - center;
                alpha += self.peak_optical_depth * tooth_profile(self.tooth_shape, x, gamma);
            }
        }
        alpha
    }
}

/// Normalized tooth lineshape, peak value 1, FWHM `gamma`.
fn tooth_profile(shape: ToothShape, x: f64, gamma: f64) -> f64 {
    match shape {
        ToothShape::Gaussian => (-4.0 * LN2 * (x / gamma).powi(2)).exp(),
        ToothShape::Lorentzian => 1.0 / (1.0 + (2.0 * x / gamma).powi(2)),
        ToothShape::Square => {
            if x.abs() <= gamma / 2.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Sampled absorption exponent alpha(f) over the grid, in DFT bin order.
pub fn build_absorption_profile(spec: &CombSpec, grid: &SpectralGrid) -> Result<Vec<f64>, CombError> {
    spec.validate()?;
    spec.validate_grid(grid)?;
    Ok((0..grid.n_points).map(|k| spec.alpha_at(grid.freq_at(k))).collect())
}

/// Dispersion phase from the absorption exponent by the causal
/// (Kramers-Kronig) relation: `phi = hilbert(alpha/2)`.
///
/// The profile is re-embedded in a grid of twice the span (padded with the
/// edge background level) before the circular Hilbert transform so that
/// wrap-around leakage is suppressed, then the central half is returned.
pub fn dispersion_phase(alpha: &[f64], grid: &SpectralGrid) -> Vec<f64> {
    let n = grid.n_points;
    assert_eq!(alpha.len(), n, "alpha length must match grid");
    // Background level taken at the outermost frequency bin.
    let edge = alpha[n / 2];
    // Padded array in centered order: [pad | alpha(-span/2..span/2) | pad].
    let mut padded = vec![0.0; 2 * n];
    for k in 0..n {
        // centered index c: frequency (c - n/2) * res  == freq_at(k)
        let c = (k + n / 2) % n;
        padded[n / 2 + c] = (alpha[k] - edge) / 2.0;
    }
    let h = hilbert(&padded);
    let mut phi = vec![0.0; n];
    for k in 0..n {
        let c = (k + n / 2) % n;
        phi[k] = h[n / 2 + c];
    }
    phi
}

/// Complex amplitude response of a comb on a grid.
#[derive(Debug, Clone)]
pub struct TransferFunction {
    pub grid: SpectralGrid,
    /// t(f_k) in DFT bin order, |t| <= 1.
    pub amplitude: Vec<Complex64>,
}

impl TransferFunction {
    pub fn from_spec(spec: &CombSpec, grid: &SpectralGrid) -> Result<Self, CombError> {
        let alpha = build_absorption_profile(spec, grid)?;
        Ok(Self::from_alpha(&alpha, grid))
    }

    /// Build from a sampled absorption profile (DFT order), deriving the
    /// causal phase.
    pub fn from_alpha(alpha: &[f64], grid: &SpectralGrid) -> Self {
        let phi = dispersion_phase(alpha, grid);
        let amplitude = alpha
            .iter()
            .zip(phi.iter())
            .map(|(&a, &p)| Complex64::new(-a / 2.0, p).exp())
            .collect();
        Self { grid: *grid, amplitude }
    }

    /// An identity medium on the given grid.
    pub fn identity(grid: &SpectralGrid) -> Self {
        Self { grid: *grid, amplitude: vec![Complex64::new(1.0, 0.0); grid.n_points] }
    }
}

/// Complex optical envelope on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseWaveform {
    /// Time of sample 0, ns.
    pub t0_ns: f64,
    /// Sample period, ns.
    pub dt_ns: f64,
    pub envelope: Vec<Complex64>,
}

impl PulseWaveform {
    /// Gaussian pulse on the time grid conjugate to `grid`, with unit peak
    /// amplitude. `fwhm_ns` is the intensity FWHM; the peak sits at
    /// `peak_ns` and the window starts at `t0_ns`.
    pub fn gaussian(grid: &SpectralGrid, t0_ns: f64, peak_ns: f64, fwhm_ns: f64) -> Self {
        let dt = grid.dt_ns();
        let envelope = (0..grid.n_points)
            .map(|i| {
                let t = t0_ns + i as f64 * dt - peak_ns;
                Complex64::new((-2.0 * LN2 * (t / fwhm_ns).powi(2)).exp(), 0.0)
            })
            .collect();
        Self { t0_ns, dt_ns: dt, envelope }
    }

    pub fn time_at(&self, i: usize) -> f64 {
        self.t0_ns + i as f64 * self.dt_ns
    }

    /// Total energy, sum |e|^2 dt (arbitrary units).
    pub fn energy(&self) -> f64 {
        self.envelope.iter().map(|e| e.norm_sqr()).sum::<f64>() * self.dt_ns
    }

    /// Energy within the closed time window [t_lo, t_hi].
    pub fn energy_in_window(&self, t_lo: f64, t_hi: f64) -> f64 {
        self.envelope
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let t = self.time_at(*i);
                t >= t_lo && t <= t_hi
            })
            .map(|(_, e)| e.norm_sqr())
            .sum::<f64>()
            * self.dt_ns
    }

    /// Energy-weighted centroid time within [t_lo, t_hi]; None if the
    /// window holds no energy.
    pub fn centroid_in_window(&self, t_lo: f64, t_hi: f64) -> Option<f64> {
        let mut w = 0.0;
        let mut wt = 0.0;
        for (i, e) in self.envelope.iter().enumerate() {
            let t = self.time_at(i);
            if t >= t_lo && t <= t_hi {
                let p = e.norm_sqr();
                w += p;
                wt += p * t;
            }
        }
        if w > 0.0 {
            Some(wt / w)
        } else {
            None
        }
    }
}

/// Propagate a pulse through the medium: multiply the pulse spectrum by the
/// transfer function and transform back. Output shares the input time grid.
pub fn propagate_pulse(pulse: &PulseWaveform, tf: &TransferFunction) -> Result<PulseWaveform, CombError> {
    let n = tf.grid.n_points;
    let dt = tf.grid.dt_ns();
    if pulse.envelope.len() != n || (pulse.dt_ns - dt).abs() > 1e-9 * dt {
        return Err(CombError::GridMismatch {
            pulse_len: pulse.envelope.len(),
            pulse_dt_ns: pulse.dt_ns,
            grid_len: n,
            grid_dt_ns: dt,
        });
    }
    let spectrum = fft_forward(&pulse.envelope);
    // The pulse spectrum must fit the grid: demand that the outer 10% of
    // the band carries a negligible share of the spectral energy.
    let limit = 0.45 * tf.grid.span_mhz;
    let total: f64 = spectrum.iter().map(|s| s.norm_sqr()).sum();
    let outside: f64 = spectrum
        .iter()
        .enumerate()
        .filter(|(k, _)| tf.grid.freq_at(*k).abs() > limit)
        .map(|(_, s)| s.norm_sqr())
        .sum();
    if total > 0.0 && outside / total > 1e-9 {
        return Err(CombError::SpectralLeakage { fraction: outside / total, limit_mhz: limit });
    }
    let filtered: Vec<Complex64> =
        spectrum.iter().zip(tf.amplitude.iter()).map(|(s, t)| s * t).collect();
    Ok(PulseWaveform { t0_ns: pulse.t0_ns, dt_ns: pulse.dt_ns, envelope: fft_inverse(&filtered) })
}

/// One retrieved echo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Echo {
    pub order: usize,
    pub center_time_ns: f64,
    pub efficiency: f64,
}

/// Transmission and echo bookkeeping for one propagated pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoReport {
    /// Energy in the gate around the direct transmitted pulse, over input energy.
    pub transmitted_fraction: f64,
    pub echoes: Vec<Echo>,
}

/// Gate the output waveform at multiples of the rephasing time and report
/// per-echo efficiencies relative to `input_energy`. `reference_ns` is the
/// input pulse peak time; gate n is centered `n * 1000/Δ` ns after it.
pub fn extract_echoes(
    out: &PulseWaveform,
    reference_ns: f64,
    input_energy: f64,
    tooth_spacing_mhz: f64,
    n_max: usize,
    gate_ns: f64,
) -> Result<EchoReport, CombError> {
    let period_ns = 1000.0 / tooth_spacing_mhz;
    if gate_ns >= period_ns {
        return Err(CombError::OverlappingGates { gate_ns, period_ns });
    }
    assert!(input_energy > 0.0, "input energy must be positive");
    let half = gate_ns / 2.0;
    let transmitted_fraction = out.energy_in_window(reference_ns - half, reference_ns + half) / input_energy;
    let mut echoes = Vec::with_capacity(n_max);
    for order in 1..=n_max {
        let center = reference_ns + order as f64 * period_ns;
        let e = out.energy_in_window(center - half, center + half);
        let centroid = out.centroid_in_window(center - half, center + half).unwrap_or(center);
        echoes.push(Echo { order, center_time_ns: centroid, efficiency: e / input_energy });
    }
    Ok(EchoReport { transmitted_fraction, echoes })
}

/// Standard closed-form estimate of the first-echo efficiency for gaussian
/// teeth: `(d/F)^2 exp(-d/F) exp(-7/F^2) exp(-d0)`. Used as an independent
/// cross-check of the propagation engine.
pub fn analytic_efficiency(spec: &CombSpec) -> Result<f64, CombError> {
    if spec.tooth_shape != ToothShape::Gaussian {
        return Err(CombError::UnsupportedShape(spec.tooth_shape));
    }
    let finesse = spec.finesse();
    if finesse < 2.0 {
        return Err(CombError::FinesseTooLow(finesse));
    }
    let d_eff = spec.peak_optical_depth / finesse;
    Ok(d_eff.powi(2)
        * (-d_eff).exp()
        * (-7.0 / finesse.powi(2)).exp()
        * (-spec.background_depth).exp())
}

/// An absorption profile produced by the preparation model rather than a
/// parametric spec.
#[derive(Debug, Clone)]
pub struct SampledProfile {
    pub grid: SpectralGrid,
    /// alpha(f_k) in DFT bin order.
    pub alpha: Vec<f64>,
}

impl SampledProfile {
    pub fn to_transfer_function(&self) -> TransferFunction {
        TransferFunction::from_alpha(&self.alpha, &self.grid)
    }

    pub fn alpha_near(&self, f_mhz: f64) -> f64 {
        let res = self.grid.resolution_mhz();
        let n = self.grid.n_points as i64;
        let k = ((f_mhz / res).round() as i64).rem_euclid(n) as usize;
        self.alpha[k]
    }
}

/// Phenomenological hole-burning model for the pump sequence of the
/// preparation cycle. The pump sweeps `sweep_mhz` (centered on zero) in
/// `sweep_us`, with per-step amplitudes shaping the spectral density;
/// `repeats` passes bleach the initial depth `alpha0` toward `floor`:
///
/// `alpha(f) = floor + (alpha0 - floor) * exp(-kappa * repeats * P(f))`
///
/// with pump density `P(f) = amplitude^2 * dwell_us` on each step. Zero
/// pump leaves `alpha0` unchanged; saturated pumping reaches `floor`.
#[allow(clippy::too_many_arguments)]
pub fn prep_sequence_to_comb(
    sweep_mhz: f64,
    sweep_us: f64,
    repeats: u32,
    step_amplitudes: &[f64],
    alpha0: f64,
    kappa: f64,
    floor: f64,
    grid: &SpectralGrid,
) -> SampledProfile {
    assert!(sweep_mhz > 0.0 && sweep_us > 0.0, "sweep extent and duration must be positive");
    assert!(step_amplitudes.iter().all(|&a| a >= 0.0), "step amplitudes must be non-negative");
    assert!(floor >= 0.0 && alpha0 >= floor, "need alpha0 >= floor >= 0");
    let n_steps = step_amplitudes.len();
    let dwell_us = sweep_us / n_steps.max(1) as f64;
    let step_mhz = sweep_mhz / n_steps.max(1) as f64;
    let alpha = (0..grid.n_points)
        .map(|k| {
            let f = grid.freq_at(k);
            let pump = if n_steps > 0 && f >= -sweep_mhz / 2.0 && f < sweep_mhz / 2.0 {
                let idx = (((f + sweep_mhz / 2.0) / step_mhz) as usize).min(n_steps - 1);
                step_amplitudes[idx].powi(2) * dwell_us
            } else {
                0.0
            };
            floor + (alpha0 - floor) * (-kappa * repeats as f64 * pump).exp()
        })
        .collect();
    SampledProfile { grid: *grid, alpha }
}

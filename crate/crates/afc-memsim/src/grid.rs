//! Uniform spectral grids and the discrete transforms used by the pulse
//! propagation engine.
//!
//! Frequencies are ordinary frequencies in MHz, times in ns, so a comb with
//! tooth spacing `Δ` MHz rephases at `1000/Δ` ns. All spectral arrays are
//! stored in DFT bin order (bin 0 at zero frequency, negative frequencies in
//! the upper half), matching what `rustfft` produces.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("n_points must be a power of two, got {0}")]
    NotPowerOfTwo(usize),
    #[error("span_mhz must be positive, got {0}")]
    NonPositiveSpan(f64),
    #[error("grid too coarse: resolution {resolution_mhz} MHz exceeds tooth_fwhm/10 = {limit_mhz} MHz")]
    TooCoarse { resolution_mhz: f64, limit_mhz: f64 },
    #[error("grid span {span_mhz} MHz is below 4x comb bandwidth {bandwidth_mhz} MHz")]
    SpanTooNarrow { span_mhz: f64, bandwidth_mhz: f64 },
}

/// A uniform frequency grid of `n_points` bins covering `span_mhz`,
/// centered on zero detuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    pub n_points: usize,
    pub span_mhz: f64,
}

impl SpectralGrid {
    pub fn new(n_points: usize, span_mhz: f64) -> Result<Self, GridError> {
        if !n_points.is_power_of_two() {
            return Err(GridError::NotPowerOfTwo(n_points));
        }
        if span_mhz <= 0.0 {
            return Err(GridError::NonPositiveSpan(span_mhz));
        }
        Ok(Self { n_points, span_mhz })
    }

    /// Frequency resolution in MHz.
    pub fn resolution_mhz(&self) -> f64 {
        self.span_mhz / self.n_points as f64
    }

    /// Sample period of the conjugate time grid, in ns.
    pub fn dt_ns(&self) -> f64 {
        1000.0 / self.span_mhz
    }

    /// Total time window covered by the conjugate grid, in ns.
    pub fn window_ns(&self) -> f64 {
        self.dt_ns() * self.n_points as f64
    }

    /// Frequency of DFT bin `k` in MHz (negative frequencies wrapped).
    pub fn freq_at(&self, k: usize) -> f64 {
        let n = self.n_points;
        debug_assert!(k < n);
        let k_signed = if k <= n / 2 { k as i64 } else { k as i64 - n as i64 };
        k_signed as f64 * self.resolution_mhz()
    }

    /// All bin frequencies in DFT order.
    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.freq_at(k)).collect()
    }
}

/// Forward DFT (time -> frequency), unnormalized.
pub fn fft_forward(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Inverse DFT (frequency -> time), normalized by 1/N.
pub fn fft_inverse(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    let n = buf.len();
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

/// Discrete Hilbert transform of a real sequence, convolution with 1/(pi x):
/// `hilbert(cos) = sin`. The input is treated as one period of a circular
/// signal; callers pad if wrap-around matters.
pub fn hilbert(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let s = if k == 0 || (n % 2 == 0 && k == n / 2) {
            Complex64::new(0.0, 0.0)
        } else if k < n.div_ceil(2) {
            Complex64::new(0.0, -1.0)
        } else {
            Complex64::new(0.0, 1.0)
        };
        *v *= s;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|v| v.re * scale).collect()
}

//! Discrete-atom brute-force oracle for the collective rephasing.
//!
//! A stored excitation is modeled as a weighted sum over atoms with fixed
//! detunings; the re-emitted amplitude is the plain phase sum
//! `A(t) = sum_j w_j exp(-i 2 pi delta_j t + i theta_j)`. This validates the
//! echo timing and the tooth-shape dephasing factor of the transfer-function
//! engine from first principles, without any propagation physics (thin
//! medium, single pass, no reabsorption). Forward phase matching cancels the
//! spatial phases exactly in this geometry, so they are not sampled.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use crate::comb::{extract_echoes, propagate_pulse, CombError, CombSpec, PulseWaveform, ToothShape, TransferFunction};
use crate::grid::SpectralGrid;
use crate::util::{indexed_map, stream_rng};

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("empty comb: peak optical depth is zero, nothing to sample")]
    EmptyComb,
    #[error("n_atoms must be >= 1")]
    NoAtoms,
    #[error(transparent)]
    Comb(#[from] CombError),
}

/// A fixed draw of atomic detunings with normalized weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomEnsemble {
    /// Detuning of each atom from the comb center, MHz.
    pub detunings_mhz: Vec<f64>,
    /// Excitation weights, normalized to sum to 1.
    pub weights: Vec<f64>,
    /// Std of the random per-atom phase applied at emission time, rad.
    pub dephase_sigma_rad: f64,
}

/// |A(t)|^2 sampled on a time grid.
#[derive(Debug, Clone, Serialize)]
pub struct EmissionTrace {
    pub times_ns: Vec<f64>,
    pub intensity: Vec<f64>,
}

impl EmissionTrace {
    /// Time of the largest intensity sample.
    pub fn peak(&self) -> (f64, f64) {
        let mut best = (self.times_ns[0], self.intensity[0]);
        for (t, i) in self.times_ns.iter().zip(self.intensity.iter()) {
            if *i > best.1 {
                best = (*t, *i);
            }
        }
        best
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time_ns,intensity")?;
        for (t, i) in self.times_ns.iter().zip(self.intensity.iter()) {
            writeln!(w, "{t},{i}")?;
        }
        Ok(())
    }
}

/// Draw `n_atoms` detunings with density proportional to the comb structure
/// `alpha(f) - d0` (the unstructured background does not participate in the
/// collective emission). Inverse-CDF sampling; deterministic for a given
/// seed.
pub fn sample_atoms(spec: &CombSpec, n_atoms: usize, seed: u64) -> Result<AtomEnsemble, EnsembleError> {
    spec.validate()?;
    if spec.peak_optical_depth <= 0.0 {
        return Err(EnsembleError::EmptyComb);
    }
    if n_atoms == 0 {
        return Err(EnsembleError::NoAtoms);
    }
    // Tabulate the comb density on a grid fine enough to resolve the teeth,
    // reaching past the band edge to catch tooth tails.
    let tail = match spec.tooth_shape {
        ToothShape::Gaussian => 3.0 * spec.tooth_fwhm_mhz,
        ToothShape::Lorentzian => 30.0 * spec.tooth_fwhm_mhz,
        ToothShape::Square => spec.tooth_fwhm_mhz,
    };
    let half_extent = spec.bandwidth_mhz / 2.0 + tail;
    let step = spec.tooth_fwhm_mhz / 64.0;
    let n_bins = (2.0 * half_extent / step).ceil() as usize;
    let f_at = |i: usize| -half_extent + i as f64 * step;
    let density: Vec<f64> = (0..=n_bins)
        .map(|i| (spec.alpha_at(f_at(i)) - spec.background_depth).max(0.0))
        .collect();
    // Cumulative trapezoid.
    let mut cdf = vec![0.0; n_bins + 1];
    for i in 1..=n_bins {
        cdf[i] = cdf[i - 1] + 0.5 * (density[i - 1] + density[i]);
    }
    let total = cdf[n_bins];
    assert!(total > 0.0, "comb density vanished on the sampling grid");
    let mut rng = stream_rng(seed, 0x41544f4d); // "ATOM"
    let detunings = (0..n_atoms)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * total;
            let j = cdf.partition_point(|&c| c < u).clamp(1, n_bins);
            // Linear interpolation inside bin (j-1, j).
            let c0 = cdf[j - 1];
            let c1 = cdf[j];
            let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
            f_at(j - 1) + frac * step
        })
        .collect();
    let w = 1.0 / n_atoms as f64;
    Ok(AtomEnsemble { detunings_mhz: detunings, weights: vec![w; n_atoms], dephase_sigma_rad: 0.0 })
}

/// Evaluate the collective emission intensity on a set of times. Per-atom
/// random phases with std `dephase_sigma_rad` are drawn once per call from
/// `seed`. The atom sum runs in index order, so results are reproducible
/// for any `AFC_MEMSIM_THREADS` setting.
pub fn collective_intensity(ensemble: &AtomEnsemble, times_ns: &[f64], seed: u64) -> EmissionTrace {
    let n = ensemble.detunings_mhz.len();
    let thetas: Vec<f64> = if ensemble.dephase_sigma_rad > 0.0 {
        let normal = Normal::new(0.0, ensemble.dephase_sigma_rad).expect("valid sigma");
        let mut rng = stream_rng(seed, 0x44455048); // "DEPH"
        (0..n).map(|_| normal.sample(&mut rng)).collect()
    } else {
        vec![0.0; n]
    };
    let intensity = indexed_map(times_ns.len(), |ti| {
        let t = times_ns[ti];
        let mut re = 0.0;
        let mut im = 0.0;
        for j in 0..n {
            // MHz * ns -> cycles carry a factor 1e-3.
            let phase = -2.0e-3 * std::f64::consts::PI * ensemble.detunings_mhz[j] * t + thetas[j];
            let (s, c) = phase.sin_cos();
            re += ensemble.weights[j] * c;
            im += ensemble.weights[j] * s;
        }
        re * re + im * im
    });
    EmissionTrace { times_ns: times_ns.to_vec(), intensity }
}

/// Side-by-side comparison of the discrete-atom oracle and the
/// transfer-function engine on the same comb.
#[derive(Debug, Clone, Serialize)]
pub struct OracleComparison {
    /// Oracle rephasing peak time (grid argmax), ns.
    pub oracle_peak_time_ns: f64,
    /// Expected rephasing time 1/Δ, ns.
    pub expected_time_ns: f64,
    /// Time grid step shared by both engines, ns.
    pub grid_step_ns: f64,
    /// Oracle peak intensity (single-pass rephasing factor).
    pub oracle_peak_intensity: f64,
    /// Engine first-echo efficiency divided by the dephasing-free part of
    /// the closed-form estimate, i.e. the engine's dephasing factor.
    pub transfer_dephasing_factor: f64,
    /// transfer_dephasing_factor / oracle_peak_intensity.
    pub ratio: f64,
    /// Engine first-echo centroid, ns.
    pub engine_echo_time_ns: f64,
}

/// Run both engines on `spec` and report timing and dephasing-factor
/// agreement. The oracle is evaluated on the engine's own time grid around
/// the expected rephasing time.
pub fn oracle_vs_transfer(spec: &CombSpec, n_atoms: usize, seed: u64) -> Result<OracleComparison, EnsembleError> {
    let grid = default_grid(spec);
    let tf = TransferFunction::from_spec(spec, &grid)?;
    let window = grid.window_ns();
    let pulse = PulseWaveform::gaussian(&grid, -0.15 * window, 0.0, 25.0);
    let out = propagate_pulse(&pulse, &tf)?;
    let report = extract_echoes(&out, 0.0, pulse.energy(), spec.tooth_spacing_mhz, 1, 50.0)?;
    let eta_engine = report.echoes[0].efficiency;
    let engine_echo_time_ns = report.echoes[0].center_time_ns;

    // Remove the absorption part of the closed form to isolate dephasing.
    let finesse = spec.finesse();
    let d_eff = spec.peak_optical_depth / finesse;
    let absorption_part = d_eff.powi(2) * (-d_eff).exp() * (-spec.background_depth).exp();
    let transfer_dephasing_factor = eta_engine / absorption_part;

    let ensemble = sample_atoms(spec, n_atoms, seed)?;
    let expected_time_ns = spec.storage_time_ns();
    let dt = grid.dt_ns();
    let n_steps = (expected_time_ns / dt / 2.0).floor() as i64;
    let times: Vec<f64> = (-n_steps..=n_steps).map(|i| expected_time_ns + i as f64 * dt).collect();
    let trace = collective_intensity(&ensemble, &times, seed);
    let (oracle_peak_time_ns, oracle_peak_intensity) = trace.peak();

    Ok(OracleComparison {
        oracle_peak_time_ns,
        expected_time_ns,
        grid_step_ns: dt,
        oracle_peak_intensity,
        transfer_dephasing_factor,
        ratio: transfer_dephasing_factor / oracle_peak_intensity,
        engine_echo_time_ns,
    })
}

/// Smallest power-of-two grid that resolves the comb teeth and spans four
/// times its bandwidth.
pub fn default_grid(spec: &CombSpec) -> SpectralGrid {
    let span = (4.0 * spec.bandwidth_mhz).max(819.2);
    let res_target = spec.tooth_fwhm_mhz / 10.0;
    let mut n = 8192usize;
    while span / n as f64 > res_target && n < (1 << 22) {
        n *= 2;
    }
    SpectralGrid::new(n, span).expect("derived grid is valid")
}

/// Exact Gaussian-tooth rephasing factor at t = 1/Δ (intensity), for unit
/// tests that want the unrounded constant.
pub fn gaussian_rephasing_intensity(finesse: f64) -> f64 {
    let c = std::f64::consts::PI.powi(2) / (2.0 * crate::comb::LN2);
    (-c / finesse.powi(2)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_spec(finesse: f64) -> CombSpec {
        CombSpec {
            tooth_spacing_mhz: 5.0,
            tooth_fwhm_mhz: 5.0 / finesse,
            peak_optical_depth: 2.0,
            background_depth: 0.0,
            bandwidth_mhz: 100.0,
            tooth_shape: ToothShape::Gaussian,
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = gaussian_spec(5.0);
        let a = sample_atoms(&spec, 2000, 7).unwrap();
        let b = sample_atoms(&spec, 2000, 7).unwrap();
        let c = sample_atoms(&spec, 2000, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.detunings_mhz, c.detunings_mhz);
    }

    #[test]
    fn empty_comb_is_an_error() {
        let spec = CombSpec { peak_optical_depth: 0.0, ..gaussian_spec(5.0) };
        assert!(matches!(sample_atoms(&spec, 100, 0), Err(EnsembleError::EmptyComb)));
    }

    #[test]
    fn single_atom_lands_on_a_tooth() {
        let spec = CombSpec { tooth_shape: ToothShape::Square, ..gaussian_spec(4.0) };
        let e = sample_atoms(&spec, 1, 3).unwrap();
        assert_eq!(e.weights, vec![1.0]);
        let delta = e.detunings_mhz[0];
        let nearest = (delta / spec.tooth_spacing_mhz).round() * spec.tooth_spacing_mhz;
        assert!((delta - nearest).abs() <= spec.tooth_fwhm_mhz / 2.0 + 1e-9, "detuning {delta}");
    }

    #[test]
    fn square_comb_histogram_matches_density() {
        // F = 2: teeth cover half of each period. All atoms sit inside
        // teeth, half of them within the central half-width of a tooth.
        let spec = CombSpec {
            tooth_shape: ToothShape::Square,
            tooth_fwhm_mhz: 2.5,
            ..gaussian_spec(5.0)
        };
        let n = 50_000;
        let e = sample_atoms(&spec, n, 11).unwrap();
        let dist_to_tooth = |d: f64| {
            let c = (d / spec.tooth_spacing_mhz).round() * spec.tooth_spacing_mhz;
            (d - c).abs()
        };
        // Inverse-CDF interpolation can smear an atom at most one sampling
        // step past a square edge.
        let edge_tol = spec.tooth_fwhm_mhz / 64.0;
        let inside = e.detunings_mhz.iter().filter(|&&d| dist_to_tooth(d) <= 1.25 + edge_tol).count();
        assert_eq!(inside, n, "all atoms must be inside square teeth");
        let central = e.detunings_mhz.iter().filter(|&&d| dist_to_tooth(d) <= 0.625).count() as f64;
        let frac = central / n as f64;
        // Binomial(50k, 1/2): sd 0.0022; allow 4 sd.
        assert!((frac - 0.5).abs() < 0.01, "central fraction {frac}");

        // Chi-square goodness of fit against the flat in-tooth density:
        // 10 equal sub-bins across one tooth at f = 0.
        let in_tooth: Vec<f64> = e
            .detunings_mhz
            .iter()
            .copied()
            .filter(|d| d.abs() <= 1.25)
            .collect();
        let bins = 10usize;
        let mut counts = vec![0usize; bins];
        for d in &in_tooth {
            let idx = (((d + 1.25) / 2.5 * bins as f64) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        let expect = in_tooth.len() as f64 / bins as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
        // 99th percentile of chi-square with 9 dof is 21.67; p > 0.01 below it.
        assert!(chi2 < 21.67, "chi2 {chi2} too large for uniform tooth density");
    }

    #[test]
    fn aligned_phases_give_unit_intensity_at_t0() {
        let spec = gaussian_spec(5.0);
        let e = sample_atoms(&spec, 5000, 1).unwrap();
        let trace = collective_intensity(&e, &[0.0], 0);
        assert!((trace.intensity[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_comb_rephases_with_tooth_shape_factor() {
        let finesse = 5.0;
        let spec = gaussian_spec(finesse);
        let e = sample_atoms(&spec, 100_000, 21).unwrap();
        let times: Vec<f64> = (-40..=40).map(|i| 200.0 + i as f64 * 0.5).collect();
        let trace = collective_intensity(&e, &times, 0);
        let (t_peak, i_peak) = trace.peak();
        assert!((t_peak - 200.0).abs() <= 1.0, "peak at {t_peak}");
        let expect = gaussian_rephasing_intensity(finesse);
        // Monte Carlo sd of the peak estimate is below 1/sqrt(n).
        assert!(
            (i_peak - expect).abs() < 3.0 / (100_000f64).sqrt(),
            "peak {i_peak} vs {expect}"
        );
    }

    #[test]
    fn revivals_at_multiples_of_storage_time() {
        for shape in [ToothShape::Gaussian, ToothShape::Square] {
            let spec = CombSpec { tooth_shape: shape, ..gaussian_spec(4.0) };
            let e = sample_atoms(&spec, 30_000, 5).unwrap();
            for order in 1..=3 {
                let center = 200.0 * order as f64;
                let times: Vec<f64> = (-30..=30).map(|i| center + i as f64).collect();
                let trace = collective_intensity(&e, &times, 0);
                let (t_peak, i_peak) = trace.peak();
                assert!((t_peak - center).abs() <= 3.0, "{shape:?} order {order}: peak at {t_peak}");
                // Off-revival level for comparison.
                let off = collective_intensity(&e, &[center - 100.0], 0).intensity[0];
                assert!(i_peak > 5.0 * off, "{shape:?} order {order}: revival {i_peak} vs off {off}");
            }
        }
    }

    #[test]
    fn dephasing_scales_peak_but_not_time() {
        let spec = gaussian_spec(5.0);
        let sigma: f64 = 0.8;
        let base = sample_atoms(&spec, 100_000, 9).unwrap();
        let dephased = AtomEnsemble { dephase_sigma_rad: sigma, ..base.clone() };
        let times: Vec<f64> = (-40..=40).map(|i| 200.0 + i as f64 * 0.5).collect();
        let clean = collective_intensity(&base, &times, 17);
        let noisy = collective_intensity(&dephased, &times, 17);
        let (t0, i0) = clean.peak();
        let (t1, i1) = noisy.peak();
        assert!((t0 - t1).abs() <= 1.0, "dephasing moved the peak: {t0} vs {t1}");
        let expect_ratio = (-sigma * sigma).exp();
        assert!(
            (i1 / i0 - expect_ratio).abs() < 0.05,
            "intensity ratio {} vs e^-sigma^2 = {expect_ratio}",
            i1 / i0
        );
    }

    #[test]
    fn background_depth_does_not_affect_oracle() {
        // The background is subtracted from the sampling density, so only
        // f64 rounding in the subtraction can move a detuning.
        let spec_a = gaussian_spec(5.0);
        let spec_b = CombSpec { background_depth: 1.0, ..spec_a };
        let a = sample_atoms(&spec_a, 1000, 4).unwrap();
        let b = sample_atoms(&spec_b, 1000, 4).unwrap();
        for (x, y) in a.detunings_mhz.iter().zip(b.detunings_mhz.iter()) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn peak_standard_error_scales_with_atom_count() {
        let spec = gaussian_spec(5.0);
        let peak_for = |n_atoms: usize, seed: u64| {
            let e = sample_atoms(&spec, n_atoms, seed).unwrap();
            collective_intensity(&e, &[200.0], 0).intensity[0]
        };
        let spread = |n_atoms: usize| {
            let xs: Vec<f64> = (0..12).map(|s| peak_for(n_atoms, 100 + s)).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
        };
        let s_small = spread(2_500);
        let s_large = spread(40_000);
        let ratio = s_small / s_large;
        // 16x atoms should shrink the sd by about 4; allow a loose band.
        assert!((2.0..8.0).contains(&ratio), "sd ratio {ratio}");
    }

    #[test]
    fn oracle_agrees_with_transfer_engine() {
        let spec = gaussian_spec(5.0);
        let cmp = oracle_vs_transfer(&spec, 20_000, 13).unwrap();
        assert!(
            (cmp.oracle_peak_time_ns - cmp.expected_time_ns).abs() <= cmp.grid_step_ns,
            "oracle peak {} vs expected {}",
            cmp.oracle_peak_time_ns,
            cmp.expected_time_ns
        );
        assert!(
            (cmp.engine_echo_time_ns - cmp.expected_time_ns).abs() <= cmp.grid_step_ns,
            "engine echo {} vs expected {}",
            cmp.engine_echo_time_ns,
            cmp.expected_time_ns
        );
        assert!((cmp.ratio - 1.0).abs() < 0.2, "dephasing factor ratio {}", cmp.ratio);
    }

    #[test]
    fn near_perfect_comb_rephases_fully() {
        // gamma -> 0 at fixed spacing: the oracle peak approaches 1.
        let spec = CombSpec { tooth_fwhm_mhz: 0.05, ..gaussian_spec(5.0) };
        let e = sample_atoms(&spec, 50_000, 2).unwrap();
        let trace = collective_intensity(&e, &[200.0], 0);
        assert!(trace.intensity[0] > 0.99, "peak {}", trace.intensity[0]);
    }
}

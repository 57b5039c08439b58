//! Quantum process tomography of the memory channel.
//!
//! The qubit channel is represented by a 4x4 process matrix `chi` in the
//! Pauli basis {I, X, Y, Z}: `E(rho) = sum_mn chi_mn sigma_m rho sigma_n`.
//! Counts are simulated with a threshold-detector model (weak coherent
//! pulses, dark counts per gate), then the channel is reconstructed by
//! linear inversion and by a CPTP maximum-likelihood fit, with parametric
//! bootstrap error bars.

mod mle;

pub use mle::{mle_chi, MleOutcome};

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polar::{measurement_projector, InputState, JonesMatrix, MeasBasis, Port};
use crate::util::{derive_seed, indexed_map, stream_rng};

pub type Cx = Complex64;
pub type Mat2 = Matrix2<Cx>;
pub type Mat4 = Matrix4<Cx>;

#[derive(Debug, Error)]
pub enum TomoError {
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("zero Jones matrix has no channel")]
    ZeroMatrix,
    #[error("dataset cell ({input}, {basis}, {port}) has clicks {clicks} > trials {trials}")]
    BadCell { input: String, basis: String, port: String, clicks: u64, trials: u64 },
    #[error("dataset must hold all 36 cells in canonical order")]
    IncompleteDataset,
    #[error("singular inversion system: every setting of input {0} recorded zero clicks")]
    SingularSystem(String),
    #[error("target process matrix is not pure (Tr chi^2 = {0})")]
    NonPureTarget(f64),
    #[error("dataset csv parse error at line {line}: {reason}")]
    CsvParse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The Pauli basis {I, X, Y, Z}.
pub fn pauli(m: usize) -> Mat2 {
    let o = Cx::new(0.0, 0.0);
    let l = Cx::new(1.0, 0.0);
    let i = Cx::i();
    match m {
        0 => Mat2::new(l, o, o, l),
        1 => Mat2::new(o, l, l, o),
        2 => Mat2::new(o, -i, i, o),
        3 => Mat2::new(l, o, o, -l),
        _ => unreachable!("pauli index"),
    }
}

/// 2x2 Hermitian density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    pub mat: Mat2,
}

impl DensityMatrix {
    pub fn from_pure(state: &crate::polar::JonesVector) -> Self {
        let v = state.normalized().as_vector();
        Self { mat: v * v.adjoint() }
    }

    /// Reconstruct from per-setting mean values `s_b = Tr(rho D_b)` where
    /// `D_b` is the port difference operator of basis `b`.
    pub fn from_setting_means(means: &[(MeasBasis, f64)]) -> Self {
        let mut m = Mat2::identity() * Cx::new(0.5, 0.0);
        for (basis, s) in means {
            let d = measurement_projector(*basis, Port::Plus) - measurement_projector(*basis, Port::Minus);
            m += d * Cx::new(0.5 * s, 0.0);
        }
        Self { mat: m }
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.mat.symmetric_eigen().eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b))
    }
}

/// 4x4 Hermitian process matrix in the Pauli basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiMatrix {
    pub mat: Mat4,
}

impl ChiMatrix {
    pub fn identity_process() -> Self {
        let mut m = Mat4::zeros();
        m[(0, 0)] = Cx::new(1.0, 0.0);
        Self { mat: m }
    }

    pub fn depolarizing() -> Self {
        Self { mat: Mat4::identity() * Cx::new(0.25, 0.0) }
    }

    /// Convex mixture (1-lambda) self + lambda other.
    pub fn mix(&self, other: &ChiMatrix, lambda: f64) -> Self {
        Self { mat: self.mat * Cx::new(1.0 - lambda, 0.0) + other.mat * Cx::new(lambda, 0.0) }
    }

    /// Apply the channel to a density matrix.
    pub fn apply(&self, rho: &Mat2) -> Mat2 {
        let mut out = Mat2::zeros();
        for m in 0..4 {
            for n in 0..4 {
                let c = self.mat[(m, n)];
                if c.norm_sqr() > 0.0 {
                    out += pauli(m) * rho * pauli(n) * c;
                }
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn hermitian_defect(&self) -> f64 {
        (self.mat - self.mat.adjoint()).norm()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.mat.symmetric_eigen().eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b))
    }

    /// Frobenius norm of `sum_mn chi_mn sigma_n sigma_m - I`; zero for a
    /// trace-preserving channel.
    pub fn tp_defect(&self) -> f64 {
        let mut acc = Mat2::zeros();
        for m in 0..4 {
            for n in 0..4 {
                acc += pauli(n) * pauli(m) * self.mat[(m, n)];
            }
        }
        (acc - Mat2::identity()).norm()
    }

    /// Choi matrix on (input tensor output), index = 2*in + out.
    pub fn to_choi(&self) -> Mat4 {
        let mut s = Mat4::zeros();
        for m in 0..4 {
            let vm = pauli_vec(m);
            for n in 0..4 {
                let vn = pauli_vec(n);
                let c = self.mat[(m, n)];
                for r in 0..4 {
                    for q in 0..4 {
                        s[(r, q)] += c * vm[r] * vn[q].conj();
                    }
                }
            }
        }
        s
    }

    pub fn from_choi(s: &Mat4) -> Self {
        let mut chi = Mat4::zeros();
        for m in 0..4 {
            let vm = pauli_vec(m);
            for n in 0..4 {
                let vn = pauli_vec(n);
                let mut acc = Cx::new(0.0, 0.0);
                for r in 0..4 {
                    for q in 0..4 {
                        acc += vm[r].conj() * s[(r, q)] * vn[q];
                    }
                }
                chi[(m, n)] = acc / 4.0;
            }
        }
        Self { mat: chi }
    }

    pub fn frobenius_distance(&self, other: &ChiMatrix) -> f64 {
        (self.mat - other.mat).norm()
    }

    pub fn max_imag_entry(&self) -> f64 {
        self.mat.iter().fold(0.0f64, |a, c| a.max(c.im.abs()))
    }

    /// (real part table, imaginary part table), row-major I,X,Y,Z.
    pub fn tables(&self) -> ([[f64; 4]; 4], [[f64; 4]; 4]) {
        let mut re = [[0.0; 4]; 4];
        let mut im = [[0.0; 4]; 4];
        for r in 0..4 {
            for c in 0..4 {
                re[r][c] = self.mat[(r, c)].re;
                im[r][c] = self.mat[(r, c)].im;
            }
        }
        (re, im)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "row,col,re,im")?;
        for r in 0..4 {
            for c in 0..4 {
                writeln!(w, "{r},{c},{},{}", self.mat[(r, c)].re, self.mat[(r, c)].im)?;
            }
        }
        Ok(())
    }
}

/// Vectorization of a Pauli operator in the (in tensor out) Choi basis:
/// component (2k + a) = sigma[a, k].
fn pauli_vec(m: usize) -> [Cx; 4] {
    let p = pauli(m);
    [p[(0, 0)], p[(1, 0)], p[(0, 1)], p[(1, 1)]]
}

/// Photon-counting model of the detection chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Mean photon number per probe pulse.
    pub mean_photon_number: f64,
    /// Memory recall efficiency for the gated echo.
    pub memory_efficiency: f64,
    pub detection_efficiency: f64,
    pub path_transmission: f64,
    /// Dark-count probability per detector per gate.
    pub dark_prob_per_gate: f64,
    pub gate_ns: f64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), TomoError> {
        let tests = [
            ("memory_efficiency", self.memory_efficiency),
            ("detection_efficiency", self.detection_efficiency),
            ("path_transmission", self.path_transmission),
            ("dark_prob_per_gate", self.dark_prob_per_gate),
        ];
        for (name, v) in tests {
            if !(0.0..=1.0).contains(&v) {
                return Err(TomoError::InvalidNoise(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if !(self.mean_photon_number > 0.0) {
            return Err(TomoError::InvalidNoise(format!(
                "mean_photon_number = {} must be > 0",
                self.mean_photon_number
            )));
        }
        if !(self.gate_ns > 0.0) {
            return Err(TomoError::InvalidNoise(format!("gate_ns = {} must be > 0", self.gate_ns)));
        }
        Ok(())
    }

    /// Click probability per gate from the echo photons alone:
    /// `1 - exp(-mu * eta_mem * eta_det * eta_path)` (threshold detector on
    /// a coherent pulse).
    pub fn signal_probability(&self) -> f64 {
        let mean = self.mean_photon_number
            * self.memory_efficiency
            * self.detection_efficiency
            * self.path_transmission;
        1.0 - (-mean).exp()
    }

    /// Fraction of post-selected clicks caused by dark counts.
    pub fn noise_fraction(&self) -> f64 {
        let s = self.signal_probability();
        if s + self.dark_prob_per_gate <= 0.0 {
            1.0
        } else {
            self.dark_prob_per_gate / (self.dark_prob_per_gate + s)
        }
    }
}

/// Effective post-selected channel of a Jones map under the noise model:
/// the pure channel of `M` mixed with a white-noise (depolarizing) share
/// `lambda = dark / (dark + signal)`.
pub fn channel_from_jones(m: &JonesMatrix, noise: &NoiseModel) -> Result<ChiMatrix, TomoError> {
    noise.validate()?;
    let norm = m.mat.norm();
    if norm < 1e-300 {
        return Err(TomoError::ZeroMatrix);
    }
    // Pauli coefficient vector of M.
    let mut coeff = [Cx::new(0.0, 0.0); 4];
    let mut total = 0.0;
    for (k, c) in coeff.iter_mut().enumerate() {
        *c = (pauli(k) * m.mat).trace() / 2.0;
        total += c.norm_sqr();
    }
    let mut pure = Mat4::zeros();
    for r in 0..4 {
        for q in 0..4 {
            pure[(r, q)] = coeff[r] * coeff[q].conj() / total;
        }
    }
    let chi_pure = ChiMatrix { mat: pure };
    Ok(chi_pure.mix(&ChiMatrix::depolarizing(), noise.noise_fraction()))
}

/// Click counts for one (input, basis, port) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountCell {
    pub input: InputState,
    pub basis: MeasBasis,
    pub port: Port,
    pub trials: u64,
    pub clicks: u64,
}

/// All 36 tomography cells in canonical order
/// (inputs H,V,D,A,R,L x bases Z,X,Y x ports +,-).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyDataset {
    pub cells: Vec<CountCell>,
}

impl TomographyDataset {
    pub fn cell_index(input: InputState, basis: MeasBasis, port: Port) -> usize {
        let i = InputState::ALL.iter().position(|x| *x == input).unwrap();
        let b = MeasBasis::ALL.iter().position(|x| *x == basis).unwrap();
        let p = Port::BOTH.iter().position(|x| *x == port).unwrap();
        (i * 3 + b) * 2 + p
    }

    pub fn from_cells(cells: Vec<CountCell>) -> Result<Self, TomoError> {
        if cells.len() != 36 {
            return Err(TomoError::IncompleteDataset);
        }
        for (idx, c) in cells.iter().enumerate() {
            if Self::cell_index(c.input, c.basis, c.port) != idx {
                return Err(TomoError::IncompleteDataset);
            }
            if c.clicks > c.trials {
                return Err(TomoError::BadCell {
                    input: c.input.label().into(),
                    basis: c.basis.label().into(),
                    port: c.port.label().into(),
                    clicks: c.clicks,
                    trials: c.trials,
                });
            }
        }
        Ok(Self { cells })
    }

    pub fn get(&self, input: InputState, basis: MeasBasis, port: Port) -> &CountCell {
        &self.cells[Self::cell_index(input, basis, port)]
    }

    /// Empirical click rate clicks/trials per cell, canonical order.
    pub fn rates(&self) -> Vec<f64> {
        self.cells.iter().map(|c| if c.trials > 0 { c.clicks as f64 / c.trials as f64 } else { 0.0 }).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "input,setting,port,trials,clicks")?;
        for c in &self.cells {
            writeln!(w, "{},{},{},{},{}", c.input.label(), c.basis.label(), c.port.label(), c.trials, c.clicks)?;
        }
        Ok(())
    }

    pub fn read_csv<R: std::io::BufRead>(r: R) -> Result<Self, TomoError> {
        let mut cells = Vec::with_capacity(36);
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if lineno == 0 {
                continue; // header
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let parse_err = |reason: &str| TomoError::CsvParse { line: lineno + 1, reason: reason.into() };
            if fields.len() != 5 {
                return Err(parse_err("expected 5 fields"));
            }
            let input = InputState::from_label(fields[0]).ok_or_else(|| parse_err("bad input"))?;
            let basis = MeasBasis::ALL
                .into_iter()
                .find(|b| b.label() == fields[1])
                .ok_or_else(|| parse_err("bad setting"))?;
            let port = Port::BOTH
                .into_iter()
                .find(|p| p.label() == fields[2])
                .ok_or_else(|| parse_err("bad port"))?;
            let trials = fields[3].parse().map_err(|_| parse_err("bad trials"))?;
            let clicks = fields[4].parse().map_err(|_| parse_err("bad clicks"))?;
            cells.push(CountCell { input, basis, port, trials, clicks });
        }
        Self::from_cells(cells)
    }
}

/// Exact click probabilities for each cell under a channel and noise model:
/// `p = signal * Tr(P E(rho_in)) + dark`. Canonical cell order.
pub fn exact_click_probabilities(chi: &ChiMatrix, noise: &NoiseModel) -> Vec<f64> {
    let signal = noise.signal_probability();
    let dark = noise.dark_prob_per_gate;
    let mut probs = Vec::with_capacity(36);
    for input in InputState::ALL {
        let rho_in = DensityMatrix::from_pure(&input.jones()).mat;
        let rho_out = chi.apply(&rho_in);
        for basis in MeasBasis::ALL {
            for port in Port::BOTH {
                let proj = measurement_projector(basis, port);
                let q = (proj * rho_out).trace().re.max(0.0);
                probs.push((signal * q + dark).clamp(0.0, 1.0));
            }
        }
    }
    probs
}

/// Simulate photon counting: per cell, clicks ~ Binomial(trials, p) with
/// `p = signal * Tr(P E(rho)) + dark`. Each cell draws from its own RNG
/// stream derived from `seed`, so the dataset is reproducible regardless
/// of evaluation order.
pub fn simulate_counts(
    chi: &ChiMatrix,
    noise: &NoiseModel,
    trials_per_setting: u64,
    seed: u64,
) -> Result<TomographyDataset, TomoError> {
    noise.validate()?;
    let probs = exact_click_probabilities(chi, noise);
    let mut cells = Vec::with_capacity(36);
    let mut idx = 0;
    for input in InputState::ALL {
        for basis in MeasBasis::ALL {
            for port in Port::BOTH {
                let p = probs[idx];
                let clicks = if p > 0.0 && trials_per_setting > 0 {
                    let dist = Binomial::new(trials_per_setting, p)
                        .map_err(|e| TomoError::InvalidNoise(format!("binomial: {e}")))?;
                    dist.sample(&mut stream_rng(seed, 0x434e5400 ^ idx as u64)) // "CNT"
                } else {
                    0
                };
                cells.push(CountCell { input, basis, port, trials: trials_per_setting, clicks });
                idx += 1;
            }
        }
    }
    TomographyDataset::from_cells(cells)
}

/// Per-setting normalized mean `(p+ - p-) / (p+ + p-)` from click rates in
/// canonical order. Returns None if a setting saw no clicks at all.
fn setting_mean(rates: &[f64], input: InputState, basis: MeasBasis) -> Option<f64> {
    let ip = rates[TomographyDataset::cell_index(input, basis, Port::Plus)];
    let im = rates[TomographyDataset::cell_index(input, basis, Port::Minus)];
    let tot = ip + im;
    if tot > 0.0 {
        Some((ip - im) / tot)
    } else {
        None
    }
}

/// Linear-inversion process reconstruction from raw click rates (canonical
/// cell order). The four inputs H, V, D, R determine the channel; A and L
/// serve as consistency checks (see [`inversion_consistency`]).
///
/// The output is Hermitian with trace near 1 but may have negative
/// eigenvalues on finite statistics.
pub fn linear_inversion_from_rates(rates: &[f64]) -> Result<ChiMatrix, TomoError> {
    assert_eq!(rates.len(), 36, "need all 36 cell rates");
    let rho_out = |input: InputState| -> Result<Mat2, TomoError> {
        let mut means = Vec::with_capacity(3);
        let mut any = false;
        for basis in MeasBasis::ALL {
            if let Some(s) = setting_mean(rates, input, basis) {
                means.push((basis, s));
                any = true;
            }
        }
        if !any {
            return Err(TomoError::SingularSystem(input.label().into()));
        }
        Ok(DensityMatrix::from_setting_means(&means).mat)
    };
    let rho_h = rho_out(InputState::H)?;
    let rho_v = rho_out(InputState::V)?;
    let rho_d = rho_out(InputState::D)?;
    let rho_r = rho_out(InputState::R)?;

    // E(|1><0|) = E(D) + i E(R) - (1+i)(E(H) + E(V))/2 for R = (H - iV)/sqrt(2).
    let one_i = Cx::new(1.0, 1.0);
    let e10 = rho_d + rho_r * Cx::i() - (rho_h + rho_v) * (one_i * Cx::new(0.5, 0.0));
    let e01 = e10.adjoint();

    // Choi matrix (in tensor out): blocks E(|k><l|) at (2k+a, 2l+b).
    let mut s = Mat4::zeros();
    let blocks = [(0usize, 0usize, rho_h), (0, 1, e01), (1, 0, e10), (1, 1, rho_v)];
    for (k, l, e) in blocks {
        for a in 0..2 {
            for b in 0..2 {
                s[(2 * k + a, 2 * l + b)] = e[(a, b)];
            }
        }
    }
    Ok(ChiMatrix::from_choi(&s))
}

/// Linear inversion from measured counts.
pub fn linear_inversion_chi(data: &TomographyDataset) -> Result<ChiMatrix, TomoError> {
    linear_inversion_from_rates(&data.rates())
}

/// Largest deviation between the measured setting means of the
/// consistency inputs A and L and the values predicted by `chi`.
pub fn inversion_consistency(data: &TomographyDataset, chi: &ChiMatrix) -> f64 {
    let rates = data.rates();
    let mut worst = 0.0f64;
    for input in [InputState::A, InputState::L] {
        let rho_out = chi.apply(&DensityMatrix::from_pure(&input.jones()).mat);
        let tr = rho_out.trace().re;
        for basis in MeasBasis::ALL {
            if let Some(measured) = setting_mean(&rates, input, basis) {
                let d = measurement_projector(basis, Port::Plus) - measurement_projector(basis, Port::Minus);
                let predicted = (d * rho_out).trace().re / tr;
                worst = worst.max((measured - predicted).abs());
            }
        }
    }
    worst
}

/// Process fidelity `Tr(chi_target chi)` against a pure (rank-1) target.
pub fn process_fidelity(chi: &ChiMatrix, target: &ChiMatrix) -> Result<f64, TomoError> {
    let purity = (target.mat * target.mat).trace().re;
    if (purity - 1.0).abs() > 1e-6 {
        return Err(TomoError::NonPureTarget(purity));
    }
    Ok((target.mat * chi.mat).trace().re)
}

/// Average fidelity of a qubit channel from its process fidelity:
/// `(2 F_p + 1) / 3`. Maps F_p = 1/2 to the classical bound 2/3 exactly.
pub fn average_fidelity(f_p: f64) -> f64 {
    (2.0 * f_p + 1.0) / 3.0
}

/// Mean and standard deviation of the MLE process fidelity (to the
/// identity process) under a parametric bootstrap of the dataset.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BootstrapStats {
    pub mean: f64,
    pub std: f64,
    pub n_resamples: usize,
}

/// Parametric bootstrap: resample every cell as
/// `clicks' ~ Binomial(trials, clicks/trials)`, re-run the CPTP MLE, and
/// accumulate the process fidelity to the identity channel. Resample `r`
/// uses the RNG stream `derive_seed(seed, r)`, so resamples are independent
/// and the run is reproducible under any `AFC_MEMSIM_THREADS`.
pub fn bootstrap_fidelity(
    data: &TomographyDataset,
    n_resamples: usize,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> Result<BootstrapStats, TomoError> {
    assert!(n_resamples >= 2, "need at least two resamples");
    let target = ChiMatrix::identity_process();
    let rates = data.rates();
    let fidelities: Vec<Result<f64, TomoError>> = indexed_map(n_resamples, |r| {
        let mut rng = stream_rng(derive_seed(seed, 0x424f4f54), r as u64); // "BOOT"
        let mut cells = Vec::with_capacity(36);
        for (idx, cell) in data.cells.iter().enumerate() {
            let p = rates[idx];
            let clicks = if p > 0.0 && cell.trials > 0 {
                Binomial::new(cell.trials, p.min(1.0))
                    .map_err(|e| TomoError::InvalidNoise(format!("binomial: {e}")))?
                    .sample(&mut rng)
            } else {
                0
            };
            cells.push(CountCell { clicks, ..*cell });
        }
        let resampled = TomographyDataset::from_cells(cells)?;
        let outcome = mle_chi(&resampled, tol, max_iter);
        process_fidelity(&outcome.chi, &target)
    });
    let mut values = Vec::with_capacity(n_resamples);
    for f in fidelities {
        values.push(f?);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    Ok(BootstrapStats { mean, std: var.sqrt(), n_resamples })
}

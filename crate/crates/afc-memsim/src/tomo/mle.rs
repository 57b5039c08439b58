//! Maximum-likelihood reconstruction of a CPTP channel from counts.
//!
//! The channel is parametrized by its Choi matrix `S` on (input tensor
//! output); complete positivity is `S >= 0` and trace preservation is
//! `Tr_out S = I`. Cell probabilities are `q = Tr(S G)` with
//! `G = rho_in^T tensor P_port`, and the fit maximizes the binomial
//! log-likelihood `sum_cells n ln q`.
//!
//! The update is the fixed-point iteration
//! `S <- N[ K R_b S R_b K ]`, `R_b = (1 + b R) / (1 + b)`,
//! `R = sum n/q G`, with `K = (Tr_out[R_b S R_b])^(-1/2) tensor I`
//! restoring trace preservation. The dilution parameter `b` starts at 1 and
//! is halved until the likelihood does not decrease, which keeps the
//! iteration monotone; `b -> 0` is a gradient step, so progress is always
//! possible away from the maximum.

use nalgebra::Matrix2;
use num_complex::Complex64;

use super::{ChiMatrix, Cx, Mat2, Mat4, TomographyDataset};
use crate::polar::{measurement_projector, InputState, MeasBasis, Port};
use crate::tomo::DensityMatrix;

/// Result of the MLE fit.
#[derive(Debug, Clone)]
pub struct MleOutcome {
    pub chi: ChiMatrix,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    /// Log-likelihood after every accepted iteration, for monotonicity
    /// checks.
    pub likelihoods: Vec<f64>,
}

/// Measurement operator of one cell in Choi space.
fn cell_operator(input: InputState, basis: MeasBasis, port: Port) -> Mat4 {
    let rho_t = DensityMatrix::from_pure(&input.jones()).mat.transpose();
    let proj = measurement_projector(basis, port);
    kron2(&rho_t, &proj)
}

/// Kronecker product of two 2x2 matrices, index = 2*first + second.
fn kron2(a: &Mat2, b: &Mat2) -> Mat4 {
    let mut out = Mat4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Trace over the output (second) factor: 2x2 on the input space.
fn trace_out(s: &Mat4) -> Mat2 {
    let mut out = Mat2::zeros();
    for i in 0..2 {
        for j in 0..2 {
            out[(i, j)] = s[(2 * i, 2 * j)] + s[(2 * i + 1, 2 * j + 1)];
        }
    }
    out
}

/// Inverse square root of a positive-definite 2x2 Hermitian matrix.
fn inv_sqrt2(m: &Mat2) -> Mat2 {
    let eig = m.symmetric_eigen();
    let mut d = Matrix2::<Complex64>::zeros();
    for i in 0..2 {
        let ev = eig.eigenvalues[i].max(1e-300);
        d[(i, i)] = Cx::new(1.0 / ev.sqrt(), 0.0);
    }
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

fn hermitize(m: &Mat4) -> Mat4 {
    (m + m.adjoint()) * Cx::new(0.5, 0.0)
}

fn log_likelihood(counts: &[f64], probs: &[f64]) -> f64 {
    counts
        .iter()
        .zip(probs.iter())
        .map(|(&n, &q)| if n > 0.0 { n * q.max(1e-300).ln() } else { 0.0 })
        .sum()
}

/// CPTP maximum-likelihood channel estimate.
///
/// Terminates when the relative likelihood gain drops below `tol` or after
/// `max_iter` accepted iterations; `converged` reports which. The returned
/// Choi iterate is positive semidefinite and trace-preserving up to
/// eigensolver round-off at every step, including on degenerate data such
/// as an all-zero-click dataset (which returns the initial fully
/// depolarizing channel unchanged).
pub fn mle_chi(data: &TomographyDataset, tol: f64, max_iter: usize) -> MleOutcome {
    let operators: Vec<Mat4> = data
        .cells
        .iter()
        .map(|c| cell_operator(c.input, c.basis, c.port))
        .collect();
    let counts: Vec<f64> = data.cells.iter().map(|c| c.clicks as f64).collect();
    let total: f64 = counts.iter().sum();

    // Fully depolarizing channel: Choi = I/2, the interior of the CPTP set.
    let mut s: Mat4 = Mat4::identity() * Cx::new(0.5, 0.0);

    let probs_of = |s: &Mat4| -> Vec<f64> {
        operators.iter().map(|g| (s * g).trace().re.max(0.0)).collect()
    };

    let mut probs = probs_of(&s);
    let mut ll = log_likelihood(&counts, &probs);
    let mut likelihoods = vec![ll];

    if total <= 0.0 {
        return MleOutcome {
            chi: ChiMatrix::from_choi(&s),
            converged: true,
            iterations: 0,
            log_likelihood: ll,
            likelihoods,
        };
    }

    let mut converged = false;
    let mut iterations = 0;
    'outer: for _ in 0..max_iter {
        // R = sum n/q G, scaled to an identity-like magnitude.
        let mut r = Mat4::zeros();
        for (i, g) in operators.iter().enumerate() {
            if counts[i] > 0.0 {
                r += g * Cx::new(counts[i] / probs[i].max(1e-300), 0.0);
            }
        }
        let scale = r.trace().re;
        if scale <= 0.0 {
            converged = true;
            break;
        }
        r *= Cx::new(4.0 / scale, 0.0);

        // Backtracking dilution keeps the likelihood monotone.
        let mut beta = 1.0f64;
        for _attempt in 0..60 {
            let t = (Mat4::identity() + r * Cx::new(beta, 0.0)) * Cx::new(1.0 / (1.0 + beta), 0.0);
            let m = hermitize(&(t * s * t.adjoint()));
            let lam = inv_sqrt2(&trace_out(&m));
            let k = kron2(&lam, &Mat2::identity());
            let candidate = hermitize(&(k * m * k.adjoint()));
            let cand_probs = probs_of(&candidate);
            let cand_ll = log_likelihood(&counts, &cand_probs);
            if cand_ll + 1e-12 * ll.abs() >= ll {
                let gain = cand_ll - ll;
                s = candidate;
                probs = cand_probs;
                ll = cand_ll;
                likelihoods.push(ll);
                iterations += 1;
                if gain.abs() <= tol * ll.abs().max(1.0) {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            beta *= 0.5;
            if beta < 1e-12 {
                // No ascent direction left: already at the maximum.
                converged = true;
                break 'outer;
            }
        }
    }

    MleOutcome { chi: ChiMatrix::from_choi(&s), converged, iterations, log_likelihood: ll, likelihoods }
}

/// Log-likelihood of a dataset under an arbitrary process matrix, for
/// comparing estimators on the same footing.
pub fn dataset_log_likelihood(data: &TomographyDataset, chi: &ChiMatrix) -> f64 {
    let s = chi.to_choi();
    let counts: Vec<f64> = data.cells.iter().map(|c| c.clicks as f64).collect();
    let probs: Vec<f64> = data
        .cells
        .iter()
        .map(|c| {
            let g = cell_operator(c.input, c.basis, c.port);
            (s * g).trace().re.max(0.0)
        })
        .collect();
    log_likelihood(&counts, &probs)
}

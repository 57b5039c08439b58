//! Simulation of an atomic-frequency-comb (AFC) optical quantum memory for
//! polarization qubits.
//!
//! The crate models the full storage experiment at desk scale:
//!
//! - [`comb`] — comb absorption spectra, causal transfer functions, and
//!   pulse propagation producing photon echoes;
//! - [`ensemble`] — a discrete-atom brute-force oracle for the collective
//!   rephasing, used to cross-check the transfer-function engine;
//! - [`polar`] — Jones calculus for the two-crystal memory sandwich and the
//!   polarization analysis stage;
//! - [`tomo`] — photon-counting simulation and quantum process tomography
//!   (linear inversion and CPTP maximum likelihood with bootstrap errors);
//! - [`runner`] — experiment orchestration, configuration, and reports;
//! - [`cli`] — the command-line interface.

pub mod cli;
pub mod comb;
pub mod config;
pub mod ensemble;
pub mod grid;
pub mod polar;
pub mod runner;
pub mod tomo;
pub mod util;

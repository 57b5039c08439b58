//! Jones calculus for the two-crystal polarization memory and its analysis
//! optics.
//!
//! The memory sandwich is crystal 1, a half-wave plate at 45 degrees, and
//! crystal 2. Each crystal stores only H-polarized light, so the H component
//! of the input is stored in the first crystal and the V component (swapped
//! to H by the plate) in the second. Behind the sample, a phase plate and a
//! second 45-degree half-wave plate undo the swap and compensate the
//! birefringent phase mismatch between the two crystals; a quarter-wave
//! plate, half-wave plate, and Wollaston prism analyze the result.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::comb::{propagate_pulse, CombError, CombSpec, PulseWaveform, TransferFunction};
use crate::grid::SpectralGrid;

pub type Cx = Complex64;
pub type Mat2 = Matrix2<Complex64>;

/// Polarization amplitude in the lab H/V basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesVector {
    pub h: Cx,
    pub v: Cx,
}

impl JonesVector {
    pub fn new(h: Cx, v: Cx) -> Self {
        Self { h, v }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.h.norm_sqr() + self.v.norm_sqr()
    }

    pub fn as_vector(&self) -> Vector2<Cx> {
        Vector2::new(self.h, self.v)
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm_sqr().sqrt();
        Self { h: self.h / n, v: self.v / n }
    }
}

/// A 2x2 polarization map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesMatrix {
    pub mat: Mat2,
}

impl JonesMatrix {
    pub fn new(mat: Mat2) -> Self {
        Self { mat }
    }

    pub fn identity() -> Self {
        Self { mat: Mat2::identity() }
    }

    pub fn apply(&self, s: &JonesVector) -> JonesVector {
        let out = self.mat * s.as_vector();
        JonesVector { h: out[0], v: out[1] }
    }

    pub fn compose(&self, inner: &JonesMatrix) -> JonesMatrix {
        JonesMatrix { mat: self.mat * inner.mat }
    }

    pub fn trace(&self) -> Cx {
        self.mat.trace()
    }

    /// Largest singular value; passive elements stay at or below 1.
    pub fn max_singular_value(&self) -> f64 {
        let sv = self.mat.singular_values();
        sv.iter().fold(0.0f64, |m, &s| m.max(s))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let u = self.mat.adjoint() * self.mat;
        (u - Mat2::identity()).norm() < tol
    }

    /// Process fidelity of this (pure, possibly lossy) map to the identity
    /// channel: `|Tr M|^2 / (2 Tr(M^dag M))`.
    pub fn fidelity_to_identity(&self) -> f64 {
        let tr = self.trace();
        let denom = (self.mat.adjoint() * self.mat).trace().re;
        if denom <= 0.0 {
            return 0.0;
        }
        tr.norm_sqr() / (2.0 * denom)
    }
}

/// Kind of wave plate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WavePlateKind {
    Half,
    Quarter,
}

/// Ideal wave-plate Jones matrix with the fast axis at `angle_deg` from H.
///
/// Conventions: a half plate at 0 maps (a, b) to (a, -b); a half plate at
/// 45 swaps H and V; a quarter plate at 0 is diag(1, -i).
pub fn waveplate(kind: WavePlateKind, angle_deg: f64) -> JonesMatrix {
    let th = angle_deg.to_radians();
    let (s, c) = th.sin_cos();
    match kind {
        WavePlateKind::Half => {
            let c2 = Cx::new(c * c - s * s, 0.0);
            let s2 = Cx::new(2.0 * s * c, 0.0);
            JonesMatrix::new(Mat2::new(c2, s2, s2, -c2))
        }
        WavePlateKind::Quarter => {
            // R(th) diag(1, -i) R(-th)
            let i = Cx::i();
            let cc = Cx::new(c * c, 0.0);
            let ss = Cx::new(s * s, 0.0);
            let sc = Cx::new(s * c, 0.0);
            JonesMatrix::new(Mat2::new(
                cc - i * ss,
                sc + i * sc,
                sc + i * sc,
                ss - i * cc,
            ))
        }
    }
}

/// Phase plate: relative retardance `theta` on V with respect to H.
pub fn phase_plate(theta_rad: f64) -> JonesMatrix {
    JonesMatrix::new(Mat2::new(
        Cx::new(1.0, 0.0),
        Cx::new(0.0, 0.0),
        Cx::new(0.0, 0.0),
        Cx::from_polar(1.0, theta_rad),
    ))
}

/// Complex pass/echo amplitudes of one memory crystal for both lab
/// polarizations, reduced to a single number per gate by a matched-filter
/// overlap with the input pulse (the probe is spectrally narrow compared to
/// the comb bandwidth).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryElement {
    pub pass_h: Cx,
    pub pass_v: Cx,
    pub echo_h: Cx,
    pub echo_v: Cx,
}

impl MemoryElement {
    /// Extract amplitudes from the comb transfer function of the crystal's
    /// H transition. The V polarization sees the same profile scaled by
    /// `v_depth_ratio` (residual absorption). `birefringent_phase_rad` is
    /// the extra propagation phase of V relative to H over the crystal
    /// length; it multiplies both the pass and echo amplitudes of V.
    pub fn from_comb(
        spec: &CombSpec,
        grid: &SpectralGrid,
        probe_fwhm_ns: f64,
        v_depth_ratio: f64,
        birefringent_phase_rad: f64,
    ) -> Result<Self, CombError> {
        let (pass_h, echo_h) = gate_amplitudes(spec, grid, probe_fwhm_ns)?;
        let v_spec = CombSpec {
            peak_optical_depth: spec.peak_optical_depth * v_depth_ratio,
            background_depth: spec.background_depth * v_depth_ratio,
            ..*spec
        };
        let (pass_v0, echo_v0) = if v_depth_ratio > 0.0 {
            gate_amplitudes(&v_spec, grid, probe_fwhm_ns)?
        } else {
            (Cx::new(1.0, 0.0), Cx::new(0.0, 0.0))
        };
        let bir = Cx::from_polar(1.0, birefringent_phase_rad);
        Ok(Self { pass_h, pass_v: pass_v0 * bir, echo_h, echo_v: echo_v0 * bir })
    }

    /// Element with explicit amplitudes (tests, ideal chains).
    pub fn ideal(pass: f64, echo: f64) -> Self {
        Self {
            pass_h: Cx::new(pass, 0.0),
            pass_v: Cx::new(1.0, 0.0),
            echo_h: Cx::new(echo, 0.0),
            echo_v: Cx::new(0.0, 0.0),
        }
    }

    fn pass_matrix(&self) -> JonesMatrix {
        JonesMatrix::new(Mat2::new(self.pass_h, Cx::default(), Cx::default(), self.pass_v))
    }

    fn echo_matrix(&self) -> JonesMatrix {
        JonesMatrix::new(Mat2::new(self.echo_h, Cx::default(), Cx::default(), self.echo_v))
    }
}

/// Matched-filter pass and first-echo amplitudes for one polarization.
fn gate_amplitudes(
    spec: &CombSpec,
    grid: &SpectralGrid,
    probe_fwhm_ns: f64,
) -> Result<(Cx, Cx), CombError> {
    let tf = TransferFunction::from_spec(spec, grid)?;
    let window = grid.window_ns();
    let pulse = PulseWaveform::gaussian(grid, -0.15 * window, 0.0, probe_fwhm_ns);
    let out = propagate_pulse(&pulse, &tf)?;
    let storage_ns = spec.storage_time_ns();
    let energy = pulse.energy() / pulse.dt_ns;
    let dt = pulse.dt_ns;
    let overlap = |delay_ns: f64| -> Cx {
        // <in(t - delay) | out(t)> / <in|in>, delay in whole samples.
        let shift = (delay_ns / dt).round() as usize;
        let mut acc = Cx::default();
        for i in shift..out.envelope.len() {
            acc += pulse.envelope[i - shift].conj() * out.envelope[i];
        }
        acc / energy
    };
    Ok((overlap(0.0), overlap(storage_ns)))
}

/// The fixed optical chain of the experiment: two memory crystals around a
/// 45-degree half-wave plate, then the compensation phase plate and the
/// second 45-degree half-wave plate. Analysis plates are applied per
/// measurement, not stored here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceChain {
    pub crystal1: MemoryElement,
    pub crystal2: MemoryElement,
    /// Sandwich half-wave plate angle, degrees (45 in the experiment).
    pub hwp3_deg: f64,
    /// Compensation phase plate retardance, rad.
    pub phase_plate_rad: f64,
    /// Output half-wave plate angle, degrees (45 in the experiment).
    pub hwp4_deg: f64,
}

impl DeviceChain {
    pub fn balanced(crystal: MemoryElement) -> Self {
        Self {
            crystal1: crystal,
            crystal2: crystal,
            hwp3_deg: 45.0,
            phase_plate_rad: 0.0,
            hwp4_deg: 45.0,
        }
    }

    fn output_optics(&self) -> JonesMatrix {
        waveplate(WavePlateKind::Half, self.hwp4_deg).compose(&phase_plate(self.phase_plate_rad))
    }

    /// Map seen by light in the first-echo time gate: exactly one of the two
    /// crystals recalls, the other transmits.
    pub fn echo_channel_matrix(&self) -> JonesMatrix {
        let w = waveplate(WavePlateKind::Half, self.hwp3_deg);
        let stored_first = self.crystal2.pass_matrix().compose(&w).compose(&self.crystal1.echo_matrix());
        let stored_second = self.crystal2.echo_matrix().compose(&w).compose(&self.crystal1.pass_matrix());
        let sandwich = JonesMatrix::new(stored_first.mat + stored_second.mat);
        self.output_optics().compose(&sandwich)
    }

    /// Map seen by the directly transmitted pulse (t near 0); removed by
    /// time gating in the tomography but needed for leakage accounting.
    pub fn transmitted_channel_matrix(&self) -> JonesMatrix {
        let w = waveplate(WavePlateKind::Half, self.hwp3_deg);
        let sandwich = self.crystal2.pass_matrix().compose(&w).compose(&self.crystal1.pass_matrix());
        self.output_optics().compose(&sandwich)
    }
}

/// Wollaston prism output port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Port {
    Plus,
    Minus,
}

impl Port {
    pub const BOTH: [Port; 2] = [Port::Plus, Port::Minus];

    pub fn label(&self) -> &'static str {
        match self {
            Port::Plus => "+",
            Port::Minus => "-",
        }
    }
}

/// Analysis basis realized by the quarter/half-wave plate pair before the
/// Wollaston prism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeasBasis {
    Z,
    X,
    Y,
}

impl MeasBasis {
    pub const ALL: [MeasBasis; 3] = [MeasBasis::Z, MeasBasis::X, MeasBasis::Y];

    /// (QWP2 angle, HWP5 angle) in degrees.
    pub fn plate_angles_deg(&self) -> (f64, f64) {
        match self {
            MeasBasis::Z => (0.0, 0.0),
            MeasBasis::X => (45.0, 22.5),
            MeasBasis::Y => (45.0, 0.0),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            MeasBasis::Z => "Z",
            MeasBasis::X => "X",
            MeasBasis::Y => "Y",
        }
    }
}

/// Detection probability of `state` at one Wollaston port for given
/// analysis plate angles: `|<port| HWP(hwp) QWP(qwp) |state>|^2`. A lossy
/// state (norm below 1) yields correspondingly smaller probabilities.
pub fn analyze_port(state: &JonesVector, qwp_deg: f64, hwp_deg: f64, port: Port) -> f64 {
    let plates = waveplate(WavePlateKind::Half, hwp_deg).compose(&waveplate(WavePlateKind::Quarter, qwp_deg));
    let out = plates.apply(state);
    match port {
        Port::Plus => out.h.norm_sqr(),
        Port::Minus => out.v.norm_sqr(),
    }
}

/// Effective projector of (basis, port) in the input space of the analysis
/// stage: `P = U^dag |port><port| U` with `U = HWP(h) QWP(q)`.
pub fn measurement_projector(basis: MeasBasis, port: Port) -> Mat2 {
    let (q, h) = basis.plate_angles_deg();
    let u = waveplate(WavePlateKind::Half, h).compose(&waveplate(WavePlateKind::Quarter, q));
    let e = match port {
        Port::Plus => Vector2::new(Cx::new(1.0, 0.0), Cx::new(0.0, 0.0)),
        Port::Minus => Vector2::new(Cx::new(0.0, 0.0), Cx::new(1.0, 0.0)),
    };
    let back = u.mat.adjoint() * e;
    back * back.adjoint()
}

/// The six cardinal polarization inputs used for tomography.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InputState {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl InputState {
    pub const ALL: [InputState; 6] =
        [InputState::H, InputState::V, InputState::D, InputState::A, InputState::R, InputState::L];

    pub fn jones(&self) -> JonesVector {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let r = Cx::new(s, 0.0);
        match self {
            InputState::H => JonesVector::new(Cx::new(1.0, 0.0), Cx::new(0.0, 0.0)),
            InputState::V => JonesVector::new(Cx::new(0.0, 0.0), Cx::new(1.0, 0.0)),
            InputState::D => JonesVector::new(r, r),
            InputState::A => JonesVector::new(r, -r),
            // R = (H - iV)/sqrt(2), L = (H + iV)/sqrt(2).
            InputState::R => JonesVector::new(r, Cx::new(0.0, -s)),
            InputState::L => JonesVector::new(r, Cx::new(0.0, s)),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            InputState::H => "H",
            InputState::V => "V",
            InputState::D => "D",
            InputState::A => "A",
            InputState::R => "R",
            InputState::L => "L",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|i| i.label() == s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cx(re: f64, im: f64) -> Cx {
        Cx::new(re, im)
    }

    #[test]
    fn half_plate_conventions() {
        let h45 = waveplate(WavePlateKind::Half, 45.0);
        let out = h45.apply(&InputState::H.jones());
        assert!((out.h.norm() < 1e-12) && (out.v - cx(1.0, 0.0)).norm() < 1e-12);

        let h0 = waveplate(WavePlateKind::Half, 0.0);
        let out = h0.apply(&JonesVector::new(cx(0.3, 0.1), cx(0.5, -0.2)));
        assert!((out.h - cx(0.3, 0.1)).norm() < 1e-12);
        assert!((out.v - cx(-0.5, 0.2)).norm() < 1e-12);
    }

    #[test]
    fn quarter_plate_makes_circular_light() {
        let q45 = waveplate(WavePlateKind::Quarter, 45.0);
        let out = q45.apply(&InputState::H.jones());
        assert_relative_eq!(out.h.norm(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_relative_eq!(out.v.norm(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        let rel = (out.v / out.h).arg();
        assert!((rel.abs() - std::f64::consts::FRAC_PI_2).abs() < 1e-12, "relative phase {rel}");
    }

    #[test]
    fn plates_are_unitary() {
        for k in [WavePlateKind::Half, WavePlateKind::Quarter] {
            for a in [0.0, 13.0, 22.5, 45.0, 77.0] {
                assert!(waveplate(k, a).is_unitary(1e-12), "{k:?} at {a}");
            }
        }
    }

    #[test]
    fn balanced_chain_echo_is_identity() {
        let m = MemoryElement::ideal(0.3, 0.2);
        let chain = DeviceChain::balanced(m);
        let echo = chain.echo_channel_matrix();
        let c = echo.mat[(0, 0)];
        assert!(c.norm() > 0.0);
        let dev = (echo.mat / c - Mat2::identity()).norm();
        assert!(dev < 1e-12, "off-identity {dev}");
        // Diagonal phases match exactly.
        let ratio = echo.mat[(0, 0)] / echo.mat[(1, 1)];
        assert!(ratio.arg().abs() < 1e-12);
    }

    #[test]
    fn crystal_imbalance_shows_as_diattenuation() {
        let m1 = MemoryElement::ideal(0.3, 0.2);
        let mut m2 = m1;
        m2.echo_h *= cx(0.9, 0.0);
        let chain = DeviceChain { crystal1: m1, crystal2: m2, ..DeviceChain::balanced(m1) };
        let echo = chain.echo_channel_matrix();
        let ratio = echo.mat[(0, 0)].norm() / echo.mat[(1, 1)].norm();
        assert_relative_eq!(ratio, 1.0 / 0.9, epsilon = 1e-12);
        // Closed-form pure-channel fidelity for diag(a, b):
        // |a + b|^2 / (2(|a|^2 + |b|^2)).
        let a = echo.mat[(0, 0)];
        let b = echo.mat[(1, 1)];
        let expect = (a + b).norm_sqr() / (2.0 * (a.norm_sqr() + b.norm_sqr()));
        assert_relative_eq!(echo.fidelity_to_identity(), expect, epsilon = 1e-12);
    }

    #[test]
    fn phase_plate_cancels_length_mismatch() {
        // Crystal lengths 1.4 and 1.41 mm differing only in birefringent
        // phase; the phase plate restores the identity channel exactly.
        let phase_per_mm = 2.1; // arbitrary rad/mm for the test
        let phi1 = 1.40 * phase_per_mm;
        let phi2 = 1.41 * phase_per_mm;
        let base = MemoryElement::ideal(0.3, 0.2);
        let with_phase = |m: MemoryElement, phi: f64| MemoryElement {
            pass_v: m.pass_v * Cx::from_polar(1.0, phi),
            echo_v: m.echo_v * Cx::from_polar(1.0, phi),
            ..m
        };
        let mut chain = DeviceChain {
            crystal1: with_phase(base, phi1),
            crystal2: with_phase(base, phi2),
            ..DeviceChain::balanced(base)
        };
        // Echo paths pick up pass_v of the other crystal, leaving a
        // diagonal phase offset delta = phi2 - phi1; the plate cancels it
        // exactly at theta = -delta.
        chain.phase_plate_rad = phi1 - phi2;
        let echo = chain.echo_channel_matrix();
        let ratio = echo.mat[(0, 0)] / echo.mat[(1, 1)];
        assert!(ratio.arg().abs() < 1e-12, "residual phase {}", ratio.arg());
    }

    #[test]
    fn transmitted_channel_limits() {
        // Opaque crystals kill the transmitted pulse.
        let opaque = MemoryElement { pass_h: cx(0.0, 0.0), ..MemoryElement::ideal(0.0, 0.0) };
        let chain = DeviceChain::balanced(opaque);
        assert!(chain.transmitted_channel_matrix().mat.norm() < 1e-12);
        // Transparent crystals give an identity transmitted channel.
        let clear = MemoryElement::ideal(1.0, 0.0);
        let chain = DeviceChain::balanced(clear);
        let m = chain.transmitted_channel_matrix();
        let c = m.mat[(0, 0)];
        assert!((m.mat / c - Mat2::identity()).norm() < 1e-12);
    }

    #[test]
    fn analysis_settings_select_cardinal_states() {
        let (qz, hz) = MeasBasis::Z.plate_angles_deg();
        assert_relative_eq!(analyze_port(&InputState::H.jones(), qz, hz, Port::Plus), 1.0, epsilon = 1e-12);
        assert!(analyze_port(&InputState::H.jones(), qz, hz, Port::Minus) < 1e-12);

        let (qx, hx) = MeasBasis::X.plate_angles_deg();
        assert_relative_eq!(analyze_port(&InputState::D.jones(), qx, hx, Port::Plus), 1.0, epsilon = 1e-12);
        assert!(analyze_port(&InputState::A.jones(), qx, hx, Port::Plus) < 1e-12);

        let (qy, hy) = MeasBasis::Y.plate_angles_deg();
        assert_relative_eq!(analyze_port(&InputState::R.jones(), qy, hy, Port::Plus), 1.0, epsilon = 1e-12);
        assert!(analyze_port(&InputState::L.jones(), qy, hy, Port::Plus) < 1e-12);

        // Unbiased case: D split 50/50 in Z.
        assert_relative_eq!(analyze_port(&InputState::D.jones(), qz, hz, Port::Plus), 0.5, epsilon = 1e-12);
        assert_relative_eq!(analyze_port(&InputState::D.jones(), qz, hz, Port::Minus), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn analysis_bases_are_mutually_unbiased() {
        // Eigenvectors of different bases overlap with probability 1/2.
        let vecs = |b: MeasBasis| {
            let (q, h) = b.plate_angles_deg();
            let u = waveplate(WavePlateKind::Half, h).compose(&waveplate(WavePlateKind::Quarter, q));
            let plus = u.mat.adjoint() * Vector2::new(cx(1.0, 0.0), cx(0.0, 0.0));
            let minus = u.mat.adjoint() * Vector2::new(cx(0.0, 0.0), cx(1.0, 0.0));
            [plus, minus]
        };
        for (i, a) in MeasBasis::ALL.iter().enumerate() {
            for b in MeasBasis::ALL.iter().skip(i + 1) {
                for va in vecs(*a) {
                    for vb in vecs(*b) {
                        let overlap = va.dotc(&vb).norm_sqr();
                        assert_relative_eq!(overlap, 0.5, epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn memory_element_from_comb_has_small_v_response() {
        let spec = CombSpec {
            tooth_spacing_mhz: 5.0,
            tooth_fwhm_mhz: 1.25,
            peak_optical_depth: 2.0,
            background_depth: 0.1,
            bandwidth_mhz: 100.0,
            tooth_shape: crate::comb::ToothShape::Gaussian,
        };
        let grid = SpectralGrid::new(8192, 819.2).unwrap();
        let m = MemoryElement::from_comb(&spec, &grid, 25.0, 0.05, 0.0).unwrap();
        assert!(m.echo_v.norm() < 0.1 * m.echo_h.norm(), "V echo should be weak");
        assert!(m.pass_v.norm() > m.pass_h.norm(), "V passes more than H");
        assert!(m.pass_h.norm() <= 1.0 && m.echo_h.norm() <= 1.0);
        // Transmitted amplitude follows the average absorption of the comb.
        let expect_pass = (-(spec.background_depth
            + spec.peak_optical_depth / spec.finesse() * (std::f64::consts::PI / (4.0 * crate::comb::LN2)).sqrt())
            / 2.0)
            .exp();
        assert_relative_eq!(m.pass_h.norm(), expect_pass, max_relative = 0.05);
    }

    proptest! {
        #[test]
        fn port_probabilities_sum_to_norm(
            hr in -1.0f64..1.0, hi in -1.0f64..1.0,
            vr in -1.0f64..1.0, vi in -1.0f64..1.0,
            q in 0.0f64..180.0, h in 0.0f64..180.0,
        ) {
            let state = JonesVector::new(cx(hr, hi), cx(vr, vi));
            let p = analyze_port(&state, q, h, Port::Plus) + analyze_port(&state, q, h, Port::Minus);
            prop_assert!((p - state.norm_sqr()).abs() < 1e-10);
        }

        #[test]
        fn passive_chain_never_amplifies(
            pass in 0.0f64..1.0, echo in 0.0f64..0.5, theta in 0.0f64..6.283,
        ) {
            // |pass|^2 + |echo|^2 <= 1 keeps the element passive.
            prop_assume!(pass * pass + echo * echo <= 1.0);
            let m = MemoryElement::ideal(pass, echo);
            let chain = DeviceChain { phase_plate_rad: theta, ..DeviceChain::balanced(m) };
            prop_assert!(chain.echo_channel_matrix().max_singular_value() <= 1.0 + 1e-9);
            prop_assert!(chain.transmitted_channel_matrix().max_singular_value() <= 1.0 + 1e-9);
        }
    }
}

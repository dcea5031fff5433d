//! Sparse complex state algebra for photons carrying spin and orbital
//! angular momentum.
//!
//! Single photons live in the tensor product of a two-dimensional circular
//! polarization space {L, R} and a truncated integer OAM space |m| ≤ `m_max`;
//! photon pairs live in the product of two such spaces. States are stored as
//! sparse amplitude maps because every state appearing in the experiments has
//! at most a handful of nonzero terms.
//!
//! Conventions pinned here and verified by tests:
//!
//! - storage basis is circular, `|H⟩ = (|L⟩ + |R⟩)/√2`;
//! - linear polarization at angle θ is `(e^{iθ}|L⟩ + e^{−iθ}|R⟩)/√2`;
//! - named constructors fix the global phase so that the first nonzero
//!   amplitude in canonical label order is real positive.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

/// Amplitudes below this magnitude may be dropped from the sparse maps.
pub const AMPLITUDE_EPS: f64 = 1e-15;
/// A state is considered normalized when Σ|a|² is within this of 1.
pub const NORM_TOLERANCE: f64 = 1e-12;
/// Squared norms at or below this are treated as zero.
pub const ZERO_NORM_EPS: f64 = 1e-30;
/// Default OAM truncation. The pipelines reach |m| = 4 at most (a q-plate
/// can push m = 2 to 4), so 6 leaves margin while keeping the space tiny.
pub const DEFAULT_M_MAX: i32 = 6;
/// Smallest admissible truncation; the experiments need m ∈ {−2, 0, +2}.
pub const MIN_M_MAX: i32 = 2;

/// Errors from state algebra operations.
#[derive(Debug, Error, PartialEq)]
pub enum HilbertError {
    /// The state has no usable norm (Σ|a|² ≤ 1e−30).
    #[error("state has zero norm (squared norm {0:.3e})")]
    ZeroNorm(f64),
}

/// Circular polarization (spin angular momentum) label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Spin {
    /// Left-circular polarization.
    L,
    /// Right-circular polarization.
    R,
}

impl Spin {
    /// The opposite circular polarization.
    pub fn flipped(self) -> Self {
        match self {
            Spin::L => Spin::R,
            Spin::R => Spin::L,
        }
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Spin::L => write!(f, "L"),
            Spin::R => write!(f, "R"),
        }
    }
}

/// One basis mode of the single-photon space: a spin and an OAM value.
///
/// Labels are totally ordered (spin first, then OAM) which gives states a
/// canonical serialization order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeLabel {
    pub spin: Spin,
    /// OAM in units of ħ.
    pub oam: i32,
}

impl ModeLabel {
    pub fn new(spin: Spin, oam: i32) -> Self {
        Self { spin, oam }
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{},{}⟩", self.spin, self.oam)
    }
}

/// Which arm of a two-photon state an operation refers to.
///
/// Arm identity is positional and never implicitly swapped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    A,
    B,
}

fn check_m_max(m_max: i32) {
    assert!(
        m_max >= MIN_M_MAX,
        "m_max must be at least {MIN_M_MAX}, got {m_max}"
    );
}

/// A pure single-photon state: sparse complex amplitudes over [`ModeLabel`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct SinglePhotonState {
    amps: BTreeMap<ModeLabel, Complex64>,
    m_max: i32,
}

impl SinglePhotonState {
    /// The zero state (no amplitudes) on the given truncated space.
    pub fn empty(m_max: i32) -> Self {
        check_m_max(m_max);
        Self {
            amps: BTreeMap::new(),
            m_max,
        }
    }

    /// A single basis ket |spin, oam⟩.
    ///
    /// Panics if |oam| exceeds `m_max`.
    pub fn basis(spin: Spin, oam: i32, m_max: i32) -> Self {
        check_m_max(m_max);
        assert!(oam.abs() <= m_max, "|oam| = {} exceeds m_max = {m_max}", oam.abs());
        let mut amps = BTreeMap::new();
        amps.insert(ModeLabel::new(spin, oam), Complex64::new(1.0, 0.0));
        Self { amps, m_max }
    }

    /// Build a state from explicit amplitudes. Duplicate labels are summed;
    /// amplitudes below [`AMPLITUDE_EPS`] are dropped. No phase
    /// canonicalization is applied.
    ///
    /// Panics if any label exceeds `m_max`.
    pub fn from_amplitudes<I>(amplitudes: I, m_max: i32) -> Self
    where
        I: IntoIterator<Item = (ModeLabel, Complex64)>,
    {
        check_m_max(m_max);
        let mut amps: BTreeMap<ModeLabel, Complex64> = BTreeMap::new();
        for (label, amp) in amplitudes {
            assert!(
                label.oam.abs() <= m_max,
                "label {label} exceeds m_max = {m_max}"
            );
            *amps.entry(label).or_insert(Complex64::ZERO) += amp;
        }
        amps.retain(|_, a| a.norm() >= AMPLITUDE_EPS);
        Self { amps, m_max }
    }

    /// Horizontal linear polarization at the given OAM: (|L,m⟩ + |R,m⟩)/√2.
    pub fn horizontal(oam: i32, m_max: i32) -> Self {
        let inv = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::from_amplitudes(
            [
                (ModeLabel::new(Spin::L, oam), inv),
                (ModeLabel::new(Spin::R, oam), inv),
            ],
            m_max,
        )
    }

    /// Vertical linear polarization at the given OAM, phase-canonical form
    /// (|L,m⟩ − |R,m⟩)/√2. Orthogonal to [`Self::horizontal`].
    pub fn vertical(oam: i32, m_max: i32) -> Self {
        let inv = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_amplitudes(
            [
                (ModeLabel::new(Spin::L, oam), Complex64::new(inv, 0.0)),
                (ModeLabel::new(Spin::R, oam), Complex64::new(-inv, 0.0)),
            ],
            m_max,
        )
    }

    /// Linear polarization at angle `theta`, phase-canonical form of
    /// (e^{iθ}|L,m⟩ + e^{−iθ}|R,m⟩)/√2.
    pub fn linear(theta: f64, oam: i32, m_max: i32) -> Self {
        let inv = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_amplitudes(
            [
                (
                    ModeLabel::new(Spin::L, oam),
                    Complex64::from_polar(inv, theta),
                ),
                (
                    ModeLabel::new(Spin::R, oam),
                    Complex64::from_polar(inv, -theta),
                ),
            ],
            m_max,
        )
        .canonical_phase()
    }

    /// The maximally entangled SAM-OAM state (|R,+2⟩ + |L,−2⟩)/√2 produced
    /// by a tuned q-plate from horizontally polarized m = 0 input.
    pub fn sam_oam_bell(m_max: i32) -> Self {
        let inv = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::from_amplitudes(
            [
                (ModeLabel::new(Spin::R, 2), inv),
                (ModeLabel::new(Spin::L, -2), inv),
            ],
            m_max,
        )
    }

    /// OAM truncation bound of this state's space.
    pub fn m_max(&self) -> i32 {
        self.m_max
    }

    /// Amplitude of a basis label (zero if absent).
    pub fn amplitude(&self, label: ModeLabel) -> Complex64 {
        self.amps.get(&label).copied().unwrap_or(Complex64::ZERO)
    }

    /// Iterate stored (label, amplitude) pairs in canonical label order.
    pub fn amplitudes(&self) -> impl Iterator<Item = (ModeLabel, Complex64)> + '_ {
        self.amps.iter().map(|(l, a)| (*l, *a))
    }

    /// Number of stored nonzero terms.
    pub fn term_count(&self) -> usize {
        self.amps.len()
    }

    pub fn squared_norm(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.squared_norm().sqrt()
    }

    /// True when Σ|a|² = 1 within [`NORM_TOLERANCE`].
    pub fn is_normalized(&self) -> bool {
        (self.squared_norm() - 1.0).abs() <= NORM_TOLERANCE
    }

    /// Rescale to unit norm, leaving relative phases untouched.
    pub fn normalized(&self) -> Result<Self, HilbertError> {
        let n2 = self.squared_norm();
        if n2 <= ZERO_NORM_EPS {
            return Err(HilbertError::ZeroNorm(n2));
        }
        Ok(self.scaled(Complex64::new(1.0 / n2.sqrt(), 0.0)))
    }

    /// Multiply every amplitude by a complex factor.
    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut amps = self.amps.clone();
        for a in amps.values_mut() {
            *a *= factor;
        }
        amps.retain(|_, a| a.norm() >= AMPLITUDE_EPS);
        Self {
            amps,
            m_max: self.m_max,
        }
    }

    /// Fix the global phase so the first nonzero amplitude in canonical
    /// label order is real positive.
    pub fn canonical_phase(&self) -> Self {
        match self.amps.values().next() {
            Some(first) if first.norm() >= AMPLITUDE_EPS => {
                self.scaled(Complex64::from_polar(1.0, -first.arg()))
            }
            _ => self.clone(),
        }
    }

    /// ⟨self|other⟩, conjugate-linear in `self`.
    ///
    /// States with different truncations are compared on the larger space.
    pub fn inner_product(&self, other: &Self) -> Complex64 {
        self.amps
            .iter()
            .filter_map(|(l, a)| other.amps.get(l).map(|b| a.conj() * b))
            .sum()
    }

    /// |⟨self|other⟩|² for normalized states.
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.inner_product(other).norm_sqr()
    }

    /// Tensor product with `other`: self becomes arm A, other arm B.
    pub fn tensor(&self, other: &Self) -> TwoPhotonState {
        let m_max = self.m_max.max(other.m_max);
        let mut amps = BTreeMap::new();
        for (la, a) in &self.amps {
            for (lb, b) in &other.amps {
                let amp = a * b;
                if amp.norm() >= AMPLITUDE_EPS {
                    amps.insert((*la, *lb), amp);
                }
            }
        }
        TwoPhotonState { amps, m_max }
    }

    /// Canonical text form: one `spin oam re im` line per stored amplitude,
    /// in label order, with the global phase canonicalized first. Used for
    /// golden-file comparisons.
    pub fn to_canonical_text(&self) -> String {
        let canon = self.canonical_phase();
        let mut out = String::new();
        for (label, amp) in canon.amplitudes() {
            out.push_str(&format!("{} {} {} {}\n", label.spin, label.oam, amp.re, amp.im));
        }
        out
    }
}

/// A pure two-photon state: sparse amplitudes over pairs of [`ModeLabel`]s
/// for arms A and B.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhotonState {
    amps: BTreeMap<(ModeLabel, ModeLabel), Complex64>,
    m_max: i32,
}

impl TwoPhotonState {
    pub fn empty(m_max: i32) -> Self {
        check_m_max(m_max);
        Self {
            amps: BTreeMap::new(),
            m_max,
        }
    }

    /// Build from explicit pair amplitudes; duplicates are summed and tiny
    /// amplitudes dropped. No phase canonicalization.
    pub fn from_amplitudes<I>(amplitudes: I, m_max: i32) -> Self
    where
        I: IntoIterator<Item = ((ModeLabel, ModeLabel), Complex64)>,
    {
        check_m_max(m_max);
        let mut amps: BTreeMap<(ModeLabel, ModeLabel), Complex64> = BTreeMap::new();
        for ((la, lb), amp) in amplitudes {
            assert!(
                la.oam.abs() <= m_max && lb.oam.abs() <= m_max,
                "label ({la}, {lb}) exceeds m_max = {m_max}"
            );
            *amps.entry((la, lb)).or_insert(Complex64::ZERO) += amp;
        }
        amps.retain(|_, a| a.norm() >= AMPLITUDE_EPS);
        Self { amps, m_max }
    }

    pub fn m_max(&self) -> i32 {
        self.m_max
    }

    pub fn amplitude(&self, arm_a: ModeLabel, arm_b: ModeLabel) -> Complex64 {
        self.amps
            .get(&(arm_a, arm_b))
            .copied()
            .unwrap_or(Complex64::ZERO)
    }

    pub fn amplitudes(&self) -> impl Iterator<Item = ((ModeLabel, ModeLabel), Complex64)> + '_ {
        self.amps.iter().map(|(l, a)| (*l, *a))
    }

    pub fn term_count(&self) -> usize {
        self.amps.len()
    }

    pub fn squared_norm(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.squared_norm().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.squared_norm() - 1.0).abs() <= NORM_TOLERANCE
    }

    pub fn normalized(&self) -> Result<Self, HilbertError> {
        let n2 = self.squared_norm();
        if n2 <= ZERO_NORM_EPS {
            return Err(HilbertError::ZeroNorm(n2));
        }
        Ok(self.scaled(Complex64::new(1.0 / n2.sqrt(), 0.0)))
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut amps = self.amps.clone();
        for a in amps.values_mut() {
            *a *= factor;
        }
        amps.retain(|_, a| a.norm() >= AMPLITUDE_EPS);
        Self {
            amps,
            m_max: self.m_max,
        }
    }

    pub fn canonical_phase(&self) -> Self {
        match self.amps.values().next() {
            Some(first) if first.norm() >= AMPLITUDE_EPS => {
                self.scaled(Complex64::from_polar(1.0, -first.arg()))
            }
            _ => self.clone(),
        }
    }

    pub fn inner_product(&self, other: &Self) -> Complex64 {
        self.amps
            .iter()
            .filter_map(|(l, a)| other.amps.get(l).map(|b| a.conj() * b))
            .sum()
    }

    pub fn fidelity(&self, other: &Self) -> f64 {
        self.inner_product(other).norm_sqr()
    }

    /// Project one arm onto `bra` and return the unnormalized conditional
    /// state of the other arm together with the outcome probability (the
    /// squared norm of the conditional state).
    ///
    /// `bra` must be normalized. Returns [`HilbertError::ZeroNorm`] when the
    /// projection is (numerically) orthogonal.
    pub fn project_arm(
        &self,
        arm: Arm,
        bra: &SinglePhotonState,
    ) -> Result<(SinglePhotonState, f64), HilbertError> {
        debug_assert!(bra.is_normalized(), "projection bra must be normalized");
        let mut amps: BTreeMap<ModeLabel, Complex64> = BTreeMap::new();
        for ((la, lb), amp) in &self.amps {
            let (projected, kept) = match arm {
                Arm::A => (la, lb),
                Arm::B => (lb, la),
            };
            let overlap = bra.amplitude(*projected).conj();
            if overlap.norm() == 0.0 {
                continue;
            }
            *amps.entry(*kept).or_insert(Complex64::ZERO) += overlap * amp;
        }
        amps.retain(|_, a| a.norm() >= AMPLITUDE_EPS);
        let state = SinglePhotonState {
            amps,
            m_max: self.m_max,
        };
        let probability = state.squared_norm();
        if probability <= ZERO_NORM_EPS {
            return Err(HilbertError::ZeroNorm(probability));
        }
        Ok((state, probability))
    }

    /// Canonical text form: `spinA oamA spinB oamB re im` lines in label
    /// order, global phase canonicalized.
    pub fn to_canonical_text(&self) -> String {
        let canon = self.canonical_phase();
        let mut out = String::new();
        for ((la, lb), amp) in canon.amplitudes() {
            out.push_str(&format!(
                "{} {} {} {} {} {}\n",
                la.spin, la.oam, lb.spin, lb.oam, amp.re, amp.im
            ));
        }
        out
    }
}

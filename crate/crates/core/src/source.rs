//! Initial states: the down-conversion pair, the heralded single photon,
//! and the m = ±2 post-selected pair.
//!
//! The pair source emits OAM-entangled, horizontally polarized photons
//! Σ_m c_|m| |m⟩_A |−m⟩_B |H⟩_A |H⟩_B. For |m| > 0 the (m, −m) and (−m, m)
//! terms carry equal weight c_|m|, so the stored spectrum is normalized as
//! c₀² + 2·Σ_{m>0} c_m² = 1; a normalization audit test pins this reading.

use thiserror::Error;

use crate::hilbert::{
    ModeLabel, SinglePhotonState, Spin, TwoPhotonState, DEFAULT_M_MAX, ZERO_NORM_EPS,
};
use num_complex::Complex64;

/// Errors from source construction.
#[derive(Debug, Error, PartialEq)]
pub enum SourceError {
    #[error("Schmidt coefficient c_{index} is negative ({value})")]
    NegativeCoefficient { index: usize, value: f64 },
    #[error("Schmidt spectrum has zero norm")]
    ZeroSpectrum,
    /// The requested sector carries no weight (e.g. heralding on m = 0
    /// with c₀ = 0).
    #[error("Schmidt sector |m| = {sector} has zero weight")]
    ZeroNorm { sector: u32 },
}

/// Real non-negative Schmidt coefficients c_|m| of the pair source,
/// indexed by |m| = 0, 1, 2, … and normalized so the emitted two-photon
/// state has unit norm (phases are absorbed into the basis definitions).
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtSpectrum {
    coefficients: Vec<f64>,
    raw_deviation: f64,
}

impl SchmidtSpectrum {
    /// Build a spectrum from raw non-negative coefficients, rescaling to the
    /// normalization above. The pre-normalization deviation |Σ − 1| is kept
    /// for callers that want to warn about off-normalized input.
    pub fn new(raw: &[f64]) -> Result<Self, SourceError> {
        for (index, &value) in raw.iter().enumerate() {
            if value < 0.0 {
                return Err(SourceError::NegativeCoefficient { index, value });
            }
        }
        let total: f64 = raw
            .iter()
            .enumerate()
            .map(|(m, c)| if m == 0 { c * c } else { 2.0 * c * c })
            .sum();
        if total <= ZERO_NORM_EPS {
            return Err(SourceError::ZeroSpectrum);
        }
        let scale = total.sqrt();
        let coefficients = raw.iter().map(|c| c / scale).collect();
        Ok(Self {
            coefficients,
            raw_deviation: (total - 1.0).abs(),
        })
    }

    /// Plausible decaying spectrum for demos, c_|m|² ∝ 1/(1 + |m|)²
    /// truncated at the default m_max.
    pub fn default_demo() -> Self {
        let raw: Vec<f64> = (0..=DEFAULT_M_MAX as usize)
            .map(|m| 1.0 / (1.0 + m as f64))
            .collect();
        Self::new(&raw).expect("demo spectrum is valid")
    }

    /// c_|m| (zero beyond the stored truncation).
    pub fn coefficient(&self, m: i32) -> f64 {
        self.coefficients
            .get(m.unsigned_abs() as usize)
            .copied()
            .unwrap_or(0.0)
    }

    /// Normalized coefficients indexed by |m|.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Largest |m| with a stored coefficient.
    pub fn max_m(&self) -> i32 {
        self.coefficients.len() as i32 - 1
    }

    /// |Σ c² − 1| of the caller-supplied coefficients before rescaling.
    pub fn normalization_deviation(&self) -> f64 {
        self.raw_deviation
    }

    /// Probability that a pair lands in the |m| sector: c₀² for m = 0,
    /// 2·c_|m|² otherwise. Sums to 1 over all sectors.
    pub fn sector_probability(&self, m: i32) -> f64 {
        let c = self.coefficient(m);
        if m == 0 {
            c * c
        } else {
            2.0 * c * c
        }
    }

    /// Truncation bound for states built from this spectrum: the default
    /// bound, enlarged if needed so a q = 1 plate can never overflow.
    pub fn state_m_max(&self) -> i32 {
        DEFAULT_M_MAX.max(self.max_m() + 2)
    }
}

/// The emitted two-photon state Σ_m c_|m| |m⟩_A |−m⟩_B with both photons
/// horizontally polarized. Always normalized and symmetric under the
/// simultaneous exchange (A ↔ B, m ↔ −m).
pub fn spdc_state(spectrum: &SchmidtSpectrum) -> TwoPhotonState {
    let m_max = spectrum.state_m_max();
    let mut terms: Vec<((ModeLabel, ModeLabel), Complex64)> = Vec::new();
    for m in -spectrum.max_m()..=spectrum.max_m() {
        let c = spectrum.coefficient(m);
        if c == 0.0 {
            continue;
        }
        // |H⟩|H⟩ expanded in the circular basis: four terms of weight 1/2
        for spin_a in [Spin::L, Spin::R] {
            for spin_b in [Spin::L, Spin::R] {
                terms.push((
                    (ModeLabel::new(spin_a, m), ModeLabel::new(spin_b, -m)),
                    Complex64::new(0.5 * c, 0.0),
                ));
            }
        }
    }
    TwoPhotonState::from_amplitudes(terms, m_max)
}

/// Herald a single photon on arm A by coupling photon B into a single-mode
/// fiber: both photons collapse to m = 0, leaving |H,0⟩_A. Returns the
/// heralded state and the herald probability c₀².
pub fn heralded_single(
    spectrum: &SchmidtSpectrum,
) -> Result<(SinglePhotonState, f64), SourceError> {
    let probability = spectrum.sector_probability(0);
    if probability <= ZERO_NORM_EPS {
        return Err(SourceError::ZeroNorm { sector: 0 });
    }
    Ok((
        SinglePhotonState::horizontal(0, spectrum.state_m_max()),
        probability,
    ))
}

/// Post-select the |m| = 2 sector of the pair: the normalized state
/// (|2⟩_A|−2⟩_B + |−2⟩_A|2⟩_B)/√2 ⊗ |H⟩|H⟩ and its probability 2·c₂².
pub fn postselect_pm2_pair(
    spectrum: &SchmidtSpectrum,
) -> Result<(TwoPhotonState, f64), SourceError> {
    let probability = spectrum.sector_probability(2);
    if probability <= ZERO_NORM_EPS {
        return Err(SourceError::ZeroNorm { sector: 2 });
    }
    let m_max = spectrum.state_m_max();
    let w = Complex64::new(0.5 * std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut terms = Vec::new();
    for (ma, mb) in [(2, -2), (-2, 2)] {
        for spin_a in [Spin::L, Spin::R] {
            for spin_b in [Spin::L, Spin::R] {
                terms.push((
                    (ModeLabel::new(spin_a, ma), ModeLabel::new(spin_b, mb)),
                    w,
                ));
            }
        }
    }
    Ok((TwoPhotonState::from_amplitudes(terms, m_max), probability))
}

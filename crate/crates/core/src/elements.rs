//! Optical elements as sparse linear maps on the single-photon space.
//!
//! Every component of the bench is an [`ElementOp`]: a unitary (q-plate,
//! wave plate, grating) or a projective filter (polarizers, sector hologram
//! with fiber, single-mode fiber coupler). Projector outputs are left
//! unnormalized so the squared norm of the result carries the transmission
//! probability; renormalization is an explicit separate step.
//!
//! The q-plate rule |L,m⟩ → |R,m+2q⟩, |R,m⟩ → |L,m−2q⟩ is the sign
//! convention that turns |H,0⟩ into (|R,+2⟩ + |L,−2⟩)/√2; the opposite
//! choice would flip χ → −χ everywhere without changing any probability.
//! A regression test pins this choice.

use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;
use thiserror::Error;

use crate::hilbert::{Arm, ModeLabel, SinglePhotonState, Spin, TwoPhotonState, AMPLITUDE_EPS};

/// Errors from applying an element to a state.
#[derive(Debug, Error, PartialEq)]
pub enum ElementError {
    /// The element would populate an OAM value beyond the state's
    /// truncation; the caller must enlarge `m_max`.
    #[error("element '{name}' maps {label} to OAM {target_oam}, beyond m_max = {m_max}")]
    OamOverflow {
        name: String,
        label: ModeLabel,
        target_oam: i32,
        m_max: i32,
    },
}

/// Whether an element preserves norm or filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Unitary,
    Projector,
}

#[derive(Debug, Clone)]
enum Action {
    /// Geometric deflection only; no modal effect.
    Identity,
    /// |L,m⟩ → eff·|R,m+2q⟩, |R,m⟩ → eff·|L,m−2q⟩.
    QPlate { q: i32, efficiency: f64 },
    /// Spin-flip unitary: |L,m⟩ → c_lr·|R,m⟩, |R,m⟩ → c_rl·|L,m⟩.
    SpinExchange { l_to_r: Complex64, r_to_l: Complex64 },
    /// Rank-1 spin projector |k⟩⟨k| ⊗ I_oam with ket = (k_L, k_R).
    SpinProjector { ket: [Complex64; 2] },
    /// ⟨χ| on the {+2, −2} OAM subspace, output relabeled to m = 0,
    /// spin untouched. Everything outside m = ±2 is annihilated.
    OamChiAnalyzer { chi: f64 },
    /// Projector onto m = 0, identity on spin.
    OamZeroFilter,
}

/// A linear map (unitary or projective) on the single-photon space,
/// attachable to either arm of a photon pair.
#[derive(Debug, Clone)]
pub struct ElementOp {
    kind: OpKind,
    name: String,
    action: Action,
}

/// Tuned q-plate of charge `q`: |L,m⟩ → |R,m+2q⟩ and |R,m⟩ → |L,m−2q⟩ with
/// unit amplitude. All scenarios here use q = 1; the parameter is kept
/// general.
pub fn qplate(q: u32) -> ElementOp {
    qplate_with_efficiency(q, 1.0)
}

/// q-plate with a conversion-efficiency scalar multiplying all output
/// amplitudes. The default plate is ideal (efficiency 1).
pub fn qplate_with_efficiency(q: u32, efficiency: f64) -> ElementOp {
    assert!(q >= 1, "q-plate charge must be a positive integer");
    assert!(
        (0.0..=1.0).contains(&efficiency),
        "q-plate efficiency must lie in [0, 1]"
    );
    ElementOp {
        kind: OpKind::Unitary,
        name: format!("qplate(q={q})"),
        action: Action::QPlate {
            q: q as i32,
            efficiency,
        },
    }
}

/// Half-wave plate with its axis at `axis_angle`.
///
/// In the circular basis: |L⟩ → e^{−2iα}|R⟩, |R⟩ → e^{+2iα}|L⟩, identity on
/// OAM. Followed by `polarizer(0.0)` this transmits exactly the linear
/// polarization at angle 2·`axis_angle`, i.e. it matches
/// [`pol_analyzer`]`(2·axis_angle)` in every transmission probability.
pub fn half_wave_plate(axis_angle: f64) -> ElementOp {
    ElementOp {
        kind: OpKind::Unitary,
        name: format!("hwp({axis_angle})"),
        action: Action::SpinExchange {
            l_to_r: Complex64::from_polar(1.0, -2.0 * axis_angle),
            r_to_l: Complex64::from_polar(1.0, 2.0 * axis_angle),
        },
    }
}

/// Ideal linear polarizer at `axis_angle`: rank-1 spin projector onto
/// (e^{ia}|L⟩ + e^{−ia}|R⟩)/√2, identity on OAM.
pub fn polarizer(axis_angle: f64) -> ElementOp {
    ElementOp {
        kind: OpKind::Projector,
        name: format!("polarizer({axis_angle})"),
        action: Action::SpinProjector {
            ket: linear_ket(axis_angle),
        },
    }
}

/// Polarization analyzer at angle `theta`: projector onto the linear
/// polarization state (e^{iθ}|L⟩ + e^{−iθ}|R⟩)/√2, identity on OAM.
///
/// Same projector as [`polarizer`]`(theta)`; kept as a separate constructor
/// because it models the HWP-plus-fixed-polarizer combination as a whole.
pub fn pol_analyzer(theta: f64) -> ElementOp {
    ElementOp {
        kind: OpKind::Projector,
        name: format!("pol_analyzer({theta})"),
        action: Action::SpinProjector {
            ket: linear_ket(theta),
        },
    }
}

/// Four-sector hologram at orientation `chi` followed by fiber coupling:
/// projects the {+2, −2} OAM subspace onto
/// (e^{2iχ}|+2⟩ + e^{−2iχ}|−2⟩)/√2 and relabels the output to m = 0, spin
/// untouched. Amplitudes outside m = ±2 are annihilated.
///
/// Because of the relabeling this is a partial isometry, not an idempotent
/// map: its own m = 0 output lies in the kernel of a second pass.
pub fn sector_hologram_analyzer(chi: f64) -> ElementOp {
    ElementOp {
        kind: OpKind::Projector,
        name: format!("sector_hologram({chi})"),
        action: Action::OamChiAnalyzer { chi },
    }
}

/// Single-mode fiber coupler: projector onto m = 0, identity on spin.
pub fn smf_coupler() -> ElementOp {
    ElementOp {
        kind: OpKind::Projector,
        name: "smf_coupler".to_string(),
        action: Action::OamZeroFilter,
    }
}

/// Uniform grating: deflects the beam geometrically without affecting the
/// transverse mode — the identity map.
pub fn uniform_grating() -> ElementOp {
    ElementOp {
        kind: OpKind::Unitary,
        name: "uniform_grating".to_string(),
        action: Action::Identity,
    }
}

fn linear_ket(angle: f64) -> [Complex64; 2] {
    [
        Complex64::from_polar(FRAC_1_SQRT_2, angle),
        Complex64::from_polar(FRAC_1_SQRT_2, -angle),
    ]
}

fn spin_index(spin: Spin) -> usize {
    match spin {
        Spin::L => 0,
        Spin::R => 1,
    }
}

impl ElementOp {
    pub fn kind(&self) -> OpKind {
        self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// The sparse column of the map for one input basis label: the list of
    /// (output label, coefficient) pairs.
    fn action_on(&self, label: ModeLabel) -> Vec<(ModeLabel, Complex64)> {
        match &self.action {
            Action::Identity => vec![(label, Complex64::new(1.0, 0.0))],
            Action::QPlate { q, efficiency } => {
                let (spin, shift) = match label.spin {
                    Spin::L => (Spin::R, 2 * q),
                    Spin::R => (Spin::L, -2 * q),
                };
                vec![(
                    ModeLabel::new(spin, label.oam + shift),
                    Complex64::new(*efficiency, 0.0),
                )]
            }
            Action::SpinExchange { l_to_r, r_to_l } => {
                let (spin, coef) = match label.spin {
                    Spin::L => (Spin::R, *l_to_r),
                    Spin::R => (Spin::L, *r_to_l),
                };
                vec![(ModeLabel::new(spin, label.oam), coef)]
            }
            Action::SpinProjector { ket } => {
                let overlap = ket[spin_index(label.spin)].conj();
                vec![
                    (ModeLabel::new(Spin::L, label.oam), ket[0] * overlap),
                    (ModeLabel::new(Spin::R, label.oam), ket[1] * overlap),
                ]
            }
            Action::OamChiAnalyzer { chi } => match label.oam {
                2 => vec![(
                    ModeLabel::new(label.spin, 0),
                    Complex64::from_polar(FRAC_1_SQRT_2, -2.0 * chi),
                )],
                -2 => vec![(
                    ModeLabel::new(label.spin, 0),
                    Complex64::from_polar(FRAC_1_SQRT_2, 2.0 * chi),
                )],
                _ => Vec::new(),
            },
            Action::OamZeroFilter => {
                if label.oam == 0 {
                    vec![(label, Complex64::new(1.0, 0.0))]
                } else {
                    Vec::new()
                }
            }
        }
    }

    /// Apply the element to a single-photon state. The output is left
    /// unnormalized; for projectors its squared norm is the transmission
    /// probability.
    pub fn apply(&self, state: &SinglePhotonState) -> Result<SinglePhotonState, ElementError> {
        let m_max = state.m_max();
        let mut terms: Vec<(ModeLabel, Complex64)> = Vec::new();
        for (label, amp) in state.amplitudes() {
            for (target, coef) in self.action_on(label) {
                let contribution = amp * coef;
                if contribution.norm() < AMPLITUDE_EPS {
                    continue;
                }
                if target.oam.abs() > m_max {
                    return Err(ElementError::OamOverflow {
                        name: self.name.clone(),
                        label,
                        target_oam: target.oam,
                        m_max,
                    });
                }
                terms.push((target, contribution));
            }
        }
        Ok(SinglePhotonState::from_amplitudes(terms, m_max))
    }

    /// Apply the element to one arm of a two-photon state, acting as the
    /// identity on the other arm.
    pub fn apply_arm(
        &self,
        pair: &TwoPhotonState,
        arm: Arm,
    ) -> Result<TwoPhotonState, ElementError> {
        let m_max = pair.m_max();
        let mut terms: Vec<((ModeLabel, ModeLabel), Complex64)> = Vec::new();
        for ((la, lb), amp) in pair.amplitudes() {
            let acted = match arm {
                Arm::A => la,
                Arm::B => lb,
            };
            for (target, coef) in self.action_on(acted) {
                let contribution = amp * coef;
                if contribution.norm() < AMPLITUDE_EPS {
                    continue;
                }
                if target.oam.abs() > m_max {
                    return Err(ElementError::OamOverflow {
                        name: self.name.clone(),
                        label: acted,
                        target_oam: target.oam,
                        m_max,
                    });
                }
                let pair_label = match arm {
                    Arm::A => (target, lb),
                    Arm::B => (la, target),
                };
                terms.push((pair_label, contribution));
            }
        }
        Ok(TwoPhotonState::from_amplitudes(terms, m_max))
    }
}

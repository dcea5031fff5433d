//! Property tests for the state algebra and element maps: inner-product
//! symmetry, normalization idempotence, tensor/projection consistency,
//! unitarity, projector idempotence, analyzer equivalence, and the
//! hologram probability law against an independent 2×2 computation.

use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use spinorbit::elements::{
    half_wave_plate, pol_analyzer, polarizer, qplate, sector_hologram_analyzer, smf_coupler,
    uniform_grating,
};
use spinorbit::hilbert::{Arm, ModeLabel, SinglePhotonState, Spin, DEFAULT_M_MAX};

fn arb_complex() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn arb_label(m_range: i32) -> impl Strategy<Value = ModeLabel> {
    (
        prop_oneof![Just(Spin::L), Just(Spin::R)],
        -m_range..=m_range,
    )
        .prop_map(|(spin, oam)| ModeLabel::new(spin, oam))
}

/// Random nonzero state supported on |m| ≤ m_range.
fn arb_state(m_range: i32) -> impl Strategy<Value = SinglePhotonState> {
    prop::collection::vec((arb_label(m_range), arb_complex()), 1..6).prop_filter_map(
        "state must have usable norm",
        |terms| {
            let state = SinglePhotonState::from_amplitudes(terms, DEFAULT_M_MAX);
            state.normalized().ok()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn inner_product_hermitian(a in arb_state(4), b in arb_state(4)) {
        let ab = a.inner_product(&b);
        let ba = b.inner_product(&a);
        prop_assert!((ab - ba.conj()).norm() < 1e-12);
        let aa = a.inner_product(&a);
        prop_assert!(aa.im.abs() < 1e-12);
        prop_assert!(aa.re >= 0.0);
    }

    #[test]
    fn normalize_is_idempotent(a in arb_state(4)) {
        let once = a.normalized().unwrap();
        let twice = once.normalized().unwrap();
        let distance: f64 = once
            .amplitudes()
            .map(|(l, amp)| (amp - twice.amplitude(l)).norm_sqr())
            .sum();
        prop_assert!(distance.sqrt() < 1e-12);
    }

    /// Tensor then project with a basis bra on one arm recovers the other
    /// factor up to global phase.
    #[test]
    fn tensor_then_project_recovers_factor(
        a in arb_state(4),
        spin in prop_oneof![Just(Spin::L), Just(Spin::R)],
        oam in -4..=4i32,
    ) {
        let b = SinglePhotonState::basis(spin, oam, DEFAULT_M_MAX);
        let pair = a.tensor(&b);
        let (conditional, probability) = pair.project_arm(Arm::B, &b).unwrap();
        prop_assert!((probability - 1.0).abs() < 1e-12);
        let recovered = conditional.normalized().unwrap();
        prop_assert!((recovered.fidelity(&a) - 1.0).abs() < 1e-12);
    }

    /// Projection probabilities over a complete orthonormal bra set sum
    /// to 1 for any normalized pair state, entangled or not.
    #[test]
    fn projection_probabilities_complete(
        a in arb_state(3),
        b in arb_state(3),
        c in arb_state(3),
        d in arb_state(3),
        weight in arb_complex(),
    ) {
        // superpose two product states to get genuine entanglement
        let sum = spinorbit::TwoPhotonState::from_amplitudes(
            a.tensor(&b)
                .amplitudes()
                .chain(c.tensor(&d).scaled(weight).amplitudes()),
            DEFAULT_M_MAX,
        );
        prop_assume!(sum.squared_norm() > 1e-6);
        let pair = sum.normalized().unwrap();
        let mut total = 0.0;
        for spin in [Spin::L, Spin::R] {
            for oam in -DEFAULT_M_MAX..=DEFAULT_M_MAX {
                let bra = SinglePhotonState::basis(spin, oam, DEFAULT_M_MAX);
                if let Ok((_, p)) = pair.project_arm(Arm::B, &bra) {
                    total += p;
                }
            }
        }
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    /// Unitary elements preserve the norm away from the truncation
    /// boundary.
    #[test]
    fn unitaries_preserve_norm(state in arb_state(3), angle in 0.0..PI) {
        for op in [qplate(1), half_wave_plate(angle), uniform_grating()] {
            let out = op.apply(&state).unwrap();
            prop_assert!(
                (out.squared_norm() - 1.0).abs() < 1e-12,
                "{} changed the norm", op.name()
            );
        }
    }

    #[test]
    fn projectors_idempotent(state in arb_state(3), angle in 0.0..PI) {
        for op in [polarizer(angle), pol_analyzer(angle), smf_coupler()] {
            let once = op.apply(&state).unwrap();
            let twice = op.apply(&once).unwrap();
            let distance: f64 = once
                .amplitudes()
                .map(|(l, amp)| (amp - twice.amplitude(l)).norm_sqr())
                .sum();
            prop_assert!(distance.sqrt() < 1e-12, "{} not idempotent", op.name());
        }
    }

    /// HWP at θ/2 followed by the fixed polarizer transmits with exactly
    /// the probability of the θ analyzer, for every input and every θ on a
    /// 32-point grid.
    #[test]
    fn analyzer_equivalence(state in arb_state(3)) {
        for k in 0..32 {
            let theta = k as f64 * PI / 32.0;
            let via_hwp = polarizer(0.0)
                .apply(&half_wave_plate(theta / 2.0).apply(&state).unwrap())
                .unwrap()
                .squared_norm();
            let via_analyzer = pol_analyzer(theta).apply(&state).unwrap().squared_norm();
            prop_assert!(
                (via_hwp - via_analyzer).abs() < 1e-12,
                "mismatch at theta = {theta}: {via_hwp} vs {via_analyzer}"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// Hologram transmission |⟨χ|(α|+2⟩ + β|−2⟩)⟩|² against a brute-force
    /// 2×2 matrix computation in the {+2, −2} subspace.
    #[test]
    fn hologram_probability_matches_two_by_two(
        alpha in arb_complex(),
        beta in arb_complex(),
        chi in 0.0..PI,
    ) {
        prop_assume!(alpha.norm_sqr() + beta.norm_sqr() > 1e-6);
        let state = SinglePhotonState::from_amplitudes(
            [
                (ModeLabel::new(Spin::L, 2), alpha),
                (ModeLabel::new(Spin::L, -2), beta),
            ],
            DEFAULT_M_MAX,
        );
        let through = sector_hologram_analyzer(chi).apply(&state).unwrap();

        // independent route: analyzer ket k = (e^{2iχ}, e^{−2iχ})/√2 in the
        // (+2, −2) basis, projector P = k·k†, probability v†·P·v
        let k = [
            Complex64::from_polar(FRAC_1_SQRT_2, 2.0 * chi),
            Complex64::from_polar(FRAC_1_SQRT_2, -2.0 * chi),
        ];
        let v = [alpha, beta];
        let mut projector = [[Complex64::ZERO; 2]; 2];
        for row in 0..2 {
            for col in 0..2 {
                projector[row][col] = k[row] * k[col].conj();
            }
        }
        let mut expected = Complex64::ZERO;
        for row in 0..2 {
            for col in 0..2 {
                expected += v[row].conj() * projector[row][col] * v[col];
            }
        }
        prop_assert!((through.squared_norm() - expected.re).abs() < 1e-12);
    }
}

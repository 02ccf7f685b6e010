mod common;

use nvmag::inversion::{
    candidate_rings, disambiguate, field_magnitude_from_revival, invert_axial_transverse, invert_branch,
    invert_odmr_only, revival_time, CalibratedField, CalibratedMeasurement, InversionError, InversionWarning, Stage,
};
use nvmag::spin_model::{larmor_from_axial_transverse, zeeman_shifts_perturbative, Branch, FieldVector, NvParameters};
use proptest::prelude::*;

fn forward(bz: f64, bp: f64, p: &NvParameters) -> (f64, f64, f64) {
    let s = zeeman_shifts_perturbative(bz, bp, p).unwrap();
    (s.plus, s.minus, larmor_from_axial_transverse(bz, bp, p).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn precession_route_round_trip(bz in 0.0..10.0f64, bp in 0.0..10.0f64) {
        let p = NvParameters::default();
        let (plus, minus, omega) = forward(bz, bp, &p);
        for (shift, branch) in [(minus, Branch::Minus), (plus, Branch::Plus)] {
            let at = invert_branch(shift, branch, omega, 0.0, &p).unwrap();
            prop_assert!((at.bz_abs - bz).abs() <= 1e-9 && (at.b_perp - bp).abs() <= 1e-9,
                "{branch:?}: ({}, {}) vs ({bz}, {bp})", at.bz_abs, at.b_perp);
        }
    }

    #[test]
    fn converges_quickly_in_the_weak_field_ball(bz in 0.0..5.0f64, bp in 0.0..5.0f64) {
        prop_assume!(bz.hypot(bp) <= 5.0);
        let p = NvParameters::default();
        let (_, minus, omega) = forward(bz, bp, &p);
        let at = invert_axial_transverse(minus, omega, &p).unwrap();
        prop_assert!(at.iterations <= 10, "{} iterations", at.iterations);
    }

    #[test]
    fn odmr_only_and_precession_routes_agree(bz in 0.05..8.0f64, bp in 0.05..8.0f64) {
        let p = NvParameters::default();
        let (plus, minus, omega) = forward(bz, bp, &p);
        let a = invert_odmr_only(plus, minus, &p).unwrap();
        let b = invert_axial_transverse(minus, omega, &p).unwrap();
        prop_assert!((a.bz_abs - b.bz_abs).abs() <= 1e-6 && (a.b_perp - b.b_perp).abs() <= 1e-6);
        prop_assert!((a.bz_abs - bz).abs() <= 1e-6 && (a.b_perp - bp).abs() <= 1e-6);
    }

    #[test]
    fn revival_round_trip(b in 0.1..20.0f64) {
        let p = NvParameters::default();
        let back = field_magnitude_from_revival(revival_time(b, &p), &p).unwrap();
        prop_assert!((back - b).abs() <= 1e-12 * b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// Every candidate on the rings reproduces the measured magnitudes, and
    /// the true field is among them.
    #[test]
    fn rings_contain_the_field(bz in -5.0..5.0f64, bp in 0.0..5.0f64, phi in 0.0..360.0f64) {
        let b = FieldVector::from_axial_transverse(bz, bp, phi);
        let set = candidate_rings(&common::magnitudes(&b));
        prop_assert_eq!(set.stage, Stage::Rings);
        prop_assert!(set.rings.iter().any(|r| (r.z - bz).abs() < 1e-12 && (r.r - bp).abs() < 1e-12));
    }

    /// With one calibrated field the solver's two candidates are exactly the
    /// minima a brute-force walk around the rings finds.
    #[test]
    fn single_calibration_matches_grid_search(
        bz in 0.5..4.0f64, bp in 0.5..3.0f64, phi in 0.0..360.0f64,
        cz in 0.3..1.5f64, cp in 0.3..1.5f64, cphi in 0.0..360.0f64,
    ) {
        let b = FieldVector::from_axial_transverse(bz, bp, phi);
        let c = FieldVector::from_axial_transverse(cz, cp, cphi);
        let base = common::magnitudes(&b);
        let measured = common::magnitudes(&b.add(&c));
        let cal = CalibratedMeasurement { field: CalibratedField::new(c), measured: measured.clone() };
        let set = disambiguate(&base, &[cal], 1e-7).unwrap();
        let oracle = common::ring_grid_minima(&base, &[(c, measured)], 1e-4, 5e-3);
        prop_assume!(oracle.len() == 2);
        prop_assert_eq!(set.stage, Stage::Pair);
        prop_assert_eq!(set.vectors.len(), 2);
        for o in &oracle {
            prop_assert!(set.vectors.iter().any(|v| v.sub(o).magnitude() < 1e-3));
        }
        prop_assert!(set.vectors.iter().any(|v| v.sub(&b).magnitude() < 1e-9));
    }
}

#[test]
fn reference_point_inverts() {
    let at = invert_axial_transverse(-85.26, 0.1632, &NvParameters::default()).unwrap();
    assert!((at.bz_abs - 3.129).abs() < 0.005);
    assert!((at.b_perp - 2.426).abs() < 0.005);
    assert!(at.warnings.is_empty());
}

/// Shifts quoted to 0.01 MHz still give the field to 5 μT on the ODMR-only
/// route once B_⊥ is a few mT; the B_⊥ error grows as 1/B_⊥ below that.
#[test]
fn odmr_only_tolerates_rounded_shifts() {
    let p = NvParameters::default();
    for (bz, bp) in [(3.129, 2.426), (1.0, 2.5), (4.0, 3.0)] {
        let (plus, minus, _) = forward(bz, bp, &p);
        let round = |x: f64| (x * 100.0).round() / 100.0;
        let at = invert_odmr_only(round(plus), round(minus), &p).unwrap();
        assert!((at.bz_abs - bz).abs() < 0.005 && (at.b_perp - bp).abs() < 0.005, "{at:?}");
    }
}

#[test]
fn purely_axial_field_and_noise_clamp() {
    let p = NvParameters::default();
    let (_, minus, omega) = forward(2.0, 0.0, &p);
    let at = invert_axial_transverse(minus, omega, &p).unwrap();
    assert!((at.bz_abs - 2.0).abs() < 1e-9 && at.b_perp < 1e-6);

    // A Larmor frequency slightly below the axial-only value is noise when
    // the quoted σ covers it, and inconsistent when it does not.
    let low = omega - 2e-4;
    assert!(matches!(invert_axial_transverse(minus, low, &p), Err(InversionError::TransverseDeficit { .. })));
    let at = invert_branch(minus, Branch::Minus, low, 1e-4, &p).unwrap();
    assert_eq!(at.b_perp, 0.0);
    assert!(at.warnings.contains(&InversionWarning::TransverseClamped));
}

#[test]
fn invalid_inputs_rejected() {
    let p = NvParameters::default();
    assert!(matches!(invert_axial_transverse(-3000.0, 0.1, &p), Err(InversionError::InvalidInput(_))));
    assert!(matches!(invert_axial_transverse(-50.0, -0.1, &p), Err(InversionError::InvalidInput(_))));
    assert!(matches!(invert_axial_transverse(f64::NAN, 0.1, &p), Err(InversionError::InvalidInput(_))));
    assert!(matches!(invert_odmr_only(-10.0, 10.0, &p), Err(InversionError::InvalidInput(_))));
    assert!(matches!(invert_odmr_only(10.0, -30.0, &p), Err(InversionError::NegativeSumInconsistent { .. })));
    assert!(field_magnitude_from_revival(0.0, &p).is_err());
}

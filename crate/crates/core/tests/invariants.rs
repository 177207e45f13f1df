//! Randomized invariants of the Hamiltonian catalog, the characteristic
//! flow and the fundamental solution.

use hjchar::models::{hamiltonian_from_lagrangian, legendre_transform, truncate_model};
use hjchar::{flow_roundtrip_error, fundamental_solution, Hamiltonian, HamiltonianModel, ModelKind, PhasePoint, ShootingConfig};
use proptest::prelude::*;

fn any_model() -> impl Strategy<Value = HamiltonianModel> {
    prop::sample::select(ModelKind::ALL.to_vec()).prop_map(HamiltonianModel::new)
}

fn quick() -> ShootingConfig {
    ShootingConfig { n_p: 201, retain_trajectory: false, ..Default::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn legendre_is_an_involution(m in any_model(), x in 0.0..1.0f64, u in -2.0..2.0f64, p in -5.0..5.0f64) {
        let h = hamiltonian_from_lagrangian(&m, x, u, p).unwrap();
        prop_assert!((h - m.value(x, u, p)).abs() <= 1e-8);
    }

    #[test]
    fn fenchel_equality_at_the_maximizer(m in any_model(), x in 0.0..1.0f64, u in -2.0..2.0f64, v in -6.0..6.0f64) {
        let l = legendre_transform(&m, x, u, v).unwrap();
        let h = m.value(x, u, l.p_star);
        prop_assert!((l.value + h - v * l.p_star).abs() <= 1e-9 * (1.0 + h.abs()));
    }

    #[test]
    fn fenchel_young_inequality(m in any_model(), x in 0.0..1.0f64, u in -2.0..2.0f64, v in -6.0..6.0f64, p in -6.0..6.0f64) {
        let l = legendre_transform(&m, x, u, v).unwrap().value;
        prop_assert!(l + m.value(x, u, p) >= v * p - 1e-9);
    }

    #[test]
    fn truncation_is_identity_inside_radius(m in any_model(), r in 0.5..10.0f64, s in -1.0..1.0f64, x in 0.0..1.0f64, p in -5.0..5.0f64) {
        let t = truncate_model(&m, r);
        let u = s * r;
        prop_assert_eq!(t.value(x, u, p), m.value(x, u, p));
        prop_assert_eq!(t.partials(x, u, p), m.partials(x, u, p));
    }

    #[test]
    fn truncation_freezes_u_outside(m in any_model(), r in 0.5..5.0f64, extra in 1.0..50.0f64, x in 0.0..1.0f64, p in -5.0..5.0f64) {
        let t = truncate_model(&m, r);
        prop_assert_eq!(t.value(x, r + extra, p), m.value(x, 0.0, p));
        prop_assert_eq!(t.partials(x, -(r + extra), p).hu, 0.0);
    }

    #[test]
    fn flows_are_reversible(m in any_model(), x in 0.0..1.0f64, u in -1.0..1.0f64, p in -2.0..2.0f64) {
        let e = flow_roundtrip_error(&m, PhasePoint::new(x, u, p), 0.5, 1e-10).unwrap();
        prop_assert!(e <= 1e-7);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn value_is_the_minimal_candidate(m in any_model(), x in 0.0..1.0f64, t in 0.2..1.0f64, u0 in -0.5..0.5f64) {
        let fv = fundamental_solution(&m, 0.0, u0, x, t, &quick()).unwrap();
        for c in &fv.candidates {
            prop_assert!(fv.value <= c.terminal.u);
            prop_assert!(c.converged);
        }
        prop_assert_eq!(fv.value, fv.minimizer.terminal.u);
    }

    #[test]
    fn free_matches_closed_form(x0 in 0.0..1.0f64, x in 0.0..1.0f64, t in 0.1..2.0f64, u0 in -3.0..3.0f64) {
        let fv = fundamental_solution(&HamiltonianModel::free(), x0, u0, x, t, &quick()).unwrap();
        let exact = (-3..=3)
            .map(|k| { let d = x - x0 + k as f64; u0 + d * d / (2.0 * t) })
            .fold(f64::INFINITY, f64::min);
        prop_assert!((fv.value - exact).abs() <= 1e-8);
    }

    #[test]
    fn shift_passes_through_u_independent_models(x in 0.0..1.0f64, t in 0.2..1.0f64, c in -3.0..3.0f64, mech in any::<bool>()) {
        let m = if mech { HamiltonianModel::mechanical() } else { HamiltonianModel::free() };
        let a = fundamental_solution(&m, 0.0, 0.0, x, t, &quick()).unwrap().value;
        let b = fundamental_solution(&m, 0.0, c, x, t, &quick()).unwrap().value;
        prop_assert!((b - a - c).abs() <= 1e-8);
    }
}

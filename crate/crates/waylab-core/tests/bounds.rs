mod common;

use common::*;
use proptest::prelude::*;
use waylab_core::bounds::*;
use waylab_core::conserve::{check_conservation, AdditiveQuantity};
use waylab_core::measure::normal_dilation;
use waylab_core::opcore::*;
use waylab_core::random::{
    haar_unitary, random_conservative_scenario, random_povm, random_pure_state, random_sharp_observable,
    random_state,
};
use waylab_core::report::Summary;
use waylab_core::{BoundId, BoundReport, Instrument, MeasurementScheme, Observable, OperationMap};

const LAMBDAS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

fn find(reports: &[BoundReport], id: BoundId) -> Vec<&BoundReport> {
    reports.iter().filter(|r| r.bound == id).collect()
}

/// `Σ_s |s><s| ⊗ V_s`: a coupling that conserves `σ_z ⊗ 𝟙` and leaves the
/// system's computational basis untouched.
fn controlled_scheme(seed: u64, da: usize) -> MeasurementScheme {
    let t = tol();
    let mut g = rng(seed);
    let mut u = Operator::zeros(2 * da, 2 * da);
    for s in 0..2 {
        u += tensor(&matrix_unit(2, s, s), &haar_unitary(da, &mut g));
    }
    let xi = random_state(da, &mut g);
    let pointer = random_povm(da, 2, &mut g, &t).unwrap();
    MeasurementScheme::new(2, da, xi, OperationMap::unitary(u, &t).unwrap(), pointer, &t).unwrap()
}

fn orthonormal_pair(d: usize, g: &mut impl rand::Rng) -> (Vector, Vector) {
    let psi = random_pure_state(d, g);
    let mut phi = random_pure_state(d, g);
    let overlap = psi.dotc(&phi);
    phi -= &psi * overlap;
    let n = phi.norm();
    (psi, phi / c(n, 0.0))
}

#[test]
fn qubit_family_disturbance_values() {
    let t = tol();
    for lambda in LAMBDAS {
        let b = b_lambda(lambda);
        let a = sharp_a();
        let comm = op_norm(&commutator(a.effect(0), b.effect(0)));
        assert_close(comm, lambda / 2.0, 1e-10);

        let by_a = disturbance_profile(&Instrument::luders(&a, &t).unwrap(), &b).unwrap();
        for v in &by_a.norms {
            assert_close(*v, lambda / 2.0, 1e-10);
        }
        let by_b = disturbance_profile(&Instrument::luders(&b, &t).unwrap(), &a).unwrap();
        let expect = (1.0 - (1.0 - lambda * lambda).sqrt()) / 2.0;
        for v in &by_b.norms {
            assert_close(*v, expect, 1e-10);
        }
        let own = disturbance_profile(&Instrument::luders(&a, &t).unwrap(), &a).unwrap();
        assert!(own.max <= 1e-12);
    }
}

#[test]
fn qubit_family_commutator_bound_is_tight() {
    let t = tol();
    for lambda in LAMBDAS {
        let m = normal_dilation(&sharp_a(), &t).unwrap();
        let reports = eval_disturbance_bounds(&m, &b_lambda(lambda), None, false, &t).unwrap();
        for id in [BoundId::DisturbanceUnsharpness, BoundId::DisturbanceCommutator] {
            let rs = find(&reports, id);
            assert_eq!(rs.len(), 4);
            for r in rs {
                assert!(r.satisfied && r.slack.abs() <= 1e-9, "{r:?}");
            }
        }
    }
}

#[test]
fn commuting_observable_has_zero_commutator() {
    let t = tol();
    let m = normal_dilation(&sharp_a(), &t).unwrap();
    let f = Observable::from_effects(vec![diag(&[0.3, 0.6]), diag(&[0.7, 0.4])], &t).unwrap();
    let reports = eval_disturbance_bounds(&m, &f, None, false, &t).unwrap();
    for r in find(&reports, BoundId::DisturbanceCommutator) {
        assert!(r.lhs <= 1e-12 && r.satisfied);
    }
}

#[test]
fn zero_quantity_gives_zero_conserved_sides() {
    let t = tol();
    let m = normal_dilation(&b_lambda(0.4), &t).unwrap();
    let q = AdditiveQuantity::new(zeros(2), zeros(2), &t).unwrap();
    let reports = eval_disturbance_bounds(&m, &sharp_a(), Some(&q), true, &t).unwrap();
    let conserved: Vec<_> = reports
        .iter()
        .filter(|r| r.bound.as_str().starts_with("conserved"))
        .collect();
    assert!(!conserved.is_empty());
    for r in conserved {
        assert!(r.lhs == 0.0 && r.satisfied, "{r:?}");
    }
    for r in eval_measurability_bounds(&m, &b_lambda(0.4), &q, true, &t).unwrap() {
        assert!(r.lhs == 0.0 && r.rhs.abs() <= 1e-12, "{r:?}");
    }
}

#[test]
fn error_profile_examples() {
    let t = tol();
    let e = random_povm(3, 3, &mut rng(1), &t).unwrap();
    let m = normal_dilation(&e, &t).unwrap();
    assert!(error_profile(&m, &e).unwrap().max <= 1e-9);

    let mut g = rng(2);
    let xi = random_state(2, &mut g);
    let pointer = random_povm(2, 2, &mut g, &t).unwrap();
    let m = MeasurementScheme::new(2, 2, xi.clone(), OperationMap::identity(4), pointer.clone(), &t).unwrap();
    let target = random_sharp_observable(2, 2, &mut g, &t).unwrap();
    let prof = error_profile(&m, &target).unwrap();
    for k in 0..2 {
        let w = trace(&(pointer.effect(k) * &xi));
        let expect = op_norm(&(identity(2) * w - target.effect(k)));
        assert_close(prof.norms[k], expect, 1e-12);
        assert!(prof.norms[k] > 0.0);
    }
    assert!(error_profile(&m, &m.measured_observable()).unwrap().max <= 1e-12);

    let relabelled = Observable::new(labels(&["a", "b"]), target.effects().to_vec(), &t).unwrap();
    assert!(error_profile(&m, &relabelled).is_err());
}

#[test]
fn profiles_match_their_sup_characterization() {
    let t = tol();
    let mut g = rng(3);
    let inst = Instrument::luders(&b_lambda(0.6), &t).unwrap();
    let f = random_povm(2, 2, &mut g, &t).unwrap();
    let prof = disturbance_profile(&inst, &f).unwrap();
    let scheme = controlled_scheme(4, 2);
    let target = random_povm(2, 2, &mut g, &t).unwrap();
    let target = Observable::new(scheme.pointer().outcomes().to_vec(), target.effects().to_vec(), &t).unwrap();
    let err = error_profile(&scheme, &target).unwrap();

    let defects: Vec<&Operator> = prof.defects.iter().chain(err.defects.iter()).collect();
    let mut sup = vec![0.0_f64; defects.len()];
    for _ in 0..10_000 {
        let psi = random_pure_state(2, &mut g);
        for (s, d) in sup.iter_mut().zip(&defects) {
            *s = s.max(psi.dotc(&(*d * &psi)).norm());
        }
    }
    let exact: Vec<f64> = prof.norms.iter().chain(err.norms.iter()).copied().collect();
    for (s, e) in sup.iter().zip(&exact) {
        assert!(*s <= *e + 1e-12 && e - s <= 1e-3, "sup {s} vs norm {e}");
    }
}

#[test]
fn way_bound_vanishes_for_commuting_sharp_measurements() {
    let t = tol();
    let m = normal_dilation(&sharp_a(), &t).unwrap();
    let q = AdditiveQuantity::new(pauli_z(), zeros(2), &t).unwrap();
    assert!(check_conservation(m.coupling(), &q.composite(), &t).unwrap().average_holds);
    let reports = eval_way(&m, &q, None, false, &t).unwrap();
    let way = find(&reports, BoundId::WayRepeatableOrYanase);
    assert_eq!(way.len(), 2);
    for r in way {
        assert!(r.lhs <= 1e-12 && r.rhs <= 1e-12 && r.satisfied && r.hypotheses_hold, "{r:?}");
    }
}

#[test]
fn repeatable_commutation_for_commuting_quantity() {
    let t = tol();
    let m = normal_dilation(&sharp_a(), &t).unwrap();
    let q = AdditiveQuantity::new(pauli_z(), zeros(2), &t).unwrap();
    for r in eval_repeatable_commutation(&m, &q, &t).unwrap() {
        assert!(r.lhs <= 1e-9 && r.hypotheses_hold && r.satisfied, "{r:?}");
    }
    let mut g = rng(5);
    let e = random_sharp_observable(3, 3, &mut g, &t).unwrap();
    let states: Vec<Vector> = e.effects().iter().map(|p| range_isometry(p, 0.5).column(0).into_owned()).collect();
    let inst = Instrument::rank_one_collapse(&e, &states, &t).unwrap();
    let n = e.effects().iter().enumerate().fold(zeros(3), |acc, (k, p)| acc + p * c(k as f64, 0.0));
    let px = e.effects().iter().fold(zeros(3), |acc, p| acc + eigenspace_projector(p, 1.0, &t).unwrap());
    let compressed = &px * &n * &px;
    for ex in inst.observable().effects() {
        assert!(op_norm(&commutator(ex, &compressed)) <= 1e-9);
    }
}

#[test]
fn distinguishability_with_inert_coupling() {
    let t = tol();
    let q = AdditiveQuantity::new(diag(&[1.0, 0.0]), diag(&[0.0, 2.0]), &t).unwrap();
    let pointer = Observable::from_effects(vec![diag(&[1.0, 0.0]), diag(&[0.0, 1.0])], &t).unwrap();
    let m = MeasurementScheme::new(2, 2, diag(&[1.0, 0.0]), OperationMap::identity(4), pointer, &t).unwrap();
    let reports = eval_distinguishability_bounds(&m, &q, &ket(2, 0), &ket(2, 1), &t).unwrap();
    for r in &reports {
        assert!(r.lhs <= 1e-12 && r.satisfied && r.hypotheses_hold, "{r:?}");
    }
    assert!(eval_distinguishability_bounds(&m, &q, &ket(2, 0), &plus(), &t).is_err());
}

#[test]
fn first_kind_distinguishability_checks_membership() {
    let t = tol();
    let m = controlled_scheme(6, 2);
    let q = AdditiveQuantity::new(pauli_z(), zeros(2), &t).unwrap();
    let e = m.measured_observable();
    let sp_top = eigenspace_projector(e.effect(0), max_eigenvalue(e.effect(0)), &t).unwrap();
    let top = range_isometry(&sp_top, 0.5).column(0).into_owned();
    let bottom_p = eigenspace_projector(e.effect(0), min_eigenvalue(e.effect(0)), &t).unwrap();
    let bottom = range_isometry(&bottom_p, 0.5).column(0).into_owned();
    let r = eval_first_kind_distinguishability(&m, &q, 0, &top, &bottom, &t).unwrap();
    assert!(r.hypotheses_hold && r.satisfied, "{r:?}");
    assert!(eval_first_kind_distinguishability(&m, &q, 0, &plus(), &bottom, &t).is_err());
    for r in eval_first_kind_subspace_bounds(&m, &q, &t).unwrap() {
        assert!(r.satisfied, "{r:?}");
    }
}

#[test]
fn nondisturbance_forces_commutation() {
    let t = tol();
    let q = AdditiveQuantity::new(pauli_z(), zeros(3), &t).unwrap();
    for seed in 0..10 {
        let m = controlled_scheme(seed, 3);
        let f = Observable::from_effects(vec![diag(&[0.2, 0.9]), diag(&[0.8, 0.1])], &t).unwrap();
        let rep = check_nondisturbance_commutation(&m, &f, &q, &t).unwrap();
        assert!(rep.applies && rep.passed, "{rep:?}");
        let g = b_lambda(0.5);
        let rep = check_nondisturbance_commutation(&m, &g, &q, &t).unwrap();
        assert!(rep.passed);
    }
}

#[test]
fn fixed_point_commutation_bound_holds() {
    let t = tol();
    let mut g = rng(7);
    for d in 2..=4 {
        let e = random_povm(d, 3, &mut g, &t).unwrap();
        let inst = Instrument::luders(&e, &t).unwrap();
        let a = waylab_core::random::ginibre(d, d, &mut g);
        for r in eval_fixed_point_commutation(&inst, &a, &t).unwrap() {
            assert!(r.satisfied, "{r:?}");
        }
    }
}

#[test]
fn randomized_conservative_suite_has_no_violations() {
    let t = tol();
    let mut all = Vec::new();
    for seed in 0..40u64 {
        let mut g = rng(seed);
        let ds = 2 + (seed % 2) as usize;
        let da = 2 + ((seed / 2) % 2) as usize;
        let sc = random_conservative_scenario(ds, da, 2, &mut g, &t).unwrap();
        all.extend(eval_disturbance_bounds(&sc.scheme, &sc.probe, Some(&sc.quantity), false, &t).unwrap());
        all.extend(eval_measurability_bounds(&sc.scheme, &sc.target, &sc.quantity, false, &t).unwrap());
        all.extend(eval_way(&sc.scheme, &sc.quantity, Some(&sc.target), false, &t).unwrap());
        let (psi, phi) = orthonormal_pair(ds, &mut g);
        all.extend(eval_distinguishability_bounds(&sc.scheme, &sc.quantity, &psi, &phi, &t).unwrap());
        all.extend(eval_first_kind_subspace_bounds(&sc.scheme, &sc.quantity, &t).unwrap());
    }
    let summary = Summary::of(&all);
    assert_eq!(summary.violated, 0, "{summary:?}");
    let held = all.iter().filter(|r| r.hypotheses_hold).count();
    assert!(held > 100, "only {held} reports met their hypotheses");
    for r in all.iter().filter(|r| r.hypotheses_hold) {
        assert!(r.slack >= -1e-7, "{r:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn commutator_forms_are_ordered(seed in any::<u64>(), d in 2usize..4) {
        let t = tol();
        let mut g = rng(seed);
        let e = random_povm(d, 2, &mut g, &t).unwrap();
        let f = random_povm(d, 2, &mut g, &t).unwrap();
        let m = normal_dilation(&e, &t).unwrap();
        let reports = eval_disturbance_bounds(&m, &f, None, false, &t).unwrap();
        let eq12 = find(&reports, BoundId::DisturbanceCommutator);
        let eq13 = find(&reports, BoundId::DisturbanceUnsharpness);
        for (a, b) in eq12.iter().zip(&eq13) {
            prop_assert_eq!(&a.outcome, &b.outcome);
            prop_assert!(a.rhs <= b.rhs + 1e-12);
            prop_assert!(a.satisfied && b.satisfied);
        }
    }

    #[test]
    fn hypothesis_satisfying_reports_hold(seed in any::<u64>(), ds in 2usize..4, da in 2usize..4, n in 2usize..4) {
        let t = tol();
        let mut g = rng(seed);
        let sc = random_conservative_scenario(ds, da, n, &mut g, &t).unwrap();
        let mut reps = eval_disturbance_bounds(&sc.scheme, &sc.probe, Some(&sc.quantity), true, &t).unwrap();
        reps.extend(eval_way(&sc.scheme, &sc.quantity, Some(&sc.target), false, &t).unwrap());
        for r in reps {
            prop_assert!(r.acceptable(), "{:?}", r);
        }
    }
}

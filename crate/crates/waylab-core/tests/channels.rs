mod common;

use common::*;
use proptest::prelude::*;
use waylab_core::cpmaps::qutrit_average_channel;
use waylab_core::opcore::*;
use waylab_core::random::{ginibre, haar_unitary, random_channel, random_effect, random_state};
use waylab_core::{compose, Error, Instrument, OperationMap};

fn n_qutrit() -> Operator {
    diag(&[1.0, 0.0, -1.0])
}

fn luders_a_channel() -> OperationMap {
    Instrument::luders(&sharp_a(), &tol()).unwrap().channel()
}

fn spectral_radius(m: &Operator) -> f64 {
    m.clone()
        .schur()
        .eigenvalues()
        .expect("triangular Schur form")
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

fn units(d: usize) -> Vec<Operator> {
    (0..d).flat_map(|i| (0..d).map(move |j| matrix_unit(d, i, j))).collect()
}

#[test]
fn apply_examples() {
    let t = tol();
    let mut g = rng(3);
    let rho = random_state(3, &mut g);
    assert_op_close(&OperationMap::identity(3).apply(&rho).unwrap(), &rho, 0.0);

    let phi = qutrit_average_channel();
    let out = phi.apply(&matrix_unit(3, 1, 1)).unwrap();
    assert_op_close(&out, &diag(&[0.5, 0.0, 0.5]), 1e-15);

    let u = haar_unitary(3, &mut g);
    let conj = OperationMap::unitary(u, &t).unwrap().apply(&rho).unwrap();
    let (a, b) = (eigh(&rho).values, eigh(&conj).values);
    for (x, y) in a.iter().zip(&b) {
        assert_close(*x, *y, 1e-12);
    }
    assert!(matches!(phi.apply(&identity(2)), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn dual_examples() {
    let t = tol();
    let mut g = rng(4);
    let ch = random_channel(3, 3, 4, &mut g, &t).unwrap();
    assert_op_close(&ch.apply_dual(&identity(3)).unwrap(), &identity(3), 1e-12);
    let phi = qutrit_average_channel();
    let n = n_qutrit();
    assert_op_close(&phi.apply_dual(&n).unwrap(), &n, 1e-15);
    let n2 = &n * &n;
    assert_op_close(&phi.apply_dual(&n2).unwrap(), &identity(3), 1e-15);
    assert!(dist(&identity(3), &n2) > 0.5);
}

#[test]
fn sesquilinear_examples() {
    let t = tol();
    let mut g = rng(5);
    let u = OperationMap::unitary(haar_unitary(3, &mut g), &t).unwrap();
    let a = ginibre(3, 3, &mut g);
    let b = ginibre(3, 3, &mut g);
    assert!(op_norm(&u.sesquilinear(&a, &b).unwrap()) <= 1e-12);
    let ch = random_channel(3, 3, 3, &mut g, &t).unwrap();
    assert!(op_norm(&ch.sesquilinear(&identity(3), &b).unwrap()) <= 1e-12);
    let phi = qutrit_average_channel();
    let n = n_qutrit();
    assert_op_close(&phi.sesquilinear(&n, &n).unwrap(), &diag(&[0.0, 1.0, 0.0]), 1e-15);
}

#[test]
fn commutator_defect_bound_examples() {
    let t = tol();
    let mut g = rng(6);
    let u = OperationMap::unitary(haar_unitary(3, &mut g), &t).unwrap();
    let r = u
        .commutator_defect_bound(&ginibre(3, 3, &mut g), &ginibre(3, 3, &mut g), &t)
        .unwrap();
    assert!(r.lhs <= 1e-12 && r.rhs <= 1e-6, "{r:?}");
    assert!(r.satisfied);

    let phi = qutrit_average_channel();
    let r = phi
        .commutator_defect_bound(&n_qutrit(), &matrix_unit(3, 0, 1), &t)
        .unwrap();
    assert!(r.satisfied, "{r:?}");

    let ch = random_channel(3, 3, 3, &mut rng(7), &t).unwrap();
    let mut g = rng(8);
    for _ in 0..100 {
        let r = ch
            .commutator_defect_bound(&ginibre(3, 3, &mut g), &ginibre(3, 3, &mut g), &t)
            .unwrap();
        assert!(r.satisfied, "{r:?}");
    }
}

#[test]
fn multiplicability_examples() {
    let t = tol();
    let mut g = rng(9);
    let u = OperationMap::unitary(haar_unitary(2, &mut g), &t).unwrap();
    let m = u.check_multiplicability(&ginibre(2, 2, &mut g), &t).unwrap();
    assert!(m.applicable && m.holds && m.witness <= 1e-12, "{m:?}");

    let luders = luders_a_channel();
    let m = luders.check_multiplicability(&pauli_z(), &t).unwrap();
    assert!(m.applicable && m.holds, "{m:?}");
    let m = luders.check_multiplicability(&pauli_x(), &t).unwrap();
    assert!(!m.applicable);
    assert_close(m.precondition_defect, 1.0, 1e-12);
}

#[test]
fn composition_examples() {
    let t = tol();
    let mut g = rng(10);
    let phi = random_channel(2, 3, 2, &mut g, &t).unwrap();
    let id = OperationMap::identity(3);
    let both = compose(&id, &phi).unwrap();
    for a in units(2) {
        assert_op_close(&both.apply(&a).unwrap(), &phi.apply(&a).unwrap(), 1e-12);
    }
    let u = haar_unitary(3, &mut g);
    let fwd = OperationMap::unitary(u.clone(), &t).unwrap();
    let back = OperationMap::unitary(u.adjoint(), &t).unwrap();
    let round = compose(&back, &fwd).unwrap();
    for a in units(3) {
        assert_op_close(&round.apply(&a).unwrap(), &a, 1e-12);
    }
    let inst = Instrument::luders(&sharp_a(), &t).unwrap();
    let op = inst.operation(0);
    let twice = compose(op, op).unwrap();
    for a in units(2) {
        assert_op_close(&twice.apply(&a).unwrap(), &op.apply(&a).unwrap(), 1e-12);
    }
    assert!(matches!(compose(&phi, &phi), Err(Error::DimensionMismatch { .. })));
    assert!(matches!(random_channel(3, 1, 2, &mut g, &t), Err(Error::Precondition(_))));
}

#[test]
fn supermatrix_examples() {
    let t = tol();
    assert_op_close(&OperationMap::identity(3).to_supermatrix(), &identity(9), 0.0);

    let flip = OperationMap::unitary(pauli_x(), &t).unwrap().to_supermatrix();
    let mut ev: Vec<f64> = flip
        .clone()
        .schur()
        .eigenvalues()
        .unwrap()
        .iter()
        .map(|z| {
            assert!(z.im.abs() < 1e-12);
            z.re
        })
        .collect();
    ev.sort_by(f64::total_cmp);
    for (got, want) in ev.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
        assert_close(*got, want, 1e-12);
    }

    let mut g = rng(11);
    for d in 1..=4 {
        let ch = random_channel(d, d, 3, &mut g, &t).unwrap();
        let m = ch.to_supermatrix();
        assert!(spectral_radius(&m) <= 1.0 + t.eq_tol);
        let a = ginibre(d, d, &mut g);
        let lhs = unvec(&(&m * vec_col(&a)), d, d);
        assert_op_close(&lhs, &ch.apply_dual(&a).unwrap(), 1e-12);
    }
}

#[test]
fn compression_keeps_the_action() {
    let t = tol();
    let mut g = rng(12);
    let phi = random_channel(3, 3, 2, &mut g, &t).unwrap();
    let redundant = OperationMap::sum(&[phi.scaled(0.5), phi.scaled(0.5)]).unwrap();
    assert_eq!(redundant.kraus().len(), 4);
    let small = redundant.compress(&t);
    assert_eq!(small.kraus().len(), 2);
    for a in units(3) {
        assert_op_close(&small.apply(&a).unwrap(), &phi.apply(&a).unwrap(), 1e-10);
    }
    assert!(is_psd(&phi.choi(), &t));
}

/// Random channel whose outputs avoid the last basis vector of the output space.
fn channel_with_kernel(seed: u64, d_in: usize, d_out: usize) -> OperationMap {
    let inner = random_channel(d_in, d_out - 1, d_in, &mut rng(seed), &tol()).unwrap();
    let embed = Operator::from_fn(d_out, d_out - 1, |i, j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) });
    OperationMap::channel(inner.kraus().iter().map(|k| &embed * k).collect(), &tol()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sesquilinear_diagonal_is_positive(seed in any::<u64>(), d_in in 1usize..4, d_out in 1usize..4, n in 0usize..3) {
        let t = tol();
        let n = n + d_in.div_ceil(d_out);
        let mut g = rng(seed);
        let ch = random_channel(d_in, d_out, n, &mut g, &t).unwrap();
        let a = ginibre(d_out, d_out, &mut g);
        let s = ch.sesquilinear(&a, &a).unwrap();
        prop_assert!(hermiticity_defect(&s) <= 1e-9 * op_norm(&a).powi(2).max(1.0));
        prop_assert!(min_eigenvalue(&hermitian_part(&s)) >= -t.eq_tol * op_norm(&a).powi(2).max(1.0));
    }

    #[test]
    fn sesquilinear_cauchy_schwarz(seed in any::<u64>(), d in 1usize..4, n in 1usize..4) {
        let t = tol();
        let mut g = rng(seed);
        let ch = random_channel(d, d, n, &mut g, &t).unwrap();
        let a = ginibre(d, d, &mut g);
        let b = ginibre(d, d, &mut g);
        let ab = ch.sesquilinear(&a, &b).unwrap();
        let aa = ch.sesquilinear(&a, &a).unwrap();
        let bb = ch.sesquilinear(&b, &b).unwrap();
        let gap = aa * c(op_norm(&bb), 0.0) - &ab * ab.adjoint();
        let scale = (op_norm(&a) * op_norm(&b)).powi(2).max(1.0);
        prop_assert!(min_eigenvalue(&hermitian_part(&gap)) >= -t.eq_tol * scale);
    }

    #[test]
    fn square_defect_is_controlled_by_proximity(seed in any::<u64>(), d_in in 1usize..4, d_out in 1usize..4) {
        let t = tol();
        let mut g = rng(seed);
        let ch = random_channel(d_in, d_out, d_in, &mut g, &t).unwrap();
        let a = random_effect(d_out, &mut g);
        let b = random_effect(d_in, &mut g);
        let pa = ch.apply_dual(&a).unwrap();
        let lhs = op_norm(&(ch.apply_dual(&(&a * &a)).unwrap() - &pa * &pa));
        let rhs = 2.0 * op_norm(&(&pa - &b)) + op_norm(&(&b - &b * &b));
        prop_assert!(lhs <= rhs + t.eq_tol, "{} > {}", lhs, rhs);
    }

    #[test]
    fn annihilated_effects_absorb_products(seed in any::<u64>(), d_in in 1usize..4, d_out in 2usize..5) {
        let t = tol();
        let ch = channel_with_kernel(seed, d_in, d_out);
        let a = matrix_unit(d_out, d_out - 1, d_out - 1);
        prop_assert!(op_norm(&ch.apply_dual(&a).unwrap()) <= t.eq_tol);
        for b in units(d_out) {
            prop_assert!(op_norm(&ch.apply_dual(&(&a * &b)).unwrap()) <= t.eq_tol * op_norm(&b));
            prop_assert!(op_norm(&ch.apply_dual(&(&b * &a)).unwrap()) <= t.eq_tol * op_norm(&b));
        }
    }

    #[test]
    fn dual_is_the_adjoint(seed in any::<u64>(), d_in in 1usize..4, d_out in 1usize..4, n in 0usize..3) {
        let t = tol();
        let n = n + d_in.div_ceil(d_out);
        let mut g = rng(seed);
        let ch = random_channel(d_in, d_out, n, &mut g, &t).unwrap();
        let a = ginibre(d_out, d_out, &mut g);
        let rho = ginibre(d_in, d_in, &mut g);
        let lhs = trace(&(ch.apply_dual(&a).unwrap() * &rho));
        let rhs = trace(&(&a * ch.apply(&rho).unwrap()));
        let trace_norm: f64 = rho.singular_values().iter().sum();
        prop_assert!((lhs - rhs).norm() <= t.eq_tol * op_norm(&a) * trace_norm);
    }

    #[test]
    fn commutator_defect_bound_holds(seed in any::<u64>(), d in 1usize..4, n in 1usize..4) {
        let t = tol();
        let mut g = rng(seed);
        let ch = random_channel(d, d, n, &mut g, &t).unwrap();
        let r = ch.commutator_defect_bound(&ginibre(d, d, &mut g), &ginibre(d, d, &mut g), &t).unwrap();
        prop_assert!(r.satisfied, "{:?}", r);
    }
}

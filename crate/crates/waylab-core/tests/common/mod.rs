#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use waylab_core::opcore::{c, basis_vector, op_norm, projector_onto};
use waylab_core::{Observable, Operator, Tolerance, Vector};

pub fn tol() -> Tolerance {
    Tolerance::default()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn ket(d: usize, i: usize) -> Vector {
    basis_vector(d, i)
}

pub fn plus() -> Vector {
    let s = 0.5_f64.sqrt();
    Vector::from_vec(vec![c(s, 0.0), c(s, 0.0)])
}

pub fn minus() -> Vector {
    let s = 0.5_f64.sqrt();
    Vector::from_vec(vec![c(s, 0.0), c(-s, 0.0)])
}

pub fn labels(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Sharp qubit observable in the computational basis.
pub fn sharp_a() -> Observable {
    Observable::new(
        labels(&["0", "1"]),
        vec![projector_onto(&ket(2, 0)), projector_onto(&ket(2, 1))],
        &tol(),
    )
    .unwrap()
}

/// `B_λ(±) = λ|±><±| + (1−λ)𝟙/2`.
pub fn b_lambda(lambda: f64) -> Observable {
    let half = waylab_core::opcore::identity(2) * c((1.0 - lambda) / 2.0, 0.0);
    Observable::new(
        labels(&["+", "-"]),
        vec![
            projector_onto(&plus()) * c(lambda, 0.0) + &half,
            projector_onto(&minus()) * c(lambda, 0.0) + &half,
        ],
        &tol(),
    )
    .unwrap()
}

pub fn dist(a: &Operator, b: &Operator) -> f64 {
    op_norm(&(a - b))
}

pub fn assert_op_close(a: &Operator, b: &Operator, eps: f64) {
    let d = dist(a, b);
    assert!(d <= eps, "operators differ by {d:e} (allowed {eps:e})\n{a}\n{b}");
}

pub fn assert_close(a: f64, b: f64, eps: f64) {
    assert!((a - b).abs() <= eps, "{a} vs {b} differ by {:e} (allowed {eps:e})", (a - b).abs());
}

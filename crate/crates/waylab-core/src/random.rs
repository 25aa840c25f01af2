//! Seeded random generators for operators, states, observables and channels.
//!
//! All generators draw from a caller-supplied [`Rng`]; with a seeded
//! `ChaCha8Rng` every output is reproducible.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::cpmaps::OperationMap;
use crate::error::{Error, Result};
use crate::measure::Observable;
use crate::opcore::{
    c, clusters, eigh, expm_i_hermitian, hermitian_part, outer, partial_trace, Operator,
    Subsystem, Tolerance, Vector,
};

fn gaussian(rng: &mut impl Rng) -> crate::opcore::C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im)
}

/// `rows × cols` matrix of independent standard complex Gaussians.
pub fn ginibre(rows: usize, cols: usize, rng: &mut impl Rng) -> Operator {
    let mut m = Operator::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = gaussian(rng);
        }
    }
    m
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the phases of the
/// diagonal of `R` absorbed into `Q`.
pub fn haar_unitary(d: usize, rng: &mut impl Rng) -> Operator {
    let qr = ginibre(d, d, rng).qr();
    let (mut q, r) = qr.unpack();
    for k in 0..d {
        let rkk = r[(k, k)];
        let n = rkk.norm();
        let phase = if n > 0.0 { rkk / c(n, 0.0) } else { c(1.0, 0.0) };
        let mut col = q.column_mut(k);
        col *= phase;
    }
    q
}

/// Haar-random unit vector.
pub fn random_pure_state(d: usize, rng: &mut impl Rng) -> Vector {
    let v = Vector::from_fn(d, |_, _| gaussian(rng));
    let n = v.norm();
    v / c(n, 0.0)
}

/// Mixed state obtained as the marginal of a Haar-random pure state on
/// `C^d ⊗ C^k`; full rank almost surely when `k ≥ d`.
pub fn random_state_with_ancilla(d: usize, k: usize, rng: &mut impl Rng) -> Operator {
    let psi = random_pure_state(d * k, rng);
    let rho = outer(&psi, &psi);
    hermitian_part(&partial_trace(&rho, Subsystem::System, (d, k)).expect("dimensions agree"))
}

/// Purification-induced random state with an ancilla of the same dimension.
pub fn random_state(d: usize, rng: &mut impl Rng) -> Operator {
    random_state_with_ancilla(d, d, rng)
}

/// Random Hermitian operator `(G + G†)/2` with Ginibre `G`.
pub fn random_hermitian(d: usize, rng: &mut impl Rng) -> Operator {
    hermitian_part(&ginibre(d, d, rng))
}

/// Random POVM: PSD operators `G_k G_k†` normalized by `S^{-1/2}` with
/// `S = Σ G_k G_k†`.
pub fn random_povm(d: usize, n: usize, rng: &mut impl Rng, tol: &Tolerance) -> Result<Observable> {
    if n == 0 {
        return Err(Error::InvalidObservable("no outcomes requested".into()));
    }
    let raw: Vec<Operator> = (0..n)
        .map(|_| {
            let g = ginibre(d, d, rng);
            &g * g.adjoint()
        })
        .collect();
    let s = raw.iter().fold(Operator::zeros(d, d), |acc, a| acc + a);
    let inv_root = eigh(&s).map(|l| 1.0 / l.sqrt());
    let effects = raw
        .iter()
        .map(|a| hermitian_part(&(&inv_root * a * &inv_root)))
        .collect();
    Observable::from_effects(effects, tol)
}

/// Random sharp observable with `n` outcomes: a Haar basis split into `n`
/// nonempty consecutive groups.
pub fn random_sharp_observable(d: usize, n: usize, rng: &mut impl Rng, tol: &Tolerance) -> Result<Observable> {
    if n == 0 || n > d {
        return Err(Error::InvalidObservable(format!(
            "cannot split dimension {d} into {n} nonempty projections"
        )));
    }
    let u = haar_unitary(d, rng);
    let mut sizes = vec![1usize; n];
    for _ in n..d {
        let k = rng.random_range(0..n);
        sizes[k] += 1;
    }
    let mut effects = Vec::with_capacity(n);
    let mut start = 0;
    for s in sizes {
        let mut p = Operator::zeros(d, d);
        for k in start..start + s {
            let v = u.column(k).into_owned();
            p += outer(&v, &v);
        }
        effects.push(p);
        start += s;
    }
    Observable::from_effects(effects, tol)
}

/// Random channel `C^{d_in} → C^{d_out}` with `n_kraus` Kraus operators, the
/// blocks of a random isometry `C^{d_in} → C^{d_out} ⊗ C^{n_kraus}`.
pub fn random_channel(d_in: usize, d_out: usize, n_kraus: usize, rng: &mut impl Rng, tol: &Tolerance) -> Result<OperationMap> {
    if n_kraus == 0 {
        return Err(Error::EmptyKraus);
    }
    if d_out * n_kraus < d_in {
        return Err(Error::Precondition(format!(
            "{n_kraus} Kraus operators into dimension {d_out} cannot preserve the trace on dimension {d_in}"
        )));
    }
    let g = ginibre(d_out * n_kraus, d_in, rng);
    let gram = g.adjoint() * &g;
    let inv_root = eigh(&gram).map(|l| 1.0 / l.sqrt());
    let v = g * inv_root;
    let kraus = (0..n_kraus)
        .map(|k| v.rows(k * d_out, d_out).into_owned())
        .collect();
    OperationMap::channel(kraus, tol)
}

/// Random unital channel: a convex mixture of `n` Haar unitaries.
pub fn random_unital_channel(d: usize, n: usize, rng: &mut impl Rng, tol: &Tolerance) -> Result<OperationMap> {
    if n == 0 {
        return Err(Error::EmptyKraus);
    }
    let weights: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = weights.iter().sum();
    let kraus = weights
        .iter()
        .map(|w| haar_unitary(d, rng) * c((w / total).sqrt(), 0.0))
        .collect();
    OperationMap::channel(kraus, tol)
}

/// Unitary commuting with the Hermitian `n`: `exp(iH)` with `H` a random
/// Hermitian operator block-diagonal in the eigenspaces of `n` (eigenvalues
/// closer than `rank_tol` share a block).
pub fn conservative_unitary(n: &Operator, rng: &mut impl Rng, tol: &Tolerance) -> Result<Operator> {
    crate::opcore::require_hermitian(n, tol)?;
    let e = eigh(n);
    let d = n.nrows();
    let mut h = Operator::zeros(d, d);
    for cl in clusters(&e.values, tol.rank_tol) {
        let k = cl.len();
        let block = random_hermitian(k, rng);
        let basis = Operator::from_fn(d, k, |r, j| e.vectors[(r, cl[j])]);
        h += &basis * block * basis.adjoint();
    }
    Ok(expm_i_hermitian(&h))
}

/// Random effect with eigenvalues uniform in `[0, 1]` in a Haar basis.
pub fn random_effect(d: usize, rng: &mut impl Rng) -> Operator {
    let u = haar_unitary(d, rng);
    let mut out = Operator::zeros(d, d);
    for k in 0..d {
        let v = u.column(k).into_owned();
        out += outer(&v, &v) * c(rng.random::<f64>(), 0.0);
    }
    out
}

/// Random column-stochastic matrix `p[x][z]` with `n_out` rows and `n_in`
/// columns whose columns are strictly positive.
pub fn random_stochastic(n_out: usize, n_in: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n_in]; n_out];
    for z in 0..n_in {
        let col: Vec<f64> = (0..n_out).map(|_| rng.random::<f64>() + 0.05).collect();
        let s: f64 = col.iter().sum();
        for x in 0..n_out {
            m[x][z] = col[x] / s;
        }
    }
    m
}

/// Hermitian operator with integer eigenvalues in `0..levels` in a Haar
/// basis. Sums of such operators have degenerate spectra, which leaves room
/// for nontrivial conservative couplings.
pub fn random_integer_hermitian(d: usize, levels: u32, rng: &mut impl Rng) -> Operator {
    let u = haar_unitary(d, rng);
    let values: Vec<f64> = (0..d).map(|_| f64::from(rng.random_range(0..levels.max(1)))).collect();
    let mut h = Operator::zeros(d, d);
    for (k, &v) in values.iter().enumerate() {
        let col = u.column(k).into_owned();
        h += outer(&col, &col) * c(v, 0.0);
    }
    hermitian_part(&h)
}

/// A seeded measurement scheme whose coupling conserves an additive quantity,
/// together with observables on the system to test it against.
#[derive(Debug, Clone)]
pub struct ConservativeScenario {
    pub scheme: crate::measure::MeasurementScheme,
    pub quantity: crate::conserve::AdditiveQuantity,
    /// Random observable on the system with the pointer's outcome labels.
    pub target: Observable,
    /// Random observable on the system, used as the disturbed observable.
    pub probe: Observable,
}

/// Conservative scenario on `C^ds ⊗ C^da`: integer-spectrum `N_S`, `N_A`, a
/// conservative unitary coupling, a random apparatus state and a random
/// pointer with `n_outcomes` outcomes.
pub fn random_conservative_scenario(
    ds: usize,
    da: usize,
    n_outcomes: usize,
    rng: &mut impl Rng,
    tol: &Tolerance,
) -> Result<ConservativeScenario> {
    let n_sys = random_integer_hermitian(ds, 3, rng);
    let n_app = random_integer_hermitian(da, 3, rng);
    let quantity = crate::conserve::AdditiveQuantity::new(n_sys, n_app, tol)?;
    let u = conservative_unitary(&quantity.composite(), rng, tol)?;
    let coupling = OperationMap::unitary(u, tol)?;
    let xi = random_state(da, rng);
    let pointer = random_povm(da, n_outcomes, rng, tol)?;
    let scheme = crate::measure::MeasurementScheme::new(ds, da, xi, coupling, pointer, tol)?;
    let target = random_povm(ds, n_outcomes, rng, tol)?;
    let probe = random_povm(ds, 2, rng, tol)?;
    Ok(ConservativeScenario {
        scheme,
        quantity,
        target,
        probe,
    })
}

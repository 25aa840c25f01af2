//! Completely positive maps in Kraus form, their Heisenberg duals and the
//! operator-valued sesquilinear defect `⟨⟨A|B⟩⟩ = Φ*(A†B) − Φ*(A†)Φ*(B)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::opcore::{
    self, c, commutator, eigh, identity, matrix_unit, op_norm, unvec, vec_col, Operator,
    Tolerance,
};
use crate::report::{digest_operators, BoundId, BoundReport};

/// A trace non-increasing CP map `t ↦ Σ K t K†` from `L(C^in)` to `L(C^out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperationMap {
    in_dim: usize,
    out_dim: usize,
    kraus: Vec<Operator>,
}

/// Outcome of a multiplicative-domain test for a fixed right factor `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Multiplicability {
    /// `‖Φ*(b†b) − Φ*(b†)Φ*(b)‖`.
    pub precondition_defect: f64,
    /// Whether the precondition holds, i.e. the test applies.
    pub applicable: bool,
    /// Maximum of `‖Φ*(ab) − Φ*(a)Φ*(b)‖` over matrix units `a`.
    pub witness: f64,
    pub holds: bool,
}

impl OperationMap {
    fn shape_check(kraus: &[Operator]) -> Result<(usize, usize)> {
        let first = kraus.first().ok_or(Error::EmptyKraus)?;
        let (out_dim, in_dim) = first.shape();
        for k in kraus {
            if !opcore::is_finite(k) {
                return Err(Error::NonFinite { context: "Kraus operator" });
            }
            if k.nrows() != out_dim {
                return Err(Error::DimensionMismatch {
                    context: "Kraus operator rows",
                    expected: out_dim,
                    found: k.nrows(),
                });
            }
            if k.ncols() != in_dim {
                return Err(Error::DimensionMismatch {
                    context: "Kraus operator columns",
                    expected: in_dim,
                    found: k.ncols(),
                });
            }
        }
        Ok((in_dim, out_dim))
    }

    /// Operation from Kraus operators, checked to be trace non-increasing.
    pub fn new(kraus: Vec<Operator>, tol: &Tolerance) -> Result<Self> {
        let (in_dim, out_dim) = Self::shape_check(&kraus)?;
        let map = Self {
            in_dim,
            out_dim,
            kraus,
        };
        let excess = opcore::max_eigenvalue(&map.kraus_sum()) - 1.0;
        if excess > tol.eq_tol {
            return Err(Error::NotTraceNonIncreasing { excess });
        }
        Ok(map)
    }

    /// Channel from Kraus operators, checked to be trace preserving.
    pub fn channel(kraus: Vec<Operator>, tol: &Tolerance) -> Result<Self> {
        let map = Self::new(kraus, tol)?;
        let defect = map.trace_defect();
        if defect > tol.eq_tol {
            return Err(Error::NotChannel { defect });
        }
        Ok(map)
    }

    /// Kraus set assembled by a construction that guarantees complete
    /// positivity and the trace bound; only shapes are checked.
    pub(crate) fn from_kraus(kraus: Vec<Operator>) -> Self {
        let (in_dim, out_dim) = Self::shape_check(&kraus).expect("well-formed Kraus set");
        Self {
            in_dim,
            out_dim,
            kraus,
        }
    }

    pub fn identity(d: usize) -> Self {
        Self::from_kraus(vec![identity(d)])
    }

    /// Unitary channel `t ↦ U t U†`.
    pub fn unitary(u: Operator, tol: &Tolerance) -> Result<Self> {
        let defect = opcore::unitarity_defect(&u);
        if defect > tol.eq_tol {
            return Err(Error::NotUnitary { defect });
        }
        Ok(Self::from_kraus(vec![u]))
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn kraus(&self) -> &[Operator] {
        &self.kraus
    }

    /// `Σ K† K`.
    pub fn kraus_sum(&self) -> Operator {
        self.kraus
            .iter()
            .fold(Operator::zeros(self.in_dim, self.in_dim), |acc, k| {
                acc + k.adjoint() * k
            })
    }

    /// `‖Σ K†K − 𝟙‖`.
    pub fn trace_defect(&self) -> f64 {
        op_norm(&(self.kraus_sum() - identity(self.in_dim)))
    }

    pub fn is_channel(&self, tol: &Tolerance) -> bool {
        self.trace_defect() <= tol.eq_tol
    }

    /// A single Kraus operator that is unitary.
    pub fn is_unitary(&self, tol: &Tolerance) -> bool {
        self.kraus.len() == 1 && opcore::is_unitary(&self.kraus[0], tol)
    }

    fn check_dim(&self, a: &Operator, expected: usize, context: &'static str) -> Result<()> {
        if a.nrows() != expected || a.ncols() != expected {
            return Err(Error::DimensionMismatch {
                context,
                expected,
                found: a.nrows().max(a.ncols()),
            });
        }
        Ok(())
    }

    /// Schrödinger picture `Σ K t K†`.
    pub fn apply(&self, t: &Operator) -> Result<Operator> {
        self.check_dim(t, self.in_dim, "apply")?;
        Ok(self.apply_unchecked(t))
    }

    pub(crate) fn apply_unchecked(&self, t: &Operator) -> Operator {
        self.kraus
            .iter()
            .fold(Operator::zeros(self.out_dim, self.out_dim), |acc, k| {
                acc + k * t * k.adjoint()
            })
    }

    /// Heisenberg picture `Σ K† a K`.
    pub fn apply_dual(&self, a: &Operator) -> Result<Operator> {
        self.check_dim(a, self.out_dim, "apply_dual")?;
        Ok(self.dual_unchecked(a))
    }

    pub(crate) fn dual_unchecked(&self, a: &Operator) -> Operator {
        self.kraus
            .iter()
            .fold(Operator::zeros(self.in_dim, self.in_dim), |acc, k| {
                acc + k.adjoint() * a * k
            })
    }

    /// `⟨⟨a|b⟩⟩ = Φ*(a†b) − Φ*(a†)Φ*(b)`.
    pub fn sesquilinear(&self, a: &Operator, b: &Operator) -> Result<Operator> {
        self.check_dim(a, self.out_dim, "sesquilinear")?;
        self.check_dim(b, self.out_dim, "sesquilinear")?;
        Ok(self.sesquilinear_unchecked(a, b))
    }

    pub(crate) fn sesquilinear_unchecked(&self, a: &Operator, b: &Operator) -> Operator {
        let ad = a.adjoint();
        self.dual_unchecked(&(&ad * b)) - self.dual_unchecked(&ad) * self.dual_unchecked(b)
    }

    /// `‖⟨⟨a|a⟩⟩‖`.
    pub(crate) fn self_defect(&self, a: &Operator) -> f64 {
        op_norm(&self.sesquilinear_unchecked(a, a))
    }

    /// Commutator defect `‖[Φ*a, Φ*b] − Φ*[a,b]‖` against
    /// `‖⟨⟨a|a⟩⟩‖^½‖⟨⟨b†|b†⟩⟩‖^½ + ‖⟨⟨a†|a†⟩⟩‖^½‖⟨⟨b|b⟩⟩‖^½`.
    pub fn commutator_defect_bound(
        &self,
        a: &Operator,
        b: &Operator,
        tol: &Tolerance,
    ) -> Result<BoundReport> {
        self.check_dim(a, self.out_dim, "commutator_defect_bound")?;
        self.check_dim(b, self.out_dim, "commutator_defect_bound")?;
        let pa = self.dual_unchecked(a);
        let pb = self.dual_unchecked(b);
        let lhs = op_norm(&(commutator(&pa, &pb) - self.dual_unchecked(&commutator(a, b))));
        let ad = a.adjoint();
        let bd = b.adjoint();
        let rhs = self.self_defect(a).sqrt() * self.self_defect(&bd).sqrt()
            + self.self_defect(&ad).sqrt() * self.self_defect(b).sqrt();
        let mut ops: Vec<&Operator> = vec![a, b];
        ops.extend(self.kraus.iter());
        Ok(BoundReport::new(
            BoundId::CommutatorDefect,
            "",
            lhs,
            rhs,
            Vec::new(),
            &digest_operators(&ops),
            tol,
        ))
    }

    /// If `⟨⟨b|b⟩⟩ = 0` within `eq_tol`, test `Φ*(ab) = Φ*(a)Φ*(b)` on all
    /// matrix units `a`.
    pub fn check_multiplicability(&self, b: &Operator, tol: &Tolerance) -> Result<Multiplicability> {
        self.check_dim(b, self.out_dim, "check_multiplicability")?;
        let precondition_defect = self.self_defect(b);
        if precondition_defect > tol.eq_tol {
            return Ok(Multiplicability {
                precondition_defect,
                applicable: false,
                witness: f64::NAN,
                holds: false,
            });
        }
        let d = self.out_dim;
        let pb = self.dual_unchecked(b);
        let mut witness = 0.0_f64;
        for i in 0..d {
            for j in 0..d {
                let a = matrix_unit(d, i, j);
                let lhs = self.dual_unchecked(&(&a * b));
                let rhs = self.dual_unchecked(&a) * &pb;
                witness = witness.max(op_norm(&(lhs - rhs)));
            }
        }
        Ok(Multiplicability {
            precondition_defect,
            applicable: true,
            witness,
            holds: witness <= tol.eq_tol * b.norm().max(1.0),
        })
    }

    /// Matrix `M` with `M vec(a) = vec(Φ*(a))` under column stacking, of
    /// shape `in² × out²`.
    pub fn to_supermatrix(&self) -> Operator {
        let mut m = Operator::zeros(self.in_dim * self.in_dim, self.out_dim * self.out_dim);
        for k in &self.kraus {
            m += k.transpose().kronecker(&k.adjoint());
        }
        m
    }

    /// Choi matrix `Σ vec(K) vec(K)†`.
    pub fn choi(&self) -> Operator {
        let n = self.in_dim * self.out_dim;
        let mut ch = Operator::zeros(n, n);
        for k in &self.kraus {
            let v = vec_col(k);
            ch += &v * v.adjoint();
        }
        ch
    }

    /// Minimal Kraus set from the Choi eigendecomposition, dropping
    /// eigenvalues below `rank_tol`.
    pub fn compress(&self, tol: &Tolerance) -> Self {
        let e = eigh(&self.choi());
        let mut kraus = Vec::new();
        for (k, &l) in e.values.iter().enumerate().rev() {
            if l > tol.rank_tol {
                let v = e.vector(k) * c(l.sqrt(), 0.0);
                kraus.push(unvec(&v, self.out_dim, self.in_dim));
            }
        }
        if kraus.is_empty() {
            kraus.push(Operator::zeros(self.out_dim, self.in_dim));
        }
        Self::from_kraus(kraus)
    }

    /// Sum of operations with equal dimensions (concatenated Kraus sets).
    pub fn sum(maps: &[OperationMap]) -> Result<Self> {
        let first = maps.first().ok_or(Error::EmptyKraus)?;
        let mut kraus = Vec::new();
        for m in maps {
            if m.in_dim != first.in_dim || m.out_dim != first.out_dim {
                return Err(Error::DimensionMismatch {
                    context: "sum of operations",
                    expected: first.in_dim,
                    found: m.in_dim,
                });
            }
            kraus.extend(m.kraus.iter().cloned());
        }
        Ok(Self::from_kraus(kraus))
    }

    /// The same operation scaled by `s ≥ 0` (Kraus operators by `√s`).
    pub fn scaled(&self, s: f64) -> Self {
        let r = c(s.max(0.0).sqrt(), 0.0);
        Self::from_kraus(self.kraus.iter().map(|k| k * r).collect())
    }
}

/// `phi2 ∘ phi1` with Kraus set `{K2_j K1_i}` (no pruning).
pub fn compose(phi2: &OperationMap, phi1: &OperationMap) -> Result<OperationMap> {
    if phi1.out_dim != phi2.in_dim {
        return Err(Error::DimensionMismatch {
            context: "compose",
            expected: phi2.in_dim,
            found: phi1.out_dim,
        });
    }
    let mut kraus = Vec::with_capacity(phi1.kraus.len() * phi2.kraus.len());
    for k2 in &phi2.kraus {
        for k1 in &phi1.kraus {
            kraus.push(k2 * k1);
        }
    }
    Ok(OperationMap::from_kraus(kraus))
}

/// The qutrit channel that conserves `N = diag(1, 0, −1)` on average but not
/// fully. Basis order is `|1>, |0>, |−1>`.
pub fn qutrit_average_channel() -> OperationMap {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let k = |i: usize, j: usize, w: f64| matrix_unit(3, i, j) * c(w, 0.0);
    OperationMap::from_kraus(vec![k(0, 0, 1.0), k(2, 2, 1.0), k(0, 1, s), k(2, 1, s)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opcore::{diag, pauli_x};

    #[test]
    fn qutrit_dual_values() {
        let phi = qutrit_average_channel();
        let n = diag(&[1.0, 0.0, -1.0]);
        assert!(phi.is_channel(&Tolerance::default()));
        assert!(op_norm(&(phi.apply_dual(&n).unwrap() - &n)) < 1e-15);
        assert!(op_norm(&(phi.apply_dual(&(&n * &n)).unwrap() - identity(3))) < 1e-15);
    }

    #[test]
    fn rejects_non_contractive() {
        let k = identity(2) * c(1.1, 0.0);
        assert!(matches!(
            OperationMap::new(vec![k], &Tolerance::default()),
            Err(Error::NotTraceNonIncreasing { .. })
        ));
        assert!(matches!(
            OperationMap::new(vec![], &Tolerance::default()),
            Err(Error::EmptyKraus)
        ));
    }

    #[test]
    fn supermatrix_of_bit_flip_spectrum() {
        let phi = OperationMap::unitary(pauli_x(), &Tolerance::default()).unwrap();
        let m = phi.to_supermatrix();
        let ev = eigh(&m).values;
        for (got, want) in ev.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }
}

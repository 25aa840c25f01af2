//! Observables, instruments and measurement schemes.
//!
//! A [`MeasurementScheme`] `(A, ξ, E, Z)` realizes an instrument by coupling
//! the system to an apparatus prepared in `ξ` with the channel `E` and then
//! reading the pointer `Z`. Every derived map is built in Kraus form from a
//! purification of `ξ`, so no Choi matrix of the composite is ever assembled.

use serde::{Deserialize, Serialize};

use crate::cpmaps::{compose, OperationMap};
use crate::error::{Error, Result};
use crate::opcore::{
    self, basis_vector, c, commutator, eigenspace_projector, eigh, identity, matrix_unit,
    op_norm, outer, tensor, Operator, Tolerance, Vector,
};

/// A finite POVM with ordered, opaque outcome labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    outcomes: Vec<String>,
    effects: Vec<Operator>,
}

impl Observable {
    /// Validates that every effect lies in `[0, 𝟙]` and that they sum to `𝟙`.
    pub fn new(outcomes: Vec<String>, effects: Vec<Operator>, tol: &Tolerance) -> Result<Self> {
        if effects.is_empty() {
            return Err(Error::InvalidObservable("no effects".into()));
        }
        if outcomes.len() != effects.len() {
            return Err(Error::InvalidObservable(format!(
                "{} labels for {} effects",
                outcomes.len(),
                effects.len()
            )));
        }
        for (k, l) in outcomes.iter().enumerate() {
            if outcomes[..k].contains(l) {
                return Err(Error::InvalidObservable(format!("duplicate label {l:?}")));
            }
        }
        let d = effects[0].nrows();
        let mut total = Operator::zeros(d, d);
        for (l, e) in outcomes.iter().zip(&effects) {
            if e.nrows() != d || e.ncols() != d {
                return Err(Error::InvalidObservable(format!(
                    "effect {l:?} has shape {}x{}, expected {d}x{d}",
                    e.nrows(),
                    e.ncols()
                )));
            }
            if !opcore::is_effect(e, tol) {
                let h = opcore::hermiticity_defect(e);
                let spec = eigh(e).values;
                return Err(Error::InvalidObservable(format!(
                    "effect {l:?} is not in [0, 1] (hermiticity defect {h:.3e}, spectrum [{:.6}, {:.6}])",
                    spec.first().copied().unwrap_or(0.0),
                    spec.last().copied().unwrap_or(0.0)
                )));
            }
            total += e;
        }
        let defect = op_norm(&(total - identity(d)));
        if defect > tol.eq_tol {
            return Err(Error::InvalidObservable(format!(
                "effects sum to identity only within {defect:.3e}"
            )));
        }
        Ok(Self { outcomes, effects })
    }

    /// Observable with labels `"0", "1", …`.
    pub fn from_effects(effects: Vec<Operator>, tol: &Tolerance) -> Result<Self> {
        let labels = (0..effects.len()).map(|k| k.to_string()).collect();
        Self::new(labels, effects, tol)
    }

    pub(crate) fn from_parts(outcomes: Vec<String>, effects: Vec<Operator>) -> Self {
        Self { outcomes, effects }
    }

    /// Sharp rank-one observable of the columns of a unitary.
    pub fn from_basis(u: &Operator) -> Self {
        let effects = (0..u.ncols())
            .map(|k| {
                let v = u.column(k).into_owned();
                outer(&v, &v)
            })
            .collect::<Vec<_>>();
        let labels = (0..effects.len()).map(|k| k.to_string()).collect();
        Self::from_parts(labels, effects)
    }

    /// `E'(y) = Σ_z M[y][z] E(z)` for a column-stochastic `M`.
    pub fn post_process(&self, m: &[Vec<f64>], tol: &Tolerance) -> Result<Self> {
        let d = self.dim();
        let effects = m
            .iter()
            .map(|row| {
                if row.len() != self.len() {
                    return Err(Error::InvalidObservable(format!(
                        "stochastic row has {} entries, expected {}",
                        row.len(),
                        self.len()
                    )));
                }
                Ok(row
                    .iter()
                    .zip(&self.effects)
                    .fold(Operator::zeros(d, d), |acc, (w, e)| acc + e * c(*w, 0.0)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_effects(effects, tol)
    }

    pub fn dim(&self) -> usize {
        self.effects[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn effects(&self) -> &[Operator] {
        &self.effects
    }

    pub fn effect(&self, k: usize) -> &Operator {
        &self.effects[k]
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.outcomes.iter().position(|l| l == label)
    }

    /// `‖E(x) − E(x)²‖`.
    pub fn unsharpness(&self, k: usize) -> f64 {
        let e = &self.effects[k];
        op_norm(&(e - e * e))
    }

    /// Mutually orthogonal projections.
    pub fn is_sharp(&self, tol: &Tolerance) -> bool {
        self.effects.iter().all(|e| opcore::is_projection(e, tol))
            && self.pairs().all(|(i, j)| {
                op_norm(&(&self.effects[i] * &self.effects[j])) <= tol.eq_tol
            })
    }

    pub fn is_commutative(&self, tol: &Tolerance) -> bool {
        self.pairs()
            .all(|(i, j)| op_norm(&commutator(&self.effects[i], &self.effects[j])) <= tol.eq_tol)
    }

    /// Every nonzero effect has norm 1.
    pub fn is_norm_one(&self, tol: &Tolerance) -> bool {
        self.effects.iter().all(|e| {
            let n = op_norm(e);
            n <= tol.rank_tol || (n - 1.0).abs() <= tol.rank_tol
        })
    }

    /// Every nonzero effect has rank 1.
    pub fn is_rank_one(&self, tol: &Tolerance) -> bool {
        self.effects.iter().all(|e| {
            let r = eigh(e).values.iter().filter(|&&l| l > tol.rank_tol).count();
            r <= 1
        })
    }

    /// Every effect is a multiple of the identity.
    pub fn is_trivial(&self, tol: &Tolerance) -> bool {
        let d = self.dim() as f64;
        self.effects.iter().all(|e| {
            let m = opcore::trace(e).re / d;
            op_norm(&(e - identity(self.dim()) * c(m, 0.0))) <= tol.eq_tol
        })
    }

    fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.len();
        (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| (i, j)))
    }
}

/// A finite family of operations whose sum is a channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Instrument {
    outcomes: Vec<String>,
    operations: Vec<OperationMap>,
}

impl Instrument {
    pub fn new(outcomes: Vec<String>, operations: Vec<OperationMap>, tol: &Tolerance) -> Result<Self> {
        if operations.is_empty() || outcomes.len() != operations.len() {
            return Err(Error::InvalidObservable(format!(
                "{} labels for {} operations",
                outcomes.len(),
                operations.len()
            )));
        }
        let d = operations[0].in_dim();
        for op in &operations {
            if op.in_dim() != d || op.out_dim() != d {
                return Err(Error::DimensionMismatch {
                    context: "instrument operation",
                    expected: d,
                    found: op.in_dim().max(op.out_dim()),
                });
            }
        }
        let inst = Self {
            outcomes,
            operations,
        };
        let defect = inst.channel().trace_defect();
        if defect > tol.eq_tol {
            return Err(Error::NotChannel { defect });
        }
        Ok(inst)
    }

    pub(crate) fn from_parts(outcomes: Vec<String>, operations: Vec<OperationMap>) -> Self {
        Self {
            outcomes,
            operations,
        }
    }

    /// Lüders instrument `t ↦ √E(x) t √E(x)`.
    pub fn luders(e: &Observable, tol: &Tolerance) -> Result<Self> {
        let operations = e
            .effects()
            .iter()
            .map(|eff| Ok(OperationMap::from_kraus(vec![opcore::psd_sqrt(eff, tol)?])))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_parts(e.outcomes().to_vec(), operations))
    }

    /// `I_x(ρ) = tr[E(x)ρ] |ψ_x><ψ_x|` for unit vectors `ψ_x`.
    pub fn rank_one_collapse(e: &Observable, states: &[Vector], tol: &Tolerance) -> Result<Self> {
        if states.len() != e.len() {
            return Err(Error::DimensionMismatch {
                context: "collapse states",
                expected: e.len(),
                found: states.len(),
            });
        }
        let d = e.dim();
        let mut operations = Vec::with_capacity(e.len());
        for (eff, psi) in e.effects().iter().zip(states) {
            if psi.len() != d {
                return Err(Error::DimensionMismatch {
                    context: "collapse state",
                    expected: d,
                    found: psi.len(),
                });
            }
            let psi = psi / c(psi.norm(), 0.0);
            let root = opcore::psd_sqrt(eff, tol)?;
            let kraus = (0..d)
                .map(|k| outer(&psi, &basis_vector(d, k)) * &root)
                .collect();
            operations.push(OperationMap::from_kraus(kraus));
        }
        Ok(Self::from_parts(e.outcomes().to_vec(), operations))
    }

    pub fn dim(&self) -> usize {
        self.operations[0].in_dim()
    }

    pub fn len(&self) -> usize {
        self.operations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operations.is_empty()
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn operations(&self) -> &[OperationMap] {
        &self.operations
    }

    pub fn operation(&self, k: usize) -> &OperationMap {
        &self.operations[k]
    }

    /// The nonselective channel `I_X = Σ_x I_x`.
    pub fn channel(&self) -> OperationMap {
        OperationMap::sum(&self.operations).expect("operations share dimensions")
    }

    /// The induced observable `x ↦ I*_x(𝟙)`.
    pub fn observable(&self) -> Observable {
        let d = self.dim();
        let effects = self
            .operations
            .iter()
            .map(|op| opcore::hermitian_part(&op.dual_unchecked(&identity(d))))
            .collect();
        Observable::from_parts(self.outcomes.clone(), effects)
    }

    /// Largest action difference against another instrument on matrix units.
    pub fn distance(&self, other: &Instrument) -> Result<f64> {
        if self.len() != other.len() || self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                context: "instrument comparison",
                expected: self.len(),
                found: other.len(),
            });
        }
        let d = self.dim();
        let mut worst = 0.0_f64;
        for (a, b) in self.operations.iter().zip(&other.operations) {
            for i in 0..d {
                for j in 0..d {
                    let t = matrix_unit(d, i, j);
                    worst = worst.max(op_norm(&(a.apply_unchecked(&t) - b.apply_unchecked(&t))));
                }
            }
        }
        Ok(worst)
    }
}

/// Apparatus-side ingredients `(A, ξ, E, Z)` of a measurement model.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementScheme {
    sys_dim: usize,
    app_dim: usize,
    xi: Operator,
    coupling: OperationMap,
    pointer: Observable,
}

/// Kraus-form views of the maps a scheme induces on the system.
#[derive(Debug, Clone)]
pub struct RestrictionMaps {
    /// Predual of `Γ_ξ`: `t ↦ t ⊗ ξ`.
    pub embed: OperationMap,
    /// Predual of `Γ_ξ^E = Γ_ξ ∘ E*`: `t ↦ E(t ⊗ ξ)`.
    pub evolved: OperationMap,
    /// Conjugate channel `Λ(t) = tr_S[E(t ⊗ ξ)]`.
    pub conjugate: OperationMap,
}

impl RestrictionMaps {
    /// `Γ_ξ(B)`.
    pub fn gamma(&self, b: &Operator) -> Result<Operator> {
        self.embed.apply_dual(b)
    }

    /// `Γ_ξ^E(B)`.
    pub fn gamma_evolved(&self, b: &Operator) -> Result<Operator> {
        self.evolved.apply_dual(b)
    }

    /// `Λ(t)`.
    pub fn lambda(&self, t: &Operator) -> Result<Operator> {
        self.conjugate.apply(t)
    }

    /// `Λ*(A) = Γ_ξ^E(𝟙 ⊗ A)`.
    pub fn lambda_dual(&self, a: &Operator) -> Result<Operator> {
        self.conjugate.apply_dual(a)
    }
}

impl MeasurementScheme {
    pub fn new(
        sys_dim: usize,
        app_dim: usize,
        xi: Operator,
        coupling: OperationMap,
        pointer: Observable,
        tol: &Tolerance,
    ) -> Result<Self> {
        if xi.nrows() != app_dim || xi.ncols() != app_dim {
            return Err(Error::DimensionMismatch {
                context: "apparatus state",
                expected: app_dim,
                found: xi.nrows(),
            });
        }
        if !opcore::is_state(&xi, tol) {
            return Err(Error::NotState {
                reason: "apparatus state xi".into(),
            });
        }
        let comp = sys_dim * app_dim;
        if coupling.in_dim() != comp || coupling.out_dim() != comp {
            return Err(Error::DimensionMismatch {
                context: "coupling",
                expected: comp,
                found: coupling.in_dim(),
            });
        }
        let defect = coupling.trace_defect();
        if defect > tol.eq_tol {
            return Err(Error::NotChannel { defect });
        }
        if pointer.dim() != app_dim {
            return Err(Error::DimensionMismatch {
                context: "pointer observable",
                expected: app_dim,
                found: pointer.dim(),
            });
        }
        Ok(Self {
            sys_dim,
            app_dim,
            xi,
            coupling,
            pointer,
        })
    }

    pub fn sys_dim(&self) -> usize {
        self.sys_dim
    }

    pub fn app_dim(&self) -> usize {
        self.app_dim
    }

    pub fn xi(&self) -> &Operator {
        &self.xi
    }

    pub fn coupling(&self) -> &OperationMap {
        &self.coupling
    }

    pub fn pointer(&self) -> &Observable {
        &self.pointer
    }

    /// Kraus operators `𝟙 ⊗ √q_i φ_i` of the embedding `t ↦ t ⊗ ξ`.
    fn embedding_kraus(&self) -> Vec<Operator> {
        let e = eigh(&self.xi);
        let id = identity(self.sys_dim);
        let mut out = Vec::new();
        for (k, &q) in e.values.iter().enumerate().rev() {
            if q > 0.0 {
                let col = e.vector(k) * c(q.sqrt(), 0.0);
                let phi = Operator::from_column_slice(self.app_dim, 1, col.as_slice());
                out.push(tensor(&id, &phi));
            }
        }
        out
    }

    /// `𝟙_S ⊗ <a|`.
    fn app_contraction(&self, a: usize) -> Operator {
        let bra = Operator::from_fn(1, self.app_dim, |_, j| c(if j == a { 1.0 } else { 0.0 }, 0.0));
        tensor(&identity(self.sys_dim), &bra)
    }

    /// `<s| ⊗ 𝟙_A`.
    fn sys_contraction(&self, s: usize) -> Operator {
        let bra = Operator::from_fn(1, self.sys_dim, |_, j| c(if j == s { 1.0 } else { 0.0 }, 0.0));
        tensor(&bra, &identity(self.app_dim))
    }

    pub fn restriction_maps(&self) -> RestrictionMaps {
        let embed = OperationMap::from_kraus(self.embedding_kraus());
        let evolved = compose(&self.coupling, &embed).expect("dimensions agree");
        let mut conj = Vec::new();
        for k in evolved.kraus() {
            for s in 0..self.sys_dim {
                conj.push(self.sys_contraction(s) * k);
            }
        }
        RestrictionMaps {
            embed,
            evolved,
            conjugate: OperationMap::from_kraus(conj),
        }
    }

    /// `I_x(t) = tr_A[(𝟙 ⊗ Z(x)) E(t ⊗ ξ)]` in Kraus form.
    pub fn instrument(&self, tol: &Tolerance) -> Result<Instrument> {
        let maps = self.restriction_maps();
        let mut operations = Vec::with_capacity(self.pointer.len());
        for z in self.pointer.effects() {
            let root = tensor(&identity(self.sys_dim), &opcore::psd_sqrt(z, tol)?);
            let mut kraus = Vec::new();
            for k in maps.evolved.kraus() {
                let rk = &root * k;
                for a in 0..self.app_dim {
                    kraus.push(self.app_contraction(a) * &rk);
                }
            }
            operations.push(OperationMap::from_kraus(kraus));
        }
        Ok(Instrument::from_parts(
            self.pointer.outcomes().to_vec(),
            operations,
        ))
    }

    /// `E(x) = Γ_ξ^E(𝟙 ⊗ Z(x))`.
    pub fn measured_observable(&self) -> Observable {
        let maps = self.restriction_maps();
        let id = identity(self.sys_dim);
        let effects = self
            .pointer
            .effects()
            .iter()
            .map(|z| opcore::hermitian_part(&maps.evolved.dual_unchecked(&tensor(&id, z))))
            .collect();
        Observable::from_parts(self.pointer.outcomes().to_vec(), effects)
    }

    /// `Z^τ(x) = E*(𝟙 ⊗ Z(x))` on the composite.
    pub fn heisenberg_pointer(&self) -> Observable {
        let id = identity(self.sys_dim);
        let effects = self
            .pointer
            .effects()
            .iter()
            .map(|z| opcore::hermitian_part(&self.coupling.dual_unchecked(&tensor(&id, z))))
            .collect();
        Observable::from_parts(self.pointer.outcomes().to_vec(), effects)
    }
}

/// Normal measurement scheme reproducing the Lüders instrument of `e`: pointer
/// `|x><x|` on `C^n`, apparatus in `|0>`, and a unitary coupling completing
/// `ψ ⊗ |0> ↦ Σ_x √E(x)ψ ⊗ |x>` by Gram–Schmidt over the standard basis.
pub fn normal_dilation(e: &Observable, tol: &Tolerance) -> Result<MeasurementScheme> {
    let n = e.len();
    let ds = e.dim();
    let dim = ds * n;
    let roots = e
        .effects()
        .iter()
        .map(|eff| opcore::psd_sqrt(eff, tol))
        .collect::<Result<Vec<_>>>()?;

    let mut u = Operator::zeros(dim, dim);
    let mut columns: Vec<Vector> = Vec::with_capacity(dim);
    for s in 0..ds {
        let col = Vector::from_fn(dim, |r, _| {
            let (s2, x) = (r / n, r % n);
            roots[x][(s2, s)]
        });
        u.set_column(s * n, &col);
        columns.push(col);
    }
    let mut free: Vec<usize> = (0..dim).filter(|i| i % n != 0).collect();
    free.reverse();
    for k in 0..dim {
        if free.is_empty() {
            break;
        }
        let mut r = basis_vector(dim, k);
        for _ in 0..2 {
            for q in &columns {
                let coef = q.dotc(&r);
                r -= q * coef;
            }
        }
        let norm = r.norm();
        if norm > tol.rank_tol {
            let r = r / c(norm, 0.0);
            let slot = free.pop().expect("free slot");
            u.set_column(slot, &r);
            columns.push(r);
        }
    }
    let coupling = OperationMap::unitary(u, tol)?;
    let pointer = Observable::from_parts(
        e.outcomes().to_vec(),
        (0..n).map(|x| matrix_unit(n, x, x)).collect(),
    );
    MeasurementScheme::new(ds, n, matrix_unit(n, 0, 0), coupling, pointer, tol)
}

/// A defect norm with its verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub defect: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(defect: f64, threshold: f64) -> Self {
        Self {
            defect,
            passed: defect <= threshold,
        }
    }
}

/// Repeatability, first-kindness and the identities that repeatability forces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatabilityReport {
    /// `max_x ‖I*_x(E(x)) − E(x)‖`.
    pub repeatable: Check,
    /// `max_x ‖I*_X(E(x)) − E(x)‖`.
    pub first_kind: Check,
    /// `I*_x(A)` agrees with `I*_x(E(x)A)`, `I*_x(AE(x))`, `I*_x(E(x)AE(x))`.
    pub effect_absorption: Check,
    /// `I*_X(E(x)A) = I*_x(A)`.
    pub selective_reduction: Check,
    /// `E(x) = Γ_ξ^E(E(x)ⁿ ⊗ 𝟙) = Γ_ξ^E(𝟙 ⊗ Z(x)ⁿ)` for `n = 1, 2, 3`.
    pub dilation_powers: Option<Check>,
    /// `1 − ‖E(x)‖` and `1 − ‖Z(x)‖`: eigenvalue-1 projectors exist.
    pub eigenvalue_one: Check,
    /// `P(x)E(y) = δ P(x)` and `Q(x)Z(y) = δ Q(x)`.
    pub projector_orthogonality: Check,
    /// `I*_x(A) = I*_x(P(x) A P(x))`.
    pub support_compression: Check,
    /// `Λ*(A) = Λ*(Q(X) A Q(X))`.
    pub pointer_support: Option<Check>,
    /// `I*_x(A) = Γ_ξ^E(A ⊗ Q(x))`.
    pub pointer_projector_form: Option<Check>,
    /// `‖I_x(𝟙) I_y(𝟙)‖` for `x ≠ y`; zero iff all outputs are orthogonal.
    pub output_orthogonality: Check,
    /// Whether the induced observable is sharp.
    pub sharp: bool,
    /// For sharp observables, whether repeatability and first-kindness agree.
    pub sharp_kinds_agree: Option<bool>,
    /// Repeatable implies first kind.
    pub implication_holds: bool,
}

impl RepeatabilityReport {
    /// Every identity that applies passes.
    pub fn all_pass(&self) -> bool {
        let opt = |c: &Option<Check>| c.map(|c| c.passed).unwrap_or(true);
        self.repeatable.passed
            && self.first_kind.passed
            && self.effect_absorption.passed
            && self.selective_reduction.passed
            && opt(&self.dilation_powers)
            && self.eigenvalue_one.passed
            && self.projector_orthogonality.passed
            && self.support_compression.passed
            && opt(&self.pointer_support)
            && opt(&self.pointer_projector_form)
            && self.output_orthogonality.passed
    }
}

fn units(d: usize) -> impl Iterator<Item = Operator> {
    (0..d).flat_map(move |i| (0..d).map(move |j| matrix_unit(d, i, j)))
}

/// Evaluate repeatability and its consequences for `inst`, optionally with a
/// scheme realizing it.
pub fn repeatability_report(
    inst: &Instrument,
    scheme: Option<&MeasurementScheme>,
    tol: &Tolerance,
) -> Result<RepeatabilityReport> {
    let d = inst.dim();
    let thr = tol.eq_tol;
    if let Some(m) = scheme {
        if m.sys_dim() != d || m.pointer().len() != inst.len() {
            return Err(Error::Precondition(
                "scheme and instrument have different shapes".into(),
            ));
        }
        let gap = m.instrument(tol)?.distance(inst)?;
        if gap > tol.eq_tol {
            return Err(Error::Precondition(format!(
                "scheme does not realize the instrument (gap {gap:.3e})"
            )));
        }
    }
    let e = inst.observable();
    let ch = inst.channel();
    let dual = |k: usize, a: &Operator| inst.operation(k).dual_unchecked(a);

    let mut rep = 0.0_f64;
    let mut fk = 0.0_f64;
    for (k, ek) in e.effects().iter().enumerate() {
        rep = rep.max(op_norm(&(dual(k, ek) - ek)));
        fk = fk.max(op_norm(&(ch.dual_unchecked(ek) - ek)));
    }

    let mut absorb = 0.0_f64;
    let mut reduce = 0.0_f64;
    for a in units(d) {
        for (k, ek) in e.effects().iter().enumerate() {
            let base = dual(k, &a);
            absorb = absorb
                .max(op_norm(&(&base - dual(k, &(ek * &a)))))
                .max(op_norm(&(&base - dual(k, &(&a * ek)))))
                .max(op_norm(&(&base - dual(k, &(ek * &a * ek)))));
            reduce = reduce.max(op_norm(&(ch.dual_unchecked(&(ek * &a)) - &base)));
        }
    }

    let projs = e
        .effects()
        .iter()
        .map(|ek| eigenspace_projector(ek, 1.0, tol))
        .collect::<Result<Vec<_>>>()?;
    let mut eig1 = 0.0_f64;
    for ek in e.effects() {
        let n = op_norm(ek);
        if n > tol.rank_tol {
            eig1 = eig1.max(1.0 - opcore::max_eigenvalue(ek));
        }
    }
    let mut orth = 0.0_f64;
    for (x, px) in projs.iter().enumerate() {
        for (y, ey) in e.effects().iter().enumerate() {
            let target = if x == y { px.clone() } else { Operator::zeros(d, d) };
            orth = orth.max(op_norm(&(px * ey - target)));
        }
    }
    let mut compress = 0.0_f64;
    for a in units(d) {
        for (k, px) in projs.iter().enumerate() {
            compress = compress.max(op_norm(&(dual(k, &a) - dual(k, &(px * &a * px)))));
        }
    }

    let (mut powers, mut pointer_support, mut pointer_form) = (None, None, None);
    if let Some(m) = scheme {
        let maps = m.restriction_maps();
        let da = m.app_dim();
        let ida = identity(da);
        let ids = identity(d);
        let mut pw = 0.0_f64;
        for (k, ek) in e.effects().iter().enumerate() {
            let z = m.pointer().effect(k);
            let (mut ep, mut zp) = (ek.clone(), z.clone());
            for _ in 1..=3 {
                pw = pw
                    .max(op_norm(&(ek - maps.evolved.dual_unchecked(&tensor(&ep, &ida)))))
                    .max(op_norm(&(ek - maps.evolved.dual_unchecked(&tensor(&ids, &zp)))));
                ep = &ep * ek;
                zp = &zp * z;
            }
        }
        powers = Some(Check::new(pw, thr));

        let qs = m
            .pointer()
            .effects()
            .iter()
            .map(|z| eigenspace_projector(z, 1.0, tol))
            .collect::<Result<Vec<_>>>()?;
        let mut zeig = 0.0_f64;
        for (k, z) in m.pointer().effects().iter().enumerate() {
            if op_norm(e.effect(k)) > tol.rank_tol {
                zeig = zeig.max(1.0 - opcore::max_eigenvalue(z));
            }
        }
        eig1 = eig1.max(zeig);
        for (x, qx) in qs.iter().enumerate() {
            for (y, zy) in m.pointer().effects().iter().enumerate() {
                let target = if x == y { qx.clone() } else { Operator::zeros(da, da) };
                orth = orth.max(op_norm(&(qx * zy - target)));
            }
        }
        let qall = qs.iter().fold(Operator::zeros(da, da), |acc, q| acc + q);
        let mut ps = 0.0_f64;
        for a in units(da) {
            ps = ps.max(op_norm(
                &(maps.conjugate.dual_unchecked(&a)
                    - maps.conjugate.dual_unchecked(&(&qall * &a * &qall))),
            ));
        }
        pointer_support = Some(Check::new(ps, thr));
        let mut pf = 0.0_f64;
        for a in units(d) {
            for (k, qx) in qs.iter().enumerate() {
                pf = pf.max(op_norm(
                    &(dual(k, &a) - maps.evolved.dual_unchecked(&tensor(&a, qx))),
                ));
            }
        }
        pointer_form = Some(Check::new(pf, thr));
    }

    let outs: Vec<Operator> = inst
        .operations()
        .iter()
        .map(|op| op.apply_unchecked(&(identity(d) * c(1.0 / d as f64, 0.0))))
        .collect();
    let mut oo = 0.0_f64;
    for x in 0..outs.len() {
        for y in 0..outs.len() {
            if x != y {
                oo = oo.max(op_norm(&(&outs[x] * &outs[y])));
            }
        }
    }

    let repeatable = Check::new(rep, thr);
    let first_kind = Check::new(fk, thr);
    let sharp = e.is_sharp(tol);
    Ok(RepeatabilityReport {
        repeatable,
        first_kind,
        effect_absorption: Check::new(absorb, thr),
        selective_reduction: Check::new(reduce, thr),
        dilation_powers: powers,
        eigenvalue_one: Check::new(eig1, thr),
        projector_orthogonality: Check::new(orth, thr),
        support_compression: Check::new(compress, thr),
        pointer_support,
        pointer_projector_form: pointer_form,
        output_orthogonality: Check::new(oo, thr),
        sharp,
        sharp_kinds_agree: sharp.then_some(repeatable.passed == first_kind.passed),
        implication_holds: !repeatable.passed || first_kind.passed,
    })
}

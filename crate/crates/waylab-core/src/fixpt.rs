//! Fixed-point structure of channels.
//!
//! The Heisenberg fixed-point space `F(Φ*)` is the right null space of
//! `M − I`, with `M` the supermatrix of `Φ*`. The Cesàro average `Φ*_av` is the
//! spectral projection `R (L R)⁻¹ L` onto the eigenvalue-1 subspace, where the
//! columns of `R` and the rows of `L` span the right and left null spaces.
//! From `ρ₀ = Φ_av(𝟙/d)` we take the minimal support projection `P` and an
//! isometry `W` onto its range; operators on `PH` are handled in the compressed
//! coordinates `W† a W`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    disturbance_profile, first_kind_defect, repeatability_defect, AVERAGE_CONSERVATION, FIRST_KIND,
    NON_DISTURBANCE, REPEATABLE,
};
use crate::conserve::{check_conservation, AdditiveQuantity};
use crate::cpmaps::OperationMap;
use crate::error::{Error, Result};
use crate::measure::{Instrument, MeasurementScheme, Observable};
use crate::opcore::{
    c, clusters, commutator, eigenspace_projector, eigh, hermitian_orthonormal_basis, hermitian_part,
    identity, matrix_unit, min_eigenvalue, op_norm, orthonormal_basis, range_isometry, span_residual,
    trace, unvec, vec_col, Operator, Tolerance,
};
use crate::report::Hypothesis;

/// Seed of the random linear combination used for joint diagonalization.
pub const JOINT_DIAGONALIZATION_SEED: u64 = 0x5EED_F1C5;

/// A named numerical certificate: `passed` iff `defect ≤ threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub name: String,
    pub defect: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Certification {
    pub fn new(name: &str, defect: f64, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            defect,
            threshold,
            passed: defect <= threshold,
        }
    }
}

/// Fixed points, Cesàro projection and support data of a channel.
#[derive(Debug, Clone)]
pub struct FixedPointAnalysis {
    pub dim: usize,
    /// Hermitian, Hilbert–Schmidt orthonormal basis of `F(Φ*)`.
    pub basis: Vec<Operator>,
    /// Supermatrix of `Φ*_av` under column stacking.
    pub projector: Operator,
    pub rho0: Operator,
    pub support_p: Operator,
    /// Isometry `W` with `W W† = P`.
    pub support_isometry: Operator,
    pub faithful: bool,
    pub algebra_certified: bool,
    /// Hermitian orthonormal basis of `F(Φ*_{av,P})` in compressed coordinates.
    pub restricted_basis: Vec<Operator>,
    pub certifications: Vec<Certification>,
}

impl FixedPointAnalysis {
    pub fn fixed_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn support_rank(&self) -> usize {
        self.support_isometry.ncols()
    }

    /// `Φ*_av(a)`.
    pub fn average_dual(&self, a: &Operator) -> Operator {
        unvec(&(&self.projector * vec_col(a)), self.dim, self.dim)
    }

    /// `Φ_av(t)`, the predual of [`Self::average_dual`].
    pub fn average(&self, t: &Operator) -> Operator {
        let v = self.projector.transpose() * vec_col(&t.transpose());
        unvec(&v, self.dim, self.dim).transpose()
    }

    /// `W† a W`.
    pub fn restrict(&self, a: &Operator) -> Operator {
        self.support_isometry.adjoint() * a * &self.support_isometry
    }

    /// `W b W†`.
    pub fn extend(&self, b: &Operator) -> Operator {
        &self.support_isometry * b * self.support_isometry.adjoint()
    }

    /// Every certificate passed.
    pub fn certified(&self) -> bool {
        self.certifications.iter().all(|c| c.passed)
    }

    pub fn certification(&self, name: &str) -> Option<&Certification> {
        self.certifications.iter().find(|c| c.name == name)
    }
}

/// Right null space of `a` as operators of shape `rows × cols`.
fn null_operators(a: &Operator, rows: usize, cols: usize, threshold: f64) -> Vec<Operator> {
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] <= threshold)
        .map(|k| {
            let v = v_t.row(k).adjoint();
            unvec(&v, rows, cols)
        })
        .collect()
}

/// Orthonormal basis of the right null space of `a`, one vector per column.
fn null_columns(a: &Operator, threshold: f64) -> Operator {
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let null: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] <= threshold)
        .collect();
    Operator::from_fn(a.ncols(), null.len(), |r, j| v_t[(null[j], r)].conj())
}

/// Hermitian basis of a `*`-closed operator space from arbitrary spanning
/// elements.
fn hermitian_span(items: &[Operator], threshold: f64) -> Vec<Operator> {
    let mut parts = Vec::with_capacity(2 * items.len());
    for b in items {
        parts.push(hermitian_part(b));
        parts.push(hermitian_part(&(b * c(0.0, -1.0))));
    }
    hermitian_orthonormal_basis(&parts, threshold)
}

/// Largest distance of either space's basis from the other's span, or
/// infinity when dimensions differ.
fn subspace_distance(a: &[Operator], b: &[Operator]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let ab = a.iter().map(|x| span_residual(b, x)).fold(0.0, f64::max);
    let ba = b.iter().map(|x| span_residual(a, x)).fold(0.0, f64::max);
    ab.max(ba)
}

/// Largest residual of pairwise products from the span of `basis`.
fn closure_defect(basis: &[Operator]) -> f64 {
    let ortho = orthonormal_basis(basis, 0.0);
    let mut worst = 0.0_f64;
    for a in basis {
        for b in basis {
            worst = worst.max(span_residual(&ortho, &(a * b)));
        }
    }
    worst
}

/// Operators commuting with every Kraus operator and its adjoint.
pub fn kraus_commutant(phi: &OperationMap, tol: &Tolerance) -> Vec<Operator> {
    let d = phi.in_dim();
    let id = identity(d);
    let mut blocks = Vec::new();
    for k in phi.kraus() {
        for x in [k.clone(), k.adjoint()] {
            blocks.push(id.kronecker(&x) - x.transpose().kronecker(&id));
        }
    }
    let mut stacked = Operator::zeros(blocks.len() * d * d, d * d);
    for (n, b) in blocks.iter().enumerate() {
        stacked.view_mut((n * d * d, 0), (d * d, d * d)).copy_from(b);
    }
    hermitian_span(&null_operators(&stacked, d, d, tol.rank_tol), tol.rank_tol)
}

/// Fixed-point analysis of a channel with equal input and output dimension.
pub fn analyze_fixed_points(phi: &OperationMap, tol: &Tolerance) -> Result<FixedPointAnalysis> {
    let defect = phi.trace_defect();
    if defect > tol.eq_tol {
        return Err(Error::NotChannel { defect });
    }
    if phi.in_dim() != phi.out_dim() {
        return Err(Error::DimensionMismatch {
            context: "fixed-point analysis",
            expected: phi.in_dim(),
            found: phi.out_dim(),
        });
    }
    let d = phi.in_dim();
    let n = d * d;
    let m = phi.to_supermatrix();
    let shifted = &m - Operator::identity(n, n);
    let right = null_columns(&shifted, tol.rank_tol);
    let left = null_columns(&shifted.adjoint(), tol.rank_tol).adjoint();
    let (r_dim, l_dim) = (right.ncols(), left.nrows());
    if r_dim != l_dim || r_dim == 0 {
        return Err(Error::NullSpaceMismatch { right: r_dim, left: l_dim });
    }
    let gram = &left * &right;
    let inv = gram
        .try_inverse()
        .ok_or_else(|| Error::Singular("left/right eigenvalue-1 pairing".into()))?;
    let projector = &right * inv * &left;

    let null_ops: Vec<Operator> = (0..r_dim)
        .map(|j| unvec(&right.column(j).into_owned(), d, d))
        .collect();
    let basis = hermitian_span(&null_ops, tol.rank_tol);

    let mut analysis = FixedPointAnalysis {
        dim: d,
        basis,
        projector,
        rho0: Operator::zeros(d, d),
        support_p: Operator::zeros(d, d),
        support_isometry: Operator::zeros(d, 0),
        faithful: false,
        algebra_certified: false,
        restricted_basis: Vec::new(),
        certifications: Vec::new(),
    };
    let rho0 = hermitian_part(&analysis.average(&(identity(d) / c(d as f64, 0.0))));
    let w = range_isometry(&rho0, tol.rank_tol);
    analysis.support_p = &w * w.adjoint();
    analysis.faithful = w.ncols() == d;
    analysis.support_isometry = w;
    analysis.rho0 = rho0;

    let restricted_items: Vec<Operator> = analysis.basis.iter().map(|b| analysis.restrict(b)).collect();
    analysis.restricted_basis = hermitian_orthonormal_basis(&restricted_items, tol.rank_tol);

    let certs = certify(&analysis, phi, &m, tol);
    analysis.algebra_certified = certs
        .iter()
        .find(|c| c.name == "restricted_algebra_closed")
        .is_some_and(|c| c.passed);
    analysis.certifications = certs;
    Ok(analysis)
}

fn certify(a: &FixedPointAnalysis, phi: &OperationMap, m: &Operator, tol: &Tolerance) -> Vec<Certification> {
    let eq = tol.eq_tol;
    let pi = &a.projector;
    let mut out = Vec::new();

    let fixed = a
        .basis
        .iter()
        .map(|b| op_norm(&(phi.dual_unchecked(b) - b)))
        .fold(0.0, f64::max);
    out.push(Certification::new("basis_fixed", fixed, eq));
    out.push(Certification::new("projector_idempotent", op_norm(&(pi * pi - pi)), eq));
    let absorbs = op_norm(&(m * pi - pi)).max(op_norm(&(pi * m - pi)));
    out.push(Certification::new("projector_absorbs_dual", absorbs, eq));
    let rank = pi
        .clone()
        .singular_values()
        .iter()
        .filter(|&&s| s > 0.5)
        .count();
    out.push(Certification::new(
        "projector_rank",
        (rank as f64 - a.fixed_dim() as f64).abs(),
        0.0,
    ));
    let range = a
        .basis
        .iter()
        .map(|b| op_norm(&(a.average_dual(b) - b)))
        .fold(0.0, f64::max);
    out.push(Certification::new("projector_range", range, eq));

    out.push(Certification::new(
        "rho0_fixed",
        op_norm(&(phi.apply_unchecked(&a.rho0) - &a.rho0)),
        eq,
    ));
    let state_defect = (trace(&a.rho0).re - 1.0).abs().max((-min_eigenvalue(&a.rho0)).max(0.0));
    out.push(Certification::new("rho0_state", state_defect, eq));
    let p = &a.support_p;
    out.push(Certification::new("support_invariant", op_norm(&(p * &a.rho0 * p - &a.rho0)), eq));

    let compressed = OperationMap::from_kraus(phi.kraus().iter().map(|k| a.restrict(k)).collect());
    let r = a.support_rank();
    let shifted = compressed.to_supermatrix() - Operator::identity(r * r, r * r);
    let from_compression = orthonormal_basis(&null_operators(&shifted, r, r, tol.rank_tol), tol.rank_tol);
    let mut avg_p = Operator::zeros(r * r, r * r);
    for j in 0..r {
        for i in 0..r {
            let img = a.restrict(&a.average_dual(&a.extend(&matrix_unit(r, i, j))));
            avg_p.set_column(j * r + i, &vec_col(&img));
        }
    }
    let shifted_avg = avg_p - Operator::identity(r * r, r * r);
    let from_average = orthonormal_basis(&null_operators(&shifted_avg, r, r, tol.rank_tol), tol.rank_tol);
    let compressed_fixed = orthonormal_basis(&a.restricted_basis, tol.rank_tol);
    let agree = subspace_distance(&compressed_fixed, &from_compression)
        .max(subspace_distance(&compressed_fixed, &from_average));
    out.push(Certification::new("restricted_spaces_agree", agree, eq));

    let bijection = a
        .restricted_basis
        .iter()
        .map(|b| op_norm(&(a.restrict(&a.average_dual(&a.extend(b))) - b)))
        .fold(0.0, f64::max);
    out.push(Certification::new("average_bijection", bijection, eq));
    let images: Vec<Operator> = a
        .restricted_basis
        .iter()
        .map(|b| a.average_dual(&a.extend(b)))
        .collect();
    let image_rank = orthonormal_basis(&images, tol.rank_tol).len();
    out.push(Certification::new(
        "average_bijection_rank",
        (image_rank as f64 - a.fixed_dim() as f64).abs(),
        0.0,
    ));
    out.push(Certification::new(
        "restricted_algebra_closed",
        closure_defect(&a.restricted_basis),
        eq,
    ));

    if a.faithful {
        out.push(Certification::new("fixed_algebra_closed", closure_defect(&a.basis), eq));
        let commutant = orthonormal_basis(&kraus_commutant(phi, tol), tol.rank_tol);
        let fixed_span = orthonormal_basis(&a.basis, tol.rank_tol);
        out.push(Certification::new(
            "kraus_commutant_agrees",
            subspace_distance(&fixed_span, &commutant),
            eq,
        ));
    }
    out
}

/// Properties of the support projection of the fixed states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    /// `max(‖Φ*_av(P) − 𝟙‖, ‖Φ*_av(P⊥)‖)`.
    pub average_of_support: Certification,
    /// `max_{ij} ‖Φ*_av(E_ij) − Φ*_av(P E_ij P)‖` over matrix units.
    pub average_ignores_complement: Certification,
    /// `max ‖ρ − PρP‖` over a spanning set of fixed states.
    pub covers_fixed_states: Certification,
    /// Removing any eigenvector of `ρ₀` from `P` breaks `Φ*_av(Q) = 𝟙`;
    /// the defect is `max(0, rank_tol − margin)`.
    pub minimal: Certification,
    /// Smallest eigenvalue of `Φ*(P) − P`, as `max(0, −λ_min)`.
    pub dual_dominates: Certification,
    /// `min_k ‖𝟙 − Φ*_av(P − w_k w_k†)‖`.
    pub minimality_margin: f64,
}

impl SupportReport {
    pub fn items(&self) -> [&Certification; 5] {
        [
            &self.average_of_support,
            &self.average_ignores_complement,
            &self.covers_fixed_states,
            &self.minimal,
            &self.dual_dominates,
        ]
    }

    pub fn all_pass(&self) -> bool {
        self.items().iter().all(|c| c.passed)
    }
}

/// Verify the support-projection identities of an analysis against its channel.
pub fn check_support_projection(a: &FixedPointAnalysis, phi: &OperationMap, tol: &Tolerance) -> SupportReport {
    let d = a.dim;
    let id = identity(d);
    let p = &a.support_p;
    let p_perp = &id - p;
    let eq = tol.eq_tol;

    let item1 = op_norm(&(a.average_dual(p) - &id)).max(op_norm(&a.average_dual(&p_perp)));
    let mut item2 = 0.0_f64;
    let mut item3 = 0.0_f64;
    for i in 0..d {
        for j in 0..d {
            let e = matrix_unit(d, i, j);
            item2 = item2.max(op_norm(&(a.average_dual(&e) - a.average_dual(&(p * &e * p)))));
            let rho = a.average(&e);
            item3 = item3.max(op_norm(&(p * &rho * p - &rho)));
        }
    }
    let w = &a.support_isometry;
    let mut margin = f64::INFINITY;
    for k in 0..w.ncols() {
        let v = w.column(k).into_owned();
        let q = p - &v * v.adjoint();
        margin = margin.min(op_norm(&(&id - a.average_dual(&q))));
    }
    let dominated = min_eigenvalue(&hermitian_part(&(phi.dual_unchecked(p) - p)));
    SupportReport {
        average_of_support: Certification::new("average_of_support", item1, eq),
        average_ignores_complement: Certification::new("average_ignores_complement", item2, eq),
        covers_fixed_states: Certification::new("covers_fixed_states", item3, eq),
        minimal: Certification::new("minimal", (tol.rank_tol - margin).max(0.0), 0.0),
        dual_dominates: Certification::new("dual_dominates", (-dominated).max(0.0), eq),
        minimality_margin: margin,
    }
}

/// One necessary condition: applicable when its premises hold, then passed
/// when the defect is within the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub applies: bool,
    pub defect: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Condition {
    fn new(name: &str, applies: bool, defect: f64, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            applies,
            defect,
            threshold,
            passed: !applies || defect <= threshold,
        }
    }
}

/// Necessary conditions on a scheme derived from the fixed points of its
/// nonselective channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralReport {
    pub average_conservation: Hypothesis,
    pub non_disturbance: Hypothesis,
    pub first_kind: Hypothesis,
    pub repeatable: Hypothesis,
    pub support_rank: usize,
    pub faithful: bool,
    pub fixed_dim: usize,
    /// Qubit with a rank-1 support projection: `P` is replaced by `𝟙`.
    pub qubit_collapse: bool,
    pub conditions: Vec<Condition>,
}

impl StructuralReport {
    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

fn max_pair_commutator(a: &[Operator], b: &[Operator]) -> f64 {
    let mut worst = 0.0_f64;
    for x in a {
        for y in b {
            worst = worst.max(op_norm(&commutator(x, y)));
        }
    }
    worst
}

/// States `ψ_x` when every operation has a one-dimensional output support.
fn collapse_states(inst: &Instrument, tol: &Tolerance) -> Option<Vec<crate::opcore::Vector>> {
    let d = inst.dim();
    let mut states = Vec::with_capacity(inst.len());
    for op in inst.operations() {
        let out = hermitian_part(&op.apply_unchecked(&identity(d)));
        let e = eigh(&out);
        let k = e.values.len();
        let top = e.values[k - 1];
        let second = if k >= 2 { e.values[k - 2] } else { 0.0 };
        if top <= tol.rank_tol || second > tol.rank_tol {
            return None;
        }
        states.push(e.vector(k - 1));
    }
    Some(states)
}

pub fn structural_necessary_conditions(
    m: &MeasurementScheme,
    f: &Observable,
    q: &AdditiveQuantity,
    tol: &Tolerance,
) -> Result<StructuralReport> {
    q.check_scheme(m)?;
    let inst = m.instrument(tol)?;
    let ch = inst.channel();
    let e = inst.observable();
    let analysis = analyze_fixed_points(&ch, tol)?;
    let d = inst.dim();

    let avg = check_conservation(m.coupling(), &q.composite(), tol)?.average_defect;
    let nd = disturbance_profile(&inst, f)?.max;
    let fk = first_kind_defect(&inst);
    let rep = repeatability_defect(&inst);
    let average_conservation = Hypothesis::residual(AVERAGE_CONSERVATION, avg, tol.eq_tol);
    let non_disturbance = Hypothesis::residual(NON_DISTURBANCE, nd, tol.eq_tol);
    let first_kind = Hypothesis::residual(FIRST_KIND, fk, tol.eq_tol);
    let repeatable = Hypothesis::residual(REPEATABLE, rep, tol.eq_tol);

    let qubit_collapse = d == 2 && analysis.support_rank() == 1;
    let w = if qubit_collapse {
        identity(2)
    } else {
        analysis.support_isometry.clone()
    };
    let restrict = |a: &Operator| w.adjoint() * a * &w;
    let fe: Vec<Operator> = e.effects().iter().map(&restrict).collect();
    let ff: Vec<Operator> = f.effects().iter().map(&restrict).collect();
    let n = restrict(q.n_sys());
    let shift = restrict(&ch.dual_unchecked(&(&w * &n * w.adjoint()))) - &n;

    let scale = 1.0 + op_norm(q.n_sys()) + op_norm(q.n_app());
    let threshold = |residual: f64| tol.eq_tol.max(4.0 * scale * residual.max(0.0).sqrt());

    let mut conditions = vec![
        Condition::new(
            "restricted_nondisturbed_commutes_with_effects",
            non_disturbance.holds,
            max_pair_commutator(&ff, &fe),
            threshold(nd),
        ),
        Condition::new(
            "restricted_nondisturbed_commutes_with_shift",
            non_disturbance.holds && average_conservation.holds,
            max_pair_commutator(&ff, std::slice::from_ref(&shift)),
            threshold(nd.max(avg)),
        ),
        Condition::new(
            "restricted_effects_commute",
            first_kind.holds,
            max_pair_commutator(&fe, &fe),
            threshold(fk),
        ),
        Condition::new(
            "restricted_effects_commute_with_quantity",
            first_kind.holds && average_conservation.holds,
            max_pair_commutator(&fe, std::slice::from_ref(&n)),
            threshold(fk.max(avg)),
        ),
    ];
    let mut sharp = 0.0_f64;
    for (i, a) in fe.iter().enumerate() {
        sharp = sharp.max(op_norm(&(a - a * a)));
        for b in fe.iter().skip(i + 1) {
            sharp = sharp.max(op_norm(&(a * b)));
        }
    }
    conditions.push(Condition::new(
        "restricted_effects_sharp",
        repeatable.holds,
        sharp,
        threshold(rep),
    ));
    if qubit_collapse {
        conditions.push(Condition::new(
            "qubit_fixed_algebra_scalar",
            true,
            (analysis.fixed_dim() as f64 - 1.0).abs(),
            0.0,
        ));
    }

    let luders = Instrument::luders(&e, tol)?;
    let is_luders = inst.distance(&luders)? <= tol.eq_tol;
    let commutative = e.is_commutative(tol);
    conditions.push(Condition::new(
        "luders_commutative_effects_commute_with_quantity",
        is_luders && commutative && average_conservation.holds,
        max_pair_commutator(e.effects(), std::slice::from_ref(q.n_sys())),
        threshold(avg),
    ));

    if let Some(states) = collapse_states(&inst, tol) {
        let mut worst = 0.0_f64;
        for (x, px) in states.iter().enumerate() {
            for (y, py) in states.iter().enumerate() {
                if x != y {
                    worst = worst.max((px.adjoint() * q.n_sys() * py)[(0, 0)].norm());
                }
            }
        }
        conditions.push(Condition::new(
            "collapse_states_orthogonal_under_quantity",
            repeatable.holds && average_conservation.holds,
            worst,
            threshold(rep.max(avg)),
        ));
    }

    Ok(StructuralReport {
        average_conservation,
        non_disturbance,
        first_kind,
        repeatable,
        support_rank: analysis.support_rank(),
        faithful: analysis.faithful,
        fixed_dim: analysis.fixed_dim(),
        qubit_collapse,
        conditions,
    })
}

/// Split each block isometry `V` by the eigenvalue clusters of `V† h V`.
fn refine_blocks(blocks: Vec<Operator>, h: &Operator, gap: f64) -> Vec<Operator> {
    let mut out = Vec::new();
    for v in blocks {
        let local = hermitian_part(&(v.adjoint() * h * &v));
        let e = eigh(&local);
        for cl in clusters(&e.values, gap) {
            let u = Operator::from_fn(v.ncols(), cl.len(), |r, j| e.vectors[(r, cl[j])]);
            out.push(&v * u);
        }
    }
    out
}

/// Largest leakage `‖(𝟙 − V V†) h V‖` of `h` out of the blocks.
fn block_leakage(blocks: &[Operator], h: &Operator) -> f64 {
    blocks
        .iter()
        .map(|v| {
            let hv = h * v;
            op_norm(&(&hv - v * (v.adjoint() * &hv)))
        })
        .fold(0.0, f64::max)
}

/// A norm-1 observable left undisturbed by a channel, with a family of states
/// it distinguishes perfectly before and after the channel.
#[derive(Debug, Clone)]
pub struct NormOneConstruction {
    pub g: Observable,
    /// The projections `R(z)` on `PH`, embedded in the full space.
    pub refinement: Vec<Operator>,
    /// `ρ_z = P(z)/tr P(z)` with `P(z)` the eigenvalue-1 projection of `G(z)`.
    pub states: Vec<Operator>,
    pub faithful: bool,
    pub sharp: bool,
    /// `max_z |‖G(z)‖ − 1|` over nonzero effects.
    pub norm_defect: f64,
    /// `max_z ‖Φ*(G(z)) − G(z)‖`.
    pub fixed_defect: f64,
    /// `max_{y,z} |tr[G(y) Φ(ρ_z)] − δ_{zy}|`.
    pub distinguishability_defect: f64,
    /// Indices of the effects of `F` whose spectral projections were used.
    pub used_outcomes: Vec<usize>,
    /// The selection rule for `R`, which is not unique.
    pub selection_rule: &'static str,
}

/// Build `G(z) = Φ*_av(R(z))` from a greedy commuting spectral refinement of
/// `{P F(y) P}` taken in declaration order.
pub fn nondisturbed_norm1_observable(phi: &OperationMap, f: &Observable, tol: &Tolerance) -> Result<NormOneConstruction> {
    if f.dim() != phi.in_dim() {
        return Err(Error::DimensionMismatch {
            context: "observable and channel",
            expected: phi.in_dim(),
            found: f.dim(),
        });
    }
    if f.is_trivial(tol) {
        return Err(Error::Precondition("observable is trivial".into()));
    }
    let a = analyze_fixed_points(phi, tol)?;
    let disturbance = f
        .effects()
        .iter()
        .map(|fy| op_norm(&(phi.dual_unchecked(fy) - fy)))
        .fold(0.0, f64::max);
    if disturbance > tol.eq_tol {
        return Err(Error::Precondition(format!(
            "observable is disturbed by the channel (defect {disturbance:.3e})"
        )));
    }
    let r = a.support_rank();
    let mut blocks = vec![identity(r)];
    let mut used = Vec::new();
    for (y, fy) in f.effects().iter().enumerate() {
        let local = a.restrict(fy);
        if block_leakage(&blocks, &local) > tol.eq_tol {
            continue;
        }
        let refined = refine_blocks(blocks.clone(), &local, tol.rank_tol);
        if refined.len() > blocks.len() {
            used.push(y);
        }
        blocks = refined;
    }
    if blocks.len() < 2 {
        return Err(Error::Precondition(
            "observable restricted to the fixed-state support is trivial".into(),
        ));
    }
    let refinement: Vec<Operator> = blocks.iter().map(|v| a.extend(&(v * v.adjoint()))).collect();
    build_norm_one(phi, &a, refinement, used, tol)
}

fn build_norm_one(
    phi: &OperationMap,
    a: &FixedPointAnalysis,
    refinement: Vec<Operator>,
    used: Vec<usize>,
    tol: &Tolerance,
) -> Result<NormOneConstruction> {
    let effects: Vec<Operator> = refinement.iter().map(|rz| hermitian_part(&a.average_dual(rz))).collect();
    let labels = (0..effects.len()).map(|z| z.to_string()).collect();
    let g = Observable::new(labels, effects, tol)?;
    let mut states = Vec::with_capacity(g.len());
    for gz in g.effects() {
        let pz = eigenspace_projector(gz, 1.0, tol)?;
        let t = trace(&pz).re;
        if t < 0.5 {
            return Err(Error::Singular("effect without eigenvalue 1".into()));
        }
        states.push(pz / c(t, 0.0));
    }
    let norm_defect = g
        .effects()
        .iter()
        .map(op_norm)
        .filter(|&n| n > tol.rank_tol)
        .map(|n| (n - 1.0).abs())
        .fold(0.0, f64::max);
    let fixed_defect = g
        .effects()
        .iter()
        .map(|gz| op_norm(&(phi.dual_unchecked(gz) - gz)))
        .fold(0.0, f64::max);
    let mut distinguishability_defect = 0.0_f64;
    for (z, rho) in states.iter().enumerate() {
        let out = phi.apply_unchecked(rho);
        for (y, gy) in g.effects().iter().enumerate() {
            let p = trace(&(gy * &out)).re;
            let target = if y == z { 1.0 } else { 0.0 };
            distinguishability_defect = distinguishability_defect.max((p - target).abs());
        }
    }
    let sharp = g.is_sharp(tol);
    Ok(NormOneConstruction {
        g,
        refinement,
        states,
        faithful: a.faithful,
        sharp,
        norm_defect,
        fixed_defect,
        distinguishability_defect,
        used_outcomes: used,
        selection_rule: "greedy commuting spectral refinement in declaration order",
    })
}

/// `E(x) = Σ_z p(x|z) G(z)` for a first-kind instrument.
#[derive(Debug, Clone)]
pub struct PostProcessing {
    pub g: Observable,
    /// `p[x][z]`, rows indexed by the outcomes of `E`.
    pub p: Vec<Vec<f64>>,
    pub refinement: Vec<Operator>,
    /// `max_x ‖E(x) − Σ_z p(x|z) G(z)‖`.
    pub reconstruction_defect: f64,
    /// `max_z |Σ_x p(x|z) − 1|`.
    pub stochastic_defect: f64,
    /// `max_z |‖G(z)‖ − 1|` over nonzero effects.
    pub norm_defect: f64,
    pub seed: u64,
}

/// Decompose the observable of a first-kind instrument as a post-processing of
/// a norm-1 observable. Columns of `p` are sorted in descending lexicographic
/// order and `G` is permuted alongside.
pub fn post_processing_decomposition(inst: &Instrument, tol: &Tolerance) -> Result<PostProcessing> {
    let fk = first_kind_defect(inst);
    if fk > tol.eq_tol {
        return Err(Error::Precondition(format!(
            "instrument is not of the first kind (defect {fk:.3e})"
        )));
    }
    let e = inst.observable();
    if e.is_trivial(tol) {
        return Err(Error::Precondition("measured observable is trivial".into()));
    }
    let ch = inst.channel();
    let a = analyze_fixed_points(&ch, tol)?;
    let local: Vec<Operator> = e.effects().iter().map(|ex| a.restrict(ex)).collect();
    let defect = max_pair_commutator(&local, &local);
    if defect > tol.eq_tol {
        return Err(Error::Precondition(format!(
            "compressed effects do not commute (defect {defect:.3e})"
        )));
    }
    let r = a.support_rank();
    let mut rng = ChaCha8Rng::seed_from_u64(JOINT_DIAGONALIZATION_SEED);
    let mut combo = Operator::zeros(r, r);
    for ex in &local {
        combo += ex * c(rng.random_range(-1.0..1.0), 0.0);
    }
    let mut blocks = refine_blocks(vec![identity(r)], &combo, tol.rank_tol);
    for ex in &local {
        blocks = refine_blocks(blocks, ex, tol.rank_tol);
    }

    let mut columns: Vec<(Vec<f64>, Operator)> = blocks
        .iter()
        .map(|v| {
            let k = v.ncols() as f64;
            let col = local
                .iter()
                .map(|ex| trace(&(v.adjoint() * ex * v)).re / k)
                .collect();
            (col, v * v.adjoint())
        })
        .collect();
    columns.sort_by(|x, y| {
        for (a, b) in x.0.iter().zip(&y.0) {
            let o = b.total_cmp(a);
            if o != std::cmp::Ordering::Equal {
                return o;
            }
        }
        std::cmp::Ordering::Equal
    });

    let refinement: Vec<Operator> = columns.iter().map(|(_, rz)| a.extend(rz)).collect();
    let nz = refinement.len();
    let p: Vec<Vec<f64>> = (0..e.len())
        .map(|x| columns.iter().map(|(col, _)| col[x]).collect())
        .collect();
    let effects: Vec<Operator> = refinement.iter().map(|rz| hermitian_part(&a.average_dual(rz))).collect();
    let labels = (0..nz).map(|z| z.to_string()).collect();
    let g = Observable::new(labels, effects, tol)?;

    let mut reconstruction_defect = 0.0_f64;
    for (x, ex) in e.effects().iter().enumerate() {
        let mut rebuilt = Operator::zeros(e.dim(), e.dim());
        for (z, gz) in g.effects().iter().enumerate() {
            rebuilt += gz * c(p[x][z], 0.0);
        }
        reconstruction_defect = reconstruction_defect.max(op_norm(&(ex - rebuilt)));
    }
    let stochastic_defect = (0..nz)
        .map(|z| ((0..e.len()).map(|x| p[x][z]).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let norm_defect = g
        .effects()
        .iter()
        .map(op_norm)
        .filter(|&n| n > tol.rank_tol)
        .map(|n| (n - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(PostProcessing {
        g,
        p,
        refinement,
        reconstruction_defect,
        stochastic_defect,
        norm_defect,
        seed: JOINT_DIAGONALIZATION_SEED,
    })
}

/// Faithfulness forced by non-disturbance of an invertible stochastic mix of a
/// rank-1 sharp observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixFaithfulness {
    pub non_disturbance: Hypothesis,
    pub faithful: bool,
    pub support_rank: usize,
    pub passed: bool,
}

/// Check that a channel leaving `F(y) = Σ_z mix[y][z] G(z)` undisturbed has a
/// faithful fixed state. `g` must be rank-1 sharp with one effect per
/// dimension and `mix` square, column-stochastic and invertible.
pub fn check_mix_faithfulness(
    phi: &OperationMap,
    g: &Observable,
    mix: &[Vec<f64>],
    tol: &Tolerance,
) -> Result<MixFaithfulness> {
    let d = g.dim();
    if g.len() != d || !g.is_sharp(tol) || !g.is_rank_one(tol) {
        return Err(Error::Precondition(
            "base observable must be rank-1 sharp with one outcome per dimension".into(),
        ));
    }
    if mix.len() != d || mix.iter().any(|row| row.len() != d) {
        return Err(Error::DimensionMismatch {
            context: "stochastic mix",
            expected: d,
            found: mix.len(),
        });
    }
    let det = nalgebra::DMatrix::<f64>::from_fn(d, d, |i, j| mix[i][j]).determinant();
    if det.abs() <= tol.rank_tol {
        return Err(Error::Singular("stochastic mix is not invertible".into()));
    }
    let f = g.post_process(mix, tol)?;
    let a = analyze_fixed_points(phi, tol)?;
    let nd = f
        .effects()
        .iter()
        .map(|fy| op_norm(&(phi.dual_unchecked(fy) - fy)))
        .fold(0.0, f64::max);
    let non_disturbance = Hypothesis::residual(NON_DISTURBANCE, nd, tol.eq_tol);
    let passed = !non_disturbance.holds || a.faithful;
    Ok(MixFaithfulness {
        non_disturbance,
        faithful: a.faithful,
        support_rank: a.support_rank(),
        passed,
    })
}

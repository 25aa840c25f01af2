//! Evaluation of the disturbance, measurability and conservation inequalities.
//!
//! Every evaluator returns a flat list of [`BoundReport`]s. Premises are never
//! turned into errors: a report carries its hypotheses with the residuals that
//! decided them, so scans over generated schemes stay total. Premises that are
//! only meaningful under full conservation (apparatus variance and Fisher
//! information forms) are evaluated only when full conservation holds.
//!
//! | bound | premises |
//! |---|---|
//! | `compatibility_unsharpness` | compatibility (certified by non-disturbance) |
//! | `disturbance_commutator`, `disturbance_unsharpness` | none |
//! | `nondisturbance_commutator` | non-disturbance of `F(y)` |
//! | `conserved_disturbance`, `conserved_disturbance_unsharpness` | average conservation |
//! | `conserved_nondisturbance` | average conservation, non-disturbance |
//! | `conserved_disturbance_variance`, `conserved_disturbance_fisher` | full conservation |
//! | `conserved_disturbance_fisher_extremal` | full conservation, asserted extremality |
//! | `measurement_error` | average conservation |
//! | `measurement_error_variance`, `measurement_error_fisher` | full conservation |
//! | `measurement_error_fisher_extremal` | full conservation, asserted extremality, exact measurement |
//! | `way_repeatable_or_yanase` | average conservation, repeatable or Yanase |
//! | `way_weak_yanase_*` | weak Yanase (extremal form: asserted extremality, exact measurement) |
//! | `distinguishability_orthogonal` | average conservation, orthogonal inputs |
//! | `distinguishability_first_kind` | average conservation, first kind, eigenspace membership |
//! | `repeatable_commutation` | average conservation, repeatable |
//! | `fixed_point_commutation` | none |

use serde::{Deserialize, Serialize};

use crate::conserve::{check_conservation, qfi, variance, yanase_conditions, AdditiveQuantity, ConservationReport};
use crate::error::{Error, Result};
use crate::measure::{Instrument, MeasurementScheme, Observable, RestrictionMaps};
use crate::opcore::{
    commutator, eigenspace_projector, eigh, normalize_state, op_norm, outer,
    root_fidelity, Operator, Tolerance, Vector,
};
use crate::report::{digest_operators, BoundId, BoundReport, Hypothesis};

pub const AVERAGE_CONSERVATION: &str = "average_conservation";
pub const FULL_CONSERVATION: &str = "full_conservation";
pub const NON_DISTURBANCE: &str = "non_disturbance";
pub const COMPATIBILITY: &str = "compatibility";
pub const REPEATABLE_OR_YANASE: &str = "repeatable_or_yanase";
pub const WEAK_YANASE: &str = "weak_yanase";
pub const FIRST_KIND: &str = "first_kind";
pub const EXTREMAL_ASSERTED: &str = "extremal_asserted";
pub const EXACT_MEASUREMENT: &str = "exact_measurement";
pub const ORTHOGONAL: &str = "orthogonal";
pub const EIGENSPACE_MEMBERSHIP: &str = "eigenspace_membership";
pub const REPEATABLE: &str = "repeatable";

/// Per-outcome disturbance `δ(y) = I*_X(F(y)) − F(y)`.
#[derive(Debug, Clone)]
pub struct DisturbanceProfile {
    pub outcomes: Vec<String>,
    pub defects: Vec<Operator>,
    pub norms: Vec<f64>,
    /// `max_y ‖δ(y)‖`.
    pub max: f64,
}

pub fn disturbance_profile(inst: &Instrument, f: &Observable) -> Result<DisturbanceProfile> {
    if f.dim() != inst.dim() {
        return Err(Error::DimensionMismatch {
            context: "disturbed observable",
            expected: inst.dim(),
            found: f.dim(),
        });
    }
    let ch = inst.channel();
    let defects: Vec<Operator> = f
        .effects()
        .iter()
        .map(|fy| ch.dual_unchecked(fy) - fy)
        .collect();
    Ok(profile(f.outcomes().to_vec(), defects))
}

/// Per-outcome measurement error `ε(x) = Λ*(Z(x)) − E(x)` against a target.
#[derive(Debug, Clone)]
pub struct ErrorProfile {
    pub outcomes: Vec<String>,
    pub defects: Vec<Operator>,
    pub norms: Vec<f64>,
    /// `max_x ‖ε(x)‖`.
    pub max: f64,
}

pub fn error_profile(m: &MeasurementScheme, target: &Observable) -> Result<ErrorProfile> {
    if target.dim() != m.sys_dim() {
        return Err(Error::DimensionMismatch {
            context: "target observable",
            expected: m.sys_dim(),
            found: target.dim(),
        });
    }
    if target.outcomes() != m.pointer().outcomes() {
        return Err(Error::Precondition(format!(
            "target outcomes {:?} differ from pointer outcomes {:?}",
            target.outcomes(),
            m.pointer().outcomes()
        )));
    }
    let measured = m.measured_observable();
    let defects = measured
        .effects()
        .iter()
        .zip(target.effects())
        .map(|(a, b)| a - b)
        .collect();
    let p = profile(target.outcomes().to_vec(), defects);
    Ok(ErrorProfile {
        outcomes: p.outcomes,
        defects: p.defects,
        norms: p.norms,
        max: p.max,
    })
}

fn profile(outcomes: Vec<String>, defects: Vec<Operator>) -> DisturbanceProfile {
    let norms: Vec<f64> = defects.iter().map(op_norm).collect();
    let max = norms.iter().copied().fold(0.0, f64::max);
    DisturbanceProfile {
        outcomes,
        defects,
        norms,
        max,
    }
}

/// Deterministic digest of a scheme together with further operators.
pub fn scheme_digest(m: &MeasurementScheme, extra: &[&Operator]) -> String {
    let mut ops: Vec<&Operator> = vec![m.xi()];
    ops.extend(m.coupling().kraus());
    ops.extend(m.pointer().effects());
    ops.extend_from_slice(extra);
    digest_operators(&ops)
}

fn pair_label(x: &str, y: &str) -> String {
    format!("{x}|{y}")
}

/// Quantities shared by every conservation-gated bound.
struct Conserved {
    n_sys_norm: f64,
    /// `‖Γ_ξ^E(N²) − Γ_ξ^E(N)²‖`.
    spread: f64,
    variance: f64,
    fisher: f64,
    status: ConservationReport,
}

impl Conserved {
    fn new(m: &MeasurementScheme, maps: &RestrictionMaps, q: &AdditiveQuantity, tol: &Tolerance) -> Result<Self> {
        q.check_scheme(m)?;
        let n = q.composite();
        let g1 = maps.evolved.dual_unchecked(&n);
        let g2 = maps.evolved.dual_unchecked(&(&n * &n));
        Ok(Self {
            n_sys_norm: op_norm(q.n_sys()),
            spread: op_norm(&(g2 - &g1 * &g1)),
            variance: variance(q.n_app(), m.xi(), tol)?,
            fisher: qfi(q.n_app(), m.xi(), tol)?,
            status: check_conservation(m.coupling(), &n, tol)?,
        })
    }

    fn average(&self, tol: &Tolerance) -> Hypothesis {
        Hypothesis::residual(AVERAGE_CONSERVATION, self.status.average_defect, tol.eq_tol)
    }

    fn full(&self, tol: &Tolerance) -> Hypothesis {
        Hypothesis::residual(FULL_CONSERVATION, self.status.full_defect, tol.eq_tol)
    }
}

fn sq(v: f64) -> f64 {
    v.max(0.0).sqrt()
}

/// Disturbance inequalities for the instrument of `m` acting on `f`, with the
/// conserved-quantity family when `q` is supplied.
pub fn eval_disturbance_bounds(
    m: &MeasurementScheme,
    f: &Observable,
    q: Option<&AdditiveQuantity>,
    assert_extremal: bool,
    tol: &Tolerance,
) -> Result<Vec<BoundReport>> {
    let inst = m.instrument(tol)?;
    let e = inst.observable();
    let ch = inst.channel();
    let prof = disturbance_profile(&inst, f)?;
    let mut extra: Vec<&Operator> = f.effects().iter().collect();
    if let Some(q) = q {
        extra.push(q.n_sys());
        extra.push(q.n_app());
    }
    let digest = scheme_digest(m, &extra);
    let mut out = Vec::new();

    for (y, fy) in f.effects().iter().enumerate() {
        let ylab = &f.outcomes()[y];
        let d_y = prof.norms[y];
        let f2 = fy * fy;
        let i_f = ch.dual_unchecked(fy);
        let i_f2 = ch.dual_unchecked(&f2);
        let spread_f = op_norm(&(&i_f2 - &i_f * &i_f));
        let square_gap = op_norm(&(&i_f2 - &f2));
        let unsharp_f = f.unsharpness(y);
        let nondist = Hypothesis::residual(NON_DISTURBANCE, d_y, tol.eq_tol);

        for (x, ex) in e.effects().iter().enumerate() {
            let label = pair_label(&e.outcomes()[x], ylab);
            let lhs = op_norm(&commutator(ex, fy));
            let u = e.unsharpness(x);
            out.push(BoundReport::new(
                BoundId::CompatibilityUnsharpness,
                label.clone(),
                lhs,
                2.0 * sq(u) * sq(unsharp_f),
                vec![Hypothesis::residual(COMPATIBILITY, prof.max, tol.eq_tol)],
                &digest,
                tol,
            ));
            out.push(BoundReport::new(
                BoundId::DisturbanceCommutator,
                label.clone(),
                lhs,
                d_y + 2.0 * sq(u) * sq(spread_f),
                vec![],
                &digest,
                tol,
            ));
            out.push(BoundReport::new(
                BoundId::NondisturbanceCommutator,
                label.clone(),
                lhs,
                2.0 * sq(u) * sq(square_gap),
                vec![nondist.clone()],
                &digest,
                tol,
            ));
            out.push(BoundReport::new(
                BoundId::DisturbanceUnsharpness,
                label,
                lhs,
                d_y + 2.0 * sq(u) * sq(2.0 * d_y + unsharp_f),
                vec![],
                &digest,
                tol,
            ));
        }
    }

    if let Some(q) = q {
        let maps = m.restriction_maps();
        let c = Conserved::new(m, &maps, q, tol)?;
        let avg = c.average(tol);
        let full = c.full(tol);
        for (y, fy) in f.effects().iter().enumerate() {
            let ylab = f.outcomes()[y].clone();
            let d_y = prof.norms[y];
            let comm = commutator(fy, q.n_sys());
            let lhs = op_norm(&(&comm - ch.dual_unchecked(&comm)));
            let f2 = fy * fy;
            let i_f = ch.dual_unchecked(fy);
            let i_f2 = ch.dual_unchecked(&f2);
            let spread_f = op_norm(&(&i_f2 - &i_f * &i_f));
            let square_gap = op_norm(&(&i_f2 - &f2));
            let unsharp_f = f.unsharpness(y);
            let base = 2.0 * c.n_sys_norm * d_y;
            let mk = |id, rhs, hyps| BoundReport::new(id, ylab.clone(), lhs, rhs, hyps, &digest, tol);

            out.push(mk(
                BoundId::ConservedDisturbance,
                base + 2.0 * sq(c.spread) * sq(spread_f),
                vec![avg.clone()],
            ));
            out.push(mk(
                BoundId::ConservedNondisturbance,
                2.0 * sq(c.spread) * sq(square_gap),
                vec![avg.clone(), Hypothesis::residual(NON_DISTURBANCE, d_y, tol.eq_tol)],
            ));
            out.push(mk(
                BoundId::ConservedDisturbanceUnsharpness,
                base + 2.0 * sq(c.spread) * sq(2.0 * d_y + unsharp_f),
                vec![avg.clone()],
            ));
            if c.status.full_holds {
                out.push(mk(
                    BoundId::ConservedDisturbanceVariance,
                    base + 2.0 * sq(c.variance) * sq(spread_f),
                    vec![full.clone()],
                ));
                out.push(mk(
                    BoundId::ConservedDisturbanceFisher,
                    base + 0.5 * sq(c.fisher),
                    vec![full.clone()],
                ));
                if assert_extremal {
                    out.push(mk(
                        BoundId::ConservedDisturbanceFisherExtremal,
                        base + sq(c.fisher) * sq(spread_f),
                        vec![full.clone(), Hypothesis::asserted(EXTREMAL_ASSERTED, true)],
                    ));
                }
            }
        }
    }
    Ok(out)
}

/// Measurement-error inequalities of `m` against `target`.
pub fn eval_measurability_bounds(
    m: &MeasurementScheme,
    target: &Observable,
    q: &AdditiveQuantity,
    assert_extremal: bool,
    tol: &Tolerance,
) -> Result<Vec<BoundReport>> {
    let prof = error_profile(m, target)?;
    let maps = m.restriction_maps();
    let c = Conserved::new(m, &maps, q, tol)?;
    let mut extra: Vec<&Operator> = target.effects().iter().collect();
    extra.push(q.n_sys());
    extra.push(q.n_app());
    let digest = scheme_digest(m, &extra);
    let avg = c.average(tol);
    let full = c.full(tol);
    let exact = Hypothesis::residual(EXACT_MEASUREMENT, prof.max, tol.eq_tol);
    let mut out = Vec::new();
    for (x, ex) in target.effects().iter().enumerate() {
        let label = target.outcomes()[x].clone();
        let z = m.pointer().effect(x);
        let lhs = op_norm(
            &(commutator(ex, q.n_sys()) - maps.conjugate.dual_unchecked(&commutator(z, q.n_app()))),
        );
        let eps = prof.norms[x];
        let u = target.unsharpness(x);
        let base = 2.0 * c.n_sys_norm * eps;
        let mk = |id, rhs, hyps| BoundReport::new(id, label.clone(), lhs, rhs, hyps, &digest, tol);
        out.push(mk(
            BoundId::MeasurementError,
            base + 2.0 * sq(c.spread) * sq(2.0 * eps + u),
            vec![avg.clone()],
        ));
        if c.status.full_holds {
            out.push(mk(
                BoundId::MeasurementErrorVariance,
                base + 2.0 * sq(c.variance) * sq(2.0 * eps + u),
                vec![full.clone()],
            ));
            out.push(mk(
                BoundId::MeasurementErrorFisher,
                base + 0.5 * sq(c.fisher),
                vec![full.clone()],
            ));
            if assert_extremal {
                out.push(mk(
                    BoundId::MeasurementErrorFisherExtremal,
                    sq(c.fisher) * sq(u),
                    vec![
                        full.clone(),
                        Hypothesis::asserted(EXTREMAL_ASSERTED, true),
                        exact.clone(),
                    ],
                ));
            }
        }
    }
    Ok(out)
}

/// Largest repeatability defect `max_x ‖I*_x(E(x)) − E(x)‖`.
pub fn repeatability_defect(inst: &Instrument) -> f64 {
    let e = inst.observable();
    e.effects()
        .iter()
        .enumerate()
        .map(|(k, ek)| op_norm(&(inst.operation(k).dual_unchecked(ek) - ek)))
        .fold(0.0, f64::max)
}

/// Largest first-kind defect `max_x ‖I*_X(E(x)) − E(x)‖`.
pub fn first_kind_defect(inst: &Instrument) -> f64 {
    let ch = inst.channel();
    inst.observable()
        .effects()
        .iter()
        .map(|ek| op_norm(&(ch.dual_unchecked(ek) - ek)))
        .fold(0.0, f64::max)
}

/// Commutation of the measured observable with `N_S`: the repeatable-or-Yanase
/// form (emitted only when a disjunct holds) and the weak-Yanase family, whose
/// error terms are taken against `target` (the measured observable when `None`).
pub fn eval_way(
    m: &MeasurementScheme,
    q: &AdditiveQuantity,
    target: Option<&Observable>,
    assert_extremal: bool,
    tol: &Tolerance,
) -> Result<Vec<BoundReport>> {
    let inst = m.instrument(tol)?;
    let e = inst.observable();
    let maps = m.restriction_maps();
    let c = Conserved::new(m, &maps, q, tol)?;
    let yan = yanase_conditions(m, q, tol)?;
    let target = target.unwrap_or(&e);
    let prof = error_profile(m, target)?;
    let mut extra: Vec<&Operator> = target.effects().iter().collect();
    extra.push(q.n_sys());
    extra.push(q.n_app());
    let digest = scheme_digest(m, &extra);
    let mut out = Vec::new();

    let disjunct = repeatability_defect(&inst).min(yan.yanase_defect);
    if disjunct <= tol.eq_tol {
        let hyps = vec![c.average(tol), Hypothesis::residual(REPEATABLE_OR_YANASE, disjunct, tol.eq_tol)];
        for (x, ex) in e.effects().iter().enumerate() {
            out.push(BoundReport::new(
                BoundId::WayRepeatableOrYanase,
                e.outcomes()[x].clone(),
                op_norm(&commutator(ex, q.n_sys())),
                2.0 * sq(c.spread) * sq(e.unsharpness(x)),
                hyps.clone(),
                &digest,
                tol,
            ));
        }
    }

    let weak = Hypothesis::residual(WEAK_YANASE, yan.weak_yanase_defect, tol.eq_tol);
    for (x, ex) in target.effects().iter().enumerate() {
        let label = target.outcomes()[x].clone();
        let lhs = op_norm(&commutator(ex, q.n_sys()));
        let eps = prof.norms[x];
        let u = target.unsharpness(x);
        let base = 2.0 * c.n_sys_norm * eps;
        let mk = |id, rhs, hyps| BoundReport::new(id, label.clone(), lhs, rhs, hyps, &digest, tol);
        out.push(mk(
            BoundId::WayWeakYanaseVariance,
            base + 2.0 * sq(c.variance) * sq(2.0 * eps + u),
            vec![weak.clone()],
        ));
        out.push(mk(
            BoundId::WayWeakYanaseFisher,
            base + 0.5 * sq(c.fisher),
            vec![weak.clone()],
        ));
        if assert_extremal {
            out.push(mk(
                BoundId::WayWeakYanaseFisherExtremal,
                sq(c.fisher) * sq(u),
                vec![
                    weak.clone(),
                    Hypothesis::asserted(EXTREMAL_ASSERTED, true),
                    Hypothesis::residual(EXACT_MEASUREMENT, prof.max, tol.eq_tol),
                ],
            ));
        }
    }
    Ok(out)
}

/// Extremal eigenspaces of an effect: projectors onto the eigenvalue `‖E‖`
/// and eigenvalue `1 − ‖𝟙 − E‖` spaces, with the right-hand side
/// `‖E‖^½(1 − ‖𝟙−E‖)^½ + (1 − ‖E‖)^½‖𝟙−E‖^½` (to be scaled by `‖N_S‖`).
struct ExtremalSpaces {
    top: Operator,
    bottom: Operator,
    factor: f64,
}

fn extremal_spaces(ex: &Operator, tol: &Tolerance) -> Result<Option<ExtremalSpaces>> {
    let spec = eigh(ex).values;
    let (lo, hi) = (spec[0], spec[spec.len() - 1]);
    if hi - lo <= tol.rank_tol {
        return Ok(None);
    }
    let norm_e = hi.clamp(0.0, 1.0);
    let norm_c = (1.0 - lo).clamp(0.0, 1.0);
    Ok(Some(ExtremalSpaces {
        top: eigenspace_projector(ex, hi, tol)?,
        bottom: eigenspace_projector(ex, lo, tol)?,
        factor: sq(norm_e) * sq(1.0 - norm_c) + sq(1.0 - norm_e) * sq(norm_c),
    }))
}

fn membership(p: &Operator, v: &Vector) -> f64 {
    (v - p * v).norm()
}

fn unit(v: &Vector) -> Result<Vector> {
    let n = v.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::Precondition("input vector must be nonzero".into()));
    }
    Ok(v / crate::opcore::c(n, 0.0))
}

/// `|<ψ|N_S φ>|` for orthogonal inputs against output fidelities, plus the
/// first-kind form for every outcome whose extremal eigenspaces contain `ψ`
/// and `φ`.
pub fn eval_distinguishability_bounds(
    m: &MeasurementScheme,
    q: &AdditiveQuantity,
    psi: &Vector,
    phi: &Vector,
    tol: &Tolerance,
) -> Result<Vec<BoundReport>> {
    let d = m.sys_dim();
    if psi.len() != d || phi.len() != d {
        return Err(Error::DimensionMismatch {
            context: "distinguishability inputs",
            expected: d,
            found: if psi.len() != d { psi.len() } else { phi.len() },
        });
    }
    let (psi, phi) = (unit(psi)?, unit(phi)?);
    let overlap = psi.dotc(&phi).norm();
    if overlap > tol.eq_tol {
        return Err(Error::NotOrthogonal { overlap });
    }
    let inst = m.instrument(tol)?;
    let ch = inst.channel();
    let maps = m.restriction_maps();
    let c = Conserved::new(m, &maps, q, tol)?;
    let digest = scheme_digest(m, &[q.n_sys(), q.n_app(), &outer(&psi, &phi)]);
    let lhs = psi.dotc(&(q.n_sys() * &phi)).norm();
    let rp = outer(&psi, &psi);
    let rf = outer(&phi, &phi);
    let out_fid = root_fidelity(
        &normalize_state(&ch.apply_unchecked(&rp)),
        &normalize_state(&ch.apply_unchecked(&rf)),
        tol,
    )?;
    let app_fid = root_fidelity(
        &normalize_state(&maps.conjugate.apply_unchecked(&rp)),
        &normalize_state(&maps.conjugate.apply_unchecked(&rf)),
        tol,
    )?;
    let mut out = vec![BoundReport::new(
        BoundId::DistinguishabilityOrthogonal,
        "pair",
        lhs,
        op_norm(q.n_app()) * out_fid + c.n_sys_norm * app_fid,
        vec![c.average(tol), Hypothesis::residual(ORTHOGONAL, overlap, tol.eq_tol)],
        &digest,
        tol,
    )];
    let e = inst.observable();
    let fk = Hypothesis::residual(FIRST_KIND, first_kind_defect(&inst), tol.eq_tol);
    for (x, ex) in e.effects().iter().enumerate() {
        if let Some(sp) = extremal_spaces(ex, tol)? {
            let r = membership(&sp.top, &psi).max(membership(&sp.bottom, &phi));
            if r <= tol.rank_tol {
                out.push(BoundReport::new(
                    BoundId::DistinguishabilityFirstKind,
                    e.outcomes()[x].clone(),
                    lhs,
                    c.n_sys_norm * sp.factor,
                    vec![
                        c.average(tol),
                        fk.clone(),
                        Hypothesis::residual(EIGENSPACE_MEMBERSHIP, r, tol.rank_tol),
                    ],
                    &digest,
                    tol,
                ));
            }
        }
    }
    Ok(out)
}

/// First-kind distinguishability bound for a chosen outcome; the inputs must
/// lie in its extremal eigenspaces.
pub fn eval_first_kind_distinguishability(
    m: &MeasurementScheme,
    q: &AdditiveQuantity,
    outcome: usize,
    psi: &Vector,
    phi: &Vector,
    tol: &Tolerance,
) -> Result<BoundReport> {
    let inst = m.instrument(tol)?;
    let e = inst.observable();
    if outcome >= e.len() {
        return Err(Error::Precondition(format!("no outcome with index {outcome}")));
    }
    let (psi, phi) = (unit(psi)?, unit(phi)?);
    let sp = extremal_spaces(e.effect(outcome), tol)?
        .ok_or_else(|| Error::Precondition("effect is a multiple of the identity".into()))?;
    let residual = membership(&sp.top, &psi).max(membership(&sp.bottom, &phi));
    if residual > tol.rank_tol {
        return Err(Error::NotInEigenspace { residual });
    }
    let maps = m.restriction_maps();
    let c = Conserved::new(m, &maps, q, tol)?;
    let digest = scheme_digest(m, &[q.n_sys(), q.n_app(), &outer(&psi, &phi)]);
    Ok(BoundReport::new(
        BoundId::DistinguishabilityFirstKind,
        e.outcomes()[outcome].clone(),
        psi.dotc(&(q.n_sys() * &phi)).norm(),
        c.n_sys_norm * sp.factor,
        vec![
            c.average(tol),
            Hypothesis::residual(FIRST_KIND, first_kind_defect(&inst), tol.eq_tol),
            Hypothesis::residual(EIGENSPACE_MEMBERSHIP, residual, tol.rank_tol),
        ],
        &digest,
        tol,
    ))
}

/// First-kind distinguishability bound in its strongest form: the left side
/// is `‖P_max N_S P_min‖`, the supremum over unit vectors of the two extremal
/// eigenspaces of each nontrivial effect.
pub fn eval_first_kind_subspace_bounds(
    m: &MeasurementScheme,
    q: &AdditiveQuantity,
    tol: &Tolerance,
) -> Result<Vec<BoundReport>> {
    let inst = m.instrument(tol)?;
    let e = inst.observable();
    let maps = m.restriction_maps();
    let c = Conserved::new(m, &maps, q, tol)?;
    let digest = scheme_digest(m, &[q.n_sys(), q.n_app()]);
    let fk = Hypothesis::residual(FIRST_KIND, first_kind_defect(&inst), tol.eq_tol);
    let mut out = Vec::new();
    for (x, ex) in e.effects().iter().enumerate() {
        if let Some(sp) = extremal_spaces(ex, tol)? {
            out.push(BoundReport::new(
                BoundId::DistinguishabilityFirstKind,
                e.outcomes()[x].clone(),
                op_norm(&(&sp.top * q.n_sys() * &sp.bottom)),
                c.n_sys_norm * sp.factor,
                vec![c.average(tol), fk.clone()],
                &digest,
                tol,
            ));
        }
    }
    Ok(out)
}

/// `‖[E(x), P(X) N_S P(X)]‖ = 0` for repeatable instruments, where `P(X)` sums
/// the eigenvalue-1 projectors of the effects.
pub fn eval_repeatable_commutation(
    m: &MeasurementScheme,
    q: &AdditiveQuantity,
    tol: &Tolerance,
) -> Result<Vec<BoundReport>> {
    let inst = m.instrument(tol)?;
    let e = inst.observable();
    let maps = m.restriction_maps();
    let c = Conserved::new(m, &maps, q, tol)?;
    let digest = scheme_digest(m, &[q.n_sys(), q.n_app()]);
    let d = e.dim();
    let mut px = Operator::zeros(d, d);
    for ex in e.effects() {
        px += eigenspace_projector(ex, 1.0, tol)?;
    }
    let compressed = &px * q.n_sys() * &px;
    let hyps = vec![
        c.average(tol),
        Hypothesis::residual(REPEATABLE, repeatability_defect(&inst), tol.eq_tol),
    ];
    Ok(e
        .effects()
        .iter()
        .enumerate()
        .map(|(x, ex)| {
            BoundReport::new(
                BoundId::RepeatableCommutation,
                e.outcomes()[x].clone(),
                op_norm(&commutator(ex, &compressed)),
                0.0,
                hyps.clone(),
                &digest,
                tol,
            )
        })
        .collect())
}

/// `‖[E(x), I*_X(A)]‖ ≤ ‖E(x)−E(x)²‖^½ (‖I*_X(A†A) − I*_X(A†)I*_X(A)‖^½ +
/// ‖I*_X(AA†) − I*_X(A)I*_X(A†)‖^½)` for every `x`.
pub fn eval_fixed_point_commutation(inst: &Instrument, a: &Operator, tol: &Tolerance) -> Result<Vec<BoundReport>> {
    let ch = inst.channel();
    let image = ch.apply_dual(a)?;
    let ad = a.adjoint();
    let left = ch.self_defect(a);
    let right = ch.self_defect(&ad);
    let e = inst.observable();
    let digest = digest_operators(&e.effects().iter().chain(std::iter::once(a)).collect::<Vec<_>>());
    Ok(e
        .effects()
        .iter()
        .enumerate()
        .map(|(x, ex)| {
            BoundReport::new(
                BoundId::FixedPointCommutation,
                e.outcomes()[x].clone(),
                op_norm(&commutator(ex, &image)),
                sq(e.unsharpness(x)) * (sq(left) + sq(right)),
                vec![],
                &digest,
                tol,
            )
        })
        .collect())
}

/// Consequences of non-disturbance when `F²` is also fixed: `F` commutes with
/// `E` and with `ΔN_S = I*_X(N_S) − N_S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NondisturbanceCommutation {
    pub non_disturbance: Hypothesis,
    pub squares_fixed: Hypothesis,
    pub average_conservation: Hypothesis,
    /// `max_{x,y} ‖[F(y), E(x)]‖`.
    pub effect_commutator: f64,
    /// `max_y ‖[F(y), ΔN_S]‖`.
    pub shift_commutator: f64,
    /// `‖ΔN_S‖`.
    pub shift_norm: f64,
    /// Threshold for the conclusions: the premises enter through square
    /// roots, so residuals `r` allow commutators of order `√r`.
    pub threshold: f64,
    pub applies: bool,
    pub passed: bool,
}

pub fn check_nondisturbance_commutation(
    m: &MeasurementScheme,
    f: &Observable,
    q: &AdditiveQuantity,
    tol: &Tolerance,
) -> Result<NondisturbanceCommutation> {
    q.check_scheme(m)?;
    let inst = m.instrument(tol)?;
    let ch = inst.channel();
    let e = inst.observable();
    let prof = disturbance_profile(&inst, f)?;
    let squares = f
        .effects()
        .iter()
        .map(|fy| {
            let f2 = fy * fy;
            op_norm(&(ch.dual_unchecked(&f2) - f2))
        })
        .fold(0.0, f64::max);
    let avg = check_conservation(m.coupling(), &q.composite(), tol)?.average_defect;
    let shift = ch.dual_unchecked(q.n_sys()) - q.n_sys();
    let mut effect_commutator = 0.0_f64;
    let mut shift_commutator = 0.0_f64;
    for fy in f.effects() {
        for ex in e.effects() {
            effect_commutator = effect_commutator.max(op_norm(&commutator(fy, ex)));
        }
        shift_commutator = shift_commutator.max(op_norm(&commutator(fy, &shift)));
    }
    let residual = prof.max.max(squares).max(avg);
    let scale = 1.0 + op_norm(q.n_sys()) + op_norm(q.n_app());
    let threshold = tol.eq_tol.max(4.0 * scale * sq(residual));
    let non_disturbance = Hypothesis::residual(NON_DISTURBANCE, prof.max, tol.eq_tol);
    let squares_fixed = Hypothesis::residual("squares_fixed", squares, tol.eq_tol);
    let average_conservation = Hypothesis::residual(AVERAGE_CONSERVATION, avg, tol.eq_tol);
    let applies = non_disturbance.holds && squares_fixed.holds && average_conservation.holds;
    Ok(NondisturbanceCommutation {
        non_disturbance,
        squares_fixed,
        average_conservation,
        effect_commutator,
        shift_commutator,
        shift_norm: op_norm(&shift),
        threshold,
        applies,
        passed: !applies || (effect_commutator <= threshold && shift_commutator <= threshold),
    })
}

/// Identity check used by the variance substitution: under full conservation
/// `‖Γ_ξ^E(N²) − Γ_ξ^E(N)²‖` equals the apparatus variance. Returns both sides.
pub fn spread_and_variance(m: &MeasurementScheme, q: &AdditiveQuantity, tol: &Tolerance) -> Result<(f64, f64)> {
    let maps = m.restriction_maps();
    let c = Conserved::new(m, &maps, q, tol)?;
    Ok((c.spread, c.variance))
}

//! The acceptance battery run by `waylab suite`.
//!
//! Every check is seeded, so the serialized report is identical across runs.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use waylab_core::bounds::{
    self, disturbance_profile, eval_disturbance_bounds, first_kind_defect, repeatability_defect,
};
use waylab_core::conserve::{check_conservation, qfi, variance};
use waylab_core::cpmaps::qutrit_average_channel;
use waylab_core::fixpt::{
    analyze_fixed_points, check_support_projection, kraus_commutant, nondisturbed_norm1_observable,
    post_processing_decomposition,
};
use waylab_core::measure::{normal_dilation, repeatability_report};
use waylab_core::opcore::{
    c, commutator, diag, eigenspace_projector, hermitian_part, identity, op_norm, orthonormal_basis, outer,
    pauli_x, range_isometry, span_residual,
};
use waylab_core::random::{
    conservative_unitary, haar_unitary, random_channel, random_conservative_scenario, random_hermitian,
    random_integer_hermitian, random_pure_state, random_sharp_observable, random_stochastic, random_unital_channel,
};
use waylab_core::{BoundId, BoundReport, Instrument, Observable, OperationMap, Operator, Tolerance, Vector};

use crate::SCHEMA_VERSION;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub metrics: BTreeMap<&'static str, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub schema: u32,
    pub tolerance: Tolerance,
    pub criteria: Vec<Criterion>,
    pub passed: usize,
    pub failed: usize,
}

impl SuiteReport {
    pub fn exit_code(&self) -> i32 {
        if self.failed == 0 {
            0
        } else {
            1
        }
    }
}

fn criterion(id: u32, name: &'static str, passed: bool, metrics: &[(&'static str, Value)]) -> Criterion {
    Criterion {
        id,
        name,
        passed,
        metrics: metrics.iter().cloned().collect(),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn dist(a: &Operator, b: &Operator) -> f64 {
    op_norm(&(a - b))
}

fn sharp_z(tol: &Tolerance) -> Observable {
    Observable::new(
        vec!["0".into(), "1".into()],
        vec![diag(&[1.0, 0.0]), diag(&[0.0, 1.0])],
        tol,
    )
    .expect("computational basis")
}

fn unsharp_x(lambda: f64, tol: &Tolerance) -> Observable {
    let half = |sign: f64| (identity(2) + pauli_x() * c(sign * lambda, 0.0)) * c(0.5, 0.0);
    Observable::new(vec!["+".into(), "-".into()], vec![half(1.0), half(-1.0)], tol).expect("unsharp family")
}

/// Lambda family on a qubit: commutators, disturbances and tightness.
pub fn qubit_family(tol: &Tolerance) -> Criterion {
    let a = sharp_z(tol);
    let mut comm_err = 0.0_f64;
    let mut dist_b_err = 0.0_f64;
    let mut dist_a_err = 0.0_f64;
    let mut tight = 0.0_f64;
    let mut ok = true;
    for lambda in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let b = unsharp_x(lambda, tol);
        comm_err = comm_err.max((op_norm(&commutator(a.effect(0), b.effect(0))) - lambda / 2.0).abs());
        let luders_a = Instrument::luders(&a, tol).expect("Lüders");
        let luders_b = Instrument::luders(&b, tol).expect("Lüders");
        for v in disturbance_profile(&luders_a, &b).expect("profile").norms {
            dist_b_err = dist_b_err.max((v - lambda / 2.0).abs());
        }
        let expect = (1.0 - (1.0 - lambda * lambda).sqrt()) / 2.0;
        for v in disturbance_profile(&luders_b, &a).expect("profile").norms {
            dist_a_err = dist_a_err.max((v - expect).abs());
        }
        let m = normal_dilation(&a, tol).expect("dilation");
        let reports = eval_disturbance_bounds(&m, &b, None, false, tol).expect("bounds");
        let rows: Vec<&BoundReport> = reports
            .iter()
            .filter(|r| r.bound == BoundId::DisturbanceUnsharpness)
            .collect();
        ok &= !rows.is_empty();
        for r in rows {
            tight = tight.max(r.slack.abs());
        }
    }
    let passed = ok && comm_err <= 1e-10 && dist_b_err <= 1e-10 && dist_a_err <= 1e-10 && tight <= 1e-9;
    criterion(
        1,
        "qubit-family",
        passed,
        &[
            ("commutator_error", json!(comm_err)),
            ("disturbance_by_sharp_error", json!(dist_b_err)),
            ("disturbance_by_unsharp_error", json!(dist_a_err)),
            ("unsharpness_bound_max_abs_slack", json!(tight)),
        ],
    )
}

/// Qutrit channel conserving the mean but not the second moment.
pub fn qutrit_moments(tol: &Tolerance) -> Criterion {
    let r = check_conservation(&qutrit_average_channel(), &diag(&[1.0, 0.0, -1.0]), tol).expect("qutrit channel");
    let passed =
        r.average_holds && r.average_defect <= 1e-12 && !r.full_holds && (r.full_defect - 1.0).abs() <= 1e-12;
    criterion(
        2,
        "qutrit-moments",
        passed,
        &[
            ("average_defect", json!(r.average_defect)),
            ("full_defect", json!(r.full_defect)),
            ("average_holds", json!(r.average_holds)),
            ("full_holds", json!(r.full_holds)),
        ],
    )
}

/// Conservative unitaries conserve every moment; generic ones fail on average.
pub fn unitary_separation(tol: &Tolerance) -> Criterion {
    let mut worst_conservative = 0.0_f64;
    let mut least_generic = f64::INFINITY;
    for seed in 0..100u64 {
        let mut g = rng(0x3000 + seed);
        let d = 2 + (seed % 3) as usize;
        let n = random_integer_hermitian(d, 3, &mut g);
        let u = conservative_unitary(&n, &mut g, tol).expect("conservative unitary");
        let phi = OperationMap::unitary(u, tol).expect("unitary");
        worst_conservative = worst_conservative.max(check_conservation(&phi, &n, tol).expect("report").full_defect);

        let n = random_hermitian(d, &mut g);
        let u = loop {
            let u = haar_unitary(d, &mut g);
            if op_norm(&commutator(&u, &n)) > 0.1 {
                break u;
            }
        };
        let phi = OperationMap::unitary(u, tol).expect("unitary");
        least_generic = least_generic.min(check_conservation(&phi, &n, tol).expect("report").average_defect);
    }
    criterion(
        3,
        "unitary-separation",
        worst_conservative <= 1e-9 && least_generic > 1e-3,
        &[
            ("max_conservative_full_defect", json!(worst_conservative)),
            ("min_generic_average_defect", json!(least_generic)),
        ],
    )
}

fn orthonormal_pair(d: usize, g: &mut impl Rng) -> (Vector, Vector) {
    let psi = random_pure_state(d, g);
    let mut phi = random_pure_state(d, g);
    let overlap = psi.dotc(&phi);
    phi -= &psi * overlap;
    let n = phi.norm();
    (psi, phi / c(n, 0.0))
}

/// All reports of one seeded conservative scenario.
pub fn theorem_reports(seed: u64, tol: &Tolerance) -> Vec<BoundReport> {
    let mut g = rng(0x4000 + seed);
    let ds = 2 + (seed % 2) as usize;
    let da = 2 + ((seed / 2) % 2) as usize;
    let sc = random_conservative_scenario(ds, da, 2, &mut g, tol).expect("scenario");
    let mut out = Vec::new();
    out.extend(eval_disturbance_bounds(&sc.scheme, &sc.probe, Some(&sc.quantity), false, tol).expect("disturbance"));
    out.extend(bounds::eval_measurability_bounds(&sc.scheme, &sc.target, &sc.quantity, false, tol).expect("error"));
    out.extend(bounds::eval_way(&sc.scheme, &sc.quantity, Some(&sc.target), false, tol).expect("way"));
    let (psi, phi) = orthonormal_pair(ds, &mut g);
    out.extend(bounds::eval_distinguishability_bounds(&sc.scheme, &sc.quantity, &psi, &phi, tol).expect("orthogonal"));
    out.extend(bounds::eval_first_kind_subspace_bounds(&sc.scheme, &sc.quantity, tol).expect("first kind"));
    out
}

pub fn theorem_suite(tol: &Tolerance) -> Criterion {
    let mut total = 0usize;
    let mut held = 0usize;
    let mut violations = 0usize;
    let mut min_slack = f64::INFINITY;
    let mut per_bound: BTreeMap<&'static str, usize> = BTreeMap::new();
    for seed in 0..200u64 {
        for r in theorem_reports(seed, tol) {
            total += 1;
            if r.hypotheses_hold {
                held += 1;
                *per_bound.entry(r.bound.as_str()).or_default() += 1;
                min_slack = min_slack.min(r.slack);
                if !r.satisfied {
                    violations += 1;
                }
            }
        }
    }
    criterion(
        4,
        "theorem-suite",
        violations == 0 && min_slack >= -1e-7,
        &[
            ("scenarios", json!(200)),
            ("reports", json!(total)),
            ("hypothesis_satisfying", json!(held)),
            ("violations", json!(violations)),
            ("min_slack", json!(min_slack)),
            ("hypothesis_satisfying_by_bound", json!(per_bound)),
        ],
    )
}

pub fn fisher_information(tol: &Tolerance) -> Criterion {
    let mut pure_gap = 0.0_f64;
    let mut commuting = 0.0_f64;
    for seed in 0..50u64 {
        let mut g = rng(0x5000 + seed);
        let d = 2 + (seed % 3) as usize;
        let n = random_hermitian(d, &mut g);
        let psi = random_pure_state(d, &mut g);
        let rho = outer(&psi, &psi);
        let q = qfi(&n, &rho, tol).expect("qfi");
        pure_gap = pure_gap.max((q - 4.0 * variance(&n, &rho, tol).expect("variance")).abs());

        let u = haar_unitary(d, &mut g);
        let weights: Vec<f64> = (0..d).map(|_| g.random::<f64>() + 0.05).collect();
        let total: f64 = weights.iter().sum();
        let mut rho = Operator::zeros(d, d);
        let mut nc = Operator::zeros(d, d);
        for k in 0..d {
            let v = u.column(k).into_owned();
            rho += outer(&v, &v) * c(weights[k] / total, 0.0);
            nc += outer(&v, &v) * c(g.random::<f64>(), 0.0);
        }
        commuting = commuting.max(qfi(&hermitian_part(&nc), &hermitian_part(&rho), tol).expect("qfi"));
    }
    let mixed = qfi(&pauli_x(), &diag(&[0.75, 0.25]), tol).expect("qfi");
    criterion(
        5,
        "fisher-information",
        pure_gap <= 1e-9 && commuting <= 1e-9 && (mixed - 1.0).abs() <= 1e-9,
        &[
            ("pure_state_gap", json!(pure_gap)),
            ("commuting_max", json!(commuting)),
            ("qubit_example", json!(mixed)),
        ],
    )
}

/// Number of singular values at most `threshold`, with the matching right
/// singular vectors.
fn null_space(a: &Operator, threshold: f64) -> Vec<Vector> {
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors");
    (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] <= threshold)
        .map(|k| v_t.row(k).adjoint())
        .collect()
}

pub fn fixed_point_machinery(tol: &Tolerance) -> Criterion {
    let mut idempotence = 0.0_f64;
    let mut invariance = 0.0_f64;
    let mut range_residual = 0.0_f64;
    let mut rank_mismatch = 0usize;
    let mut support_failures = 0usize;
    for seed in 0..100u64 {
        let mut g = rng(0x6000 + seed);
        let d = 2 + (seed % 3) as usize;
        let phi = random_channel(d, d, 1 + (seed % 3) as usize, &mut g, tol).expect("channel");
        let a = analyze_fixed_points(&phi, tol).expect("analysis");
        let p = &a.projector;
        let m = phi.to_supermatrix();
        idempotence = idempotence.max(dist(&(p * p), p));
        invariance = invariance.max(dist(&(&m * p), p));
        let shifted = &m - Operator::identity(d * d, d * d);
        let null = null_space(&shifted, 1e-6);
        let rank = p.singular_values().iter().filter(|&&s| s > 0.5).count();
        if rank != null.len() {
            rank_mismatch += 1;
        }
        range_residual = range_residual.max(op_norm(&(&shifted * p)));
        for v in &null {
            range_residual = range_residual.max((p * v - v).norm());
        }
        if !check_support_projection(&a, &phi, tol).all_pass() {
            support_failures += 1;
        }
    }
    let mut commutant_gap = 0.0_f64;
    let mut closure = 0.0_f64;
    for seed in 0..50u64 {
        let mut g = rng(0x6100 + seed);
        let d = 2 + (seed % 3) as usize;
        let phi = random_unital_channel(d, 2 + (seed % 2) as usize, &mut g, tol).expect("unital");
        let a = analyze_fixed_points(&phi, tol).expect("analysis");
        let k = kraus_commutant(&phi, tol);
        let ob = orthonormal_basis(&a.basis, 1e-8);
        let ok = orthonormal_basis(&k, 1e-8);
        if ob.len() != ok.len() {
            commutant_gap = f64::INFINITY;
        }
        for x in &a.basis {
            commutant_gap = commutant_gap.max(span_residual(&ok, x));
            for y in &a.basis {
                closure = closure.max(span_residual(&ob, &(x * y)));
            }
        }
        for x in &k {
            commutant_gap = commutant_gap.max(span_residual(&ob, x));
        }
    }
    criterion(
        6,
        "fixed-point-machinery",
        idempotence <= 1e-8
            && invariance <= 1e-8
            && range_residual <= 1e-8
            && rank_mismatch == 0
            && support_failures == 0
            && commutant_gap <= 1e-8
            && closure <= 1e-8,
        &[
            ("idempotence_defect", json!(idempotence)),
            ("invariance_defect", json!(invariance)),
            ("range_residual", json!(range_residual)),
            ("rank_mismatches", json!(rank_mismatch)),
            ("support_failures", json!(support_failures)),
            ("unital_commutant_gap", json!(commutant_gap)),
            ("unital_product_closure", json!(closure)),
        ],
    )
}

pub fn repeatability(tol: &Tolerance) -> Criterion {
    let mut sharp_failures = 0usize;
    let mut collapse_failures = 0usize;
    let mut orthogonality = 0.0_f64;
    for seed in 0..20u64 {
        let mut g = rng(0x7000 + seed);
        let d = 2 + (seed % 3) as usize;
        let e = random_sharp_observable(d, 2 + (seed % (d as u64 - 1)) as usize, &mut g, tol).expect("sharp");
        let luders = Instrument::luders(&e, tol).expect("Lüders");
        let m = normal_dilation(&e, tol).expect("dilation");
        if !repeatability_report(&luders, Some(&m), tol).expect("report").all_pass() {
            sharp_failures += 1;
        }
        let states: Vec<Vector> = e
            .effects()
            .iter()
            .map(|p| {
                let proj = eigenspace_projector(p, 1.0, tol).expect("projector");
                let w = range_isometry(&proj, 0.5);
                let mut v = Vector::zeros(d);
                for k in 0..w.ncols() {
                    v += w.column(k) * c(g.random::<f64>() + 0.1, 0.0);
                }
                let n = v.norm();
                v / c(n, 0.0)
            })
            .collect();
        let collapse = Instrument::rank_one_collapse(&e, &states, tol).expect("collapse");
        let r = repeatability_report(&collapse, None, tol).expect("report");
        orthogonality = orthogonality.max(r.output_orthogonality.defect);
        if !r.all_pass() {
            collapse_failures += 1;
        }
    }
    let half = Instrument::luders(&unsharp_x(0.5, tol), tol).expect("Lüders");
    let fk = first_kind_defect(&half);
    let rep = repeatability_defect(&half);
    criterion(
        7,
        "repeatability",
        sharp_failures == 0 && collapse_failures == 0 && orthogonality <= 1e-9 && fk <= 1e-10 && rep >= 0.2,
        &[
            ("sharp_luders_failures", json!(sharp_failures)),
            ("collapse_failures", json!(collapse_failures)),
            ("collapse_output_orthogonality", json!(orthogonality)),
            ("unsharp_first_kind_defect", json!(fk)),
            ("unsharp_repeatability_defect", json!(rep)),
            ("required_repeatability_defect", json!(0.2)),
        ],
    )
}

/// Invertible stochastic mix of a random rank-1 basis measurement.
pub fn mixed_basis(seed: u64, tol: &Tolerance) -> (Observable, Vec<Vec<f64>>, Observable) {
    let mut g = rng(0x8000 + seed);
    let d = 2 + (seed % 3) as usize;
    let u = haar_unitary(d, &mut g);
    let base = Observable::from_basis(&u);
    let mix = loop {
        let m = random_stochastic(d, d, &mut g);
        let det = Operator::from_fn(d, d, |i, j| c(m[i][j], 0.0)).determinant();
        if det.norm() > 1e-2 {
            break m;
        }
    };
    let e = base.post_process(&mix, tol).expect("mix");
    (base, mix, e)
}

pub fn post_processing_round_trip(tol: &Tolerance) -> Criterion {
    let mut worst_p = 0.0_f64;
    let mut worst_g = 0.0_f64;
    let mut failures = 0usize;
    for seed in 0..20u64 {
        let (base, mix, e) = mixed_basis(seed, tol);
        let Ok(pp) = post_processing_decomposition(&Instrument::luders(&e, tol).expect("Lüders"), tol) else {
            failures += 1;
            continue;
        };
        if pp.g.len() != base.len() {
            failures += 1;
            continue;
        }
        for (z, gz) in pp.g.effects().iter().enumerate() {
            let (best, err) = base
                .effects()
                .iter()
                .enumerate()
                .map(|(k, b)| (k, dist(gz, b)))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            worst_g = worst_g.max(err);
            for x in 0..mix.len() {
                worst_p = worst_p.max((pp.p[x][z] - mix[x][best]).abs());
            }
        }
    }
    criterion(
        8,
        "post-processing-round-trip",
        failures == 0 && worst_p <= 1e-8 && worst_g <= 1e-8,
        &[
            ("failures", json!(failures)),
            ("max_stochastic_error", json!(worst_p)),
            ("max_effect_error", json!(worst_g)),
        ],
    )
}

pub fn norm_one_construction(tol: &Tolerance) -> Criterion {
    let mut cases: Vec<(OperationMap, Observable)> = Vec::new();
    for seed in 0..10u64 {
        let (_, _, e) = mixed_basis(seed, tol);
        cases.push((Instrument::luders(&e, tol).expect("Lüders").channel(), e));
    }
    for seed in 0..10u64 {
        let mut g = rng(0x9000 + seed);
        let d = 3 + (seed % 2) as usize;
        let e = random_sharp_observable(d, 2, &mut g, tol).expect("sharp");
        let states: Vec<Vector> = e
            .effects()
            .iter()
            .map(|p| {
                let proj = eigenspace_projector(p, 1.0, tol).expect("projector");
                range_isometry(&proj, 0.5).column(0).into_owned()
            })
            .collect();
        let collapse = Instrument::rank_one_collapse(&e, &states, tol).expect("collapse");
        cases.push((collapse.channel(), e));
    }
    for seed in 0..5u64 {
        let mut g = rng(0x9100 + seed);
        let e = random_sharp_observable(2 + seed as usize % 3, 2, &mut g, tol).expect("sharp");
        cases.push((Instrument::luders(&e, tol).expect("Lüders").channel(), e));
    }
    let mut norm = 0.0_f64;
    let mut fixed = 0.0_f64;
    let mut distinguish = 0.0_f64;
    let mut failures = 0usize;
    let mut non_faithful = 0usize;
    for (phi, e) in &cases {
        match nondisturbed_norm1_observable(phi, e, tol) {
            Ok(n1) => {
                norm = norm.max(n1.norm_defect);
                fixed = fixed.max(n1.fixed_defect);
                distinguish = distinguish.max(n1.distinguishability_defect);
                if !n1.faithful {
                    non_faithful += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    criterion(
        9,
        "norm-one-construction",
        failures == 0 && norm <= 1e-9 && fixed <= 1e-9 && distinguish <= 1e-9,
        &[
            ("scenarios", json!(cases.len())),
            ("non_faithful_scenarios", json!(non_faithful)),
            ("failures", json!(failures)),
            ("norm_defect", json!(norm)),
            ("fixed_defect", json!(fixed)),
            ("distinguishability_defect", json!(distinguish)),
        ],
    )
}

fn battery(tol: &Tolerance) -> Vec<Criterion> {
    vec![
        qubit_family(tol),
        qutrit_moments(tol),
        unitary_separation(tol),
        theorem_suite(tol),
        fisher_information(tol),
        fixed_point_machinery(tol),
        repeatability(tol),
        post_processing_round_trip(tol),
        norm_one_construction(tol),
    ]
}

/// Run the battery twice and compare the serialized results.
pub fn run_suite(tol: &Tolerance) -> SuiteReport {
    let first = battery(tol);
    let second = battery(tol);
    let identical = crate::output::to_json(&first) == crate::output::to_json(&second);
    let mut criteria = first;
    criteria.push(criterion(
        10,
        "determinism",
        identical,
        &[("repeated_battery_identical", json!(identical))],
    ));
    let passed = criteria.iter().filter(|c| c.passed).count();
    SuiteReport {
        schema: SCHEMA_VERSION,
        tolerance: *tol,
        failed: criteria.len() - passed,
        passed,
        criteria,
    }
}

/// One line per criterion: `PASS  4 theorem-suite`.
pub fn summary_lines(r: &SuiteReport) -> Vec<String> {
    r.criteria
        .iter()
        .map(|c| format!("{} {:>2} {}", if c.passed { "PASS" } else { "FAIL" }, c.id, c.name))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use waylab_core::opcore::projector_onto;

    #[test]
    fn cheap_criteria_pass() {
        let tol = Tolerance::default();
        assert!(qubit_family(&tol).passed);
        assert!(qutrit_moments(&tol).passed);
    }

    #[test]
    fn projector_onto_plus_is_recovered_from_the_family() {
        let tol = Tolerance::default();
        let pp = post_processing_decomposition(&Instrument::luders(&unsharp_x(0.4, &tol), &tol).unwrap(), &tol).unwrap();
        let plus = Vector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]) / c(2f64.sqrt(), 0.0);
        assert!(dist(pp.g.effect(0), &projector_onto(&plus)) <= 1e-10);
    }
}

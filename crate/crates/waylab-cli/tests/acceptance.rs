//! Acceptance criteria, each checked against independent computations.
//!
//! Every criterion prints one `PASS`/`FAIL` line. A criterion whose stated
//! threshold is unattainable prints `FAIL` and the test asserts the exact
//! value that is attained instead.

use std::f64::consts::PI;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use waylab_core::bounds::{
    disturbance_profile, eval_disturbance_bounds, eval_distinguishability_bounds, eval_first_kind_subspace_bounds,
    eval_measurability_bounds, eval_way, first_kind_defect, repeatability_defect,
};
use waylab_core::conserve::{check_conservation, qfi};
use waylab_core::cpmaps::qutrit_average_channel;
use waylab_core::fixpt::{
    analyze_fixed_points, check_support_projection, nondisturbed_norm1_observable, post_processing_decomposition,
};
use waylab_core::measure::{normal_dilation, repeatability_report};
use waylab_core::opcore::{c, diag, identity, matrix_unit, pauli_x, pauli_z, vec_col};
use waylab_core::random::{
    haar_unitary, random_channel, random_conservative_scenario, random_hermitian, random_pure_state,
    random_sharp_observable, random_unital_channel,
};
use waylab_core::{BoundId, Instrument, Observable, OperationMap, Operator, Tolerance, Vector, C64};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn tol() -> Tolerance {
    Tolerance::default()
}

/// Operator norm from the largest singular value, computed here rather than
/// through the library.
fn norm(a: &Operator) -> f64 {
    a.singular_values().iter().copied().fold(0.0, f64::max)
}

fn real_eigenvalues(a: &Operator) -> Vec<f64> {
    let h = (a + a.adjoint()) * c(0.5, 0.0);
    let mut v: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

fn heisenberg(kraus: &[Operator], a: &Operator) -> Operator {
    kraus.iter().fold(Operator::zeros(a.nrows(), a.ncols()), |acc, k| acc + k.adjoint() * a * k)
}

fn schrodinger(kraus: &[Operator], t: &Operator) -> Operator {
    kraus.iter().fold(Operator::zeros(t.nrows(), t.ncols()), |acc, k| acc + k * t * k.adjoint())
}

/// Dual supermatrix assembled column by column from matrix units.
fn dual_supermatrix(kraus: &[Operator], d: usize) -> Operator {
    let mut m = Operator::zeros(d * d, d * d);
    for j in 0..d {
        for i in 0..d {
            let col = vec_col(&heisenberg(kraus, &matrix_unit(d, i, j)));
            m.set_column(j * d + i, &col);
        }
    }
    m
}

/// Orthonormal null-space basis of `a` from its SVD.
fn null_space(a: &Operator, threshold: f64) -> Vec<Vector> {
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.unwrap();
    (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] <= threshold)
        .map(|k| v_t.row(k).adjoint())
        .collect()
}

/// Residual of `x` after projection onto the span of `basis`, using a
/// Gram-Schmidt basis built here.
fn residual(basis: &[Operator], x: &Operator) -> f64 {
    let mut ortho: Vec<Vector> = Vec::new();
    for b in basis {
        let mut v = vec_col(b);
        for o in &ortho {
            let p = o.dotc(&v);
            v -= o * p;
        }
        let n = v.norm();
        if n > 1e-10 {
            ortho.push(v / c(n, 0.0));
        }
    }
    let mut v = vec_col(x);
    for o in &ortho {
        let p = o.dotc(&v);
        v -= o * p;
    }
    v.norm()
}

fn report(id: u32, name: &str, passed: bool, detail: String) -> bool {
    println!("{} {id:>2} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    passed
}

fn unsharp_x(lambda: f64) -> Observable {
    let half = |s: f64| (identity(2) + pauli_x() * c(s * lambda, 0.0)) * c(0.5, 0.0);
    Observable::new(vec!["+".into(), "-".into()], vec![half(1.0), half(-1.0)], &tol()).unwrap()
}

fn sharp_z() -> Observable {
    Observable::new(
        vec!["0".into(), "1".into()],
        vec![diag(&[1.0, 0.0]), diag(&[0.0, 1.0])],
        &tol(),
    )
    .unwrap()
}

fn qubit_family() -> bool {
    let t = tol();
    let mut worst = 0.0_f64;
    let mut slack = 0.0_f64;
    for lambda in [0.1, 0.25, 0.5, 0.75, 0.9] {
        let b = unsharp_x(lambda);
        let p0 = diag(&[1.0, 0.0]);
        let p1 = diag(&[0.0, 1.0]);
        let bp = b.effect(0);
        let comm = &p0 * bp - bp * &p0;
        worst = worst.max((norm(&comm) - lambda / 2.0).abs());

        let dephased = &p0 * bp * &p0 + &p1 * bp * &p1;
        let oracle_b = norm(&(dephased - bp));
        worst = worst.max((oracle_b - lambda / 2.0).abs());
        let la = Instrument::luders(&sharp_z(), &t).unwrap();
        for v in disturbance_profile(&la, &b).unwrap().norms {
            worst = worst.max((v - oracle_b).abs());
        }

        let r = (1.0 - lambda * lambda).sqrt();
        let roots: Vec<Operator> = [1.0, -1.0]
            .iter()
            .map(|s| {
                let (p, m) = ((1.0 + lambda) / 2.0, (1.0 - lambda) / 2.0);
                let (sp, sm) = if *s > 0.0 { (p.sqrt(), m.sqrt()) } else { (m.sqrt(), p.sqrt()) };
                (identity(2) * c((sp + sm) / 2.0, 0.0)) + pauli_x() * c((sp - sm) / 2.0, 0.0)
            })
            .collect();
        let oracle_a = norm(&(heisenberg(&roots, &p0) - &p0));
        worst = worst.max((oracle_a - (1.0 - r) / 2.0).abs());
        let lb = Instrument::luders(&b, &t).unwrap();
        for v in disturbance_profile(&lb, &sharp_z()).unwrap().norms {
            worst = worst.max((v - oracle_a).abs());
        }

        let m = normal_dilation(&sharp_z(), &t).unwrap();
        let rows = eval_disturbance_bounds(&m, &b, None, false, &t).unwrap();
        let tight: Vec<_> = rows.iter().filter(|r| r.bound == BoundId::DisturbanceUnsharpness).collect();
        assert!(!tight.is_empty());
        for r in tight {
            slack = slack.max(r.slack.abs());
            worst = worst.max((r.lhs - lambda / 2.0).abs());
        }
    }
    report(
        1,
        "qubit-family",
        worst <= 1e-10 && slack <= 1e-9,
        format!("max error {worst:.2e}, max |slack| {slack:.2e}"),
    )
}

fn qutrit_moments() -> bool {
    let phi = qutrit_average_channel();
    let n = diag(&[1.0, 0.0, -1.0]);
    let first = norm(&(heisenberg(phi.kraus(), &n) - &n));
    let n2 = &n * &n;
    let second = norm(&(heisenberg(phi.kraus(), &n2) - &n2));
    let r = check_conservation(&phi, &n, &tol()).unwrap();
    let passed = first <= 1e-12
        && (second - 1.0).abs() <= 1e-12
        && r.average_defect <= 1e-12
        && (r.full_defect - 1.0).abs() <= 1e-12
        && r.average_holds
        && !r.full_holds;
    report(
        2,
        "qutrit-moments",
        passed,
        format!("first moment {first:.2e}, second moment {second:.3}, library full defect {:.3}", r.full_defect),
    )
}

/// Random integer spectrum with repeated levels, diagonal in a random basis.
fn degenerate_quantity(d: usize, g: &mut ChaCha8Rng) -> (Operator, Operator, Vec<i32>) {
    let levels: Vec<i32> = (0..d).map(|_| g.random_range(-1..=1)).collect();
    let v = haar_unitary(d, g);
    let n = &v * diag(&levels.iter().map(|&l| l as f64).collect::<Vec<_>>()) * v.adjoint();
    (n, v, levels)
}

/// Block unitary acting within each level of `levels`, in the basis `v`.
fn block_unitary(v: &Operator, levels: &[i32], g: &mut ChaCha8Rng) -> Operator {
    let d = levels.len();
    let mut u = Operator::zeros(d, d);
    for level in -1..=1 {
        let idx: Vec<usize> = (0..d).filter(|&k| levels[k] == level).collect();
        if idx.is_empty() {
            continue;
        }
        let w = haar_unitary(idx.len(), g);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                u[(i, j)] = w[(a, b)];
            }
        }
    }
    v * u * v.adjoint()
}

fn unitary_separation() -> bool {
    let t = tol();
    let mut conservative = 0.0_f64;
    let mut generic = f64::INFINITY;
    for seed in 0..100u64 {
        let mut g = rng(0xA300 + seed);
        let d = 2 + (seed % 3) as usize;
        let (n, v, levels) = degenerate_quantity(d, &mut g);
        let u = block_unitary(&v, &levels, &mut g);
        let phi = OperationMap::unitary(u.clone(), &t).unwrap();
        let mut power = identity(d);
        for _ in 0..4 {
            power = &power * &n;
            conservative = conservative.max(norm(&(u.adjoint() * &power * &u - &power)));
        }
        conservative = conservative.max(check_conservation(&phi, &n, &t).unwrap().full_defect);
    }
    for seed in 0..100u64 {
        let mut g = rng(0xA400 + seed);
        let d = 2 + (seed % 3) as usize;
        let n = random_hermitian(d, &mut g);
        let u = loop {
            let u = haar_unitary(d, &mut g);
            if norm(&(&u * &n - &n * &u)) > 0.1 {
                break u;
            }
        };
        let oracle = norm(&(u.adjoint() * &n * &u - &n));
        let phi = OperationMap::unitary(u, &t).unwrap();
        let lib = check_conservation(&phi, &n, &t).unwrap().average_defect;
        assert!((lib - oracle).abs() <= 1e-12);
        generic = generic.min(oracle);
    }
    report(
        3,
        "unitary-separation",
        conservative <= 1e-9 && generic > 1e-3,
        format!("conservative max defect {conservative:.2e}, generic min defect {generic:.3}"),
    )
}

fn theorem_suite() -> bool {
    let t = tol();
    let mut held = 0usize;
    let mut violations = 0usize;
    let mut min_slack = f64::INFINITY;
    let mut conservation = 0.0_f64;
    for seed in 0..200u64 {
        let mut g = rng(0xA500 + seed);
        let ds = 2 + (seed % 2) as usize;
        let da = 2 + ((seed / 2) % 2) as usize;
        let sc = random_conservative_scenario(ds, da, 2 + (seed % 3 == 0) as usize, &mut g, &t).unwrap();
        let total = sc.quantity.n_sys().kronecker(&identity(da)) + identity(ds).kronecker(sc.quantity.n_app());
        let u = &sc.scheme.coupling().kraus()[0];
        conservation = conservation.max(norm(&(u * &total - &total * u)));

        let mut rows = Vec::new();
        rows.extend(eval_disturbance_bounds(&sc.scheme, &sc.probe, Some(&sc.quantity), false, &t).unwrap());
        rows.extend(eval_measurability_bounds(&sc.scheme, &sc.target, &sc.quantity, false, &t).unwrap());
        rows.extend(eval_way(&sc.scheme, &sc.quantity, Some(&sc.target), false, &t).unwrap());
        let psi = random_pure_state(ds, &mut g);
        let mut phi = random_pure_state(ds, &mut g);
        let overlap = psi.dotc(&phi);
        phi -= &psi * overlap;
        let phi = phi.normalize();
        rows.extend(eval_distinguishability_bounds(&sc.scheme, &sc.quantity, &psi, &phi, &t).unwrap());
        rows.extend(eval_first_kind_subspace_bounds(&sc.scheme, &sc.quantity, &t).unwrap());
        for r in rows {
            assert!((r.slack - (r.rhs - r.lhs)).abs() <= 1e-12);
            if r.hypotheses_hold {
                held += 1;
                min_slack = min_slack.min(r.slack);
                if r.slack < -1e-9 {
                    violations += 1;
                }
            }
        }
    }
    report(
        4,
        "theorem-suite",
        violations == 0 && held > 0 && conservation <= 1e-9,
        format!("{held} hypothesis-satisfying reports, {violations} violations, min slack {min_slack:.2e}"),
    )
}

fn variance(n: &Operator, rho: &Operator) -> f64 {
    let m = (rho * n).trace().re;
    (rho * n * n).trace().re - m * m
}

fn pure_variance(n: &Operator, v: &Vector) -> f64 {
    let m = v.dotc(&(n * v)).re;
    v.dotc(&(n * n * v)).re - m * m
}

/// Four times the smallest average variance over two-element decompositions
/// of a rank-2 qubit state, by grid search with local refinement.
fn roof_oracle(n: &Operator, rho: &Operator) -> f64 {
    let e = rho.clone().symmetric_eigen();
    let amp: Vec<Vector> = (0..2).map(|k| e.eigenvectors.column(k) * c(e.eigenvalues[k].max(0.0).sqrt(), 0.0)).collect();
    let value = |theta: f64, phase: f64| -> f64 {
        let w = C64::from_polar(1.0, phase);
        let rows = [
            (c(theta.cos(), 0.0), w * theta.sin()),
            (c(-theta.sin(), 0.0), w * theta.cos()),
        ];
        rows.iter()
            .map(|(a, b)| {
                let v = &amp[0] * *a + &amp[1] * *b;
                let p = v.norm_squared();
                if p <= 1e-15 {
                    0.0
                } else {
                    p * pure_variance(n, &(v / c(p.sqrt(), 0.0)))
                }
            })
            .sum()
    };
    let (mut best, mut bt, mut bp) = (f64::INFINITY, 0.0, 0.0);
    let steps = 200;
    for i in 0..=steps {
        for j in 0..steps {
            let (th, ph) = (PI / 2.0 * i as f64 / steps as f64, 2.0 * PI * j as f64 / steps as f64);
            let v = value(th, ph);
            if v < best {
                (best, bt, bp) = (v, th, ph);
            }
        }
    }
    let mut h = PI / steps as f64;
    while h > 1e-9 {
        let mut moved = false;
        for (dt, dp) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)] {
            let v = value(bt + dt, bp + dp);
            if v < best {
                (best, bt, bp) = (v, bt + dt, bp + dp);
                moved = true;
            }
        }
        if !moved {
            h /= 2.0;
        }
    }
    4.0 * best
}

fn fisher_information() -> bool {
    let t = tol();
    let mut pure = 0.0_f64;
    let mut commuting = 0.0_f64;
    let mut roof = 0.0_f64;
    for seed in 0..50u64 {
        let mut g = rng(0xA600 + seed);
        let d = 2 + (seed % 3) as usize;
        let n = random_hermitian(d, &mut g);
        let psi = random_pure_state(d, &mut g);
        let rho = &psi * psi.adjoint();
        pure = pure.max((qfi(&n, &rho, &t).unwrap() - 4.0 * variance(&n, &rho)).abs());

        let u = haar_unitary(d, &mut g);
        let p: Vec<f64> = (0..d).map(|_| g.random::<f64>() + 0.1).collect();
        let s: f64 = p.iter().sum();
        let spectrum: Vec<f64> = (0..d).map(|_| g.random_range(-2.0..2.0)).collect();
        let rho = &u * diag(&p.iter().map(|x| x / s).collect::<Vec<_>>()) * u.adjoint();
        let nc = &u * diag(&spectrum) * u.adjoint();
        commuting = commuting.max(qfi(&nc, &rho, &t).unwrap().abs());
    }
    for seed in 0..5u64 {
        let mut g = rng(0xA700 + seed);
        let n = random_hermitian(2, &mut g);
        let u = haar_unitary(2, &mut g);
        let p = 0.55 + 0.4 * g.random::<f64>();
        let rho = &u * diag(&[p, 1.0 - p]) * u.adjoint();
        roof = roof.max((roof_oracle(&n, &rho) - qfi(&n, &rho, &t).unwrap()).abs());
    }
    let example = qfi(&pauli_x(), &diag(&[0.75, 0.25]), &t).unwrap();
    let example_roof = roof_oracle(&pauli_x(), &diag(&[0.75, 0.25]));
    report(
        5,
        "fisher-information",
        pure <= 1e-9 && commuting <= 1e-9 && (example - 1.0).abs() <= 1e-9 && roof <= 1e-3 && (example_roof - 1.0).abs() <= 1e-3,
        format!(
            "pure gap {pure:.2e}, commuting max {commuting:.2e}, qubit example {example:.12}, roof gap {roof:.2e}"
        ),
    )
}

fn fixed_point_machinery() -> bool {
    let t = tol();
    let mut worst = 0.0_f64;
    let mut mismatches = 0usize;
    for seed in 0..100u64 {
        let mut g = rng(0xA800 + seed);
        let d = 2 + (seed % 3) as usize;
        let phi = random_channel(d, d, 1 + (seed % 3) as usize, &mut g, &t).unwrap();
        let a = analyze_fixed_points(&phi, &t).unwrap();
        let m = dual_supermatrix(phi.kraus(), d);
        assert!(norm(&(&m - phi.to_supermatrix())) <= 1e-12);
        let p = &a.projector;
        worst = worst.max(norm(&(p * p - p)));
        worst = worst.max(norm(&(&m * p - p)));
        let shifted = &m - Operator::identity(d * d, d * d);
        let null = null_space(&shifted, 1e-6);
        let rank = p.singular_values().iter().filter(|&&s| s > 0.5).count();
        if rank != null.len() || a.fixed_dim() != null.len() {
            mismatches += 1;
        }
        for v in &null {
            worst = worst.max((p * v - v).norm());
        }
        worst = worst.max(norm(&(&shifted * p)));

        let sp = &a.support_p;
        let rho0 = schrodinger(phi.kraus(), &a.rho0);
        worst = worst.max(norm(&(rho0 - &a.rho0)));
        let q = identity(d) - sp;
        worst = worst.max(norm(&(&q * schrodinger(phi.kraus(), sp) * &q)));
        worst = worst.max(norm(&(sp * heisenberg(phi.kraus(), sp) * sp - sp)));
        if !check_support_projection(&a, &phi, &t).all_pass() {
            mismatches += 1;
        }
    }
    let mut commutant = 0.0_f64;
    for seed in 0..50u64 {
        let mut g = rng(0xA900 + seed);
        let d = 2 + (seed % 3) as usize;
        let phi = random_unital_channel(d, 2 + (seed % 2) as usize, &mut g, &t).unwrap();
        let a = analyze_fixed_points(&phi, &t).unwrap();
        let mut stack = Operator::zeros(4 * phi.kraus().len() * d * d, d * d);
        let mut row = 0;
        for k in phi.kraus() {
            for x in [k.clone(), k.adjoint()] {
                for j in 0..d {
                    for i in 0..d {
                        let e = matrix_unit(d, i, j);
                        let col = vec_col(&(&e * &x - &x * &e));
                        stack.view_mut((row, j * d + i), (d * d, 1)).copy_from(&col);
                    }
                }
                row += d * d;
            }
        }
        let comm: Vec<Operator> = null_space(&stack, 1e-8)
            .iter()
            .map(|v| Operator::from_column_slice(d, d, v.as_slice()))
            .collect();
        if comm.len() != a.fixed_dim() {
            mismatches += 1;
        }
        for x in &a.basis {
            commutant = commutant.max(residual(&comm, x));
            for y in &a.basis {
                commutant = commutant.max(residual(&a.basis, &(x * y)));
            }
        }
        for x in &comm {
            commutant = commutant.max(residual(&a.basis, x));
        }
    }
    report(
        6,
        "fixed-point-machinery",
        worst <= 1e-8 && commutant <= 1e-8 && mismatches == 0,
        format!("max defect {worst:.2e}, unital commutant gap {commutant:.2e}, mismatches {mismatches}"),
    )
}

/// Returns whether the criterion passed and the attained repeatability
/// defect of the unsharp Lüders instrument.
fn repeatability() -> (bool, f64) {
    let t = tol();
    let mut sharp = 0.0_f64;
    let mut failures = 0usize;
    for seed in 0..20u64 {
        let mut g = rng(0xAA00 + seed);
        let d = 2 + (seed % 3) as usize;
        let e = random_sharp_observable(d, 2, &mut g, &t).unwrap();
        let l = Instrument::luders(&e, &t).unwrap();
        for (x, px) in e.effects().iter().enumerate() {
            sharp = sharp.max(norm(&(heisenberg(l.operations()[x].kraus(), px) - px)));
            sharp = sharp.max(norm(&(px * px - px)));
        }
        sharp = sharp.max(repeatability_defect(&l)).max(first_kind_defect(&l));
        if !repeatability_report(&l, Some(&normal_dilation(&e, &t).unwrap()), &t).unwrap().all_pass() {
            failures += 1;
        }
    }
    let b = unsharp_x(0.5);
    let l = Instrument::luders(&b, &t).unwrap();
    let p = 0.75_f64;
    let oracle = p - p * p;
    let attained = repeatability_defect(&l);
    let fk = first_kind_defect(&l);
    assert!((attained - oracle).abs() <= 1e-12);
    let passed = sharp <= 1e-10 && failures == 0 && fk <= 1e-10 && attained >= 0.2;
    report(
        7,
        "repeatability",
        passed,
        format!(
            "sharp defect {sharp:.2e}, unsharp first-kind defect {fk:.2e}, unsharp repeatability defect {attained:.6} (threshold 0.2)"
        ),
    );
    (passed, attained)
}

fn column_stochastic(d: usize, g: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    loop {
        let raw: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| g.random::<f64>()).collect()).collect();
        let sums: Vec<f64> = (0..d).map(|z| (0..d).map(|x| raw[x][z]).sum()).collect();
        let m: Vec<Vec<f64>> = (0..d).map(|x| (0..d).map(|z| raw[x][z] / sums[z]).collect()).collect();
        let det = Operator::from_fn(d, d, |i, j| c(m[i][j], 0.0)).determinant().norm();
        if det > 1e-2 {
            return m;
        }
    }
}

fn post_processing_round_trip() -> bool {
    let t = tol();
    let mut worst = 0.0_f64;
    let mut failures = 0usize;
    for seed in 0..20u64 {
        let mut g = rng(0xAB00 + seed);
        let d = 2 + (seed % 3) as usize;
        let u = haar_unitary(d, &mut g);
        let g_true: Vec<Operator> = (0..d).map(|k| u.column(k) * u.column(k).adjoint()).collect();
        let mix = column_stochastic(d, &mut g);
        let effects: Vec<Operator> = (0..d)
            .map(|x| (0..d).fold(Operator::zeros(d, d), |acc, z| acc + &g_true[z] * c(mix[x][z], 0.0)))
            .collect();
        let e = Observable::new((0..d).map(|x| x.to_string()).collect(), effects, &t).unwrap();
        let Ok(pp) = post_processing_decomposition(&Instrument::luders(&e, &t).unwrap(), &t) else {
            failures += 1;
            continue;
        };
        if pp.g.len() != d {
            failures += 1;
            continue;
        }
        let mut used = vec![false; d];
        for (z, gz) in pp.g.effects().iter().enumerate() {
            let k = (0..d)
                .min_by(|&a, &b| norm(&(gz - &g_true[a])).total_cmp(&norm(&(gz - &g_true[b]))))
                .unwrap();
            if used[k] {
                failures += 1;
            }
            used[k] = true;
            worst = worst.max(norm(&(gz - &g_true[k])));
            for x in 0..d {
                worst = worst.max((pp.p[x][z] - mix[x][k]).abs());
            }
        }
    }
    report(
        8,
        "post-processing-round-trip",
        worst <= 1e-8 && failures == 0,
        format!("max error up to permutation {worst:.2e}, failures {failures}"),
    )
}

fn norm_one_construction() -> bool {
    let t = tol();
    let mut cases: Vec<(OperationMap, Observable)> = Vec::new();
    for seed in 0..10u64 {
        let mut g = rng(0xAC00 + seed);
        let d = 2 + (seed % 3) as usize;
        let u = haar_unitary(d, &mut g);
        let mix = column_stochastic(d, &mut g);
        let effects: Vec<Operator> = (0..d)
            .map(|x| {
                (0..d).fold(Operator::zeros(d, d), |acc, z| {
                    acc + u.column(z) * u.column(z).adjoint() * c(mix[x][z], 0.0)
                })
            })
            .collect();
        let e = Observable::new((0..d).map(|x| x.to_string()).collect(), effects, &t).unwrap();
        cases.push((Instrument::luders(&e, &t).unwrap().channel(), e));
    }
    for seed in 0..10u64 {
        let mut g = rng(0xAD00 + seed);
        let d = 3 + (seed % 2) as usize;
        let e = random_sharp_observable(d, 2, &mut g, &t).unwrap();
        let states: Vec<Vector> = e
            .effects()
            .iter()
            .map(|p| {
                let eig = p.clone().symmetric_eigen();
                let k = (0..d).max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
                eig.eigenvectors.column(k).into_owned()
            })
            .collect();
        cases.push((Instrument::rank_one_collapse(&e, &states, &t).unwrap().channel(), e));
    }
    let mut worst = 0.0_f64;
    let mut failures = 0usize;
    let mut non_faithful = 0usize;
    for (phi, e) in &cases {
        let Ok(n1) = nondisturbed_norm1_observable(phi, e, &t) else {
            failures += 1;
            continue;
        };
        if !n1.faithful {
            non_faithful += 1;
        }
        let d = e.dim();
        let total = n1.g.effects().iter().fold(Operator::zeros(d, d), |acc, x| acc + x);
        worst = worst.max(norm(&(total - identity(d))));
        let nontrivial = n1.g.effects().iter().filter(|x| norm(x) > 1e-9).count();
        if nontrivial < 2 {
            failures += 1;
        }
        for (z, gz) in n1.g.effects().iter().enumerate() {
            if norm(gz) <= 1e-9 {
                continue;
            }
            let top = *real_eigenvalues(gz).last().unwrap();
            worst = worst.max((top - 1.0).abs());
            worst = worst.max(norm(&(heisenberg(phi.kraus(), gz) - gz)));
            let out = schrodinger(phi.kraus(), &n1.states[z]);
            for (y, gy) in n1.g.effects().iter().enumerate() {
                let expect = if y == z { 1.0 } else { 0.0 };
                worst = worst.max(((gy * &out).trace().re - expect).abs());
            }
        }
    }
    report(
        9,
        "norm-one-construction",
        worst <= 1e-9 && failures == 0 && non_faithful > 0,
        format!("{} scenarios ({non_faithful} non-faithful), max defect {worst:.2e}, failures {failures}", cases.len()),
    )
}

fn deterministic_suite() -> bool {
    let run = || {
        let out = Command::new(env!("CARGO_BIN_EXE_waylab"))
            .arg("suite")
            .env_remove("WAYLAB_TOL")
            .output()
            .unwrap();
        (out.status.code(), out.stdout)
    };
    let (code_a, first) = run();
    let (code_b, second) = run();
    let parsed: serde_json::Value = serde_json::from_slice(&first).unwrap();
    let criteria = parsed["criteria"].as_array().map_or(0, Vec::len);
    report(
        10,
        "determinism",
        first == second && code_a == code_b && criteria == 10,
        format!("{} bytes, identical {}, exit codes {code_a:?}/{code_b:?}", first.len(), first == second),
    )
}

#[test]
fn acceptance() {
    let one = qubit_family();
    let two = qutrit_moments();
    let three = unitary_separation();
    let four = theorem_suite();
    let five = fisher_information();
    let six = fixed_point_machinery();
    let (seven, attained) = repeatability();
    let eight = post_processing_round_trip();
    let nine = norm_one_construction();
    let ten = deterministic_suite();
    assert!(one && two && three && four && five && six && eight && nine && ten);
    assert!(!seven);
    assert!((attained - 3.0 / 16.0).abs() <= 1e-12);
}

#[test]
fn roof_oracle_agrees_on_pure_states() {
    let mut g = rng(0xAE00);
    for _ in 0..5 {
        let n = random_hermitian(2, &mut g);
        let psi = random_pure_state(2, &mut g);
        let rho = &psi * psi.adjoint() * c(1.0 - 1e-12, 0.0) + identity(2) * c(0.5e-12, 0.0);
        assert!((roof_oracle(&n, &rho) - 4.0 * pure_variance(&n, &psi)).abs() <= 1e-6);
    }
    assert!((roof_oracle(&pauli_z(), &diag(&[0.5, 0.5]))).abs() <= 1e-6);
}

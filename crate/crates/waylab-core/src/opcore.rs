//! Dense complex operator algebra.
//!
//! Operators are `nalgebra` matrices of `Complex64`. Composite spaces use the
//! index convention `i = i_sys * dim_app + i_app`, so the system factor varies
//! slowest and `tensor(a, b)` is the ordinary Kronecker product.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Operator = DMatrix<C64>;
pub type Vector = DVector<C64>;

/// Numerical tolerances shared by every predicate and report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    /// Absolute threshold for equalities and inequalities between operators.
    pub eq_tol: f64,
    /// Absolute gap used for rank decisions and eigenvalue clustering.
    pub rank_tol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            eq_tol: 1e-9,
            rank_tol: 1e-8,
        }
    }
}

impl Tolerance {
    pub fn new(eq_tol: f64, rank_tol: f64) -> Result<Self> {
        let ok = |t: f64| t.is_finite() && t > 0.0;
        if ok(eq_tol) && ok(rank_tol) {
            Ok(Self { eq_tol, rank_tol })
        } else {
            Err(Error::InvalidTolerance { eq_tol, rank_tol })
        }
    }

    /// Same tolerance with a different `eq_tol`.
    pub fn with_eq_tol(self, eq_tol: f64) -> Result<Self> {
        Self::new(eq_tol, self.rank_tol)
    }
}

/// Which tensor factor a partial trace keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subsystem {
    System,
    Apparatus,
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(d: usize) -> Operator {
    Operator::identity(d, d)
}

pub fn zeros(d: usize) -> Operator {
    Operator::zeros(d, d)
}

/// Square operator from real row-major entries.
pub fn real_matrix(d: usize, entries: &[f64]) -> Operator {
    assert_eq!(entries.len(), d * d, "real_matrix needs d*d entries");
    Operator::from_fn(d, d, |i, j| c(entries[i * d + j], 0.0))
}

pub fn diag(values: &[f64]) -> Operator {
    let d = values.len();
    Operator::from_fn(d, d, |i, j| if i == j { c(values[i], 0.0) } else { C64::new(0.0, 0.0) })
}

pub fn pauli_x() -> Operator {
    real_matrix(2, &[0.0, 1.0, 1.0, 0.0])
}

pub fn pauli_y() -> Operator {
    Operator::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
}

pub fn pauli_z() -> Operator {
    real_matrix(2, &[1.0, 0.0, 0.0, -1.0])
}

pub fn basis_vector(d: usize, i: usize) -> Vector {
    let mut v = Vector::zeros(d);
    v[i] = c(1.0, 0.0);
    v
}

/// `|i><j|` in dimension `d`.
pub fn matrix_unit(d: usize, i: usize, j: usize) -> Operator {
    let mut m = zeros(d);
    m[(i, j)] = c(1.0, 0.0);
    m
}

/// `|v><w|`.
pub fn outer(v: &Vector, w: &Vector) -> Operator {
    v * w.adjoint()
}

pub fn projector_onto(v: &Vector) -> Operator {
    let n = v.norm();
    let u = v / c(n, 0.0);
    outer(&u, &u)
}

pub fn dagger(a: &Operator) -> Operator {
    a.adjoint()
}

pub fn commutator(a: &Operator, b: &Operator) -> Operator {
    a * b - b * a
}

pub fn trace(a: &Operator) -> C64 {
    a.trace()
}

pub fn hermitian_part(a: &Operator) -> Operator {
    (a + a.adjoint()) * c(0.5, 0.0)
}

/// `‖a − a†‖`.
pub fn hermiticity_defect(a: &Operator) -> f64 {
    op_norm(&(a - a.adjoint()))
}

/// Kronecker product; the first factor's index varies slowest.
pub fn tensor(a: &Operator, b: &Operator) -> Operator {
    a.kronecker(b)
}

pub fn tensor_vec(a: &Vector, b: &Vector) -> Vector {
    a.kronecker(b)
}

fn check_square(a: &Operator) -> Result<usize> {
    if a.nrows() == a.ncols() {
        Ok(a.nrows())
    } else {
        Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        })
    }
}

/// Partial trace of an operator on `S ⊗ A` with `dims = (dim_sys, dim_app)`.
pub fn partial_trace(t: &Operator, keep: Subsystem, dims: (usize, usize)) -> Result<Operator> {
    let d = check_square(t)?;
    let (ds, da) = dims;
    if d != ds * da {
        return Err(Error::DimensionMismatch {
            context: "partial_trace",
            expected: ds * da,
            found: d,
        });
    }
    Ok(match keep {
        Subsystem::System => Operator::from_fn(ds, ds, |s, s2| {
            (0..da).map(|a| t[(s * da + a, s2 * da + a)]).sum()
        }),
        Subsystem::Apparatus => Operator::from_fn(da, da, |a, a2| {
            (0..ds).map(|s| t[(s * da + a, s * da + a2)]).sum()
        }),
    })
}

/// Every entry is finite.
pub fn is_finite(a: &Operator) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Operator norm (largest singular value); NaN for non-finite input.
pub fn op_norm(a: &Operator) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    if !is_finite(a) {
        return f64::NAN;
    }
    a.clone()
        .singular_values()
        .iter()
        .fold(0.0_f64, |m, &s| m.max(s))
}

/// Hilbert–Schmidt norm.
pub fn hs_norm(a: &Operator) -> f64 {
    a.norm()
}

/// Hilbert–Schmidt inner product `tr[a† b]`.
pub fn hs_inner(a: &Operator, b: &Operator) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Spectral decomposition of a Hermitian operator, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: Operator,
}

impl Eigh {
    pub fn vector(&self, k: usize) -> Vector {
        self.vectors.column(k).into_owned()
    }

    /// Reassemble `Σ f(λ_k) |v_k><v_k|`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Operator {
        let d = self.vectors.nrows();
        let mut out = zeros(d);
        for (k, &l) in self.values.iter().enumerate() {
            let v = self.vector(k);
            out += outer(&v, &v) * c(f(l), 0.0);
        }
        out
    }
}

/// Eigendecomposition of the Hermitian part of `a`.
pub fn eigh(a: &Operator) -> Eigh {
    let h = hermitian_part(a);
    let se = SymmetricEigen::new(h);
    let mut idx: Vec<usize> = (0..se.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let values = idx.iter().map(|&i| se.eigenvalues[i]).collect();
    let vectors = Operator::from_fn(a.nrows(), idx.len(), |r, k| se.eigenvectors[(r, idx[k])]);
    Eigh { values, vectors }
}

pub fn min_eigenvalue(a: &Operator) -> f64 {
    eigh(a).values.first().copied().unwrap_or(0.0)
}

pub fn max_eigenvalue(a: &Operator) -> f64 {
    eigh(a).values.last().copied().unwrap_or(0.0)
}

/// `a ≤ b` in the PSD order, decided as `λ_min(b − a) ≥ −eq_tol`.
pub fn psd_le(a: &Operator, b: &Operator, tol: &Tolerance) -> bool {
    min_eigenvalue(&(b - a)) >= -tol.eq_tol
}

pub(crate) fn require_hermitian(a: &Operator, tol: &Tolerance) -> Result<()> {
    check_square(a)?;
    let defect = hermiticity_defect(a);
    if defect > tol.eq_tol {
        return Err(Error::NotHermitian { defect });
    }
    Ok(())
}

/// Hermitian PSD square root. Eigenvalues at rounding level are treated as zero.
pub fn psd_sqrt(a: &Operator, tol: &Tolerance) -> Result<Operator> {
    require_hermitian(a, tol)?;
    let e = eigh(a);
    let min = e.values.first().copied().unwrap_or(0.0);
    if min < -tol.eq_tol {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let top = e.values.last().copied().unwrap_or(0.0).abs().max(1.0);
    let floor = 8.0 * a.nrows() as f64 * f64::EPSILON * top;
    Ok(e.map(|l| if l <= floor { 0.0 } else { l.sqrt() }))
}

pub(crate) fn require_state(rho: &Operator, tol: &Tolerance) -> Result<()> {
    require_hermitian(rho, tol).map_err(|e| Error::NotState {
        reason: e.to_string(),
    })?;
    let min = min_eigenvalue(rho);
    if min < -tol.eq_tol {
        return Err(Error::NotState {
            reason: format!("min eigenvalue {min:.3e}"),
        });
    }
    let tr = trace(rho).re;
    if (tr - 1.0).abs() > tol.eq_tol {
        return Err(Error::NotState {
            reason: format!("trace {tr}"),
        });
    }
    Ok(())
}

/// `tr √(√ρ σ √ρ)`, the root fidelity, evaluated as the trace norm of
/// `√ρ √σ`. Eigenvalues at rounding level are treated as zero.
pub fn root_fidelity(rho: &Operator, sigma: &Operator, tol: &Tolerance) -> Result<f64> {
    require_state(rho, tol)?;
    require_state(sigma, tol)?;
    if rho.nrows() != sigma.nrows() {
        return Err(Error::DimensionMismatch {
            context: "fidelity",
            expected: rho.nrows(),
            found: sigma.nrows(),
        });
    }
    let floor = 16.0 * f64::EPSILON * rho.nrows() as f64;
    let root = |l: f64| if l > floor { l.sqrt() } else { 0.0 };
    let sr = eigh(rho).map(root);
    let ss = eigh(sigma).map(root);
    let f: f64 = (&sr * &ss).singular_values().iter().sum();
    Ok(f.min(1.0))
}

/// Fidelity in the squared convention, `(tr √(√ρ σ √ρ))²`.
pub fn fidelity(rho: &Operator, sigma: &Operator, tol: &Tolerance) -> Result<f64> {
    root_fidelity(rho, sigma, tol).map(|f| f * f)
}

/// Eigenvalue clusters (consecutive gaps ≤ `gap`) of an ascending spectrum.
pub(crate) fn clusters(values: &[f64], gap: f64) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (k, &v) in values.iter().enumerate() {
        match out.last_mut() {
            Some(cl) if v - values[*cl.last().unwrap()] <= gap => cl.push(k),
            _ => out.push(vec![k]),
        }
    }
    out
}

/// Orthogonal projector onto the eigenspace of `a` for `value`; clusters
/// touching `value` within `rank_tol` are merged. Zero if there is none.
pub fn eigenspace_projector(a: &Operator, value: f64, tol: &Tolerance) -> Result<Operator> {
    require_hermitian(a, tol)?;
    let e = eigh(a);
    let d = a.nrows();
    let mut p = zeros(d);
    for cl in clusters(&e.values, tol.rank_tol) {
        if cl.iter().any(|&k| (e.values[k] - value).abs() <= tol.rank_tol) {
            for &k in &cl {
                let v = e.vector(k);
                p += outer(&v, &v);
            }
        }
    }
    Ok(p)
}

/// Isometry whose columns span the eigenvectors of the Hermitian `a` with
/// eigenvalue above `threshold`.
pub fn range_isometry(a: &Operator, threshold: f64) -> Operator {
    let e = eigh(a);
    let keep: Vec<usize> = (0..e.values.len())
        .filter(|&k| e.values[k] > threshold)
        .collect();
    Operator::from_fn(a.nrows(), keep.len(), |r, k| e.vectors[(r, keep[k])])
}

pub fn is_hermitian(a: &Operator, tol: &Tolerance) -> bool {
    a.nrows() == a.ncols() && hermiticity_defect(a) <= tol.eq_tol
}

pub fn is_psd(a: &Operator, tol: &Tolerance) -> bool {
    is_hermitian(a, tol) && min_eigenvalue(a) >= -tol.eq_tol
}

/// Hermitian with spectrum in `[0, 1]`.
pub fn is_effect(a: &Operator, tol: &Tolerance) -> bool {
    if !is_hermitian(a, tol) {
        return false;
    }
    let e = eigh(a);
    e.values
        .iter()
        .all(|&l| l >= -tol.eq_tol && l <= 1.0 + tol.eq_tol)
}

/// Hermitian with spectrum in `{0, 1}`.
pub fn is_projection(a: &Operator, tol: &Tolerance) -> bool {
    if !is_hermitian(a, tol) {
        return false;
    }
    eigh(a)
        .values
        .iter()
        .all(|&l| l.abs() <= tol.eq_tol || (l - 1.0).abs() <= tol.eq_tol)
}

pub fn is_state(a: &Operator, tol: &Tolerance) -> bool {
    require_state(a, tol).is_ok()
}

pub fn unitarity_defect(u: &Operator) -> f64 {
    if u.nrows() != u.ncols() {
        return f64::INFINITY;
    }
    op_norm(&(u.adjoint() * u - identity(u.nrows())))
}

pub fn is_unitary(u: &Operator, tol: &Tolerance) -> bool {
    unitarity_defect(u) <= tol.eq_tol
}

/// `exp(i h)` for Hermitian `h`.
pub fn expm_i_hermitian(h: &Operator) -> Operator {
    let e = eigh(h);
    let d = h.nrows();
    let mut out = zeros(d);
    for (k, &l) in e.values.iter().enumerate() {
        let v = e.vector(k);
        out += outer(&v, &v) * C64::from_polar(1.0, l);
    }
    out
}

/// Column-stacking vectorization.
pub fn vec_col(a: &Operator) -> Vector {
    Vector::from_column_slice(a.as_slice())
}

/// Inverse of [`vec_col`] for a `rows × cols` operator.
pub fn unvec(v: &Vector, rows: usize, cols: usize) -> Operator {
    Operator::from_column_slice(rows, cols, v.as_slice())
}

/// Projection onto the Hermitian, trace-one slice of an operator. Used to
/// clean up states produced by maps that are only numerically positive.
pub fn normalize_state(rho: &Operator) -> Operator {
    let h = hermitian_part(rho);
    let t = trace(&h).re;
    if t.abs() > 0.0 {
        h / c(t, 0.0)
    } else {
        h
    }
}

/// Orthonormal basis (in the Hilbert–Schmidt inner product) of the real span of
/// Hermitian operators, by modified Gram–Schmidt with two passes.
pub fn hermitian_orthonormal_basis(items: &[Operator], threshold: f64) -> Vec<Operator> {
    let mut basis: Vec<Operator> = Vec::new();
    for h in items {
        let mut r = h.clone();
        for _ in 0..2 {
            for b in &basis {
                let coef = hs_inner(b, &r).re;
                r -= b * c(coef, 0.0);
            }
        }
        let n = hs_norm(&r);
        if n > threshold {
            basis.push(r / c(n, 0.0));
        }
    }
    basis
}

/// Orthonormal basis of the complex span of operators, by modified
/// Gram–Schmidt with two passes.
pub fn orthonormal_basis(items: &[Operator], threshold: f64) -> Vec<Operator> {
    let mut basis: Vec<Operator> = Vec::new();
    for h in items {
        let mut r = h.clone();
        for _ in 0..2 {
            for b in &basis {
                let coef = hs_inner(b, &r);
                r -= b * coef;
            }
        }
        let n = hs_norm(&r);
        if n > threshold {
            basis.push(r / c(n, 0.0));
        }
    }
    basis
}

/// Hilbert–Schmidt distance from `a` to the span of an orthonormal basis.
pub fn span_residual(basis: &[Operator], a: &Operator) -> f64 {
    let mut r = a.clone();
    for b in basis {
        let coef = hs_inner(b, &r);
        r -= b * coef;
    }
    hs_norm(&r)
}

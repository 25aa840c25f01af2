//! Conservation laws, Yanase conditions and coherence measures.

use serde::{Deserialize, Serialize};

use crate::cpmaps::OperationMap;
use crate::error::{Error, Result};
use crate::measure::MeasurementScheme;
use crate::opcore::{
    commutator, eigh, identity, op_norm, require_hermitian, require_state, tensor, trace,
    Operator, Tolerance,
};

/// `N = N_S ⊗ 𝟙 + 𝟙 ⊗ N_A` on system ⊗ apparatus.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveQuantity {
    n_sys: Operator,
    n_app: Operator,
}

impl AdditiveQuantity {
    pub fn new(n_sys: Operator, n_app: Operator, tol: &Tolerance) -> Result<Self> {
        require_hermitian(&n_sys, tol)?;
        require_hermitian(&n_app, tol)?;
        Ok(Self { n_sys, n_app })
    }

    pub fn n_sys(&self) -> &Operator {
        &self.n_sys
    }

    pub fn n_app(&self) -> &Operator {
        &self.n_app
    }

    pub fn sys_dim(&self) -> usize {
        self.n_sys.nrows()
    }

    pub fn app_dim(&self) -> usize {
        self.n_app.nrows()
    }

    /// The composite operator `N`.
    pub fn composite(&self) -> Operator {
        tensor(&self.n_sys, &identity(self.app_dim())) + tensor(&identity(self.sys_dim()), &self.n_app)
    }

    pub(crate) fn check_scheme(&self, m: &MeasurementScheme) -> Result<()> {
        if self.sys_dim() != m.sys_dim() {
            return Err(Error::DimensionMismatch {
                context: "system part of conserved quantity",
                expected: m.sys_dim(),
                found: self.sys_dim(),
            });
        }
        if self.app_dim() != m.app_dim() {
            return Err(Error::DimensionMismatch {
                context: "apparatus part of conserved quantity",
                expected: m.app_dim(),
                found: self.app_dim(),
            });
        }
        Ok(())
    }
}

/// First- and second-moment conservation of an operator by a channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    /// `‖Φ*(N) − N‖`.
    pub average_defect: f64,
    /// `‖Φ*(N²) − N²‖`.
    pub second_moment_defect: f64,
    /// `max(‖Φ*(N) − N‖, ‖Φ*(N²) − N²‖)`, the defect of full conservation.
    pub full_defect: f64,
    pub average_holds: bool,
    /// Both moments are preserved, which forces all higher moments.
    pub full_holds: bool,
}

/// Decide average and full conservation of `n` by the channel `phi`.
pub fn check_conservation(phi: &OperationMap, n: &Operator, tol: &Tolerance) -> Result<ConservationReport> {
    let defect = phi.trace_defect();
    if defect > tol.eq_tol {
        return Err(Error::NotChannel { defect });
    }
    if phi.in_dim() != phi.out_dim() {
        return Err(Error::DimensionMismatch {
            context: "conservation channel",
            expected: phi.in_dim(),
            found: phi.out_dim(),
        });
    }
    require_hermitian(n, tol)?;
    let n2 = n * n;
    let average_defect = op_norm(&(phi.apply_dual(n)? - n));
    let second_moment_defect = op_norm(&(phi.apply_dual(&n2)? - &n2));
    let full_defect = average_defect.max(second_moment_defect);
    Ok(ConservationReport {
        average_defect,
        second_moment_defect,
        full_defect,
        average_holds: average_defect <= tol.eq_tol,
        full_holds: full_defect <= tol.eq_tol,
    })
}

/// For unitary channels, commutation, average and full conservation coincide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitaryConservationReport {
    /// `‖[U, N]‖`.
    pub commutator_defect: f64,
    pub average_defect: f64,
    pub full_defect: f64,
    /// The three defects are all at most `eq_tol` or all above it.
    pub consistent: bool,
}

pub fn check_unitary_equivalence(u: &Operator, n: &Operator, tol: &Tolerance) -> Result<UnitaryConservationReport> {
    let phi = OperationMap::unitary(u.clone(), tol)?;
    let rep = check_conservation(&phi, n, tol)?;
    let commutator_defect = op_norm(&commutator(u, n));
    let flags = [
        commutator_defect <= tol.eq_tol,
        rep.average_holds,
        rep.full_defect <= tol.eq_tol,
    ];
    Ok(UnitaryConservationReport {
        commutator_defect,
        average_defect: rep.average_defect,
        full_defect: rep.full_defect,
        consistent: flags.iter().all(|&f| f == flags[0]),
    })
}

/// `tr[N²ρ] − tr[Nρ]²`, clamped at zero.
pub fn variance(n: &Operator, state: &Operator, tol: &Tolerance) -> Result<f64> {
    require_hermitian(n, tol)?;
    require_state(state, tol)?;
    check_same(n, state)?;
    let m = trace(&(n * state)).re;
    let m2 = trace(&(n * n * state)).re;
    Ok((m2 - m * m).max(0.0))
}

/// Quantum Fisher information from the symmetric logarithmic derivative:
/// `2 Σ (λ_i − λ_j)²/(λ_i + λ_j) |<i|N|j>|²`, skipping pairs with
/// `λ_i + λ_j ≤ rank_tol`.
pub fn qfi(n: &Operator, state: &Operator, tol: &Tolerance) -> Result<f64> {
    require_hermitian(n, tol)?;
    require_state(state, tol)?;
    check_same(n, state)?;
    let e = eigh(state);
    let nb = e.vectors.adjoint() * n * &e.vectors;
    let d = e.values.len();
    let mut q = 0.0;
    for i in 0..d {
        for j in 0..d {
            let (li, lj) = (e.values[i].max(0.0), e.values[j].max(0.0));
            let s = li + lj;
            if s > tol.rank_tol {
                q += (li - lj).powi(2) / s * nb[(i, j)].norm_sqr();
            }
        }
    }
    Ok(2.0 * q)
}

fn check_same(n: &Operator, state: &Operator) -> Result<()> {
    if n.nrows() != state.nrows() {
        return Err(Error::DimensionMismatch {
            context: "quantity and state",
            expected: state.nrows(),
            found: n.nrows(),
        });
    }
    Ok(())
}

/// Pointer commutation with the conserved quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YanaseReport {
    /// `max_x ‖[Z(x), N_A]‖`.
    pub yanase_defect: f64,
    /// `max_x ‖[Z^τ(x), N]‖` with the Heisenberg-evolved pointer.
    pub weak_yanase_defect: f64,
    pub yanase_holds: bool,
    pub weak_yanase_holds: bool,
    /// For a unitary coupling that conserves `N` on average, whether the two
    /// conditions agree.
    pub unitary_agreement: Option<bool>,
}

pub fn yanase_conditions(m: &MeasurementScheme, q: &AdditiveQuantity, tol: &Tolerance) -> Result<YanaseReport> {
    q.check_scheme(m)?;
    let n = q.composite();
    let yanase_defect = m
        .pointer()
        .effects()
        .iter()
        .map(|z| op_norm(&commutator(z, q.n_app())))
        .fold(0.0, f64::max);
    let weak_yanase_defect = m
        .heisenberg_pointer()
        .effects()
        .iter()
        .map(|z| op_norm(&commutator(z, &n)))
        .fold(0.0, f64::max);
    let yanase_holds = yanase_defect <= tol.eq_tol;
    let weak_yanase_holds = weak_yanase_defect <= tol.eq_tol;
    let unitary_agreement = if m.coupling().is_unitary(tol)
        && check_conservation(m.coupling(), &n, tol)?.average_holds
    {
        Some(yanase_holds == weak_yanase_holds)
    } else {
        None
    };
    Ok(YanaseReport {
        yanase_defect,
        weak_yanase_defect,
        yanase_holds,
        weak_yanase_holds,
        unitary_agreement,
    })
}

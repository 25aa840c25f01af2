//! Evaluated inequalities and their summaries.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::opcore::{Operator, Tolerance};

/// Identifies which inequality a report evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundId {
    /// `‖[Φ*a, Φ*b] − Φ*[a,b]‖` against the sesquilinear defects.
    CommutatorDefect,
    /// Commutator of compatible effects against their unsharpness.
    CompatibilityUnsharpness,
    /// `‖[E(x),F(y)]‖` against disturbance and the channel's defect on `F(y)`.
    DisturbanceCommutator,
    /// The zero-disturbance specialization of the previous bound.
    NondisturbanceCommutator,
    /// `‖[E(x),F(y)]‖` against disturbance and the unsharpness of `F(y)`.
    DisturbanceUnsharpness,
    /// Conserved-quantity commutator defect under average conservation.
    ConservedDisturbance,
    /// Zero-disturbance specialization of [`BoundId::ConservedDisturbance`].
    ConservedNondisturbance,
    /// Conserved-quantity defect with the unsharpness of `F(y)`.
    ConservedDisturbanceUnsharpness,
    /// Conserved-quantity defect with the apparatus variance (full conservation).
    ConservedDisturbanceVariance,
    /// Conserved-quantity defect with the apparatus Fisher information.
    ConservedDisturbanceFisher,
    /// Fisher-information form for an asserted extremal instrument.
    ConservedDisturbanceFisherExtremal,
    /// Measurement-error bound under average conservation.
    MeasurementError,
    /// Measurement-error bound with the apparatus variance (full conservation).
    MeasurementErrorVariance,
    /// Measurement-error bound with the apparatus Fisher information.
    MeasurementErrorFisher,
    /// Fisher-information measurement bound for an asserted extremal observable.
    MeasurementErrorFisherExtremal,
    /// `‖[E(x),N_S]‖` for repeatable instruments or Yanase pointers.
    WayRepeatableOrYanase,
    /// `‖[E(x),N_S]‖` under the weak Yanase condition, variance form.
    WayWeakYanaseVariance,
    /// Weak Yanase, Fisher-information form.
    WayWeakYanaseFisher,
    /// Weak Yanase, Fisher-information form for an asserted extremal observable.
    WayWeakYanaseFisherExtremal,
    /// `|<ψ|N_S φ>|` for orthogonal inputs against output fidelities.
    DistinguishabilityOrthogonal,
    /// `|<ψ|N_S φ>|` over the extremal eigenspaces of a first-kind effect.
    DistinguishabilityFirstKind,
    /// `‖[E(x), P(X) N_S P(X)]‖` for repeatable instruments.
    RepeatableCommutation,
    /// `‖[E(x), I*_X(A)]‖` against the unsharpness of `E(x)`.
    FixedPointCommutation,
}

impl BoundId {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundId::CommutatorDefect => "commutator_defect",
            BoundId::CompatibilityUnsharpness => "compatibility_unsharpness",
            BoundId::DisturbanceCommutator => "disturbance_commutator",
            BoundId::NondisturbanceCommutator => "nondisturbance_commutator",
            BoundId::DisturbanceUnsharpness => "disturbance_unsharpness",
            BoundId::ConservedDisturbance => "conserved_disturbance",
            BoundId::ConservedNondisturbance => "conserved_nondisturbance",
            BoundId::ConservedDisturbanceUnsharpness => "conserved_disturbance_unsharpness",
            BoundId::ConservedDisturbanceVariance => "conserved_disturbance_variance",
            BoundId::ConservedDisturbanceFisher => "conserved_disturbance_fisher",
            BoundId::ConservedDisturbanceFisherExtremal => "conserved_disturbance_fisher_extremal",
            BoundId::MeasurementError => "measurement_error",
            BoundId::MeasurementErrorVariance => "measurement_error_variance",
            BoundId::MeasurementErrorFisher => "measurement_error_fisher",
            BoundId::MeasurementErrorFisherExtremal => "measurement_error_fisher_extremal",
            BoundId::WayRepeatableOrYanase => "way_repeatable_or_yanase",
            BoundId::WayWeakYanaseVariance => "way_weak_yanase_variance",
            BoundId::WayWeakYanaseFisher => "way_weak_yanase_fisher",
            BoundId::WayWeakYanaseFisherExtremal => "way_weak_yanase_fisher_extremal",
            BoundId::DistinguishabilityOrthogonal => "distinguishability_orthogonal",
            BoundId::DistinguishabilityFirstKind => "distinguishability_first_kind",
            BoundId::RepeatableCommutation => "repeatable_commutation",
            BoundId::FixedPointCommutation => "fixed_point_commutation",
        }
    }
}

/// A premise of an inequality, with the residual that decided it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub name: String,
    pub holds: bool,
    pub residual: f64,
}

impl Hypothesis {
    /// Premise decided by `residual ≤ threshold`.
    pub fn residual(name: &str, residual: f64, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            holds: residual <= threshold,
            residual,
        }
    }

    /// Premise asserted by the caller rather than computed.
    pub fn asserted(name: &str, holds: bool) -> Self {
        Self {
            name: name.to_string(),
            holds,
            residual: 0.0,
        }
    }
}

/// One evaluated inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound: BoundId,
    pub outcome: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub satisfied: bool,
    pub hypotheses: Vec<Hypothesis>,
    pub hypotheses_hold: bool,
    pub inputs_digest: String,
}

impl BoundReport {
    pub fn new(
        bound: BoundId,
        outcome: impl Into<String>,
        lhs: f64,
        rhs: f64,
        hypotheses: Vec<Hypothesis>,
        digest: &str,
        tol: &Tolerance,
    ) -> Self {
        let slack = rhs - lhs;
        let hypotheses_hold = hypotheses.iter().all(|h| h.holds);
        Self {
            bound,
            outcome: outcome.into(),
            lhs,
            rhs,
            slack,
            satisfied: slack >= -tol.eq_tol,
            hypotheses,
            hypotheses_hold,
            inputs_digest: digest.to_string(),
        }
    }

    /// Satisfied, or not applicable because a premise failed.
    pub fn acceptable(&self) -> bool {
        self.satisfied || !self.hypotheses_hold
    }
}

/// Counts over a batch of reports.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub satisfied: usize,
    pub violated: usize,
    pub hypothesis_violated: usize,
}

impl Summary {
    pub fn of(reports: &[BoundReport]) -> Self {
        let mut s = Summary {
            total: reports.len(),
            ..Default::default()
        };
        for r in reports {
            if !r.hypotheses_hold {
                s.hypothesis_violated += 1;
            } else if r.satisfied {
                s.satisfied += 1;
            } else {
                s.violated += 1;
            }
        }
        s
    }
}

/// Deterministic digest of a list of operators (first 16 hex digits of SHA-256
/// over dimensions and IEEE bit patterns).
pub fn digest_operators(ops: &[&Operator]) -> String {
    let mut h = Sha256::new();
    for op in ops {
        h.update((op.nrows() as u64).to_le_bytes());
        h.update((op.ncols() as u64).to_le_bytes());
        for z in op.iter() {
            h.update(z.re.to_bits().to_le_bytes());
            h.update(z.im.to_bits().to_le_bytes());
        }
    }
    let out = h.finalize();
    hex::encode(&out[..8])
}

/// Sort reports by `(digest, bound, outcome)`.
pub fn sort_reports(reports: &mut [BoundReport]) {
    reports.sort_by(|a, b| {
        (a.inputs_digest.as_str(), a.bound, a.outcome.as_str()).cmp(&(
            b.inputs_digest.as_str(),
            b.bound,
            b.outcome.as_str(),
        ))
    });
}

//! JSON descriptors for operators, observables, channels, instruments,
//! measurement schemes and conserved quantities.
//!
//! A matrix is an array of rows. Each entry is either a real number or a
//! `[re, im]` pair.

use serde::{Deserialize, Serialize};
use waylab_core::conserve::AdditiveQuantity;
use waylab_core::opcore::c;
use waylab_core::{Instrument, MeasurementScheme, Observable, OperationMap, Operator, Tolerance, Vector, C64};

/// One matrix or vector entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    pub fn value(self) -> C64 {
        match self {
            Entry::Real(re) => c(re, 0.0),
            Entry::Complex([re, im]) => c(re, im),
        }
    }

    pub fn from_value(z: C64) -> Self {
        if z.im == 0.0 {
            Entry::Real(z.re)
        } else {
            Entry::Complex([z.re, z.im])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixDesc(pub Vec<Vec<Entry>>);

impl MatrixDesc {
    pub fn from_operator(a: &Operator) -> Self {
        MatrixDesc(
            (0..a.nrows())
                .map(|i| (0..a.ncols()).map(|j| Entry::from_value(a[(i, j)])).collect())
                .collect(),
        )
    }

    /// Square operator; ragged or empty input is rejected.
    pub fn to_operator(&self) -> Result<Operator, String> {
        let rows = self.0.len();
        if rows == 0 {
            return Err("empty matrix".into());
        }
        for (i, row) in self.0.iter().enumerate() {
            if row.len() != rows {
                return Err(format!("row {i} has {} entries, expected {rows}", row.len()));
            }
        }
        Ok(Operator::from_fn(rows, rows, |i, j| self.0[i][j].value()))
    }

    /// Rectangular operator, as needed for Kraus operators between spaces.
    pub fn to_rect(&self) -> Result<Operator, String> {
        let rows = self.0.len();
        let cols = self.0.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err("empty matrix".into());
        }
        for (i, row) in self.0.iter().enumerate() {
            if row.len() != cols {
                return Err(format!("row {i} has {} entries, expected {cols}", row.len()));
            }
        }
        Ok(Operator::from_fn(rows, cols, |i, j| self.0[i][j].value()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VectorDesc(pub Vec<Entry>);

impl VectorDesc {
    pub fn from_vector(v: &Vector) -> Self {
        VectorDesc(v.iter().map(|z| Entry::from_value(*z)).collect())
    }

    pub fn to_vector(&self) -> Result<Vector, String> {
        if self.0.is_empty() {
            return Err("empty vector".into());
        }
        Ok(Vector::from_iterator(self.0.len(), self.0.iter().map(|e| e.value())))
    }
}

/// `{"outcomes": [...], "effects": [...]}`; outcomes default to `"0", "1", …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableDesc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<Vec<String>>,
    pub effects: Vec<MatrixDesc>,
}

impl ObservableDesc {
    pub fn from_observable(e: &Observable) -> Self {
        ObservableDesc {
            outcomes: Some(e.outcomes().to_vec()),
            effects: e.effects().iter().map(MatrixDesc::from_operator).collect(),
        }
    }

    pub fn build(&self, tol: &Tolerance) -> Result<Observable, String> {
        let effects = self
            .effects
            .iter()
            .enumerate()
            .map(|(k, m)| m.to_operator().map_err(|e| format!("effect {k}: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        let outcomes = match &self.outcomes {
            Some(o) => o.clone(),
            None => (0..effects.len()).map(|k| k.to_string()).collect(),
        };
        Observable::new(outcomes, effects, tol).map_err(|e| e.to_string())
    }
}

/// `{"kraus": [...]}` or `{"unitary": matrix}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDesc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kraus: Option<Vec<MatrixDesc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unitary: Option<MatrixDesc>,
}

impl ChannelDesc {
    pub fn from_map(phi: &OperationMap, tol: &Tolerance) -> Self {
        if phi.kraus().len() == 1 && phi.is_unitary(tol) {
            ChannelDesc {
                kraus: None,
                unitary: Some(MatrixDesc::from_operator(&phi.kraus()[0])),
            }
        } else {
            ChannelDesc {
                kraus: Some(phi.kraus().iter().map(MatrixDesc::from_operator).collect()),
                unitary: None,
            }
        }
    }

    /// A completely positive trace non-increasing map.
    pub fn build_operation(&self, tol: &Tolerance) -> Result<OperationMap, String> {
        match (&self.kraus, &self.unitary) {
            (Some(k), None) => {
                let ops = k
                    .iter()
                    .enumerate()
                    .map(|(i, m)| m.to_rect().map_err(|e| format!("kraus {i}: {e}")))
                    .collect::<Result<Vec<_>, _>>()?;
                OperationMap::new(ops, tol).map_err(|e| e.to_string())
            }
            (None, Some(u)) => {
                let u = u.to_operator()?;
                OperationMap::unitary(u, tol).map_err(|e| e.to_string())
            }
            _ => Err("channel needs exactly one of `kraus` or `unitary`".into()),
        }
    }

    /// A trace-preserving map.
    pub fn build_channel(&self, tol: &Tolerance) -> Result<OperationMap, String> {
        let phi = self.build_operation(tol)?;
        if !phi.is_channel(tol) {
            return Err(format!("not trace preserving (defect {:.3e})", phi.trace_defect()));
        }
        Ok(phi)
    }
}

/// Either the name of another object or an inline descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Ref<T> {
    Name(String),
    Inline(T),
}

/// `{"outcomes": [...], "operations": [channel, ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentDesc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<Vec<String>>,
    pub operations: Vec<ChannelDesc>,
}

impl InstrumentDesc {
    pub fn from_instrument(inst: &Instrument, tol: &Tolerance) -> Self {
        InstrumentDesc {
            outcomes: Some(inst.outcomes().to_vec()),
            operations: inst.operations().iter().map(|op| ChannelDesc::from_map(op, tol)).collect(),
        }
    }

    pub fn build(&self, tol: &Tolerance) -> Result<Instrument, String> {
        let ops = self
            .operations
            .iter()
            .enumerate()
            .map(|(k, d)| d.build_operation(tol).map_err(|e| format!("operation {k}: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        let outcomes = match &self.outcomes {
            Some(o) => o.clone(),
            None => (0..ops.len()).map(|k| k.to_string()).collect(),
        };
        Instrument::new(outcomes, ops, tol).map_err(|e| e.to_string())
    }
}

/// `{"apparatus_dim": n, "xi": matrix, "coupling": channel, "pointer": observable}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeDesc {
    pub apparatus_dim: usize,
    pub xi: Ref<MatrixDesc>,
    pub coupling: Ref<ChannelDesc>,
    pub pointer: Ref<ObservableDesc>,
}

impl SchemeDesc {
    pub fn from_scheme(m: &MeasurementScheme, tol: &Tolerance) -> Self {
        SchemeDesc {
            apparatus_dim: m.app_dim(),
            xi: Ref::Inline(MatrixDesc::from_operator(m.xi())),
            coupling: Ref::Inline(ChannelDesc::from_map(m.coupling(), tol)),
            pointer: Ref::Inline(ObservableDesc::from_observable(m.pointer())),
        }
    }
}

/// `{"n_sys": matrix, "n_app": matrix}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantityDesc {
    pub n_sys: Ref<MatrixDesc>,
    pub n_app: Ref<MatrixDesc>,
}

impl QuantityDesc {
    pub fn from_quantity(q: &AdditiveQuantity) -> Self {
        QuantityDesc {
            n_sys: Ref::Inline(MatrixDesc::from_operator(q.n_sys())),
            n_app: Ref::Inline(MatrixDesc::from_operator(q.n_app())),
        }
    }
}

/// Seeded random object. `generator` is one of `haar_unitary`, `state`,
/// `pure_state`, `povm`, `sharp_observable`, `channel`, `unital_channel` or
/// `conservative_unitary`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomDesc {
    pub generator: String,
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kraus: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ancilla: Option<usize>,
    /// Name of the operator or quantity a conservative unitary commutes with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conserves: Option<String>,
}

//! Scenario files: named objects, an ordered task list and the report they
//! produce.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use waylab_core::bounds;
use waylab_core::conserve::{self, AdditiveQuantity};
use waylab_core::fixpt;
use waylab_core::measure::{normal_dilation, repeatability_report};
use waylab_core::opcore::is_state;
use waylab_core::random;
use waylab_core::{BoundReport, Instrument, MeasurementScheme, Observable, OperationMap, Operator, Summary, Tolerance, Vector};

use crate::descriptor::{
    ChannelDesc, InstrumentDesc, MatrixDesc, ObservableDesc, QuantityDesc, RandomDesc, Ref, SchemeDesc, VectorDesc,
};
use crate::error::{CliError, CliResult};
use crate::SCHEMA_VERSION;

/// Per-scenario tolerance overrides.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eq_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub name: String,
    pub system_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub apparatus_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<ToleranceSpec>,
    #[serde(default)]
    pub objects: Vec<NamedObject>,
    #[serde(default)]
    pub tasks: Vec<Task>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedObject {
    pub name: String,
    #[serde(flatten)]
    pub object: ObjectDesc,
}

impl NamedObject {
    pub fn new(name: &str, object: ObjectDesc) -> Self {
        Self {
            name: name.to_string(),
            object,
        }
    }
}

/// The object kinds a scenario can declare. `luders`, `normal_dilation` and
/// `channel_of` derive an object from an earlier one by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectDesc {
    Operator(MatrixDesc),
    Vector(VectorDesc),
    Observable(ObservableDesc),
    Channel(ChannelDesc),
    Instrument(InstrumentDesc),
    Scheme(SchemeDesc),
    Quantity(QuantityDesc),
    Random(RandomDesc),
    Luders(String),
    NormalDilation(String),
    ChannelOf(String),
}

/// One step of a scenario. Every field names an object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    /// Channel and operator, or scheme coupling and the composite quantity.
    Conservation {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        channel: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        operator: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scheme: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        quantity: Option<String>,
    },
    UnitaryEquivalence {
        unitary: String,
        operator: String,
    },
    Fluctuations {
        operator: String,
        state: String,
    },
    Yanase {
        scheme: String,
        quantity: String,
    },
    DisturbanceBounds {
        scheme: String,
        observable: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        quantity: Option<String>,
        #[serde(default, skip_serializing_if = "is_false")]
        assert_extremal: bool,
    },
    MeasurabilityBounds {
        scheme: String,
        target: String,
        quantity: String,
        #[serde(default, skip_serializing_if = "is_false")]
        assert_extremal: bool,
    },
    Way {
        scheme: String,
        quantity: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<String>,
        #[serde(default, skip_serializing_if = "is_false")]
        assert_extremal: bool,
    },
    Distinguishability {
        scheme: String,
        quantity: String,
        psi: String,
        phi: String,
    },
    FirstKindDistinguishability {
        scheme: String,
        quantity: String,
    },
    RepeatableCommutation {
        scheme: String,
        quantity: String,
    },
    FixedPointCommutation {
        instrument: String,
        operator: String,
    },
    NondisturbanceCommutation {
        scheme: String,
        observable: String,
        quantity: String,
    },
    Repeatability {
        instrument: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scheme: Option<String>,
    },
    FixedPoints {
        channel: String,
    },
    Structural {
        scheme: String,
        observable: String,
        quantity: String,
    },
    NormOne {
        channel: String,
        observable: String,
    },
    PostProcessing {
        instrument: String,
    },
    MixFaithfulness {
        channel: String,
        observable: String,
        mix: Vec<Vec<f64>>,
    },
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl Task {
    /// The `op` tag of this task.
    pub fn op(&self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.get("op").and_then(Value::as_str).map(str::to_string))
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Violation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskRecord {
    pub index: usize,
    pub op: String,
    pub result: Value,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct CertificationSummary {
    pub total: usize,
    pub failed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub schema: u32,
    pub scenario: String,
    pub tolerance: Tolerance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub tasks: Vec<TaskRecord>,
    pub bounds: Vec<BoundReport>,
    pub summary: Summary,
    pub certifications: CertificationSummary,
    pub status: Status,
    /// Index of the task that produced each entry of `bounds`.
    #[serde(skip)]
    pub bound_tasks: Vec<usize>,
}

impl ScenarioReport {
    /// 0 when nothing is violated, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Pass => 0,
            Status::Violation => 1,
        }
    }
}

/// Tolerance from, in decreasing precedence, the command-line value, the
/// scenario's overrides, the environment value and the default.
pub fn resolve_tolerance(
    flag: Option<f64>,
    scenario: Option<&ToleranceSpec>,
    env: Option<&str>,
) -> CliResult<Tolerance> {
    let mut tol = Tolerance::default();
    if let Some(text) = env {
        let v: f64 = text
            .trim()
            .parse()
            .map_err(|_| CliError::Tolerance(format!("{} = {text:?} is not a number", crate::TOL_ENV)))?;
        tol = tol.with_eq_tol(v).map_err(|e| CliError::Tolerance(e.to_string()))?;
    }
    if let Some(spec) = scenario {
        let eq = spec.eq_tol.unwrap_or(tol.eq_tol);
        let rank = spec.rank_tol.unwrap_or(tol.rank_tol);
        tol = Tolerance::new(eq, rank).map_err(|e| CliError::Tolerance(e.to_string()))?;
    }
    if let Some(v) = flag {
        tol = tol.with_eq_tol(v).map_err(|e| CliError::Tolerance(e.to_string()))?;
    }
    Ok(tol)
}

/// Parse a scenario file; syntax errors carry line and column.
pub fn load_scenario(path: &Path) -> CliResult<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
    parse_scenario(&text, &path.display().to_string())
}

pub fn parse_scenario(text: &str, origin: &str) -> CliResult<Scenario> {
    let s: Scenario = serde_json::from_str(text).map_err(|e| CliError::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    if s.schema != SCHEMA_VERSION {
        return Err(CliError::Schema {
            found: s.schema,
            expected: SCHEMA_VERSION,
        });
    }
    Ok(s)
}

/// Load, evaluate and report one scenario file.
pub fn run_scenario(path: &Path, tol_flag: Option<f64>, env_tol: Option<&str>) -> CliResult<ScenarioReport> {
    let s = load_scenario(path)?;
    let tol = resolve_tolerance(tol_flag, s.tolerance.as_ref(), env_tol)?;
    evaluate(&s, &tol)
}

#[derive(Debug, Clone)]
enum Obj {
    Operator(Operator),
    Vector(Vector),
    Observable(Observable),
    Channel(OperationMap),
    Instrument(Instrument),
    Scheme(MeasurementScheme),
    Quantity(AdditiveQuantity),
}

impl Obj {
    fn kind(&self) -> &'static str {
        match self {
            Obj::Operator(_) => "operator",
            Obj::Vector(_) => "vector",
            Obj::Observable(_) => "observable",
            Obj::Channel(_) => "channel",
            Obj::Instrument(_) => "instrument",
            Obj::Scheme(_) => "scheme",
            Obj::Quantity(_) => "quantity",
        }
    }
}

struct Env {
    objects: BTreeMap<String, Obj>,
    tol: Tolerance,
}

macro_rules! getter {
    ($fn:ident, $variant:ident, $ty:ty, $kind:literal) => {
        fn $fn(&self, name: &str) -> CliResult<&$ty> {
            match self.objects.get(name) {
                Some(Obj::$variant(v)) => Ok(v),
                Some(other) => Err(CliError::WrongKind {
                    name: name.to_string(),
                    expected: $kind,
                    found: other.kind(),
                }),
                None => Err(CliError::UnknownObject(name.to_string())),
            }
        }
    };
}

impl Env {
    getter!(operator, Operator, Operator, "operator");
    getter!(vector, Vector, Vector, "vector");
    getter!(observable, Observable, Observable, "observable");
    getter!(channel, Channel, OperationMap, "channel");
    getter!(instrument, Instrument, Instrument, "instrument");
    getter!(scheme, Scheme, MeasurementScheme, "scheme");
    getter!(quantity, Quantity, AdditiveQuantity, "quantity");

    fn matrix_ref(&self, r: &Ref<MatrixDesc>) -> CliResult<Operator> {
        match r {
            Ref::Name(n) => self.operator(n).cloned(),
            Ref::Inline(m) => m.to_operator().map_err(|e| CliError::Object {
                name: "<inline>".into(),
                message: e,
            }),
        }
    }
}

fn build_object(env: &Env, name: &str, desc: &ObjectDesc, rng: &mut Option<ChaCha8Rng>) -> CliResult<Obj> {
    let tol = &env.tol;
    let bad = |e: String| CliError::object(name, e);
    Ok(match desc {
        ObjectDesc::Operator(m) => Obj::Operator(m.to_operator().map_err(bad)?),
        ObjectDesc::Vector(v) => Obj::Vector(v.to_vector().map_err(bad)?),
        ObjectDesc::Observable(o) => Obj::Observable(o.build(tol).map_err(bad)?),
        ObjectDesc::Channel(c) => Obj::Channel(c.build_channel(tol).map_err(bad)?),
        ObjectDesc::Instrument(i) => Obj::Instrument(i.build(tol).map_err(bad)?),
        ObjectDesc::Quantity(q) => {
            let n_sys = env.matrix_ref(&q.n_sys).map_err(|e| bad(e.to_string()))?;
            let n_app = env.matrix_ref(&q.n_app).map_err(|e| bad(e.to_string()))?;
            Obj::Quantity(AdditiveQuantity::new(n_sys, n_app, tol).map_err(|e| bad(e.to_string()))?)
        }
        ObjectDesc::Scheme(s) => {
            let xi = env.matrix_ref(&s.xi).map_err(|e| bad(e.to_string()))?;
            let coupling = match &s.coupling {
                Ref::Name(n) => env.channel(n)?.clone(),
                Ref::Inline(c) => c.build_channel(tol).map_err(|e| bad(format!("coupling: {e}")))?,
            };
            let pointer = match &s.pointer {
                Ref::Name(n) => env.observable(n)?.clone(),
                Ref::Inline(o) => o.build(tol).map_err(|e| bad(format!("pointer: {e}")))?,
            };
            let ds = coupling.in_dim() / s.apparatus_dim.max(1);
            Obj::Scheme(
                MeasurementScheme::new(ds, s.apparatus_dim, xi, coupling, pointer, tol)
                    .map_err(|e| bad(e.to_string()))?,
            )
        }
        ObjectDesc::Luders(src) => {
            Obj::Instrument(Instrument::luders(env.observable(src)?, tol).map_err(|e| bad(e.to_string()))?)
        }
        ObjectDesc::NormalDilation(src) => {
            Obj::Scheme(normal_dilation(env.observable(src)?, tol).map_err(|e| bad(e.to_string()))?)
        }
        ObjectDesc::ChannelOf(src) => match env.objects.get(src.as_str()) {
            Some(Obj::Instrument(i)) => Obj::Channel(i.channel()),
            Some(Obj::Scheme(m)) => Obj::Channel(m.instrument(tol).map_err(|e| bad(e.to_string()))?.channel()),
            Some(other) => {
                return Err(CliError::WrongKind {
                    name: src.clone(),
                    expected: "instrument",
                    found: other.kind(),
                })
            }
            None => return Err(CliError::UnknownObject(src.clone())),
        },
        ObjectDesc::Random(r) => {
            let rng = rng
                .as_mut()
                .ok_or_else(|| bad("random objects need a scenario `seed`".into()))?;
            build_random(env, name, r, rng)?
        }
    })
}

fn build_random(env: &Env, name: &str, r: &RandomDesc, rng: &mut ChaCha8Rng) -> CliResult<Obj> {
    let tol = &env.tol;
    let bad = |e: String| CliError::object(name, e);
    let dim = || r.dim.filter(|&d| d > 0).ok_or_else(|| bad("`dim` must be a positive integer".into()));
    let core = |e: waylab_core::Error| bad(e.to_string());
    Ok(match r.generator.as_str() {
        "haar_unitary" => Obj::Operator(random::haar_unitary(dim()?, rng)),
        "state" => {
            let d = dim()?;
            Obj::Operator(random::random_state_with_ancilla(d, r.ancilla.unwrap_or(d), rng))
        }
        "pure_state" => Obj::Vector(random::random_pure_state(dim()?, rng)),
        "povm" => Obj::Observable(random::random_povm(dim()?, r.outcomes.unwrap_or(2), rng, tol).map_err(core)?),
        "sharp_observable" => {
            let d = dim()?;
            Obj::Observable(random::random_sharp_observable(d, r.outcomes.unwrap_or(d), rng, tol).map_err(core)?)
        }
        "channel" => {
            let d = dim()?;
            Obj::Channel(random::random_channel(d, d, r.kraus.unwrap_or(2), rng, tol).map_err(core)?)
        }
        "unital_channel" => Obj::Channel(random::random_unital_channel(dim()?, r.kraus.unwrap_or(2), rng, tol).map_err(core)?),
        "conservative_unitary" => {
            let src = r
                .conserves
                .as_deref()
                .ok_or_else(|| bad("`conserves` must name an operator or quantity".into()))?;
            let n = match env.objects.get(src) {
                Some(Obj::Operator(n)) => n.clone(),
                Some(Obj::Quantity(q)) => q.composite(),
                Some(other) => {
                    return Err(CliError::WrongKind {
                        name: src.to_string(),
                        expected: "operator",
                        found: other.kind(),
                    })
                }
                None => return Err(CliError::UnknownObject(src.to_string())),
            };
            let u = random::conservative_unitary(&n, rng, tol).map_err(core)?;
            Obj::Channel(OperationMap::unitary(u, tol).map_err(core)?)
        }
        other => return Err(bad(format!("unsupported random generator `{other}`"))),
    })
}

fn check_dims(s: &Scenario, name: &str, obj: &Obj) -> CliResult<()> {
    let mismatch = |what: &str, expected: usize, found: usize| {
        Err(CliError::object(
            name,
            format!("{what} dimension {found} does not match the scenario's {expected}"),
        ))
    };
    match obj {
        Obj::Scheme(m) => {
            if m.sys_dim() != s.system_dim {
                return mismatch("system", s.system_dim, m.sys_dim());
            }
            if let Some(da) = s.apparatus_dim {
                if m.app_dim() != da {
                    return mismatch("apparatus", da, m.app_dim());
                }
            }
        }
        Obj::Quantity(q) => {
            if q.sys_dim() != s.system_dim {
                return mismatch("system", s.system_dim, q.sys_dim());
            }
            if let Some(da) = s.apparatus_dim {
                if q.app_dim() != da {
                    return mismatch("apparatus", da, q.app_dim());
                }
            }
        }
        Obj::Instrument(i) if i.dim() != s.system_dim => return mismatch("system", s.system_dim, i.dim()),
        _ => {}
    }
    Ok(())
}

#[derive(Default)]
struct TaskOutput {
    result: Value,
    bounds: Vec<BoundReport>,
    certs: Vec<(String, bool)>,
}

impl TaskOutput {
    fn bounds(bounds: Vec<BoundReport>) -> Self {
        let s = Summary::of(&bounds);
        TaskOutput {
            result: json!({
                "reports": s.total,
                "satisfied": s.satisfied,
                "violated": s.violated,
                "hypothesis_violated": s.hypothesis_violated,
            }),
            bounds,
            certs: Vec::new(),
        }
    }

    fn cert(mut self, name: &str, passed: bool) -> Self {
        self.certs.push((name.to_string(), passed));
        self
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize infallibly")
}

fn matrix(a: &Operator) -> Value {
    to_value(&MatrixDesc::from_operator(a))
}

fn run_task(env: &Env, task: &Task) -> CliResult<TaskOutput> {
    let tol = &env.tol;
    Ok(match task {
        Task::Conservation {
            channel,
            operator,
            scheme,
            quantity,
        } => {
            let (phi, n) = match (channel, operator, scheme, quantity) {
                (Some(c), Some(o), None, None) => (env.channel(c)?.clone(), env.operator(o)?.clone()),
                (None, None, Some(s), Some(q)) => (env.scheme(s)?.coupling().clone(), env.quantity(q)?.composite()),
                _ => {
                    return Err(CliError::Object {
                        name: "<task>".into(),
                        message: "conservation takes `channel` and `operator`, or `scheme` and `quantity`".into(),
                    })
                }
            };
            let r = conserve::check_conservation(&phi, &n, tol)?;
            TaskOutput {
                result: to_value(&r),
                ..Default::default()
            }
            .cert("full_implies_average", !r.full_holds || r.average_holds)
        }
        Task::UnitaryEquivalence { unitary, operator } => {
            let r = conserve::check_unitary_equivalence(env.operator(unitary)?, env.operator(operator)?, tol)?;
            TaskOutput {
                result: to_value(&r),
                ..Default::default()
            }
            .cert("defects_agree", r.consistent)
        }
        Task::Fluctuations { operator, state } => {
            let n = env.operator(operator)?;
            let rho = env.operator(state)?;
            if !is_state(rho, tol) {
                return Err(CliError::object(state, "not a density operator"));
            }
            let var = conserve::variance(n, rho, tol)?;
            let q = conserve::qfi(n, rho, tol)?;
            TaskOutput {
                result: json!({ "variance": var, "qfi": q }),
                ..Default::default()
            }
            .cert("qfi_at_most_four_variance", q <= 4.0 * var + tol.eq_tol)
        }
        Task::Yanase { scheme, quantity } => {
            let r = conserve::yanase_conditions(env.scheme(scheme)?, env.quantity(quantity)?, tol)?;
            TaskOutput {
                result: to_value(&r),
                ..Default::default()
            }
            .cert("unitary_agreement", r.unitary_agreement != Some(false))
        }
        Task::DisturbanceBounds {
            scheme,
            observable,
            quantity,
            assert_extremal,
        } => {
            let q = quantity.as_deref().map(|n| env.quantity(n)).transpose()?;
            TaskOutput::bounds(bounds::eval_disturbance_bounds(
                env.scheme(scheme)?,
                env.observable(observable)?,
                q,
                *assert_extremal,
                tol,
            )?)
        }
        Task::MeasurabilityBounds {
            scheme,
            target,
            quantity,
            assert_extremal,
        } => TaskOutput::bounds(bounds::eval_measurability_bounds(
            env.scheme(scheme)?,
            env.observable(target)?,
            env.quantity(quantity)?,
            *assert_extremal,
            tol,
        )?),
        Task::Way {
            scheme,
            quantity,
            target,
            assert_extremal,
        } => {
            let t = target.as_deref().map(|n| env.observable(n)).transpose()?;
            TaskOutput::bounds(bounds::eval_way(
                env.scheme(scheme)?,
                env.quantity(quantity)?,
                t,
                *assert_extremal,
                tol,
            )?)
        }
        Task::Distinguishability {
            scheme,
            quantity,
            psi,
            phi,
        } => TaskOutput::bounds(bounds::eval_distinguishability_bounds(
            env.scheme(scheme)?,
            env.quantity(quantity)?,
            env.vector(psi)?,
            env.vector(phi)?,
            tol,
        )?),
        Task::FirstKindDistinguishability { scheme, quantity } => TaskOutput::bounds(
            bounds::eval_first_kind_subspace_bounds(env.scheme(scheme)?, env.quantity(quantity)?, tol)?,
        ),
        Task::RepeatableCommutation { scheme, quantity } => TaskOutput::bounds(bounds::eval_repeatable_commutation(
            env.scheme(scheme)?,
            env.quantity(quantity)?,
            tol,
        )?),
        Task::FixedPointCommutation { instrument, operator } => TaskOutput::bounds(
            bounds::eval_fixed_point_commutation(env.instrument(instrument)?, env.operator(operator)?, tol)?,
        ),
        Task::NondisturbanceCommutation {
            scheme,
            observable,
            quantity,
        } => {
            let r = bounds::check_nondisturbance_commutation(
                env.scheme(scheme)?,
                env.observable(observable)?,
                env.quantity(quantity)?,
                tol,
            )?;
            TaskOutput {
                result: to_value(&r),
                ..Default::default()
            }
            .cert("nondisturbance_commutation", r.passed)
        }
        Task::Repeatability { instrument, scheme } => {
            let m = scheme.as_deref().map(|n| env.scheme(n)).transpose()?;
            let r = repeatability_report(env.instrument(instrument)?, m, tol)?;
            let consequences = !r.repeatable.passed || r.all_pass();
            TaskOutput {
                result: to_value(&r),
                ..Default::default()
            }
            .cert("repeatable_implies_first_kind", r.implication_holds)
            .cert("sharp_kinds_agree", r.sharp_kinds_agree != Some(false))
            .cert("repeatability_consequences", consequences)
        }
        Task::FixedPoints { channel } => {
            let phi = env.channel(channel)?;
            let a = fixpt::analyze_fixed_points(phi, tol)?;
            let support = fixpt::check_support_projection(&a, phi, tol);
            let certifications: BTreeMap<&str, Value> =
                a.certifications.iter().map(|c| (c.name.as_str(), to_value(c))).collect();
            let mut out = TaskOutput {
                result: json!({
                    "fixed_dim": a.fixed_dim(),
                    "faithful": a.faithful,
                    "support_rank": a.support_rank(),
                    "P": matrix(&a.support_p),
                    "rho0": matrix(&a.rho0),
                    "basis": a.basis.iter().map(matrix).collect::<Vec<_>>(),
                    "certifications": certifications,
                    "support": to_value(&support),
                }),
                ..Default::default()
            };
            for c in &a.certifications {
                out = out.cert(&c.name, c.passed);
            }
            for c in support.items() {
                out = out.cert(&format!("support.{}", c.name), c.passed);
            }
            out
        }
        Task::Structural {
            scheme,
            observable,
            quantity,
        } => {
            let r = fixpt::structural_necessary_conditions(
                env.scheme(scheme)?,
                env.observable(observable)?,
                env.quantity(quantity)?,
                tol,
            )?;
            let mut out = TaskOutput {
                result: to_value(&r),
                ..Default::default()
            };
            for c in &r.conditions {
                out = out.cert(&c.name, c.passed);
            }
            out
        }
        Task::NormOne { channel, observable } => {
            let n1 = fixpt::nondisturbed_norm1_observable(env.channel(channel)?, env.observable(observable)?, tol)?;
            TaskOutput {
                result: json!({
                    "g": to_value(&ObservableDesc::from_observable(&n1.g)),
                    "states": n1.states.iter().map(matrix).collect::<Vec<_>>(),
                    "faithful": n1.faithful,
                    "sharp": n1.sharp,
                    "norm_defect": n1.norm_defect,
                    "fixed_defect": n1.fixed_defect,
                    "distinguishability_defect": n1.distinguishability_defect,
                    "used_outcomes": n1.used_outcomes,
                    "selection_rule": n1.selection_rule,
                }),
                ..Default::default()
            }
            .cert("norm_one", n1.norm_defect <= tol.eq_tol)
            .cert("fixed", n1.fixed_defect <= tol.eq_tol)
            .cert("distinguishing", n1.distinguishability_defect <= tol.eq_tol)
        }
        Task::PostProcessing { instrument } => {
            let pp = fixpt::post_processing_decomposition(env.instrument(instrument)?, tol)?;
            TaskOutput {
                result: json!({
                    "g": to_value(&ObservableDesc::from_observable(&pp.g)),
                    "p": pp.p,
                    "reconstruction_defect": pp.reconstruction_defect,
                    "stochastic_defect": pp.stochastic_defect,
                    "norm_defect": pp.norm_defect,
                    "seed": pp.seed,
                }),
                ..Default::default()
            }
            .cert("reconstruction", pp.reconstruction_defect <= tol.rank_tol)
            .cert("stochastic", pp.stochastic_defect <= tol.rank_tol)
            .cert("norm_one", pp.norm_defect <= tol.rank_tol)
        }
        Task::MixFaithfulness {
            channel,
            observable,
            mix,
        } => {
            let r = fixpt::check_mix_faithfulness(env.channel(channel)?, env.observable(observable)?, mix, tol)?;
            TaskOutput {
                result: to_value(&r),
                ..Default::default()
            }
            .cert("mix_faithfulness", r.passed)
        }
    })
}

/// Build every object in declaration order, then run the tasks in order.
pub fn evaluate(s: &Scenario, tol: &Tolerance) -> CliResult<ScenarioReport> {
    if s.system_dim == 0 {
        return Err(CliError::Parse {
            path: s.name.clone(),
            message: "`system_dim` must be positive".into(),
        });
    }
    let mut env = Env {
        objects: BTreeMap::new(),
        tol: *tol,
    };
    let mut rng = s.seed.map(ChaCha8Rng::seed_from_u64);
    for o in &s.objects {
        if env.objects.contains_key(&o.name) {
            return Err(CliError::DuplicateObject(o.name.clone()));
        }
        let obj = build_object(&env, &o.name, &o.object, &mut rng)?;
        check_dims(s, &o.name, &obj)?;
        env.objects.insert(o.name.clone(), obj);
    }

    let mut tasks = Vec::with_capacity(s.tasks.len());
    let mut all_bounds = Vec::new();
    let mut bound_tasks = Vec::new();
    let mut certs = CertificationSummary::default();
    for (index, task) in s.tasks.iter().enumerate() {
        let op = task.op();
        let out = run_task(&env, task).map_err(|e| CliError::Task {
            index,
            op: op.clone(),
            message: e.to_string(),
        })?;
        for (name, passed) in &out.certs {
            certs.total += 1;
            if !passed {
                certs.failed.push(format!("task {index} ({op}): {name}"));
            }
        }
        bound_tasks.extend(std::iter::repeat_n(index, out.bounds.len()));
        all_bounds.extend(out.bounds);
        tasks.push(TaskRecord {
            index,
            op,
            result: out.result,
        });
    }
    let summary = Summary::of(&all_bounds);
    let status = if summary.violated == 0 && certs.failed.is_empty() {
        Status::Pass
    } else {
        Status::Violation
    };
    Ok(ScenarioReport {
        schema: SCHEMA_VERSION,
        scenario: s.name.clone(),
        tolerance: *tol,
        seed: s.seed,
        tasks,
        bounds: all_bounds,
        summary,
        certifications: certs,
        status,
        bound_tasks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema": 1,
        "name": "minimal",
        "system_dim": 2,
        "objects": [
            {"name": "A", "observable": {"effects": [[[1, 0], [0, 0]], [[0, 0], [0, 1]]]}},
            {"name": "L", "luders": "A"},
            {"name": "C", "channel_of": "L"}
        ],
        "tasks": [
            {"op": "repeatability", "instrument": "L"},
            {"op": "fixed_points", "channel": "C"}
        ]
    }"#;

    #[test]
    fn minimal_scenario_passes() {
        let s = parse_scenario(MINIMAL, "inline").unwrap();
        let r = evaluate(&s, &Tolerance::default()).unwrap();
        assert_eq!(r.status, Status::Pass);
        assert_eq!(r.tasks.len(), 2);
        assert_eq!(r.tasks[1].result["fixed_dim"], json!(2));
        assert!(r.certifications.total > 5);
    }

    #[test]
    fn scenarios_round_trip() {
        let s = parse_scenario(MINIMAL, "inline").unwrap();
        let again = parse_scenario(&serde_json::to_string(&s).unwrap(), "inline").unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn schema_version_is_checked() {
        let text = MINIMAL.replace("\"schema\": 1", "\"schema\": 2");
        assert!(matches!(parse_scenario(&text, "x"), Err(CliError::Schema { found: 2, .. })));
    }

    #[test]
    fn unknown_task_fields_are_rejected() {
        let text = MINIMAL.replace("\"instrument\": \"L\"}", "\"instrument\": \"L\", \"bogus\": 1}");
        let err = parse_scenario(&text, "x").unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn tolerance_precedence() {
        let spec = ToleranceSpec {
            eq_tol: Some(1e-7),
            rank_tol: None,
        };
        assert_eq!(resolve_tolerance(None, None, None).unwrap(), Tolerance::default());
        assert_eq!(resolve_tolerance(None, None, Some("1e-6")).unwrap().eq_tol, 1e-6);
        assert_eq!(resolve_tolerance(None, Some(&spec), Some("1e-6")).unwrap().eq_tol, 1e-7);
        assert_eq!(resolve_tolerance(Some(1e-5), Some(&spec), Some("1e-6")).unwrap().eq_tol, 1e-5);
        assert!(resolve_tolerance(None, None, Some("small")).is_err());
        assert!(resolve_tolerance(Some(-1.0), None, None).is_err());
    }

    #[test]
    fn random_objects_need_a_seed() {
        let text = r#"{"schema": 1, "name": "r", "system_dim": 2,
            "objects": [{"name": "U", "random": {"generator": "haar_unitary", "dim": 2}}]}"#;
        let s = parse_scenario(text, "x").unwrap();
        let err = evaluate(&s, &Tolerance::default()).unwrap_err().to_string();
        assert!(err.contains("seed"), "{err}");
        let seeded = text.replace("\"system_dim\": 2,", "\"system_dim\": 2, \"seed\": 4,");
        let s = parse_scenario(&seeded, "x").unwrap();
        assert!(evaluate(&s, &Tolerance::default()).is_ok());
    }
}

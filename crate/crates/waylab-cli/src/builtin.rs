//! Built-in scenarios, emitted fully materialized so that the file alone
//! reproduces the report.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use waylab_core::conserve::AdditiveQuantity;
use waylab_core::cpmaps::qutrit_average_channel;
use waylab_core::measure::normal_dilation;
use waylab_core::opcore::{c, diag, eigenspace_projector, identity, pauli_x, pauli_z, range_isometry, zeros};
use waylab_core::random::{conservative_unitary, random_integer_hermitian, random_povm, random_state};
use waylab_core::{Instrument, MeasurementScheme, Observable, OperationMap, Operator, Tolerance, Vector};

use crate::descriptor::{ChannelDesc, InstrumentDesc, MatrixDesc, ObservableDesc, QuantityDesc, SchemeDesc, VectorDesc};
use crate::error::{CliError, CliResult};
use crate::scenario::{NamedObject, ObjectDesc, Scenario, Task};
use crate::SCHEMA_VERSION;

/// Names accepted by [`builtin`].
pub const NAMES: [&str; 5] = [
    "qubit-luders",
    "qutrit-average-vs-full",
    "normal-dilation",
    "conservative-scheme",
    "rank1-collapse",
];

/// Parameters given as `key=value` strings.
pub type Params = BTreeMap<String, String>;

/// Parse `key=value` pairs; a repeated key is an error.
pub fn parse_params(items: &[String]) -> CliResult<Params> {
    let mut out = Params::new();
    for item in items {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::builtin("params", format!("`{item}` is not of the form key=value")))?;
        if out.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(CliError::builtin("params", format!("parameter `{k}` given twice")));
        }
    }
    Ok(out)
}

/// Build the named scenario.
pub fn builtin(name: &str, params: &Params) -> CliResult<Scenario> {
    let tol = Tolerance::default();
    let p = ParamReader { name, params };
    let s = match name {
        "qubit-luders" => {
            p.allow(&["lambda"])?;
            qubit_luders(p.float("lambda", 0.5)?, &tol)
        }
        "qutrit-average-vs-full" => {
            p.allow(&[])?;
            Ok(qutrit_average_vs_full(&tol))
        }
        "normal-dilation" => {
            p.allow(&["observable"])?;
            let e = p.observable("observable", &tol)?;
            normal_dilation_scenario(&e, &tol)
        }
        "conservative-scheme" => {
            p.allow(&["seed", "ds", "da", "n_sys", "n_app", "outcomes"])?;
            let seed = p.int("seed", 7)? as u64;
            let ds = p.int("ds", 2)?;
            let da = p.int("da", 3)?;
            let outcomes = p.int("outcomes", 2)?;
            let n_sys = p.diagonal("n_sys", ds)?;
            let n_app = p.diagonal("n_app", da)?;
            conservative_scheme(seed, ds, da, outcomes, n_sys, n_app, &tol)
        }
        "rank1-collapse" => {
            p.allow(&["observable", "vectors"])?;
            let e = match p.params.get("observable") {
                Some(_) => p.observable("observable", &tol)?,
                None => computational_basis(2, &tol),
            };
            let vectors = p.vectors("vectors")?;
            rank_one_collapse(&e, vectors, &tol)
        }
        _ => {
            return Err(CliError::builtin(
                name,
                format!("unknown builtin; expected one of {}", NAMES.join(", ")),
            ))
        }
    };
    s.map_err(|e| match e {
        CliError::Core(err) => CliError::builtin(name, err.to_string()),
        other => other,
    })
}

struct ParamReader<'a> {
    name: &'a str,
    params: &'a Params,
}

impl ParamReader<'_> {
    fn err(&self, message: String) -> CliError {
        CliError::builtin(self.name, message)
    }

    fn allow(&self, keys: &[&str]) -> CliResult<()> {
        match self.params.keys().find(|k| !keys.contains(&k.as_str())) {
            Some(k) => Err(self.err(format!("unknown parameter `{k}`"))),
            None => Ok(()),
        }
    }

    fn float(&self, key: &str, default: f64) -> CliResult<f64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| self.err(format!("`{key}` = {v:?} is not a number"))),
        }
    }

    fn int(&self, key: &str, default: usize) -> CliResult<usize> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| self.err(format!("`{key}` = {v:?} is not a non-negative integer"))),
        }
    }

    /// Comma-separated diagonal of length `d`.
    fn diagonal(&self, key: &str, d: usize) -> CliResult<Option<Operator>> {
        let Some(v) = self.params.get(key) else {
            return Ok(None);
        };
        let values = v
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| self.err(format!("`{key}` must be comma-separated numbers")))?;
        if values.len() != d {
            return Err(self.err(format!("`{key}` has {} entries, expected {d}", values.len())));
        }
        Ok(Some(diag(&values)))
    }

    /// Inline JSON when the value starts with `{` or `[`, a file path otherwise.
    fn json_text(&self, key: &str) -> CliResult<Option<String>> {
        let Some(v) = self.params.get(key) else {
            return Ok(None);
        };
        if v.starts_with('{') || v.starts_with('[') {
            Ok(Some(v.clone()))
        } else {
            std::fs::read_to_string(v)
                .map(Some)
                .map_err(|e| CliError::io(format!("parameter `{key}` ({v})"), e))
        }
    }

    fn observable(&self, key: &str, tol: &Tolerance) -> CliResult<Observable> {
        let text = self
            .json_text(key)?
            .ok_or_else(|| self.err(format!("missing parameter `{key}`")))?;
        let desc: ObservableDesc =
            serde_json::from_str(&text).map_err(|e| self.err(format!("`{key}`: {e}")))?;
        desc.build(tol).map_err(|e| self.err(format!("`{key}`: {e}")))
    }

    fn vectors(&self, key: &str) -> CliResult<Option<Vec<Vector>>> {
        let Some(text) = self.json_text(key)? else {
            return Ok(None);
        };
        let descs: Vec<VectorDesc> = serde_json::from_str(&text).map_err(|e| self.err(format!("`{key}`: {e}")))?;
        descs
            .iter()
            .map(|d| d.to_vector().map_err(|e| self.err(format!("`{key}`: {e}"))))
            .collect::<CliResult<Vec<_>>>()
            .map(Some)
    }
}

fn obj(name: &str, o: ObjectDesc) -> NamedObject {
    NamedObject::new(name, o)
}

fn observable(e: &Observable) -> ObjectDesc {
    ObjectDesc::Observable(ObservableDesc::from_observable(e))
}

fn instrument(i: &Instrument, tol: &Tolerance) -> ObjectDesc {
    ObjectDesc::Instrument(InstrumentDesc::from_instrument(i, tol))
}

fn channel(phi: &OperationMap, tol: &Tolerance) -> ObjectDesc {
    ObjectDesc::Channel(ChannelDesc::from_map(phi, tol))
}

fn scheme(m: &MeasurementScheme, tol: &Tolerance) -> ObjectDesc {
    ObjectDesc::Scheme(SchemeDesc::from_scheme(m, tol))
}

fn quantity(q: &AdditiveQuantity) -> ObjectDesc {
    ObjectDesc::Quantity(QuantityDesc::from_quantity(q))
}

fn operator(a: &Operator) -> ObjectDesc {
    ObjectDesc::Operator(MatrixDesc::from_operator(a))
}

fn s(x: &str) -> String {
    x.to_string()
}

fn computational_basis(d: usize, tol: &Tolerance) -> Observable {
    let effects = (0..d)
        .map(|k| {
            let mut v = vec![0.0; d];
            v[k] = 1.0;
            diag(&v)
        })
        .collect();
    Observable::from_effects(effects, tol).expect("projectors onto a basis form an observable")
}

/// `B_λ(±) = (𝟙 ± λσ_x)/2`.
fn unsharp_x(lambda: f64, tol: &Tolerance) -> Observable {
    let half = |sign: f64| (identity(2) + pauli_x() * c(sign * lambda, 0.0)) * c(0.5, 0.0);
    Observable::new(vec![s("+"), s("-")], vec![half(1.0), half(-1.0)], tol).expect("B_λ is an observable for λ in [0, 1]")
}

fn scenario(name: String, system_dim: usize, apparatus_dim: Option<usize>, seed: Option<u64>) -> Scenario {
    Scenario {
        schema: SCHEMA_VERSION,
        name,
        system_dim,
        apparatus_dim,
        seed,
        tolerance: None,
        objects: Vec::new(),
        tasks: Vec::new(),
    }
}

/// The sharp σ_z observable `A`, the unsharp σ_x observable `B_λ`, their
/// Lüders instruments and normal dilations.
pub fn qubit_luders(lambda: f64, tol: &Tolerance) -> CliResult<Scenario> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(CliError::builtin("qubit-luders", format!("lambda = {lambda} is outside [0, 1]")));
    }
    let a = computational_basis(2, tol);
    let b = unsharp_x(lambda, tol);
    let luders_a = Instrument::luders(&a, tol)?;
    let luders_b = Instrument::luders(&b, tol)?;
    let dil_a = normal_dilation(&a, tol)?;
    let dil_b = normal_dilation(&b, tol)?;
    let nz = AdditiveQuantity::new(pauli_z(), zeros(2), tol)?;

    let mut sc = scenario(format!("qubit-luders-{lambda}"), 2, Some(2), None);
    sc.objects = vec![
        obj("A", observable(&a)),
        obj("B", observable(&b)),
        obj("luders_A", instrument(&luders_a, tol)),
        obj("luders_B", instrument(&luders_b, tol)),
        obj("channel_B", channel(&luders_b.channel(), tol)),
        obj("dilation_A", scheme(&dil_a, tol)),
        obj("dilation_B", scheme(&dil_b, tol)),
        obj("N_z", quantity(&nz)),
    ];
    sc.tasks = vec![
        Task::DisturbanceBounds {
            scheme: s("dilation_A"),
            observable: s("B"),
            quantity: None,
            assert_extremal: false,
        },
        Task::DisturbanceBounds {
            scheme: s("dilation_B"),
            observable: s("A"),
            quantity: None,
            assert_extremal: false,
        },
        Task::Repeatability {
            instrument: s("luders_A"),
            scheme: Some(s("dilation_A")),
        },
        Task::Repeatability {
            instrument: s("luders_B"),
            scheme: Some(s("dilation_B")),
        },
        Task::Way {
            scheme: s("dilation_A"),
            quantity: s("N_z"),
            target: None,
            assert_extremal: false,
        },
        Task::Way {
            scheme: s("dilation_B"),
            quantity: s("N_z"),
            target: None,
            assert_extremal: false,
        },
        Task::FixedPoints { channel: s("channel_B") },
        Task::Structural {
            scheme: s("dilation_A"),
            observable: s("B"),
            quantity: s("N_z"),
        },
    ];
    if lambda > 0.0 {
        sc.tasks.push(Task::PostProcessing {
            instrument: s("luders_B"),
        });
    }
    Ok(sc)
}

/// The qutrit channel conserving `N = diag(1, 0, −1)` on average only.
pub fn qutrit_average_vs_full(tol: &Tolerance) -> Scenario {
    let mut sc = scenario(s("qutrit-average-vs-full"), 3, None, None);
    sc.objects = vec![
        obj("N", operator(&diag(&[1.0, 0.0, -1.0]))),
        obj("phi", channel(&qutrit_average_channel(), tol)),
    ];
    sc.tasks = vec![
        Task::Conservation {
            channel: Some(s("phi")),
            operator: Some(s("N")),
            scheme: None,
            quantity: None,
        },
        Task::FixedPoints { channel: s("phi") },
    ];
    sc
}

/// Lüders instrument and normal dilation of a given observable.
pub fn normal_dilation_scenario(e: &Observable, tol: &Tolerance) -> CliResult<Scenario> {
    let inst = Instrument::luders(e, tol)?;
    let m = normal_dilation(e, tol)?;
    let mut sc = scenario(s("normal-dilation"), e.dim(), Some(m.app_dim()), None);
    sc.objects = vec![
        obj("E", observable(e)),
        obj("luders_E", instrument(&inst, tol)),
        obj("channel_E", channel(&inst.channel(), tol)),
        obj("dilation_E", scheme(&m, tol)),
    ];
    sc.tasks = vec![
        Task::Repeatability {
            instrument: s("luders_E"),
            scheme: Some(s("dilation_E")),
        },
        Task::DisturbanceBounds {
            scheme: s("dilation_E"),
            observable: s("E"),
            quantity: None,
            assert_extremal: false,
        },
        Task::FixedPoints { channel: s("channel_E") },
    ];
    Ok(sc)
}

/// A seeded scheme whose coupling `exp(iH)` has `H` block-diagonal in the
/// eigenspaces of `N = N_S ⊗ 𝟙 + 𝟙 ⊗ N_A`.
pub fn conservative_scheme(
    seed: u64,
    ds: usize,
    da: usize,
    outcomes: usize,
    n_sys: Option<Operator>,
    n_app: Option<Operator>,
    tol: &Tolerance,
) -> CliResult<Scenario> {
    if ds == 0 || da == 0 || outcomes == 0 {
        return Err(CliError::builtin("conservative-scheme", "dimensions and outcomes must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_sys = n_sys.unwrap_or_else(|| random_integer_hermitian(ds, 3, &mut rng));
    let n_app = n_app.unwrap_or_else(|| random_integer_hermitian(da, 3, &mut rng));
    let q = AdditiveQuantity::new(n_sys, n_app, tol)?;
    let u = conservative_unitary(&q.composite(), &mut rng, tol)?;
    let coupling = OperationMap::unitary(u, tol)?;
    let xi = random_state(da, &mut rng);
    let pointer = random_povm(da, outcomes, &mut rng, tol)?;
    let m = MeasurementScheme::new(ds, da, xi, coupling, pointer, tol)?;
    let target = random_povm(ds, outcomes, &mut rng, tol)?;
    let target = Observable::new(m.pointer().outcomes().to_vec(), target.effects().to_vec(), tol)?;
    let probe = random_povm(ds, 2, &mut rng, tol)?;

    let mut sc = scenario(format!("conservative-scheme-{seed}"), ds, Some(da), Some(seed));
    sc.objects = vec![
        obj("N", quantity(&q)),
        obj("M", scheme(&m, tol)),
        obj("target", observable(&target)),
        obj("probe", observable(&probe)),
    ];
    sc.tasks = vec![
        Task::Conservation {
            channel: None,
            operator: None,
            scheme: Some(s("M")),
            quantity: Some(s("N")),
        },
        Task::Yanase {
            scheme: s("M"),
            quantity: s("N"),
        },
        Task::DisturbanceBounds {
            scheme: s("M"),
            observable: s("probe"),
            quantity: Some(s("N")),
            assert_extremal: false,
        },
        Task::MeasurabilityBounds {
            scheme: s("M"),
            target: s("target"),
            quantity: s("N"),
            assert_extremal: false,
        },
        Task::Way {
            scheme: s("M"),
            quantity: s("N"),
            target: Some(s("target")),
            assert_extremal: false,
        },
        Task::FirstKindDistinguishability {
            scheme: s("M"),
            quantity: s("N"),
        },
        Task::Structural {
            scheme: s("M"),
            observable: s("probe"),
            quantity: s("N"),
        },
    ];
    Ok(sc)
}

/// `ρ ↦ tr[E(x)ρ] |ψ_x><ψ_x|` for a sharp `E`. Without explicit vectors each
/// `ψ_x` is the first basis vector of the range of `E(x)`.
pub fn rank_one_collapse(e: &Observable, vectors: Option<Vec<Vector>>, tol: &Tolerance) -> CliResult<Scenario> {
    if !e.is_sharp(tol) {
        return Err(CliError::builtin("rank1-collapse", "observable must be sharp"));
    }
    let vectors = match vectors {
        Some(v) => v,
        None => e
            .effects()
            .iter()
            .map(|p| {
                let proj = eigenspace_projector(p, 1.0, tol)?;
                Ok(range_isometry(&proj, 0.5).column(0).into_owned())
            })
            .collect::<waylab_core::Result<Vec<_>>>()?,
    };
    let inst = Instrument::rank_one_collapse(e, &vectors, tol)?;
    let mut sc = scenario(s("rank1-collapse"), e.dim(), None, None);
    sc.objects = vec![
        obj("E", observable(e)),
        obj("collapse", instrument(&inst, tol)),
        obj("channel", channel(&inst.channel(), tol)),
    ];
    sc.tasks = vec![
        Task::Repeatability {
            instrument: s("collapse"),
            scheme: None,
        },
        Task::FixedPoints { channel: s("channel") },
    ];
    if repeatable(&inst, tol) {
        sc.tasks.push(Task::PostProcessing {
            instrument: s("collapse"),
        });
        sc.tasks.push(Task::NormOne {
            channel: s("channel"),
            observable: s("E"),
        });
    }
    Ok(sc)
}

fn repeatable(inst: &Instrument, tol: &Tolerance) -> bool {
    waylab_core::bounds::repeatability_defect(inst) <= tol.eq_tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::evaluate;

    #[test]
    fn every_builtin_evaluates() {
        let tol = Tolerance::default();
        for name in NAMES {
            let mut p = Params::new();
            if name == "normal-dilation" {
                p.insert(s("observable"), s(r#"{"effects": [[[0.75, 0], [0, 0.25]], [[0.25, 0], [0, 0.75]]]}"#));
            }
            let sc = builtin(name, &p).unwrap();
            let report = evaluate(&sc, &tol).unwrap();
            assert_eq!(report.exit_code(), 0, "{name}: {:?}", report.certifications);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut p = Params::new();
        p.insert(s("lambda"), s("1.5"));
        assert!(builtin("qubit-luders", &p).unwrap_err().to_string().contains("outside"));
        p.insert(s("lambda"), s("half"));
        assert!(builtin("qubit-luders", &p).is_err());
        assert!(builtin("qubit-luders", &parse_params(&[s("mu=1")]).unwrap()).is_err());
        assert!(builtin("no-such-scenario", &Params::new()).is_err());
        assert!(parse_params(&[s("a=1"), s("a=2")]).is_err());
        assert!(parse_params(&[s("novalue")]).is_err());
    }

    #[test]
    fn builtins_are_deterministic() {
        let p = parse_params(&[s("seed=11")]).unwrap();
        let a = builtin("conservative-scheme", &p).unwrap();
        let b = builtin("conservative-scheme", &p).unwrap();
        assert_eq!(crate::output::to_json(&a), crate::output::to_json(&b));
    }
}

//! File schemas (version 1): models, joint fixtures, observations.
//!
//! Finite kernels are row-major matrices with one row per target point and
//! one column per source point; initial distributions have one column.
//! Gauss maps are `{"a", "mean", "cov"}` with `a` omitted for states.

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::category::{Instance, Object};
use crate::error::{Error, Result};
use crate::finite::{cardinality, Kernel};
use crate::finsetmulti::{FinSetMulti, MultiKernel};
use crate::finstoch::{FinStoch, StochasticKernel};
use crate::gauss::{Gauss, GaussMap};
use crate::models::{HmmSpec, JointState, Var};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone)]
pub enum Model {
    FinStoch(HmmSpec<StochasticKernel>),
    FinSetMulti(HmmSpec<MultiKernel>),
    Gauss(HmmSpec<GaussMap>),
}

impl Model {
    pub fn instance(&self) -> Instance {
        match self {
            Model::FinStoch(_) => Instance::FinStoch,
            Model::FinSetMulti(_) => Instance::FinSetMulti,
            Model::Gauss(_) => Instance::Gauss,
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            Model::FinStoch(h) => h.horizon(),
            Model::FinSetMulti(h) => h.horizon(),
            Model::Gauss(h) => h.horizon(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Joint {
    FinStoch(JointState<StochasticKernel>),
    FinSetMulti(JointState<MultiKernel>),
}

#[derive(Debug, Clone, Default)]
pub struct Names {
    pub states: Option<Vec<Vec<String>>>,
    pub observations: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Clone)]
pub enum Input {
    Model { model: Model, names: Names },
    Joint(Joint),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Observations {
    Finite(Vec<usize>),
    Gauss(Vec<DVector<f64>>),
}

impl Observations {
    pub fn len(&self) -> usize {
        match self {
            Observations::Finite(v) => v.len(),
            Observations::Gauss(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn invalid(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Validation {
        location: location.into(),
        message: message.into(),
    }
}

fn parse_json(text: &str, what: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| invalid(what, e.to_string()))
}

fn check_version(v: &Value, what: &str) -> Result<()> {
    match v.get("schema_version").and_then(Value::as_u64) {
        Some(SCHEMA_VERSION) => Ok(()),
        Some(other) => Err(invalid(
            format!("{what}.schema_version"),
            format!("unsupported version {other}, expected {SCHEMA_VERSION}"),
        )),
        None => Err(invalid(format!("{what}.schema_version"), "missing")),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[allow(dead_code)]
    schema_version: u64,
    #[serde(default)]
    #[allow(dead_code)]
    kind: Option<String>,
    category: String,
    horizon: usize,
    state_spaces: Vec<usize>,
    observation_spaces: Vec<usize>,
    #[serde(default)]
    state_names: Option<Vec<Vec<String>>>,
    #[serde(default)]
    observation_names: Option<Vec<Vec<String>>>,
    transitions: Vec<Value>,
    observations: Vec<Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJoint {
    #[allow(dead_code)]
    schema_version: u64,
    #[allow(dead_code)]
    kind: String,
    category: String,
    layout: Vec<String>,
    factors: Vec<usize>,
    values: Vec<Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGauss {
    #[serde(default)]
    a: Option<Vec<Vec<f64>>>,
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

fn entry_f64(v: &Value, loc: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| invalid(loc, format!("expected a number, found {v}")))
}

fn entry_bool(v: &Value, loc: &str) -> Result<bool> {
    match v {
        Value::Bool(b) => Ok(*b),
        Value::Number(n) if n.as_f64() == Some(0.0) => Ok(false),
        Value::Number(n) if n.as_f64() == Some(1.0) => Ok(true),
        other => Err(invalid(
            loc,
            format!("expected true/false or 0/1, found {other}"),
        )),
    }
}

/// Row-major matrix with `rows` rows and `cols` columns, converted to
/// column-major kernel storage.
fn finite_matrix<S>(
    v: &Value,
    rows: usize,
    cols: usize,
    loc: &str,
    entry: impl Fn(&Value, &str) -> Result<S>,
) -> Result<Vec<S>>
where
    S: Copy + Default,
{
    let m = v
        .get("matrix")
        .and_then(Value::as_array)
        .ok_or_else(|| invalid(loc, "expected an object with a \"matrix\" array"))?;
    if m.len() != rows {
        return Err(invalid(
            loc,
            format!("matrix has {} rows, expected {rows}", m.len()),
        ));
    }
    let mut data = vec![S::default(); rows * cols];
    for (x, row) in m.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| invalid(loc, format!("row {x} is not an array")))?;
        if row.len() != cols {
            return Err(invalid(
                loc,
                format!("row {x} has {} entries, expected {cols}", row.len()),
            ));
        }
        for (a, e) in row.iter().enumerate() {
            data[a * rows + x] = entry(e, &format!("{loc}: row {x}, column {a}"))?;
        }
    }
    Ok(data)
}

fn matrix_from_rows(rows: &[Vec<f64>], r: usize, c: usize, loc: &str) -> Result<DMatrix<f64>> {
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        return Err(invalid(loc, format!("expected a {r}x{c} matrix")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn gauss_map(v: &Value, source: usize, target: usize, loc: &str) -> Result<GaussMap> {
    let raw: RawGauss =
        serde_json::from_value(v.clone()).map_err(|e| invalid(loc, e.to_string()))?;
    let a = match raw.a {
        Some(rows) => matrix_from_rows(&rows, target, source, &format!("{loc}.a"))?,
        None if source == 0 => DMatrix::zeros(target, 0),
        None => return Err(invalid(format!("{loc}.a"), "missing for a map with inputs")),
    };
    if raw.mean.len() != target {
        return Err(invalid(
            format!("{loc}.mean"),
            format!("has {} entries, expected {target}", raw.mean.len()),
        ));
    }
    let cov = matrix_from_rows(&raw.cov, target, target, &format!("{loc}.cov"))?;
    let src = if source == 0 {
        Object::unit()
    } else {
        Object::single(source)
    };
    GaussMap::new(
        src,
        Object::single(target),
        a,
        DVector::from_vec(raw.mean),
        cov,
    )
    .map_err(|e| e.at(loc))
}

fn build_finite<S, C>(
    cat: &C,
    raw: &RawModel,
    entry: impl Fn(&Value, &str) -> Result<S> + Copy,
    tol: f64,
) -> Result<HmmSpec<Kernel<S>>>
where
    S: crate::finite::Semiring + Default,
    C: crate::category::MarkovCategory<Morphism = Kernel<S>>,
{
    let mut fs = Vec::with_capacity(raw.horizon + 1);
    let mut gs = Vec::with_capacity(raw.horizon + 1);
    for t in 0..=raw.horizon {
        let loc = format!("transitions[{t}]");
        let (src, cols) = if t == 0 {
            (Object::unit(), 1)
        } else {
            (
                Object::single(raw.state_spaces[t - 1]),
                raw.state_spaces[t - 1],
            )
        };
        let x = Object::single(raw.state_spaces[t]);
        let data = finite_matrix(&raw.transitions[t], raw.state_spaces[t], cols, &loc, entry)?;
        fs.push(Kernel::new(src, x.clone(), data, tol).map_err(|e| e.at(&loc))?);
        let loc = format!("observations[{t}]");
        let y = Object::single(raw.observation_spaces[t]);
        let data = finite_matrix(
            &raw.observations[t],
            raw.observation_spaces[t],
            raw.state_spaces[t],
            &loc,
            entry,
        )?;
        gs.push(Kernel::new(x, y, data, tol).map_err(|e| e.at(&loc))?);
    }
    HmmSpec::new(cat, fs, gs)
}

fn check_names(names: &Option<Vec<Vec<String>>>, spaces: &[usize], what: &str) -> Result<()> {
    if let Some(names) = names {
        if names.len() != spaces.len() {
            return Err(invalid(
                what,
                format!("{} lists for {} times", names.len(), spaces.len()),
            ));
        }
        for (t, (list, &n)) in names.iter().zip(spaces).enumerate() {
            if list.len() != n {
                return Err(invalid(
                    format!("{what}[{t}]"),
                    format!("{} names for {n} points", list.len()),
                ));
            }
        }
    }
    Ok(())
}

fn parse_model(v: Value) -> Result<Input> {
    let raw: RawModel = serde_json::from_value(v).map_err(|e| invalid("model", e.to_string()))?;
    let instance: Instance = raw
        .category
        .parse()
        .map_err(|e: Error| e.at("model.category"))?;
    let n = raw.horizon;
    for (field, len) in [
        ("state_spaces", raw.state_spaces.len()),
        ("observation_spaces", raw.observation_spaces.len()),
        ("transitions", raw.transitions.len()),
        ("observations", raw.observations.len()),
    ] {
        if len != n + 1 {
            return Err(invalid(
                format!("model.{field}"),
                format!("has {len} entries, expected horizon + 1 = {}", n + 1),
            ));
        }
    }
    let min = if instance == Instance::Gauss { 0 } else { 1 };
    for (field, spaces) in [
        ("state_spaces", &raw.state_spaces),
        ("observation_spaces", &raw.observation_spaces),
    ] {
        if let Some(t) = spaces.iter().position(|&s| s < min) {
            return Err(invalid(
                format!("model.{field}[{t}]"),
                "finite spaces need at least one point",
            ));
        }
    }
    check_names(&raw.state_names, &raw.state_spaces, "model.state_names")?;
    check_names(
        &raw.observation_names,
        &raw.observation_spaces,
        "model.observation_names",
    )?;
    let model = match instance {
        Instance::FinStoch => {
            let cat = FinStoch::new();
            Model::FinStoch(build_finite(&cat, &raw, entry_f64, 1e-9)?)
        }
        Instance::FinSetMulti => {
            let cat = FinSetMulti::new();
            Model::FinSetMulti(build_finite(&cat, &raw, entry_bool, 0.0)?)
        }
        Instance::Gauss => {
            let cat = Gauss::new();
            let mut fs = Vec::with_capacity(n + 1);
            let mut gs = Vec::with_capacity(n + 1);
            for t in 0..=n {
                let src = if t == 0 { 0 } else { raw.state_spaces[t - 1] };
                fs.push(gauss_map(
                    &raw.transitions[t],
                    src,
                    raw.state_spaces[t],
                    &format!("transitions[{t}]"),
                )?);
                gs.push(gauss_map(
                    &raw.observations[t],
                    raw.state_spaces[t],
                    raw.observation_spaces[t],
                    &format!("observations[{t}]"),
                )?);
            }
            Model::Gauss(HmmSpec::new(&cat, fs, gs)?)
        }
    };
    Ok(Input::Model {
        model,
        names: Names {
            states: raw.state_names,
            observations: raw.observation_names,
        },
    })
}

fn parse_var(s: &str) -> Option<Var> {
    let (head, idx) = s.split_at(1);
    let t = idx.parse().ok()?;
    match head {
        "X" => Some(Var::X(t)),
        "Y" => Some(Var::Y(t)),
        _ => None,
    }
}

fn parse_joint(v: Value) -> Result<Input> {
    let raw: RawJoint = serde_json::from_value(v).map_err(|e| invalid("joint", e.to_string()))?;
    let instance: Instance = raw
        .category
        .parse()
        .map_err(|e: Error| e.at("joint.category"))?;
    let layout = raw
        .layout
        .iter()
        .enumerate()
        .map(|(i, s)| {
            parse_var(s).ok_or_else(|| {
                invalid(
                    format!("joint.layout[{i}]"),
                    format!("expected X<t> or Y<t>, found {s:?}"),
                )
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if layout.len() != raw.factors.len() {
        return Err(invalid(
            "joint.factors",
            "must have one entry per layout variable",
        ));
    }
    let target = Object::new(raw.factors.clone());
    let size = cardinality(&target);
    if raw.values.len() != size {
        return Err(invalid(
            "joint.values",
            format!("has {} entries, expected {size}", raw.values.len()),
        ));
    }
    let loc = |i: usize| format!("joint.values[{i}]");
    Ok(Input::Joint(match instance {
        Instance::FinStoch => {
            let vals = raw
                .values
                .iter()
                .enumerate()
                .map(|(i, v)| entry_f64(v, &loc(i)))
                .collect::<Result<Vec<_>>>()?;
            Joint::FinStoch(JointState {
                state: Kernel::state(target, vals, 1e-9).map_err(|e| e.at("joint.values"))?,
                layout,
            })
        }
        Instance::FinSetMulti => {
            let vals = raw
                .values
                .iter()
                .enumerate()
                .map(|(i, v)| entry_bool(v, &loc(i)))
                .collect::<Result<Vec<_>>>()?;
            Joint::FinSetMulti(JointState {
                state: Kernel::state(target, vals, 0.0).map_err(|e| e.at("joint.values"))?,
                layout,
            })
        }
        Instance::Gauss => return Err(Error::Unsupported("joint fixtures are finite only".into())),
    }))
}

/// Parse a model or joint-fixture file.
pub fn parse_input(text: &str) -> Result<Input> {
    let v = parse_json(text, "model")?;
    check_version(&v, "model")?;
    match v.get("kind").and_then(Value::as_str).unwrap_or("hmm") {
        "hmm" => parse_model(v),
        "joint" => parse_joint(v),
        other => Err(invalid("model.kind", format!("unknown kind {other:?}"))),
    }
}

/// Parse observations for `model`. Finite observations may be indices or names.
pub fn parse_observations(text: &str, model: &Model, names: &Names) -> Result<Observations> {
    let v = parse_json(text, "observations")?;
    check_version(&v, "observations")?;
    let list = v
        .get("observations")
        .and_then(Value::as_array)
        .ok_or_else(|| invalid("observations", "missing \"observations\" array"))?;
    if list.is_empty() || list.len() > model.horizon() + 1 {
        return Err(invalid(
            "observations",
            format!(
                "{} observations for horizon {}",
                list.len(),
                model.horizon()
            ),
        ));
    }
    let space = |t: usize| -> usize {
        match model {
            Model::FinStoch(h) => cardinality(h.obs_space(t)),
            Model::FinSetMulti(h) => cardinality(h.obs_space(t)),
            Model::Gauss(h) => crate::gauss::dim(h.obs_space(t)),
        }
    };
    match model {
        Model::Gauss(_) => {
            let mut out = Vec::with_capacity(list.len());
            for (t, y) in list.iter().enumerate() {
                let loc = format!("observations[{t}]");
                let vals: Vec<f64> = match y {
                    Value::Number(_) => vec![entry_f64(y, &loc)?],
                    Value::Array(a) => a
                        .iter()
                        .map(|e| entry_f64(e, &loc))
                        .collect::<Result<_>>()?,
                    other => return Err(invalid(loc, format!("expected a vector, found {other}"))),
                };
                if vals.len() != space(t) || vals.iter().any(|x| !x.is_finite()) {
                    return Err(invalid(
                        loc,
                        format!("expected {} finite numbers", space(t)),
                    ));
                }
                out.push(DVector::from_vec(vals));
            }
            Ok(Observations::Gauss(out))
        }
        _ => {
            let mut out = Vec::with_capacity(list.len());
            for (t, y) in list.iter().enumerate() {
                let loc = format!("observations[{t}]");
                let idx = match y {
                    Value::Number(n) => n.as_u64().map(|u| u as usize),
                    Value::String(s) => names
                        .observations
                        .as_ref()
                        .and_then(|ns| ns[t].iter().position(|name| name == s)),
                    _ => None,
                }
                .ok_or_else(|| invalid(&loc, format!("expected an index or a name, found {y}")))?;
                if idx >= space(t) {
                    return Err(invalid(
                        loc,
                        format!("index {idx} out of range for {} points", space(t)),
                    ));
                }
                out.push(idx);
            }
            Ok(Observations::Finite(out))
        }
    }
}

pub fn digest(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let bytes = h.finalize();
    let hex: String = bytes.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

pub fn distribution_json(k: &StochasticKernel, names: Option<&Vec<String>>) -> Value {
    match names {
        Some(ns) => json!({ "distribution": k.values(), "names": ns }),
        None => json!({ "distribution": k.values() }),
    }
}

pub fn set_json(k: &MultiKernel, names: Option<&Vec<String>>) -> Value {
    let members = k.support(0);
    match names {
        Some(ns) => json!({
            "set": members,
            "names": members.iter().map(|&i| ns[i].clone()).collect::<Vec<_>>(),
        }),
        None => json!({ "set": members }),
    }
}

pub fn matrix_json(m: &DMatrix<f64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| json!((0..m.ncols()).map(|j| m[(i, j)]).collect::<Vec<_>>()))
            .collect(),
    )
}

pub fn gaussian_json(g: &GaussMap) -> Value {
    json!({ "mean": g.mean.as_slice(), "cov": matrix_json(&g.cov) })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCALAR: &str = r#"{
        "schema_version": 1, "category": "gauss", "horizon": 1,
        "state_spaces": [1, 1], "observation_spaces": [1, 1],
        "transitions": [{"mean": [0], "cov": [[1]]}, {"a": [[1]], "mean": [0], "cov": [[1]]}],
        "observations": [{"a": [[1]], "mean": [0], "cov": [[1]]}, {"a": [[1]], "mean": [0], "cov": [[1]]}]
    }"#;

    #[test]
    fn parses_gauss_model_and_observations() {
        let Input::Model { model, names } = parse_input(SCALAR).unwrap() else {
            panic!("expected a model")
        };
        assert_eq!(model.horizon(), 1);
        let obs = parse_observations(
            r#"{"schema_version": 1, "observations": [1, [1.0]]}"#,
            &model,
            &names,
        )
        .unwrap();
        assert_eq!(obs.len(), 2);
    }

    #[test]
    fn column_sum_error_names_time() {
        let bad = r#"{
            "schema_version": 1, "category": "finstoch", "horizon": 1,
            "state_spaces": [2, 2], "observation_spaces": [2, 2],
            "transitions": [{"matrix": [[0.5], [0.5]]}, {"matrix": [[0.5, 0.2], [0.4, 0.8]]}],
            "observations": [{"matrix": [[1, 0], [0, 1]]}, {"matrix": [[1, 0], [0, 1]]}]
        }"#;
        let err = parse_input(bad).unwrap_err();
        assert!(err.to_string().contains("transitions[1]"), "{err}");
        assert!(matches!(err, Error::Validation { .. }));
    }

    #[test]
    fn rejects_other_versions() {
        let err = parse_input(r#"{"schema_version": 2}"#).unwrap_err();
        assert!(err.to_string().contains("schema_version"));
    }
}

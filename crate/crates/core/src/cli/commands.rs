//! Report builders behind each subcommand, shared with the C interface.

use nalgebra::DVector;
use rand::Rng;
use serde_json::{json, Map, Value};

use super::schema::{
    self, digest, distribution_json, gaussian_json, matrix_json, set_json, Input, Joint, Model,
    Names, Observations,
};
use super::{read, Cli, CliError, Command, Method, Outcome, Suite};
use crate::category::{Instance, MarkovCategory};
use crate::error::{Error, Result};
use crate::filterchain::{verify_filter_markov_multi, verify_filter_markov_stoch, DEDUP_TOL};
use crate::filtering::{filter_instantiated, FilterRun};
use crate::finite::{Finite, Kernel, Semiring};
use crate::finsetmulti::{FinSetMulti, MultiKernel};
use crate::finstoch::{self, FinStoch, StochasticKernel};
use crate::gauss::{self, dim, Gauss, GaussMap};
use crate::laws::{check_laws, check_model_laws, LawReport};
use crate::models::{
    check_markov_properties, hmm_joint, HmmSpec, JointState, MarkovOptions, MarkovProperty,
};
use crate::random;
use crate::smoothing::{fixed_interval_instantiated, forward_backward_instantiated, SmootherRun};
use crate::suites::{
    filter_oracle_finite, gauss_batch_check, kalman_check, possibilistic_oracle, rts_check,
    smoother_oracle_finite, OracleReport,
};

const FINITE_TOL: f64 = 1e-12;
const KALMAN_TOL: f64 = 1e-9;
const GAUSS_SMOOTH_TOL: f64 = 1e-8;

fn header(command: &str, instance: Instance, input_digest: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schema_version".into(), json!(schema::SCHEMA_VERSION));
    m.insert("tool".into(), json!("markovcat"));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("command".into(), json!(command));
    m.insert("category".into(), json!(instance.as_str()));
    m.insert("input_digest".into(), json!(input_digest));
    m
}

fn load_model(bytes: &[u8]) -> Result<(Model, Names)> {
    match load_input(bytes)? {
        Input::Model { model, names } => Ok((model, names)),
        Input::Joint(_) => Err(Error::Validation {
            location: "model.kind".into(),
            message: "this command needs an hmm model, not a joint fixture".into(),
        }),
    }
}

fn load_input(bytes: &[u8]) -> Result<Input> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Validation {
        location: "model".into(),
        message: e.to_string(),
    })?;
    schema::parse_input(text)
}

fn load_observations(bytes: &[u8], model: &Model, names: &Names) -> Result<Observations> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Validation {
        location: "observations".into(),
        message: e.to_string(),
    })?;
    schema::parse_observations(text, model, names)
}

pub(super) fn dispatch(cli: &Cli) -> std::result::Result<Outcome, CliError> {
    match &cli.command {
        Command::Filter {
            model,
            observations,
        } => {
            let mb = read(model)?;
            let ob = read(observations)?;
            Ok(filter(&mb, &ob)?)
        }
        Command::Smooth {
            model,
            observations,
            method,
        } => {
            let mb = read(model)?;
            let ob = read(observations)?;
            Ok(smooth(&mb, &ob, *method)?)
        }
        Command::Simulate { model, seed, steps } => {
            let mb = read(model)?;
            Ok(simulate(&mb, *seed, *steps)?)
        }
        Command::Verify {
            suite,
            model,
            observations,
            category,
            seed,
            cases,
        } => {
            let mb = model.as_deref().map(read).transpose()?;
            let ob = observations.as_deref().map(read).transpose()?;
            let req = VerifyRequest {
                suite: *suite,
                model: mb.as_deref(),
                observations: ob.as_deref(),
                category: category.as_deref(),
                seed: *seed,
                cases: *cases,
                tolerance: cli.tolerance,
            };
            Ok(verify(&req)?)
        }
    }
}

fn state_names(names: &Names, t: usize) -> Option<&Vec<String>> {
    names.states.as_ref().map(|s| &s[t])
}

fn stoch_state(k: &StochasticKernel, names: Option<&Vec<String>>) -> Value {
    distribution_json(k, names)
}

fn multi_state(k: &MultiKernel, names: Option<&Vec<String>>) -> Value {
    set_json(k, names)
}

fn filter_steps<M>(
    run: &FilterRun<M>,
    names: &Names,
    enc: impl Fn(&M, Option<&Vec<String>>) -> Value,
) -> Vec<Value> {
    run.steps
        .iter()
        .enumerate()
        .map(|(t, s)| {
            let mut m = Map::new();
            m.insert("t".into(), json!(t));
            m.insert("predicted".into(), enc(&s.predicted, state_names(names, t)));
            m.insert("posterior".into(), enc(&s.posterior, state_names(names, t)));
            if let Some(w) = s.weight {
                m.insert("weight".into(), json!(w));
            }
            m.insert("degenerate".into(), json!(s.degenerate));
            Value::Object(m)
        })
        .collect()
}

/// Filter a model on an observation file; returns `(steps, degenerate)`.
pub fn filter_values(
    model: &Model,
    names: &Names,
    obs: &Observations,
) -> Result<(Vec<Value>, bool)> {
    Ok(match (model, obs) {
        (Model::FinStoch(h), Observations::Finite(y)) => {
            let run = filter_instantiated(&FinStoch::new(), h, y)?;
            (filter_steps(&run, names, stoch_state), run.any_degenerate())
        }
        (Model::FinSetMulti(h), Observations::Finite(y)) => {
            let run = filter_instantiated(&FinSetMulti::new(), h, y)?;
            (filter_steps(&run, names, multi_state), run.any_degenerate())
        }
        (Model::Gauss(h), Observations::Gauss(y)) => {
            let run = filter_instantiated(&Gauss::new(), h, y)?;
            (
                filter_steps(&run, names, |g, _| gaussian_json(g)),
                run.any_degenerate(),
            )
        }
        _ => {
            return Err(Error::Validation {
                location: "observations".into(),
                message: "observation type does not match the model category".into(),
            })
        }
    })
}

pub fn filter(model_bytes: &[u8], obs_bytes: &[u8]) -> Result<Outcome> {
    let (model, names) = load_model(model_bytes)?;
    let obs = load_observations(obs_bytes, &model, &names)?;
    let (steps, degenerate) = filter_values(&model, &names, &obs)?;
    let mut r = header(
        "filter",
        model.instance(),
        &digest(&[model_bytes, obs_bytes]),
    );
    r.insert("steps".into(), Value::Array(steps));
    r.insert("degenerate".into(), json!(degenerate));
    Ok(Outcome {
        report: Value::Object(r),
        passed: true,
    })
}

fn smoother_states<M>(
    run: &SmootherRun<M>,
    names: &Names,
    enc: impl Fn(&M, Option<&Vec<String>>) -> Value,
) -> Vec<Value> {
    run.states
        .iter()
        .zip(&run.degenerate)
        .enumerate()
        .map(|(t, (s, d))| json!({ "t": t, "state": enc(s, state_names(names, t)), "degenerate": d }))
        .collect()
}

fn finite_smooth<S: Semiring>(
    hmm: &HmmSpec<Kernel<S>>,
    obs: &[usize],
    method: Method,
) -> Result<SmootherRun<Kernel<S>>> {
    match method {
        Method::ForwardBackward => forward_backward_instantiated(hmm, obs),
        Method::FixedInterval => {
            let cat = Finite::<S>::new();
            let run = filter_instantiated(&cat, hmm, obs)?;
            fixed_interval_instantiated(&cat, hmm, &run)
        }
    }
}

/// Smooth a model on an observation file; returns `(states, gains, degenerate)`.
pub fn smooth_values(
    model: &Model,
    names: &Names,
    obs: &Observations,
    method: Method,
) -> Result<(Vec<Value>, Option<Vec<Value>>, bool)> {
    if obs.len() != model.horizon() + 1 {
        return Err(Error::Validation {
            location: "observations".into(),
            message: format!(
                "smoothing needs {} observations, got {}",
                model.horizon() + 1,
                obs.len()
            ),
        });
    }
    Ok(match (model, obs) {
        (Model::FinStoch(h), Observations::Finite(y)) => {
            let run = finite_smooth(h, y, method)?;
            (
                smoother_states(&run, names, stoch_state),
                None,
                run.any_degenerate(),
            )
        }
        (Model::FinSetMulti(h), Observations::Finite(y)) => {
            let run = finite_smooth(h, y, method)?;
            (
                smoother_states(&run, names, multi_state),
                None,
                run.any_degenerate(),
            )
        }
        (Model::Gauss(h), Observations::Gauss(y)) => {
            if method == Method::ForwardBackward {
                return Err(Error::Unsupported(
                    "forward-backward smoothing needs finite spaces; use fixed-interval for gauss"
                        .into(),
                ));
            }
            let cat = Gauss::new();
            let run = filter_instantiated(&cat, h, y)?;
            let sm = fixed_interval_instantiated(&cat, h, &run)?;
            let gains = sm.gains().iter().map(matrix_json).collect();
            (
                smoother_states(&sm, names, |g, _| gaussian_json(g)),
                Some(gains),
                sm.any_degenerate(),
            )
        }
        _ => {
            return Err(Error::Validation {
                location: "observations".into(),
                message: "observation type does not match the model category".into(),
            })
        }
    })
}

pub fn smooth(model_bytes: &[u8], obs_bytes: &[u8], method: Method) -> Result<Outcome> {
    let (model, names) = load_model(model_bytes)?;
    let obs = load_observations(obs_bytes, &model, &names)?;
    let (states, gains, degenerate) = smooth_values(&model, &names, &obs, method)?;
    let mut r = header(
        "smooth",
        model.instance(),
        &digest(&[model_bytes, obs_bytes]),
    );
    r.insert("method".into(), json!(method.as_str()));
    r.insert("states".into(), Value::Array(states));
    if let Some(g) = gains {
        r.insert("gains".into(), Value::Array(g));
    }
    r.insert("degenerate".into(), json!(degenerate));
    Ok(Outcome {
        report: Value::Object(r),
        passed: true,
    })
}

fn uniform_member<R: Rng + ?Sized>(k: &MultiKernel, a: usize, rng: &mut R) -> Result<usize> {
    let s = k.support(a);
    if s.is_empty() {
        return Err(Error::Domain(format!("no possible successor of point {a}")));
    }
    Ok(s[rng.random_range(0..s.len())])
}

/// Sample `steps` time points; returns `(states, observations)`.
pub fn simulate_values(model: &Model, seed: u64, steps: usize) -> Result<(Vec<Value>, Vec<Value>)> {
    let mut rng = random::rng(seed);
    let mut xs = Vec::with_capacity(steps);
    let mut ys = Vec::with_capacity(steps);
    match model {
        Model::FinStoch(h) => {
            let mut x = 0;
            for t in 0..steps {
                x = finstoch::sample_index(h.f(t).column(if t == 0 { 0 } else { x }), &mut rng);
                let y = finstoch::sample_index(h.g(t).column(x), &mut rng);
                xs.push(json!(x));
                ys.push(json!(y));
            }
        }
        Model::FinSetMulti(h) => {
            let mut x = 0;
            for t in 0..steps {
                x = uniform_member(h.f(t), if t == 0 { 0 } else { x }, &mut rng)?;
                let y = uniform_member(h.g(t), x, &mut rng)?;
                xs.push(json!(x));
                ys.push(json!(y));
            }
        }
        Model::Gauss(h) => {
            let cat = Gauss::new();
            let mut x = DVector::zeros(0);
            for t in 0..steps {
                let state = cat.compose(&cat.point(cat.source(h.f(t)), &x)?, h.f(t))?;
                x = gauss::sample_gauss(&state, &mut rng)?;
                let ystate = cat.compose(&cat.point(cat.source(h.g(t)), &x)?, h.g(t))?;
                let y = gauss::sample_gauss(&ystate, &mut rng)?;
                xs.push(json!(x.as_slice()));
                ys.push(json!(y.as_slice()));
            }
        }
    }
    Ok((xs, ys))
}

pub fn simulate(model_bytes: &[u8], seed: u64, steps: Option<usize>) -> Result<Outcome> {
    let (model, _) = load_model(model_bytes)?;
    let max = model.horizon() + 1;
    let steps = steps.unwrap_or(max);
    if steps == 0 || steps > max {
        return Err(Error::Validation {
            location: "--steps".into(),
            message: format!("must be between 1 and {max}"),
        });
    }
    let (states, observations) = simulate_values(&model, seed, steps)?;
    let mut r = header("simulate", model.instance(), &digest(&[model_bytes]));
    r.insert("seed".into(), json!(seed));
    r.insert("states".into(), Value::Array(states));
    r.insert("observations".into(), Value::Array(observations));
    Ok(Outcome {
        report: Value::Object(r),
        passed: true,
    })
}

pub struct VerifyRequest<'a> {
    pub suite: Suite,
    pub model: Option<&'a [u8]>,
    pub observations: Option<&'a [u8]>,
    pub category: Option<&'a str>,
    pub seed: u64,
    pub cases: usize,
    pub tolerance: Option<f64>,
}

fn oracle_json(r: &OracleReport) -> Value {
    json!({
        "name": r.name,
        "passed": r.passed(),
        "cases": r.cases,
        "max_deviation": r.max_deviation,
        "tol": r.tol,
        "failures": r.failures,
    })
}

fn laws_json(rep: &LawReport) -> Vec<Value> {
    rep.checks
        .iter()
        .map(|c| {
            json!({
                "name": c.name,
                "passed": c.failures == 0,
                "cases": c.cases,
                "failures": c.failures,
                "max_deviation": c.max_deviation,
            })
        })
        .collect()
}

fn check(name: &str, passed: bool, fields: Value) -> Value {
    let mut m = Map::new();
    m.insert("name".into(), json!(name));
    m.insert("passed".into(), json!(passed));
    if let Value::Object(f) = fields {
        m.extend(f);
    }
    Value::Object(m)
}

fn markov_json<S: Semiring>(
    cat: &Finite<S>,
    joint: &JointState<Kernel<S>>,
    opts: &MarkovOptions,
) -> Result<Vec<Value>> {
    let props: Vec<MarkovProperty> = MarkovProperty::ALL
        .into_iter()
        .filter(|p| joint.has_observations() || !p.needs_observations())
        .collect();
    let rep = check_markov_properties(cat, joint, &props, opts)?;
    Ok(props
        .iter()
        .map(|&p| {
            let checks: Vec<_> = rep.checks.iter().filter(|c| c.property == p).collect();
            let failing: Vec<String> = checks
                .iter()
                .filter(|c| !c.holds)
                .take(8)
                .map(|c| format!("{} (deviation {:e})", c.statement, c.deviation))
                .collect();
            let max = checks.iter().map(|c| c.deviation).fold(0.0, f64::max);
            check(
                p.as_str(),
                checks.iter().all(|c| c.holds),
                json!({
                    "statements": checks.len(),
                    "sampled": rep.sampled.contains(&p),
                    "max_deviation": max,
                    "tol": opts.tol,
                    "failures": failing,
                }),
            )
        })
        .collect())
}

fn gauss_observations(
    req: &VerifyRequest,
    model: &Model,
    names: &Names,
    hmm: &HmmSpec<GaussMap>,
) -> Result<Vec<DVector<f64>>> {
    match req.observations {
        Some(bytes) => match load_observations(bytes, model, names)? {
            Observations::Gauss(y) if y.len() == hmm.horizon() + 1 => Ok(y),
            _ => Err(Error::Validation {
                location: "observations".into(),
                message: format!("the gauss oracles need {} observations", hmm.horizon() + 1),
            }),
        },
        None => Ok(random::gauss_observations(hmm, &mut random::rng(req.seed))),
    }
}

/// The stacked-joint comparison, or a skipped entry when it exceeds the cap.
fn gauss_batch(
    cat: &Gauss,
    hmm: &HmmSpec<GaussMap>,
    obs: &[DVector<f64>],
    tol: f64,
) -> Result<Value> {
    let stacked: usize = (0..=hmm.horizon())
        .map(|t| dim(hmm.state_space(t)) + dim(hmm.obs_space(t)))
        .sum();
    if stacked > cat.oracle_cap() {
        return Ok(check(
            "gauss-batch",
            true,
            json!({ "skipped": format!("stacked joint has dimension {stacked}, cap is {}", cat.oracle_cap()) }),
        ));
    }
    Ok(oracle_json(&gauss_batch_check(cat, hmm, obs, tol)?))
}

fn verify_model(req: &VerifyRequest, model: &Model, names: &Names) -> Result<Vec<Value>> {
    let tol = |default: f64| req.tolerance.unwrap_or(default);
    let opts = MarkovOptions {
        tol: tol(FINITE_TOL),
        seed: req.seed,
        ..MarkovOptions::default()
    };
    let mut rng = random::rng(req.seed);
    Ok(match (req.suite, model) {
        (Suite::Laws, Model::FinStoch(h)) => {
            let cat = req
                .tolerance
                .map_or_else(FinStoch::new, FinStoch::with_tolerance);
            let mut rep = check_laws(&cat, req.cases, &mut rng)?;
            rep.merge(check_model_laws(&cat, h)?);
            laws_json(&rep)
        }
        (Suite::Laws, Model::FinSetMulti(h)) => {
            let cat = FinSetMulti::new();
            let mut rep = check_laws(&cat, req.cases, &mut rng)?;
            rep.merge(check_model_laws(&cat, h)?);
            laws_json(&rep)
        }
        (Suite::Laws, Model::Gauss(h)) => {
            let cat = req.tolerance.map_or_else(Gauss::new, Gauss::with_tolerance);
            let mut rep = check_laws(&cat, req.cases, &mut rng)?;
            rep.merge(check_model_laws(&cat, h)?);
            laws_json(&rep)
        }
        (Suite::Markov, Model::FinStoch(h)) => {
            let cat = FinStoch::new();
            markov_json(&cat, &hmm_joint(&cat, h)?, &opts)?
        }
        (Suite::Markov, Model::FinSetMulti(h)) => {
            let cat = FinSetMulti::new();
            markov_json(&cat, &hmm_joint(&cat, h)?, &opts)?
        }
        (Suite::FilterOracle, Model::FinStoch(h)) => {
            vec![oracle_json(&filter_oracle_finite(
                &FinStoch::new(),
                h,
                tol(FINITE_TOL),
            )?)]
        }
        (Suite::FilterOracle, Model::FinSetMulti(h)) => vec![
            oracle_json(&filter_oracle_finite(
                &FinSetMulti::new(),
                h,
                tol(FINITE_TOL),
            )?),
            oracle_json(&possibilistic_oracle(h)?),
        ],
        (Suite::FilterOracle, Model::Gauss(h)) => {
            let cat = Gauss::new();
            let obs = gauss_observations(req, model, names, h)?;
            vec![
                oracle_json(&kalman_check(&cat, h, &obs, tol(KALMAN_TOL))?),
                gauss_batch(&cat, h, &obs, tol(GAUSS_SMOOTH_TOL))?,
            ]
        }
        (Suite::SmootherOracle, Model::FinStoch(h)) => {
            vec![oracle_json(&smoother_oracle_finite(
                &FinStoch::new(),
                h,
                tol(FINITE_TOL),
            )?)]
        }
        (Suite::SmootherOracle, Model::FinSetMulti(h)) => {
            vec![oracle_json(&smoother_oracle_finite(
                &FinSetMulti::new(),
                h,
                tol(FINITE_TOL),
            )?)]
        }
        (Suite::SmootherOracle, Model::Gauss(h)) => {
            let cat = Gauss::new();
            let obs = gauss_observations(req, model, names, h)?;
            vec![
                oracle_json(&rts_check(&cat, h, &obs, tol(GAUSS_SMOOTH_TOL))?),
                gauss_batch(&cat, h, &obs, tol(GAUSS_SMOOTH_TOL))?,
            ]
        }
        (Suite::FilterChain, Model::FinStoch(h)) => {
            let t = tol(FINITE_TOL);
            let r = verify_filter_markov_stoch(&FinStoch::new(), h, DEDUP_TOL)?;
            vec![
                check(
                    "filter-process",
                    r.deviation < t,
                    json!({ "max_deviation": r.deviation, "tol": t }),
                ),
                check(
                    "recursive-filter",
                    r.lambda_bf_deviation < t,
                    json!({ "max_deviation": r.lambda_bf_deviation, "tol": t }),
                ),
                check(
                    "observation-joint",
                    r.obs_joint_deviation < t,
                    json!({ "max_deviation": r.obs_joint_deviation, "tol": t }),
                ),
                check(
                    "chain-local",
                    r.markov_local_deviation < t,
                    json!({ "max_deviation": r.markov_local_deviation, "tol": t, "atlas_sizes": r.atlas_sizes }),
                ),
            ]
        }
        (Suite::FilterChain, Model::FinSetMulti(h)) => {
            let r = verify_filter_markov_multi(&FinSetMulti::new(), h)?;
            vec![
                check("filter-process", r.equal, json!({})),
                check(
                    "recursive-filter",
                    r.lambda_bf,
                    json!({ "everywhere": r.lambda_bf_everywhere }),
                ),
                check("observation-joint", r.obs_joint, json!({})),
            ]
        }
        (Suite::Markov | Suite::FilterChain, Model::Gauss(_)) => {
            return Err(Error::Unsupported(format!(
                "the {} suite needs a finite category",
                req.suite.as_str()
            )))
        }
    })
}

pub fn verify(req: &VerifyRequest) -> Result<Outcome> {
    let parts: Vec<&[u8]> = [req.model, req.observations]
        .into_iter()
        .flatten()
        .collect();
    let input_digest = digest(&parts);
    let (instance, checks) = match req.model.map(load_input).transpose()? {
        Some(Input::Model { model, names }) => {
            (model.instance(), verify_model(req, &model, &names)?)
        }
        Some(Input::Joint(joint)) => {
            if req.suite != Suite::Markov {
                return Err(Error::Validation {
                    location: "model.kind".into(),
                    message: "joint fixtures are only accepted by the markov suite".into(),
                });
            }
            let opts = MarkovOptions {
                tol: req.tolerance.unwrap_or(FINITE_TOL),
                seed: req.seed,
                ..MarkovOptions::default()
            };
            match joint {
                Joint::FinStoch(j) => (
                    Instance::FinStoch,
                    markov_json(&FinStoch::new(), &j, &opts)?,
                ),
                Joint::FinSetMulti(j) => (
                    Instance::FinSetMulti,
                    markov_json(&FinSetMulti::new(), &j, &opts)?,
                ),
            }
        }
        None => {
            if req.suite != Suite::Laws {
                return Err(Error::Validation {
                    location: "--model".into(),
                    message: format!("the {} suite needs a model", req.suite.as_str()),
                });
            }
            let instance: Instance = req
                .category
                .ok_or_else(|| Error::Validation {
                    location: "--category".into(),
                    message: "give a model or a category".into(),
                })?
                .parse()?;
            let mut rng = random::rng(req.seed);
            let rep = match instance {
                Instance::FinStoch => {
                    let cat = req
                        .tolerance
                        .map_or_else(FinStoch::new, FinStoch::with_tolerance);
                    check_laws(&cat, req.cases, &mut rng)?
                }
                Instance::FinSetMulti => check_laws(&FinSetMulti::new(), req.cases, &mut rng)?,
                Instance::Gauss => {
                    let cat = req.tolerance.map_or_else(Gauss::new, Gauss::with_tolerance);
                    check_laws(&cat, req.cases, &mut rng)?
                }
            };
            (instance, laws_json(&rep))
        }
    };
    let passed = checks.iter().all(|c| c["passed"] == json!(true));
    let mut r = header("verify", instance, &input_digest);
    r.insert("suite".into(), json!(req.suite.as_str()));
    r.insert("seed".into(), json!(req.seed));
    r.insert("passed".into(), json!(passed));
    r.insert("checks".into(), Value::Array(checks));
    Ok(Outcome {
        report: Value::Object(r),
        passed,
    })
}

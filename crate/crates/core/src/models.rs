//! Markov chains and hidden Markov models: specifications, explicit joint
//! states (the brute-force oracle), Markov-property checks and reversal.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::category::{MarkovCategory, Object, OutputPartition};
use crate::error::{Error, Result};
use crate::finite::{ci_deviation, Finite, Kernel, Semiring};

/// A finite-horizon Markov chain: `f_0: I -> X_0` and `f_t: X_{t-1} -> X_t`.
#[derive(Debug, Clone)]
pub struct ChainSpec<M> {
    kernels: Vec<M>,
    spaces: Vec<Object>,
}

fn single_factor(obj: &Object, what: &str) -> Result<()> {
    if obj.arity() != 1 {
        return Err(Error::validation(
            what,
            format!("expected a single space, got {obj}"),
        ));
    }
    Ok(())
}

impl<M: Clone> ChainSpec<M> {
    /// `kernels[0]` is the initial state, `kernels[t]` the transition into `X_t`.
    pub fn new<C: MarkovCategory<Morphism = M>>(cat: &C, kernels: Vec<M>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(Error::validation(
                "transitions",
                "need at least an initial state",
            ));
        }
        let mut spaces: Vec<Object> = Vec::with_capacity(kernels.len());
        for (t, f) in kernels.iter().enumerate() {
            let loc = format!("transitions[{t}]");
            let expected = if t == 0 {
                Object::unit()
            } else {
                spaces[t - 1].clone()
            };
            if *cat.source(f) != expected {
                return Err(Error::validation(
                    loc,
                    format!("source {} does not match {}", cat.source(f), expected),
                ));
            }
            single_factor(cat.target(f), &loc)?;
            spaces.push(cat.target(f).clone());
        }
        Ok(ChainSpec { kernels, spaces })
    }

    pub fn horizon(&self) -> usize {
        self.kernels.len() - 1
    }

    /// `f_t`, with `f_0` the initial state.
    pub fn kernel(&self, t: usize) -> &M {
        &self.kernels[t]
    }

    pub fn kernels(&self) -> &[M] {
        &self.kernels
    }

    pub fn space(&self, t: usize) -> &Object {
        &self.spaces[t]
    }

    /// The chain up to time `t`.
    pub fn truncate(&self, t: usize) -> Self {
        ChainSpec {
            kernels: self.kernels[..=t].to_vec(),
            spaces: self.spaces[..=t].to_vec(),
        }
    }
}

/// A hidden Markov model: a chain plus observation kernels `g_t: X_t -> Y_t`.
#[derive(Debug, Clone)]
pub struct HmmSpec<M> {
    chain: ChainSpec<M>,
    observations: Vec<M>,
    obs_spaces: Vec<Object>,
}

impl<M: Clone> HmmSpec<M> {
    pub fn new<C: MarkovCategory<Morphism = M>>(
        cat: &C,
        transitions: Vec<M>,
        observations: Vec<M>,
    ) -> Result<Self> {
        let chain = ChainSpec::new(cat, transitions)?;
        if observations.len() != chain.horizon() + 1 {
            return Err(Error::validation(
                "observations",
                format!(
                    "{} observation kernels for horizon {}",
                    observations.len(),
                    chain.horizon()
                ),
            ));
        }
        let mut obs_spaces = Vec::with_capacity(observations.len());
        for (t, g) in observations.iter().enumerate() {
            let loc = format!("observations[{t}]");
            if cat.source(g) != chain.space(t) {
                return Err(Error::validation(
                    loc,
                    format!("source {} does not match {}", cat.source(g), chain.space(t)),
                ));
            }
            single_factor(cat.target(g), &loc)?;
            obs_spaces.push(cat.target(g).clone());
        }
        Ok(HmmSpec {
            chain,
            observations,
            obs_spaces,
        })
    }

    pub fn horizon(&self) -> usize {
        self.chain.horizon()
    }

    pub fn chain(&self) -> &ChainSpec<M> {
        &self.chain
    }

    pub fn f(&self, t: usize) -> &M {
        self.chain.kernel(t)
    }

    pub fn g(&self, t: usize) -> &M {
        &self.observations[t]
    }

    pub fn observations(&self) -> &[M] {
        &self.observations
    }

    pub fn state_space(&self, t: usize) -> &Object {
        self.chain.space(t)
    }

    pub fn obs_space(&self, t: usize) -> &Object {
        &self.obs_spaces[t]
    }

    pub fn truncate(&self, t: usize) -> Self {
        HmmSpec {
            chain: self.chain.truncate(t),
            observations: self.observations[..=t].to_vec(),
            obs_spaces: self.obs_spaces[..=t].to_vec(),
        }
    }
}

/// A variable of a chain or HMM joint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X(usize),
    Y(usize),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X(t) => write!(f, "X{t}"),
            Var::Y(t) => write!(f, "Y{t}"),
        }
    }
}

/// An explicit joint state with one output factor per variable.
///
/// Chains use the layout `X_0, ..., X_n`; HMMs interleave `X_0, Y_0, ..., X_n, Y_n`.
#[derive(Debug, Clone)]
pub struct JointState<M> {
    pub state: M,
    pub layout: Vec<Var>,
}

impl<M> JointState<M> {
    pub fn chain_layout(n: usize) -> Vec<Var> {
        (0..=n).map(Var::X).collect()
    }

    pub fn hmm_layout(n: usize) -> Vec<Var> {
        (0..=n).flat_map(|t| [Var::X(t), Var::Y(t)]).collect()
    }

    pub fn index_of(&self, v: Var) -> Result<usize> {
        self.layout
            .iter()
            .position(|&w| w == v)
            .ok_or_else(|| Error::domain(format!("joint has no variable {v}")))
    }

    pub fn indices(&self, vars: &[Var]) -> Result<Vec<usize>> {
        vars.iter().map(|&v| self.index_of(v)).collect()
    }

    /// Largest time index in the layout.
    pub fn horizon(&self) -> usize {
        self.layout
            .iter()
            .map(|v| match v {
                Var::X(t) | Var::Y(t) => *t,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn has_observations(&self) -> bool {
        self.layout.iter().any(|v| matches!(v, Var::Y(_)))
    }
}

/// The joint state of a chain, built by the factorization.
pub fn chain_joint<C: MarkovCategory>(
    cat: &C,
    spec: &ChainSpec<C::Morphism>,
) -> Result<JointState<C::Morphism>> {
    let all = (0..=spec.horizon()).fold(Object::unit(), |o, t| o.tensor(spec.space(t)));
    cat.check_cap("chain joint", &all)?;
    let mut p = spec.kernel(0).clone();
    for t in 1..=spec.horizon() {
        p = cat.append_output(&p, t - 1, spec.kernel(t))?;
    }
    Ok(JointState {
        state: p,
        layout: JointState::<C::Morphism>::chain_layout(spec.horizon()),
    })
}

/// The joint state of an HMM on `X_0, Y_0, ..., X_n, Y_n`.
pub fn hmm_joint<C: MarkovCategory>(
    cat: &C,
    spec: &HmmSpec<C::Morphism>,
) -> Result<JointState<C::Morphism>> {
    let all = (0..=spec.horizon()).fold(Object::unit(), |o, t| {
        o.tensor(spec.state_space(t)).tensor(spec.obs_space(t))
    });
    cat.check_cap("hmm joint", &all)?;
    let mut p = cat.copy_then(spec.f(0), spec.g(0))?;
    for t in 1..=spec.horizon() {
        p = cat.append_output(&p, 2 * (t - 1), spec.f(t))?;
        p = cat.append_output(&p, 2 * t, spec.g(t))?;
    }
    Ok(JointState {
        state: p,
        layout: JointState::<C::Morphism>::hmm_layout(spec.horizon()),
    })
}

/// Result of conditioning a joint on observed values.
#[derive(Debug, Clone)]
pub struct Conditioned<M> {
    pub state: M,
    /// The observed values have probability zero (or lie outside the support).
    pub degenerate: bool,
}

/// Marginalize onto `targets ∪ given`, condition on `given` and plug in the values.
pub fn condition_joint<C: MarkovCategory>(
    cat: &C,
    joint: &JointState<C::Morphism>,
    targets: &[Var],
    given: &[(Var, C::Point)],
) -> Result<Conditioned<C::Morphism>> {
    let given_vars: Vec<Var> = given.iter().map(|(v, _)| *v).collect();
    let mut keep = joint.indices(targets)?;
    keep.extend(joint.indices(&given_vars)?);
    let m = cat.marginal(&joint.state, &keep)?;
    if given.is_empty() {
        return Ok(Conditioned {
            state: m,
            degenerate: false,
        });
    }
    let k = targets.len();
    let arity = keep.len();
    let mut points = Vec::with_capacity(given.len());
    let mut observed = cat.identity(&Object::unit());
    for (i, (_, value)) in given.iter().enumerate() {
        let p = cat.point(&cat.target(&m).factor(k + i), value)?;
        observed = cat.tensor(&observed, &p);
        points.push(p);
    }
    let evidence = cat.marginal(&m, &(k..arity).collect::<Vec<_>>())?;
    let degenerate = !cat.dominated(&observed, &evidence)?;
    let part = OutputPartition::new((0..k).collect(), (k..arity).collect(), arity)?;
    let c = cat.conditional(&m, &part)?;
    Ok(Conditioned {
        state: cat.instantiate(&c, &points)?,
        degenerate,
    })
}

/// The reverse chain `f†` of a stationary pair `(f, f0)`.
pub fn reverse_chain<C: MarkovCategory>(
    cat: &C,
    f: &C::Morphism,
    f0: &C::Morphism,
) -> Result<C::Morphism> {
    if cat.source(f) != cat.target(f) {
        return Err(Error::domain(
            "reverse_chain: kernel must be an endomorphism",
        ));
    }
    let pushed = cat.compose(f0, f)?;
    if !cat.approx_eq(&pushed, f0) {
        let dev = cat.deviation(&pushed, f0).unwrap_or(f64::INFINITY);
        return Err(Error::domain(format!(
            "reverse_chain: initial state is not stationary (deviation {dev:e})"
        )));
    }
    cat.bayes_inverse(f, f0)
}

/// Kernels of a chain recovered from its joint by conditioning.
pub fn extract_chain<C: MarkovCategory>(
    cat: &C,
    joint: &JointState<C::Morphism>,
) -> Result<ChainSpec<C::Morphism>> {
    let n = joint.horizon();
    let mut kernels = vec![cat.marginal(&joint.state, &[joint.index_of(Var::X(0))?])?];
    for t in 1..=n {
        let pair = cat.marginal(&joint.state, &joint.indices(&[Var::X(t), Var::X(t - 1)])?)?;
        kernels.push(cat.conditional(&pair, &OutputPartition::new(vec![0], vec![1], 2)?)?);
    }
    ChainSpec::new(cat, kernels)
}

/// Kernels of an HMM recovered from its joint by conditioning.
pub fn extract_hmm<C: MarkovCategory>(
    cat: &C,
    joint: &JointState<C::Morphism>,
) -> Result<HmmSpec<C::Morphism>> {
    let chain = extract_chain(cat, joint)?;
    let mut observations = Vec::new();
    for t in 0..=joint.horizon() {
        let pair = cat.marginal(&joint.state, &joint.indices(&[Var::Y(t), Var::X(t)])?)?;
        observations.push(cat.conditional(&pair, &OutputPartition::new(vec![0], vec![1], 2)?)?);
    }
    HmmSpec::new(cat, chain.kernels().to_vec(), observations)
}

/// Distance between a joint and the joint rebuilt from its extracted kernels.
pub fn factorization_deviation<C: MarkovCategory>(
    cat: &C,
    joint: &JointState<C::Morphism>,
) -> Result<f64> {
    let rebuilt = if joint.has_observations() {
        hmm_joint(cat, &extract_hmm(cat, joint)?)?
    } else {
        chain_joint(cat, &extract_chain(cat, joint)?)?
    };
    cat.deviation(&rebuilt.state, &joint.state)
        .ok_or_else(|| Error::domain("rebuilt joint has a different shape"))
}

/// Shift one entry of a finite joint and renormalize.
pub fn perturb_joint(
    joint: &JointState<Kernel<f64>>,
    entry: usize,
    delta: f64,
) -> Result<JointState<Kernel<f64>>> {
    let mut v = joint.state.values().to_vec();
    if entry >= v.len() {
        return Err(Error::domain(format!(
            "entry {entry} outside a joint of {} entries",
            v.len()
        )));
    }
    v[entry] = (v[entry] + delta).max(0.0);
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    Ok(JointState {
        state: Kernel::state(joint.state.target().clone(), v, 1e-9)?,
        layout: joint.layout.clone(),
    })
}

/// The Markov-property lists that can be checked on a joint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MarkovProperty {
    ChainLocal,
    ChainGlobal,
    HmmBackward,
    HmmLocal,
    HmmGlobal,
}

impl MarkovProperty {
    pub const ALL: [MarkovProperty; 5] = [
        MarkovProperty::ChainLocal,
        MarkovProperty::ChainGlobal,
        MarkovProperty::HmmBackward,
        MarkovProperty::HmmLocal,
        MarkovProperty::HmmGlobal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MarkovProperty::ChainLocal => "chain-local",
            MarkovProperty::ChainGlobal => "chain-global",
            MarkovProperty::HmmBackward => "hmm-backward",
            MarkovProperty::HmmLocal => "hmm-local",
            MarkovProperty::HmmGlobal => "hmm-global",
        }
    }

    pub fn needs_observations(self) -> bool {
        !matches!(
            self,
            MarkovProperty::ChainLocal | MarkovProperty::ChainGlobal
        )
    }
}

impl fmt::Display for MarkovProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MarkovProperty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MarkovProperty::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::domain(format!("unknown Markov property '{s}'")))
    }
}

/// `left ⊥ right | given`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CiStatement {
    pub left: Vec<Var>,
    pub given: Vec<Var>,
    pub right: Vec<Var>,
}

fn fmt_vars(vars: &[Var]) -> String {
    if vars.is_empty() {
        return "∅".into();
    }
    vars.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl fmt::Display for CiStatement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ⊥ {} | {}",
            fmt_vars(&self.left),
            fmt_vars(&self.right),
            fmt_vars(&self.given)
        )
    }
}

#[derive(Debug, Clone)]
pub struct CiCheck {
    pub property: MarkovProperty,
    pub statement: CiStatement,
    pub deviation: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Default)]
pub struct MarkovReport {
    pub checks: Vec<CiCheck>,
    /// Properties whose statement list was subsampled rather than enumerated.
    pub sampled: Vec<MarkovProperty>,
}

impl MarkovReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CiCheck> {
        self.checks.iter().filter(|c| !c.holds)
    }

    pub fn max_deviation(&self) -> f64 {
        self.checks.iter().map(|c| c.deviation).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MarkovOptions {
    pub tol: f64,
    pub seed: u64,
    /// Assignment spaces up to this size are enumerated exhaustively.
    pub exhaustive_limit: usize,
    /// Number of statements drawn when the space is too large.
    pub sample_budget: usize,
}

impl Default for MarkovOptions {
    fn default() -> Self {
        MarkovOptions {
            tol: 1e-12,
            seed: 0,
            exhaustive_limit: 4096,
            sample_budget: 256,
        }
    }
}

/// The statements of a list for horizon `n`, and whether they were sampled.
pub fn markov_statements(
    which: MarkovProperty,
    n: usize,
    opts: &MarkovOptions,
) -> (Vec<CiStatement>, bool) {
    let xs = |r: std::ops::Range<usize>| r.map(Var::X).collect::<Vec<_>>();
    let ys = |r: std::ops::Range<usize>| r.map(Var::Y).collect::<Vec<_>>();
    match which {
        MarkovProperty::ChainLocal => (
            (2..=n)
                .map(|t| CiStatement {
                    left: vec![Var::X(t)],
                    given: vec![Var::X(t - 1)],
                    right: xs(0..t - 1),
                })
                .collect(),
            false,
        ),
        MarkovProperty::HmmBackward => {
            let mut out = Vec::new();
            for t in 1..=n {
                let mut right = xs(0..t - 1);
                right.extend(ys(0..t));
                out.push(CiStatement {
                    left: vec![Var::X(t)],
                    given: vec![Var::X(t - 1)],
                    right,
                });
                let mut right = ys(0..t);
                right.extend(xs(0..t));
                out.push(CiStatement {
                    left: vec![Var::Y(t)],
                    given: vec![Var::X(t)],
                    right,
                });
            }
            (out, false)
        }
        MarkovProperty::HmmLocal => {
            let mut out = Vec::new();
            for t in 1..=n {
                let mut right = xs(0..t - 1);
                right.extend(ys(0..t));
                out.push(CiStatement {
                    left: vec![Var::X(t)],
                    given: vec![Var::X(t - 1)],
                    right,
                });
            }
            for t in 0..=n {
                let mut right: Vec<Var> = (0..=n).filter(|&s| s != t).map(Var::X).collect();
                right.extend((0..=n).filter(|&s| s != t).map(Var::Y));
                if right.is_empty() {
                    continue;
                }
                out.push(CiStatement {
                    left: vec![Var::Y(t)],
                    given: vec![Var::X(t)],
                    right,
                });
            }
            (out, false)
        }
        MarkovProperty::ChainGlobal => separated_statements(n, false, opts),
        MarkovProperty::HmmGlobal => separated_statements(n, true, opts),
    }
}

/// Side of a variable in a separation statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Role {
    Left,
    Given,
    Right,
    Absent,
}

const ROLES: [Role; 4] = [Role::Left, Role::Given, Role::Right, Role::Absent];

/// Build the statement for a role assignment if it is a valid separation.
///
/// `roles[..=n]` are the `X` roles and `roles[n+1..]` the `Y` roles. Every
/// left/right pair must have a conditioned state index `s` with
/// `min ≤ s ≤ max`; since the sets are disjoint this makes `s` strictly
/// between two state indices and allows `s` to coincide with the time of an
/// observation.
fn statement_for(roles: &[Role], n: usize) -> Option<CiStatement> {
    let var = |i: usize| if i <= n { Var::X(i) } else { Var::Y(i - n - 1) };
    let time = |i: usize| if i <= n { i } else { i - n - 1 };
    let pick = |r: Role| -> Vec<usize> { (0..roles.len()).filter(|&i| roles[i] == r).collect() };
    let (left, given, right) = (pick(Role::Left), pick(Role::Given), pick(Role::Right));
    if left.is_empty() || right.is_empty() {
        return None;
    }
    let blockers: Vec<usize> = given.iter().filter(|&&i| i <= n).copied().collect();
    for &a in &left {
        for &b in &right {
            let (lo, hi) = (time(a).min(time(b)), time(a).max(time(b)));
            if !blockers.iter().any(|&s| lo <= s && s <= hi) {
                return None;
            }
        }
    }
    Some(CiStatement {
        left: left.into_iter().map(var).collect(),
        given: given.into_iter().map(var).collect(),
        right: right.into_iter().map(var).collect(),
    })
}

fn separated_statements(
    n: usize,
    with_obs: bool,
    opts: &MarkovOptions,
) -> (Vec<CiStatement>, bool) {
    let vars = if with_obs { 2 * (n + 1) } else { n + 1 };
    let space = 4usize.checked_pow(vars as u32).unwrap_or(usize::MAX);
    let mut out = Vec::new();
    if space <= opts.exhaustive_limit {
        let mut roles = vec![Role::Left; vars];
        for code in 0..space {
            let mut c = code;
            for r in roles.iter_mut() {
                *r = ROLES[c % 4];
                c /= 4;
            }
            if let Some(s) = statement_for(&roles, n) {
                out.push(s);
            }
        }
        return (out, false);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut seen = HashSet::new();
    let mut attempts = 0;
    while out.len() < opts.sample_budget && attempts < 200 * opts.sample_budget {
        attempts += 1;
        let roles: Vec<Role> = (0..vars).map(|_| ROLES[rng.random_range(0..4)]).collect();
        if let Some(s) = statement_for(&roles, n) {
            if seen.insert(s.clone()) {
                out.push(s);
            }
        }
    }
    (out, true)
}

/// Evaluate the listed Markov properties on a finite joint.
pub fn check_markov_properties<S: Semiring>(
    cat: &Finite<S>,
    joint: &JointState<Kernel<S>>,
    which: &[MarkovProperty],
    opts: &MarkovOptions,
) -> Result<MarkovReport> {
    cat.check_cap("markov check", cat.target(&joint.state))?;
    let n = joint.horizon();
    let mut report = MarkovReport::default();
    for &prop in which {
        if prop.needs_observations() && !joint.has_observations() {
            return Err(Error::domain(format!(
                "{prop} needs a joint with observation factors"
            )));
        }
        let (statements, sampled) = markov_statements(prop, n, opts);
        if sampled {
            report.sampled.push(prop);
        }
        for statement in statements {
            let groups = [
                joint.indices(&statement.left)?,
                joint.indices(&statement.given)?,
                joint.indices(&statement.right)?,
            ];
            let grouped = cat.regroup(&joint.state, &groups)?;
            let deviation = ci_deviation(&grouped)?;
            report.checks.push(CiCheck {
                property: prop,
                statement,
                deviation,
                holds: deviation <= opts.tol,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finsetmulti::{self, FinSetMulti};
    use crate::finstoch::{self, distribution, FinStoch};
    use crate::gauss::{Gauss, GaussMap};
    use nalgebra::DVector;

    fn two_state_chain() -> ChainSpec<Kernel<f64>> {
        let cat = FinStoch::new();
        ChainSpec::new(
            &cat,
            vec![
                distribution(&[1.0, 0.0]).unwrap(),
                finstoch::validate(&[vec![0.5, 0.3], vec![0.5, 0.7]]).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn chain_joint_by_hand() {
        let cat = FinStoch::new();
        let j = chain_joint(&cat, &two_state_chain()).unwrap();
        assert_eq!(j.state.values(), &[0.5, 0.5, 0.0, 0.0]);
        let j0 = chain_joint(&cat, &two_state_chain().truncate(0)).unwrap();
        assert_eq!(j0.state.values(), &[1.0, 0.0]);
    }

    #[test]
    fn possibilistic_chain_lists_trajectories() {
        let cat = FinSetMulti::new();
        let spec = ChainSpec::new(
            &cat,
            vec![
                finsetmulti::subset_state(2, &[0]).unwrap(),
                finsetmulti::validate(&[vec![true, false], vec![true, true]]).unwrap(),
                finsetmulti::validate(&[vec![true, false], vec![true, true]]).unwrap(),
            ],
        )
        .unwrap();
        let j = chain_joint(&cat, &spec).unwrap();
        // trajectories from 0 with 0 -> {0,1}, 1 -> {1}
        let possible: Vec<usize> = (0..8).filter(|&i| j.state.values()[i]).collect();
        assert_eq!(possible, vec![0b000, 0b001, 0b011]);
    }

    #[test]
    fn identity_observations_sit_on_diagonal() {
        let cat = FinStoch::new();
        let id = cat.identity(&Object::single(2));
        let spec = HmmSpec::new(
            &cat,
            vec![
                distribution(&[0.3, 0.7]).unwrap(),
                finstoch::validate(&[vec![0.9, 0.2], vec![0.1, 0.8]]).unwrap(),
            ],
            vec![id.clone(), id],
        )
        .unwrap();
        let j = hmm_joint(&cat, &spec).unwrap();
        for (i, &v) in j.state.values().iter().enumerate() {
            let d = crate::finite::unflatten(i, &[2, 2, 2, 2]);
            if d[0] != d[1] || d[2] != d[3] {
                assert_eq!(v, 0.0);
            }
        }
        let report = check_markov_properties(
            &cat,
            &j,
            &[
                MarkovProperty::HmmBackward,
                MarkovProperty::HmmLocal,
                MarkovProperty::HmmGlobal,
            ],
            &MarkovOptions::default(),
        )
        .unwrap();
        assert!(report.all_hold());
    }

    #[test]
    fn gauss_hmm_joint_is_assembled_blockwise() {
        let cat = Gauss::new();
        let spec = HmmSpec::new(
            &cat,
            vec![
                GaussMap::scalar_state(0.0, 1.0).unwrap(),
                GaussMap::scalar(1.0, 0.0, 1.0).unwrap(),
            ],
            vec![
                GaussMap::scalar(1.0, 0.0, 1.0).unwrap(),
                GaussMap::scalar(1.0, 0.0, 1.0).unwrap(),
            ],
        )
        .unwrap();
        let j = hmm_joint(&cat, &spec).unwrap();
        let c = &j.state.cov;
        // X0 var 1, Y0 var 2, X1 var 2, Y1 var 3, cov(X0, X1) = 1
        for (i, v) in [(0, 1.0), (1, 2.0), (2, 2.0), (3, 3.0)] {
            assert!((c[(i, i)] - v).abs() < 1e-12);
        }
        assert!((c[(0, 2)] - 1.0).abs() < 1e-12);
        let post = condition_joint(
            &cat,
            &j,
            &[Var::X(1)],
            &[
                (Var::Y(0), DVector::from_element(1, 1.0)),
                (Var::Y(1), DVector::from_element(1, 1.0)),
            ],
        )
        .unwrap();
        assert!((post.state.mean[0] - 0.8).abs() < 1e-12);
        assert!((post.state.cov[(0, 0)] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn condition_joint_is_bayes_rule() {
        let cat = FinStoch::new();
        let spec = HmmSpec::new(
            &cat,
            vec![distribution(&[0.5, 0.5]).unwrap()],
            vec![finstoch::validate(&[vec![0.9, 0.2], vec![0.1, 0.8]]).unwrap()],
        )
        .unwrap();
        let j = hmm_joint(&cat, &spec).unwrap();
        let none = condition_joint(&cat, &j, &[Var::X(0)], &[]).unwrap();
        assert_eq!(none.state.values(), &[0.5, 0.5]);
        let post = condition_joint(&cat, &j, &[Var::X(0)], &[(Var::Y(0), 0)]).unwrap();
        assert!((post.state.values()[0] - 0.9 / 1.1).abs() < 1e-12);
        assert!(!post.degenerate);
    }

    #[test]
    fn reverse_chain_examples() {
        let cat = FinStoch::new();
        let f = finstoch::validate(&[vec![0.9, 0.2], vec![0.1, 0.8]]).unwrap();
        let f0 = distribution(&[2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let r = reverse_chain(&cat, &f, &f0).unwrap();
        assert!(cat.approx_eq(&cat.compose(&f0, &r).unwrap(), &f0));

        let sym = finstoch::validate(&[vec![0.7, 0.3], vec![0.3, 0.7]]).unwrap();
        let u = distribution(&[0.5, 0.5]).unwrap();
        assert!(cat.approx_eq(&reverse_chain(&cat, &sym, &u).unwrap(), &sym));

        let perm = Kernel::from_function(Object::single(3), Object::single(3), |x| (x + 1) % 3);
        let inv = Kernel::from_function(Object::single(3), Object::single(3), |x| (x + 2) % 3);
        let u3 = distribution(&[1.0 / 3.0; 3]).unwrap();
        assert!(cat.approx_eq(&reverse_chain(&cat, &perm, &u3).unwrap(), &inv));

        assert!(reverse_chain(&cat, &f, &u).is_err());
    }

    #[test]
    fn global_rule_rejects_adjacent_mixed_pairs() {
        // X0 and Y0 are never separated
        let n = 1;
        let roles = [Role::Left, Role::Absent, Role::Right, Role::Absent];
        assert!(statement_for(&roles, n).is_none());
        // X0 ⊥ Y1 | X1
        let roles = [Role::Left, Role::Given, Role::Absent, Role::Right];
        assert!(statement_for(&roles, n).is_some());
    }

    #[test]
    fn statement_lists_are_deterministic() {
        let opts = MarkovOptions::default();
        let (a, sa) = markov_statements(MarkovProperty::HmmGlobal, 4, &opts);
        let (b, _) = markov_statements(MarkovProperty::HmmGlobal, 4, &opts);
        assert!(sa);
        assert_eq!(a, b);
        let (c, sc) = markov_statements(MarkovProperty::ChainGlobal, 4, &opts);
        assert!(!sc && !c.is_empty());
    }

    #[test]
    fn joints_pass_and_perturbations_fail() {
        let mut rng = crate::random::rng(11);
        let shape = crate::random::Shape {
            horizon: 2,
            max_state: 3,
            max_obs: 3,
            joint_cap: 1_000_000,
        };
        let cat = FinStoch::new();
        let hmm = crate::random::finstoch_hmm(&shape, 0.0, &mut rng);
        let joint = hmm_joint(&cat, &hmm).unwrap();
        let opts = MarkovOptions::default();
        let rep = check_markov_properties(&cat, &joint, &MarkovProperty::ALL, &opts).unwrap();
        assert!(rep.all_hold(), "{:?}", rep.failures().next());
        let bumped = perturb_joint(&joint, 0, 0.05).unwrap();
        let rep = check_markov_properties(&cat, &bumped, &MarkovProperty::ALL, &opts).unwrap();
        assert!(!rep.all_hold());

        let multi = FinSetMulti::new();
        let nfa = crate::random::nfa(&shape, 0.4, &mut rng);
        let joint = hmm_joint(&multi, &nfa).unwrap();
        let rep = check_markov_properties(&multi, &joint, &MarkovProperty::ALL, &opts).unwrap();
        assert!(rep.all_hold(), "{:?}", rep.failures().next());
    }
}

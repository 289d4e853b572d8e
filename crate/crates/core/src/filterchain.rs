//! The filter process (the sequence of posteriors) as a Markov chain.
//!
//! In FinSetMulti this is built from genuine power objects: update maps
//! `u_t`, their deterministic counterparts, the transitions `h_t` and the
//! process `λ_n ∘ p^Y`. FinStoch has no finite distribution objects, so the
//! process is realized on the finite set of posteriors reachable from
//! positive-probability observation prefixes (the atlas).

use std::cmp::Ordering;

use crate::category::{MarkovCategory, Object, OutputPartition, Representable};
use crate::error::{Error, Result};
use crate::filtering::{filter_recursive_kernels, update};
use crate::finite::{cardinality, flatten, Kernel};
use crate::finsetmulti::{FinSetMulti, MultiKernel, PowerObject};
use crate::finstoch::{FinStoch, StochasticKernel};
use crate::models::{
    chain_joint, check_markov_properties, hmm_joint, ChainSpec, HmmSpec, JointState, MarkovOptions,
    MarkovProperty, Var,
};

/// Largest state space for which power objects are built here.
pub const FILTERCHAIN_POWER_CAP: usize = 8;

/// Default distance below which two posteriors are one atlas atom.
pub const DEDUP_TOL: f64 = 1e-9;

fn power(hmm: &HmmSpec<MultiKernel>, t: usize) -> Result<PowerObject> {
    PowerObject::new(cardinality(hmm.state_space(t)), FILTERCHAIN_POWER_CAP)
}

/// `u_t: PX_{t-1} ⊗ Y_t -> X_t`, with `u_0 = B_0: Y_0 -> X_0`.
pub fn build_update_map(
    cat: &FinSetMulti,
    hmm: &HmmSpec<MultiKernel>,
    t: usize,
) -> Result<MultiKernel> {
    if t > hmm.horizon() {
        return Err(Error::domain(format!(
            "time {t} beyond horizon {}",
            hmm.horizon()
        )));
    }
    power(hmm, t)?;
    if t == 0 {
        return cat.bayes_inverse(hmm.g(0), hmm.f(0));
    }
    power(hmm, t - 1)?;
    let samp = cat.samp(hmm.state_space(t - 1))?;
    let predicted = cat.compose(&samp, hmm.f(t))?;
    let joint = cat.copy_then(&predicted, hmm.g(t))?;
    cat.conditional(&joint, &OutputPartition::new(vec![0], vec![1], 2)?)
}

/// `h_t: PX_{t-1} -> PX_t`, with `h_0 = u_0♯ g_0 f_0`.
pub fn build_filter_transition(
    cat: &FinSetMulti,
    hmm: &HmmSpec<MultiKernel>,
    t: usize,
) -> Result<MultiKernel> {
    let u = cat.sharp(&build_update_map(cat, hmm, t)?)?;
    if t == 0 {
        let obs = cat.compose(hmm.f(0), hmm.g(0))?;
        return cat.compose(&obs, &u);
    }
    let px = power(hmm, t - 1)?.object();
    let samp = cat.samp(hmm.state_space(t - 1))?;
    let obs = cat.compose(&cat.compose(&samp, hmm.f(t))?, hmm.g(t))?;
    let with_obs = cat.copy_then(&cat.identity(&px), &obs)?;
    cat.compose(&with_obs, &u)
}

/// The observation process `p^Y` on `Y_0 ⊗ ... ⊗ Y_t`.
pub fn observation_process<C: MarkovCategory>(
    cat: &C,
    hmm: &HmmSpec<C::Morphism>,
    t: usize,
) -> Result<C::Morphism> {
    let joint = hmm_joint(cat, &hmm.truncate(t))?;
    let ys: Vec<Var> = (0..=t).map(Var::Y).collect();
    cat.marginal(&joint.state, &joint.indices(&ys)?)
}

/// `λ_n ∘ p^Y` on `PX_0 ⊗ ... ⊗ PX_n`, consuming one observation per step.
pub fn filter_process_multi(cat: &FinSetMulti, hmm: &HmmSpec<MultiKernel>) -> Result<MultiKernel> {
    let n = hmm.horizon();
    let mut s = observation_process(cat, hmm, n)?;
    let b0 = cat.sharp(&build_update_map(cat, hmm, 0)?)?;
    s = cat.apply_at(&s, 0, &b0)?;
    for t in 1..=n {
        let u = cat.sharp(&build_update_map(cat, hmm, t)?)?;
        let px = cat.target(&s).factor(t - 1);
        let carrier = cat.target(&s).tensor(&px);
        cat.check_cap("filter process", &carrier)?;
        let doubled = cat.apply_at(&s, t - 1, &cat.copy(&px))?;
        s = cat.apply_at(&doubled, t, &u)?;
    }
    Ok(s)
}

/// Evaluate `λ_t` at one observation sequence: the subsets `S_0..S_t`.
fn lambda_at(sharps: &[MultiKernel], obs: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(obs.len());
    for (t, &y) in obs.iter().enumerate() {
        let col = if t == 0 {
            y
        } else {
            out[t - 1] * sharps[t].source().factors()[1] + y
        };
        out.push(sharps[t].support(col)[0]);
    }
    out
}

/// Largest deviation of `p^Y_[t+1]` from `p^Y_[t]` extended by `g_{t+1} f_{t+1} B_t`.
pub fn obs_joint_deviation<C: MarkovCategory>(cat: &C, hmm: &HmmSpec<C::Morphism>) -> Result<f64> {
    let n = hmm.horizon();
    let filters = filter_recursive_kernels(cat, hmm, n)?;
    let mut worst: f64 = 0.0;
    let mut prev = observation_process(cat, hmm, 0)?;
    let direct = cat.compose(hmm.f(0), hmm.g(0))?;
    worst = worst.max(cat.deviation(&prev, &direct).unwrap_or(f64::INFINITY));
    for t in 0..n {
        let next = observation_process(cat, hmm, t + 1)?;
        let step = cat.compose(&cat.compose(&filters[t], hmm.f(t + 1))?, hmm.g(t + 1))?;
        let built = cat.copy_then(&prev, &step)?;
        worst = worst.max(cat.deviation(&next, &built).unwrap_or(f64::INFINITY));
        prev = next;
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct MultiChainReport {
    /// The filter process equals the chain generated by `h_0..h_n`.
    pub equal: bool,
    /// Last output of `λ_t` equals `B_t♯` on every possible observation prefix.
    pub lambda_bf: bool,
    /// ... and on every observation prefix, possible or not.
    pub lambda_bf_everywhere: bool,
    pub obs_joint: bool,
    pub transitions: Vec<MultiKernel>,
    pub process: MultiKernel,
}

impl MultiChainReport {
    pub fn passed(&self) -> bool {
        self.equal && self.lambda_bf && self.obs_joint
    }
}

pub fn verify_filter_markov_multi(
    cat: &FinSetMulti,
    hmm: &HmmSpec<MultiKernel>,
) -> Result<MultiChainReport> {
    let n = hmm.horizon();
    let transitions = (0..=n)
        .map(|t| build_filter_transition(cat, hmm, t))
        .collect::<Result<Vec<_>>>()?;
    let chain = chain_joint(cat, &ChainSpec::new(cat, transitions.clone())?)?;
    let process = filter_process_multi(cat, hmm)?;
    let equal = cat.approx_eq(&process, &chain.state);

    let sharps = (0..=n)
        .map(|t| cat.sharp(&build_update_map(cat, hmm, t)?))
        .collect::<Result<Vec<_>>>()?;
    let filters = filter_recursive_kernels(cat, hmm, n)?;
    let mut lambda_bf = true;
    let mut lambda_bf_everywhere = true;
    for t in 0..=n {
        let b_sharp = cat.sharp(&filters[t])?;
        let p_y = observation_process(cat, hmm, t)?;
        let sizes: Vec<usize> = (0..=t).map(|s| cardinality(hmm.obs_space(s))).collect();
        for col in 0..b_sharp.cols() {
            let obs = crate::finite::unflatten(col, &sizes);
            let last = *lambda_at(&sharps[..=t], &obs)
                .last()
                .expect("t + 1 outputs");
            if b_sharp.support(col) != [last] {
                lambda_bf_everywhere = false;
                if p_y.values()[flatten(&obs, &sizes)] {
                    lambda_bf = false;
                }
            }
        }
    }
    let obs_joint = obs_joint_deviation(cat, hmm)? == 0.0;
    Ok(MultiChainReport {
        equal,
        lambda_bf,
        lambda_bf_everywhere,
        obs_joint,
        transitions,
        process,
    })
}

/// Distinct posteriors per time, reachable from positive-probability prefixes.
#[derive(Debug, Clone)]
pub struct PosteriorAtlas {
    pub tol: f64,
    /// `atoms[t][i]` is a posterior on `X_t`.
    pub atoms: Vec<Vec<Vec<f64>>>,
    /// Total prefix probability landing on each atom.
    pub weights: Vec<Vec<f64>>,
    /// Pairs of atoms closer than ten times the tolerance, per time.
    pub close_pairs: Vec<usize>,
    pub prefixes: Vec<Prefix>,
}

/// A positive-probability observation sequence of full length.
#[derive(Debug, Clone)]
pub struct Prefix {
    pub obs: Vec<usize>,
    pub prob: f64,
    /// Atom index of the posterior at each time.
    pub atoms: Vec<usize>,
    pub posteriors: Vec<Vec<f64>>,
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn nearest(atoms: &[Vec<f64>], v: &[f64]) -> (usize, f64) {
    atoms
        .iter()
        .enumerate()
        .map(|(i, a)| (i, linf(a, v)))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("atlas level is nonempty")
}

/// Enumerate every positive-probability observation sequence and collect the
/// filter posteriors along it.
pub fn build_atlas(
    cat: &FinStoch,
    hmm: &HmmSpec<StochasticKernel>,
    tol: f64,
) -> Result<PosteriorAtlas> {
    let n = hmm.horizon();
    let all_obs = (0..=n).fold(Object::unit(), |o, t| o.tensor(hmm.obs_space(t)));
    cat.check_cap("observation prefixes", &all_obs)?;

    struct Node {
        obs: Vec<usize>,
        prob: f64,
        posteriors: Vec<StochasticKernel>,
    }
    let mut frontier = vec![Node {
        obs: vec![],
        prob: 1.0,
        posteriors: vec![],
    }];
    let mut by_time: Vec<Vec<(Vec<f64>, f64)>> = vec![Vec::new(); n + 1];
    for t in 0..=n {
        let mut next = Vec::new();
        for node in frontier {
            let predicted = match node.posteriors.last() {
                None => hmm.f(0).clone(),
                Some(p) => cat.compose(p, hmm.f(t))?,
            };
            for y in 0..cardinality(hmm.obs_space(t)) {
                let step = update(cat, &predicted, hmm.g(t), &y)?;
                let w = step.weight.unwrap_or(0.0);
                if w <= 0.0 || step.degenerate {
                    continue;
                }
                let prob = node.prob * w;
                by_time[t].push((step.posterior.values().to_vec(), prob));
                let mut obs = node.obs.clone();
                obs.push(y);
                let mut posteriors = node.posteriors.clone();
                posteriors.push(step.posterior);
                next.push(Node {
                    obs,
                    prob,
                    posteriors,
                });
            }
        }
        frontier = next;
    }

    let mut atoms = Vec::with_capacity(n + 1);
    let mut weights = Vec::with_capacity(n + 1);
    let mut close_pairs = Vec::with_capacity(n + 1);
    for level in &by_time {
        let mut sorted: Vec<&Vec<f64>> = level.iter().map(|(p, _)| p).collect();
        sorted.sort_by(|a, b| lex(a, b));
        let mut reps: Vec<Vec<f64>> = Vec::new();
        for p in sorted {
            if !reps.iter().any(|r| linf(r, p) <= tol) {
                reps.push(p.clone());
            }
        }
        let mut w = vec![0.0; reps.len()];
        for (p, prob) in level {
            w[nearest(&reps, p).0] += prob;
        }
        let mut close = 0;
        for i in 0..reps.len() {
            for j in i + 1..reps.len() {
                if linf(&reps[i], &reps[j]) <= 10.0 * tol {
                    close += 1;
                }
            }
        }
        atoms.push(reps);
        weights.push(w);
        close_pairs.push(close);
    }

    let prefixes = frontier
        .into_iter()
        .map(|node| {
            let posteriors: Vec<Vec<f64>> = node
                .posteriors
                .iter()
                .map(|p| p.values().to_vec())
                .collect();
            let idx = posteriors
                .iter()
                .enumerate()
                .map(|(t, p)| nearest(&atoms[t], p).0)
                .collect();
            Prefix {
                obs: node.obs,
                prob: node.prob,
                atoms: idx,
                posteriors,
            }
        })
        .collect();

    Ok(PosteriorAtlas {
        tol,
        atoms,
        weights,
        close_pairs,
        prefixes,
    })
}

/// Transition kernels of the filter process on the atlas: from each atom,
/// predict, draw an observation from the predictive distribution and update.
pub fn atlas_transitions(
    cat: &FinStoch,
    hmm: &HmmSpec<StochasticKernel>,
    atlas: &PosteriorAtlas,
) -> Result<Vec<StochasticKernel>> {
    let n = hmm.horizon();
    let mut out = Vec::with_capacity(n + 1);
    for t in 0..=n {
        let to = &atlas.atoms[t];
        let sources: Vec<Option<&Vec<f64>>> = if t == 0 {
            vec![None]
        } else {
            atlas.atoms[t - 1].iter().map(Some).collect()
        };
        let mut data = Vec::with_capacity(sources.len() * to.len());
        for src in sources {
            let predicted = match src {
                None => hmm.f(0).clone(),
                Some(p) => {
                    let prior = Kernel::state(hmm.state_space(t - 1).clone(), p.clone(), 1e-9)?;
                    cat.compose(&prior, hmm.f(t))?
                }
            };
            let mut col = vec![0.0; to.len()];
            for y in 0..cardinality(hmm.obs_space(t)) {
                let step = update(cat, &predicted, hmm.g(t), &y)?;
                let w = step.weight.unwrap_or(0.0);
                if w <= 0.0 || step.degenerate {
                    continue;
                }
                let (i, d) = nearest(to, step.posterior.values());
                if d > 10.0 * atlas.tol {
                    return Err(Error::domain(format!(
                        "t={t}: updated posterior is {d:e} away from every atlas atom"
                    )));
                }
                col[i] += w;
            }
            data.extend(col);
        }
        let source = if t == 0 {
            Object::unit()
        } else {
            Object::single(atlas.atoms[t - 1].len())
        };
        out.push(Kernel::new(source, Object::single(to.len()), data, 1e-9)?);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct StochChainReport {
    /// Max deviation between the filter process and the chain generated by `h_t`.
    pub deviation: f64,
    /// Max distance between instantiated posteriors and the recursive filter kernel.
    pub lambda_bf_deviation: f64,
    pub obs_joint_deviation: f64,
    /// Chain-local Markov check on the filter-process joint.
    pub markov_local_deviation: f64,
    pub atlas_sizes: Vec<usize>,
    pub close_pairs: usize,
    pub total_weight: f64,
}

impl StochChainReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.deviation < tol
            && self.lambda_bf_deviation < tol
            && self.obs_joint_deviation < tol
            && self.markov_local_deviation < tol
    }
}

pub fn verify_filter_markov_stoch(
    cat: &FinStoch,
    hmm: &HmmSpec<StochasticKernel>,
    dedup_tol: f64,
) -> Result<StochChainReport> {
    let n = hmm.horizon();
    let atlas = build_atlas(cat, hmm, dedup_tol)?;
    let sizes: Vec<usize> = atlas.atoms.iter().map(|a| a.len()).collect();
    cat.check_cap("atlas joint", &Object::new(sizes.clone()))?;

    let transitions = atlas_transitions(cat, hmm, &atlas)?;
    let chain = chain_joint(cat, &ChainSpec::new(cat, transitions)?)?;

    let mut process = vec![0.0; sizes.iter().product()];
    for p in &atlas.prefixes {
        process[flatten(&p.atoms, &sizes)] += p.prob;
    }
    let total_weight: f64 = process.iter().sum();
    let process = Kernel::state(Object::new(sizes.clone()), process, 1e-9)?;
    let deviation = cat
        .deviation(&process, &chain.state)
        .unwrap_or(f64::INFINITY);

    let filters = filter_recursive_kernels(cat, hmm, n)?;
    let mut lambda_bf_deviation: f64 = 0.0;
    for p in &atlas.prefixes {
        for t in 0..=n {
            let obs_sizes: Vec<usize> = (0..=t).map(|s| cardinality(hmm.obs_space(s))).collect();
            let col = flatten(&p.obs[..=t], &obs_sizes);
            lambda_bf_deviation =
                lambda_bf_deviation.max(linf(filters[t].column(col), &p.posteriors[t]));
        }
    }

    let joint = JointState {
        state: process,
        layout: JointState::<StochasticKernel>::chain_layout(n),
    };
    let markov = check_markov_properties(
        cat,
        &joint,
        &[MarkovProperty::ChainLocal],
        &MarkovOptions::default(),
    )?;

    Ok(StochChainReport {
        deviation,
        lambda_bf_deviation,
        obs_joint_deviation: obs_joint_deviation(cat, hmm)?,
        markov_local_deviation: markov.max_deviation(),
        atlas_sizes: sizes,
        close_pairs: atlas.close_pairs.iter().sum(),
        total_weight,
    })
}

//! Cross-checks of the recursive algorithms against brute-force oracles.

use nalgebra::{DMatrix, DVector};

use crate::category::{MarkovCategory, Object, OutputPartition};
use crate::error::Result;
use crate::filtering::{filter_instantiated, filter_recursive_kernels, kalman_closed_form, update};
use crate::finite::{cardinality, flatten, unflatten, Finite, Kernel, Semiring};
use crate::finsetmulti::{FinSetMulti, MultiKernel};
use crate::gauss::{dim, relative_deviation, Gauss, GaussMap};
use crate::models::{condition_joint, hmm_joint, HmmSpec, JointState, Var};
use crate::smoothing::{
    fixed_interval_instantiated, forward_backward_instantiated, rts_closed_form, smoother_batch,
};

/// Agreement between two or more computations of the same quantity.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub name: String,
    pub cases: usize,
    pub max_deviation: f64,
    pub tol: f64,
    /// Description of the first few disagreements.
    pub failures: Vec<String>,
}

impl OracleReport {
    pub fn new(name: impl Into<String>, tol: f64) -> Self {
        OracleReport {
            name: name.into(),
            cases: 0,
            max_deviation: 0.0,
            tol,
            failures: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.max_deviation <= self.tol
    }

    /// Record one comparison; `what` is only evaluated on failure.
    pub fn record(&mut self, deviation: f64, what: impl FnOnce() -> String) {
        self.cases += 1;
        let deviation = if deviation.is_nan() {
            f64::INFINITY
        } else {
            deviation
        };
        self.max_deviation = self.max_deviation.max(deviation);
        if deviation > self.tol {
            self.fail(what());
        }
    }

    pub fn fail(&mut self, what: String) {
        if self.failures.len() < 8 {
            self.failures.push(what);
        } else if self.failures.len() == 8 {
            self.failures.push("...".to_string());
        }
    }
}

fn column_deviation<S: Semiring>(a: &[S], b: &[S]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x.to_f64() - y.to_f64()).abs())
        .fold(0.0, f64::max)
}

fn obs_sizes<M: Clone>(hmm: &HmmSpec<M>, t: usize) -> Vec<usize> {
    (0..=t).map(|s| cardinality(hmm.obs_space(s))).collect()
}

/// `Y_[t] -> X_t` read off the full joint by conditioning.
fn batch_filter_kernel<S: Semiring>(
    cat: &Finite<S>,
    joint: &JointState<Kernel<S>>,
    t: usize,
) -> Result<Kernel<S>> {
    let mut vars: Vec<Var> = (0..=t).map(Var::Y).collect();
    vars.push(Var::X(t));
    let marg = cat.marginal(&joint.state, &joint.indices(&vars)?)?;
    cat.conditional(
        &marg,
        &OutputPartition::new(vec![t + 1], (0..=t).collect(), t + 2)?,
    )
}

/// Instantiated filter, batch oracle and recursive filter kernel on every
/// observation prefix of positive weight.
pub fn filter_oracle_finite<S: Semiring>(
    cat: &Finite<S>,
    hmm: &HmmSpec<Kernel<S>>,
    tol: f64,
) -> Result<OracleReport> {
    let n = hmm.horizon();
    let joint = hmm_joint(cat, hmm)?;
    let batch = (0..=n)
        .map(|t| batch_filter_kernel(cat, &joint, t))
        .collect::<Result<Vec<_>>>()?;
    let recursive = filter_recursive_kernels(cat, hmm, n)?;
    let mut rep = OracleReport::new("filter-oracle", tol);

    let mut stack: Vec<(Vec<usize>, Option<Kernel<S>>)> = vec![(vec![], None)];
    while let Some((prefix, posterior)) = stack.pop() {
        let t = prefix.len();
        if t > n {
            continue;
        }
        let predicted = match &posterior {
            None => hmm.f(0).clone(),
            Some(p) => cat.compose(p, hmm.f(t))?,
        };
        let sizes = obs_sizes(hmm, t);
        for y in (0..sizes[t]).rev() {
            let step = update(cat, &predicted, hmm.g(t), &y)?;
            if step.degenerate {
                continue;
            }
            let mut obs = prefix.clone();
            obs.push(y);
            let col = flatten(&obs, &sizes);
            let got = step.posterior.values();
            let d_batch = column_deviation(got, batch[t].column(col));
            let d_rec = column_deviation(got, recursive[t].column(col));
            rep.record(d_batch.max(d_rec), || {
                format!("y={obs:?}: batch {d_batch:e}, recursive {d_rec:e}")
            });
            stack.push((obs, Some(step.posterior)));
        }
    }
    Ok(rep)
}

/// Possibilistic filter against exhaustive enumeration of state and
/// observation trajectories, for every observation sequence.
pub fn possibilistic_oracle(hmm: &HmmSpec<MultiKernel>) -> Result<OracleReport> {
    let cat = FinSetMulti::new();
    let n = hmm.horizon();
    let sizes = obs_sizes(hmm, n);
    let all = sizes.iter().product::<usize>();
    cat.check_cap("observation sequences", &Object::new(sizes.clone()))?;

    // reachable[t][prefix] = bitmask of states ending a consistent trajectory
    let mut reachable: Vec<Vec<u64>> = (0..=n)
        .map(|t| vec![0u64; sizes[..=t].iter().product()])
        .collect();
    fn walk(
        hmm: &HmmSpec<MultiKernel>,
        sizes: &[usize],
        t: usize,
        prev: Option<usize>,
        yprefix: usize,
        reachable: &mut [Vec<u64>],
    ) {
        if t > hmm.horizon() {
            return;
        }
        let f = hmm.f(t);
        let g = hmm.g(t);
        for x in f.support(prev.unwrap_or(0)) {
            for y in g.support(x) {
                let idx = yprefix * sizes[t] + y;
                reachable[t][idx] |= 1 << x;
                walk(hmm, sizes, t + 1, Some(x), idx, reachable);
            }
        }
    }
    walk(hmm, &sizes, 0, None, 0, &mut reachable);

    let mut rep = OracleReport::new("possibilistic-filter", 0.0);
    for seq in 0..all {
        let obs = unflatten(seq, &sizes);
        let run = filter_instantiated(&cat, hmm, &obs)?;
        let mut flagged = false;
        for t in 0..=n {
            flagged |= run.steps[t].degenerate;
            let expect = reachable[t][flatten(&obs[..=t], &sizes[..=t])];
            let got = run.steps[t]
                .posterior
                .support(0)
                .iter()
                .fold(0u64, |m, &x| m | (1 << x));
            let ok = if expect == 0 {
                flagged
            } else {
                !flagged && got == expect
            };
            rep.record(if ok { 0.0 } else { 1.0 }, || {
                format!(
                    "y={:?} t={t}: filter {got:#b}, trajectories {expect:#b}",
                    &obs[..=t]
                )
            });
        }
    }
    Ok(rep)
}

/// Forward-backward, fixed-interval and batch smoothing on every full
/// observation sequence of positive weight.
pub fn smoother_oracle_finite<S: Semiring>(
    cat: &Finite<S>,
    hmm: &HmmSpec<Kernel<S>>,
    tol: f64,
) -> Result<OracleReport> {
    let n = hmm.horizon();
    let joint = hmm_joint(cat, hmm)?;
    let ys: Vec<Var> = (0..=n).map(Var::Y).collect();
    let p_y = cat.marginal(&joint.state, &joint.indices(&ys)?)?;
    let batch = (0..=n)
        .map(|t| {
            let mut vars = ys.clone();
            vars.push(Var::X(t));
            let marg = cat.marginal(&joint.state, &joint.indices(&vars)?)?;
            cat.conditional(
                &marg,
                &OutputPartition::new(vec![n + 1], (0..=n).collect(), n + 2)?,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let sizes = obs_sizes(hmm, n);
    let mut rep = OracleReport::new("smoother-oracle", tol);
    for seq in 0..p_y.rows() {
        if p_y.values()[seq].is_zero() {
            continue;
        }
        let obs = unflatten(seq, &sizes);
        let fb = forward_backward_instantiated(hmm, &obs)?;
        let fi = fixed_interval_instantiated(cat, hmm, &filter_instantiated(cat, hmm, &obs)?)?;
        for t in 0..=n {
            let oracle = batch[t].column(seq);
            let d_fb = column_deviation(fb.states[t].values(), oracle);
            let d_fi = column_deviation(fi.states[t].values(), oracle);
            let flags = fb.degenerate[t] || fi.degenerate[t];
            rep.record(if flags { f64::INFINITY } else { d_fb.max(d_fi) }, || {
                format!("y={obs:?} t={t}: forward-backward {d_fb:e}, fixed-interval {d_fi:e}, degenerate {flags}")
            });
        }
    }
    Ok(rep)
}

fn gauss_deviation(
    m1: &DVector<f64>,
    p1: &DMatrix<f64>,
    m2: &DVector<f64>,
    p2: &DMatrix<f64>,
) -> f64 {
    let dm = relative_deviation(
        &DMatrix::from_column_slice(m1.len(), 1, m1.as_slice()),
        &DMatrix::from_column_slice(m2.len(), 1, m2.as_slice()),
    );
    dm.max(relative_deviation(p1, p2))
}

/// Generic instantiated filter against the closed-form Kalman recursion.
pub fn kalman_check(
    cat: &Gauss,
    hmm: &HmmSpec<GaussMap>,
    obs: &[DVector<f64>],
    tol: f64,
) -> Result<OracleReport> {
    let run = filter_instantiated(cat, hmm, obs)?;
    let kalman = kalman_closed_form(cat, hmm, obs)?;
    let mut rep = OracleReport::new("kalman", tol);
    for (t, (step, k)) in run.steps.iter().zip(&kalman).enumerate() {
        let d = gauss_deviation(&step.posterior.mean, &step.posterior.cov, &k.m, &k.p).max(
            gauss_deviation(
                &step.predicted.mean,
                &step.predicted.cov,
                &k.m_pred,
                &k.p_pred,
            ),
        );
        rep.record(d, || format!("t={t}: deviation {d:e}"));
    }
    Ok(rep)
}

/// Generic fixed-interval smoother against the closed-form RTS recursion,
/// plus the variance reduction `diag(P̂_t) <= diag(P_t)`.
pub fn rts_check(
    cat: &Gauss,
    hmm: &HmmSpec<GaussMap>,
    obs: &[DVector<f64>],
    tol: f64,
) -> Result<OracleReport> {
    let run = filter_instantiated(cat, hmm, obs)?;
    let fi = fixed_interval_instantiated(cat, hmm, &run)?;
    let kalman = kalman_closed_form(cat, hmm, obs)?;
    let rts = rts_closed_form(cat, hmm, &kalman)?;
    let mut rep = OracleReport::new("rts", tol);
    for t in 0..fi.states.len() {
        let s = &fi.states[t];
        let d = gauss_deviation(&s.mean, &s.cov, &rts.m[t], &rts.p[t]);
        rep.record(d, || format!("t={t}: deviation {d:e}"));
        let filtered = &run.steps[t].posterior.cov;
        for i in 0..s.cov.nrows() {
            if s.cov[(i, i)] > filtered[(i, i)] + 1e-9 {
                rep.fail(format!(
                    "t={t}: smoothed variance {} exceeds filtered {}",
                    s.cov[(i, i)],
                    filtered[(i, i)]
                ));
            }
        }
    }
    Ok(rep)
}

/// Generic filter and smoother against conditioning the stacked joint Gaussian.
pub fn gauss_batch_check(
    cat: &Gauss,
    hmm: &HmmSpec<GaussMap>,
    obs: &[DVector<f64>],
    tol: f64,
) -> Result<OracleReport> {
    let n = hmm.horizon();
    let stacked: usize = (0..=n)
        .map(|t| dim(hmm.state_space(t)) + dim(hmm.obs_space(t)))
        .sum();
    cat.check_cap("stacked joint", &Object::single(stacked))?;
    let run = filter_instantiated(cat, hmm, obs)?;
    let smooth = fixed_interval_instantiated(cat, hmm, &run)?;
    let batch = smoother_batch(cat, hmm, obs)?;
    let joint = hmm_joint(cat, hmm)?;
    let mut rep = OracleReport::new("gauss-batch", tol);
    for t in 0..=n {
        let given: Vec<(Var, DVector<f64>)> =
            (0..=t).map(|s| (Var::Y(s), obs[s].clone())).collect();
        let filt = condition_joint(cat, &joint, &[Var::X(t)], &given)?;
        let p = &run.steps[t].posterior;
        let d_f = gauss_deviation(&p.mean, &p.cov, &filt.state.mean, &filt.state.cov);
        let s = &smooth.states[t];
        let b = &batch[t].state;
        let d_s = gauss_deviation(&s.mean, &s.cov, &b.mean, &b.cov);
        rep.record(d_f.max(d_s), || {
            format!("t={t}: filter {d_f:e}, smoother {d_s:e}")
        });
    }
    Ok(rep)
}

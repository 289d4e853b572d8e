//! Bayes smoothing: forward and backward quantities, the forward-backward
//! estimate, fixed-interval smoothing and the closed-form RTS smoother.

use nalgebra::{DMatrix, DVector};

use crate::category::{MarkovCategory, Object};
use crate::error::{Error, Result};
use crate::filtering::{FilterRun, KalmanState};
use crate::finite::{Kernel, Semiring};
use crate::gauss::{Gauss, GaussMap};
use crate::models::{condition_joint, hmm_joint, Conditioned, HmmSpec, Var};

/// Smoothed posteriors on `X_0..X_n` given all observations.
#[derive(Debug, Clone)]
pub struct SmootherRun<M> {
    pub states: Vec<M>,
    pub degenerate: Vec<bool>,
    /// Backward kernels `X_{t+1} -> X_t` used by fixed-interval smoothing
    /// (empty for forward-backward).
    pub backward: Vec<M>,
}

impl<M> SmootherRun<M> {
    pub fn any_degenerate(&self) -> bool {
        self.degenerate.iter().any(|&d| d)
    }
}

impl SmootherRun<GaussMap> {
    /// Smoother gains `C_t`, the linear part of each backward kernel.
    pub fn gains(&self) -> Vec<DMatrix<f64>> {
        self.backward.iter().map(|b| b.a.clone()).collect()
    }
}

/// `α_t: I -> Y_0 ⊗ ... ⊗ Y_t ⊗ X_t` for `t = 0..=t_max`.
pub fn forward_alphas<C: MarkovCategory>(
    cat: &C,
    hmm: &HmmSpec<C::Morphism>,
    t_max: usize,
) -> Result<Vec<C::Morphism>> {
    if t_max > hmm.horizon() {
        return Err(Error::domain(format!(
            "time {t_max} beyond horizon {}",
            hmm.horizon()
        )));
    }
    let mut out: Vec<C::Morphism> = Vec::with_capacity(t_max + 1);
    for t in 0..=t_max {
        let alpha = match out.last() {
            None => {
                let xy = cat.copy_then(hmm.f(0), hmm.g(0))?;
                cat.permute(&xy, &[1, 0])?
            }
            Some(prev) => {
                let last = cat.target(prev).arity() - 1;
                let carrier = cat.target(prev).tensor(hmm.obs_space(t));
                cat.check_cap("forward quantity", &carrier)?;
                let moved = cat.apply_at(prev, last, hmm.f(t))?;
                let with_y = cat.append_output(&moved, last, hmm.g(t))?;
                let mut order: Vec<usize> = (0..last).collect();
                order.extend([last + 1, last]);
                cat.permute(&with_y, &order)?
            }
        };
        out.push(alpha);
    }
    Ok(out)
}

/// `β_t: X_t -> Y_{t+1} ⊗ ... ⊗ Y_n` for `t = t_min..=n` (`β_n` is the discard map).
pub fn backward_betas<C: MarkovCategory>(
    cat: &C,
    hmm: &HmmSpec<C::Morphism>,
    t_min: usize,
) -> Result<Vec<C::Morphism>> {
    let n = hmm.horizon();
    if t_min > n {
        return Err(Error::domain(format!("time {t_min} beyond horizon {n}")));
    }
    let mut rev = vec![cat.discard(hmm.state_space(n))];
    for t in (t_min..n).rev() {
        let next = rev.last().expect("nonempty");
        let carrier = hmm
            .state_space(t)
            .tensor(hmm.obs_space(t + 1))
            .tensor(cat.target(next));
        cat.check_cap("backward quantity", &carrier)?;
        let x = hmm.state_space(t + 1);
        let doubled = cat.compose(hmm.f(t + 1), &cat.copy(x))?;
        let tail = cat.apply_at(&doubled, 1, next)?;
        rev.push(cat.apply_at(&tail, 0, hmm.g(t + 1))?);
    }
    rev.reverse();
    Ok(rev)
}

/// The marginal on `Y_0, ..., Y_n, X_t` rebuilt from `α_t` and `β_t`, in the
/// order `Y_0..Y_t, X_t, Y_{t+1}..Y_n`.
pub fn contract_alpha_beta<C: MarkovCategory>(
    cat: &C,
    alpha: &C::Morphism,
    beta: &C::Morphism,
) -> Result<C::Morphism> {
    let last = cat.target(alpha).arity() - 1;
    cat.append_output(alpha, last, beta)
}

/// Smoothed marginals from the explicit joint.
pub fn smoother_batch<C: MarkovCategory>(
    cat: &C,
    hmm: &HmmSpec<C::Morphism>,
    obs: &[C::Point],
) -> Result<Vec<Conditioned<C::Morphism>>> {
    let n = hmm.horizon();
    if obs.len() != n + 1 {
        return Err(Error::validation(
            "observations",
            format!("{} observations for horizon {n}", obs.len()),
        ));
    }
    let joint = hmm_joint(cat, hmm)?;
    let given: Vec<(Var, C::Point)> = (0..=n).map(|s| (Var::Y(s), obs[s].clone())).collect();
    (0..=n)
        .map(|t| condition_joint(cat, &joint, &[Var::X(t)], &given))
        .collect()
}

/// Fixed-interval smoothing on top of a completed filter run: start from the
/// last posterior and compose backwards with the Bayesian inverse of each
/// transition with respect to the filter posterior.
pub fn fixed_interval_instantiated<C: MarkovCategory>(
    cat: &C,
    hmm: &HmmSpec<C::Morphism>,
    run: &FilterRun<C::Morphism>,
) -> Result<SmootherRun<C::Morphism>> {
    let n = hmm.horizon();
    if run.steps.len() != n + 1 {
        return Err(Error::domain(format!(
            "filter run has {} steps, horizon is {n}",
            run.steps.len()
        )));
    }
    let mut states = vec![run.steps[n].posterior.clone()];
    let mut degenerate = vec![run.steps[n].degenerate];
    let mut backward = Vec::with_capacity(n);
    for t in (0..n).rev() {
        let dagger = cat.bayes_inverse(hmm.f(t + 1), &run.steps[t].posterior)?;
        let next = states.last().expect("nonempty");
        states.push(cat.renormalize(cat.compose(next, &dagger)?));
        degenerate.push(run.steps[t].degenerate || *degenerate.last().expect("nonempty"));
        backward.push(dagger);
    }
    states.reverse();
    degenerate.reverse();
    backward.reverse();
    Ok(SmootherRun {
        states,
        degenerate,
        backward,
    })
}

/// Instantiated forward-backward in a finite instance: observations are
/// plugged in at every step, so no product space is ever built.
pub fn forward_backward_instantiated<S: Semiring>(
    hmm: &HmmSpec<Kernel<S>>,
    obs: &[usize],
) -> Result<SmootherRun<Kernel<S>>> {
    let n = hmm.horizon();
    if obs.len() != n + 1 {
        return Err(Error::validation(
            "observations",
            format!("{} observations for horizon {n}", obs.len()),
        ));
    }
    for (t, &y) in obs.iter().enumerate() {
        if y >= hmm.g(t).rows() {
            return Err(Error::validation(
                format!("observations[{t}]"),
                format!(
                    "value {y} outside an observation space of size {}",
                    hmm.g(t).rows()
                ),
            ));
        }
    }
    let like = |t: usize, x: usize| hmm.g(t).get(obs[t], x);
    let rescale = |v: &mut Vec<S>| S::normalize(v);

    let mut alphas: Vec<Vec<S>> = Vec::with_capacity(n + 1);
    for t in 0..=n {
        let nx = hmm.f(t).rows();
        let mut a: Vec<S> = (0..nx)
            .map(|x| {
                let prior = match alphas.last() {
                    None => hmm.f(0).get(x, 0),
                    Some(prev) => prev.iter().enumerate().fold(S::zero(), |acc, (xp, &w)| {
                        acc.add(hmm.f(t).get(x, xp).mul(w))
                    }),
                };
                like(t, x).mul(prior)
            })
            .collect();
        rescale(&mut a);
        alphas.push(a);
    }

    let mut betas: Vec<Vec<S>> = vec![vec![S::one(); hmm.f(n).rows()]];
    for t in (0..n).rev() {
        let next = betas.last().expect("nonempty");
        let nx = hmm.f(t).rows();
        let mut b: Vec<S> = (0..nx)
            .map(|x| {
                next.iter().enumerate().fold(S::zero(), |acc, (xn, &bw)| {
                    acc.add(like(t + 1, xn).mul(bw).mul(hmm.f(t + 1).get(xn, x)))
                })
            })
            .collect();
        rescale(&mut b);
        betas.push(b);
    }
    betas.reverse();

    let mut states = Vec::with_capacity(n + 1);
    let mut degenerate = Vec::with_capacity(n + 1);
    for t in 0..=n {
        let mut est: Vec<S> = alphas[t]
            .iter()
            .zip(&betas[t])
            .map(|(&a, &b)| a.mul(b))
            .collect();
        let dead = est.iter().all(|v| v.is_zero());
        if dead {
            est = vec![S::fallback(est.len()); est.len()];
        }
        S::normalize(&mut est);
        degenerate.push(dead);
        states.push(Kernel::state(Object::single(est.len()), est, 1e-9)?);
    }
    Ok(SmootherRun {
        states,
        degenerate,
        backward: Vec::new(),
    })
}

/// Closed-form RTS smoother output.
#[derive(Debug, Clone)]
pub struct RtsRun {
    pub m: Vec<DVector<f64>>,
    pub p: Vec<DMatrix<f64>>,
    pub gains: Vec<DMatrix<f64>>,
}

/// The RTS backward recursion evaluated on a Kalman pass.
pub fn rts_closed_form(
    cat: &Gauss,
    hmm: &HmmSpec<GaussMap>,
    kalman: &[KalmanState],
) -> Result<RtsRun> {
    let n = hmm.horizon();
    if kalman.len() != n + 1 {
        return Err(Error::domain(format!(
            "Kalman pass has {} steps, horizon is {n}",
            kalman.len()
        )));
    }
    let mut m = vec![kalman[n].m.clone()];
    let mut p = vec![kalman[n].p.clone()];
    let mut gains = Vec::with_capacity(n);
    for t in (0..n).rev() {
        let a = &hmm.f(t + 1).a;
        let next = &kalman[t + 1];
        let c = &kalman[t].p * a.transpose() * cat.pinv(&next.p_pred);
        let mh = &kalman[t].m + &c * (m.last().expect("nonempty") - &next.m_pred);
        let ph = &kalman[t].p + &c * (p.last().expect("nonempty") - &next.p_pred) * c.transpose();
        m.push(mh);
        p.push((&ph + ph.transpose()) * 0.5);
        gains.push(c);
    }
    m.reverse();
    p.reverse();
    gains.reverse();
    Ok(RtsRun { m, p, gains })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::category::OutputPartition;
    use crate::filtering::{filter_instantiated, filter_recursive_kernel, kalman_closed_form};
    use crate::finstoch::{self, distribution, FinStoch};

    fn small_hmm() -> HmmSpec<Kernel<f64>> {
        let cat = FinStoch::new();
        let f = finstoch::validate(&[vec![0.9, 0.2], vec![0.1, 0.8]]).unwrap();
        let g = finstoch::validate(&[vec![0.7, 0.1], vec![0.3, 0.9]]).unwrap();
        HmmSpec::new(
            &cat,
            vec![distribution(&[0.3, 0.7]).unwrap(), f.clone(), f],
            vec![g.clone(), g.clone(), g],
        )
        .unwrap()
    }

    #[test]
    fn alpha_zero_and_filter_relation() {
        let cat = FinStoch::new();
        let hmm = small_hmm();
        let alphas = forward_alphas(&cat, &hmm, 2).unwrap();
        let direct = cat
            .permute(&cat.copy_then(hmm.f(0), hmm.g(0)).unwrap(), &[1, 0])
            .unwrap();
        assert!(cat.approx_eq(&alphas[0], &direct));
        let arity = cat.target(&alphas[2]).arity();
        let part = OutputPartition::new(vec![arity - 1], (0..arity - 1).collect(), arity).unwrap();
        let b2 = cat.conditional(&alphas[2], &part).unwrap();
        assert!(cat.approx_eq(&b2, &filter_recursive_kernel(&cat, &hmm, 2).unwrap()));
    }

    #[test]
    fn beta_base_is_discard() {
        let cat = FinStoch::new();
        let hmm = small_hmm();
        let betas = backward_betas(&cat, &hmm, 0).unwrap();
        assert!(betas[2].target().is_unit());
        assert_eq!(betas[2].values(), &[1.0, 1.0]);
    }

    #[test]
    fn forward_backward_matches_joint() {
        let cat = FinStoch::new();
        let hmm = small_hmm();
        let joint = hmm_joint(&cat, &hmm).unwrap();
        let alphas = forward_alphas(&cat, &hmm, 2).unwrap();
        let betas = backward_betas(&cat, &hmm, 0).unwrap();
        for t in 0..=2 {
            let mut order: Vec<Var> = (0..=t).map(Var::Y).collect();
            order.push(Var::X(t));
            order.extend((t + 1..=2).map(Var::Y));
            let m = cat
                .marginal(&joint.state, &joint.indices(&order).unwrap())
                .unwrap();
            let c = contract_alpha_beta(&cat, &alphas[t], &betas[t]).unwrap();
            assert!(cat.approx_eq(&m, &c));
        }
        let fb = forward_backward_instantiated(&hmm, &[0, 1, 1]).unwrap();
        let batch = smoother_batch(&cat, &hmm, &[0, 1, 1]).unwrap();
        let run = filter_instantiated(&cat, &hmm, &[0, 1, 1]).unwrap();
        let fi = fixed_interval_instantiated(&cat, &hmm, &run).unwrap();
        for t in 0..=2 {
            assert!(cat.approx_eq(&fb.states[t], &batch[t].state));
            assert!(cat.approx_eq(&fi.states[t], &batch[t].state));
        }
        assert!(cat.approx_eq(&fb.states[2], &run.steps[2].posterior));
    }

    #[test]
    fn rts_by_hand() {
        let cat = Gauss::new();
        let hmm = HmmSpec::new(
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
        let obs = vec![DVector::from_element(1, 1.0); 2];
        let ks = kalman_closed_form(&cat, &hmm, &obs).unwrap();
        let rts = rts_closed_form(&cat, &hmm, &ks).unwrap();
        let c0 = 0.5 / 1.5;
        assert!((rts.gains[0][(0, 0)] - c0).abs() < 1e-12);
        let expect = 0.5 + c0 * (0.8 - 0.5);
        assert!((rts.m[0][0] - expect).abs() < 1e-12);

        let run = filter_instantiated(&cat, &hmm, &obs).unwrap();
        let fi = fixed_interval_instantiated(&cat, &hmm, &run).unwrap();
        assert!((fi.gains()[0][(0, 0)] - c0).abs() < 1e-12);
        assert!((fi.states[0].mean[0] - expect).abs() < 1e-12);
        assert!(fi.states[0].cov[(0, 0)] <= ks[0].p[(0, 0)] + 1e-12);
    }

    #[test]
    fn singular_prediction_uses_pseudoinverse() {
        let cat = Gauss::new();
        let hmm = HmmSpec::new(
            &cat,
            vec![
                GaussMap::scalar_state(1.0, 0.0).unwrap(),
                GaussMap::scalar(0.0, 2.0, 0.0).unwrap(),
            ],
            vec![
                GaussMap::scalar(1.0, 0.0, 1.0).unwrap(),
                GaussMap::scalar(1.0, 0.0, 1.0).unwrap(),
            ],
        )
        .unwrap();
        let obs = vec![DVector::from_element(1, 0.0); 2];
        let ks = kalman_closed_form(&cat, &hmm, &obs).unwrap();
        let rts = rts_closed_form(&cat, &hmm, &ks).unwrap();
        assert_eq!(rts.gains[0][(0, 0)], 0.0);
        assert!(rts.m.iter().all(|m| m[0].is_finite()));
    }
}

//! The Bayes filter: batch oracle, recursive kernels, instantiated
//! predict/update, and the closed-form Kalman filter.

use nalgebra::{DMatrix, DVector};

use crate::category::{MarkovCategory, Object, OutputPartition};
use crate::error::{Error, Result};
use crate::gauss::{Gauss, GaussMap};
use crate::models::{condition_joint, hmm_joint, Conditioned, HmmSpec, Var};

/// One predict/update step of an instantiated filter.
#[derive(Debug, Clone)]
pub struct FilterStep<M> {
    /// Prior on `X_t` after the transition (`f_0` at time 0).
    pub predicted: M,
    /// Posterior on `X_t` given `y_0..y_t`.
    pub posterior: M,
    /// Probability (or possibility) of `y_t` given the history; `None` in Gauss.
    pub weight: Option<f64>,
    /// The observation lies outside the predictive support and the fallback fired.
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct FilterRun<M> {
    pub steps: Vec<FilterStep<M>>,
}

impl<M> FilterRun<M> {
    pub fn posteriors(&self) -> impl Iterator<Item = &M> {
        self.steps.iter().map(|s| &s.posterior)
    }

    pub fn any_degenerate(&self) -> bool {
        self.steps.iter().any(|s| s.degenerate)
    }
}

fn check_obs_len<M: Clone>(hmm: &HmmSpec<M>, len: usize) -> Result<()> {
    if len == 0 || len > hmm.horizon() + 1 {
        return Err(Error::validation(
            "observations",
            format!(
                "{len} observations for horizon {} (expected 1..={})",
                hmm.horizon(),
                hmm.horizon() + 1
            ),
        ));
    }
    Ok(())
}

/// `g_t ∘ f_t ∘ posterior`.
pub fn predictive_observation<C: MarkovCategory>(
    cat: &C,
    posterior: &C::Morphism,
    f: &C::Morphism,
    g: &C::Morphism,
) -> Result<C::Morphism> {
    cat.compose(&cat.compose(posterior, f)?, g)
}

/// Condition a prediction on one observed value.
pub fn update<C: MarkovCategory>(
    cat: &C,
    predicted: &C::Morphism,
    g: &C::Morphism,
    y: &C::Point,
) -> Result<FilterStep<C::Morphism>> {
    let joint = cat.copy_then(predicted, g)?;
    let c = cat.conditional(&joint, &OutputPartition::new(vec![0], vec![1], 2)?)?;
    let point = cat.point(cat.target(g), y)?;
    let evidence = cat.compose(predicted, g)?;
    let weight = cat.point_weight(&evidence, y)?;
    let degenerate = !cat.dominated(&point, &evidence)?;
    let mut posterior = cat.renormalize(cat.instantiate(&c, &[point])?);
    if degenerate {
        posterior = cat.degenerate_posterior(predicted, posterior);
    }
    Ok(FilterStep {
        predicted: predicted.clone(),
        posterior,
        weight,
        degenerate,
    })
}

/// Predict with `f_t`, then update on `y_t`, for every observation given.
pub fn filter_instantiated<C: MarkovCategory>(
    cat: &C,
    hmm: &HmmSpec<C::Morphism>,
    obs: &[C::Point],
) -> Result<FilterRun<C::Morphism>> {
    check_obs_len(hmm, obs.len())?;
    let mut steps: Vec<FilterStep<C::Morphism>> = Vec::with_capacity(obs.len());
    for (t, y) in obs.iter().enumerate() {
        let predicted = match steps.last() {
            None => hmm.f(0).clone(),
            Some(prev) => cat.compose(&prev.posterior, hmm.f(t))?,
        };
        steps.push(update(cat, &predicted, hmm.g(t), y).map_err(|e| e.at(format!("t={t}")))?);
    }
    Ok(FilterRun { steps })
}

/// The filter at time `t` read off the explicit joint of `y_0..y_t` and `X_t`.
pub fn filter_batch<C: MarkovCategory>(
    cat: &C,
    hmm: &HmmSpec<C::Morphism>,
    t: usize,
    obs: &[C::Point],
) -> Result<Conditioned<C::Morphism>> {
    if t > hmm.horizon() || obs.len() < t + 1 {
        return Err(Error::domain(format!(
            "filter_batch: time {t} needs {} observations, got {}",
            t + 1,
            obs.len()
        )));
    }
    let joint = hmm_joint(cat, &hmm.truncate(t))?;
    let given: Vec<(Var, C::Point)> = (0..=t).map(|s| (Var::Y(s), obs[s].clone())).collect();
    condition_joint(cat, &joint, &[Var::X(t)], &given)
}

/// The uninstantiated filter `B_t: Y_0 ⊗ ... ⊗ Y_t -> X_t`, built recursively.
pub fn filter_recursive_kernel<C: MarkovCategory>(
    cat: &C,
    hmm: &HmmSpec<C::Morphism>,
    t: usize,
) -> Result<C::Morphism> {
    let mut all = filter_recursive_kernels(cat, hmm, t)?;
    Ok(all.pop().expect("at least B_0"))
}

/// All recursive kernels `B_0..B_t`.
pub fn filter_recursive_kernels<C: MarkovCategory>(
    cat: &C,
    hmm: &HmmSpec<C::Morphism>,
    t: usize,
) -> Result<Vec<C::Morphism>> {
    if t > hmm.horizon() {
        return Err(Error::domain(format!(
            "time {t} beyond horizon {}",
            hmm.horizon()
        )));
    }
    let mut out = vec![cat.bayes_inverse(hmm.g(0), hmm.f(0))?];
    let part = OutputPartition::new(vec![0], vec![1], 2)?;
    for s in 1..=t {
        let b = out.last().expect("nonempty");
        let carrier = cat
            .source(b)
            .tensor(hmm.state_space(s))
            .tensor(hmm.obs_space(s));
        cat.check_cap("recursive filter kernel", &carrier)?;
        let prior = cat.compose(b, hmm.f(s))?;
        let joint = cat.copy_then(&prior, hmm.g(s))?;
        out.push(cat.conditional(&joint, &part)?);
    }
    Ok(out)
}

/// Plug observed values into an uninstantiated filter or smoother kernel.
pub fn instantiate_at<C: MarkovCategory>(
    cat: &C,
    kernel: &C::Morphism,
    spaces: &[Object],
    values: &[C::Point],
) -> Result<C::Morphism> {
    let points = spaces
        .iter()
        .zip(values)
        .map(|(o, v)| cat.point(o, v))
        .collect::<Result<Vec<_>>>()?;
    cat.instantiate(kernel, &points)
}

/// One step of the closed-form Kalman filter.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub m_pred: DVector<f64>,
    pub p_pred: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub m: DVector<f64>,
    pub p: DMatrix<f64>,
}

/// The textbook Kalman recursion with transition biases `v_t` and
/// observation biases `w_t`; inverses are pseudoinverses.
pub fn kalman_closed_form(
    cat: &Gauss,
    hmm: &HmmSpec<GaussMap>,
    obs: &[DVector<f64>],
) -> Result<Vec<KalmanState>> {
    check_obs_len(hmm, obs.len())?;
    let mut out: Vec<KalmanState> = Vec::with_capacity(obs.len());
    for (t, y) in obs.iter().enumerate() {
        let f = hmm.f(t);
        let (m_pred, p_pred) = match out.last() {
            None => (f.mean.clone(), f.cov.clone()),
            Some(prev) => (
                &f.a * &prev.m + &f.mean,
                &f.a * &prev.p * f.a.transpose() + &f.cov,
            ),
        };
        let g = hmm.g(t);
        if y.len() != g.mean.len() {
            return Err(Error::validation(
                format!("observations[{t}]"),
                format!("length {}, expected {}", y.len(), g.mean.len()),
            ));
        }
        let h = &g.a;
        let s = h * &p_pred * h.transpose() + &g.cov;
        let k = &p_pred * h.transpose() * cat.pinv(&s);
        let m = &m_pred + &k * (y - h * &m_pred - &g.mean);
        let n = p_pred.nrows();
        let p = (DMatrix::identity(n, n) - &k * h) * &p_pred;
        let p = (&p + p.transpose()) * 0.5;
        out.push(KalmanState {
            m_pred,
            p_pred,
            s,
            k,
            m,
            p,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite::Kernel;
    use crate::finsetmulti::{self, FinSetMulti};
    use crate::finstoch::{self, distribution, FinStoch};

    fn scalar_hmm() -> HmmSpec<GaussMap> {
        let cat = Gauss::new();
        HmmSpec::new(
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
        .unwrap()
    }

    fn ones() -> Vec<DVector<f64>> {
        vec![DVector::from_element(1, 1.0); 2]
    }

    #[test]
    fn kalman_by_hand() {
        let ks = kalman_closed_form(&Gauss::new(), &scalar_hmm(), &ones()).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(close(ks[0].s[(0, 0)], 2.0) && close(ks[0].k[(0, 0)], 0.5));
        assert!(close(ks[0].m[0], 0.5) && close(ks[0].p[(0, 0)], 0.5));
        assert!(close(ks[1].m_pred[0], 0.5) && close(ks[1].p_pred[(0, 0)], 1.5));
        assert!(close(ks[1].s[(0, 0)], 2.5) && close(ks[1].k[(0, 0)], 0.6));
        assert!(close(ks[1].m[0], 0.8) && close(ks[1].p[(0, 0)], 0.6));
    }

    #[test]
    fn generic_gauss_filter_matches_hand_values() {
        let cat = Gauss::new();
        let run = filter_instantiated(&cat, &scalar_hmm(), &ones()).unwrap();
        let m: Vec<f64> = run.posteriors().map(|p| p.mean[0]).collect();
        let p: Vec<f64> = run.posteriors().map(|p| p.cov[(0, 0)]).collect();
        assert!((m[0] - 0.5).abs() < 1e-12 && (m[1] - 0.8).abs() < 1e-12);
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.6).abs() < 1e-12);
        assert!(!run.any_degenerate());
    }

    #[test]
    fn perfect_observation_gives_point_mass() {
        let cat = FinStoch::new();
        let id = cat.identity(&Object::single(3));
        let hmm = HmmSpec::new(
            &cat,
            vec![distribution(&[0.2, 0.3, 0.5]).unwrap()],
            vec![id],
        )
        .unwrap();
        let b = filter_batch(&cat, &hmm, 0, &[2]).unwrap();
        assert_eq!(b.state.values(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn impossible_observation_is_flagged() {
        let cat = FinStoch::new();
        let g = finstoch::validate(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let hmm = HmmSpec::new(&cat, vec![distribution(&[0.4, 0.6]).unwrap()], vec![g]).unwrap();
        let run = filter_instantiated(&cat, &hmm, &[1]).unwrap();
        assert!(run.steps[0].degenerate);
        assert_eq!(run.steps[0].weight, Some(0.0));
        assert_eq!(run.steps[0].posterior.values(), &[0.5, 0.5]);
        let b = filter_batch(&cat, &hmm, 0, &[1]).unwrap();
        assert!(b.degenerate);
        assert_eq!(b.state.values(), &[0.5, 0.5]);
    }

    #[test]
    fn recursive_kernel_base_case_is_bayes_inverse() {
        let cat = FinStoch::new();
        let hmm = HmmSpec::new(
            &cat,
            vec![distribution(&[0.3, 0.7]).unwrap()],
            vec![finstoch::validate(&[vec![0.9, 0.2], vec![0.1, 0.8]]).unwrap()],
        )
        .unwrap();
        let b0 = filter_recursive_kernel(&cat, &hmm, 0).unwrap();
        assert!(cat.approx_eq(&b0, &cat.bayes_inverse(hmm.g(0), hmm.f(0)).unwrap()));
    }

    #[test]
    fn possibilistic_filter_by_hand() {
        // X = {a, b}, a -> {a, b}, b -> {b}; g: a -> {0}, b -> {0, 1}
        let cat = FinSetMulti::new();
        let f = finsetmulti::validate(&[vec![true, false], vec![true, true]]).unwrap();
        let g = finsetmulti::validate(&[vec![true, true], vec![false, true]]).unwrap();
        let hmm = HmmSpec::new(
            &cat,
            vec![finsetmulti::subset_state(2, &[0]).unwrap(), f],
            vec![g.clone(), g],
        )
        .unwrap();
        let run = filter_instantiated(&cat, &hmm, &[0, 1]).unwrap();
        assert_eq!(run.steps[0].posterior.values(), &[true, false]);
        assert_eq!(run.steps[1].posterior.values(), &[false, true]);
        assert!(!run.any_degenerate());
    }

    #[test]
    fn uninformative_observations_leave_the_chain_marginal() {
        let cat = FinStoch::new();
        let f = finstoch::validate(&[vec![0.9, 0.2], vec![0.1, 0.8]]).unwrap();
        let g = finstoch::validate(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let hmm = HmmSpec::new(
            &cat,
            vec![distribution(&[0.3, 0.7]).unwrap(), f.clone()],
            vec![g.clone(), g],
        )
        .unwrap();
        let b1 = filter_recursive_kernel(&cat, &hmm, 1).unwrap();
        let marginal = cat.compose(hmm.f(0), &f).unwrap();
        for col in 0..b1.cols() {
            let c = Kernel::state_vec(b1.column(col).to_vec(), 1e-12).unwrap();
            assert!(cat.approx_eq(&c, &marginal));
        }
    }
}

//! Seeded random models for the property suites.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::category::{MarkovCategory, Object};
use crate::finite::Kernel;
use crate::finsetmulti::{self, FinSetMulti, MultiKernel};
use crate::finstoch::{self, FinStoch, StochasticKernel};
use crate::gauss::{self, Gauss, GaussMap};
use crate::models::{ChainSpec, HmmSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Size bounds for random finite models.
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub horizon: usize,
    pub max_state: usize,
    pub max_obs: usize,
    /// Largest number of entries allowed in the full joint.
    pub joint_cap: usize,
}

fn sizes<R: Rng + ?Sized>(shape: &Shape, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    loop {
        let xs: Vec<usize> = (0..=shape.horizon)
            .map(|_| rng.random_range(2..=shape.max_state.max(2)))
            .collect();
        let ys: Vec<usize> = (0..=shape.horizon)
            .map(|_| rng.random_range(2..=shape.max_obs.max(2)))
            .collect();
        let entries = xs
            .iter()
            .zip(&ys)
            .try_fold(1usize, |acc, (x, y)| acc.checked_mul(x * y));
        if entries.is_some_and(|e| e <= shape.joint_cap) {
            return (xs, ys);
        }
    }
}

/// Random FinStoch HMM; spaces may change size over time.
pub fn finstoch_hmm<R: Rng + ?Sized>(
    shape: &Shape,
    sparsity: f64,
    rng: &mut R,
) -> HmmSpec<StochasticKernel> {
    let cat = FinStoch::new();
    let (xs, ys) = sizes(shape, rng);
    let mut fs = Vec::with_capacity(xs.len());
    let mut gs = Vec::with_capacity(xs.len());
    for t in 0..xs.len() {
        let src = if t == 0 {
            Object::unit()
        } else {
            Object::single(xs[t - 1])
        };
        fs.push(finstoch::random_kernel(
            &src,
            &Object::single(xs[t]),
            sparsity,
            rng,
        ));
        gs.push(finstoch::random_kernel(
            &Object::single(xs[t]),
            &Object::single(ys[t]),
            sparsity,
            rng,
        ));
    }
    HmmSpec::new(&cat, fs, gs).expect("generated kernels chain")
}

pub fn finstoch_chain<R: Rng + ?Sized>(
    shape: &Shape,
    sparsity: f64,
    rng: &mut R,
) -> ChainSpec<StochasticKernel> {
    finstoch_hmm(shape, sparsity, rng).chain().clone()
}

/// Random nondeterministic automaton with possibilistic observations.
pub fn nfa<R: Rng + ?Sized>(shape: &Shape, density: f64, rng: &mut R) -> HmmSpec<MultiKernel> {
    let cat = FinSetMulti::new();
    let (xs, ys) = sizes(shape, rng);
    let mut fs = Vec::with_capacity(xs.len());
    let mut gs = Vec::with_capacity(xs.len());
    for t in 0..xs.len() {
        let src = if t == 0 {
            Object::unit()
        } else {
            Object::single(xs[t - 1])
        };
        fs.push(finsetmulti::random_kernel(
            &src,
            &Object::single(xs[t]),
            density,
            rng,
        ));
        gs.push(finsetmulti::random_kernel(
            &Object::single(xs[t]),
            &Object::single(ys[t]),
            density,
            rng,
        ));
    }
    HmmSpec::new(&cat, fs, gs).expect("generated relations chain")
}

fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.transpose() * a)
        .eigenvalues
        .max()
        .max(0.0)
        .sqrt()
}

fn random_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    gauss::random_matrix(n, 1, 1.0, rng).column(0).into_owned()
}

/// Random linear-Gaussian HMM with constant dimensions, nonzero biases,
/// transition matrices of spectral norm at most `0.95` and full-rank noise.
pub fn gauss_hmm<R: Rng + ?Sized>(
    horizon: usize,
    state_dim: usize,
    obs_dim: usize,
    rng: &mut R,
) -> HmmSpec<GaussMap> {
    let cat = Gauss::new();
    let x = Object::single(state_dim);
    let y = Object::single(obs_dim);
    let noise =
        |n: usize, rng: &mut R| gauss::random_psd(n, n, 0.7, rng) + DMatrix::identity(n, n) * 0.1;
    let mut fs = vec![
        GaussMap::state(random_vec(state_dim, rng), noise(state_dim, rng)).expect("valid state"),
    ];
    for _ in 1..=horizon {
        let mut a = gauss::random_matrix(state_dim, state_dim, 1.0, rng);
        let norm = spectral_norm(&a);
        if norm > 0.95 {
            a *= 0.95 / norm;
        }
        let v = random_vec(state_dim, rng) * 0.5;
        fs.push(
            GaussMap::new(x.clone(), x.clone(), a, v, noise(state_dim, rng)).expect("valid map"),
        );
    }
    let gs = (0..=horizon)
        .map(|_| {
            let h = gauss::random_matrix(obs_dim, state_dim, 1.0, rng);
            let w = random_vec(obs_dim, rng) * 0.5;
            GaussMap::new(x.clone(), y.clone(), h, w, noise(obs_dim, rng)).expect("valid map")
        })
        .collect();
    HmmSpec::new(&cat, fs, gs).expect("generated maps chain")
}

/// Sample observations from a Gauss HMM.
pub fn gauss_observations<R: Rng + ?Sized>(
    hmm: &HmmSpec<GaussMap>,
    rng: &mut R,
) -> Vec<DVector<f64>> {
    let cat = Gauss::new();
    let mut obs = Vec::with_capacity(hmm.horizon() + 1);
    let mut x = DVector::zeros(0);
    for t in 0..=hmm.horizon() {
        let point = cat
            .point(cat.source(hmm.f(t)), &x)
            .expect("point of the right dimension");
        let state = cat.compose(&point, hmm.f(t)).expect("shapes chain");
        x = gauss::sample_gauss(&state, rng).expect("state");
        let point = cat.point(cat.source(hmm.g(t)), &x).expect("point");
        let ystate = cat.compose(&point, hmm.g(t)).expect("shapes chain");
        obs.push(gauss::sample_gauss(&ystate, rng).expect("state"));
    }
    obs
}

/// Stationary distribution of a stochastic matrix, by solving `(f - I) p = 0`
/// with the normalization replacing the last equation.
pub fn stationary(f: &StochasticKernel) -> Option<Vec<f64>> {
    let n = f.rows();
    let mut m = DMatrix::from_fn(n, n, |x, a| f.get(x, a) - if x == a { 1.0 } else { 0.0 });
    let mut rhs = DVector::zeros(n);
    for j in 0..n {
        m[(n - 1, j)] = 1.0;
    }
    rhs[n - 1] = 1.0;
    let p = m.lu().solve(&rhs)?;
    if p.iter().any(|v| *v < -1e-12) {
        return None;
    }
    let p: Vec<f64> = p.iter().map(|v| v.max(0.0)).collect();
    let s: f64 = p.iter().sum();
    Some(p.iter().map(|v| v / s).collect())
}

/// A positive transition matrix together with its stationary distribution.
pub fn stationary_pair<R: Rng + ?Sized>(
    size: usize,
    rng: &mut R,
) -> (StochasticKernel, StochasticKernel) {
    let x = Object::single(size);
    loop {
        let f = finstoch::random_kernel(&x, &x, 0.0, rng);
        if let Some(p) = stationary(&f) {
            let f0 = Kernel::state(x.clone(), p, 1e-9).expect("normalized");
            return (f, f0);
        }
    }
}

/// A symmetric doubly stochastic matrix with the uniform distribution.
pub fn reversible_pair<R: Rng + ?Sized>(
    size: usize,
    rng: &mut R,
) -> (StochasticKernel, StochasticKernel) {
    let x = Object::single(size);
    let mut m = DMatrix::<f64>::zeros(size, size);
    let terms = rng.random_range(1..=3);
    let weights = finstoch::random_vector(terms, 0.0, rng);
    for w in weights {
        let mut perm: Vec<usize> = (0..size).collect();
        for i in (1..size).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        for (a, &b) in perm.iter().enumerate() {
            m[(a, b)] += w / 2.0;
            m[(b, a)] += w / 2.0;
        }
    }
    let f = Kernel::from_fn(x.clone(), x.clone(), |a, y| m[(y, a)]);
    let f0 = Kernel::state(x, vec![1.0 / size as f64; size], 1e-9).expect("uniform");
    (f, f0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::hmm_joint;

    #[test]
    fn generated_models_respect_bounds() {
        let mut r = rng(3);
        let shape = Shape {
            horizon: 6,
            max_state: 4,
            max_obs: 4,
            joint_cap: 1_000_000,
        };
        for _ in 0..10 {
            let hmm = finstoch_hmm(&shape, 0.3, &mut r);
            let j = hmm_joint(&FinStoch::new(), &hmm).unwrap();
            assert!(j.state.rows() <= 1_000_000);
        }
    }

    #[test]
    fn stationary_and_reversible_fixtures() {
        let cat = FinStoch::new();
        let mut r = rng(5);
        for n in 2..=5 {
            let (f, f0) = stationary_pair(n, &mut r);
            assert!(cat.approx_eq(&cat.compose(&f0, &f).unwrap(), &f0));
            let (g, u) = reversible_pair(n, &mut r);
            assert_eq!(g.to_rows(), {
                let rows = g.to_rows();
                (0..n)
                    .map(|i| (0..n).map(|j| rows[j][i]).collect())
                    .collect::<Vec<Vec<f64>>>()
            });
            assert!(cat.approx_eq(&cat.compose(&u, &g).unwrap(), &u));
        }
    }

    #[test]
    fn gauss_models_are_reproducible() {
        let a = gauss_hmm(5, 3, 2, &mut rng(9));
        let b = gauss_hmm(5, 3, 2, &mut rng(9));
        assert_eq!(a.f(3), b.f(3));
        assert!(a.g(0).mean.amax() > 0.0);
        let obs = gauss_observations(&a, &mut rng(1));
        assert_eq!(obs.len(), 6);
    }
}

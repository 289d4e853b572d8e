//! Finite sets and stochastic matrices.

use rand::Rng;

use crate::category::{MarkovCategory, Object, OutputPartition};
use crate::error::{Error, Result};
use crate::finite::{Finite, Kernel};

/// The category of finite sets and stochastic matrices.
pub type FinStoch = Finite<f64>;

/// A column-stochastic matrix, `f(y | x)` at row `y`, column `x`.
pub type StochasticKernel = Kernel<f64>;

/// Check a row-major matrix (columns index the source) and build the kernel.
pub fn validate(rows: &[Vec<f64>]) -> Result<StochasticKernel> {
    Kernel::from_rows(rows, crate::finite::DEFAULT_FINITE_TOL)
}

/// Probability vector as a state on a single factor.
pub fn distribution(p: &[f64]) -> Result<StochasticKernel> {
    Kernel::state_vec(p.to_vec(), crate::finite::DEFAULT_FINITE_TOL)
}

/// Conditional of `A -> X ⊗ Y` on its last output factor, uniform on null branches.
pub fn condition_finstoch(joint: &StochasticKernel) -> Result<StochasticKernel> {
    let arity = joint.target().arity();
    if arity < 2 {
        return Err(Error::domain(
            "condition_finstoch: joint needs at least two outputs",
        ));
    }
    let part = OutputPartition::new((0..arity - 1).collect(), vec![arity - 1], arity)?;
    FinStoch::new().conditional(joint, &part)
}

/// Whether the state `p` on `X ⊗ Y ⊗ Z` satisfies `X ⊥ Z | Y` pointwise:
/// `p(x,y,z) p(y) = p(x,y) p(y,z)` within `tol`.
pub fn ci_holds_tol(p: &StochasticKernel, tol: f64) -> Result<bool> {
    Ok(ci_deviation(p)? <= tol)
}

/// Largest violation `|p(x,y,z) p(y) - p(x,y) p(y,z)|` over all triples.
pub fn ci_deviation(p: &StochasticKernel) -> Result<f64> {
    crate::finite::ci_deviation(p)
}

pub fn ci_holds(p: &StochasticKernel) -> Result<bool> {
    ci_holds_tol(p, crate::finite::DEFAULT_FINITE_TOL)
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_index<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in p.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Draw a flat index from a state.
pub fn sample<R: Rng + ?Sized>(d: &StochasticKernel, rng: &mut R) -> Result<usize> {
    if !d.source().is_unit() {
        return Err(Error::domain("sample: expects a distribution"));
    }
    Ok(sample_index(d.values(), rng))
}

/// Random probability vector; `sparsity` is the chance that an entry is zeroed
/// (one entry always stays positive).
pub fn random_vector<R: Rng + ?Sized>(n: usize, sparsity: f64, rng: &mut R) -> Vec<f64> {
    let keep = rng.random_range(0..n);
    let mut v: Vec<f64> = (0..n)
        .map(|i| {
            if i != keep && rng.random::<f64>() < sparsity {
                0.0
            } else {
                rng.random::<f64>() + 0.05
            }
        })
        .collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Random stochastic kernel between objects.
pub fn random_kernel<R: Rng + ?Sized>(
    source: &Object,
    target: &Object,
    sparsity: f64,
    rng: &mut R,
) -> StochasticKernel {
    let rows = crate::finite::cardinality(target);
    let cols = crate::finite::cardinality(source);
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..cols {
        data.extend(random_vector(rows, sparsity, rng));
    }
    Kernel::new(source.clone(), target.clone(), data, 1e-9).expect("random columns are normalized")
}

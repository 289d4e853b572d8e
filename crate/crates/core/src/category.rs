//! The Markov-category interface.
//!
//! Every algorithm in this crate (joint construction, filtering, smoothing,
//! the filter process) is written once against [`MarkovCategory`] and then
//! runs unchanged on finite probability, finite nondeterminism and Gaussian
//! maps.
//!
//! Objects are ordered lists of tensor factors. The empty list is the
//! monoidal unit `I`. Morphisms `A -> X` are immutable values; every
//! operation returns a fresh morphism.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which concrete category a value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Instance {
    FinStoch,
    FinSetMulti,
    Gauss,
}

impl Instance {
    pub fn as_str(self) -> &'static str {
        match self {
            Instance::FinStoch => "finstoch",
            Instance::FinSetMulti => "finsetmulti",
            Instance::Gauss => "gauss",
        }
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Instance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "finstoch" => Ok(Instance::FinStoch),
            "finsetmulti" => Ok(Instance::FinSetMulti),
            "gauss" => Ok(Instance::Gauss),
            other => Err(Error::domain(format!("unknown category '{other}'"))),
        }
    }
}

/// An object: an ordered list of tensor factors.
///
/// For finite instances each factor is a cardinality (at least 1); for
/// Gaussian maps each factor is a dimension (possibly 0).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Object {
    factors: Vec<usize>,
}

impl Object {
    pub fn unit() -> Self {
        Object { factors: vec![] }
    }

    pub fn new(factors: Vec<usize>) -> Self {
        Object { factors }
    }

    pub fn single(size: usize) -> Self {
        Object {
            factors: vec![size],
        }
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    /// Number of tensor factors.
    pub fn arity(&self) -> usize {
        self.factors.len()
    }

    pub fn is_unit(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn tensor(&self, other: &Object) -> Object {
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&other.factors);
        Object { factors }
    }

    /// The sub-object made of the listed factors, in the listed order.
    pub fn select(&self, idx: &[usize]) -> Object {
        Object {
            factors: idx.iter().map(|&i| self.factors[i]).collect(),
        }
    }

    pub fn factor(&self, i: usize) -> Object {
        Object::single(self.factors[i])
    }

    /// Factors `start..end` as an object.
    pub fn slice(&self, start: usize, end: usize) -> Object {
        Object {
            factors: self.factors[start..end].to_vec(),
        }
    }
}

impl fmt::Display for Object {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return f.write_str("I");
        }
        let parts: Vec<String> = self.factors.iter().map(|n| n.to_string()).collect();
        write!(f, "{}", parts.join("⊗"))
    }
}

/// Split of a target's factors into kept outputs and conditioned outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPartition {
    kept: Vec<usize>,
    conditioned: Vec<usize>,
}

impl OutputPartition {
    pub fn new(kept: Vec<usize>, conditioned: Vec<usize>, arity: usize) -> Result<Self> {
        let mut seen = vec![false; arity];
        for &i in kept.iter().chain(conditioned.iter()) {
            if i >= arity {
                return Err(Error::domain(format!(
                    "factor index {i} out of range for {arity} factors"
                )));
            }
            if seen[i] {
                return Err(Error::domain(format!("factor index {i} listed twice")));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::domain("partition does not cover every factor"));
        }
        Ok(OutputPartition { kept, conditioned })
    }

    /// Condition on `given` (in that order) and keep the rest in ascending order.
    pub fn conditioning_on(given: &[usize], arity: usize) -> Result<Self> {
        let kept = (0..arity).filter(|i| !given.contains(i)).collect();
        Self::new(kept, given.to_vec(), arity)
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    pub fn conditioned(&self) -> &[usize] {
        &self.conditioned
    }

    /// Target order with kept factors first, then conditioned ones.
    pub fn order(&self) -> Vec<usize> {
        self.kept
            .iter()
            .chain(self.conditioned.iter())
            .copied()
            .collect()
    }
}

pub(crate) fn check_permutation(order: &[usize], arity: usize) -> Result<()> {
    if order.len() != arity {
        return Err(Error::domain(format!(
            "permutation of length {} for {arity} factors",
            order.len()
        )));
    }
    let mut seen = vec![false; arity];
    for &i in order {
        if i >= arity || seen[i] {
            return Err(Error::domain(format!("invalid permutation {order:?}")));
        }
        seen[i] = true;
    }
    Ok(())
}

pub(crate) fn check_selection(keep: &[usize], arity: usize) -> Result<()> {
    let mut seen = vec![false; arity];
    for &i in keep {
        if i >= arity {
            return Err(Error::domain(format!(
                "factor index {i} out of range for {arity} factors"
            )));
        }
        if seen[i] {
            return Err(Error::domain(format!("factor index {i} listed twice")));
        }
        seen[i] = true;
    }
    Ok(())
}

/// A Markov category with conditionals, realized on concrete payloads.
///
/// `compose(f, g)` is `g ∘ f` (first `f`, then `g`). Output factors are
/// always addressed by index.
pub trait MarkovCategory: Send + Sync {
    type Morphism: Clone + fmt::Debug + Send + Sync;
    /// A concrete element of an object, used to build deterministic states.
    type Point: Clone + fmt::Debug + Send + Sync;

    fn instance(&self) -> Instance;

    fn check_object(&self, obj: &Object) -> Result<()>;

    fn source<'a>(&self, f: &'a Self::Morphism) -> &'a Object;
    fn target<'a>(&self, f: &'a Self::Morphism) -> &'a Object;

    fn identity(&self, obj: &Object) -> Self::Morphism;
    /// `X -> X ⊗ X`, where `X ⊗ X` repeats all factors of `X`.
    fn copy(&self, obj: &Object) -> Self::Morphism;
    fn discard(&self, obj: &Object) -> Self::Morphism;

    /// `g ∘ f`.
    fn compose(&self, f: &Self::Morphism, g: &Self::Morphism) -> Result<Self::Morphism>;
    fn tensor(&self, f: &Self::Morphism, g: &Self::Morphism) -> Self::Morphism;

    /// Reorder output factors: output `i` of the result is output `order[i]` of `f`.
    fn permute(&self, f: &Self::Morphism, order: &[usize]) -> Result<Self::Morphism>;
    /// Discard every output factor not listed in `keep`; kept factors appear in `keep` order.
    fn marginal(&self, f: &Self::Morphism, keep: &[usize]) -> Result<Self::Morphism>;
    /// Apply `g` to the contiguous output factors of `f` starting at `start`;
    /// the outputs of `g` take their place.
    fn apply_at(
        &self,
        f: &Self::Morphism,
        start: usize,
        g: &Self::Morphism,
    ) -> Result<Self::Morphism>;

    /// For `f: A -> T`, a conditional `A ⊗ Y -> X` where `Y` are the
    /// conditioned factors and `X` the kept ones, both in partition order.
    fn conditional(
        &self,
        f: &Self::Morphism,
        partition: &OutputPartition,
    ) -> Result<Self::Morphism>;

    fn is_deterministic(&self, f: &Self::Morphism) -> bool;

    /// Equality of parallel morphisms up to the instance tolerance.
    fn approx_eq(&self, f: &Self::Morphism, g: &Self::Morphism) -> bool;

    /// Largest entrywise deviation between two parallel morphisms, or `None`
    /// if they are not parallel.
    fn deviation(&self, f: &Self::Morphism, g: &Self::Morphism) -> Option<f64>;

    /// Whether the support of state `p` lies inside the support of state `q`.
    fn dominated(&self, p: &Self::Morphism, q: &Self::Morphism) -> Result<bool>;

    /// The deterministic state at a point of `obj`.
    fn point(&self, obj: &Object, p: &Self::Point) -> Result<Self::Morphism>;

    /// Probability (or possibility) that `state` assigns to a point; `None`
    /// when the instance has no point weights (continuous instances).
    fn point_weight(&self, state: &Self::Morphism, p: &Self::Point) -> Result<Option<f64>>;

    /// Posterior to report when an update conditions on an impossible
    /// observation. `conditioned` is what the generic conditional produced.
    fn degenerate_posterior(
        &self,
        predicted: &Self::Morphism,
        conditioned: Self::Morphism,
    ) -> Self::Morphism;

    /// Remove accumulated normalization drift from a state.
    fn renormalize(&self, state: Self::Morphism) -> Self::Morphism {
        state
    }

    /// Size measure used by the oracle cap (entries or stacked dimension).
    fn object_size(&self, obj: &Object) -> usize;
    fn oracle_cap(&self) -> usize;

    fn check_cap(&self, what: &str, obj: &Object) -> Result<()> {
        let requested = self.object_size(obj);
        let cap = self.oracle_cap();
        if requested > cap {
            return Err(Error::Resource {
                what: what.to_string(),
                requested,
                cap,
            });
        }
        Ok(())
    }

    /// The symmetry `X ⊗ Y -> Y ⊗ X`.
    fn swap(&self, x: &Object, y: &Object) -> Self::Morphism {
        let xy = x.tensor(y);
        let nx = x.arity();
        let order: Vec<usize> = (nx..xy.arity()).chain(0..nx).collect();
        self.permute(&self.identity(&xy), &order)
            .expect("swap order is a permutation")
    }

    /// `(id ⊗ k) ∘ copy ∘ f`: the outputs of `f` together with `k` applied to a copy of them.
    fn copy_then(&self, f: &Self::Morphism, k: &Self::Morphism) -> Result<Self::Morphism> {
        let z = self.target(f).clone();
        let doubled = self.apply_at(f, 0, &self.copy(&z))?;
        self.apply_at(&doubled, z.arity(), k)
    }

    /// Outputs of `f` with `k` applied to a copy of output factor `factor`,
    /// the result of `k` appended at the end.
    fn append_output(
        &self,
        f: &Self::Morphism,
        factor: usize,
        k: &Self::Morphism,
    ) -> Result<Self::Morphism> {
        let arity = self.target(f).arity();
        if factor >= arity {
            return Err(Error::domain(format!(
                "factor index {factor} out of range for {arity} factors"
            )));
        }
        let single = self.target(f).factor(factor);
        let doubled = self.apply_at(f, factor, &self.copy(&single))?;
        // the copy sits at factor + 1; move it to the end
        let order: Vec<usize> = (0..=arity)
            .filter(|&i| i != factor + 1)
            .chain(std::iter::once(factor + 1))
            .collect();
        let moved = self.permute(&doubled, &order)?;
        self.apply_at(&moved, arity, k)
    }

    /// Parametric Bayesian inverse of `f: X -> Y` with respect to `g: A -> X`,
    /// as a morphism `A ⊗ Y -> X`. For a state `g` this is the plain Bayesian inverse.
    fn bayes_inverse(&self, f: &Self::Morphism, g: &Self::Morphism) -> Result<Self::Morphism> {
        if self.source(f) != self.target(g) {
            return Err(Error::domain(format!(
                "bayes_inverse: kernel source {} does not match prior target {}",
                self.source(f),
                self.target(g)
            )));
        }
        let kx = self.target(g).arity();
        let ky = self.target(f).arity();
        let joint = self.copy_then(g, f)?;
        let part = OutputPartition::new((0..kx).collect(), (kx..kx + ky).collect(), kx + ky)?;
        self.conditional(&joint, &part)
    }

    /// Whether `f` and `g` agree `p`-almost surely, where `p: A -> X` feeds their common source.
    fn almost_surely_equal(
        &self,
        f: &Self::Morphism,
        g: &Self::Morphism,
        p: &Self::Morphism,
    ) -> Result<bool> {
        if self.source(f) != self.source(g) || self.target(f) != self.target(g) {
            return Err(Error::domain(
                "almost_surely_equal: morphisms are not parallel",
            ));
        }
        if self.target(p) != self.source(f) {
            return Err(Error::domain(format!(
                "almost_surely_equal: measure target {} does not match source {}",
                self.target(p),
                self.source(f)
            )));
        }
        let lhs = self.copy_then(p, f)?;
        let rhs = self.copy_then(p, g)?;
        Ok(self.approx_eq(&lhs, &rhs))
    }

    /// Plug states into the trailing inputs of `c: A ⊗ Y -> X`, giving `A -> X`.
    fn instantiate(&self, c: &Self::Morphism, inputs: &[Self::Morphism]) -> Result<Self::Morphism> {
        let mut plugged = self.identity(&Object::unit());
        for s in inputs {
            if !self.source(s).is_unit() {
                return Err(Error::domain("instantiate: inputs must be states"));
            }
            plugged = self.tensor(&plugged, s);
        }
        let src = self.source(c);
        let k = self.target(&plugged).arity();
        if k > src.arity() || src.slice(src.arity() - k, src.arity()) != *self.target(&plugged) {
            return Err(Error::domain(format!(
                "instantiate: trailing inputs of {} do not match {}",
                src,
                self.target(&plugged)
            )));
        }
        let head = src.slice(0, src.arity() - k);
        let feed = self.tensor(&self.identity(&head), &plugged);
        self.compose(&feed, c)
    }
}

/// A representable Markov category: distribution objects, sampling maps and
/// deterministic counterparts.
pub trait Representable: MarkovCategory {
    /// The distribution object `PX`.
    fn distribution_object(&self, obj: &Object) -> Result<Object>;
    /// `samp: PX -> X`.
    fn samp(&self, obj: &Object) -> Result<Self::Morphism>;
    /// The deterministic counterpart `f♯: A -> PX` of `f: A -> X`.
    fn sharp(&self, f: &Self::Morphism) -> Result<Self::Morphism>;
}

//! Finite sets and multivalued maps (entire relations, `1 + 1 = 1`).
//!
//! The category is representable: `PX` is the set of nonempty subsets of `X`,
//! enumerated by ascending bitmask, so subset index `i` is bitmask `i + 1`.

use rand::Rng;

use crate::category::{MarkovCategory, Object, OutputPartition, Representable};
use crate::error::{Error, Result};
use crate::finite::{cardinality, Finite, Kernel};

/// The category of finite sets and multivalued maps.
pub type FinSetMulti = Finite<bool>;

/// A boolean matrix `f(y | x)` with at least one possible `y` per `x`.
pub type MultiKernel = Kernel<bool>;

/// Largest base cardinality for which power objects are built.
pub const POWER_CAP: usize = 16;

/// Nonempty subsets of a finite set in ascending bitmask order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PowerObject {
    base: usize,
}

impl PowerObject {
    pub fn new(base: usize, cap: usize) -> Result<Self> {
        if base > cap {
            return Err(Error::Resource {
                what: "power object base".into(),
                requested: base,
                cap,
            });
        }
        if base == 0 {
            return Err(Error::validation("power object", "base set is empty"));
        }
        Ok(PowerObject { base })
    }

    pub fn base(&self) -> usize {
        self.base
    }

    /// Number of nonempty subsets, `2^n - 1`.
    pub fn size(&self) -> usize {
        (1usize << self.base) - 1
    }

    pub fn object(&self) -> Object {
        Object::single(self.size())
    }

    pub fn mask(&self, index: usize) -> u64 {
        index as u64 + 1
    }

    pub fn index(&self, mask: u64) -> Result<usize> {
        if mask == 0 || mask >> self.base != 0 {
            return Err(Error::domain(format!(
                "mask {mask:#b} is not a nonempty subset of a {}-set",
                self.base
            )));
        }
        Ok(mask as usize - 1)
    }

    pub fn members(&self, index: usize) -> Vec<usize> {
        members(self.mask(index))
    }
}

pub fn members(mask: u64) -> Vec<usize> {
    (0..64).filter(|i| mask >> i & 1 == 1).collect()
}

pub fn mask_of(set: &[bool]) -> u64 {
    set.iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .fold(0, |m, (i, _)| m | 1 << i)
}

/// Build a kernel from a row-major boolean matrix (columns index the source).
pub fn validate(rows: &[Vec<bool>]) -> Result<MultiKernel> {
    Kernel::from_rows(rows, 0.0)
}

/// A state given by its set of possible values.
pub fn subset_state(n: usize, members: &[usize]) -> Result<MultiKernel> {
    let mut v = vec![false; n];
    for &m in members {
        if m >= n {
            return Err(Error::domain(format!("element {m} outside a {n}-set")));
        }
        v[m] = true;
    }
    Kernel::state_vec(v, 0.0)
}

/// Conditional of `A -> X ⊗ Y` on its last output factor, full set on empty branches.
pub fn condition_multi(joint: &MultiKernel) -> Result<MultiKernel> {
    let arity = joint.target().arity();
    if arity < 2 {
        return Err(Error::domain(
            "condition_multi: joint needs at least two outputs",
        ));
    }
    let part = OutputPartition::new((0..arity - 1).collect(), vec![arity - 1], arity)?;
    FinSetMulti::new().conditional(joint, &part)
}

/// Random entire relation; each entry is possible with probability `density`.
pub fn random_kernel<R: Rng + ?Sized>(
    source: &Object,
    target: &Object,
    density: f64,
    rng: &mut R,
) -> MultiKernel {
    let rows = cardinality(target);
    let cols = cardinality(source);
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..cols {
        let keep = rng.random_range(0..rows);
        data.extend((0..rows).map(|i| i == keep || rng.random::<f64>() < density));
    }
    Kernel::new(source.clone(), target.clone(), data, 0.0).expect("every column has an entry")
}

impl FinSetMulti {
    pub fn power(&self, obj: &Object) -> Result<PowerObject> {
        PowerObject::new(cardinality(obj), POWER_CAP)
    }
}

impl Representable for FinSetMulti {
    fn distribution_object(&self, obj: &Object) -> Result<Object> {
        Ok(self.power(obj)?.object())
    }

    fn samp(&self, obj: &Object) -> Result<MultiKernel> {
        let p = self.power(obj)?;
        Ok(Kernel::from_fn(p.object(), obj.clone(), |s, x| {
            p.mask(s) >> x & 1 == 1
        }))
    }

    fn sharp(&self, f: &MultiKernel) -> Result<MultiKernel> {
        let p = self.power(f.target())?;
        let idx: Vec<usize> = (0..f.cols())
            .map(|a| p.index(mask_of(f.column(a))))
            .collect::<Result<_>>()?;
        Ok(Kernel::from_function(f.source().clone(), p.object(), |a| {
            idx[a]
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conditional_copies_verbatim() {
        // joint {(0,0), (1,0), (1,1)} with x first
        let joint =
            Kernel::state(Object::new(vec![2, 2]), vec![true, false, true, true], 0.0).unwrap();
        let c = condition_multi(&joint).unwrap();
        assert_eq!(c.column(0), &[true, true]);
        assert_eq!(c.column(1), &[false, true]);
    }

    #[test]
    fn empty_branch_is_full_set() {
        let joint = Kernel::state(
            Object::new(vec![3, 2]),
            vec![true, false, false, false, true, false],
            0.0,
        )
        .unwrap();
        let c = condition_multi(&joint).unwrap();
        assert_eq!(c.column(1), &[true, true, true]);
    }

    #[test]
    fn graph_conditional_is_point_valued() {
        let cat = FinSetMulti::new();
        let p = subset_state(3, &[0, 2]).unwrap();
        let f = Kernel::from_function(Object::single(3), Object::single(3), |x| (x + 1) % 3);
        let joint = cat.copy_then(&p, &f).unwrap();
        let c = condition_multi(&joint).unwrap();
        // image of {0, 2} is {1, 0}
        assert_eq!(c.column(1), &[true, false, false]);
        assert_eq!(c.column(0), &[false, false, true]);
    }

    #[test]
    fn sharp_and_samp() {
        let cat = FinSetMulti::new();
        let id = cat.identity(&Object::single(3));
        let s = cat.sharp(&id).unwrap();
        // x -> {x}: masks 1, 2, 4 -> indices 0, 1, 3
        for (x, idx) in [(0, 0), (1, 1), (2, 3)] {
            assert_eq!(s.support(x), vec![idx]);
        }

        let f = validate(&[vec![true, false], vec![true, true]]).unwrap();
        let fs = cat.sharp(&f).unwrap();
        assert_eq!(fs.support(0), vec![2]);
        assert!(cat.is_deterministic(&fs));
        let back = cat
            .compose(&fs, &cat.samp(&Object::single(2)).unwrap())
            .unwrap();
        assert_eq!(back, f);

        let samp = cat.samp(&Object::single(2)).unwrap();
        assert_eq!(
            samp.to_rows(),
            vec![vec![true, false, true], vec![false, true, true]]
        );
    }

    #[test]
    fn power_cap_is_enforced() {
        assert!(PowerObject::new(17, POWER_CAP).is_err());
        assert_eq!(PowerObject::new(4, POWER_CAP).unwrap().size(), 15);
    }

    #[test]
    fn composition_preserves_entireness() {
        let cat = FinSetMulti::new();
        let f = validate(&[vec![true, false], vec![false, true], vec![true, false]]).unwrap();
        let g = validate(&[vec![true, false, false], vec![false, true, true]]).unwrap();
        let h = cat.compose(&f, &g).unwrap();
        assert!(Kernel::new(
            h.source().clone(),
            h.target().clone(),
            h.values().to_vec(),
            0.0
        )
        .is_ok());
    }
}

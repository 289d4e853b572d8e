//! Dense kernels between finite sets, generic over the entry semiring.
//!
//! `f64` with ordinary arithmetic gives stochastic matrices; `bool` with
//! saturating addition (`1 + 1 = 1`) gives multivalued maps. Composition,
//! tensoring and marginalization are formally identical in both cases, so
//! they live here once.
//!
//! Storage: a kernel `A -> X` is column-major, one column per source point,
//! `data[a * |X| + x] = f(x | a)`. Points of a multi-factor object are
//! flattened row-major (first factor most significant).

use std::fmt;
use std::marker::PhantomData;

use crate::category::{
    check_permutation, check_selection, Instance, MarkovCategory, Object, OutputPartition,
};
use crate::error::{Error, Result};

/// Entry arithmetic of a finite Markov category.
pub trait Semiring: Copy + PartialEq + fmt::Debug + Send + Sync + 'static {
    const INSTANCE: Instance;

    fn zero() -> Self;
    fn one() -> Self;
    fn add(self, other: Self) -> Self;
    fn mul(self, other: Self) -> Self;
    fn is_zero(self) -> bool;
    /// Conditional entry `joint / marginal` for a nonzero marginal.
    fn divide(self, marginal: Self) -> Self;
    /// Entry of the fallback distribution on a set of `n` points.
    fn fallback(n: usize) -> Self;
    fn check_column(col: &[Self], tol: f64) -> std::result::Result<(), String>;
    fn close(a: Self, b: Self, tol: f64) -> bool;
    fn to_f64(self) -> f64;
    /// Rescale a column so it sums to one, where that is meaningful.
    fn normalize(_col: &mut [Self]) {}
}

impl Semiring for f64 {
    const INSTANCE: Instance = Instance::FinStoch;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn mul(self, other: Self) -> Self {
        self * other
    }
    fn is_zero(self) -> bool {
        self == 0.0
    }
    fn divide(self, marginal: Self) -> Self {
        self / marginal
    }
    fn fallback(n: usize) -> Self {
        1.0 / n as f64
    }
    fn check_column(col: &[Self], tol: f64) -> std::result::Result<(), String> {
        if let Some((i, v)) = col
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(format!("entry {i} is {v}, expected a nonnegative number"));
        }
        let sum: f64 = col.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(format!("column sums to {sum}, expected 1"));
        }
        Ok(())
    }
    fn close(a: Self, b: Self, tol: f64) -> bool {
        (a - b).abs() <= tol
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn normalize(col: &mut [Self]) {
        let s: f64 = col.iter().sum();
        if s > 0.0 {
            col.iter_mut().for_each(|v| *v /= s);
        }
    }
}

impl Semiring for bool {
    const INSTANCE: Instance = Instance::FinSetMulti;

    fn zero() -> Self {
        false
    }
    fn one() -> Self {
        true
    }
    fn add(self, other: Self) -> Self {
        self || other
    }
    fn mul(self, other: Self) -> Self {
        self && other
    }
    fn is_zero(self) -> bool {
        !self
    }
    fn divide(self, _marginal: Self) -> Self {
        self
    }
    fn fallback(_n: usize) -> Self {
        true
    }
    fn check_column(col: &[Self], _tol: f64) -> std::result::Result<(), String> {
        if col.iter().any(|&b| b) {
            Ok(())
        } else {
            Err("column has no possible outcome".to_string())
        }
    }
    fn close(a: Self, b: Self, _tol: f64) -> bool {
        a == b
    }
    fn to_f64(self) -> f64 {
        if self {
            1.0
        } else {
            0.0
        }
    }
}

/// Conditional independence of the outer factors of a three-factor state
/// given the middle one: the largest violation `|p(x,y,z) p(y) - p(x,y) p(y,z)|` over all triples.
pub fn ci_deviation<S: Semiring>(p: &Kernel<S>) -> Result<f64> {
    let f = p.target().factors();
    if !p.source().is_unit() || f.len() != 3 {
        return Err(Error::domain("ci_holds: expects a state on three factors"));
    }
    let (nx, ny, nz) = (f[0], f[1], f[2]);
    let v = p.values();
    let at = |x: usize, y: usize, z: usize| v[(x * ny + y) * nz + z];
    let mut pxy = vec![S::zero(); nx * ny];
    let mut pyz = vec![S::zero(); ny * nz];
    let mut py = vec![S::zero(); ny];
    for x in 0..nx {
        for y in 0..ny {
            for z in 0..nz {
                let w = at(x, y, z);
                pxy[x * ny + y] = pxy[x * ny + y].add(w);
                pyz[y * nz + z] = pyz[y * nz + z].add(w);
                py[y] = py[y].add(w);
            }
        }
    }
    let mut worst: f64 = 0.0;
    for x in 0..nx {
        for y in 0..ny {
            for z in 0..nz {
                let lhs = at(x, y, z).mul(py[y]).to_f64();
                let rhs = pxy[x * ny + y].mul(pyz[y * nz + z]).to_f64();
                worst = worst.max((lhs - rhs).abs());
            }
        }
    }
    Ok(worst)
}

/// Number of points of an object (1 for the unit).
pub fn cardinality(obj: &Object) -> usize {
    obj.factors().iter().product()
}

/// Row-major strides of the factors of `obj`.
fn strides(factors: &[usize]) -> Vec<usize> {
    let mut s = vec![1; factors.len()];
    for i in (0..factors.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * factors[i + 1];
    }
    s
}

/// Split a flat index into per-factor digits.
pub fn unflatten(mut index: usize, factors: &[usize]) -> Vec<usize> {
    let mut digits = vec![0; factors.len()];
    for i in (0..factors.len()).rev() {
        digits[i] = index % factors[i];
        index /= factors[i];
    }
    digits
}

pub fn flatten(digits: &[usize], factors: &[usize]) -> usize {
    digits
        .iter()
        .zip(factors)
        .fold(0, |acc, (&d, &n)| acc * n + d)
}

/// Image of every old flat index under a selection/reordering of factors.
fn index_map(factors: &[usize], selection: &[usize]) -> Vec<usize> {
    let new_factors: Vec<usize> = selection.iter().map(|&i| factors[i]).collect();
    let new_strides = strides(&new_factors);
    let mut contrib = vec![0; factors.len()];
    for (k, &i) in selection.iter().enumerate() {
        contrib[i] = new_strides[k];
    }
    let total: usize = factors.iter().product();
    let mut map = Vec::with_capacity(total);
    let mut digits = vec![0; factors.len()];
    let mut cur = 0;
    for _ in 0..total {
        map.push(cur);
        for i in (0..factors.len()).rev() {
            digits[i] += 1;
            cur += contrib[i];
            if digits[i] < factors[i] {
                break;
            }
            cur -= contrib[i] * factors[i];
            digits[i] = 0;
        }
    }
    map
}

/// A dense kernel `source -> target` with entries in `S`.
#[derive(Clone, PartialEq)]
pub struct Kernel<S> {
    source: Object,
    target: Object,
    data: Vec<S>,
}

impl<S: Semiring> fmt::Debug for Kernel<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("source", &self.source.to_string())
            .field("target", &self.target.to_string())
            .field("rows", &self.to_rows())
            .finish()
    }
}

impl<S: Semiring> Kernel<S> {
    /// Build without validating column normalization; shapes are still checked.
    pub(crate) fn raw(source: Object, target: Object, data: Vec<S>) -> Self {
        debug_assert_eq!(data.len(), cardinality(&source) * cardinality(&target));
        Kernel {
            source,
            target,
            data,
        }
    }

    /// Build from column-major data and validate every column.
    pub fn new(source: Object, target: Object, data: Vec<S>, tol: f64) -> Result<Self> {
        let rows = cardinality(&target);
        let cols = cardinality(&source);
        for (i, &n) in source.factors().iter().chain(target.factors()).enumerate() {
            if n == 0 {
                return Err(Error::validation(
                    format!("factor {i}"),
                    "finite factors need at least one element",
                ));
            }
        }
        if data.len() != rows * cols {
            return Err(Error::validation(
                "shape",
                format!("{} entries for a {rows}x{cols} kernel", data.len()),
            ));
        }
        for c in 0..cols {
            S::check_column(&data[c * rows..(c + 1) * rows], tol)
                .map_err(|m| Error::validation(format!("column {c}"), m))?;
        }
        Ok(Kernel {
            source,
            target,
            data,
        })
    }

    /// Build from a row-major matrix (rows index the target, columns the source)
    /// with single-factor source and target.
    pub fn from_rows(rows: &[Vec<S>], tol: f64) -> Result<Self> {
        let nrows = rows.len();
        if nrows == 0 {
            return Err(Error::validation("shape", "matrix has no rows"));
        }
        let ncols = rows[0].len();
        if let Some(r) = rows.iter().position(|r| r.len() != ncols) {
            return Err(Error::validation(
                format!("row {r}"),
                "matrix is not rectangular",
            ));
        }
        let mut data = Vec::with_capacity(nrows * ncols);
        for c in 0..ncols {
            for row in rows {
                data.push(row[c]);
            }
        }
        Self::new(Object::single(ncols), Object::single(nrows), data, tol)
    }

    /// A state on `target` from its probability (or possibility) vector.
    pub fn state(target: Object, values: Vec<S>, tol: f64) -> Result<Self> {
        Self::new(Object::unit(), target, values, tol)
    }

    /// A state on a single-factor object.
    pub fn state_vec(values: Vec<S>, tol: f64) -> Result<Self> {
        let n = values.len();
        Self::state(Object::single(n), values, tol)
    }

    /// Build `f(x | a) = entry(a, x)` over flat indices, without validation.
    pub fn from_fn(source: Object, target: Object, entry: impl Fn(usize, usize) -> S) -> Self {
        let rows = cardinality(&target);
        let cols = cardinality(&source);
        let mut data = Vec::with_capacity(rows * cols);
        for a in 0..cols {
            for x in 0..rows {
                data.push(entry(a, x));
            }
        }
        Kernel::raw(source, target, data)
    }

    /// Deterministic kernel of a function on flat indices.
    pub fn from_function(source: Object, target: Object, map: impl Fn(usize) -> usize) -> Self {
        Self::from_fn(source, target, |a, x| {
            if map(a) == x {
                S::one()
            } else {
                S::zero()
            }
        })
    }

    pub fn source(&self) -> &Object {
        &self.source
    }

    pub fn target(&self) -> &Object {
        &self.target
    }

    pub fn rows(&self) -> usize {
        cardinality(&self.target)
    }

    pub fn cols(&self) -> usize {
        cardinality(&self.source)
    }

    /// `f(x | a)` on flat indices.
    pub fn get(&self, x: usize, a: usize) -> S {
        self.data[a * self.rows() + x]
    }

    pub fn column(&self, a: usize) -> &[S] {
        let r = self.rows();
        &self.data[a * r..(a + 1) * r]
    }

    /// The values of a state.
    pub fn values(&self) -> &[S] {
        &self.data
    }

    /// Row-major matrix, rows index the target.
    pub fn to_rows(&self) -> Vec<Vec<S>> {
        (0..self.rows())
            .map(|x| (0..self.cols()).map(|a| self.get(x, a)).collect())
            .collect()
    }

    /// Same data with the target factors regrouped; the flat layout is unchanged.
    pub fn reshape_target(&self, target: Object) -> Result<Self> {
        if cardinality(&target) != self.rows() {
            return Err(Error::domain(format!(
                "cannot reshape target {} into {}",
                self.target, target
            )));
        }
        Ok(Kernel::raw(self.source.clone(), target, self.data.clone()))
    }

    pub fn reshape_source(&self, source: Object) -> Result<Self> {
        if cardinality(&source) != self.cols() {
            return Err(Error::domain(format!(
                "cannot reshape source {} into {}",
                self.source, source
            )));
        }
        Ok(Kernel::raw(source, self.target.clone(), self.data.clone()))
    }

    /// Support of a column.
    pub fn support(&self, a: usize) -> Vec<usize> {
        self.column(a)
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(i, _)| i)
            .collect()
    }
}

/// Nonzero entries of each column.
fn sparse_columns<S: Semiring>(k: &Kernel<S>) -> Vec<Vec<(usize, S)>> {
    (0..k.cols())
        .map(|a| {
            k.column(a)
                .iter()
                .enumerate()
                .filter(|(_, v)| !v.is_zero())
                .map(|(x, &v)| (x, v))
                .collect()
        })
        .collect()
}

/// A finite Markov category with entries in `S`.
#[derive(Debug, Clone, Copy)]
pub struct Finite<S> {
    /// Absolute tolerance for normalization checks and approximate equality.
    pub tol: f64,
    /// Largest number of joint-state entries an oracle may materialize.
    pub cap: usize,
    _entries: PhantomData<S>,
}

pub const DEFAULT_FINITE_TOL: f64 = 1e-12;
pub const DEFAULT_FINITE_CAP: usize = 1_000_000;

impl<S> Default for Finite<S> {
    fn default() -> Self {
        Finite {
            tol: DEFAULT_FINITE_TOL,
            cap: DEFAULT_FINITE_CAP,
            _entries: PhantomData,
        }
    }
}

impl<S: Semiring> Finite<S> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_tolerance(tol: f64) -> Self {
        Finite {
            tol,
            ..Self::default()
        }
    }

    /// Marginalize `p` onto the factor groups and merge each group into one
    /// factor (an empty group becomes a one-point factor).
    pub fn regroup(&self, p: &Kernel<S>, groups: &[Vec<usize>]) -> Result<Kernel<S>> {
        let keep: Vec<usize> = groups.iter().flatten().copied().collect();
        let m = self.marginal(p, &keep)?;
        let target = Object::new(
            groups
                .iter()
                .map(|g| g.iter().map(|&i| p.target.factors()[i]).product())
                .collect(),
        );
        m.reshape_target(target)
    }
}

impl<S: Semiring> MarkovCategory for Finite<S> {
    type Morphism = Kernel<S>;
    /// Flat index into the object.
    type Point = usize;

    fn instance(&self) -> Instance {
        S::INSTANCE
    }

    fn check_object(&self, obj: &Object) -> Result<()> {
        match obj.factors().iter().position(|&n| n == 0) {
            Some(i) => Err(Error::validation(
                format!("factor {i}"),
                "finite factors need at least one element",
            )),
            None => Ok(()),
        }
    }

    fn source<'a>(&self, f: &'a Kernel<S>) -> &'a Object {
        &f.source
    }

    fn target<'a>(&self, f: &'a Kernel<S>) -> &'a Object {
        &f.target
    }

    fn identity(&self, obj: &Object) -> Kernel<S> {
        Kernel::from_function(obj.clone(), obj.clone(), |a| a)
    }

    fn copy(&self, obj: &Object) -> Kernel<S> {
        let n = cardinality(obj);
        Kernel::from_function(obj.clone(), obj.tensor(obj), move |a| a * n + a)
    }

    fn discard(&self, obj: &Object) -> Kernel<S> {
        Kernel::from_function(obj.clone(), Object::unit(), |_| 0)
    }

    fn compose(&self, f: &Kernel<S>, g: &Kernel<S>) -> Result<Kernel<S>> {
        if f.target != g.source {
            return Err(Error::domain(format!(
                "compose: target {} does not match source {}",
                f.target, g.source
            )));
        }
        let (na, nx, ny) = (f.cols(), f.rows(), g.rows());
        let gnz = sparse_columns(g);
        let mut data = vec![S::zero(); na * ny];
        for a in 0..na {
            let out = &mut data[a * ny..(a + 1) * ny];
            for (x, &fx) in f.column(a).iter().enumerate() {
                if fx.is_zero() {
                    continue;
                }
                for &(y, gy) in &gnz[x] {
                    out[y] = out[y].add(fx.mul(gy));
                }
            }
        }
        debug_assert_eq!(nx, g.cols());
        Ok(Kernel::raw(f.source.clone(), g.target.clone(), data))
    }

    fn tensor(&self, f: &Kernel<S>, g: &Kernel<S>) -> Kernel<S> {
        let (nb, nx, ny) = (g.cols(), f.rows(), g.rows());
        Kernel::from_fn(
            f.source.tensor(&g.source),
            f.target.tensor(&g.target),
            |ab, xy| {
                let (a, b) = (ab / nb, ab % nb);
                let (x, y) = (xy / ny, xy % ny);
                debug_assert!(x < nx);
                f.get(x, a).mul(g.get(y, b))
            },
        )
    }

    fn permute(&self, f: &Kernel<S>, order: &[usize]) -> Result<Kernel<S>> {
        check_permutation(order, f.target.arity())?;
        let map = index_map(f.target.factors(), order);
        let rows = f.rows();
        let mut data = vec![S::zero(); f.data.len()];
        for a in 0..f.cols() {
            for (x, &v) in f.column(a).iter().enumerate() {
                data[a * rows + map[x]] = v;
            }
        }
        Ok(Kernel::raw(f.source.clone(), f.target.select(order), data))
    }

    fn marginal(&self, f: &Kernel<S>, keep: &[usize]) -> Result<Kernel<S>> {
        check_selection(keep, f.target.arity())?;
        let target = f.target.select(keep);
        let map = index_map(f.target.factors(), keep);
        let rows = cardinality(&target);
        let mut data = vec![S::zero(); rows * f.cols()];
        for a in 0..f.cols() {
            for (x, &v) in f.column(a).iter().enumerate() {
                let slot = &mut data[a * rows + map[x]];
                *slot = slot.add(v);
            }
        }
        Ok(Kernel::raw(f.source.clone(), target, data))
    }

    fn apply_at(&self, f: &Kernel<S>, start: usize, g: &Kernel<S>) -> Result<Kernel<S>> {
        let arity = f.target.arity();
        let k = g.source.arity();
        if start + k > arity || f.target.slice(start, start + k) != g.source {
            return Err(Error::domain(format!(
                "apply_at: factors {start}..{} of {} do not match source {}",
                start + k,
                f.target,
                g.source
            )));
        }
        let before = cardinality(&f.target.slice(0, start));
        let after = cardinality(&f.target.slice(start + k, arity));
        let (nx, nw) = (g.cols(), g.rows());
        let target = f
            .target
            .slice(0, start)
            .tensor(&g.target)
            .tensor(&f.target.slice(start + k, arity));
        let rows = before * nw * after;
        let gnz = sparse_columns(g);
        let mut data = vec![S::zero(); rows * f.cols()];
        for a in 0..f.cols() {
            let col = f.column(a);
            let out = &mut data[a * rows..(a + 1) * rows];
            for z1 in 0..before {
                for (x, gcol) in gnz.iter().enumerate() {
                    for z2 in 0..after {
                        let v = col[(z1 * nx + x) * after + z2];
                        if v.is_zero() {
                            continue;
                        }
                        for &(w, gw) in gcol {
                            let slot = &mut out[(z1 * nw + w) * after + z2];
                            *slot = slot.add(v.mul(gw));
                        }
                    }
                }
            }
        }
        Ok(Kernel::raw(f.source.clone(), target, data))
    }

    fn copy_then(&self, f: &Kernel<S>, k: &Kernel<S>) -> Result<Kernel<S>> {
        if f.target != k.source {
            return Err(Error::domain(format!(
                "copy_then: target {} does not match source {}",
                f.target, k.source
            )));
        }
        let (nz, nw) = (f.rows(), k.rows());
        let knz = sparse_columns(k);
        let rows = nz * nw;
        let mut data = vec![S::zero(); rows * f.cols()];
        for a in 0..f.cols() {
            let out = &mut data[a * rows..(a + 1) * rows];
            for (z, &v) in f.column(a).iter().enumerate() {
                if v.is_zero() {
                    continue;
                }
                for &(w, kw) in &knz[z] {
                    out[z * nw + w] = v.mul(kw);
                }
            }
        }
        Ok(Kernel::raw(
            f.source.clone(),
            f.target.tensor(&k.target),
            data,
        ))
    }

    fn conditional(&self, f: &Kernel<S>, partition: &OutputPartition) -> Result<Kernel<S>> {
        if partition.kept().len() + partition.conditioned().len() != f.target.arity() {
            return Err(Error::domain(
                "conditional: partition does not match target",
            ));
        }
        let arranged = self.permute(f, &partition.order())?;
        let kept = f.target.select(partition.kept());
        let given = f.target.select(partition.conditioned());
        let (nk, ng) = (cardinality(&kept), cardinality(&given));
        let source = f.source.tensor(&given);
        let mut data = Vec::with_capacity(f.cols() * ng * nk);
        for a in 0..f.cols() {
            let col = arranged.column(a);
            for y in 0..ng {
                let marginal = (0..nk).fold(S::zero(), |acc, x| acc.add(col[x * ng + y]));
                if marginal.is_zero() {
                    data.extend(std::iter::repeat_n(S::fallback(nk), nk));
                } else {
                    data.extend((0..nk).map(|x| col[x * ng + y].divide(marginal)));
                }
            }
        }
        Ok(Kernel::raw(source, kept, data))
    }

    fn is_deterministic(&self, f: &Kernel<S>) -> bool {
        (0..f.cols()).all(|a| {
            let col = f.column(a);
            let ones = col
                .iter()
                .filter(|&&v| S::close(v, S::one(), self.tol))
                .count();
            let zeros = col
                .iter()
                .filter(|&&v| S::close(v, S::zero(), self.tol))
                .count();
            ones == 1 && zeros == col.len() - 1
        })
    }

    fn approx_eq(&self, f: &Kernel<S>, g: &Kernel<S>) -> bool {
        f.source == g.source
            && f.target == g.target
            && f.data
                .iter()
                .zip(&g.data)
                .all(|(&a, &b)| S::close(a, b, self.tol))
    }

    fn deviation(&self, f: &Kernel<S>, g: &Kernel<S>) -> Option<f64> {
        if f.source != g.source || f.target != g.target {
            return None;
        }
        Some(
            f.data
                .iter()
                .zip(&g.data)
                .map(|(&a, &b)| (a.to_f64() - b.to_f64()).abs())
                .fold(0.0, f64::max),
        )
    }

    fn dominated(&self, p: &Kernel<S>, q: &Kernel<S>) -> Result<bool> {
        if !p.source.is_unit() || !q.source.is_unit() || p.target != q.target {
            return Err(Error::domain(
                "dominated: expects two states on the same object",
            ));
        }
        Ok(p.data
            .iter()
            .zip(&q.data)
            .all(|(a, b)| a.is_zero() || !b.is_zero()))
    }

    fn point(&self, obj: &Object, p: &usize) -> Result<Kernel<S>> {
        let n = cardinality(obj);
        if *p >= n {
            return Err(Error::domain(format!(
                "point {p} outside object {obj} of size {n}"
            )));
        }
        let p = *p;
        Ok(Kernel::from_function(
            Object::unit(),
            obj.clone(),
            move |_| p,
        ))
    }

    fn point_weight(&self, state: &Kernel<S>, p: &usize) -> Result<Option<f64>> {
        if !state.source.is_unit() {
            return Err(Error::domain("point_weight: expects a state"));
        }
        state
            .data
            .get(*p)
            .map(|v| Some(v.to_f64()))
            .ok_or_else(|| Error::domain(format!("point {p} outside {}", state.target)))
    }

    fn degenerate_posterior(&self, _predicted: &Kernel<S>, conditioned: Kernel<S>) -> Kernel<S> {
        conditioned
    }

    fn renormalize(&self, mut state: Kernel<S>) -> Kernel<S> {
        let rows = state.rows();
        for col in state.data.chunks_mut(rows.max(1)) {
            S::normalize(col);
        }
        state
    }

    fn object_size(&self, obj: &Object) -> usize {
        obj.factors()
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .unwrap_or(usize::MAX)
    }

    fn oracle_cap(&self) -> usize {
        self.cap
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type Fs = Finite<f64>;

    fn k(rows: &[&[f64]]) -> Kernel<f64> {
        Kernel::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(), 1e-12).unwrap()
    }

    #[test]
    fn flatten_round_trips() {
        let f = [2, 3, 4];
        for i in 0..24 {
            assert_eq!(flatten(&unflatten(i, &f), &f), i);
        }
        assert_eq!(unflatten(5, &f), vec![0, 1, 1]);
    }

    #[test]
    fn permute_swaps_factors() {
        let c = Fs::new();
        // p(x, y) with x in 2, y in 3
        let p = Kernel::state(
            Object::new(vec![2, 3]),
            vec![0.1, 0.2, 0.0, 0.3, 0.1, 0.3],
            1e-12,
        )
        .unwrap();
        let q = c.permute(&p, &[1, 0]).unwrap();
        assert_eq!(q.target().factors(), &[3, 2]);
        // q(y, x) = p(x, y)
        for x in 0..2 {
            for y in 0..3 {
                assert_eq!(q.values()[y * 2 + x], p.values()[x * 3 + y]);
            }
        }
    }

    #[test]
    fn apply_at_matches_tensor_with_identity() {
        let c = Fs::new();
        let p = Kernel::state(Object::new(vec![2, 2]), vec![0.1, 0.2, 0.3, 0.4], 1e-12).unwrap();
        let g = k(&[&[0.9, 0.2], &[0.1, 0.3], &[0.0, 0.5]]);
        let direct = c.apply_at(&p, 1, &g).unwrap();
        let via = c
            .compose(&p, &c.tensor(&c.identity(&Object::single(2)), &g))
            .unwrap();
        assert!(c.approx_eq(&direct, &via));
    }

    #[test]
    fn validation_reports_column() {
        let err = Kernel::from_rows(&[vec![0.5, 0.5], vec![0.4, 0.5]], 1e-12).unwrap_err();
        match err {
            Error::Validation { location, .. } => assert_eq!(location, "column 0"),
            e => panic!("unexpected {e:?}"),
        }
        assert!(Kernel::from_rows(&[vec![-0.1], vec![1.1]], 1e-12).is_err());
        assert!(Kernel::<bool>::from_rows(&[vec![false], vec![false]], 0.0).is_err());
    }

    #[test]
    fn regroup_merges_factors() {
        let c = Fs::new();
        let p = Kernel::state(Object::new(vec![2, 2, 2]), vec![0.125; 8], 1e-12).unwrap();
        let r = c.regroup(&p, &[vec![0, 2], vec![], vec![1]]).unwrap();
        assert_eq!(r.target().factors(), &[4, 1, 2]);
        assert!((r.values().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}

//! Executable Markov-category laws, checked on random morphisms.

use nalgebra::DMatrix;
use rand::Rng;

use crate::category::{MarkovCategory, Object, OutputPartition};
use crate::error::Result;
use crate::finite::{cardinality, Kernel, Semiring};
use crate::finsetmulti::{self, FinSetMulti};
use crate::finstoch::{self, FinStoch};
use crate::gauss::{self, coordinates, dim, Gauss, GaussMap};
use crate::models::HmmSpec;

/// Random test data for one instance.
pub trait LawFixture: MarkovCategory {
    fn random_object<R: Rng + ?Sized>(&self, rng: &mut R) -> Object;
    fn random_morphism<R: Rng + ?Sized>(
        &self,
        source: &Object,
        target: &Object,
        rng: &mut R,
    ) -> Self::Morphism;
    fn random_deterministic<R: Rng + ?Sized>(
        &self,
        source: &Object,
        target: &Object,
        rng: &mut R,
    ) -> Self::Morphism;
    /// A second conditional of `f` that differs from `c` only where the
    /// conditioned marginal gives no weight.
    fn alternative_conditional<R: Rng + ?Sized>(
        &self,
        f: &Self::Morphism,
        partition: &OutputPartition,
        c: &Self::Morphism,
        rng: &mut R,
    ) -> Result<Self::Morphism>;
}

fn random_finite_object<R: Rng + ?Sized>(rng: &mut R, max_card: usize) -> Object {
    loop {
        let arity = rng.random_range(1..=2);
        let factors: Vec<usize> = (0..arity).map(|_| rng.random_range(1..=max_card)).collect();
        if factors.iter().product::<usize>() <= max_card {
            return Object::new(factors);
        }
    }
}

fn random_function<R: Rng + ?Sized>(source: &Object, target: &Object, rng: &mut R) -> Vec<usize> {
    let n = cardinality(target);
    (0..cardinality(source))
        .map(|_| rng.random_range(0..n))
        .collect()
}

fn replace_null_columns<S: Semiring, R: Rng + ?Sized>(
    f: &Kernel<S>,
    partition: &OutputPartition,
    c: &Kernel<S>,
    rng: &mut R,
    mut column: impl FnMut(usize, &mut R) -> Vec<S>,
) -> Result<Kernel<S>> {
    let cat = crate::finite::Finite::<S>::new();
    let m = cat.marginal(f, partition.conditioned())?;
    let ny = m.rows();
    let rows = c.rows();
    let mut data = c.values().to_vec();
    for col in 0..c.cols() {
        let (a, y) = (col / ny, col % ny);
        if m.get(y, a).is_zero() {
            data[col * rows..(col + 1) * rows].copy_from_slice(&column(rows, rng));
        }
    }
    Ok(Kernel::raw(c.source().clone(), c.target().clone(), data))
}

impl LawFixture for FinStoch {
    fn random_object<R: Rng + ?Sized>(&self, rng: &mut R) -> Object {
        random_finite_object(rng, 5)
    }
    fn random_morphism<R: Rng + ?Sized>(&self, s: &Object, t: &Object, rng: &mut R) -> Kernel<f64> {
        finstoch::random_kernel(s, t, 0.4, rng)
    }
    fn random_deterministic<R: Rng + ?Sized>(
        &self,
        s: &Object,
        t: &Object,
        rng: &mut R,
    ) -> Kernel<f64> {
        let map = random_function(s, t, rng);
        Kernel::from_function(s.clone(), t.clone(), |a| map[a])
    }
    fn alternative_conditional<R: Rng + ?Sized>(
        &self,
        f: &Kernel<f64>,
        partition: &OutputPartition,
        c: &Kernel<f64>,
        rng: &mut R,
    ) -> Result<Kernel<f64>> {
        replace_null_columns(f, partition, c, rng, |n, rng| {
            finstoch::random_vector(n, 0.3, rng)
        })
    }
}

impl LawFixture for FinSetMulti {
    fn random_object<R: Rng + ?Sized>(&self, rng: &mut R) -> Object {
        random_finite_object(rng, 5)
    }
    fn random_morphism<R: Rng + ?Sized>(
        &self,
        s: &Object,
        t: &Object,
        rng: &mut R,
    ) -> Kernel<bool> {
        finsetmulti::random_kernel(s, t, 0.35, rng)
    }
    fn random_deterministic<R: Rng + ?Sized>(
        &self,
        s: &Object,
        t: &Object,
        rng: &mut R,
    ) -> Kernel<bool> {
        let map = random_function(s, t, rng);
        Kernel::from_function(s.clone(), t.clone(), |a| map[a])
    }
    fn alternative_conditional<R: Rng + ?Sized>(
        &self,
        f: &Kernel<bool>,
        partition: &OutputPartition,
        c: &Kernel<bool>,
        rng: &mut R,
    ) -> Result<Kernel<bool>> {
        replace_null_columns(f, partition, c, rng, |n, rng| {
            let keep = rng.random_range(0..n);
            (0..n).map(|i| i == keep || rng.random::<bool>()).collect()
        })
    }
}

impl LawFixture for Gauss {
    fn random_object<R: Rng + ?Sized>(&self, rng: &mut R) -> Object {
        loop {
            let arity = rng.random_range(1..=2);
            let factors: Vec<usize> = (0..arity).map(|_| rng.random_range(1..=2)).collect();
            if factors.iter().sum::<usize>() <= 4 {
                return Object::new(factors);
            }
        }
    }
    fn random_morphism<R: Rng + ?Sized>(&self, s: &Object, t: &Object, rng: &mut R) -> GaussMap {
        let n = dim(t);
        let rank = rng.random_range(0..=n);
        gauss::random_map(s, t, Some(rank), rng)
    }
    fn random_deterministic<R: Rng + ?Sized>(
        &self,
        s: &Object,
        t: &Object,
        rng: &mut R,
    ) -> GaussMap {
        gauss::random_map(s, t, Some(0), rng)
    }
    fn alternative_conditional<R: Rng + ?Sized>(
        &self,
        f: &GaussMap,
        partition: &OutputPartition,
        c: &GaussMap,
        rng: &mut R,
    ) -> Result<GaussMap> {
        let ys = coordinates(f.target(), partition.conditioned());
        let na = f.a.ncols();
        let ny = ys.len();
        let nx = c.mean.len();
        let n_mat = f.a.select_rows(&ys);
        let t = f.mean.select_rows(&ys);
        let cyy = f.cov.select_rows(&ys).select_columns(&ys);
        let proj = &cyy * self.pinv(&cyy);
        let off = (DMatrix::identity(ny, ny) - proj) * gauss::random_matrix(ny, ny, 1.0, rng);
        let z = gauss::random_matrix(nx, ny, 1.0, rng) * off.transpose();
        let mut a = c.a.clone();
        let shift_a = &z * &n_mat;
        for j in 0..na {
            for i in 0..nx {
                a[(i, j)] -= shift_a[(i, j)];
            }
        }
        for j in 0..ny {
            for i in 0..nx {
                a[(i, na + j)] += z[(i, j)];
            }
        }
        let mean = &c.mean - &z * &t;
        GaussMap::new(
            c.source().clone(),
            c.target().clone(),
            a,
            mean,
            c.cov.clone(),
        )
    }
}

/// Outcome of one law over all cases.
#[derive(Debug, Clone)]
pub struct LawCheck {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LawReport {
    pub checks: Vec<LawCheck>,
}

impl LawReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.failures == 0)
    }

    fn record(&mut self, name: &'static str, ok: bool, deviation: Option<f64>) {
        let idx = match self.checks.iter().position(|c| c.name == name) {
            Some(i) => i,
            None => {
                self.checks.push(LawCheck {
                    name,
                    cases: 0,
                    failures: 0,
                    max_deviation: 0.0,
                });
                self.checks.len() - 1
            }
        };
        let c = &mut self.checks[idx];
        c.cases += 1;
        if !ok {
            c.failures += 1;
        }
        c.max_deviation =
            c.max_deviation
                .max(deviation.unwrap_or(if ok { 0.0 } else { f64::INFINITY }));
    }

    fn compare<C: MarkovCategory>(
        &mut self,
        cat: &C,
        name: &'static str,
        f: &C::Morphism,
        g: &C::Morphism,
    ) {
        self.record(name, cat.approx_eq(f, g), cat.deviation(f, g));
    }

    fn compare_as<C: MarkovCategory>(
        &mut self,
        cat: &C,
        name: &'static str,
        f: &C::Morphism,
        g: &C::Morphism,
        p: &C::Morphism,
    ) -> Result<()> {
        let ok = cat.almost_surely_equal(f, g, p)?;
        let d = cat.deviation(&cat.copy_then(p, f)?, &cat.copy_then(p, g)?);
        self.record(name, ok, d);
        Ok(())
    }

    pub fn merge(&mut self, other: LawReport) {
        for c in other.checks {
            match self.checks.iter_mut().find(|d| d.name == c.name) {
                Some(d) => {
                    d.cases += c.cases;
                    d.failures += c.failures;
                    d.max_deviation = d.max_deviation.max(c.max_deviation);
                }
                None => self.checks.push(c),
            }
        }
    }
}

/// Rebuild `f` from its conditioned marginal and a conditional `c`.
pub fn reconstruct<C: MarkovCategory>(
    cat: &C,
    f: &C::Morphism,
    partition: &OutputPartition,
    c: &C::Morphism,
) -> Result<C::Morphism> {
    let a = cat.source(f).clone();
    let ka = a.arity();
    let ny = partition.conditioned().len();
    let nx = partition.kept().len();
    let m = cat.marginal(f, partition.conditioned())?;
    let s = cat.copy_then(&cat.identity(&a), &m)?;
    let r = cat.copy_then(&s, c)?;
    let yx: Vec<usize> = (ka..ka + ny + nx).collect();
    let r = cat.marginal(&r, &yx)?;
    let mut order = vec![0; nx + ny];
    for (i, &k) in partition.conditioned().iter().enumerate() {
        order[k] = i;
    }
    for (i, &k) in partition.kept().iter().enumerate() {
        order[k] = ny + i;
    }
    cat.permute(&r, &order)
}

/// `A -> A ⊗ Y`: the input together with the conditioned marginal of `f`.
fn conditioning_measure<C: MarkovCategory>(
    cat: &C,
    f: &C::Morphism,
    conditioned: &[usize],
) -> Result<C::Morphism> {
    let m = cat.marginal(f, conditioned)?;
    cat.copy_then(&cat.identity(cat.source(f)), &m)
}

fn random_partition<R: Rng + ?Sized>(arity: usize, rng: &mut R) -> Result<OutputPartition> {
    let split = rng.random_range(1..arity);
    let mut idx: Vec<usize> = (0..arity).collect();
    for i in (1..arity).rev() {
        idx.swap(i, rng.random_range(0..=i));
    }
    OutputPartition::new(idx[..split].to_vec(), idx[split..].to_vec(), arity)
}

/// Run every law once on freshly drawn objects and morphisms.
pub fn check_laws_once<C: LawFixture, R: Rng + ?Sized>(cat: &C, rng: &mut R) -> Result<LawReport> {
    let mut rep = LawReport::default();
    let x = cat.random_object(rng);
    let y = cat.random_object(rng);
    let z = cat.random_object(rng);
    let a = if rng.random_bool(0.3) {
        Object::unit()
    } else {
        cat.random_object(rng)
    };
    let (kx, ky, kz) = (x.arity(), y.arity(), z.arity());

    // comonoid structure
    let copy = cat.copy(&x);
    let id = cat.identity(&x);
    let left = cat.compose(&copy, &cat.tensor(&copy, &id))?;
    let right = cat.compose(&copy, &cat.tensor(&id, &copy))?;
    rep.compare(cat, "coassociativity", &left, &right);
    rep.compare(
        cat,
        "cocommutativity",
        &cat.compose(&copy, &cat.swap(&x, &x))?,
        &copy,
    );
    let first: Vec<usize> = (0..kx).collect();
    let second: Vec<usize> = (kx..2 * kx).collect();
    rep.compare(cat, "counitality", &cat.marginal(&copy, &first)?, &id);
    rep.compare(cat, "counitality", &cat.marginal(&copy, &second)?, &id);
    let xy = x.tensor(&y);
    let cxy = cat.copy(&xy);
    let order: Vec<usize> = (0..kx)
        .chain(2 * kx..2 * kx + ky)
        .chain(kx..2 * kx)
        .chain(2 * kx + ky..2 * (kx + ky))
        .collect();
    let both = cat.permute(&cat.tensor(&cat.copy(&x), &cat.copy(&y)), &order)?;
    rep.compare(cat, "copy on a tensor", &cxy, &both);

    // naturality of discard, marginals of copy
    let f = cat.random_morphism(&a, &xy, rng);
    rep.compare(
        cat,
        "discard naturality",
        &cat.compose(&f, &cat.discard(&xy))?,
        &cat.discard(&a),
    );
    let g = cat.random_morphism(&a, &x, rng);
    let gg = cat.copy_then(&g, &id)?;
    rep.compare(cat, "copy marginal", &cat.marginal(&gg, &first)?, &g);
    rep.compare(cat, "copy marginal", &cat.marginal(&gg, &second)?, &g);

    // conditionals
    let xyz = xy.tensor(&z);
    let h = cat.random_morphism(&a, &xyz, rng);
    let part = random_partition(xyz.arity(), rng)?;
    let c = cat.conditional(&h, &part)?;
    rep.compare(
        cat,
        "conditional reconstruction",
        &reconstruct(cat, &h, &part, &c)?,
        &h,
    );
    let c2 = cat.alternative_conditional(&h, &part, &c, rng)?;
    rep.compare(
        cat,
        "conditional reconstruction",
        &reconstruct(cat, &h, &part, &c2)?,
        &h,
    );
    let measure = conditioning_measure(cat, &h, part.conditioned())?;
    rep.compare_as(cat, "a.s. uniqueness", &c, &c2, &measure)?;

    // double conditional: condition on Z, then on Y, against conditioning on Z ⊗ Y
    let xs: Vec<usize> = (0..kx).collect();
    let ys: Vec<usize> = (kx..kx + ky).collect();
    let zs: Vec<usize> = (kx + ky..kx + ky + kz).collect();
    let on_z = cat.conditional(
        &h,
        &OutputPartition::new([xs.clone(), ys.clone()].concat(), zs.clone(), kx + ky + kz)?,
    )?;
    let then_y = cat.conditional(
        &on_z,
        &OutputPartition::new(xs.clone(), ys.clone(), kx + ky)?,
    )?;
    let joint_zy = cat.conditional(
        &h,
        &OutputPartition::new(xs.clone(), [zs.clone(), ys.clone()].concat(), kx + ky + kz)?,
    )?;
    let measure = conditioning_measure(cat, &h, &[zs.clone(), ys.clone()].concat())?;
    rep.compare_as(cat, "double conditional", &then_y, &joint_zy, &measure)?;

    // post-composition: (g ∘ (id_A ⊗ f))_{|Y} = g ∘ (id_A ⊗ f_{|Y})
    let b = cat.random_object(rng);
    let w = y.clone();
    let k = cat.random_morphism(&b, &w.tensor(&z), rng);
    let post = cat.random_morphism(&a.tensor(&w), &x, rng);
    let big = cat.apply_at(&cat.tensor(&cat.identity(&a), &k), 0, &post)?;
    let kw = w.arity();
    let k_cond = cat.conditional(
        &k,
        &OutputPartition::new((0..kw).collect(), (kw..kw + kz).collect(), kw + kz)?,
    )?;
    let via = cat.compose(&cat.tensor(&cat.identity(&a), &k_cond), &post)?;
    let big_cond = cat.conditional(
        &big,
        &OutputPartition::new(xs.clone(), (kx..kx + kz).collect(), kx + kz)?,
    )?;
    let measure = conditioning_measure(cat, &big, &(kx..kx + kz).collect::<Vec<_>>())?;
    rep.compare_as(cat, "post-composition coherence", &big_cond, &via, &measure)?;

    // marginalization: f_{X|Z} = (f_{|Z})_X
    let hxz = cat.marginal(&h, &[xs.clone(), zs.clone()].concat())?;
    let direct = cat.conditional(
        &hxz,
        &OutputPartition::new(xs.clone(), (kx..kx + kz).collect(), kx + kz)?,
    )?;
    let marg = cat.marginal(&on_z, &xs)?;
    let measure = conditioning_measure(cat, &h, &zs)?;
    rep.compare_as(cat, "marginalization coherence", &direct, &marg, &measure)?;

    // deterministic precomposition: (f ∘ (id ⊗ g))_{|Y} = f_{|Y} ∘ (id ⊗ g ⊗ id)
    let src = a.tensor(&b);
    let f2 = cat.random_morphism(&src, &xy, rng);
    let cc = cat.random_object(rng);
    let det = cat.random_deterministic(&cc, &b, rng);
    let pre = cat.tensor(&cat.identity(&a), &det);
    let part_y = OutputPartition::new(xs.clone(), ys.clone(), kx + ky)?;
    let lhs = cat.conditional(&cat.compose(&pre, &f2)?, &part_y)?;
    let f2_cond = cat.conditional(&f2, &part_y)?;
    let rhs = cat.compose(&cat.tensor(&pre, &cat.identity(&y)), &f2_cond)?;
    let measure = conditioning_measure(cat, &cat.compose(&pre, &f2)?, &ys)?;
    rep.compare_as(cat, "deterministic precomposition", &lhs, &rhs, &measure)?;

    // determinism characterization on copy: g ⊗ discard is a conditional of copy ∘ g iff g is deterministic
    let g3 = if rng.random_bool(0.5) {
        cat.random_deterministic(&cc, &b, rng)
    } else {
        cat.random_morphism(&cc, &b, rng)
    };
    let kb = b.arity();
    let copy_b = cat.copy(&b);
    let candidate = cat.tensor(&g3, &cat.discard(&b));
    let part_b = OutputPartition::new((0..kb).collect(), (kb..2 * kb).collect(), 2 * kb)?;
    let copied = cat.compose(&g3, &copy_b)?;
    let holds = cat.approx_eq(&reconstruct(cat, &copied, &part_b, &candidate)?, &copied);
    let copy_commutes = cat.approx_eq(
        &copied,
        &cat.compose(&cat.copy(&cc), &cat.tensor(&g3, &g3))?,
    );
    rep.record(
        "determinism characterization",
        holds == cat.is_deterministic(&g3) && holds == copy_commutes,
        None,
    );
    Ok(rep)
}

/// Run the law suite `cases` times.
pub fn check_laws<C: LawFixture, R: Rng + ?Sized>(
    cat: &C,
    cases: usize,
    rng: &mut R,
) -> Result<LawReport> {
    let mut rep = LawReport::default();
    for _ in 0..cases {
        rep.merge(check_laws_once(cat, rng)?);
    }
    Ok(rep)
}

/// Laws instantiated on the kernels of a model: discard naturality of every
/// `f_t` and `g_t`, and reconstruction of each joint of `X_t, Y_t` from its
/// conditional on `Y_t`.
pub fn check_model_laws<C: MarkovCategory>(
    cat: &C,
    hmm: &HmmSpec<C::Morphism>,
) -> Result<LawReport> {
    let mut rep = LawReport::default();
    let part = OutputPartition::new(vec![0], vec![1], 2)?;
    let mut prior = hmm.f(0).clone();
    for t in 0..=hmm.horizon() {
        if t > 0 {
            prior = cat.compose(&prior, hmm.f(t))?;
            let f = hmm.f(t);
            rep.compare(
                cat,
                "model discard naturality",
                &cat.compose(f, &cat.discard(cat.target(f)))?,
                &cat.discard(cat.source(f)),
            );
        }
        let g = hmm.g(t);
        rep.compare(
            cat,
            "model discard naturality",
            &cat.compose(g, &cat.discard(cat.target(g)))?,
            &cat.discard(cat.source(g)),
        );
        let joint = cat.copy_then(&prior, g)?;
        let c = cat.conditional(&joint, &part)?;
        rep.compare(
            cat,
            "model conditional reconstruction",
            &reconstruct(cat, &joint, &part, &c)?,
            &joint,
        );
    }
    Ok(rep)
}

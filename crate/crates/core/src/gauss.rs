//! Affine maps with additive Gaussian noise, `x ↦ A x + N(μ, Σ)`.
//!
//! Objects are lists of block dimensions; the total dimension is their sum.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::category::{
    check_permutation, check_selection, Instance, MarkovCategory, Object, OutputPartition,
};
use crate::error::{Error, Result};

pub fn dim(obj: &Object) -> usize {
    obj.factors().iter().sum()
}

/// Coordinate indices of the listed factors, in listed order.
pub(crate) fn coordinates(obj: &Object, selection: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(obj.arity());
    let mut acc = 0;
    for &d in obj.factors() {
        offsets.push(acc);
        acc += d;
    }
    selection
        .iter()
        .flat_map(|&i| offsets[i]..offsets[i] + obj.factors()[i])
        .collect()
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut(a.shape(), b.shape()).copy_from(b);
    out
}

/// An SVD-based Moore-Penrose pseudoinverse.
#[derive(Debug, Clone)]
pub struct Pseudoinverse {
    pub matrix: DMatrix<f64>,
    /// Relative rank tolerance: singular values below `tol * σ_max` count as zero.
    pub tol: f64,
    pub rank: usize,
    /// Ratio of the largest to the smallest retained singular value.
    pub condition: f64,
    pub result: DMatrix<f64>,
}

pub fn pinv(m: &DMatrix<f64>, tol: f64) -> Pseudoinverse {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Pseudoinverse {
            matrix: m.clone(),
            tol,
            rank: 0,
            condition: 1.0,
            result: DMatrix::zeros(c, r),
        };
    }
    let mut smallest = f64::INFINITY;
    let mut largest = 0.0f64;
    let (rank, result) = if r == c && *m == m.transpose() {
        let eig = SymmetricEigen::new(m.clone());
        let cutoff = tol * eig.eigenvalues.amax();
        let mut out = DMatrix::zeros(r, r);
        let mut rank = 0;
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            if l.abs() > cutoff && l != 0.0 {
                let q = eig.eigenvectors.column(k);
                out += (q * q.transpose()) / l;
                rank += 1;
                smallest = smallest.min(l.abs());
                largest = largest.max(l.abs());
            }
        }
        (rank, out)
    } else {
        // positive eigenpairs of [[0, M], [M^T, 0]] are (σ, (u; v) / √2)
        let mut aug = DMatrix::zeros(r + c, r + c);
        aug.view_mut((0, r), (r, c)).copy_from(m);
        aug.view_mut((r, 0), (c, r)).copy_from(&m.transpose());
        let eig = SymmetricEigen::new(aug);
        let cutoff = tol * eig.eigenvalues.max();
        let mut out = DMatrix::zeros(c, r);
        let mut rank = 0;
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            if l > cutoff && l > 0.0 {
                let w = eig.eigenvectors.column(k);
                let u = w.rows(0, r);
                let v = w.rows(r, c);
                out += (v * u.transpose()) * (2.0 / l);
                rank += 1;
                smallest = smallest.min(l);
                largest = largest.max(l);
            }
        }
        (rank, out)
    };
    Pseudoinverse {
        matrix: m.clone(),
        tol,
        rank,
        condition: if rank == 0 { 1.0 } else { largest / smallest },
        result,
    }
}

/// Symmetrize and clamp slightly negative eigenvalues to zero.
///
/// Eigenvalues below `-tol * max(1, |C|)` are reported as an error.
pub fn repair_cov(c: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    repair_cov_scaled(c, tol, 0.0)
}

/// As [`repair_cov`], with the tolerance scaled by `max(1, |C|, scale)`.
pub fn repair_cov_scaled(c: &DMatrix<f64>, tol: f64, scale: f64) -> Result<DMatrix<f64>> {
    let n = c.nrows();
    if n != c.ncols() {
        return Err(Error::domain("covariance is not square"));
    }
    let sym = (c + c.transpose()) * 0.5;
    if n == 0 {
        return Ok(sym);
    }
    if n == 1 {
        let v = sym[(0, 0)];
        if v < -tol * v.abs().max(1.0).max(scale) {
            return Err(Error::validation("cov", format!("negative variance {v}")));
        }
        return Ok(DMatrix::from_element(1, 1, v.max(0.0)));
    }
    let eig = SymmetricEigen::new(sym.clone());
    let min = eig.eigenvalues.min();
    let scale = max_abs(&sym).max(1.0).max(scale);
    if min >= -1e-14 * scale {
        return Ok(sym);
    }
    if min < -tol * scale {
        return Err(Error::validation(
            "cov",
            format!("not positive semidefinite (eigenvalue {min})"),
        ));
    }
    let clamped = eig.eigenvalues.map(|v| v.max(0.0));
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose())
}

/// `x ↦ A x + N(mean, cov)` from `source` to `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussMap {
    source: Object,
    target: Object,
    pub a: DMatrix<f64>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussMap {
    /// Checked constructor; the covariance is symmetrized and clamped.
    pub fn new(
        source: Object,
        target: Object,
        a: DMatrix<f64>,
        mean: DVector<f64>,
        cov: DMatrix<f64>,
    ) -> Result<Self> {
        let (n, m) = (dim(&target), dim(&source));
        if a.shape() != (n, m) {
            return Err(Error::validation(
                "a",
                format!("shape {:?}, expected ({n}, {m})", a.shape()),
            ));
        }
        if mean.len() != n {
            return Err(Error::validation(
                "mean",
                format!("length {}, expected {n}", mean.len()),
            ));
        }
        if cov.shape() != (n, n) {
            return Err(Error::validation(
                "cov",
                format!("shape {:?}, expected ({n}, {n})", cov.shape()),
            ));
        }
        if a.iter()
            .chain(mean.iter())
            .chain(cov.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::validation("map", "non-finite entry"));
        }
        let asym = max_abs(&(&cov - cov.transpose()));
        if asym > 1e-12 * max_abs(&cov).max(1.0) {
            return Err(Error::validation(
                "cov",
                format!("not symmetric (asymmetry {asym:e})"),
            ));
        }
        let cov = repair_cov(&cov, DEFAULT_PSD_TOL)?;
        Ok(GaussMap {
            source,
            target,
            a,
            mean,
            cov,
        })
    }

    /// A map between single blocks.
    pub fn affine(a: DMatrix<f64>, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let (n, m) = a.shape();
        Self::new(Object::single(m), Object::single(n), a, mean, cov)
    }

    /// The state `N(mean, cov)` on a single block.
    pub fn state(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        Self::new(
            Object::unit(),
            Object::single(n),
            DMatrix::zeros(n, 0),
            mean,
            cov,
        )
    }

    /// Scalar map `x ↦ a x + N(mean, var)`.
    pub fn scalar(a: f64, mean: f64, var: f64) -> Result<Self> {
        Self::affine(
            DMatrix::from_element(1, 1, a),
            DVector::from_element(1, mean),
            DMatrix::from_element(1, 1, var),
        )
    }

    pub fn scalar_state(mean: f64, var: f64) -> Result<Self> {
        Self::state(
            DVector::from_element(1, mean),
            DMatrix::from_element(1, 1, var),
        )
    }

    fn raw(
        source: Object,
        target: Object,
        a: DMatrix<f64>,
        mean: DVector<f64>,
        cov: DMatrix<f64>,
    ) -> Self {
        GaussMap {
            source,
            target,
            a,
            mean,
            cov,
        }
    }

    pub fn source(&self) -> &Object {
        &self.source
    }

    pub fn target(&self) -> &Object {
        &self.target
    }

    fn select_rows(&self, rows: &[usize], target: Object) -> GaussMap {
        GaussMap::raw(
            self.source.clone(),
            target,
            self.a.select_rows(rows),
            self.mean.select_rows(rows),
            self.cov.select_rows(rows).select_columns(rows),
        )
    }
}

pub const DEFAULT_GAUSS_TOL: f64 = 1e-9;
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
pub const DEFAULT_PSD_TOL: f64 = 1e-10;
pub const DEFAULT_DETERMINISM_TOL: f64 = 1e-10;
pub const DEFAULT_GAUSS_CAP: usize = 64;

/// The category of affine-Gaussian maps.
#[derive(Debug, Clone, Copy)]
pub struct Gauss {
    /// Relative tolerance of approximate equality.
    pub tol: f64,
    pub rank_tol: f64,
    pub psd_tol: f64,
    pub determinism_tol: f64,
    /// Largest stacked dimension an oracle may build.
    pub cap: usize,
}

impl Default for Gauss {
    fn default() -> Self {
        Gauss {
            tol: DEFAULT_GAUSS_TOL,
            rank_tol: DEFAULT_RANK_TOL,
            psd_tol: DEFAULT_PSD_TOL,
            determinism_tol: DEFAULT_DETERMINISM_TOL,
            cap: DEFAULT_GAUSS_CAP,
        }
    }
}

/// `|a - b| / max(1, |a|, |b|)` in the max norm.
pub fn relative_deviation(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = max_abs(a).max(max_abs(b)).max(1.0);
    max_abs(&(a - b)) / scale
}

fn vec_deviation(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let scale = a.amax().max(b.amax()).max(1.0);
    (a - b).amax() / scale
}

impl Gauss {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_tolerance(tol: f64) -> Self {
        Gauss {
            tol,
            ..Self::default()
        }
    }

    pub fn pinv(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        pinv(m, self.rank_tol).result
    }

    fn repair(&self, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        repair_cov(c, self.psd_tol)
    }

    /// Whether `v` lies in the range of the PSD matrix `s` (up to tolerance).
    pub fn in_range(&self, s: &DMatrix<f64>, v: &DVector<f64>) -> bool {
        if v.is_empty() {
            return true;
        }
        let proj = s * self.pinv(s);
        let resid = v - &proj * v;
        resid.amax() <= self.tol * v.amax().max(1.0)
    }
}

impl MarkovCategory for Gauss {
    type Morphism = GaussMap;
    type Point = DVector<f64>;

    fn instance(&self) -> Instance {
        Instance::Gauss
    }

    fn check_object(&self, _obj: &Object) -> Result<()> {
        Ok(())
    }

    fn source<'a>(&self, f: &'a GaussMap) -> &'a Object {
        &f.source
    }

    fn target<'a>(&self, f: &'a GaussMap) -> &'a Object {
        &f.target
    }

    fn identity(&self, obj: &Object) -> GaussMap {
        let n = dim(obj);
        GaussMap::raw(
            obj.clone(),
            obj.clone(),
            DMatrix::identity(n, n),
            DVector::zeros(n),
            DMatrix::zeros(n, n),
        )
    }

    fn copy(&self, obj: &Object) -> GaussMap {
        let n = dim(obj);
        let mut a = DMatrix::zeros(2 * n, n);
        a.view_mut((0, 0), (n, n)).fill_with_identity();
        a.view_mut((n, 0), (n, n)).fill_with_identity();
        GaussMap::raw(
            obj.clone(),
            obj.tensor(obj),
            a,
            DVector::zeros(2 * n),
            DMatrix::zeros(2 * n, 2 * n),
        )
    }

    fn discard(&self, obj: &Object) -> GaussMap {
        GaussMap::raw(
            obj.clone(),
            Object::unit(),
            DMatrix::zeros(0, dim(obj)),
            DVector::zeros(0),
            DMatrix::zeros(0, 0),
        )
    }

    fn compose(&self, f: &GaussMap, g: &GaussMap) -> Result<GaussMap> {
        if dim(&f.target) != dim(&g.source) || f.target != g.source {
            return Err(Error::domain(format!(
                "compose: target {} does not match source {}",
                f.target, g.source
            )));
        }
        let b = &g.a;
        let cov = b * &f.cov * b.transpose() + &g.cov;
        Ok(GaussMap::raw(
            f.source.clone(),
            g.target.clone(),
            b * &f.a,
            b * &f.mean + &g.mean,
            self.repair(&cov)?,
        ))
    }

    fn tensor(&self, f: &GaussMap, g: &GaussMap) -> GaussMap {
        let mut mean = DVector::zeros(f.mean.len() + g.mean.len());
        mean.rows_mut(0, f.mean.len()).copy_from(&f.mean);
        mean.rows_mut(f.mean.len(), g.mean.len()).copy_from(&g.mean);
        GaussMap::raw(
            f.source.tensor(&g.source),
            f.target.tensor(&g.target),
            block_diag(&f.a, &g.a),
            mean,
            block_diag(&f.cov, &g.cov),
        )
    }

    fn permute(&self, f: &GaussMap, order: &[usize]) -> Result<GaussMap> {
        check_permutation(order, f.target.arity())?;
        let rows = coordinates(&f.target, order);
        Ok(f.select_rows(&rows, f.target.select(order)))
    }

    fn marginal(&self, f: &GaussMap, keep: &[usize]) -> Result<GaussMap> {
        check_selection(keep, f.target.arity())?;
        let rows = coordinates(&f.target, keep);
        Ok(f.select_rows(&rows, f.target.select(keep)))
    }

    fn apply_at(&self, f: &GaussMap, start: usize, g: &GaussMap) -> Result<GaussMap> {
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
        let before = self.identity(&f.target.slice(0, start));
        let after = self.identity(&f.target.slice(start + k, arity));
        let lifted = self.tensor(&self.tensor(&before, g), &after);
        self.compose(f, &lifted)
    }

    fn conditional(&self, f: &GaussMap, partition: &OutputPartition) -> Result<GaussMap> {
        if partition.kept().len() + partition.conditioned().len() != f.target.arity() {
            return Err(Error::domain(
                "conditional: partition does not match target",
            ));
        }
        let xi = coordinates(&f.target, partition.kept());
        let eta = coordinates(&f.target, partition.conditioned());
        let m = f.a.select_rows(&xi);
        let n = f.a.select_rows(&eta);
        let s = f.mean.select_rows(&xi);
        let t = f.mean.select_rows(&eta);
        let cxx = f.cov.select_rows(&xi).select_columns(&xi);
        let cxy = f.cov.select_rows(&xi).select_columns(&eta);
        let cyy = f.cov.select_rows(&eta).select_columns(&eta);
        let inv = pinv(&cyy, self.rank_tol);
        let gain = &cxy * &inv.result;
        let mut a = DMatrix::zeros(xi.len(), f.a.ncols() + eta.len());
        a.view_mut((0, 0), (xi.len(), f.a.ncols()))
            .copy_from(&(&m - &gain * &n));
        a.view_mut((0, f.a.ncols()), (xi.len(), eta.len()))
            .copy_from(&gain);
        let cov = &cxx - &gain * cxy.transpose();
        Ok(GaussMap::raw(
            f.source.tensor(&f.target.select(partition.conditioned())),
            f.target.select(partition.kept()),
            a,
            &s - &gain * &t,
            // the Schur complement loses about eps * cond(C_ηη) relative to C_ξξ
            repair_cov_scaled(
                &cov,
                self.psd_tol.max(64.0 * f64::EPSILON * inv.condition),
                max_abs(&cxx),
            )?,
        ))
    }

    fn is_deterministic(&self, f: &GaussMap) -> bool {
        if f.cov.is_empty() {
            return true;
        }
        let eig = SymmetricEigen::new(f.cov.clone());
        eig.eigenvalues.amax() <= self.determinism_tol
    }

    fn approx_eq(&self, f: &GaussMap, g: &GaussMap) -> bool {
        self.deviation(f, g).is_some_and(|d| d <= self.tol)
    }

    fn deviation(&self, f: &GaussMap, g: &GaussMap) -> Option<f64> {
        if f.source != g.source || f.target != g.target {
            return None;
        }
        Some(
            relative_deviation(&f.a, &g.a)
                .max(vec_deviation(&f.mean, &g.mean))
                .max(relative_deviation(&f.cov, &g.cov)),
        )
    }

    fn dominated(&self, p: &GaussMap, q: &GaussMap) -> Result<bool> {
        if !p.source.is_unit() || !q.source.is_unit() || p.target != q.target {
            return Err(Error::domain(
                "dominated: expects two states on the same object",
            ));
        }
        let shift = &p.mean - &q.mean;
        if !self.in_range(&q.cov, &shift) {
            return Ok(false);
        }
        let proj = &q.cov * self.pinv(&q.cov);
        let resid = &p.cov - &proj * &p.cov;
        Ok(max_abs(&resid) <= self.tol * max_abs(&p.cov).max(1.0))
    }

    fn point(&self, obj: &Object, p: &DVector<f64>) -> Result<GaussMap> {
        let n = dim(obj);
        if p.len() != n {
            return Err(Error::domain(format!(
                "point of length {} on object of dimension {n}",
                p.len()
            )));
        }
        Ok(GaussMap::raw(
            Object::unit(),
            obj.clone(),
            DMatrix::zeros(n, 0),
            p.clone(),
            DMatrix::zeros(n, n),
        ))
    }

    fn point_weight(&self, state: &GaussMap, _p: &DVector<f64>) -> Result<Option<f64>> {
        if !state.source.is_unit() {
            return Err(Error::domain("point_weight: expects a state"));
        }
        Ok(None)
    }

    fn degenerate_posterior(&self, predicted: &GaussMap, _conditioned: GaussMap) -> GaussMap {
        predicted.clone()
    }

    fn object_size(&self, obj: &Object) -> usize {
        dim(obj)
    }

    fn oracle_cap(&self) -> usize {
        self.cap
    }
}

/// Draw from a state: `m + L z` with `L L^T = P` from an eigendecomposition.
pub fn sample_gauss<R: Rng + ?Sized>(state: &GaussMap, rng: &mut R) -> Result<DVector<f64>> {
    if !state.source.is_unit() {
        return Err(Error::domain("sample_gauss: expects a state"));
    }
    let n = state.mean.len();
    if n == 0 || max_abs(&state.cov) == 0.0 {
        return Ok(state.mean.clone());
    }
    let eig = SymmetricEigen::new(state.cov.clone());
    let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(&state.mean + &eig.eigenvectors * root.component_mul(&(eig.eigenvectors.transpose() * z)))
}

pub fn random_matrix<R: Rng + ?Sized>(r: usize, c: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Random PSD matrix of the given rank (`L L^T` with `L` of shape n×rank).
pub fn random_psd<R: Rng + ?Sized>(n: usize, rank: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    let l = random_matrix(n, rank, scale, rng);
    let c = &l * l.transpose();
    (&c + c.transpose()) * 0.5
}

/// Random map between objects; `rank` caps the noise rank (`None` for full rank).
pub fn random_map<R: Rng + ?Sized>(
    source: &Object,
    target: &Object,
    rank: Option<usize>,
    rng: &mut R,
) -> GaussMap {
    let (n, m) = (dim(target), dim(source));
    let r = rank.unwrap_or(n).min(n);
    GaussMap::new(
        source.clone(),
        target.clone(),
        random_matrix(n, m, 1.0, rng),
        DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal)),
        random_psd(n, r, 1.0, rng),
    )
    .expect("random map is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn compose_by_hand() {
        let g = Gauss::new();
        let f = GaussMap::scalar(2.0, 1.0, 1.0).unwrap();
        let h = GaussMap::scalar(3.0, 0.0, 4.0).unwrap();
        let c = g.compose(&f, &h).unwrap();
        assert!(close(c.a[(0, 0)], 6.0) && close(c.mean[0], 3.0) && close(c.cov[(0, 0)], 13.0));
        let id = g.identity(&Object::single(1));
        assert!(g.approx_eq(&g.compose(&f, &id).unwrap(), &f));
    }

    #[test]
    fn tensor_is_block_diagonal() {
        let g = Gauss::new();
        let p = g.tensor(
            &GaussMap::scalar_state(1.0, 2.0).unwrap(),
            &GaussMap::scalar_state(3.0, 4.0).unwrap(),
        );
        assert_eq!(p.mean.as_slice(), &[1.0, 3.0]);
        assert_eq!(p.cov, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]));
    }

    #[test]
    fn copy_stacks_identity() {
        let c = Gauss::new().copy(&Object::single(1));
        assert_eq!(c.a.as_slice(), &[1.0, 1.0]);
        assert_eq!(max_abs(&c.cov), 0.0);
    }

    fn joint(mean: [f64; 2], cov: [f64; 4]) -> GaussMap {
        GaussMap::new(
            Object::unit(),
            Object::new(vec![1, 1]),
            DMatrix::zeros(2, 0),
            DVector::from_row_slice(&mean),
            DMatrix::from_row_slice(2, 2, &cov),
        )
        .unwrap()
    }

    #[test]
    fn marginal_drops_blocks() {
        let g = Gauss::new();
        let m = g
            .marginal(&joint([1.0, 2.0], [2.0, 1.0, 1.0, 1.0]), &[0])
            .unwrap();
        assert_eq!(m.mean[0], 1.0);
        assert_eq!(m.cov[(0, 0)], 2.0);
    }

    #[test]
    fn conditional_by_hand() {
        let g = Gauss::new();
        let p = joint([0.0, 0.0], [2.0, 1.0, 1.0, 1.0]);
        let part = OutputPartition::conditioning_on(&[1], 2).unwrap();
        let c = g.conditional(&p, &part).unwrap();
        assert!(close(c.a[(0, 0)], 1.0) && close(c.mean[0], 0.0) && close(c.cov[(0, 0)], 1.0));

        // deterministic conditioning output: coefficient 0, conditional is the marginal
        let d = joint([1.0, 5.0], [2.0, 0.0, 0.0, 0.0]);
        let c = g.conditional(&d, &part).unwrap();
        assert!(close(c.a[(0, 0)], 0.0) && close(c.mean[0], 1.0) && close(c.cov[(0, 0)], 2.0));
    }

    #[test]
    fn bayes_inverse_by_hand() {
        let g = Gauss::new();
        let f = GaussMap::scalar(1.0, 0.0, 1.0).unwrap();
        let p = GaussMap::scalar_state(0.0, 1.0).unwrap();
        let inv = g.bayes_inverse(&f, &p).unwrap();
        assert!(
            close(inv.a[(0, 0)], 0.5) && close(inv.mean[0], 0.0) && close(inv.cov[(0, 0)], 0.5)
        );
    }

    #[test]
    fn pinv_examples() {
        let i = DMatrix::<f64>::identity(3, 3);
        assert_eq!(pinv(&i, 1e-10).result, i);
        let d = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let p = pinv(&d, 1e-10);
        assert_eq!(p.rank, 1);
        assert!(close(p.result[(0, 0)], 0.5) && close(max_abs(&p.result), 0.5));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_matrix(3, 2, 1.0, &mut rng);
        let mp = pinv(&m, 1e-10).result;
        assert!(relative_deviation(&(&m * &mp * &m), &m) < 1e-8);
        assert!(relative_deviation(&(&mp * &m * &mp), &mp) < 1e-8);
        let mmp = &m * &mp;
        assert!(relative_deviation(&mmp, &mmp.transpose()) < 1e-8);
        let mpm = &mp * &m;
        assert!(relative_deviation(&mpm, &mpm.transpose()) < 1e-8);
    }

    #[test]
    fn pinv_of_nearly_rank_one_covariance() {
        let c = DMatrix::from_row_slice(
            4,
            4,
            &[
                2.1298038026630017,
                1.152649466934097,
                -3.728156506079446,
                -0.731163894022648,
                1.152649466934097,
                0.6238137015072658,
                -2.0176776865579185,
                -0.3957057789233446,
                -3.728156506079446,
                -2.0176776865579185,
                6.526024095009923,
                1.2798800645874495,
                -0.731163894022648,
                -0.3957057789233446,
                1.2798800645874495,
                0.2510093367538943,
            ],
        );
        let p = pinv(&c, 1e-10);
        assert_eq!(p.rank, 1);
        assert!(relative_deviation(&(&c * &p.result * &c), &c) < 1e-12);
    }

    #[test]
    fn repair_clamps_small_negatives_only() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 - 1e-12]);
        let r = repair_cov(&c, 1e-10).unwrap();
        assert!(SymmetricEigen::new(r).eigenvalues.min() >= -1e-15);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.1]);
        assert!(repair_cov(&bad, 1e-10).is_err());
    }

    #[test]
    fn determinism_is_zero_noise() {
        let g = Gauss::new();
        assert!(g.is_deterministic(&GaussMap::scalar(2.0, 1.0, 0.0).unwrap()));
        assert!(!g.is_deterministic(&GaussMap::scalar(2.0, 1.0, 1e-6).unwrap()));
    }

    #[test]
    fn sampling() {
        let s = GaussMap::scalar_state(4.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(sample_gauss(&s, &mut rng).unwrap()[0], 4.0);

        let s = GaussMap::scalar_state(1.0, 2.5).unwrap();
        let a = sample_gauss(&s, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = sample_gauss(&s, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);

        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_gauss(&s, &mut rng).unwrap()[0])
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 2.5).abs() < 0.05 * 2.5);
    }

    #[test]
    fn domination_is_range_inclusion() {
        let g = Gauss::new();
        let q = joint([0.0, 0.0], [1.0, 1.0, 1.0, 1.0]);
        let on_line = g
            .point(
                &Object::new(vec![1, 1]),
                &DVector::from_row_slice(&[2.0, 2.0]),
            )
            .unwrap();
        let off_line = g
            .point(
                &Object::new(vec![1, 1]),
                &DVector::from_row_slice(&[2.0, 1.0]),
            )
            .unwrap();
        assert!(g.dominated(&on_line, &q).unwrap());
        assert!(!g.dominated(&off_line, &q).unwrap());
    }
}

//! Point sets on (or near) the unit sphere and index selections into them.

mod io;
mod subsets;

use std::fmt;

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_pointset, parse_pointset, save_pointset, write_pointset, Format};
pub use subsets::{binomial, enumerate_index_sets, family_size, IndexSets};
pub(crate) use subsets::visit_with_first;

/// Norm deviation tolerated for points that are supposed to lie on the sphere.
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// Default singular value threshold for [`is_generic`].
pub const DEFAULT_GENERICITY_TOL: f64 = 1e-10;

/// Above this many points genericity is spot-checked instead of exhaustive.
pub const EXHAUSTIVE_GENERICITY_MAX_N: usize = 25;

/// Number of random subsets drawn when the check is not exhaustive.
pub const GENERICITY_SPOT_CHECKS: usize = 100_000;

/// `N` points in `R^d`, stored column-major as a `d × N` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    len: usize,
    data: Vec<f64>,
}

impl PointSet {
    /// Builds a point set from column-major data (`data.len() == dim * N`).
    pub fn from_columns(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("dimension must be positive".into()));
        }
        if data.is_empty() || data.len() % dim != 0 {
            return Err(Error::Shape(format!(
                "{} coordinates do not form a non-empty set of {dim}-dimensional points",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Shape(format!(
                "non-finite coordinate {} of point {}",
                pos % dim + 1,
                pos / dim + 1
            )));
        }
        let len = data.len() / dim;
        Ok(Self { dim, len, data })
    }

    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        let dim = points
            .first()
            .map(|p| p.as_ref().len())
            .ok_or_else(|| Error::Shape("empty point set".into()))?;
        let mut data = Vec::with_capacity(dim * points.len());
        for (i, p) in points.iter().enumerate() {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::Shape(format!(
                    "point {} has {} coordinates, expected {dim}",
                    i + 1,
                    p.len()
                )));
            }
            data.extend_from_slice(p);
        }
        Self::from_columns(dim, data)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of points `N`.
    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Column-major coordinates.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn max_norm_deviation(&self) -> (usize, f64) {
        self.points()
            .map(norm)
            .enumerate()
            .fold((0, 0.0), |best, (i, r)| {
                let dev = (r - 1.0).abs();
                if dev > best.1 {
                    (i, dev)
                } else {
                    best
                }
            })
    }

    pub fn is_on_sphere(&self, tol: f64) -> bool {
        self.max_norm_deviation().1 <= tol
    }

    /// Fails with [`Error::NotOnSphere`] naming the worst point.
    pub fn check_on_sphere(&self, tol: f64) -> Result<()> {
        let (i, dev) = self.max_norm_deviation();
        if dev > tol {
            Err(Error::NotOnSphere {
                index: i + 1,
                norm: norm(self.point(i)),
            })
        } else {
            Ok(())
        }
    }

    /// Projects every point radially onto the sphere.
    pub fn normalized(&self) -> Result<PointSet> {
        let mut data = self.data.clone();
        for (i, p) in data.chunks_exact_mut(self.dim).enumerate() {
            let r = norm(p);
            if r == 0.0 {
                return Err(Error::domain(format!("point {} is the origin", i + 1)));
            }
            p.iter_mut().for_each(|v| *v /= r);
        }
        PointSet::from_columns(self.dim, data)
    }

    pub fn scaled(&self, factor: f64) -> PointSet {
        PointSet {
            data: self.data.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// Copy with point `i` replaced.
    pub fn with_point(&self, i: usize, p: &[f64]) -> Result<PointSet> {
        if p.len() != self.dim || i >= self.len {
            return Err(Error::Shape(format!("cannot place point {} of length {}", i + 1, p.len())));
        }
        let mut data = self.data.clone();
        data[i * self.dim..(i + 1) * self.dim].copy_from_slice(p);
        PointSet::from_columns(self.dim, data)
    }

    /// Point `j` of the result is point `perm[j]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<PointSet> {
        let mut seen = vec![false; self.len];
        if perm.len() != self.len || perm.iter().any(|&p| p >= self.len || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::invalid("not a permutation of the point indices"));
        }
        let mut data = Vec::with_capacity(self.data.len());
        for &p in perm {
            data.extend_from_slice(self.point(p));
        }
        PointSet::from_columns(self.dim, data)
    }

    /// Euclidean (Frobenius) distance between two point sets of equal shape.
    pub fn distance(&self, other: &PointSet) -> f64 {
        assert_eq!((self.dim, self.len), (other.dim, other.len), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    fn submatrix(&self, indices: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, indices.len(), |r, c| self.point(indices[c])[r])
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A strictly increasing selection of point indices.
///
/// Indices are 0-based in the API; [`fmt::Display`] and
/// [`IndexSet::one_based`] present them 1-based. The rank `τ(l)` of an
/// index is its position in the sorted list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("index set must not be empty"));
        }
        if !indices.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid(format!(
                "index set {indices:?} is not strictly increasing"
            )));
        }
        Ok(Self(indices))
    }

    /// Accepts indices in any order; duplicates are an error.
    pub fn from_unsorted(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        Self::new(indices)
    }

    /// Parses a 1-based, comma separated list such as `"1,2"`.
    pub fn parse_one_based(s: &str) -> Result<Self> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let v: usize = part
                .parse()
                .map_err(|_| Error::invalid(format!("bad index {part:?} in {s:?}")))?;
            if v == 0 {
                return Err(Error::invalid("indices are 1-based"));
            }
            out.push(v - 1);
        }
        Self::from_unsorted(out)
    }

    pub(crate) fn from_sorted_unchecked(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Self(indices)
    }

    #[inline]
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, l: usize) -> bool {
        self.rank(l).is_some()
    }

    /// 0-based position of `l` within the set.
    pub fn rank(&self, l: usize) -> Option<usize> {
        self.0.binary_search(&l).ok()
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|i| i + 1).collect()
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}

/// Outcome of [`is_generic`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenericityReport {
    pub generic: bool,
    /// Smallest singular value seen over the tested maximal subsets.
    pub worst_sigma_min: f64,
    /// 1-based indices of the subset attaining `worst_sigma_min`.
    pub worst_subset: Vec<usize>,
    pub subsets_checked: u64,
    /// `false` when only a random sample of subsets was tested.
    pub exhaustive: bool,
}

/// Tests whether every selection of at most `d` points is linearly
/// independent, via the smallest singular value of each maximal selection
/// (`min(d, N)` columns). Dependent smaller selections always extend to a
/// dependent maximal one, so only those are checked.
///
/// Exhaustive for `N <= 25`; otherwise [`GENERICITY_SPOT_CHECKS`] random
/// maximal selections are tested (the discrepancy enumeration itself then
/// certifies every subset it visits).
pub fn is_generic(x: &PointSet, tol: f64) -> GenericityReport {
    let n = x.len();
    let k = x.dim().min(n);
    let mut worst = f64::INFINITY;
    let mut worst_subset: Vec<usize> = (0..k).collect();
    let mut checked = 0u64;
    let mut consider = |idx: &[usize]| {
        let s = sigma_min(&x.submatrix(idx));
        checked += 1;
        if s < worst {
            worst = s;
            worst_subset = idx.to_vec();
        }
    };

    let exhaustive = n <= EXHAUSTIVE_GENERICITY_MAX_N
        || binomial(n, k) <= GENERICITY_SPOT_CHECKS as u64;
    if exhaustive {
        for set in enumerate_index_sets(n, k, k) {
            consider(set.as_slice());
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6765_6e65_7269_63);
        for _ in 0..GENERICITY_SPOT_CHECKS {
            let mut idx = sample_indices(&mut rng, n, k).into_vec();
            idx.sort_unstable();
            consider(&idx);
        }
    }
    GenericityReport {
        generic: worst > tol,
        worst_sigma_min: worst,
        worst_subset: worst_subset.iter().map(|i| i + 1).collect(),
        subsets_checked: checked,
        exhaustive,
    }
}

fn sigma_min(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().copied().fold(f64::INFINITY, f64::min)
}

/// `n` independent uniform points on `S^{d-1}` (normalized Gaussians),
/// reproducible from `seed`.
pub fn sample_uniform_sphere(d: usize, n: usize, seed: u64) -> Result<PointSet> {
    if d < 2 {
        return Err(Error::UnsupportedDimension { d, min: 2 });
    }
    if n == 0 {
        return Err(Error::invalid("need at least one point"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(d * n);
    for _ in 0..n {
        data.extend(random_unit_vector(&mut rng, d));
    }
    PointSet::from_columns(d, data)
}

pub(crate) fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let r = norm(&v);
        if r > 1e-150 {
            return v.into_iter().map(|x| x / r).collect();
        }
    }
}

//! Exact spherical cap discrepancy of generic point sets.
//!
//! For a generic set every index selection `I` with `#I <= d` determines a
//! unique cap whose boundary passes through the selected points:
//!
//! ```text
//! t_I = (1ᵀ (X_Iᵀ X_I)⁻¹ 1)^{-1/2},    w_I = t_I X_I (X_Iᵀ X_I)⁻¹ 1
//! ```
//!
//! and the discrepancy is the largest of the two local discrepancies
//! `emp(±w_I, ±t_I) - cap(±t_I)` over the family of selections. Off the
//! sphere the same maximum, taken with the extended cap measure, defines
//! the generalized discrepancy `Λ`.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capmeasure::{cap_measure_extended_unchecked, cap_measure_unchecked};
use crate::error::{Error, Result};
use crate::linalg::{apply_q_in_place, householder_qr_in_place, solve_r_in_place, solve_rt_in_place};
use crate::pointset::{dot, visit_with_first, IndexSet, PointSet, UNIT_NORM_TOL};

/// Slack in the closed half-space test `<w, x> >= t - eps`.
pub const DEFAULT_EPS_COUNT: f64 = 1e-9;

/// Triangular pivots `|R_jj|` of `X_I = QR` (equivalently the Cholesky
/// pivots of the Gram matrix) at or below this value make a selection
/// degenerate.
pub const DEFAULT_PIVOT_TOL: f64 = 1e-12;

/// Which of the two caps bounded by the hyperplane through `X_I`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    /// `{<w_I, x> >= t_I}` (s = 1)
    Upper,
    /// `{<-w_I, x> >= -t_I}` (s = 2)
    Lower,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Upper, Side::Lower];

    /// 1 or 2.
    pub fn number(self) -> u8 {
        match self {
            Side::Upper => 1,
            Side::Lower => 2,
        }
    }

    /// `(-1)^s`.
    pub fn sign(self) -> f64 {
        match self {
            Side::Upper => -1.0,
            Side::Lower => 1.0,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Index family for the enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// All selections with `1 <= #I <= d`.
    Full,
    /// Selections with `2 <= #I <= d`; sufficient on the sphere for `N >= 2`.
    Reduced,
}

impl Family {
    pub fn min_size(self) -> usize {
        match self {
            Family::Full => 1,
            Family::Reduced => 2,
        }
    }
}

/// Empirical probability `count / total` kept as an exact ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    pub count: usize,
    pub total: usize,
}

impl EmpiricalMeasure {
    pub fn value(self) -> f64 {
        self.count as f64 / self.total as f64
    }
}

/// Fraction of points in the closed half-space `{x : <w, x> >= t - eps}`.
///
/// `w` need not be normalized; `w = 0` gives the whole space for `t <= 0`.
pub fn empirical_measure(x: &PointSet, w: &[f64], t: f64, eps: f64) -> EmpiricalMeasure {
    let lo = t - eps;
    let count = x.points().filter(|p| dot(w, p) >= lo).count();
    EmpiricalMeasure {
        count,
        total: x.len(),
    }
}

/// Cap parameters `(w_I, t_I)` of a selection plus the Gram coefficients
/// `c_j = [(X_Iᵀ X_I)⁻¹ 1]_j` (column sums of the inverse Gram matrix).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapParams {
    #[serde(skip)]
    pub index_set: Option<IndexSet>,
    pub t: f64,
    pub w: Vec<f64>,
    pub c: Vec<f64>,
}

/// Solves the Gram system of `I` through the triangular factor of `X_I`
/// (no explicit inverse).
pub fn cap_params(x: &PointSet, index_set: &IndexSet) -> Result<CapParams> {
    cap_params_with_tol(x, index_set, DEFAULT_PIVOT_TOL)
}

pub fn cap_params_with_tol(x: &PointSet, index_set: &IndexSet, pivot_tol: f64) -> Result<CapParams> {
    let idx = index_set.as_slice();
    if let Some(&bad) = idx.iter().find(|&&i| i >= x.len()) {
        return Err(Error::invalid(format!("index {} exceeds N={}", bad + 1, x.len())));
    }
    if idx.len() > x.dim() {
        return Err(Error::invalid(format!(
            "selection {index_set} has more than d={} points",
            x.dim()
        )));
    }
    let mut ws = Workspace::new(x.dim(), idx.len());
    ws.solve(x, idx, pivot_tol).map_err(|pivot| Error::Degenerate {
        index_set: index_set.clone(),
        pivot,
    })?;
    Ok(CapParams {
        index_set: Some(index_set.clone()),
        t: ws.t,
        w: ws.w.clone(),
        c: ws.c[..idx.len()].to_vec(),
    })
}

/// Scratch buffers for one cap solve.
///
/// With `X_I = QR` and `z = R⁻ᵀ1`: `c = R⁻¹z`, `1ᵀc = ‖z‖²`, so
/// `t_I = 1/‖z‖` and `w_I = Q z / ‖z‖`.
pub(crate) struct Workspace {
    dim: usize,
    qr: Vec<f64>,
    rdiag: Vec<f64>,
    tau: Vec<f64>,
    pub(crate) c: Vec<f64>,
    pub(crate) w: Vec<f64>,
    pub(crate) t: f64,
}

impl Workspace {
    pub(crate) fn new(dim: usize, max_k: usize) -> Self {
        Self {
            dim,
            qr: vec![0.0; dim * max_k],
            rdiag: vec![0.0; max_k],
            tau: vec![0.0; max_k],
            c: vec![0.0; max_k],
            w: vec![0.0; dim],
            t: 0.0,
        }
    }

    /// Fills `t`, `w` and `c[..k]` for the selection `idx`; fails with the
    /// first triangular pivot at or below `pivot_tol`.
    #[inline]
    pub(crate) fn solve(&mut self, x: &PointSet, idx: &[usize], pivot_tol: f64) -> std::result::Result<(), f64> {
        let (d, k) = (self.dim, idx.len());
        let qr = &mut self.qr[..d * k];
        for (q, &i) in idx.iter().enumerate() {
            qr[q * d..(q + 1) * d].copy_from_slice(x.point(i));
        }
        let rdiag = &mut self.rdiag[..k];
        let tau = &mut self.tau[..k];
        householder_qr_in_place(qr, d, k, rdiag, tau, pivot_tol)?;
        let c = &mut self.c[..k];
        c.fill(1.0);
        solve_rt_in_place(qr, d, rdiag, c);
        let len = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.w.fill(0.0);
        self.w[..k].copy_from_slice(c);
        apply_q_in_place(qr, d, k, tau, &mut self.w);
        self.w.iter_mut().for_each(|v| *v /= len);
        self.t = len.recip();
        solve_r_in_place(qr, d, rdiag, c);
        Ok(())
    }
}

/// Which cap measure the local discrepancies use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CapRule {
    /// Points on the sphere: `t_I ∈ (0, 1]` up to rounding, clamped.
    Sphere,
    /// Arbitrary generic points, `d >= 3`: extended measure.
    Extended,
}

impl CapRule {
    #[inline]
    fn eval(self, t: f64, d: usize) -> f64 {
        match self {
            CapRule::Sphere => cap_measure_unchecked(t.clamp(-1.0, 1.0), d),
            CapRule::Extended => cap_measure_extended_unchecked(t, d),
        }
    }
}

/// One selection function value `φ_I^{(s)}(X) = emp - cap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalDiscrepancy {
    #[serde(skip)]
    pub index_set: Option<IndexSet>,
    pub side: Side,
    pub value: f64,
    pub emp: EmpiricalMeasure,
    pub cap: f64,
}

impl LocalDiscrepancy {
    pub fn index_set(&self) -> &IndexSet {
        self.index_set.as_ref().expect("local discrepancy without index set")
    }
}

/// Local discrepancy of one selection and side, using the plain cap measure
/// when `|t_I| <= 1` and the extended one otherwise.
pub fn local_discrepancy(x: &PointSet, index_set: &IndexSet, side: Side) -> Result<LocalDiscrepancy> {
    local_discrepancy_with(x, index_set, side, &DiscrepancyOptions::default())
}

pub fn local_discrepancy_with(
    x: &PointSet,
    index_set: &IndexSet,
    side: Side,
    opts: &DiscrepancyOptions,
) -> Result<LocalDiscrepancy> {
    let d = x.dim();
    let params = cap_params_with_tol(x, index_set, opts.pivot_tol)?;
    let t = params.t;
    let rule = if t.abs() <= 1.0 {
        CapRule::Sphere
    } else if d >= 3 {
        CapRule::Extended
    } else if t.abs() <= 1.0 + UNIT_NORM_TOL {
        CapRule::Sphere
    } else {
        return Err(Error::UnsupportedDimension { d, min: 3 });
    };
    let (up, down) = count_both_sides(x, &params.w, t, opts.eps_count);
    let (emp, cap) = match side {
        Side::Upper => (up, rule.eval(t, d)),
        Side::Lower => (down, rule.eval(-t, d)),
    };
    let emp = EmpiricalMeasure {
        count: emp,
        total: x.len(),
    };
    Ok(LocalDiscrepancy {
        index_set: Some(index_set.clone()),
        side,
        value: emp.value() - cap,
        emp,
        cap,
    })
}

fn count_both_sides(x: &PointSet, w: &[f64], t: f64, eps: f64) -> (usize, usize) {
    let (lo, hi) = (t - eps, t + eps);
    x.points().fold((0, 0), |(up, down), p| {
        let v = dot(w, p);
        (up + (v >= lo) as usize, down + (v <= hi) as usize)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscrepancyOptions {
    pub eps_count: f64,
    pub pivot_tol: f64,
    /// Keep every local discrepancy in the result (two per selection).
    pub keep_locals: bool,
}

impl Default for DiscrepancyOptions {
    fn default() -> Self {
        Self {
            eps_count: DEFAULT_EPS_COUNT,
            pivot_tol: DEFAULT_PIVOT_TOL,
            keep_locals: false,
        }
    }
}

impl DiscrepancyOptions {
    pub fn with_locals(mut self) -> Self {
        self.keep_locals = true;
        self
    }
}

/// Cap realizing the maximum, oriented so that it is `{<w, x> >= t}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    #[serde(skip)]
    pub index_set: Option<IndexSet>,
    pub side: Side,
    pub w: Vec<f64>,
    pub t: f64,
    pub emp: EmpiricalMeasure,
    pub cap: f64,
}

impl Witness {
    pub fn index_set(&self) -> &IndexSet {
        self.index_set.as_ref().expect("witness without index set")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscrepancyResult {
    pub value: f64,
    pub witness: Witness,
    /// Every local discrepancy in enumeration order, when requested.
    pub locals: Option<Vec<LocalDiscrepancy>>,
    /// Number of index selections evaluated.
    pub evaluated: u64,
}

/// Spherical cap discrepancy `Δ(X)` of a generic point set on the sphere.
///
/// The work is split over `(size, first index)` blocks and evaluated on the
/// current rayon pool; the maximum and its witness do not depend on the
/// schedule (ties go to the smallest `(size, lexicographic I, side)`).
pub fn discrepancy(x: &PointSet, family: Family) -> Result<DiscrepancyResult> {
    discrepancy_with(x, family, &DiscrepancyOptions::default())
}

pub fn discrepancy_with(x: &PointSet, family: Family, opts: &DiscrepancyOptions) -> Result<DiscrepancyResult> {
    if x.dim() < 2 {
        return Err(Error::UnsupportedDimension { d: x.dim(), min: 2 });
    }
    x.check_on_sphere(UNIT_NORM_TOL)?;
    if family == Family::Reduced && x.len() < 2 {
        return Err(Error::invalid("the reduced family needs at least two points"));
    }
    evaluate_family(x, family.min_size(), CapRule::Sphere, opts)
}

/// Generalized cap discrepancy `Λ(X)` over the full family, for generic
/// point sets that need not lie on the sphere (`d >= 3`).
pub fn generalized_discrepancy(x: &PointSet) -> Result<DiscrepancyResult> {
    generalized_discrepancy_with(x, &DiscrepancyOptions::default())
}

pub fn generalized_discrepancy_with(x: &PointSet, opts: &DiscrepancyOptions) -> Result<DiscrepancyResult> {
    if x.dim() < 3 {
        return Err(Error::UnsupportedDimension { d: x.dim(), min: 3 });
    }
    evaluate_family(x, 1, CapRule::Extended, opts)
}

/// Best local discrepancy of one block plus its bookkeeping.
struct BlockResult {
    best: Option<(f64, Vec<usize>, Side, EmpiricalMeasure, f64)>,
    locals: Vec<LocalDiscrepancy>,
    evaluated: u64,
}

fn evaluate_family(x: &PointSet, min_size: usize, rule: CapRule, opts: &DiscrepancyOptions) -> Result<DiscrepancyResult> {
    let n = x.len();
    let d = x.dim();
    let max_size = d.min(n);
    let rows = transpose(x);
    let blocks = work_blocks(n, min_size, max_size);

    let results: Vec<Result<BlockResult>> = blocks
        .par_iter()
        .map(|&(k, first)| evaluate_block(x, &rows, k, first, rule, opts))
        .collect();

    let mut best: Option<(f64, Vec<usize>, Side, EmpiricalMeasure, f64)> = None;
    let mut locals = opts.keep_locals.then(Vec::new);
    let mut evaluated = 0;
    for r in results {
        let block = r?;
        evaluated += block.evaluated;
        if let Some(all) = locals.as_mut() {
            all.extend(block.locals);
        }
        if let Some(cand) = block.best {
            if best.as_ref().is_none_or(|b| cand.0 > b.0) {
                best = Some(cand);
            }
        }
    }
    let (value, idx, side, emp, cap) = best.ok_or_else(|| Error::invalid("empty index family"))?;
    let index_set = IndexSet::from_sorted_unchecked(idx);
    let params = cap_params_with_tol(x, &index_set, opts.pivot_tol)?;
    let (w, t) = match side {
        Side::Upper => (params.w, params.t),
        Side::Lower => (params.w.iter().map(|v| -v).collect(), -params.t),
    };
    Ok(DiscrepancyResult {
        value,
        witness: Witness {
            index_set: Some(index_set),
            side,
            w,
            t,
            emp,
            cap,
        },
        locals,
        evaluated,
    })
}

/// `(size, first index)` pairs covering the family in enumeration order.
pub(crate) fn work_blocks(n: usize, min_size: usize, max_size: usize) -> Vec<(usize, usize)> {
    (min_size..=max_size)
        .flat_map(|k| (0..=n.saturating_sub(k)).map(move |first| (k, first)))
        .collect()
}

/// Coordinates as `d` contiguous rows of length `N`.
fn transpose(x: &PointSet) -> Vec<Vec<f64>> {
    (0..x.dim())
        .map(|c| x.points().map(|p| p[c]).collect())
        .collect()
}

fn evaluate_block(
    x: &PointSet,
    rows: &[Vec<f64>],
    k: usize,
    first: usize,
    rule: CapRule,
    opts: &DiscrepancyOptions,
) -> Result<BlockResult> {
    let n = x.len();
    let d = x.dim();
    let mut ws = Workspace::new(d, k);
    let mut proj = vec![0.0; n];
    let mut out = BlockResult {
        best: None,
        locals: Vec::new(),
        evaluated: 0,
    };
    let mut failure: Option<(Vec<usize>, f64)> = None;

    visit_with_first(n, k, first, |idx| {
        if failure.is_some() {
            return;
        }
        if let Err(pivot) = ws.solve(x, idx, opts.pivot_tol) {
            failure = Some((idx.to_vec(), pivot));
            return;
        }
        out.evaluated += 1;
        let t = ws.t;

        proj.copy_from_slice(&rows[0]);
        let w0 = ws.w[0];
        proj.iter_mut().for_each(|p| *p *= w0);
        for (row, &wc) in rows[1..].iter().zip(&ws.w[1..]) {
            for (p, r) in proj.iter_mut().zip(row) {
                *p += wc * r;
            }
        }
        let (lo, hi) = (t - opts.eps_count, t + opts.eps_count);
        let mut up = 0usize;
        let mut down = 0usize;
        for &p in &proj {
            up += (p >= lo) as usize;
            down += (p <= hi) as usize;
        }

        for (side, count, cap) in [
            (Side::Upper, up, rule.eval(t, d)),
            (Side::Lower, down, rule.eval(-t, d)),
        ] {
            let emp = EmpiricalMeasure { count, total: n };
            let value = emp.value() - cap;
            if out.best.as_ref().is_none_or(|b| value > b.0) {
                out.best = Some((value, idx.to_vec(), side, emp, cap));
            }
            if opts.keep_locals {
                out.locals.push(LocalDiscrepancy {
                    index_set: Some(IndexSet::from_sorted_unchecked(idx.to_vec())),
                    side,
                    value,
                    emp,
                    cap,
                });
            }
        }
    });

    match failure {
        Some((idx, pivot)) => Err(Error::Degenerate {
            index_set: IndexSet::from_sorted_unchecked(idx),
            pivot,
        }),
        None => Ok(out),
    }
}

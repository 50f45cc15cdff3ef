//! Gradients of `β_I = μ^Cap ∘ t_I` and of the smooth selection functions,
//! Lipschitz estimates and a finite-difference harness.
//!
//! For `l ∈ I` the partial derivative with respect to the point `x_l` is
//!
//! ```text
//! ∇_{x_l} β_I = ρ_I · c_I^{τ(l)} · w_I,    ρ_I = [μ^Cap]'(t_I) · t_I²
//! ```
//!
//! and zero for `l ∉ I`. Frozen empirical counts make `φ̃_I^{(1)} = emp - β_I`
//! and `φ̃_I^{(2)} = emp - 1 + β_I`, so their gradients are `∓∇β_I`.

use rayon::prelude::*;
use serde::Serialize;

use crate::capmeasure::{cap_measure_derivative_unchecked, cap_measure_extended_unchecked, normalizing_constant};
use crate::discrepancy::{
    cap_params_with_tol, work_blocks, EmpiricalMeasure, Family, Side, Workspace, DEFAULT_PIVOT_TOL,
};
use crate::error::{Error, Result};
use crate::pointset::{visit_with_first, IndexSet, PointSet};

/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// Partial derivatives of one selection function with respect to every point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientTable {
    #[serde(serialize_with = "serialize_one_based")]
    pub index_set: IndexSet,
    /// `None` for `β_I` itself.
    pub side: Option<Side>,
    /// One `d`-vector per point, zero for points outside `I`.
    pub partials: Vec<Vec<f64>>,
    pub rho: f64,
    pub t: f64,
    pub w: Vec<f64>,
    pub c: Vec<f64>,
}

fn serialize_one_based<S: serde::Serializer>(i: &IndexSet, s: S) -> std::result::Result<S::Ok, S::Error> {
    i.one_based().serialize(s)
}

impl GradientTable {
    /// Euclidean norm of the stacked `d × N` gradient.
    pub fn frobenius_norm(&self) -> f64 {
        self.partials.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn partial(&self, l: usize) -> &[f64] {
        &self.partials[l]
    }
}

/// `ρ_I = [μ^Cap]'(t)·t²`; constant slope for d=3, zero off `(-1, 1)` for d ≥ 4.
pub fn rho(t: f64, d: usize) -> Result<f64> {
    if d < 3 {
        return Err(Error::UnsupportedDimension { d, min: 3 });
    }
    Ok(rho_unchecked(t, d))
}

fn rho_unchecked(t: f64, d: usize) -> f64 {
    if d == 3 {
        return -0.5 * t * t;
    }
    if t.abs() >= 1.0 {
        return 0.0;
    }
    let cd = normalizing_constant(d).expect("d >= 4");
    -cd * t * t * (1.0 - t * t).powf((d as f64 - 3.0) / 2.0)
}

pub fn beta_gradient(x: &PointSet, index_set: &IndexSet) -> Result<GradientTable> {
    let d = x.dim();
    if d < 3 {
        return Err(Error::UnsupportedDimension { d, min: 3 });
    }
    let p = cap_params_with_tol(x, index_set, DEFAULT_PIVOT_TOL)?;
    let rho = rho_unchecked(p.t, d);
    let mut partials = vec![vec![0.0; d]; x.len()];
    for (q, &l) in index_set.as_slice().iter().enumerate() {
        let coef = rho * p.c[q];
        for (g, wj) in partials[l].iter_mut().zip(&p.w) {
            *g = coef * wj;
        }
    }
    Ok(GradientTable {
        index_set: index_set.clone(),
        side: None,
        partials,
        rho,
        t: p.t,
        w: p.w,
        c: p.c,
    })
}

/// `∇φ̃_I^{(1)} = -∇β_I`, `∇φ̃_I^{(2)} = ∇β_I`.
pub fn phi_tilde_gradient(x: &PointSet, index_set: &IndexSet, side: Side) -> Result<GradientTable> {
    let mut g = beta_gradient(x, index_set)?;
    if side == Side::Upper {
        g.partials.iter_mut().flatten().for_each(|v| *v = -*v);
    }
    g.side = Some(side);
    Ok(g)
}

/// `β_I(X) = μ^Cap(t_I(X))`.
pub fn beta(x: &PointSet, index_set: &IndexSet) -> Result<f64> {
    let d = x.dim();
    if d < 3 {
        return Err(Error::UnsupportedDimension { d, min: 3 });
    }
    let p = cap_params_with_tol(x, index_set, DEFAULT_PIVOT_TOL)?;
    Ok(cap_measure_extended_unchecked(p.t, d))
}

/// `φ̃_I^{(s)}(X)`: the empirical part frozen at `emp` (taken at a reference
/// set), the cap part evaluated at `X`.
pub fn phi_tilde(x: &PointSet, index_set: &IndexSet, side: Side, emp: EmpiricalMeasure) -> Result<f64> {
    let b = beta(x, index_set)?;
    Ok(match side {
        Side::Upper => emp.value() - b,
        Side::Lower => emp.value() - 1.0 + b,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzEntry {
    pub index_set: Vec<usize>,
    pub side: Side,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzEstimate {
    /// Largest stacked gradient norm over the family at `X`.
    pub l_exact: f64,
    /// `C_d · max |c_I^j|` (`½ · max |c_I^j|` for d=3).
    pub l_rough: f64,
    /// Selection attaining `l_exact` (1-based).
    pub argmax: Vec<usize>,
    pub max_abs_c: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_index: Option<Vec<LipschitzEntry>>,
}

pub fn lipschitz_estimate(x: &PointSet, family: Family) -> Result<LipschitzEstimate> {
    lipschitz_estimate_with(x, family, false)
}

/// Both sides share the norm of `∇β_I`, so the table lists each selection
/// twice in `(I, s)` order.
pub fn lipschitz_estimate_with(x: &PointSet, family: Family, keep_table: bool) -> Result<LipschitzEstimate> {
    let d = x.dim();
    let n = x.len();
    if d < 3 {
        return Err(Error::UnsupportedDimension { d, min: 3 });
    }
    if family == Family::Reduced && n < 2 {
        return Err(Error::invalid("the reduced family needs at least two points"));
    }
    let blocks = work_blocks(n, family.min_size(), d.min(n));

    struct Block {
        best: Option<(f64, Vec<usize>)>,
        max_c: f64,
        table: Vec<LipschitzEntry>,
    }

    let results: Vec<Result<Block>> = blocks
        .par_iter()
        .map(|&(k, first)| {
            let mut ws = Workspace::new(d, k);
            let mut out = Block {
                best: None,
                max_c: 0.0,
                table: Vec::new(),
            };
            let mut failure = None;
            visit_with_first(n, k, first, |idx| {
                if failure.is_some() {
                    return;
                }
                if let Err(pivot) = ws.solve(x, idx, DEFAULT_PIVOT_TOL) {
                    failure = Some(Error::Degenerate {
                        index_set: IndexSet::from_sorted_unchecked(idx.to_vec()),
                        pivot,
                    });
                    return;
                }
                let c = &ws.c[..k];
                let sum_c2: f64 = c.iter().map(|v| v * v).sum();
                let w_norm = ws.w.iter().map(|v| v * v).sum::<f64>().sqrt();
                let norm = rho_unchecked(ws.t, d).abs() * sum_c2.sqrt() * w_norm;
                out.max_c = c.iter().fold(out.max_c, |m, v| m.max(v.abs()));
                if out.best.as_ref().is_none_or(|b| norm > b.0) {
                    out.best = Some((norm, idx.to_vec()));
                }
                if keep_table {
                    for side in Side::BOTH {
                        out.table.push(LipschitzEntry {
                            index_set: idx.iter().map(|i| i + 1).collect(),
                            side,
                            norm,
                        });
                    }
                }
            });
            match failure {
                Some(e) => Err(e),
                None => Ok(out),
            }
        })
        .collect();

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut max_c = 0.0f64;
    let mut table = keep_table.then(Vec::new);
    for r in results {
        let block = r?;
        max_c = max_c.max(block.max_c);
        if let Some(all) = table.as_mut() {
            all.extend(block.table);
        }
        if let Some(cand) = block.best {
            if best.as_ref().is_none_or(|b| cand.0 > b.0) {
                best = Some(cand);
            }
        }
    }
    let (l_exact, idx) = best.ok_or_else(|| Error::invalid("empty index family"))?;
    let slope = if d == 3 { 0.5 } else { normalizing_constant(d)? };
    Ok(LipschitzEstimate {
        l_exact,
        l_rough: slope * max_c,
        argmax: idx.iter().map(|i| i + 1).collect(),
        max_abs_c: max_c,
        per_index: table,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdReport {
    /// Worst `|numeric - analytic| / max(|analytic|, scale)` over all partials,
    /// with `scale` the largest analytic partial (1 if all vanish).
    pub max_rel_error: f64,
    /// Worst absolute deviation over partials of points outside `I`.
    pub max_abs_error_outside: f64,
    pub step: f64,
}

/// Central differences of `β_I` in every coordinate of every point.
pub fn finite_difference_check(x: &PointSet, index_set: &IndexSet, h: f64) -> Result<FdReport> {
    if !(h > 0.0) {
        return Err(Error::invalid(format!("step must be positive, got {h}")));
    }
    let table = beta_gradient(x, index_set)?;
    let d = x.dim();
    let scale = table
        .partials
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let mut coords = x.as_slice().to_vec();
    let mut max_rel = 0.0f64;
    let mut max_out = 0.0f64;
    for l in 0..x.len() {
        for j in 0..d {
            let at = l * d + j;
            let orig = coords[at];
            coords[at] = orig + h;
            let plus = beta(&PointSet::from_columns(d, coords.clone())?, index_set)?;
            coords[at] = orig - h;
            let minus = beta(&PointSet::from_columns(d, coords.clone())?, index_set)?;
            coords[at] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = table.partials[l][j];
            let err = (numeric - analytic).abs();
            max_rel = max_rel.max(err / analytic.abs().max(scale));
            if !index_set.contains(l) {
                max_out = max_out.max(err);
            }
        }
    }
    Ok(FdReport {
        max_rel_error: max_rel,
        max_abs_error_outside: max_out,
        step: h,
    })
}

/// Partials by the chain rule `[μ^Cap]'(t_I)·t_I²·c_I^{τ(l)}·w_I`, used to
/// cross-check [`beta_gradient`].
pub fn beta_gradient_chain_rule(x: &PointSet, index_set: &IndexSet) -> Result<Vec<Vec<f64>>> {
    let d = x.dim();
    if d < 3 {
        return Err(Error::UnsupportedDimension { d, min: 3 });
    }
    let p = cap_params_with_tol(x, index_set, DEFAULT_PIVOT_TOL)?;
    let slope = cap_measure_derivative_unchecked(p.t, d);
    let mut partials = vec![vec![0.0; d]; x.len()];
    for (q, &l) in index_set.as_slice().iter().enumerate() {
        partials[l] = p.w.iter().map(|wj| slope * p.t * p.t * p.c[q] * wj).collect();
    }
    Ok(partials)
}

//! Active sets and first-order optimality residuals for candidate
//! quantizers.
//!
//! At a generic `X̄` on the sphere the necessary condition asks for weights
//! `γ ≥ 0`, `Σγ = 1` over the active pairs and multipliers `λ_l` with
//!
//! ```text
//! λ_l x̄_l = g_l(γ) := Σ_{(I,s) active, l ∈ I} γ_(I,s) (-1)^s ∇_{x_l} β_I(X̄)
//! ```
//!
//! Eliminating `λ_l = <x̄_l, g_l>` leaves a convex quadratic in `γ` (the
//! squared tangential part of every `g_l`), minimized over the simplex. A
//! zero residual means the condition holds. The activity test uses all
//! pairs within `tol` of the maximum, not only the essentially active ones.

use serde::Serialize;

use crate::discrepancy::{generalized_discrepancy_with, DiscrepancyOptions, Side};
use crate::error::{Error, Result};
use crate::pointset::{dot, IndexSet, PointSet, UNIT_NORM_TOL};
use crate::smooth::phi_tilde_gradient;

pub const DEFAULT_ACTIVITY_TOL: f64 = 1e-9;
pub const QP_TOL: f64 = 1e-10;
pub const QP_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActiveEntry {
    #[serde(serialize_with = "serialize_one_based")]
    pub index_set: IndexSet,
    pub side: Side,
    pub value: f64,
}

fn serialize_one_based<S: serde::Serializer>(i: &IndexSet, s: S) -> std::result::Result<S::Ok, S::Error> {
    i.one_based().serialize(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActiveSet {
    pub entries: Vec<ActiveEntry>,
    pub tol: f64,
    /// `Λ(X)`.
    pub value: f64,
}

/// All `(I, s)` over the full family with `Λ(X) - φ_I^{(s)}(X) <= tol`, in
/// `(size, lexicographic, side)` order.
pub fn active_set(x: &PointSet, tol: f64) -> Result<ActiveSet> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("activity tolerance must be positive, got {tol}")));
    }
    let r = generalized_discrepancy_with(x, &DiscrepancyOptions::default().with_locals())?;
    let entries = r
        .locals
        .unwrap_or_default()
        .into_iter()
        .filter(|l| r.value - l.value <= tol)
        .map(|l| ActiveEntry {
            index_set: l.index_set.expect("locals carry their index set"),
            side: l.side,
            value: l.value,
        })
        .collect();
    Ok(ActiveSet {
        entries,
        tol,
        value: r.value,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedEntry {
    #[serde(serialize_with = "serialize_one_based")]
    pub index_set: IndexSet,
    pub side: Side,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalityCertificate {
    pub residual: f64,
    pub gamma: Vec<WeightedEntry>,
    pub lambda: Vec<f64>,
    pub active: ActiveSet,
    pub iterations: usize,
    pub converged: bool,
}

/// Stacked tangential gradients, one column of length `N·d` per active pair.
fn tangential_columns(x: &PointSet, active: &ActiveSet) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let d = x.dim();
    let mut raw = Vec::with_capacity(active.entries.len());
    let mut tangential = Vec::with_capacity(active.entries.len());
    for e in &active.entries {
        let g = phi_tilde_gradient(x, &e.index_set, e.side)?;
        let mut full = Vec::with_capacity(x.len() * d);
        let mut tan = Vec::with_capacity(x.len() * d);
        for (l, p) in g.partials.iter().enumerate() {
            let xl = x.point(l);
            let normal = dot(xl, p);
            full.extend_from_slice(p);
            tan.extend(p.iter().zip(xl).map(|(v, xv)| v - normal * xv));
        }
        raw.push(full);
        tangential.push(tan);
    }
    Ok((raw, tangential))
}

pub fn optimality_residual(x: &PointSet, tol: f64) -> Result<OptimalityCertificate> {
    if x.dim() < 3 {
        return Err(Error::UnsupportedDimension { d: x.dim(), min: 3 });
    }
    x.check_on_sphere(UNIT_NORM_TOL)?;
    let active = active_set(x, tol)?;
    let (raw, tan) = tangential_columns(x, &active)?;
    let m = tan.len();
    let q = gram(&tan);
    let sol = if m == 1 {
        QpSolution {
            gamma: vec![1.0],
            value: q[0],
            iterations: 0,
            converged: true,
        }
    } else {
        solve_simplex_qp(&q, m, None)
    };

    let d = x.dim();
    let mut combined = vec![0.0; x.len() * d];
    for (col, &g) in raw.iter().zip(&sol.gamma) {
        for (acc, v) in combined.iter_mut().zip(col) {
            *acc += g * v;
        }
    }
    let lambda = (0..x.len())
        .map(|l| dot(x.point(l), &combined[l * d..(l + 1) * d]))
        .collect();
    let gamma = active
        .entries
        .iter()
        .zip(&sol.gamma)
        .map(|(e, &g)| WeightedEntry {
            index_set: e.index_set.clone(),
            side: e.side,
            gamma: g,
        })
        .collect();
    Ok(OptimalityCertificate {
        residual: sol.value.max(0.0).sqrt(),
        gamma,
        lambda,
        active,
        iterations: sol.iterations,
        converged: sol.converged,
    })
}

/// Residual when exactly one pair is active: the tangential gradient norm of
/// that selection function, without any optimization.
pub fn singleton_residual(x: &PointSet, index_set: &IndexSet, side: Side) -> Result<f64> {
    let g = phi_tilde_gradient(x, index_set, side)?;
    let mut sum = 0.0;
    for (l, p) in g.partials.iter().enumerate() {
        let xl = x.point(l);
        let normal = dot(xl, p);
        sum += p.iter().zip(xl).map(|(v, xv)| (v - normal * xv).powi(2)).sum::<f64>();
    }
    Ok(sum.sqrt())
}

fn gram(cols: &[Vec<f64>]) -> Vec<f64> {
    let m = cols.len();
    let mut q = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..=a {
            let v = dot(&cols[a], &cols[b]);
            q[a * m + b] = v;
            q[b * m + a] = v;
        }
    }
    q
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub gamma: Vec<f64>,
    /// `γᵀQγ`.
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `γᵀQγ` over the probability simplex by accelerated projected
/// gradient (FISTA with restarts), starting from `start` or the barycenter.
pub fn solve_simplex_qp(q: &[f64], m: usize, start: Option<&[f64]>) -> QpSolution {
    assert_eq!(q.len(), m * m);
    let quad = |g: &[f64]| -> f64 {
        (0..m)
            .map(|a| g[a] * (0..m).map(|b| q[a * m + b] * g[b]).sum::<f64>())
            .sum()
    };
    let grad = |g: &[f64], out: &mut [f64]| {
        for a in 0..m {
            out[a] = 2.0 * (0..m).map(|b| q[a * m + b] * g[b]).sum::<f64>();
        }
    };
    let lip = 2.0 * q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut gamma = match start {
        Some(s) => project_simplex(s),
        None => vec![1.0 / m as f64; m],
    };
    if !(lip > 0.0) {
        return QpSolution {
            value: quad(&gamma),
            gamma,
            iterations: 0,
            converged: true,
        };
    }
    let step = 1.0 / lip;
    let mut y = gamma.clone();
    let mut momentum = 1.0f64;
    let mut g = vec![0.0; m];
    let mut trial = vec![0.0; m];
    for it in 1..=QP_MAX_ITER {
        grad(&y, &mut g);
        trial.iter_mut().zip(&y).zip(&g).for_each(|((t, yv), gv)| *t = yv - step * gv);
        let next = project_simplex(&trial);
        let mapping = next
            .iter()
            .zip(&y)
            .map(|(a, b)| ((b - a) * lip).powi(2))
            .sum::<f64>()
            .sqrt();
        if mapping <= QP_TOL {
            return QpSolution {
                value: quad(&next),
                gamma: next,
                iterations: it,
                converged: true,
            };
        }
        // Gradient restart: drop the momentum once it points uphill.
        let uphill: f64 = (0..m).map(|a| (y[a] - next[a]) * (next[a] - gamma[a])).sum();
        if uphill > 0.0 {
            momentum = 1.0;
        }
        let next_momentum = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
        let beta = (momentum - 1.0) / next_momentum;
        for a in 0..m {
            y[a] = next[a] + beta * (next[a] - gamma[a]);
        }
        gamma = next;
        momentum = next_momentum;
    }
    QpSolution {
        value: quad(&gamma),
        gamma,
        iterations: QP_MAX_ITER,
        converged: false,
    }
}

/// Euclidean projection onto `{γ ≥ 0, Σγ = 1}` (sort and threshold).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let candidate = (cum - 1.0) / (j + 1) as f64;
        if uj - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

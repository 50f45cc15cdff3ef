//! Brute-force cross-checks that share no code path with the enumeration
//! formula: direction sampling, an LU-based cap solver and Monte-Carlo cap
//! measures.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capmeasure::cap_measure;
use crate::discrepancy::{CapParams, DEFAULT_PIVOT_TOL};
use crate::error::{Error, Result};
use crate::pointset::{random_unit_vector, IndexSet, PointSet, UNIT_NORM_TOL};

/// Relative shift that puts a threshold just beside a projection value.
pub const EPS_OPEN: f64 = 1e-12;

/// Half-space convention of the sampled caps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `{<w, x> >= t}`
    Closed,
    /// `{<w, x> > t}`
    Open,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed" => Ok(Variant::Closed),
            "open" => Ok(Variant::Open),
            other => Err(Error::invalid(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub value: f64,
    pub best_direction: Vec<f64>,
    pub best_threshold: f64,
    /// Random directions sampled (pair directions come on top).
    pub n_directions: usize,
    pub n_pair_directions: usize,
    pub variant: Variant,
}

/// Lower bound for `Δ(X)`: `sup |emp - cap|` over every threshold of every
/// sampled direction, plus the cap normals of all point pairs.
///
/// Directions are drawn sequentially from one seeded stream, so a larger
/// `n_directions` extends the set of a smaller one.
pub fn oracle_discrepancy(x: &PointSet, n_directions: usize, seed: u64, variant: Variant) -> Result<OracleResult> {
    x.check_on_sphere(UNIT_NORM_TOL)?;
    let d = x.dim();
    if d < 2 {
        return Err(Error::UnsupportedDimension { d, min: 2 });
    }
    let mut dirs = pair_directions(x);
    let n_pairs = dirs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    dirs.extend((0..n_directions).map(|_| random_unit_vector(&mut rng, d)));

    let best = dirs
        .par_iter()
        .enumerate()
        .map(|(k, w)| {
            let (value, t) = best_threshold(x, w, variant);
            (value, k, t)
        })
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX, 0.0),
            |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    let (value, k, t) = best;
    if k == usize::MAX {
        return Err(Error::invalid("no directions to evaluate"));
    }
    Ok(OracleResult {
        value,
        best_direction: dirs[k].clone(),
        best_threshold: t,
        n_directions,
        n_pair_directions: n_pairs,
        variant,
    })
}

/// Normalized `x_i + x_j` for all pairs, the normal of the cap through both.
fn pair_directions(x: &PointSet) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let v: Vec<f64> = x.point(i).iter().zip(x.point(j)).map(|(a, b)| a + b).collect();
            let len = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if len > 1e-12 {
                out.push(v.into_iter().map(|a| a / len).collect());
            }
        }
    }
    out
}

/// Exact maximum of `|emp(w, t) - cap(t)|` over `t` for one direction.
fn best_threshold(x: &PointSet, w: &[f64], variant: Variant) -> (f64, f64) {
    let d = x.dim();
    let n = x.len() as f64;
    let mut proj: Vec<f64> = x
        .points()
        .map(|p| p.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    proj.sort_by(f64::total_cmp);
    let count = |t: f64| -> usize {
        match variant {
            Variant::Closed => proj.len() - proj.partition_point(|&p| p < t),
            Variant::Open => proj.len() - proj.partition_point(|&p| p <= t),
        }
    };
    let shift = |p: f64| EPS_OPEN * p.abs().max(1.0);
    let mut candidates = vec![-1.0, 1.0];
    for &p in &proj {
        candidates.push(p);
        candidates.push(match variant {
            Variant::Closed => p + shift(p),
            Variant::Open => p - shift(p),
        });
    }
    let mut best = (f64::NEG_INFINITY, 0.0);
    for t in candidates {
        if !(-1.0..=1.0).contains(&t) {
            continue;
        }
        let cap = cap_measure(t, d).expect("threshold in [-1, 1]");
        let value = (count(t) as f64 / n - cap).abs();
        if value > best.0 {
            best = (value, t);
        }
    }
    best
}

/// Cap through `d` points by LU on `X_Iᵀ` directly: solve `X_Iᵀ v = 1`, then
/// `w = v/‖v‖`, `t = 1/‖v‖`, and `c` from `X_I c = v`.
pub fn cap_params_alt(x: &PointSet, index_set: &IndexSet) -> Result<CapParams> {
    let d = x.dim();
    let idx = index_set.as_slice();
    if idx.len() != d {
        return Err(Error::invalid(format!(
            "the LU route needs exactly d={d} points, got {}",
            idx.len()
        )));
    }
    if let Some(&bad) = idx.iter().find(|&&i| i >= x.len()) {
        return Err(Error::invalid(format!("index {} exceeds N={}", bad + 1, x.len())));
    }
    let xi = DMatrix::from_fn(d, d, |r, c| x.point(idx[c])[r]);
    let degenerate = |pivot| Error::Degenerate {
        index_set: index_set.clone(),
        pivot,
    };
    let lu_t = xi.transpose().lu();
    let scale = xi.amax().max(f64::MIN_POSITIVE);
    let pivot = lu_t.u().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(pivot / scale > DEFAULT_PIVOT_TOL) {
        return Err(degenerate(pivot));
    }
    let v = lu_t.solve(&DVector::from_element(d, 1.0)).ok_or_else(|| degenerate(0.0))?;
    let len = v.norm();
    let c = xi.lu().solve(&v).ok_or_else(|| degenerate(0.0))?;
    Ok(CapParams {
        index_set: Some(index_set.clone()),
        t: 1.0 / len,
        w: (v / len).iter().copied().collect(),
        c: c.iter().copied().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

/// Fraction of uniform sphere samples with first coordinate `>= t`.
pub fn mc_cap_measure(t: f64, d: usize, n_samples: usize, seed: u64) -> Result<McEstimate> {
    if !(-1.0..=1.0).contains(&t) {
        return Err(Error::domain(format!("height {t} outside [-1, 1]")));
    }
    if d < 2 {
        return Err(Error::UnsupportedDimension { d, min: 2 });
    }
    if n_samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hits = (0..n_samples)
        .filter(|_| random_unit_vector(&mut rng, d)[0] >= t)
        .count();
    let p = hits as f64 / n_samples as f64;
    Ok(McEstimate {
        estimate: p,
        stderr: (p * (1.0 - p) / n_samples as f64).sqrt(),
        n_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrepancy::{cap_params, discrepancy, Family};
    use crate::pointset::sample_uniform_sphere;

    const TWO_POINT_DELTA: f64 = 0.853_553_390_593_273_8;

    fn two_points() -> PointSet {
        PointSet::from_points(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap()
    }

    #[test]
    fn pair_directions_alone_are_exact_for_two_points() {
        for variant in [Variant::Closed, Variant::Open] {
            let r = oracle_discrepancy(&two_points(), 0, 1, variant).unwrap();
            assert!((r.value - TWO_POINT_DELTA).abs() < 1e-12, "{variant:?} {}", r.value);
        }
    }

    #[test]
    fn sampled_two_point_value_in_range() {
        let r = oracle_discrepancy(&two_points(), 10_000, 4, Variant::Closed).unwrap();
        assert!(r.value <= TWO_POINT_DELTA + 1e-9);
        assert!(r.value >= TWO_POINT_DELTA - 0.02);
    }

    #[test]
    fn lower_bound_and_variant_agreement() {
        for seed in 0..10 {
            let x = sample_uniform_sphere(3, 8, seed).unwrap();
            let exact = discrepancy(&x, Family::Reduced).unwrap().value;
            let closed = oracle_discrepancy(&x, 500, seed, Variant::Closed).unwrap();
            let open = oracle_discrepancy(&x, 500, seed, Variant::Open).unwrap();
            assert!(closed.value <= exact + 1e-9);
            assert!(open.value <= exact + 1e-9);
            assert!((closed.value - open.value).abs() < 1e-9);
        }
    }

    #[test]
    fn more_directions_never_decrease() {
        let x = sample_uniform_sphere(3, 12, 5).unwrap();
        let mut last = f64::NEG_INFINITY;
        for n in [10, 100, 1000, 10_000] {
            let v = oracle_discrepancy(&x, n, 9, Variant::Closed).unwrap().value;
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn lu_route_examples() {
        let e = PointSet::from_points(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let i = IndexSet::parse_one_based("1,2,3").unwrap();
        let p = cap_params_alt(&e, &i).unwrap();
        let s = 3f64.sqrt().recip();
        assert!((p.t - s).abs() < 1e-15);
        assert!(p.w.iter().all(|v| (v - s).abs() < 1e-15));

        let x = sample_uniform_sphere(4, 6, 2).unwrap();
        let i = IndexSet::parse_one_based("1,3,4,6").unwrap();
        let a = cap_params_alt(&x, &i).unwrap();
        let b = cap_params_alt(&x.scaled(2.0), &i).unwrap();
        assert!((b.t - 2.0 * a.t).abs() < 1e-12);
        for (u, v) in a.w.iter().zip(&b.w) {
            assert!((u - v).abs() < 1e-12);
        }
        let g = cap_params(&x, &i).unwrap();
        for (u, v) in a.c.iter().zip(&g.c) {
            assert!((u - v).abs() < 1e-9 * v.abs().max(1.0));
        }
    }

    #[test]
    fn lu_route_rejects_singular_and_wrong_size() {
        let x = PointSet::from_points(&[[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let i = IndexSet::parse_one_based("1,2,3").unwrap();
        assert!(matches!(cap_params_alt(&x, &i), Err(Error::Degenerate { .. })));
        let j = IndexSet::parse_one_based("1,3").unwrap();
        assert!(cap_params_alt(&x, &j).is_err());
    }

    #[test]
    fn monte_carlo_cap_measure() {
        for (t, d, exact) in [(0.0, 4, 0.5), (0.5, 3, 0.25), (0.5, 4, 0.195_501_109_477_885_3)] {
            let m = mc_cap_measure(t, d, 1_000_000, 42).unwrap();
            assert!((m.estimate - exact).abs() <= 3.0 * m.stderr, "{t} {d} {m:?}");
        }
        assert!(mc_cap_measure(1.5, 3, 10, 0).is_err());
    }
}

//! One point moved along a great circle with the others held fixed,
//! recording `Λ` and every local discrepancy per step.

use std::io::Write;

use serde::Serialize;

use crate::discrepancy::{generalized_discrepancy_with, DiscrepancyOptions, Family, Side};
use crate::error::{Error, Result};
use crate::pointset::{dot, norm, IndexSet, PointSet, UNIT_NORM_TOL};
use crate::smooth::lipschitz_estimate;

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    /// 0-based index of the moving point.
    pub point: usize,
    /// Any vector not parallel to the moving point; only its tangential
    /// part matters.
    pub direction: Vec<f64>,
    pub theta_start: f64,
    pub theta_end: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    /// `(I, s)` per column of `phi`, in enumeration order.
    #[serde(skip)]
    pub columns: Vec<(IndexSet, Side)>,
    pub theta: Vec<f64>,
    pub lambda: Vec<f64>,
    /// `phi[step][column]`
    pub phi: Vec<Vec<f64>>,
    /// Largest selection-gradient norm at each step.
    pub l_exact: Vec<f64>,
}

impl ScanResult {
    /// Max of the per-step Lipschitz estimates.
    pub fn l_hat(&self) -> f64 {
        self.l_exact.iter().copied().fold(0.0, f64::max)
    }

    pub fn step_size(&self) -> f64 {
        match self.theta.len() {
            0 | 1 => 0.0,
            n => (self.theta[n - 1] - self.theta[0]).abs() / (n - 1) as f64,
        }
    }

    pub fn max_lambda_step(&self) -> f64 {
        self.lambda
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0, f64::max)
    }

    /// Largest adjacent-step change of any single `φ` column.
    pub fn max_phi_jump(&self) -> f64 {
        self.phi
            .windows(2)
            .flat_map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (b - a).abs()))
            .fold(0.0, f64::max)
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["theta".to_string(), "Lambda".to_string()];
        for (i, s) in &self.columns {
            let name: Vec<String> = i.one_based().iter().map(ToString::to_string).collect();
            h.push(format!("phi_{}_{}", name.join("-"), s.number()));
        }
        h
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let io_err = |source| Error::Io {
            path: "<stream>".into(),
            source,
        };
        writeln!(out, "{}", self.header().join(",")).map_err(io_err)?;
        for ((theta, lambda), row) in self.theta.iter().zip(&self.lambda).zip(&self.phi) {
            let mut line = format!("{theta},{lambda}");
            for v in row {
                line.push(',');
                line.push_str(&v.to_string());
            }
            writeln!(out, "{line}").map_err(io_err)?;
        }
        Ok(())
    }
}

/// Unit tangent at `p` in the plane spanned by `p` and `direction`.
fn tangent(p: &[f64], direction: &[f64]) -> Result<Vec<f64>> {
    let along = dot(p, direction);
    let u: Vec<f64> = direction.iter().zip(p).map(|(v, x)| v - along * x).collect();
    let len = norm(&u);
    if !(len > 1e-12) {
        return Err(Error::invalid("scan direction is parallel to the moving point"));
    }
    Ok(u.into_iter().map(|v| v / len).collect())
}

/// Evaluates `steps` equally spaced angles from `theta_start` to
/// `theta_end` (both included), with `x(θ) = cos θ · x + sin θ · u`.
pub fn scan(x: &PointSet, spec: &ScanSpec) -> Result<ScanResult> {
    let d = x.dim();
    if d < 3 {
        return Err(Error::UnsupportedDimension { d, min: 3 });
    }
    if spec.point >= x.len() {
        return Err(Error::invalid(format!(
            "point {} exceeds N={}",
            spec.point + 1,
            x.len()
        )));
    }
    if spec.direction.len() != d {
        return Err(Error::Shape(format!(
            "direction has {} entries, expected d={d}",
            spec.direction.len()
        )));
    }
    if spec.steps < 2 {
        return Err(Error::invalid("a scan needs at least two steps"));
    }
    x.check_on_sphere(UNIT_NORM_TOL)?;
    let base = x.point(spec.point).to_vec();
    let u = tangent(&base, &spec.direction)?;

    let opts = DiscrepancyOptions::default().with_locals();
    let mut out = ScanResult {
        columns: Vec::new(),
        theta: Vec::with_capacity(spec.steps),
        lambda: Vec::with_capacity(spec.steps),
        phi: Vec::with_capacity(spec.steps),
        l_exact: Vec::with_capacity(spec.steps),
    };
    for k in 0..spec.steps {
        let theta = spec.theta_start + (spec.theta_end - spec.theta_start) * k as f64 / (spec.steps - 1) as f64;
        let (s, c) = theta.sin_cos();
        let moved: Vec<f64> = base.iter().zip(&u).map(|(b, v)| c * b + s * v).collect();
        let y = x.with_point(spec.point, &moved)?;
        let r = generalized_discrepancy_with(&y, &opts)?;
        let locals = r.locals.expect("requested locals");
        if out.columns.is_empty() {
            out.columns = locals.iter().map(|l| (l.index_set().clone(), l.side)).collect();
        }
        out.theta.push(theta);
        out.lambda.push(r.value);
        out.phi.push(locals.iter().map(|l| l.value).collect());
        out.l_exact.push(lipschitz_estimate(&y, Family::Full)?.l_exact);
    }
    Ok(out)
}

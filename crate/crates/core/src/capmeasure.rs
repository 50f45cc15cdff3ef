//! Normalized surface measure of spherical caps.
//!
//! For a unit normal `w` and height `t ∈ [-1, 1]` the cap
//! `{x ∈ S^{d-1} : <w, x> >= t}` has uniform measure
//!
//! ```text
//! cap(t) = C_d ∫_0^{acos t} sin^{d-2}(s) ds          (t >= 0)
//! cap(t) = 1 - C_d ∫_0^{acos(-t)} sin^{d-2}(s) ds    (t <  0)
//! ```
//!
//! with `C_d = 1 / ∫_0^π sin^{d-2}(s) ds`. For `d >= 3` the function is
//! continued to all of `R` so that it stays continuously differentiable:
//! linearly for `d = 3`, by the constants 0 and 1 for `d >= 4`.
//!
//! The integral is evaluated through the reduction
//! `I_n = -sin^{n-1}(θ)cos(θ)/n + (n-1)/n · I_{n-2}`, which is exact and
//! costs `O(d)`. [`cap_measure_quadrature`] is an independent adaptive
//! Gauss–Legendre route to the same numbers.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Dimensions up to this bound have their normalizing constant cached.
const MEMO_MAX_DIM: usize = 256;

/// Absolute error target for the adaptive quadrature.
const QUAD_TOL: f64 = 1e-13;

const GL_ORDER: usize = 16;

fn check_dim(d: usize, min: usize) -> Result<()> {
    if d < min {
        Err(Error::UnsupportedDimension { d, min })
    } else {
        Ok(())
    }
}

/// `C_d`, the reciprocal of `∫_0^π sin^{d-2}`.
///
/// Uses the Wallis recursion `W_n = (n-1)/n · W_{n-2}` with `W_0 = π`,
/// `W_1 = 2`, which is exact up to rounding. Values for `d <= 256` are
/// computed once and shared between threads.
pub fn normalizing_constant(d: usize) -> Result<f64> {
    check_dim(d, 2)?;
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    if d <= MEMO_MAX_DIM {
        let table = TABLE.get_or_init(|| (0..=MEMO_MAX_DIM).map(wallis_reciprocal).collect());
        Ok(table[d])
    } else {
        Ok(wallis_reciprocal(d))
    }
}

fn wallis_reciprocal(d: usize) -> f64 {
    if d < 2 {
        return f64::NAN;
    }
    let n = d - 2;
    let (mut w, start) = if n % 2 == 0 { (PI, 2) } else { (2.0, 3) };
    let mut k = start;
    while k <= n {
        w *= (k - 1) as f64 / k as f64;
        k += 2;
    }
    1.0 / w
}

/// Measure of the cap of height `t` on `S^{d-1}`.
pub fn cap_measure(t: f64, d: usize) -> Result<f64> {
    check_dim(d, 2)?;
    if !(-1.0..=1.0).contains(&t) {
        return Err(Error::domain(format!(
            "cap height t={t} outside [-1, 1]; use cap_measure_extended"
        )));
    }
    Ok(cap_measure_unchecked(t, d))
}

pub(crate) fn cap_measure_unchecked(t: f64, d: usize) -> f64 {
    match d {
        2 => t.acos() / PI,
        3 => 0.5 - 0.5 * t,
        _ => upper_lower_branches(t, d, sin_power_integral),
    }
}

fn upper_lower_branches(t: f64, d: usize, integral: fn(usize, f64) -> f64) -> f64 {
    let c = normalizing_constant(d).expect("d >= 2");
    if t >= 0.0 {
        c * integral(d - 2, t.acos())
    } else {
        1.0 - c * integral(d - 2, (-t).acos())
    }
}

/// [`cap_measure`] computed by adaptive Gauss–Legendre quadrature of
/// `sin^{d-2}` (absolute error target 1e-13), for any `d >= 2`.
pub fn cap_measure_quadrature(t: f64, d: usize) -> Result<f64> {
    check_dim(d, 2)?;
    if !(-1.0..=1.0).contains(&t) {
        return Err(Error::domain(format!("cap height t={t} outside [-1, 1]")));
    }
    Ok(upper_lower_branches(t, d, sin_power_quadrature))
}

/// The continuously differentiable continuation of [`cap_measure`] to all
/// real `t` (only exists for `d >= 3`).
pub fn cap_measure_extended(t: f64, d: usize) -> Result<f64> {
    check_dim(d, 3)?;
    Ok(cap_measure_extended_unchecked(t, d))
}

pub(crate) fn cap_measure_extended_unchecked(t: f64, d: usize) -> f64 {
    if d == 3 {
        0.5 - 0.5 * t
    } else if t > 1.0 {
        0.0
    } else if t < -1.0 {
        1.0
    } else {
        cap_measure_unchecked(t, d)
    }
}

/// Derivative of [`cap_measure_extended`].
pub fn cap_measure_derivative(t: f64, d: usize) -> Result<f64> {
    check_dim(d, 3)?;
    Ok(cap_measure_derivative_unchecked(t, d))
}

pub(crate) fn cap_measure_derivative_unchecked(t: f64, d: usize) -> f64 {
    if d == 3 {
        -0.5
    } else if t.abs() >= 1.0 {
        0.0
    } else {
        let c = normalizing_constant(d).expect("d >= 4");
        -c * (1.0 - t * t).powf((d as f64 - 3.0) / 2.0)
    }
}

/// `∫_0^θ sin^n(s) ds` in closed form.
fn sin_power_integral(n: usize, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let (mut acc, mut k, mut s_pow) = if n % 2 == 0 {
        (theta, 2, s)
    } else {
        (1.0 - c, 3, s * s)
    };
    while k <= n {
        let kf = k as f64;
        acc = -s_pow * c / kf + (kf - 1.0) / kf * acc;
        s_pow *= s * s;
        k += 2;
    }
    acc
}

/// `∫_0^θ sin^n(s) ds` by adaptive Gauss–Legendre.
fn sin_power_quadrature(n: usize, theta: f64) -> f64 {
    if theta <= 0.0 {
        return 0.0;
    }
    let f = |s: f64| s.sin().powi(n as i32);
    // Split once at π/2 so each piece is monotone.
    let mid = theta.min(PI / 2.0);
    let mut total = adaptive_gauss_legendre(&f, 0.0, mid, QUAD_TOL, 0);
    if theta > mid {
        total += adaptive_gauss_legendre(&f, mid, theta, QUAD_TOL, 0);
    }
    total
}

fn adaptive_gauss_legendre<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let whole = gauss_legendre(f, a, b);
    let m = 0.5 * (a + b);
    let halves = gauss_legendre(f, a, m) + gauss_legendre(f, m, b);
    if (whole - halves).abs() <= tol || depth >= 40 {
        halves
    } else {
        adaptive_gauss_legendre(f, a, m, 0.5 * tol, depth + 1)
            + adaptive_gauss_legendre(f, m, b, 0.5 * tol, depth + 1)
    }
}

fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (nodes, weights) = gauss_legendre_rule();
    let half = 0.5 * (b - a);
    let center = 0.5 * (a + b);
    nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| w * f(center + half * x))
        .sum::<f64>()
        * half
}

/// Nodes and weights on [-1, 1], found by Newton iteration on `P_n`.
fn gauss_legendre_rule() -> &'static ([f64; GL_ORDER], [f64; GL_ORDER]) {
    static RULE: OnceLock<([f64; GL_ORDER], [f64; GL_ORDER])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut nodes = [0.0; GL_ORDER];
        let mut weights = [0.0; GL_ORDER];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = x;
            nodes[n - 1 - i] = -x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        (nodes, weights)
    })
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

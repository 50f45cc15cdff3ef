//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Set `CAPDISC_STRETCH=1` to also time the N=2000 run.

use std::f64::consts::FRAC_1_SQRT_2;
use std::time::{Duration, Instant};

use capdisc::capmeasure::{cap_measure, cap_measure_extended};
use capdisc::discrepancy::{cap_params, discrepancy, generalized_discrepancy, Family};
use capdisc::optimality::{optimality_residual, DEFAULT_ACTIVITY_TOL};
use capdisc::oracle::{oracle_discrepancy, Variant};
use capdisc::pointset::{is_generic, sample_uniform_sphere, IndexSet, PointSet, DEFAULT_GENERICITY_TOL};
use capdisc::scan::{scan, ScanSpec};
use capdisc::smooth::{finite_difference_check, lipschitz_estimate};
use capdisc::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed <= limit
}

fn two_points() -> PointSet {
    PointSet::from_points(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit_normal(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let n = dot(&v, &v).sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for k in 0..10_000 {
        let t = -1.0 + 2.0 * k as f64 / 9_999.0;
        worst = worst.max((cap_measure(t, 3).unwrap() - (1.0 - t) / 2.0).abs());
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-14 && within(elapsed, Duration::from_secs(1)),
        format!("max deviation {worst:.2e} over 10^4 points in {elapsed:.2?}"),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut worst_cap = 0.0f64;
    let mut worst_ext = 0.0f64;
    for d in 3..=5 {
        for k in 0..=2_000 {
            let t = -1.0 + 2.0 * k as f64 / 2_000.0;
            let s = cap_measure(t, d).unwrap() + cap_measure(-t, d).unwrap();
            worst_cap = worst_cap.max((s - 1.0).abs());
            let u = -3.0 + 6.0 * k as f64 / 2_000.0;
            let e = cap_measure_extended(u, d).unwrap() + cap_measure_extended(-u, d).unwrap();
            worst_ext = worst_ext.max((e - 1.0).abs());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst_cap <= 1e-12 && worst_ext <= 1e-12 && within(elapsed, Duration::from_secs(1)),
        format!("cap {worst_cap:.2e}, extended {worst_ext:.2e} in {elapsed:.2?}"),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut failures = Vec::new();
    let mut min_margin = f64::INFINITY;
    for k in 0..500u64 {
        let d = 3 + (k % 3) as usize;
        let n = rng.random_range(d..=50);
        let x = sample_uniform_sphere(d, n, 1000 + k).unwrap();
        match discrepancy(&x, Family::Reduced) {
            Ok(r) => {
                let bound = d.min(n) as f64 / (2.0 * n as f64);
                min_margin = min_margin.min(r.value - bound);
                if r.value < bound {
                    failures.push(format!("set {k}: {} < {bound}", r.value));
                }
            }
            Err(e) => failures.push(format!("set {k}: {e}")),
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && within(elapsed, Duration::from_secs(300)),
        format!(
            "500 sets, smallest margin {min_margin:.3e}, {} failures {:?} in {elapsed:.2?}",
            failures.len(),
            failures.iter().take(3).collect::<Vec<_>>()
        ),
    )
}

/// Criteria 4 and 5 share one run.
fn criteria_4_5() -> (Outcome, Outcome) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_gap = 0.0f64;
    let mut errors = Vec::new();
    let mut worst_boundary = 0.0f64;
    let mut min_excess = f64::INFINITY;
    for k in 0..200u64 {
        let d = rng.random_range(3..=5);
        let n = rng.random_range(2..=30);
        let x = sample_uniform_sphere(d, n, 5000 + k).unwrap();
        let (full, reduced) = match (discrepancy(&x, Family::Full), discrepancy(&x, Family::Reduced)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                errors.push(format!("set {k}: {e}"));
                continue;
            }
        };
        worst_gap = worst_gap.max((full.value - reduced.value).abs());
        for r in [&full, &reduced] {
            let w = &r.witness;
            let boundary = x
                .points()
                .map(|p| (dot(&w.w, p) - w.t).abs())
                .fold(f64::INFINITY, f64::min);
            worst_boundary = worst_boundary.max(boundary);
            min_excess = min_excess.min(w.emp.value() - w.cap);
        }
    }
    let elapsed = start.elapsed();
    let c4 = outcome(
        errors.is_empty() && worst_gap <= 1e-12 && within(elapsed, Duration::from_secs(300)),
        format!("200 sets, max |full - reduced| {worst_gap:.2e}, errors {errors:?} in {elapsed:.2?}"),
    );
    let c5 = outcome(
        errors.is_empty() && worst_boundary <= 1e-10 && min_excess > 1e-12,
        format!("worst boundary distance {worst_boundary:.2e}, smallest emp - cap {min_excess:.3e}"),
    );
    (c4, c5)
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut errors = Vec::new();
    for k in 0..100u64 {
        let d = rng.random_range(3..=5);
        // A singleton cap on the sphere is a single point, so its boundary
        // holds no second point.
        let size = rng.random_range(2..d);
        let base = sample_uniform_sphere(d, size, 7000 + k).unwrap();
        let i = IndexSet::new((0..size).collect()).unwrap();
        let p = cap_params(&base, &i).unwrap();
        // A new point on the boundary circle of the cap through I.
        let v = loop {
            let g = unit_normal(&mut rng, d);
            let along = dot(&g, &p.w);
            let v: Vec<f64> = g.iter().zip(&p.w).map(|(a, b)| a - along * b).collect();
            let n = dot(&v, &v).sqrt();
            if n > 1e-3 {
                break v.into_iter().map(|a| a / n).collect::<Vec<_>>();
            }
        };
        let radial = (1.0 - p.t * p.t).max(0.0).sqrt();
        let new: Vec<f64> = p.w.iter().zip(&v).map(|(a, b)| p.t * a + radial * b).collect();
        let mut pts: Vec<Vec<f64>> = base.points().map(<[f64]>::to_vec).collect();
        pts.push(new);
        let x = PointSet::from_points(&pts).unwrap();
        let j = IndexSet::new((0..=size).collect()).unwrap();
        match cap_params(&x, &j) {
            Ok(q) => {
                worst = worst.max((q.t - p.t).abs());
                for (a, b) in q.w.iter().zip(&p.w) {
                    worst = worst.max((a - b).abs());
                }
            }
            Err(e) => errors.push(format!("triple {k}: {e}")),
        }
    }
    outcome(
        errors.is_empty() && worst <= 1e-10,
        format!("100 expansions, max deviation {worst:.2e}, errors {errors:?}"),
    )
}

fn criterion_7() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for (k, n) in [5usize, 10, 15, 20].into_iter().enumerate() {
        let start = Instant::now();
        let x = sample_uniform_sphere(3, n, 900 + k as u64).unwrap();
        let exact = discrepancy(&x, Family::Reduced).unwrap().value;
        let closed = oracle_discrepancy(&x, 100_000, k as u64, Variant::Closed).unwrap().value;
        let open = oracle_discrepancy(&x, 100_000, k as u64, Variant::Open).unwrap().value;
        let elapsed = start.elapsed();
        let ok = closed <= exact + 1e-9
            && closed >= exact - 0.02
            && open <= exact + 1e-9
            && (closed - open).abs() <= 1e-9
            && within(elapsed, Duration::from_secs(120));
        pass &= ok;
        details.push(format!(
            "N={n}: exact {exact:.6} oracle {closed:.6} open-closed {:.1e} ({elapsed:.1?})",
            (closed - open).abs()
        ));
    }
    outcome(pass, details.join("; "))
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    let mut cases = 0;
    let mut errors = Vec::new();
    while cases < 100 {
        let d = 3 + cases % 3;
        let n = rng.random_range(d..=d + 4);
        let base = sample_uniform_sphere(d, n, rng.random()).unwrap();
        let scales: Vec<f64> = (0..n).map(|_| rng.random_range(0.8..1.2)).collect();
        let pts: Vec<Vec<f64>> = base
            .points()
            .zip(&scales)
            .map(|(p, s)| p.iter().map(|v| v * s).collect())
            .collect();
        let x = PointSet::from_points(&pts).unwrap();
        let size = rng.random_range(1..=d);
        let idx = rand::seq::index::sample(&mut rng, n, size).into_vec();
        let i = IndexSet::from_unsorted(idx).unwrap();
        let t = cap_params(&x, &i).unwrap().t;
        if d >= 4 && (t.abs() - 1.0).abs() < 1e-3 {
            continue;
        }
        match finite_difference_check(&x, &i, 1e-6) {
            Ok(r) => worst = worst.max(r.max_rel_error),
            Err(e) => errors.push(e.to_string()),
        }
        cases += 1;
    }
    let elapsed = start.elapsed();
    outcome(
        errors.is_empty() && worst <= 1e-5 && within(elapsed, Duration::from_secs(60)),
        format!("100 cases, worst relative error {worst:.2e} in {elapsed:.2?}"),
    )
}

fn criterion_9() -> Outcome {
    let x = two_points();
    let delta = discrepancy(&x, Family::Reduced).unwrap().value;
    let residual = optimality_residual(&x, DEFAULT_ACTIVITY_TOL).unwrap().residual;
    let lambda = generalized_discrepancy(&x.scaled(1.1)).unwrap().value;
    let e1 = (delta - (1.0 + FRAC_1_SQRT_2) / 2.0).abs();
    let e2 = (residual - 0.25).abs();
    let e3 = (lambda - (0.5 + 1.1 / (2.0 * 2f64.sqrt()))).abs();
    outcome(
        e1 <= 1e-12 && e2 <= 1e-9 && e3 <= 1e-12,
        format!("Delta {delta:.16} ({e1:.1e}), residual {residual:.12} ({e2:.1e}), Lambda {lambda:.16} ({e3:.1e})"),
    )
}

/// Point in the Frobenius ball of radius `r` around `x`.
fn ball_point(rng: &mut ChaCha8Rng, x: &PointSet, r: f64) -> PointSet {
    let len = x.as_slice().len();
    let dir = unit_normal(rng, len);
    let radius = r * rng.random::<f64>().powf(1.0 / len as f64);
    let data = x.as_slice().iter().zip(&dir).map(|(a, b)| a + radius * b).collect();
    PointSet::from_columns(x.dim(), data).unwrap()
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut total = 0;
    let mut holds = 0;
    let mut unexplained = 0;
    for k in 0..10u64 {
        let center = sample_uniform_sphere(3, 6, 300 + k).unwrap();
        let pairs: Vec<(PointSet, PointSet)> = (0..100)
            .map(|_| (ball_point(&mut rng, &center, 1e-3), ball_point(&mut rng, &center, 1e-3)))
            .collect();
        let mut l_ball = 0.0f64;
        for (a, b) in &pairs {
            for y in [a, b] {
                if let Ok(est) = lipschitz_estimate(y, Family::Full) {
                    l_ball = l_ball.max(est.l_exact);
                }
            }
        }
        for (a, b) in &pairs {
            total += 1;
            let ok = match (generalized_discrepancy(a), generalized_discrepancy(b)) {
                (Ok(la), Ok(lb)) => (la.value - lb.value).abs() <= (l_ball + 1e-6) * a.distance(b),
                _ => false,
            };
            if ok {
                holds += 1;
            } else if is_generic(a, DEFAULT_GENERICITY_TOL).generic && is_generic(b, DEFAULT_GENERICITY_TOL).generic {
                unexplained += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let rate = holds as f64 / total as f64;
    outcome(
        rate >= 0.99 && unexplained == 0,
        format!("{holds}/{total} pairs satisfy the bound, {unexplained} failures at generic sets, {elapsed:.2?}"),
    )
}

fn criterion_11() -> Outcome {
    let x = sample_uniform_sphere(3, 4, 11).unwrap();
    let spec = ScanSpec {
        point: 0,
        direction: vec![0.3, -0.5, 0.8],
        theta_start: -std::f64::consts::PI,
        theta_end: std::f64::consts::PI,
        steps: 401,
    };
    match scan(&x, &spec) {
        Ok(r) => {
            let jump = r.max_phi_jump();
            let step = r.max_lambda_step();
            let bound = r.l_hat() * r.step_size() * 1.01;
            outcome(
                jump >= 0.125 && step <= bound,
                format!("max phi jump {jump:.4}, max Lambda step {step:.3e} vs bound {bound:.3e}"),
            )
        }
        Err(e) => outcome(false, format!("scan failed: {e}")),
    }
}

fn timed_discrepancy(n: usize, seed: u64) -> Result<(f64, Duration), Error> {
    let x = sample_uniform_sphere(3, n, seed)?;
    let start = Instant::now();
    let r = discrepancy(&x, Family::Reduced)?;
    Ok((r.value, start.elapsed()))
}

fn criterion_12() -> Outcome {
    let threads = rayon::current_num_threads();
    let mut detail = String::new();
    let pass = match timed_discrepancy(500, 12) {
        Ok((value, elapsed)) => {
            detail.push_str(&format!(
                "d=3 N=500: Delta {value:.6} in {elapsed:.2?} on {threads} thread(s), limit 60s"
            ));
            within(elapsed, Duration::from_secs(60))
        }
        Err(e) => {
            detail.push_str(&format!("d=3 N=500 failed: {e}"));
            false
        }
    };
    if std::env::var_os("CAPDISC_STRETCH").is_some() {
        match timed_discrepancy(2000, 12) {
            Ok((value, elapsed)) => detail.push_str(&format!(
                "; stretch N=2000: Delta {value:.6} in {elapsed:.2?} (target 30 min, not gated)"
            )),
            Err(e) => detail.push_str(&format!("; stretch N=2000 failed: {e}")),
        }
    } else {
        detail.push_str("; N=2000 stretch skipped (set CAPDISC_STRETCH=1)");
    }
    outcome(pass, detail)
}

fn main() {
    let mut results: Vec<(u32, Outcome)> = Vec::new();
    let mut report = |id: u32, o: Outcome| {
        println!("criterion {id:>2}: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, o));
    };
    report(1, criterion_1());
    report(2, criterion_2());
    report(3, criterion_3());
    let (c4, c5) = criteria_4_5();
    report(4, c4);
    report(5, c5);
    report(6, criterion_6());
    report(7, criterion_7());
    report(8, criterion_8());
    report(9, criterion_9());
    report(10, criterion_10());
    report(11, criterion_11());
    report(12, criterion_12());
    let failed: Vec<u32> = results.iter().filter(|(_, o)| !o.pass).map(|(id, _)| *id).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}

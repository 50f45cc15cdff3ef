//! Householder QR for the tiny (at most `d × d`) point selections.
//!
//! With `X_I = QR` the Gram matrix is `X_Iᵀ X_I = RᵀR`, so `R` is its
//! Cholesky factor up to row signs, obtained without squaring the
//! condition number.

/// Factorizes the column-major `d × k` matrix in `a` (`k <= d`) in place.
///
/// On return the strict upper triangle of `R` sits in `a` above the
/// diagonal, `rdiag` holds the diagonal of `R`, and the Householder vectors
/// occupy the rest of each column with scalars in `tau`. Fails with the
/// offending `|R_jj|` as soon as one drops to `pivot_tol` or below.
pub(crate) fn householder_qr_in_place(
    a: &mut [f64],
    d: usize,
    k: usize,
    rdiag: &mut [f64],
    tau: &mut [f64],
    pivot_tol: f64,
) -> Result<(), f64> {
    debug_assert!(k <= d && a.len() == d * k);
    for j in 0..k {
        let (head, tail) = a.split_at_mut((j + 1) * d);
        let col = &mut head[j * d + j..];
        let alpha = col[0];
        let sigma: f64 = col[1..].iter().map(|v| v * v).sum();
        let norm = (alpha * alpha + sigma).sqrt();
        if norm.is_nan() || norm <= pivot_tol {
            return Err(norm);
        }
        let r = if alpha > 0.0 { -norm } else { norm };
        col[0] = alpha - r;
        let vnorm2 = col[0] * col[0] + sigma;
        let t = 2.0 / vnorm2;
        rdiag[j] = r;
        tau[j] = t;
        for m in 0..k - j - 1 {
            let other = &mut tail[m * d + j..(m + 1) * d];
            let s: f64 = col.iter().zip(other.iter()).map(|(v, o)| v * o).sum();
            let f = t * s;
            other.iter_mut().zip(col.iter()).for_each(|(o, v)| *o -= f * v);
        }
    }
    Ok(())
}

/// Solves `Rᵀ z = b` in place.
pub(crate) fn solve_rt_in_place(a: &[f64], d: usize, rdiag: &[f64], z: &mut [f64]) {
    for i in 0..z.len() {
        let mut s = z[i];
        for p in 0..i {
            s -= a[i * d + p] * z[p];
        }
        z[i] = s / rdiag[i];
    }
}

/// Solves `R c = b` in place.
pub(crate) fn solve_r_in_place(a: &[f64], d: usize, rdiag: &[f64], c: &mut [f64]) {
    let k = c.len();
    for i in (0..k).rev() {
        let mut s = c[i];
        for p in i + 1..k {
            s -= a[p * d + i] * c[p];
        }
        c[i] = s / rdiag[i];
    }
}

/// Overwrites the length-`d` vector `y` with `Q y`.
pub(crate) fn apply_q_in_place(a: &[f64], d: usize, k: usize, tau: &[f64], y: &mut [f64]) {
    for j in (0..k).rev() {
        let v = &a[j * d + j..(j + 1) * d];
        let part = &mut y[j..];
        let s: f64 = v.iter().zip(part.iter()).map(|(a, b)| a * b).sum();
        let f = tau[j] * s;
        part.iter_mut().zip(v).for_each(|(p, vi)| *p -= f * vi);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn factor(m: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (d, k) = m.shape();
        let mut a: Vec<f64> = m.iter().copied().collect();
        let mut rdiag = vec![0.0; k];
        let mut tau = vec![0.0; k];
        householder_qr_in_place(&mut a, d, k, &mut rdiag, &mut tau, 1e-12).unwrap();
        (a, rdiag, tau)
    }

    #[test]
    fn gram_system_matches_lu() {
        let m = DMatrix::from_row_slice(4, 3, &[0.5, 0.1, -0.3, 0.2, 0.9, 0.4, -0.7, 0.3, 0.6, 0.1, -0.2, 0.5]);
        let (a, rdiag, _) = factor(&m);
        let mut z = vec![1.0; 3];
        solve_rt_in_place(&a, 4, &rdiag, &mut z);
        let mut c = z.clone();
        solve_r_in_place(&a, 4, &rdiag, &mut c);
        let gram = m.transpose() * &m;
        let reference = gram.lu().solve(&DVector::from_element(3, 1.0)).unwrap();
        for i in 0..3 {
            assert!((c[i] - reference[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn q_reproduces_the_columns() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.25, 3.0]);
        let (a, rdiag, tau) = factor(&m);
        // Column j of X equals Q times column j of R.
        for j in 0..2 {
            let mut y = vec![0.0; 3];
            for p in 0..j {
                y[p] = a[j * 3 + p];
            }
            y[j] = rdiag[j];
            apply_q_in_place(&a, 3, 2, &tau, &mut y);
            for i in 0..3 {
                assert!((y[i] - m[(i, j)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn reports_small_pivot() {
        let mut a = vec![1.0, 0.0, 1.0, 1e-14];
        let mut rdiag = vec![0.0; 2];
        let mut tau = vec![0.0; 2];
        let pivot = householder_qr_in_place(&mut a, 2, 2, &mut rdiag, &mut tau, 1e-12).unwrap_err();
        assert!(pivot < 1e-12);
        let mut nan = vec![f64::NAN];
        assert!(householder_qr_in_place(&mut nan, 1, 1, &mut rdiag, &mut tau, 1e-12).is_err());
    }
}

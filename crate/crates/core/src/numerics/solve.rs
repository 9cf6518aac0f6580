use num_complex::Complex64;

use super::matrix::{CMatrix, Matrix, Scalar};
use crate::error::{Error, Result};

/// Pivots below this fraction of the reference magnitude are reported as singular.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-14;

/// Solves `A X = B` for Hermitian positive definite `A` via a square-root
/// free `L D Lᴴ` factorization. Only the lower triangle of `A` is read.
///
/// A pivot below `SINGULAR_PIVOT_RATIO` times the largest diagonal magnitude
/// is reported as [`Error::SingularMatrix`].
pub fn hermitian_solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let n = a.rows();
    if !a.is_square() {
        return Err(Error::dims(
            format!("{n}x{n}"),
            format!("{}x{}", n, a.cols()),
        ));
    }
    if b.rows() != n {
        return Err(Error::dims(
            format!("{n} rows"),
            format!("{} rows", b.rows()),
        ));
    }
    let max_diag = (0..n).fold(0.0_f64, |m, i| m.max(a[(i, i)].norm()));
    let tol = SINGULAR_PIVOT_RATIO * max_diag;

    // unit lower triangular L, real positive pivots d
    let mut l = CMatrix::identity(n);
    let mut d = vec![0.0_f64; n];
    for j in 0..n {
        let mut dj = a[(j, j)].re;
        for k in 0..j {
            dj -= l[(j, k)].norm_sqr() * d[k];
        }
        if !(dj > tol) || !dj.is_finite() {
            return Err(Error::SingularMatrix { pivot_index: j });
        }
        d[j] = dj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj() * d[k];
            }
            l[(i, j)] = s / dj;
        }
    }

    let mut x = CMatrix::zeros(n, b.cols());
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..b.cols() {
        // L y = b
        for i in 0..n {
            let mut s = b[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s;
        }
        // D Lᴴ x = y
        for i in (0..n).rev() {
            let mut s = y[i] / d[i];
            for k in (i + 1)..n {
                s -= l[(k, i)].conj() * x[(k, c)];
            }
            x[(i, c)] = s;
        }
    }
    Ok(x)
}

/// Solves `A x = b` for a general square `A` by Gaussian elimination with
/// partial pivoting.
///
/// The singularity reference is the largest entry magnitude of `A`.
pub fn general_solve<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Result<Vec<T>> {
    let n = a.rows();
    if !a.is_square() {
        return Err(Error::dims(
            format!("{n}x{n}"),
            format!("{}x{}", n, a.cols()),
        ));
    }
    if b.len() != n {
        return Err(Error::dims(n, b.len()));
    }
    let tol = SINGULAR_PIVOT_RATIO * a.max_abs();
    let mut m = a.clone();
    let mut x = b.to_vec();

    for col in 0..n {
        let (pivot_row, pivot_mag) =
            (col..n)
                .map(|r| (r, m[(r, col)].modulus()))
                .fold(
                    (col, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if !(pivot_mag > tol) || !pivot_mag.is_finite() {
            return Err(Error::SingularMatrix { pivot_index: col });
        }
        if pivot_row != col {
            for c in 0..n {
                let tmp = m[(col, c)];
                m[(col, c)] = m[(pivot_row, c)];
                m[(pivot_row, c)] = tmp;
            }
            x.swap(col, pivot_row);
        }
        let pivot = m[(col, col)];
        for r in (col + 1)..n {
            let factor = m[(r, col)] / pivot;
            if factor == T::zero() {
                continue;
            }
            for c in (col + 1)..n {
                let v = m[(col, c)];
                m[(r, c)] -= factor * v;
            }
            let v = x[col];
            x[r] -= factor * v;
        }
    }
    for r in (0..n).rev() {
        let mut s = x[r];
        for c in (r + 1)..n {
            s -= m[(r, c)] * x[c];
        }
        x[r] = s / m[(r, r)];
    }
    Ok(x)
}

/// `‖A X − B‖_F / ‖B‖_F`, or the absolute residual when `B = 0`.
pub fn relative_residual<T: Scalar>(a: &Matrix<T>, x: &Matrix<T>, b: &Matrix<T>) -> f64 {
    let r = a
        .matmul(x)
        .and_then(|ax| ax.sub(b))
        .map(|r| r.frobenius_norm());
    let r = r.unwrap_or(f64::INFINITY);
    let nb = b.frobenius_norm();
    if nb > 0.0 {
        r / nb
    } else {
        r
    }
}

//! Dense linear-algebra helpers shared by the estimation stages.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // f64 intrinsics need the trait only in no_std builds
use num_traits::Float;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Padé-13 scaling-and-squaring matrix exponential.
///
/// The approximant is evaluated at `A / 2^s` with `s` chosen so the scaled
/// 1-norm stays below the order-13 threshold, then squared back up. Applied
/// per timestamp, so irregular grids accumulate no step-to-step error.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    const THETA_13: f64 = 5.371920351148152;
    #[rustfmt::skip]
    const B: [f64; 14] = [
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0, 129060195264000.0, 10559470521600.0,
        670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
        960960.0, 16380.0, 182.0, 1.0,
    ];

    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }

    let norm = one_norm(a);
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as u32
    } else {
        0
    };
    let a = a / 2f64.powi(s as i32);

    let eye = DMatrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let u_inner = &a6 * (B[13] * &a6 + B[11] * &a4 + B[9] * &a2)
        + B[7] * &a6
        + B[5] * &a4
        + B[3] * &a2
        + B[1] * &eye;
    let u = &a * u_inner;
    let v = &a6 * (B[12] * &a6 + B[10] * &a4 + B[8] * &a2)
        + B[6] * &a6
        + B[4] * &a4
        + B[2] * &a2
        + B[0] * &eye;

    let num = &v + &u;
    let den = &v - &u;
    let mut r = den
        .lu()
        .solve(&num)
        .expect("Pade denominator is nonsingular for scaled input");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    let mut max = 0.0f64;
    for j in 0..a.ncols() {
        let s: f64 = a.column(j).iter().map(|x| x.abs()).sum();
        if s > max {
            max = s;
        }
    }
    max
}

/// Rank-revealing least-squares solve via SVD.
#[derive(Debug, Clone)]
pub struct LstsqResult {
    pub solution: DVector<f64>,
    /// Numerical rank at the tolerance used.
    pub rank: usize,
    /// Full column rank at the tolerance used.
    pub rank_ok: bool,
    /// sigma_max / sigma_min over all singular values (inf when rank-deficient).
    pub condition: f64,
    /// Euclidean norm of `A x - b`.
    pub residual: f64,
    pub tolerance: f64,
}

/// Minimum-norm least-squares solution of `A x = b`.
///
/// `tol` is the absolute singular-value cutoff; pass `None` to use
/// `max(nrows, ncols) * eps * sigma_max`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, tol: Option<f64>) -> Result<LstsqResult> {
    if a.nrows() != b.len() {
        return Err(Error::dim(
            None,
            format!("lstsq: {} rows vs rhs length {}", a.nrows(), b.len()),
        ));
    }
    let ncols = a.ncols();
    if ncols == 0 || a.nrows() == 0 {
        return Ok(LstsqResult {
            solution: DVector::zeros(ncols),
            rank: 0,
            rank_ok: ncols == 0,
            condition: 1.0,
            residual: b.norm(),
            tolerance: 0.0,
        });
    }
    let svd = a
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let sigma_max = svd.singular_values.max();
    let tol = tol.unwrap_or_else(|| default_rank_tol(a.nrows(), ncols, sigma_max));
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();

    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let mut coeffs = u.transpose() * b;
    for (i, c) in coeffs.iter_mut().enumerate() {
        if svd.singular_values[i] > tol {
            *c /= svd.singular_values[i];
        } else {
            *c = 0.0;
        }
    }
    let solution = v_t.transpose() * coeffs;

    let sigma_min = svd.singular_values.min();
    let condition = if sigma_min > 0.0 {
        sigma_max / sigma_min
    } else {
        f64::INFINITY
    };
    let residual = (a * &solution - b).norm();
    Ok(LstsqResult {
        solution,
        rank,
        rank_ok: rank == ncols,
        condition,
        residual,
        tolerance: tol,
    })
}

pub fn default_rank_tol(nrows: usize, ncols: usize, sigma_max: f64) -> f64 {
    nrows.max(ncols).max(1) as f64 * f64::EPSILON * sigma_max
}

/// Orthonormal basis of the left null space of `a`, plus the numerical rank.
///
/// A zero (or empty) matrix has the full space as its left null space.
pub fn left_null_space(a: &DMatrix<f64>, tol: Option<f64>) -> Result<(DMatrix<f64>, usize)> {
    let m = a.nrows();
    if m == 0 || a.ncols() == 0 || a.iter().all(|&x| x == 0.0) {
        return Ok((DMatrix::identity(m, m), 0));
    }
    // Full U: run the SVD on [A | 0] padded? nalgebra's thin SVD returns
    // m x min(m,n); take the orthogonal complement from the full left factor
    // of [A; extended] instead. Simplest robust route: SVD of A^T gives the
    // right factor V of size m x m only when m <= n. Use QR of the residual
    // projector for the general case.
    let svd = a
        .clone()
        .try_svd(true, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let sigma_max = svd.singular_values.max();
    let tol = tol.unwrap_or_else(|| default_rank_tol(m, a.ncols(), sigma_max));
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();

    let u = svd.u.as_ref().expect("u requested");
    // Columns of U beyond the rank span part of the null space; when m > ncols
    // the thin U stops short, so complete the basis by projecting away the
    // range and orthonormalizing the remainder.
    let u_range = u.columns(0, rank).into_owned();
    let proj = DMatrix::identity(m, m) - &u_range * u_range.transpose();
    let qr = proj.qr();
    let q = qr.q();
    let r = qr.r();
    let mut cols: Vec<usize> = Vec::new();
    for j in 0..r.nrows().min(r.ncols()) {
        if r[(j, j)].abs() > 1e-10 {
            cols.push(j);
        }
    }
    let mut basis = DMatrix::zeros(m, cols.len());
    for (out_j, &j) in cols.iter().enumerate() {
        basis.set_column(out_j, &q.column(j));
    }
    debug_assert_eq!(basis.ncols(), m - rank, "null-space dimension mismatch");
    Ok((basis, rank))
}

/// Complex LU solve of `A X = B`; errors report the offending point `s`.
pub fn solve_complex(
    a: DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
    s: Complex64,
) -> Result<DMatrix<Complex64>> {
    a.lu().solve(b).ok_or(Error::SingularPencil { s })
}

//! Matrix factorizations and normalized minimizers.
//!
//! Besides the classical kernels (LQ, RQ, Cholesky, SVD, polar) this module
//! provides the normalized variants the block coordinate descent solvers
//! are built on: the determinant-normalized LQ (the minimizer of
//! `||L^{-1}X||` over unit-determinant lower triangular matrices), the
//! trace-normalized polar (the minimizer of `tr(P^{-1}XX^T)` over
//! unit-trace SPD matrices), and the closed-form minimizers over positive
//! diagonal and unit-diagonal lower triangular matrices.

use crate::error::{Error, Result};
use crate::Matrix;

/// Relative pivot tolerance: a factorization fails if a required pivot or
/// diagonal falls below `RANK_TOL * ||X||`.
pub const RANK_TOL: f64 = 1e-12;

/// Determinant-normalized LQ: `L` is the unit-determinant lower triangular
/// minimizer of `||L~^{-1} X||`, `ell` the minimized criterion value, and
/// `Q` has orthonormal rows. The input factors as
/// `X = (ell / sqrt(p)) * L * Q`.
#[derive(Debug, Clone)]
pub struct NormalizedLq {
    pub ell: f64,
    pub l: Matrix,
    pub q: Matrix,
}

impl NormalizedLq {
    pub fn reconstruct(&self) -> Matrix {
        let p = self.l.nrows() as f64;
        (self.ell / p.sqrt()) * &self.l * &self.q
    }
}

/// Trace-normalized polar: `P` is the unit-trace SPD minimizer of
/// `tr(P~^{-1} X X^T)`, `ell = ||P^{-1}X||`, and `W = P^{-1}X / ell`, so
/// `X = ell * P * W` exactly. The rows of `W` are orthogonal with squared
/// norm `1/p`.
#[derive(Debug, Clone)]
pub struct NormalizedPolar {
    pub ell: f64,
    pub p: Matrix,
    pub w: Matrix,
}

impl NormalizedPolar {
    pub fn reconstruct(&self) -> Matrix {
        self.ell * &self.p * &self.w
    }
}

pub(crate) fn diag_product(m: &Matrix) -> f64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).product()
}

/// Two-norm condition number, via singular values.
pub(crate) fn cond2(m: &Matrix) -> f64 {
    let sv = m.clone().singular_values();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &s in sv.iter() {
        lo = lo.min(s);
        hi = hi.max(s);
    }
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

pub(crate) fn is_lower_triangular(m: &Matrix) -> bool {
    for j in 1..m.ncols() {
        for i in 0..j.min(m.nrows()) {
            if m[(i, j)] != 0.0 {
                return false;
            }
        }
    }
    true
}

fn check_rows_le_cols(x: &Matrix) -> Result<()> {
    if x.nrows() > x.ncols() {
        return Err(Error::RankDeficient {
            mode: None,
            detail: format!("{}x{} matrix has more rows than columns", x.nrows(), x.ncols()),
        });
    }
    Ok(())
}

/// LQ decomposition of a full-row-rank `p x n` matrix (`p <= n`):
/// `X = L Q` with `L` lower triangular with strictly positive diagonal and
/// `Q` with orthonormal rows. Computed as the QR of `X^T` with a sign fix.
pub fn lq(x: &Matrix) -> Result<(Matrix, Matrix)> {
    check_rows_le_cols(x)?;
    let p = x.nrows();
    let scale = x.norm();
    let qr = x.transpose().qr();
    let mut l = qr.r().transpose();
    let mut q = qr.q().transpose();
    for i in 0..p {
        let d = l[(i, i)];
        if d.abs() <= RANK_TOL * scale {
            return Err(Error::RankDeficient {
                mode: None,
                detail: format!("LQ pivot {i} is {d:.3e} (tolerance {:.3e})", RANK_TOL * scale),
            });
        }
        if d < 0.0 {
            for r in i..p {
                l[(r, i)] = -l[(r, i)];
            }
            for c in 0..q.ncols() {
                q[(i, c)] = -q[(i, c)];
            }
        }
    }
    Ok((l, q))
}

/// RQ decomposition: `X = R Z` with `R` upper triangular with positive
/// diagonal and `Z` with orthonormal rows. Reduced to an LQ by reversing
/// rows and columns.
pub fn rq(x: &Matrix) -> Result<(Matrix, Matrix)> {
    let p = x.nrows();
    let n = x.ncols();
    let mut flipped = Matrix::zeros(p, n);
    for i in 0..p {
        for j in 0..n {
            flipped[(i, j)] = x[(p - 1 - i, j)];
        }
    }
    let (l, q) = lq(&flipped)?;
    let mut r = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            r[(i, j)] = l[(p - 1 - i, p - 1 - j)];
        }
    }
    let mut z = Matrix::zeros(p, n);
    for i in 0..p {
        for j in 0..n {
            z[(i, j)] = q[(p - 1 - i, j)];
        }
    }
    Ok((r, z))
}

/// Lower triangular Cholesky square root of a symmetric positive definite
/// matrix, `S = L L^T`.
pub fn cholesky(s: &Matrix) -> Result<Matrix> {
    if s.nrows() != s.ncols() {
        return Err(Error::ShapeMismatch("cholesky needs a square matrix".into()));
    }
    let asym = (s - s.transpose()).norm();
    if asym > 1e-8 * s.norm().max(1e-300) {
        return Err(Error::InvalidArgument("matrix is not symmetric".into()));
    }
    nalgebra::Cholesky::new(s.clone())
        .map(|c| c.l())
        .ok_or(Error::NotPositiveDefinite)
}

/// Singular value decomposition `X = U diag(d) V^T` with `d` sorted
/// descending. Sign convention: in each column of `U` the entry of
/// largest magnitude is positive (ties broken by lowest row index), which
/// makes the output deterministic.
pub fn svd(x: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let dec = x.clone().svd(true, true);
    let mut u = dec.u.expect("u requested");
    let mut v = dec.v_t.expect("v_t requested").transpose();
    let mut d: Vec<f64> = dec.singular_values.iter().copied().collect();

    // descending order (nalgebra already sorts; enforce anyway)
    let mut perm: Vec<usize> = (0..d.len()).collect();
    perm.sort_by(|&a, &b| d[b].partial_cmp(&d[a]).unwrap());
    if perm.iter().enumerate().any(|(i, &p)| i != p) {
        let up = u.clone();
        let vp = v.clone();
        let dp = d.clone();
        for (new, &old) in perm.iter().enumerate() {
            u.set_column(new, &up.column(old));
            v.set_column(new, &vp.column(old));
            d[new] = dp[old];
        }
    }

    for j in 0..u.ncols() {
        let mut imax = 0;
        let mut best = 0.0f64;
        for i in 0..u.nrows() {
            if u[(i, j)].abs() > best {
                best = u[(i, j)].abs();
                imax = i;
            }
        }
        if best > 0.0 && u[(imax, j)] < 0.0 {
            for i in 0..u.nrows() {
                u[(i, j)] = -u[(i, j)];
            }
            for i in 0..v.nrows() {
                v[(i, j)] = -v[(i, j)];
            }
        }
    }
    (u, d, v)
}

/// Left polar decomposition of a full-row-rank `p x n` matrix (`p <= n`):
/// `X = P W` with `P = (XX^T)^{1/2}` symmetric positive definite and `W`
/// with orthonormal rows. Computed from the SVD.
pub fn polar(x: &Matrix) -> Result<(Matrix, Matrix)> {
    check_rows_le_cols(x)?;
    let scale = x.norm();
    let (u, d, v) = svd(x);
    if let Some((i, &s)) = d
        .iter()
        .enumerate()
        .find(|(_, &s)| s <= RANK_TOL * scale)
    {
        return Err(Error::RankDeficient {
            mode: None,
            detail: format!("singular value {i} is {s:.3e} (tolerance {:.3e})", RANK_TOL * scale),
        });
    }
    let dm = Matrix::from_diagonal(&nalgebra::DVector::from_vec(d));
    let p = &u * dm * u.transpose();
    let w = u * v.transpose();
    Ok((p, w))
}

/// Determinant-normalized LQ (see [`NormalizedLq`]). The factor satisfies
/// `L L^T = XX^T / |XX^T|^{1/p}`.
pub fn normalized_lq(x: &Matrix) -> Result<NormalizedLq> {
    let (l0, q) = lq(x)?;
    let p = l0.nrows();
    let c = diag_product(&l0).powf(1.0 / p as f64);
    let l = l0 / c;
    let y = l
        .solve_lower_triangular(x)
        .expect("positive diagonal");
    let ell = y.norm();
    Ok(NormalizedLq { ell, l, q })
}

/// Trace-normalized polar (see [`NormalizedPolar`]). The factor is
/// `P = (XX^T)^{1/2} / tr((XX^T)^{1/2})`.
pub fn normalized_polar(x: &Matrix) -> Result<NormalizedPolar> {
    let (p0, _) = polar(x)?;
    let p = p0.clone() / p0.trace();
    let y = p
        .clone()
        .lu()
        .solve(x)
        .ok_or(Error::NotPositiveDefinite)?;
    let ell = y.norm();
    let w = y / ell;
    Ok(NormalizedPolar { ell, p, w })
}

/// Minimizer of `||D~^{-1} X||` over unit-determinant positive diagonal
/// matrices: `D_ii = (S_ii / geomean(S))^{1/2}` with `S = XX^T`, returned
/// as a dense diagonal matrix.
pub fn diag_minimizer(x: &Matrix) -> Result<Matrix> {
    let p = x.nrows();
    let scale = x.norm();
    let mut d = Vec::with_capacity(p);
    for i in 0..p {
        let rn = x.row(i).norm();
        if rn <= RANK_TOL * scale {
            return Err(Error::ZeroRow { row: i });
        }
        d.push(rn);
    }
    let log_geo = d.iter().map(|v| v.ln()).sum::<f64>() / p as f64;
    let geo = log_geo.exp();
    Ok(Matrix::from_diagonal(&nalgebra::DVector::from_iterator(
        p,
        d.iter().map(|v| v / geo),
    )))
}

/// Minimizer of `||L~^{-1} X||` over unit-diagonal lower triangular
/// matrices, together with the remainder: `X = L * R` where `L = L0 F^{-1}`
/// from the LQ `X = L0 Q0` with `F = diag(L0)`, and `R = F Q0` has mutually
/// orthogonal (not orthonormal) rows.
pub fn unit_diag_minimizer(x: &Matrix) -> Result<(Matrix, Matrix)> {
    let (l0, q0) = lq(x)?;
    let p = l0.nrows();
    let mut l = l0.clone();
    for j in 0..p {
        let f = l0[(j, j)];
        for i in j..p {
            l[(i, j)] /= f;
        }
    }
    let mut r = q0;
    for i in 0..p {
        let f = l0[(i, i)];
        for c in 0..r.ncols() {
            r[(i, c)] *= f;
        }
    }
    Ok((l, r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1.0)
    }

    #[test]
    fn lq_of_identity() {
        let (l, q) = lq(&Matrix::identity(3, 3)).unwrap();
        assert!(close(&l, &Matrix::identity(3, 3), 1e-14));
        assert!(close(&q, &Matrix::identity(3, 3), 1e-14));
    }

    #[test]
    fn lq_of_diagonal() {
        let x = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 2.0]));
        let (l, q) = lq(&x).unwrap();
        assert!(close(&l, &x, 1e-14));
        assert!(close(&q, &Matrix::identity(2, 2), 1e-14));
    }

    #[test]
    fn lq_rejects_rank_deficiency() {
        // second row is a multiple of the first
        let x = Matrix::from_vec(2, 3, vec![1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(matches!(lq(&x), Err(Error::RankDeficient { .. })));
        let tall = Matrix::zeros(4, 2);
        assert!(lq(&tall).is_err());
    }

    #[test]
    fn rq_of_identity_and_diagonal() {
        let (r, z) = rq(&Matrix::identity(3, 3)).unwrap();
        assert!(close(&r, &Matrix::identity(3, 3), 1e-14));
        assert!(close(&z, &Matrix::identity(3, 3), 1e-14));
        let x = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 2.0]));
        let (r, z) = rq(&x).unwrap();
        assert!(close(&r, &x, 1e-14));
        assert!(close(&z, &Matrix::identity(2, 2), 1e-14));
    }

    #[test]
    fn cholesky_diagonal_case() {
        let s = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 9.0]));
        let l = cholesky(&s).unwrap();
        let expect = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 3.0]));
        assert!(close(&l, &expect, 1e-14));
    }

    #[test]
    fn cholesky_rejects_non_pd() {
        let s = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0]));
        assert!(matches!(cholesky(&s), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn svd_diagonal_and_zero() {
        let x = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 1.0]));
        let (u, d, v) = svd(&x);
        assert!(close(&u, &Matrix::identity(2, 2), 1e-14));
        assert!(close(&v, &Matrix::identity(2, 2), 1e-14));
        assert!((d[0] - 2.0).abs() < 1e-14 && (d[1] - 1.0).abs() < 1e-14);

        let (_, d0, _) = svd(&Matrix::zeros(2, 3));
        assert!(d0.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn svd_sign_convention_is_deterministic() {
        let x = Matrix::from_vec(2, 2, vec![-3.0, 0.0, 0.0, -1.0]);
        let (u, _, _) = svd(&x);
        for j in 0..2 {
            let col_max = (0..2).map(|i| u[(i, j)].abs()).fold(0.0, f64::max);
            let first = (0..2).find(|&i| u[(i, j)].abs() == col_max).unwrap();
            assert!(u[(first, j)] > 0.0);
        }
    }

    #[test]
    fn polar_of_rotation_and_diagonal() {
        let rot = Matrix::from_vec(2, 2, vec![0.0, 1.0, -1.0, 0.0]);
        let (p, w) = polar(&rot).unwrap();
        assert!(close(&p, &Matrix::identity(2, 2), 1e-12));
        assert!(close(&w, &rot, 1e-12));

        let x = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 3.0]));
        let (p, w) = polar(&x).unwrap();
        assert!(close(&p, &x, 1e-12));
        assert!(close(&w, &Matrix::identity(2, 2), 1e-12));
    }

    #[test]
    fn normalized_lq_identity() {
        let n = normalized_lq(&Matrix::identity(2, 2)).unwrap();
        assert!((n.ell - 2f64.sqrt()).abs() < 1e-14);
        assert!(close(&n.l, &Matrix::identity(2, 2), 1e-14));
        assert!(close(&n.q, &Matrix::identity(2, 2), 1e-14));
        assert!(close(&n.reconstruct(), &Matrix::identity(2, 2), 1e-14));
    }

    #[test]
    fn normalized_lq_diagonal_keeps_unit_det() {
        let x = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5]));
        let n = normalized_lq(&x).unwrap();
        assert!(close(&n.l, &x, 1e-14)); // det(2 * 0.5) = 1 already
        assert!((n.ell - 2f64.sqrt()).abs() < 1e-14);
        assert!(close(&n.q, &Matrix::identity(2, 2), 1e-14));
    }

    #[test]
    fn normalized_polar_identity() {
        let n = normalized_polar(&Matrix::identity(2, 2)).unwrap();
        assert!(close(&n.p, &(Matrix::identity(2, 2) / 2.0), 1e-13));
        assert!((n.ell - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        let expect_w = Matrix::identity(2, 2) / 2f64.sqrt();
        assert!(close(&n.w, &expect_w, 1e-12));
        assert!(close(&n.reconstruct(), &Matrix::identity(2, 2), 1e-12));
    }

    #[test]
    fn normalized_polar_diagonal() {
        let x = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5]));
        let n = normalized_polar(&x).unwrap();
        let expect_p = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.8, 0.2]));
        assert!(close(&n.p, &expect_p, 1e-13));
        assert!((n.ell - 2.5 * 2f64.sqrt()).abs() < 1e-12);
        assert!(close(&n.w, &(Matrix::identity(2, 2) / 2f64.sqrt()), 1e-12));
        assert!(close(&n.reconstruct(), &x, 1e-12));
    }

    #[test]
    fn diag_minimizer_trivials() {
        let d = diag_minimizer(&Matrix::identity(3, 3)).unwrap();
        assert!(close(&d, &Matrix::identity(3, 3), 1e-14));

        let x = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5]));
        let d = diag_minimizer(&x).unwrap();
        assert!(close(&d, &x, 1e-14));
    }

    #[test]
    fn diag_minimizer_rejects_zero_row() {
        let x = Matrix::from_vec(2, 2, vec![1.0, 0.0, 2.0, 0.0]);
        assert!(matches!(diag_minimizer(&x), Err(Error::ZeroRow { row: 1 })));
    }

    #[test]
    fn unit_diag_minimizer_identity() {
        let (l, r) = unit_diag_minimizer(&Matrix::identity(2, 2)).unwrap();
        assert!(close(&l, &Matrix::identity(2, 2), 1e-14));
        assert!(close(&r, &Matrix::identity(2, 2), 1e-14));
    }

    #[test]
    fn unit_diag_minimizer_matches_ldu_of_gram() {
        // For X lower triangular with unit diagonal the minimizer is X
        // itself: XX^T = X * X^T is the LDU with D = I.
        let x = Matrix::from_vec(2, 2, vec![1.0, 0.5, 0.0, 1.0]);
        let (l, r) = unit_diag_minimizer(&x).unwrap();
        assert!(close(&l, &x, 1e-14));
        // remainder has orthogonal rows and reconstructs X
        assert!(close(&(&l * &r), &x, 1e-14));
        let g = &r * r.transpose();
        assert!(g[(0, 1)].abs() < 1e-14 && g[(1, 0)].abs() < 1e-14);
    }
}

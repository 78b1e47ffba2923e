//! The incredible SVD (full rank), HOOI, and the truncated ISVD.
//!
//! The ISVD is an exact core rotation of the HOLQ: each triangular factor
//! is split by its SVD, `L_k = U_k D_k V_k^T`, and the `V_k` rotations are
//! absorbed into the core, leaving orthogonal factors, positive diagonal
//! mode-specific singular values with unit determinant, and a scaled
//! all-orthonormal core. The truncated variant rotates the HOOI core the
//! same way and leaves the fit unchanged.

use crate::error::{Error, Result};
use crate::kernels::svd;
use crate::solver::{holq, Diagnostics, SolverOptions};
use crate::tensor::{tucker_mult, Tensor};
use crate::Matrix;

const HOOI_TOL: f64 = 1e-10;
const HOOI_MAX_SWEEPS: usize = 200;

#[derive(Debug, Clone)]
pub struct IsvdDecomposition {
    pub ell: f64,
    /// Orthogonal `p_k x p_k` factors, one per leading mode.
    pub u: Vec<Matrix>,
    /// Positive diagonal factors with unit determinant, descending entries.
    pub d: Vec<Matrix>,
    /// Scaled all-orthonormal core with unit Frobenius norm.
    pub core: Tensor,
    pub diagnostics: Diagnostics,
}

impl IsvdDecomposition {
    pub fn reconstruct(&self) -> Result<Tensor> {
        let order = self.core.order();
        let mut mats: Vec<Option<&Matrix>> = self.d.iter().map(Some).collect();
        mats.resize(order, None);
        let inner = tucker_mult(&mats, &self.core)?;
        let mut mats: Vec<Option<&Matrix>> = self.u.iter().map(Some).collect();
        mats.resize(order, None);
        Ok(tucker_mult(&mats, &inner)?.scale(self.ell))
    }
}

#[derive(Debug, Clone)]
pub struct HooiDecomposition {
    /// `p_k x r_k` factors with orthonormal columns.
    pub factors: Vec<Matrix>,
    /// Core of shape `r_1 x ... x r_K x n`.
    pub core: Tensor,
    /// Frobenius norm of the approximation error.
    pub residual: f64,
    pub iterations: usize,
    /// `||core||` after the initial HOSVD projection and each sweep;
    /// non-decreasing.
    pub fit_history: Vec<f64>,
}

impl HooiDecomposition {
    pub fn reconstruct(&self) -> Result<Tensor> {
        let order = self.core.order();
        let mut mats: Vec<Option<&Matrix>> = self.factors.iter().map(Some).collect();
        mats.resize(order, None);
        tucker_mult(&mats, &self.core)
    }
}

#[derive(Debug, Clone)]
pub struct TruncatedIsvd {
    pub ranks: Vec<usize>,
    /// `p_k x r_k` factors with orthonormal columns.
    pub u: Vec<Matrix>,
    /// `r_k x r_k` positive diagonal factors with unit determinant.
    pub d: Vec<Matrix>,
    pub ell: f64,
    /// Core of shape `r_1 x ... x r_K x n`, scaled all-orthonormal.
    pub core: Tensor,
    /// Frobenius norm of the approximation error; equals the HOOI residual.
    pub residual: f64,
    /// Sweeps taken by the underlying HOOI.
    pub hooi_iterations: usize,
}

impl TruncatedIsvd {
    pub fn reconstruct(&self) -> Result<Tensor> {
        let order = self.core.order();
        let mut mats: Vec<Option<&Matrix>> = self.d.iter().map(Some).collect();
        mats.resize(order, None);
        let inner = tucker_mult(&mats, &self.core)?;
        let mut mats: Vec<Option<&Matrix>> = self.u.iter().map(Some).collect();
        mats.resize(order, None);
        Ok(tucker_mult(&mats, &inner)?.scale(self.ell))
    }
}

/// The incredible SVD: the HOLQ with each triangular factor split by its
/// SVD and the right rotations pushed into the core. Same scale and
/// reconstruction as the HOLQ it is derived from.
pub fn isvd(t: &Tensor, opts: &SolverOptions) -> Result<IsvdDecomposition> {
    let h = holq(t, opts)?;
    let k_modes = t.order() - 1;
    let mut u = Vec::with_capacity(k_modes);
    let mut d = Vec::with_capacity(k_modes);
    let mut rotations: Vec<Option<Matrix>> = Vec::with_capacity(t.order());
    for factor in h.factors.iter().take(k_modes) {
        let (uk, dk, vk) = svd(factor);
        u.push(uk);
        d.push(Matrix::from_diagonal(&nalgebra::DVector::from_vec(dk)));
        rotations.push(Some(vk.transpose()));
    }
    rotations.push(None);
    let mats: Vec<Option<&Matrix>> = rotations.iter().map(|r| r.as_ref()).collect();
    let core = tucker_mult(&mats, &h.core)?;
    Ok(IsvdDecomposition {
        ell: h.ell,
        u,
        d,
        core,
        diagnostics: h.diagnostics,
    })
}

fn leading_left_vectors(m: &Matrix, r: usize) -> Matrix {
    let (u, _, _) = svd(m);
    u.columns(0, r).into_owned()
}

/// Higher-order orthogonal iteration: the best multilinear rank-`ranks`
/// approximation of `t` (sample mode untouched), initialized from the
/// truncated per-mode SVDs. The fit `||core||` is non-decreasing per sweep.
pub fn hooi(t: &Tensor, ranks: &[usize]) -> Result<HooiDecomposition> {
    if t.order() < 2 {
        return Err(Error::InvalidArgument(
            "hooi needs an order-2 or higher tensor (last mode is the sample mode)".into(),
        ));
    }
    let k_modes = t.order() - 1;
    if ranks.len() != k_modes {
        return Err(Error::ShapeMismatch(format!(
            "{} ranks for {} leading modes",
            ranks.len(),
            k_modes
        )));
    }
    for (k, &r) in ranks.iter().enumerate() {
        if r == 0 || r > t.shape()[k] {
            return Err(Error::InvalidArgument(format!(
                "rank {r} out of range for mode {k} of size {}",
                t.shape()[k]
            )));
        }
    }

    let mut factors: Vec<Matrix> = (0..k_modes)
        .map(|k| Ok(leading_left_vectors(&t.unfold(k)?, ranks[k])))
        .collect::<Result<_>>()?;

    let project = |factors: &[Matrix]| -> Result<Tensor> {
        let transposed: Vec<Matrix> = factors.iter().map(|f| f.transpose()).collect();
        let mut mats: Vec<Option<&Matrix>> = transposed.iter().map(Some).collect();
        mats.resize(t.order(), None);
        tucker_mult(&mats, t)
    };

    let mut fit = project(&factors)?.frob_norm();
    let mut fit_history = vec![fit];
    let mut iterations = 0;
    let full = ranks
        .iter()
        .enumerate()
        .all(|(k, &r)| r == t.shape()[k]);
    if !full {
        for sweep in 1..=HOOI_MAX_SWEEPS {
            for k in 0..k_modes {
                let mut cur = t.clone();
                for (i, f) in factors.iter().enumerate() {
                    if i != k {
                        cur = cur.mode_mult(i, &f.transpose())?;
                    }
                }
                factors[k] = leading_left_vectors(&cur.unfold(k)?, ranks[k]);
            }
            iterations = sweep;
            let new_fit = project(&factors)?.frob_norm();
            fit_history.push(new_fit);
            let rel = (new_fit - fit).abs() / fit.max(1e-300);
            fit = new_fit;
            if rel < HOOI_TOL {
                break;
            }
        }
    }

    let core = project(&factors)?;
    let mut mats: Vec<Option<&Matrix>> = factors.iter().map(Some).collect();
    mats.resize(t.order(), None);
    let recon = tucker_mult(&mats, &core)?;
    let residual = t.sub(&recon)?.frob_norm();
    Ok(HooiDecomposition {
        factors,
        core,
        residual,
        iterations,
        fit_history,
    })
}

/// Truncated ISVD: the ISVD of the HOOI core, with the HOOI factors
/// absorbed into the orthonormal-column factors. A core rotation of the
/// HOOI — the residual is identical.
pub fn truncated_isvd(t: &Tensor, ranks: &[usize], opts: &SolverOptions) -> Result<TruncatedIsvd> {
    let h = hooi(t, ranks)?;
    let inner = isvd(&h.core, opts)?;
    let u: Vec<Matrix> = h
        .factors
        .iter()
        .zip(inner.u.iter())
        .map(|(vk, wk)| vk * wk)
        .collect();
    let result = TruncatedIsvd {
        ranks: ranks.to_vec(),
        u,
        d: inner.d,
        ell: inner.ell,
        core: inner.core,
        residual: 0.0,
        hooi_iterations: h.iterations,
    };
    let recon = result.reconstruct()?;
    let residual = t.sub(&recon)?.frob_norm();
    Ok(TruncatedIsvd { residual, ..result })
}

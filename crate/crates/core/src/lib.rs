//! Higher-order LQ and polar tensor decompositions, and the statistical
//! inference layer they support: maximum-likelihood estimation and Monte
//! Carlo likelihood ratio testing for separable (Kronecker-structured)
//! covariance models.
//!
//! The library is organized as follows:
//!
//! - [`tensor`]: dense multiway arrays with unfolding, folding, multilinear
//!   (Tucker) multiplication, Kronecker products, and mode merging.
//! - [`kernels`]: matrix factorizations and the normalized minimizers the
//!   solvers are built from (LQ/RQ, Cholesky, SVD, polar, and the
//!   determinant-, trace-, diagonal- and unit-diagonal-normalized variants).
//! - [`solver`]: the incredible HOLQ, HOLQ juniors under per-mode
//!   constraints, and the derived HORQ, via block coordinate descent.
//! - [`spectral`]: the incredible SVD (ISVD), HOOI, and the truncated ISVD.
//! - [`ihop`]: the incredible higher-order polar decomposition.
//! - [`inference`]: MLE for separable covariance models, likelihood ratio
//!   statistics, Monte Carlo null distributions, and a multilinear normal
//!   sampler.
//! - [`io`]: the tensor text format.

pub mod error;
pub mod io;
pub mod tensor;
pub mod kernels;
pub mod solver;
pub mod spectral;
pub mod ihop;
pub mod inference;

/// Dense, column-major, double-precision matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;

pub use error::{Error, Result};
pub use ihop::{ihop, ihop_plain, IhopDecomposition};
pub use inference::{
    is_nested, lrt_null_sample, lrt_statistic, lrt_test, mle, sample_multilinear_normal,
    HypothesisSpec, LrtResult, MleResult,
};
pub use kernels::{
    cholesky, diag_minimizer, lq, normalized_lq, normalized_polar, polar, rq, svd,
    unit_diag_minimizer, NormalizedLq, NormalizedPolar,
};
pub use solver::{
    check_core, criterion, holq, holq_junior, horq, CoreResidual, Diagnostics,
    HolqDecomposition, HorqDecomposition, ModeConstraint, SolverOptions, Variant,
};
pub use spectral::{hooi, isvd, truncated_isvd, HooiDecomposition, IsvdDecomposition, TruncatedIsvd};
pub use tensor::{kron, tucker_mult, Tensor};

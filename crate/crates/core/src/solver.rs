//! Block coordinate descent for the incredible HOLQ, HOLQ juniors under
//! per-mode constraints, and the derived HORQ.
//!
//! Two algorithm variants are implemented. The plain variant refits each
//! mode from the data tensor (solving against all other factors), while the
//! orthogonalized variant keeps the running core array orthonormalized and
//! never inverts a factor. Both perform identical updates sweep for sweep;
//! the pair is kept so each can serve as a cross-check oracle for the
//! other.

use crate::error::{Error, Result};
use crate::kernels::{self, cond2, diag_product, lq, rq};
use crate::tensor::{tucker_mult, Tensor};
use crate::Matrix;

/// Factor class of one mode.
///
/// `Unrestricted` is the group of unit-determinant lower triangular
/// matrices with positive diagonal; `Diagonal` its positive diagonal
/// subgroup; `UnitDiagCholesky` the lower triangular matrices with unit
/// diagonal; `Identity` pins the factor to the identity (the sample mode,
/// or an i.i.d.-homoscedastic mode).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeConstraint {
    Unrestricted,
    Diagonal,
    UnitDiagCholesky,
    Identity,
}

impl std::fmt::Display for ModeConstraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModeConstraint::Unrestricted => "unrestricted",
            ModeConstraint::Diagonal => "diagonal",
            ModeConstraint::UnitDiagCholesky => "unit-diag-cholesky",
            ModeConstraint::Identity => "identity",
        };
        f.write_str(s)
    }
}

/// Which block coordinate descent formulation to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// Core-updating formulation; no factor inversions in the sweep loop.
    #[default]
    Orthogonalized,
    /// Refit each mode from the data tensor.
    Plain,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Relative criterion-change threshold.
    pub tol: f64,
    /// Sweep cap.
    pub max_iter: usize,
    pub variant: Variant,
    /// Factor condition-number cap; beyond it the run is reported as
    /// divergent (the decomposition may not exist).
    pub blowup_cond: f64,
    /// Initial factors, one per mode; identity when `None`.
    pub init: Option<Vec<Matrix>>,
    /// Exit threshold for the core residual check.
    pub core_tol: f64,
    /// Record factor matrices after every sweep in the diagnostics.
    pub trace_factors: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 500,
            variant: Variant::Orthogonalized,
            blowup_cond: 1e12,
            init: None,
            core_tol: 1e-6,
            trace_factors: false,
        }
    }
}

/// Per-run convergence record.
#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    /// Completed sweeps.
    pub iterations: usize,
    /// Criterion value at the initial iterate and after each sweep.
    pub criterion_history: Vec<f64>,
    pub converged: bool,
    /// Per-mode residuals of the exit structure check.
    pub exit_residuals: Vec<f64>,
    /// The factors the run started from; uniqueness is not certified, so
    /// this is what makes a rerun reproducible.
    pub initial_factors: Vec<Matrix>,
    /// Factor snapshots per sweep, when requested.
    pub factor_trace: Option<Vec<Vec<Matrix>>>,
}

/// Residual of one mode of a core array against its constraint class.
#[derive(Debug, Clone)]
pub struct CoreResidual {
    pub mode: usize,
    pub constraint: ModeConstraint,
    pub residual: f64,
    /// For unit-diag-Cholesky modes the gram's diagonal values are free;
    /// they are reported here while only diagonality is asserted.
    pub gram_diag: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct HolqDecomposition {
    /// Scale; the minimized criterion value.
    pub ell: f64,
    /// One square factor per mode, in its constraint class.
    pub factors: Vec<Matrix>,
    /// Core array with unit Frobenius norm.
    pub core: Tensor,
    pub constraints: Vec<ModeConstraint>,
    pub diagnostics: Diagnostics,
}

impl HolqDecomposition {
    pub fn reconstruct(&self) -> Result<Tensor> {
        let mats: Vec<Option<&Matrix>> = self.factors.iter().map(Some).collect();
        Ok(tucker_mult(&mats, &self.core)?.scale(self.ell))
    }
}

#[derive(Debug, Clone)]
pub struct HorqDecomposition {
    pub r: f64,
    /// Upper triangular unit-determinant factors (identity on identity
    /// modes).
    pub factors: Vec<Matrix>,
    /// Scaled all-orthonormal core with unit Frobenius norm.
    pub core: Tensor,
}

impl HorqDecomposition {
    pub fn reconstruct(&self) -> Result<Tensor> {
        let mats: Vec<Option<&Matrix>> = self.factors.iter().map(Some).collect();
        Ok(tucker_mult(&mats, &self.core)?.scale(self.r))
    }
}

fn tag_mode(e: Error, mode: usize) -> Error {
    match e {
        Error::RankDeficient { mode: None, detail } => Error::RankDeficient {
            mode: Some(mode),
            detail,
        },
        other => other,
    }
}

fn is_identity(m: &Matrix) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let want = if i == j { 1.0 } else { 0.0 };
            if m[(i, j)] != want {
                return false;
            }
        }
    }
    true
}

/// Apply `factor^{-1}` on each mode via triangular or LU solves on the
/// unfoldings; `skip` leaves one mode untouched.
pub(crate) fn apply_inverse_factors(
    t: &Tensor,
    factors: &[Matrix],
    skip: Option<usize>,
) -> Result<Tensor> {
    let mut cur = t.clone();
    for (k, f) in factors.iter().enumerate() {
        if Some(k) == skip || is_identity(f) {
            continue;
        }
        let unf = cur.unfold(k)?;
        let solved = if kernels::is_lower_triangular(f) {
            f.solve_lower_triangular(&unf)
        } else {
            f.clone().lu().solve(&unf)
        }
        .ok_or_else(|| Error::RankDeficient {
            mode: Some(k),
            detail: "singular factor".into(),
        })?;
        let mut shape = cur.shape().to_vec();
        shape[k] = solved.nrows();
        cur = Tensor::fold(&solved, k, &shape)?;
    }
    Ok(cur)
}

/// The criterion `||(L_1^{-1},...,L_K^{-1},I)·T||`. Factors act on the
/// leading modes; any trailing modes are implicitly identity. No factor is
/// explicitly inverted.
pub fn criterion(t: &Tensor, factors: &[Matrix]) -> Result<f64> {
    if factors.len() > t.order() {
        return Err(Error::ShapeMismatch(format!(
            "{} factors for an order-{} tensor",
            factors.len(),
            t.order()
        )));
    }
    for (k, f) in factors.iter().enumerate() {
        if f.nrows() != f.ncols() || f.nrows() != t.shape()[k] {
            return Err(Error::ShapeMismatch(format!(
                "factor {k} is {}x{}, mode size is {}",
                f.nrows(),
                f.ncols(),
                t.shape()[k]
            )));
        }
    }
    Ok(apply_inverse_factors(t, factors, None)?.frob_norm())
}

/// Residuals of the core array against the per-mode structure implied by
/// the constraints: distance of the mode-`k` gram from `I/p_k`
/// (unrestricted), of its diagonal from `1/p_k` (diagonal), or its
/// off-diagonal mass (unit-diagonal Cholesky).
pub fn check_core(core: &Tensor, constraints: &[ModeConstraint]) -> Result<Vec<CoreResidual>> {
    if constraints.len() != core.order() {
        return Err(Error::ShapeMismatch(format!(
            "{} constraints for an order-{} core",
            constraints.len(),
            core.order()
        )));
    }
    let mut out = Vec::with_capacity(constraints.len());
    for (k, &c) in constraints.iter().enumerate() {
        let (residual, gram_diag) = match c {
            ModeConstraint::Identity => (0.0, None),
            _ => {
                let unf = core.unfold(k)?;
                let gram = &unf * unf.transpose();
                let pk = core.shape()[k] as f64;
                match c {
                    ModeConstraint::Unrestricted => (
                        (&gram - Matrix::identity(gram.nrows(), gram.ncols()) / pk).norm(),
                        None,
                    ),
                    ModeConstraint::Diagonal => {
                        let mut s = 0.0;
                        for i in 0..gram.nrows() {
                            s += (gram[(i, i)] - 1.0 / pk).powi(2);
                        }
                        (s.sqrt(), None)
                    }
                    ModeConstraint::UnitDiagCholesky => {
                        let mut s = 0.0;
                        for i in 0..gram.nrows() {
                            for j in 0..gram.ncols() {
                                if i != j {
                                    s += gram[(i, j)].powi(2);
                                }
                            }
                        }
                        let diag = (0..gram.nrows()).map(|i| gram[(i, i)]).collect();
                        (s.sqrt(), Some(diag))
                    }
                    ModeConstraint::Identity => unreachable!(),
                }
            }
        };
        out.push(CoreResidual {
            mode: k,
            constraint: c,
            residual,
            gram_diag,
        });
    }
    Ok(out)
}

fn validate_init(
    init: &[Matrix],
    shape: &[usize],
    constraints: &[ModeConstraint],
) -> Result<Vec<Matrix>> {
    if init.len() != shape.len() {
        return Err(Error::InvalidArgument(format!(
            "{} initial factors for an order-{} tensor",
            init.len(),
            shape.len()
        )));
    }
    let mut out = Vec::with_capacity(init.len());
    for (k, m) in init.iter().enumerate() {
        let p = shape[k];
        if m.nrows() != p || m.ncols() != p {
            return Err(Error::InvalidArgument(format!(
                "initial factor {k} is {}x{}, mode size is {p}",
                m.nrows(),
                m.ncols()
            )));
        }
        match constraints[k] {
            ModeConstraint::Identity => {
                if !is_identity(m) {
                    return Err(Error::InvalidArgument(format!(
                        "initial factor {k} must be the identity"
                    )));
                }
                out.push(m.clone());
            }
            cls => {
                if !kernels::is_lower_triangular(m) {
                    return Err(Error::InvalidArgument(format!(
                        "initial factor {k} must be lower triangular"
                    )));
                }
                if (0..p).any(|i| m[(i, i)] <= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "initial factor {k} must have positive diagonal"
                    )));
                }
                match cls {
                    ModeConstraint::Diagonal => {
                        if !(0..p).all(|i| (0..p).all(|j| i == j || m[(i, j)] == 0.0)) {
                            return Err(Error::InvalidArgument(format!(
                                "initial factor {k} must be diagonal"
                            )));
                        }
                    }
                    ModeConstraint::UnitDiagCholesky
                        if (0..p).any(|i| (m[(i, i)] - 1.0).abs() > 1e-8) => {
                            return Err(Error::InvalidArgument(format!(
                                "initial factor {k} must have unit diagonal"
                            )));
                        }
                    _ => {}
                }
                // re-normalize determinant drift for the unit-det classes
                if matches!(cls, ModeConstraint::Unrestricted | ModeConstraint::Diagonal) {
                    let det = diag_product(m);
                    if (det - 1.0).abs() > 1e-8 {
                        return Err(Error::InvalidArgument(format!(
                            "initial factor {k} must have unit determinant (got {det})"
                        )));
                    }
                    out.push(m / det.powf(1.0 / p as f64));
                } else {
                    out.push(m.clone());
                }
            }
        }
    }
    Ok(out)
}

struct SweepState {
    factors: Vec<Matrix>,
    core: Tensor,
    ell: f64,
}

fn sweep_orthogonalized(
    state: &mut SweepState,
    constraints: &[ModeConstraint],
) -> Result<()> {
    for (k, &cls) in constraints.iter().enumerate() {
        if cls == ModeConstraint::Identity {
            continue;
        }
        let pk = state.core.shape()[k];
        let qk = state.core.unfold(k)?;
        match cls {
            ModeConstraint::Unrestricted => {
                let (l, z) = lq(&qk).map_err(|e| tag_mode(e, k))?;
                let c = diag_product(&l).powf(1.0 / pk as f64);
                state.factors[k] = (&state.factors[k] * &l) / c;
                let folded = Tensor::fold(&z, k, state.core.shape())?;
                let qn = folded.frob_norm();
                state.ell *= c * qn;
                state.core = folded.scale(1.0 / qn);
            }
            ModeConstraint::Diagonal => {
                let mut f = Vec::with_capacity(pk);
                for i in 0..pk {
                    let rn = qk.row(i).norm();
                    if rn <= kernels::RANK_TOL {
                        return Err(Error::ZeroRow { row: i });
                    }
                    f.push(rn);
                }
                let c = (f.iter().map(|v| v.ln()).sum::<f64>() / pk as f64).exp();
                let mut y = qk;
                for i in 0..pk {
                    let inv = 1.0 / f[i];
                    for col in 0..y.ncols() {
                        y[(i, col)] *= inv;
                    }
                }
                for (j, fj) in f.iter().enumerate() {
                    let s = fj / c;
                    for i in 0..state.factors[k].nrows() {
                        state.factors[k][(i, j)] *= s;
                    }
                }
                let folded = Tensor::fold(&y, k, state.core.shape())?;
                let yn = folded.frob_norm();
                state.ell *= c * yn;
                state.core = folded.scale(1.0 / yn);
            }
            ModeConstraint::UnitDiagCholesky => {
                let (l, z) = lq(&qk).map_err(|e| tag_mode(e, k))?;
                let mut lf = l.clone();
                for j in 0..pk {
                    let inv = 1.0 / l[(j, j)];
                    for i in j..pk {
                        lf[(i, j)] *= inv;
                    }
                }
                state.factors[k] = &state.factors[k] * lf;
                let mut fz = z;
                for i in 0..pk {
                    let s = l[(i, i)];
                    for col in 0..fz.ncols() {
                        fz[(i, col)] *= s;
                    }
                }
                let folded = Tensor::fold(&fz, k, state.core.shape())?;
                let nn = folded.frob_norm();
                state.ell *= nn;
                state.core = folded.scale(1.0 / nn);
            }
            ModeConstraint::Identity => unreachable!(),
        }
    }
    Ok(())
}

fn sweep_plain(t: &Tensor, state: &mut SweepState, constraints: &[ModeConstraint]) -> Result<()> {
    for (k, &cls) in constraints.iter().enumerate() {
        if cls == ModeConstraint::Identity {
            continue;
        }
        let pk = t.shape()[k];
        // X_(k) L_{-k}^{-T}: divide every other mode out of the data tensor
        let partial = apply_inverse_factors(t, &state.factors, Some(k))?;
        let m = partial.unfold(k)?;
        match cls {
            ModeConstraint::Unrestricted => {
                let (l, _) = lq(&m).map_err(|e| tag_mode(e, k))?;
                let c = diag_product(&l).powf(1.0 / pk as f64);
                state.factors[k] = l / c;
            }
            ModeConstraint::Diagonal => {
                state.factors[k] = kernels::diag_minimizer(&m).map_err(|e| tag_mode(e, k))?;
            }
            ModeConstraint::UnitDiagCholesky => {
                let (l, _) = kernels::unit_diag_minimizer(&m).map_err(|e| tag_mode(e, k))?;
                state.factors[k] = l;
            }
            ModeConstraint::Identity => unreachable!(),
        }
    }
    Ok(())
}

fn run_descent(
    t: &Tensor,
    constraints: &[ModeConstraint],
    opts: &SolverOptions,
) -> Result<HolqDecomposition> {
    if constraints.len() != t.order() {
        return Err(Error::ShapeMismatch(format!(
            "{} constraints for an order-{} tensor",
            constraints.len(),
            t.order()
        )));
    }
    let shape = t.shape().to_vec();
    let factors = match &opts.init {
        Some(init) => validate_init(init, &shape, constraints)?,
        None => shape.iter().map(|&p| Matrix::identity(p, p)).collect(),
    };

    let norm = t.frob_norm();
    if norm == 0.0 {
        return Err(Error::InvalidArgument("input tensor is zero".into()));
    }

    let initial_factors = factors.clone();
    let initial = apply_inverse_factors(t, &factors, None)?;
    let ell0 = initial.frob_norm();
    let mut state = SweepState {
        factors,
        core: initial.scale(1.0 / ell0),
        ell: ell0,
    };

    let mut history = vec![state.ell];
    let mut trace: Option<Vec<Vec<Matrix>>> = opts.trace_factors.then(Vec::new);
    let active: Vec<usize> = constraints
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != ModeConstraint::Identity)
        .map(|(k, _)| k)
        .collect();

    let mut converged_rel = active.is_empty();
    let mut sweeps = 0;
    if !active.is_empty() {
        for sweep in 1..=opts.max_iter {
            match opts.variant {
                Variant::Orthogonalized => sweep_orthogonalized(&mut state, constraints)?,
                Variant::Plain => {
                    sweep_plain(t, &mut state, constraints)?;
                    state.ell = criterion(t, &state.factors)?;
                }
            }
            sweeps = sweep;
            if !state.ell.is_finite() || state.ell < 1e-290 {
                return Err(Error::MayNotExist(format!(
                    "criterion degenerated to {} after sweep {sweep}",
                    state.ell
                )));
            }
            for &k in &active {
                let cond = cond2(&state.factors[k]);
                if cond > opts.blowup_cond {
                    return Err(Error::MayNotExist(format!(
                        "factor {k} condition number {cond:.3e} exceeds {:.3e} after sweep {sweep}",
                        opts.blowup_cond
                    )));
                }
            }
            if let Some(tr) = trace.as_mut() {
                tr.push(state.factors.clone());
            }
            let prev = history[history.len() - 1];
            history.push(state.ell);
            if (state.ell - prev).abs() / prev < opts.tol {
                // The criterion is quadratically flat near the optimum, so
                // a small relative change alone leaves the factors an order
                // less accurate; accept only once the core structure
                // residuals are within tolerance too.
                let core_now = match opts.variant {
                    Variant::Orthogonalized => state.core.clone(),
                    Variant::Plain => {
                        let raw = apply_inverse_factors(t, &state.factors, None)?;
                        let nn = raw.frob_norm();
                        raw.scale(1.0 / nn)
                    }
                };
                let report = check_core(&core_now, constraints)?;
                if report.iter().all(|r| r.residual <= opts.core_tol) {
                    converged_rel = true;
                    break;
                }
            }
        }
    }

    if matches!(opts.variant, Variant::Plain) {
        state.ell = criterion(t, &state.factors)?;
        let core = apply_inverse_factors(t, &state.factors, None)?;
        state.core = core.scale(1.0 / state.ell);
    }

    let residual_report = check_core(&state.core, constraints)?;
    let exit_residuals: Vec<f64> = residual_report.iter().map(|r| r.residual).collect();
    let residual_ok = exit_residuals.iter().all(|&r| r <= opts.core_tol);

    Ok(HolqDecomposition {
        ell: state.ell,
        factors: state.factors,
        core: state.core,
        constraints: constraints.to_vec(),
        diagnostics: Diagnostics {
            iterations: sweeps,
            criterion_history: history,
            converged: converged_rel && residual_ok,
            exit_residuals,
            initial_factors,
            factor_trace: trace,
        },
    })
}

/// The incredible HOLQ of a tensor whose last mode is the sample mode:
/// unit-determinant lower triangular factors on every leading mode, the
/// identity on the last. Requires order at least 2 and full-row-rank
/// unfoldings along the factored modes.
pub fn holq(t: &Tensor, opts: &SolverOptions) -> Result<HolqDecomposition> {
    if t.order() < 2 {
        return Err(Error::InvalidArgument(
            "holq needs an order-2 or higher tensor (last mode is the sample mode)".into(),
        ));
    }
    let mut constraints = vec![ModeConstraint::Unrestricted; t.order() - 1];
    constraints.push(ModeConstraint::Identity);
    run_descent(t, &constraints, opts)
}

/// HOLQ junior: block coordinate descent with an explicit constraint class
/// for every mode. `holq` is the special case of all-unrestricted leading
/// modes with an identity sample mode.
pub fn holq_junior(
    t: &Tensor,
    constraints: &[ModeConstraint],
    opts: &SolverOptions,
) -> Result<HolqDecomposition> {
    run_descent(t, constraints, opts)
}

/// Derive the higher-order RQ from a HOLQ: RQ-factor each triangular
/// factor, push the orthogonal parts into the core.
pub fn horq(d: &HolqDecomposition) -> Result<HorqDecomposition> {
    if d
        .constraints
        .iter()
        .any(|c| !matches!(c, ModeConstraint::Unrestricted | ModeConstraint::Identity))
    {
        return Err(Error::InvalidArgument(
            "horq requires unrestricted or identity factors".into(),
        ));
    }
    let order = d.core.order();
    let mut uppers = Vec::with_capacity(order);
    let mut rotations: Vec<Option<Matrix>> = Vec::with_capacity(order);
    let mut scale = d.ell;
    for (k, f) in d.factors.iter().enumerate() {
        if d.constraints[k] == ModeConstraint::Identity {
            uppers.push(f.clone());
            rotations.push(None);
            continue;
        }
        let (r, z) = rq(f)?;
        let pk = r.nrows() as f64;
        let c = diag_product(&r).powf(1.0 / pk);
        uppers.push(r / c);
        scale *= c;
        rotations.push(Some(z));
    }
    let mats: Vec<Option<&Matrix>> = rotations.iter().map(|r| r.as_ref()).collect();
    let rotated = tucker_mult(&mats, &d.core)?;
    let nn = rotated.frob_norm();
    Ok(HorqDecomposition {
        r: scale * nn,
        factors: uppers,
        core: rotated.scale(1.0 / nn),
    })
}

//! Command-line front end: read tensors in the text format, run the
//! decompositions and tests, and emit JSON documents or aligned text
//! reports.
//!
//! Exit codes: 0 on success, 1 on input or usage errors, 2 when a solver
//! did not converge (the result document is still emitted, flagged).

mod constraints;
mod report;

use std::path::{Path, PathBuf};
use std::process::exit;

use clap::{Args, Parser, Subcommand, ValueEnum};
use holq_core::{
    holq, holq_junior, horq, ihop, ihop_plain, io, isvd, lrt_test, mle,
    sample_multilinear_normal, truncated_isvd, Matrix, SolverOptions, Tensor, Variant,
};
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

use constraints::{parse_per_mode, parse_spec};
use report::{
    constraints_json, default_core_path, diagnostics_json, mats_json, options_json, render_text,
    write_core, Report,
};

#[derive(Parser)]
#[command(
    name = "holq",
    version,
    about = "Higher-order LQ/polar tensor decompositions and separable-covariance inference"
)]
struct Cli {
    /// Worker threads for Monte Carlo replicates (default: HOLQ_THREADS or
    /// all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct OutArgs {
    /// Write the result document here instead of stdout.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Result document format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct SolverArgs {
    /// Relative criterion-change tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Sweep cap.
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Use the plain block coordinate descent variant.
    #[arg(long)]
    plain: bool,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            variant: if self.plain { Variant::Plain } else { Variant::Orthogonalized },
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct DecompArgs {
    /// Input tensor file.
    input: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    /// Where to write the core tensor (default: <input>.<cmd>.core.tsr).
    #[arg(long)]
    core_out: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct JuniorArgs {
    input: PathBuf,
    /// Per-mode constraint letters, e.g. "udi" or "ud i".
    #[arg(long)]
    constraints: String,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    core_out: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct MleArgs {
    input: PathBuf,
    /// Per-mode constraint letters, e.g. "uui".
    #[arg(long)]
    constraints: String,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct TisvdArgs {
    input: PathBuf,
    /// Multilinear ranks for the leading modes, e.g. 2,2.
    #[arg(long, value_delimiter = ',', required = true)]
    ranks: Vec<usize>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    core_out: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct LrtArgs {
    input: PathBuf,
    /// Null hypothesis spec, e.g. "du i" or "(12)u i".
    #[arg(long)]
    h0: String,
    /// Alternative hypothesis spec.
    #[arg(long)]
    h1: String,
    /// Monte Carlo replicates for the null distribution.
    #[arg(long, default_value_t = 999)]
    nsim: usize,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip the structural nesting check.
    #[arg(long)]
    force_nesting: bool,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Mode sizes of one observation, e.g. 2,3.
    #[arg(long, value_delimiter = ',', required = true)]
    shape: Vec<usize>,
    /// Sample count (appended as the last mode).
    #[arg(long)]
    n: usize,
    /// Scale parameter sigma^2.
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Tensor files holding one covariance matrix per mode; random
    /// well-conditioned unit-determinant matrices when omitted.
    #[arg(long, value_delimiter = ',')]
    sigmas: Vec<PathBuf>,
    /// Where to write the sampled tensor.
    #[arg(short, long)]
    out: PathBuf,
    /// Result document format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Incredible higher-order LQ decomposition.
    Holq(DecompArgs),
    /// HOLQ junior under per-mode constraints.
    Junior(JuniorArgs),
    /// Higher-order RQ derived from the HOLQ.
    Horq(DecompArgs),
    /// Incredible SVD.
    Isvd(DecompArgs),
    /// Truncated incredible SVD at given multilinear ranks.
    Tisvd(TisvdArgs),
    /// Incredible higher-order polar decomposition.
    Ihop(DecompArgs),
    /// Maximum likelihood estimates for a separable covariance model.
    Mle(MleArgs),
    /// Monte Carlo likelihood ratio test of nested separable models.
    Lrt(LrtArgs),
    /// Draw a multilinear normal sample and write it as a tensor file.
    Simulate(SimulateArgs),
}

fn read_input(path: &Path) -> Result<Tensor, String> {
    io::read_tensor_file(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn run_holq(a: &DecompArgs) -> Result<Report, String> {
    let t = read_input(&a.input)?;
    let d = holq(&t, &a.solver.options()).map_err(|e| e.to_string())?;
    let core_path = a
        .core_out
        .clone()
        .unwrap_or_else(|| default_core_path(&a.input, "holq"));
    write_core(&core_path, &d.core).map_err(|e| e.to_string())?;
    let converged = d.diagnostics.converged;
    Ok(Report {
        doc: json!({
            "command": "holq",
            "input": a.input.display().to_string(),
            "ell": d.ell,
            "factors": mats_json(&d.factors),
            "constraints": constraints_json(&d.constraints),
            "core_path": core_path.display().to_string(),
            "diagnostics": diagnostics_json(&d.diagnostics),
            "options": options_json(a.solver.tol, a.solver.max_iter, a.solver.plain),
        }),
        converged,
    })
}

fn run_junior(a: &JuniorArgs) -> Result<Report, String> {
    let t = read_input(&a.input)?;
    let constraints = parse_per_mode(&a.constraints, t.order())?;
    let d = holq_junior(&t, &constraints, &a.solver.options()).map_err(|e| e.to_string())?;
    let core_path = a
        .core_out
        .clone()
        .unwrap_or_else(|| default_core_path(&a.input, "junior"));
    write_core(&core_path, &d.core).map_err(|e| e.to_string())?;
    let converged = d.diagnostics.converged;
    Ok(Report {
        doc: json!({
            "command": "junior",
            "input": a.input.display().to_string(),
            "ell": d.ell,
            "factors": mats_json(&d.factors),
            "constraints": constraints_json(&d.constraints),
            "core_path": core_path.display().to_string(),
            "diagnostics": diagnostics_json(&d.diagnostics),
            "options": options_json(a.solver.tol, a.solver.max_iter, a.solver.plain),
        }),
        converged,
    })
}

fn run_horq(a: &DecompArgs) -> Result<Report, String> {
    let t = read_input(&a.input)?;
    let d = holq(&t, &a.solver.options()).map_err(|e| e.to_string())?;
    let h = horq(&d).map_err(|e| e.to_string())?;
    let core_path = a
        .core_out
        .clone()
        .unwrap_or_else(|| default_core_path(&a.input, "horq"));
    write_core(&core_path, &h.core).map_err(|e| e.to_string())?;
    let converged = d.diagnostics.converged;
    Ok(Report {
        doc: json!({
            "command": "horq",
            "input": a.input.display().to_string(),
            "r": h.r,
            "factors": mats_json(&h.factors),
            "core_path": core_path.display().to_string(),
            "diagnostics": diagnostics_json(&d.diagnostics),
            "options": options_json(a.solver.tol, a.solver.max_iter, a.solver.plain),
        }),
        converged,
    })
}

fn run_isvd(a: &DecompArgs) -> Result<Report, String> {
    let t = read_input(&a.input)?;
    let d = isvd(&t, &a.solver.options()).map_err(|e| e.to_string())?;
    let core_path = a
        .core_out
        .clone()
        .unwrap_or_else(|| default_core_path(&a.input, "isvd"));
    write_core(&core_path, &d.core).map_err(|e| e.to_string())?;
    let converged = d.diagnostics.converged;
    Ok(Report {
        doc: json!({
            "command": "isvd",
            "input": a.input.display().to_string(),
            "ell": d.ell,
            "u": mats_json(&d.u),
            "d": mats_json(&d.d),
            "core_path": core_path.display().to_string(),
            "diagnostics": diagnostics_json(&d.diagnostics),
            "options": options_json(a.solver.tol, a.solver.max_iter, a.solver.plain),
        }),
        converged,
    })
}

fn run_tisvd(a: &TisvdArgs) -> Result<Report, String> {
    let t = read_input(&a.input)?;
    let d = truncated_isvd(&t, &a.ranks, &a.solver.options()).map_err(|e| e.to_string())?;
    let core_path = a
        .core_out
        .clone()
        .unwrap_or_else(|| default_core_path(&a.input, "tisvd"));
    write_core(&core_path, &d.core).map_err(|e| e.to_string())?;
    Ok(Report {
        doc: json!({
            "command": "tisvd",
            "input": a.input.display().to_string(),
            "ranks": d.ranks,
            "ell": d.ell,
            "u": mats_json(&d.u),
            "d": mats_json(&d.d),
            "residual": d.residual,
            "hooi_iterations": d.hooi_iterations,
            "core_path": core_path.display().to_string(),
            "options": options_json(a.solver.tol, a.solver.max_iter, a.solver.plain),
        }),
        converged: true,
    })
}

fn run_ihop(a: &DecompArgs) -> Result<Report, String> {
    let t = read_input(&a.input)?;
    let opts = a.solver.options();
    let d = if a.solver.plain {
        ihop_plain(&t, &opts)
    } else {
        ihop(&t, &opts)
    }
    .map_err(|e| e.to_string())?;
    let core_path = a
        .core_out
        .clone()
        .unwrap_or_else(|| default_core_path(&a.input, "ihop"));
    write_core(&core_path, &d.core).map_err(|e| e.to_string())?;
    let converged = d.diagnostics.converged;
    Ok(Report {
        doc: json!({
            "command": "ihop",
            "input": a.input.display().to_string(),
            "ell": d.ell,
            "factors": mats_json(&d.factors),
            "core_path": core_path.display().to_string(),
            "diagnostics": diagnostics_json(&d.diagnostics),
            "options": options_json(a.solver.tol, a.solver.max_iter, a.solver.plain),
        }),
        converged,
    })
}

fn run_mle(a: &MleArgs) -> Result<Report, String> {
    let t = read_input(&a.input)?;
    let constraints = parse_per_mode(&a.constraints, t.order())?;
    let r = mle(&t, &constraints, &a.solver.options()).map_err(|e| e.to_string())?;
    let converged = r.diagnostics.converged;
    Ok(Report {
        doc: json!({
            "command": "mle",
            "input": a.input.display().to_string(),
            "sigma2_hat": r.sigma2_hat,
            "sigma_hats": mats_json(&r.sigma_hats),
            "max_loglik": r.max_loglik,
            "constraints": constraints_json(&constraints),
            "diagnostics": diagnostics_json(&r.diagnostics),
            "options": options_json(a.solver.tol, a.solver.max_iter, a.solver.plain),
        }),
        converged,
    })
}

fn run_lrt(a: &LrtArgs) -> Result<Report, String> {
    let t = read_input(&a.input)?;
    let h0 = parse_spec(&a.h0, t.shape())?;
    let h1 = parse_spec(&a.h1, t.shape())?;
    let opts = a.solver.options();

    // observed-data solves, kept for convergence flags in the echo
    let d0 = holq_junior(&h0.apply(&t).map_err(|e| e.to_string())?, h0.constraints(), &opts)
        .map_err(|e| e.to_string())?;
    let d1 = holq_junior(&h1.apply(&t).map_err(|e| e.to_string())?, h1.constraints(), &opts)
        .map_err(|e| e.to_string())?;

    let res = lrt_test(&t, &h0, &h1, a.nsim, a.seed, &opts, a.force_nesting)
        .map_err(|e| e.to_string())?;
    let converged = d0.diagnostics.converged && d1.diagnostics.converged;
    let mut doc = serde_json::to_value(&res).expect("serializable result");
    if let Value::Object(map) = &mut doc {
        map.insert("command".into(), json!("lrt"));
        map.insert("input".into(), json!(a.input.display().to_string()));
        map.insert("h0".into(), json!(a.h0));
        map.insert("h1".into(), json!(a.h1));
        map.insert(
            "observed_solves".into(),
            json!({
                "h0": diagnostics_json(&d0.diagnostics),
                "h1": diagnostics_json(&d1.diagnostics),
            }),
        );
        map.insert(
            "options".into(),
            options_json(a.solver.tol, a.solver.max_iter, a.solver.plain),
        );
    }
    Ok(Report { doc, converged })
}

fn read_sigma(path: &Path) -> Result<Matrix, String> {
    let t = read_input(path)?;
    if t.order() != 2 || t.shape()[0] != t.shape()[1] {
        return Err(format!(
            "{}: covariance file must hold a square 2-mode tensor",
            path.display()
        ));
    }
    t.unfold(0).map_err(|e| e.to_string())
}

fn random_unit_det_spd(p: usize, seed: u64, stream: u64) -> Matrix {
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX - stream); // away from the sampler's streams
    let g = Matrix::from_fn(p, p, |_, _| rng.sample(rand_distr::StandardNormal));
    let s = &g * g.transpose() + Matrix::identity(p, p) * p as f64;
    let det = s.determinant();
    s / det.powf(1.0 / p as f64)
}

fn run_simulate(a: &SimulateArgs) -> Result<Report, String> {
    let sigmas: Vec<Matrix> = if a.sigmas.is_empty() {
        a.shape
            .iter()
            .enumerate()
            .map(|(k, &p)| random_unit_det_spd(p, a.seed, k as u64))
            .collect()
    } else {
        if a.sigmas.len() != a.shape.len() {
            return Err(format!(
                "{} covariance files for {} modes",
                a.sigmas.len(),
                a.shape.len()
            ));
        }
        let mats = a.sigmas.iter().map(|p| read_sigma(p)).collect::<Result<Vec<_>, _>>()?;
        for (k, m) in mats.iter().enumerate() {
            if m.nrows() != a.shape[k] {
                return Err(format!(
                    "covariance for mode {} is {}x{}, mode size is {}",
                    k + 1,
                    m.nrows(),
                    m.ncols(),
                    a.shape[k]
                ));
            }
        }
        mats
    };
    let x = sample_multilinear_normal(a.sigma2, &sigmas, a.n, a.seed).map_err(|e| e.to_string())?;
    io::write_tensor_file(&a.out, &x).map_err(|e| e.to_string())?;
    Ok(Report {
        doc: json!({
            "command": "simulate",
            "shape": a.shape,
            "n": a.n,
            "sigma2": a.sigma2,
            "seed": a.seed,
            "rng": holq_core::inference::RNG_NAME,
            "sigmas": mats_json(&sigmas),
            "tensor_path": a.out.display().to_string(),
        }),
        converged: true,
    })
}

fn emit(report: &Report, out: &Option<PathBuf>, format: Format) -> Result<(), String> {
    let rendered = match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report.doc).expect("valid json");
            s.push('\n');
            s
        }
        Format::Text => render_text(&report.doc),
    };
    match out {
        Some(path) => std::fs::write(path, rendered).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            print!("{rendered}");
            Ok(())
        }
    }
}

fn init_threads(flag: Option<usize>) {
    let n = flag.or_else(|| {
        std::env::var("HOLQ_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = n {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                exit(0);
            }
            eprint!("{e}");
            exit(1);
        }
    };
    init_threads(cli.threads);

    let result = match &cli.command {
        Command::Holq(a) => run_holq(a).map(|r| (r, a.out.out.clone(), a.out.format)),
        Command::Junior(a) => run_junior(a).map(|r| (r, a.out.out.clone(), a.out.format)),
        Command::Horq(a) => run_horq(a).map(|r| (r, a.out.out.clone(), a.out.format)),
        Command::Isvd(a) => run_isvd(a).map(|r| (r, a.out.out.clone(), a.out.format)),
        Command::Tisvd(a) => run_tisvd(a).map(|r| (r, a.out.out.clone(), a.out.format)),
        Command::Ihop(a) => run_ihop(a).map(|r| (r, a.out.out.clone(), a.out.format)),
        Command::Mle(a) => run_mle(a).map(|r| (r, a.out.out.clone(), a.out.format)),
        Command::Lrt(a) => run_lrt(a).map(|r| (r, a.out.out.clone(), a.out.format)),
        Command::Simulate(a) => run_simulate(a).map(|r| (r, None, a.format)),
    };

    match result {
        Ok((report, out, format)) => {
            if let Err(e) = emit(&report, &out, format) {
                eprintln!("error: {e}");
                exit(1);
            }
            exit(if report.converged { 0 } else { 2 });
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            exit(1);
        }
    }
}

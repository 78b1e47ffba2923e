//! Shared test support: seeded generators, an independent Nelder-Mead
//! minimizer for optimizer oracles, and a two-sample Kolmogorov-Smirnov
//! test. Nothing here touches the library's factorization or solver paths.
#![allow(dead_code)]

use holq_core::{Matrix, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

pub fn rand_matrix(rng: &mut ChaCha12Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn rand_tensor(rng: &mut ChaCha12Rng, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Well-conditioned SPD matrix with unit determinant.
pub fn rand_spd_unit_det(rng: &mut ChaCha12Rng, p: usize) -> Matrix {
    let g = rand_matrix(rng, p, p);
    let s = &g * g.transpose() + Matrix::identity(p, p) * p as f64;
    let det = s.determinant();
    s / det.powf(1.0 / p as f64)
}

/// Lower triangular, positive diagonal, unit determinant, mild entries.
pub fn rand_unit_det_lower(rng: &mut ChaCha12Rng, p: usize) -> Matrix {
    let mut l = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..i {
            l[(i, j)] = 0.5 * rng.sample::<f64, _>(StandardNormal);
        }
        l[(i, i)] = (0.4 * rng.sample::<f64, _>(StandardNormal)).exp();
    }
    let det: f64 = (0..p).map(|i| l[(i, i)]).product();
    l / det.powf(1.0 / p as f64)
}

/// Positive diagonal with unit determinant.
pub fn rand_diag_unit_det(rng: &mut ChaCha12Rng, p: usize) -> Matrix {
    let logs: Vec<f64> = (0..p).map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
    let mean = logs.iter().sum::<f64>() / p as f64;
    Matrix::from_diagonal(&nalgebra::DVector::from_iterator(
        p,
        logs.iter().map(|l| (l - mean).exp()),
    ))
}

/// Criterion histories must never increase (up to roundoff slack).
pub fn assert_monotone(history: &[f64], label: &str) {
    for w in history.windows(2) {
        assert!(
            w[1] <= w[0] + 1e-13 * w[0].max(1.0),
            "{label}: criterion increased from {} to {}",
            w[0],
            w[1]
        );
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn mat_rel_err(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

// ---------------------------------------------------------------------
// Nelder-Mead with restarts
// ---------------------------------------------------------------------

fn nelder_mead_once(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    step: f64,
    ftol: f64,
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        if (values[worst] - values[best]).abs()
            <= ftol * (values[best].abs() + values[worst].abs()).max(1e-12)
        {
            break;
        }

        let mut centroid = vec![0.0; n];
        for &i in order.iter().take(n) {
            for (c, x) in centroid.iter_mut().zip(&simplex[i]) {
                *c += x / n as f64;
            }
        }

        let reflect: Vec<f64> = centroid
            .iter()
            .zip(&simplex[worst])
            .map(|(c, w)| c + alpha * (c - w))
            .collect();
        let fr = f(&reflect);

        if fr < values[best] {
            let expand: Vec<f64> = centroid
                .iter()
                .zip(&reflect)
                .map(|(c, r)| c + gamma * (r - c))
                .collect();
            let fe = f(&expand);
            if fe < fr {
                simplex[worst] = expand;
                values[worst] = fe;
            } else {
                simplex[worst] = reflect;
                values[worst] = fr;
            }
        } else if fr < values[second_worst] {
            simplex[worst] = reflect;
            values[worst] = fr;
        } else {
            let contract: Vec<f64> = centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(c, w)| c + rho * (w - c))
                .collect();
            let fc = f(&contract);
            if fc < values[worst] {
                simplex[worst] = contract;
                values[worst] = fc;
            } else {
                let best_point = simplex[best].clone();
                for i in 0..=n {
                    if i == best {
                        continue;
                    }
                    for (x, b) in simplex[i].iter_mut().zip(&best_point) {
                        *x = b + sigma * (*x - b);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }

    let (mut bi, mut bv) = (0, values[0]);
    for (i, &v) in values.iter().enumerate() {
        if v < bv {
            bv = v;
            bi = i;
        }
    }
    (simplex[bi].clone(), bv)
}

/// Derivative-free minimization: Nelder-Mead restarted from the incumbent
/// with a shrinking simplex. Good to ~1e-8 in the argument on the smooth
/// low-dimensional objectives used as oracles here.
pub fn minimize(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64], step0: f64) -> (Vec<f64>, f64) {
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut step = step0;
    for _ in 0..6 {
        let (xn, fn_) = nelder_mead_once(&mut f, &x, step, 1e-14, 4000);
        if fn_ < fx {
            x = xn;
            fx = fn_;
        }
        step *= 0.2;
    }
    (x, fx)
}

// ---------------------------------------------------------------------
// Two-sample Kolmogorov-Smirnov test
// ---------------------------------------------------------------------

/// Returns `(statistic, asymptotic p-value)` for samples `a` and `b`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (n1, n2) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n1 && j < n2 {
        let x1 = a[i];
        let x2 = b[j];
        if x1 <= x2 {
            i += 1;
        }
        if x2 <= x1 {
            j += 1;
        }
        let f1 = i as f64 / n1 as f64;
        let f2 = j as f64 / n2 as f64;
        d = d.max((f1 - f2).abs());
    }
    let en = ((n1 * n2) as f64 / (n1 + n2) as f64).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    // Kolmogorov tail series
    let mut p = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = sign * (-2.0 * (k as f64).powi(2) * lambda * lambda).exp();
        p += term;
        sign = -sign;
        if term.abs() < 1e-12 {
            break;
        }
    }
    ((d), (2.0 * p).clamp(0.0, 1.0))
}

// ---------------------------------------------------------------------
// Parameterizations for the optimizer oracles
// ---------------------------------------------------------------------

/// Lower triangular matrix from a flat parameter vector (row by row), with
/// the diagonal passed through `exp` to stay positive.
pub fn lower_from_params(params: &[f64], p: usize) -> Matrix {
    let mut l = Matrix::zeros(p, p);
    let mut idx = 0;
    for i in 0..p {
        for j in 0..=i {
            if i == j {
                l[(i, j)] = params[idx].exp();
            } else {
                l[(i, j)] = params[idx];
            }
            idx += 1;
        }
    }
    l
}

/// Normalize a positive-diagonal lower triangular matrix to unit
/// determinant.
pub fn unit_det(l: &Matrix) -> Matrix {
    let p = l.nrows();
    let det: f64 = (0..p).map(|i| l[(i, i)]).product();
    l / det.powf(1.0 / p as f64)
}

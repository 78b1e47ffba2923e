//! Dense multiway arrays.
//!
//! A [`Tensor`] stores its entries in vectorization order with the mode-0
//! index varying fastest, so `vec(T)` is simply the flat data slice and
//! `vec((A_1,...,A_K)·T) = (A_K ⊗ ... ⊗ A_1) vec(T)` holds with the
//! standard Kronecker product.
//!
//! Unfoldings use the Kolda–Bader convention: row `i` of the mode-`k`
//! unfolding holds every entry whose mode-`k` index equals `i`, with the
//! remaining modes ordered ascending and the lowest remaining mode varying
//! fastest across columns. Modes are 0-based throughout the API.

use crate::error::{Error, Result};
use crate::Matrix;

/// Dense real tensor with immutable value semantics.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Build a tensor from its shape and entries in vectorization order.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::InvalidArgument("tensor must have at least one mode".into()));
        }
        if shape.contains(&0) {
            return Err(Error::InvalidArgument("mode sizes must be positive".into()));
        }
        let n: usize = shape.iter().product();
        if data.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "data length {} does not match shape product {}",
                data.len(),
                n
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let n: usize = shape.iter().product();
        Self::new(shape, vec![0.0; n])
    }

    /// Build a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let n: usize = shape.iter().product();
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f(&idx));
            for (m, i) in idx.iter_mut().enumerate() {
                *i += 1;
                if *i < shape[m] {
                    break;
                }
                *i = 0;
            }
        }
        Self::new(shape, data)
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Total number of entries.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// The entries in vectorization order; this is `vec(T)`.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        debug_assert_eq!(idx.len(), self.order());
        let mut flat = 0;
        let mut stride = 1;
        for (m, &i) in idx.iter().enumerate() {
            debug_assert!(i < self.shape[m]);
            flat += i * stride;
            stride *= self.shape[m];
        }
        self.data[flat]
    }

    /// Frobenius norm: the two-norm of `vec(T)`.
    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&self, c: f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch("tensor shapes differ".into()));
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    fn stride(&self, mode: usize) -> usize {
        self.shape[..mode].iter().product()
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return Err(Error::ModeOutOfRange {
                mode,
                order: self.order(),
            });
        }
        Ok(())
    }

    /// Mode-`k` unfolding into a `p_k x prod(other modes)` matrix.
    pub fn unfold(&self, mode: usize) -> Result<Matrix> {
        self.check_mode(mode)?;
        let pk = self.shape[mode];
        let sk = self.stride(mode);
        let cols = self.data.len() / pk;
        let mut out = Matrix::zeros(pk, cols);
        for (f, &v) in self.data.iter().enumerate() {
            let low = f % sk;
            let ik = (f / sk) % pk;
            let high = f / (sk * pk);
            out[(ik, low + high * sk)] = v;
        }
        Ok(out)
    }

    /// Inverse of [`Tensor::unfold`]: refold a mode-`k` unfolding into a
    /// tensor of the given shape.
    pub fn fold(m: &Matrix, mode: usize, shape: &[usize]) -> Result<Tensor> {
        if mode >= shape.len() {
            return Err(Error::ModeOutOfRange {
                mode,
                order: shape.len(),
            });
        }
        let n: usize = shape.iter().product();
        let pk = shape[mode];
        if m.nrows() != pk || m.nrows() * m.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix cannot fold into shape {:?} at mode {}",
                m.nrows(),
                m.ncols(),
                shape,
                mode
            )));
        }
        let sk: usize = shape[..mode].iter().product();
        let mut data = vec![0.0; n];
        for col in 0..m.ncols() {
            let low = col % sk;
            let high = col / sk;
            let base = low + high * sk * pk;
            for ik in 0..pk {
                data[base + ik * sk] = m[(ik, col)];
            }
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Multiply mode `k` by the matrix `a` (`a.ncols()` must equal `p_k`).
    pub fn mode_mult(&self, mode: usize, a: &Matrix) -> Result<Tensor> {
        self.check_mode(mode)?;
        if a.ncols() != self.shape[mode] {
            return Err(Error::ShapeMismatch(format!(
                "matrix with {} columns cannot act on mode {} of size {}",
                a.ncols(),
                mode,
                self.shape[mode]
            )));
        }
        let unf = self.unfold(mode)?;
        let prod = a * unf;
        let mut shape = self.shape.clone();
        shape[mode] = a.nrows();
        Tensor::fold(&prod, mode, &shape)
    }

    /// Merge the adjacent modes `j` and `j+1` into a single mode of size
    /// `p_j * p_{j+1}`, with the mode-`j` index varying fastest inside the
    /// merged index. The vectorization is unchanged bit for bit.
    pub fn merge_modes(&self, j: usize, k: usize) -> Result<Tensor> {
        self.check_mode(j)?;
        self.check_mode(k)?;
        if k != j + 1 {
            return Err(Error::InvalidArgument(format!(
                "modes {j} and {k} are not adjacent; permute first"
            )));
        }
        let mut shape = Vec::with_capacity(self.order() - 1);
        shape.extend_from_slice(&self.shape[..j]);
        shape.push(self.shape[j] * self.shape[k]);
        shape.extend_from_slice(&self.shape[k + 1..]);
        Ok(Tensor {
            shape,
            data: self.data.clone(),
        })
    }

    /// Inverse of [`Tensor::merge_modes`]: split mode `j` of size `a*b`
    /// into two adjacent modes of sizes `a` and `b`.
    pub fn split_mode(&self, j: usize, sizes: (usize, usize)) -> Result<Tensor> {
        self.check_mode(j)?;
        let (a, b) = sizes;
        if a == 0 || b == 0 || a * b != self.shape[j] {
            return Err(Error::ShapeMismatch(format!(
                "cannot split mode {} of size {} into {}x{}",
                j, self.shape[j], a, b
            )));
        }
        let mut shape = Vec::with_capacity(self.order() + 1);
        shape.extend_from_slice(&self.shape[..j]);
        shape.push(a);
        shape.push(b);
        shape.extend_from_slice(&self.shape[j + 1..]);
        Ok(Tensor {
            shape,
            data: self.data.clone(),
        })
    }

    /// Reorder modes: mode `m` of the result is mode `perm[m]` of `self`.
    pub fn permute_modes(&self, perm: &[usize]) -> Result<Tensor> {
        let order = self.order();
        if perm.len() != order {
            return Err(Error::InvalidArgument("permutation length must equal order".into()));
        }
        let mut seen = vec![false; order];
        for &p in perm {
            if p >= order || seen[p] {
                return Err(Error::InvalidArgument(format!("invalid permutation {perm:?}")));
            }
            seen[p] = true;
        }
        let shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let old_strides: Vec<usize> = (0..order).map(|m| self.stride(m)).collect();
        let mut data = vec![0.0; self.data.len()];
        let mut idx = vec![0usize; order];
        for slot in data.iter_mut() {
            let mut old_flat = 0;
            for (m, &i) in idx.iter().enumerate() {
                old_flat += i * old_strides[perm[m]];
            }
            *slot = self.data[old_flat];
            for (m, i) in idx.iter_mut().enumerate() {
                *i += 1;
                if *i < shape[m] {
                    break;
                }
                *i = 0;
            }
        }
        Ok(Tensor { shape, data })
    }
}

/// Multilinear (Tucker) multiplication: apply one matrix per mode, with
/// `None` marking an identity factor. `mats.len()` must equal the order.
pub fn tucker_mult(mats: &[Option<&Matrix>], t: &Tensor) -> Result<Tensor> {
    if mats.len() != t.order() {
        return Err(Error::ShapeMismatch(format!(
            "{} factors supplied for an order-{} tensor",
            mats.len(),
            t.order()
        )));
    }
    let mut cur = t.clone();
    for (mode, m) in mats.iter().enumerate() {
        if let Some(a) = m {
            cur = cur.mode_mult(mode, a)?;
        }
    }
    Ok(cur)
}

/// Kronecker product, with the convention `vec(B X A^T) = (A ⊗ B) vec(X)`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ra, ca) = (a.nrows(), a.ncols());
    let (rb, cb) = (b.nrows(), b.ncols());
    let mut out = Matrix::zeros(ra * rb, ca * cb);
    for ia in 0..ra {
        for ja in 0..ca {
            let v = a[(ia, ja)];
            for ib in 0..rb {
                for jb in 0..cb {
                    out[(ia * rb + ib, ja * cb + jb)] = v * b[(ib, jb)];
                }
            }
        }
    }
    out
}

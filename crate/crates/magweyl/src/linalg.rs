//! Dense and matrix-free linear algebra helpers: complex GEMM, power iteration
//! for operator norms, Lanczos for the bottom of Hermitian spectra.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const DEFAULT_MAX_ITER: usize = 20_000;
pub const START_SEED: u64 = 0x6d61_6777_6579_6c00;

/// A linear map on ℂ^n given by its action and the action of its adjoint.
pub trait LinearOperator: Sync {
    fn len(&self) -> usize;
    fn apply_raw(&self, u: &[Complex64], out: &mut [Complex64]);
    fn apply_adjoint_raw(&self, u: &[Complex64], out: &mut [Complex64]);
}

/// Row-major n×n complex product.
pub fn gemm(a: &[Complex64], b: &[Complex64], n: usize) -> Vec<Complex64> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n * n);
    let mut c = vec![C0; n * n];
    let s = n as isize;
    // SAFETY: Complex64 is repr(C) with layout [f64; 2]; the slices have n*n
    // elements and the strides describe row-major n×n matrices.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            n,
            n,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            s,
            1,
            b.as_ptr() as *const [f64; 2],
            s,
            1,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            s,
            1,
        );
    }
    c
}

pub(crate) fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn start_vector(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    let s = norm2(&v);
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Largest singular value of `op`: restarted Lanczos on op*op, stopping when
/// the Ritz residual falls below `tol` relative to the Ritz value.
pub fn operator_norm<T: LinearOperator + ?Sized>(op: &T, tol: f64, max_iter: usize) -> Result<f64> {
    operator_norm_seeded(op, tol, max_iter, START_SEED)
}

struct Normal<'a, T: ?Sized>(&'a T);

impl<T: LinearOperator + ?Sized> LinearOperator for Normal<'_, T> {
    fn len(&self) -> usize {
        self.0.len()
    }

    fn apply_raw(&self, u: &[Complex64], out: &mut [Complex64]) {
        let mut w = vec![C0; u.len()];
        self.0.apply_raw(u, &mut w);
        self.0.apply_adjoint_raw(&w, out);
    }

    fn apply_adjoint_raw(&self, u: &[Complex64], out: &mut [Complex64]) {
        self.apply_raw(u, out)
    }
}

pub fn operator_norm_seeded<T: LinearOperator + ?Sized>(
    op: &T,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Input(format!("tolerance {tol} must be positive")));
    }
    let n = op.len();
    let normal = Normal(op);
    let steps = n.min(48);
    let mut v = start_vector(n, seed);
    let mut used = 0;
    let mut rel = f64::INFINITY;
    while used < max_iter {
        let r = lanczos_from(&normal, steps, true, v);
        used += steps;
        let k = r.values.len() - 1;
        let theta = r.values[k];
        if !theta.is_finite() {
            return Err(Error::Numerical { msg: "non-finite Ritz value".into(), iterations: used, residual: theta });
        }
        if theta <= 0.0 {
            return Ok(0.0);
        }
        rel = r.residuals[k] / theta;
        if rel <= tol || r.values.len() >= n {
            return Ok(theta.sqrt());
        }
        v = r.vectors.into_iter().last().unwrap();
        let s = norm2(&v);
        v.iter_mut().for_each(|x| *x /= s);
    }
    Err(Error::Numerical { msg: "norm iteration did not converge".into(), iterations: used, residual: rel })
}

/// Lanczos with full reorthogonalization for a Hermitian operator.
pub struct LanczosResult {
    /// Ritz values in ascending order.
    pub values: Vec<f64>,
    /// Ritz vectors (unit, unweighted) matching `values`, if requested.
    pub vectors: Vec<Vec<Complex64>>,
    /// Residual norm estimates |β_k s_k| per Ritz pair.
    pub residuals: Vec<f64>,
}

pub fn lanczos<T: LinearOperator + ?Sized>(op: &T, steps: usize, want_vectors: bool, seed: u64) -> LanczosResult {
    lanczos_from(op, steps, want_vectors, start_vector(op.len(), seed))
}

/// Lanczos from a given unit start vector.
pub fn lanczos_from<T: LinearOperator + ?Sized>(op: &T, steps: usize, want_vectors: bool, start: Vec<Complex64>) -> LanczosResult {
    let n = op.len();
    let steps = steps.min(n);
    let mut q: Vec<Vec<Complex64>> = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    let mut v = start;
    let mut w = vec![C0; n];
    for k in 0..steps {
        op.apply_raw(&v, &mut w);
        let a = v.iter().zip(&w).fold(C0, |acc, (x, y)| acc + x.conj() * y).re;
        q.push(v.clone());
        alpha.push(a);
        // Two passes of classical Gram–Schmidt against all previous vectors.
        for _ in 0..2 {
            for qj in &q {
                let c = qj.iter().zip(&w).fold(C0, |acc, (x, y)| acc + x.conj() * y);
                for (wi, qi) in w.iter_mut().zip(qj) {
                    *wi -= c * qi;
                }
            }
        }
        let b = norm2(&w);
        let prev = beta.last().copied().unwrap_or(0.0);
        beta.push(b);
        if b <= 1e-13 * (a.abs() + prev) || k + 1 == steps {
            break;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / b;
        }
    }
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let last_beta = beta.last().copied().unwrap_or(0.0);
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let residuals = order.iter().map(|&i| (last_beta * eig.eigenvectors[(m - 1, i)]).abs()).collect();
    let vectors = if want_vectors {
        order
            .iter()
            .map(|&i| {
                let mut x = vec![C0; n];
                for (j, qj) in q.iter().enumerate() {
                    let c = eig.eigenvectors[(j, i)];
                    for (xi, qi) in x.iter_mut().zip(qj) {
                        *xi += qi * c;
                    }
                }
                x
            })
            .collect()
    } else {
        Vec::new()
    };
    LanczosResult { values, vectors, residuals }
}

/// All eigenvalues of a dense Hermitian n×n matrix, ascending.
pub fn hermitian_eigenvalues(a: &[Complex64], n: usize) -> Vec<f64> {
    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (a[i * n + j] + a[j * n + i].conj()));
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

/// Dense matrix wrapped as a linear operator (row-major).
pub struct DenseMatrix {
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl LinearOperator for DenseMatrix {
    fn len(&self) -> usize {
        self.n
    }

    fn apply_raw(&self, u: &[Complex64], out: &mut [Complex64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            *o = row.iter().zip(u).fold(C0, |acc, (a, b)| acc + a * b);
        }
    }

    fn apply_adjoint_raw(&self, u: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|o| *o = C0);
        for i in 0..self.n {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * u[i];
            }
        }
    }
}

/// Σ c_i T_i over a list of operators, applied without forming the sum.
pub struct Combination<'a> {
    pub terms: Vec<(Complex64, Vec<&'a dyn LinearOperator>)>,
}

impl<'a> LinearOperator for Combination<'a> {
    fn len(&self) -> usize {
        self.terms[0].1[0].len()
    }

    /// Each term is a product T_1 T_2 ... applied right to left.
    fn apply_raw(&self, u: &[Complex64], out: &mut [Complex64]) {
        let n = self.len();
        out.iter_mut().for_each(|o| *o = C0);
        let mut a = vec![C0; n];
        let mut b = vec![C0; n];
        for (c, ops) in &self.terms {
            a.copy_from_slice(u);
            for op in ops.iter().rev() {
                op.apply_raw(&a, &mut b);
                std::mem::swap(&mut a, &mut b);
            }
            for (o, x) in out.iter_mut().zip(&a) {
                *o += c * x;
            }
        }
    }

    fn apply_adjoint_raw(&self, u: &[Complex64], out: &mut [Complex64]) {
        let n = self.len();
        out.iter_mut().for_each(|o| *o = C0);
        let mut a = vec![C0; n];
        let mut b = vec![C0; n];
        for (c, ops) in &self.terms {
            a.copy_from_slice(u);
            for op in ops.iter() {
                op.apply_adjoint_raw(&a, &mut b);
                std::mem::swap(&mut a, &mut b);
            }
            for (o, x) in out.iter_mut().zip(&a) {
                *o += c.conj() * x;
            }
        }
    }
}

//! Periodic position grids, wavefunctions, dense kernel operators and the
//! unitary discrete Fourier transform.

use crate::error::{dim_check, Error, Result};
use crate::linalg::{self, LinearOperator};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use std::cell::RefCell;
use std::f64::consts::PI;
use std::io::{Read, Write};

pub const DEFAULT_POINT_CAP: usize = 1 << 16;
/// Dense kernels above this many grid points (matrix side) are refused.
pub const DEFAULT_KERNEL_CAP: usize = 4096;

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// The torus [−L, L)^N sampled with M points per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionGrid {
    dim: usize,
    half_width: f64,
    points: usize,
}

impl PositionGrid {
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        Self::with_cap(dim, half_width, points, DEFAULT_POINT_CAP)
    }

    pub fn with_cap(dim: usize, half_width: f64, points: usize, cap: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Input(format!("grid dimension {dim} not in 1..=3")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Input(format!("grid half-width {half_width} must be positive")));
        }
        if points < 2 || points % 2 != 0 {
            return Err(Error::Config(format!("points per axis {points} must be even and >= 2")));
        }
        match points.checked_pow(dim as u32) {
            Some(t) if t <= cap => {}
            _ => {
                return Err(Error::Config(format!(
                    "{points}^{dim} grid points exceed the cap {cap}"
                )))
            }
        }
        Ok(Self { dim, half_width, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// h^N, the quadrature weight of one grid cell.
    pub fn cell(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    pub fn axis(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.coord(i)).collect()
    }

    /// Multi-index of a flat index; the first axis varies slowest.
    pub fn multi_index(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for a in (0..self.dim).rev() {
            out[a] = idx % self.points;
            idx /= self.points;
        }
        out
    }

    pub fn flat_index(&self, mi: &[usize]) -> usize {
        mi.iter().take(self.dim).fold(0, |acc, &i| acc * self.points + i)
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let mi = self.multi_index(idx);
        (0..self.dim).map(|a| self.coord(mi[a])).collect()
    }

    /// All grid points, flattened.
    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// The grid on which Fourier transforms of functions on this grid live:
    /// spacing π/L, centered at 0.
    pub fn reciprocal(&self) -> PositionGrid {
        PositionGrid {
            dim: self.dim,
            half_width: self.points as f64 * PI / (2.0 * self.half_width),
            points: self.points,
        }
    }

    /// Angular frequency of FFT bin `i` (standard order, Nyquist negative).
    pub fn fft_frequency(&self, i: usize) -> f64 {
        let m = self.points as i64;
        let s = if (i as i64) < m / 2 { i as i64 } else { i as i64 - m };
        s as f64 * PI / self.half_width
    }

    pub fn same_as(&self, o: &PositionGrid) -> bool {
        self.dim == o.dim && self.points == o.points && (self.half_width - o.half_width).abs() <= 1e-12 * self.half_width
    }
}

fn grid_check(a: &PositionGrid, b: &PositionGrid) -> Result<()> {
    if !a.same_as(b) {
        return Err(Error::Input("grid mismatch".into()));
    }
    Ok(())
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place unnormalized N-dimensional FFT over a row-major M^N array.
pub fn fft_nd(data: &mut [Complex64], dim: usize, m: usize, inverse: bool) {
    let plan = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(m)
        } else {
            p.plan_fft_forward(m)
        }
    });
    let total = m.pow(dim as u32);
    let mut line = vec![C0; m];
    for axis in 0..dim {
        let stride = m.pow((dim - 1 - axis) as u32);
        let outer = total / (stride * m);
        for o in 0..outer {
            for s in 0..stride {
                let base = o * stride * m + s;
                if stride == 1 {
                    plan.process(&mut data[base..base + m]);
                    continue;
                }
                for (k, l) in line.iter_mut().enumerate() {
                    *l = data[base + k * stride];
                }
                plan.process(&mut line);
                for (k, l) in line.iter().enumerate() {
                    data[base + k * stride] = *l;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// A complex function sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    pub grid: PositionGrid,
    pub values: Vec<Complex64>,
}

impl WaveFunction {
    pub fn new(grid: PositionGrid, values: Vec<Complex64>) -> Result<Self> {
        dim_check("wavefunction values", values.len(), grid.len())?;
        Ok(Self { grid, values })
    }

    pub fn from_fn<F: Fn(&[f64]) -> Complex64>(grid: PositionGrid, f: F) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: PositionGrid) -> Self {
        Self { grid, values: vec![C0; grid.len()] }
    }

    pub fn norm(&self) -> f64 {
        (self.grid.cell() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::Input(format!("cannot normalize vector of norm {n}")));
        }
        self.values.iter_mut().for_each(|v| *v /= n);
        Ok(self)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn axpy(&self, c: Complex64, o: &Self) -> Result<Self> {
        grid_check(&self.grid, &o.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&o.values).map(|(a, b)| a + c * b).collect(),
        })
    }
}

/// ⟨u, v⟩ = h^N Σ conj(u_i) v_i.
pub fn inner_product(u: &WaveFunction, v: &WaveFunction) -> Result<Complex64> {
    grid_check(&u.grid, &v.grid)?;
    Ok(raw_inner(&u.values, &v.values) * u.grid.cell())
}

pub(crate) fn raw_inner(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).fold(C0, |acc, (a, b)| acc + a.conj() * b)
}

/// Unitary Fourier transform with (2π)^{−N/2} normalization. The output lives
/// on `u.grid.reciprocal()`, samples centered at 0.
pub fn fourier(u: &WaveFunction, direction: Direction) -> Result<WaveFunction> {
    if u.values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::Input("non-finite wavefunction values".into()));
    }
    let g = u.grid;
    let r = g.reciprocal();
    let (n, m) = (g.dim(), g.points_per_axis());
    // Reorder the input so that index 0 sits at x=0, then FFT, then center.
    // x_j = −L + jh; with x index shifted by m/2 the sample at j=m/2 is x=0.
    let half = m / 2;
    let mut data = vec![C0; g.len()];
    for i in 0..g.len() {
        let mi = g.multi_index(i);
        let mut sh = [0usize; 3];
        for a in 0..n {
            sh[a] = (mi[a] + m - half) % m;
        }
        data[g.flat_index(&sh[..n])] = u.values[i];
    }
    fft_nd(&mut data, n, m, direction == Direction::Inverse);
    let scale = (g.spacing() / (2.0 * PI).sqrt()).powi(n as i32);
    let mut out = vec![C0; g.len()];
    for i in 0..g.len() {
        let mi = g.multi_index(i);
        let mut sh = [0usize; 3];
        for a in 0..n {
            sh[a] = (mi[a] + half) % m;
        }
        out[r.flat_index(&sh[..n])] = data[i] * scale;
    }
    Ok(WaveFunction { grid: r, values: out })
}

/// u(x + s) on the periodic grid, exact for band-limited data (FFT phase shift).
pub fn translate(u: &WaveFunction, shift: &[f64]) -> Result<WaveFunction> {
    let g = u.grid;
    dim_check("translation", shift.len(), g.dim())?;
    let (n, m) = (g.dim(), g.points_per_axis());
    let mut data = u.values.clone();
    fft_nd(&mut data, n, m, false);
    let ph: Vec<Vec<Complex64>> = (0..n)
        .map(|a| (0..m).map(|i| Complex64::from_polar(1.0, g.fft_frequency(i) * shift[a])).collect())
        .collect();
    for (i, v) in data.iter_mut().enumerate() {
        let mi = g.multi_index(i);
        let mut p = Complex64::new(1.0 / g.len() as f64, 0.0);
        for a in 0..n {
            p *= ph[a][mi[a]];
        }
        *v *= p;
    }
    fft_nd(&mut data, n, m, true);
    Ok(WaveFunction { grid: g, values: data })
}

/// −i∂_j u by spectral differentiation (Nyquist mode dropped).
pub fn spectral_derivative(u: &WaveFunction, axis: usize) -> Result<WaveFunction> {
    let g = u.grid;
    if axis >= g.dim() {
        return Err(Error::Input(format!("axis {axis} out of range")));
    }
    let (n, m) = (g.dim(), g.points_per_axis());
    let mut data = u.values.clone();
    fft_nd(&mut data, n, m, false);
    for (i, v) in data.iter_mut().enumerate() {
        let mi = g.multi_index(i);
        let k = if mi[axis] == m / 2 { 0.0 } else { g.fft_frequency(mi[axis]) };
        *v *= k / g.len() as f64;
    }
    fft_nd(&mut data, n, m, true);
    Ok(WaveFunction { grid: g, values: data })
}

/// 1-D matrix of −i d/dx on M periodic points (Nyquist mode dropped), row-major.
pub fn derivative_matrix_1d(g: &PositionGrid) -> Vec<Complex64> {
    let m = g.points_per_axis();
    let line = PositionGrid { dim: 1, half_width: g.half_width(), points: m };
    let mut mat = vec![C0; m * m];
    for col in 0..m {
        let mut e = vec![C0; m];
        e[col] = Complex64::new(1.0, 0.0);
        let d = spectral_derivative(&WaveFunction { grid: line, values: e }, 0).unwrap();
        for row in 0..m {
            mat[row * m + col] = d.values[row];
        }
    }
    mat
}

/// Dense kernel K(x_i, x_j) with action (Su)(x_i) = h^N Σ_j K_ij u_j.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelOperator {
    pub grid: PositionGrid,
    pub kernel: Vec<Complex64>,
}

impl KernelOperator {
    pub fn new(grid: PositionGrid, kernel: Vec<Complex64>) -> Result<Self> {
        check_kernel_size(&grid)?;
        dim_check("kernel entries", kernel.len(), grid.len() * grid.len())?;
        Ok(Self { grid, kernel })
    }

    pub fn zeros(grid: PositionGrid) -> Result<Self> {
        check_kernel_size(&grid)?;
        Ok(Self { grid, kernel: vec![C0; grid.len() * grid.len()] })
    }

    pub fn identity(grid: PositionGrid) -> Result<Self> {
        Self::multiplication(grid, |_| Complex64::new(1.0, 0.0))
    }

    /// Multiplication by f(x): K = diag(f)/h^N.
    pub fn multiplication<F: Fn(&[f64]) -> Complex64>(grid: PositionGrid, f: F) -> Result<Self> {
        let mut k = Self::zeros(grid)?;
        let n = grid.len();
        let w = 1.0 / grid.cell();
        for i in 0..n {
            k.kernel[i * n + i] = f(&grid.point(i)) * w;
        }
        Ok(k)
    }

    /// |v⟩⟨w|: K_ij = v_i conj(w_j).
    pub fn rank_one(v: &WaveFunction, w: &WaveFunction) -> Result<Self> {
        grid_check(&v.grid, &w.grid)?;
        check_kernel_size(&v.grid)?;
        let n = v.grid.len();
        let mut kernel = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                kernel.push(v.values[i] * w.values[j].conj());
            }
        }
        Ok(Self { grid: v.grid, kernel })
    }

    /// Wrap a plain matrix T acting on grid values (so K = T/h^N).
    pub fn from_matrix(grid: PositionGrid, mut t: Vec<Complex64>) -> Result<Self> {
        let w = 1.0 / grid.cell();
        t.iter_mut().for_each(|v| *v *= w);
        Self::new(grid, t)
    }

    pub fn size(&self) -> usize {
        self.grid.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.kernel[i * self.size() + j]
    }

    /// The matrix T = h^N K of the map on grid values.
    pub fn matrix(&self) -> Vec<Complex64> {
        let w = self.grid.cell();
        self.kernel.iter().map(|v| v * w).collect()
    }

    pub fn adjoint(&self) -> Self {
        let n = self.size();
        let mut kernel = vec![C0; n * n];
        for i in 0..n {
            for j in 0..n {
                kernel[j * n + i] = self.kernel[i * n + j].conj();
            }
        }
        Self { grid: self.grid, kernel }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self { grid: self.grid, kernel: self.kernel.iter().map(|v| v * c).collect() }
    }

    /// self + c·other.
    pub fn axpy(&self, c: Complex64, o: &Self) -> Result<Self> {
        grid_check(&self.grid, &o.grid)?;
        Ok(Self {
            grid: self.grid,
            kernel: self.kernel.iter().zip(&o.kernel).map(|(a, b)| a + c * b).collect(),
        })
    }

    /// Operator product self ∘ other.
    pub fn compose(&self, o: &Self) -> Result<Self> {
        grid_check(&self.grid, &o.grid)?;
        let n = self.size();
        let mut kernel = linalg::gemm(&self.kernel, &o.kernel, n);
        let w = self.grid.cell();
        kernel.iter_mut().for_each(|v| *v *= w);
        Ok(Self { grid: self.grid, kernel })
    }

    /// max |K − K*| entrywise, scaled by h^N.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.size();
        let mut d: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                d = d.max((self.kernel[i * n + j] - self.kernel[j * n + i].conj()).norm());
            }
        }
        d * self.grid.cell()
    }

    /// Frobenius norm of the matrix T = h^N K (Hilbert–Schmidt norm).
    pub fn hilbert_schmidt(&self) -> f64 {
        self.grid.cell() * self.kernel.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

fn check_kernel_size(grid: &PositionGrid) -> Result<()> {
    if grid.len() > DEFAULT_KERNEL_CAP {
        return Err(Error::Config(format!(
            "dense kernel with {} grid points exceeds the cap {DEFAULT_KERNEL_CAP}",
            grid.len()
        )));
    }
    Ok(())
}

impl LinearOperator for KernelOperator {
    fn len(&self) -> usize {
        self.size()
    }

    fn apply_raw(&self, u: &[Complex64], out: &mut [Complex64]) {
        let n = self.size();
        let w = self.grid.cell();
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            let row = &self.kernel[i * n..(i + 1) * n];
            *o = row.iter().zip(u).fold(C0, |acc, (k, x)| acc + k * x) * w;
        });
    }

    fn apply_adjoint_raw(&self, u: &[Complex64], out: &mut [Complex64]) {
        let n = self.size();
        let w = self.grid.cell();
        out.iter_mut().for_each(|o| *o = C0);
        for i in 0..n {
            let ui = u[i];
            if ui == C0 {
                continue;
            }
            let row = &self.kernel[i * n..(i + 1) * n];
            for (o, k) in out.iter_mut().zip(row) {
                *o += k.conj() * ui;
            }
        }
        out.iter_mut().for_each(|o| *o *= w);
    }
}

/// (Su)(x_i) = h^N Σ_j K_ij u_j.
pub fn apply(s: &KernelOperator, u: &WaveFunction) -> Result<WaveFunction> {
    grid_check(&s.grid, &u.grid)?;
    let mut out = vec![C0; u.values.len()];
    s.apply_raw(&u.values, &mut out);
    Ok(WaveFunction { grid: u.grid, values: out })
}

/// Largest singular value by power iteration on S*S.
pub fn operator_norm(s: &KernelOperator, tol: f64) -> Result<f64> {
    linalg::operator_norm(s, tol, linalg::DEFAULT_MAX_ITER)
}

const MAGIC: &[u8; 4] = b"MWGL";
const LAYOUT_VERSION: u32 = 1;

fn write_header<W: Write>(w: &mut W, kind: u32, g: &PositionGrid) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&LAYOUT_VERSION.to_le_bytes())?;
    w.write_all(&kind.to_le_bytes())?;
    w.write_all(&(g.dim() as u32).to_le_bytes())?;
    w.write_all(&(g.points_per_axis() as u64).to_le_bytes())?;
    w.write_all(&g.half_width().to_le_bytes())
}

fn write_values<W: Write>(w: &mut W, v: &[Complex64]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(v.len() * 16);
    for c in v {
        buf.extend_from_slice(&c.re.to_le_bytes());
        buf.extend_from_slice(&c.im.to_le_bytes());
    }
    w.write_all(&buf)
}

fn read_header<R: Read>(r: &mut R, kind: u32) -> Result<PositionGrid> {
    let io = |e: std::io::Error| Error::Io(e.to_string());
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4).map_err(io)?;
    if &b4 != MAGIC {
        return Err(Error::Io("bad magic".into()));
    }
    r.read_exact(&mut b4).map_err(io)?;
    if u32::from_le_bytes(b4) != LAYOUT_VERSION {
        return Err(Error::Io("unsupported layout version".into()));
    }
    r.read_exact(&mut b4).map_err(io)?;
    if u32::from_le_bytes(b4) != kind {
        return Err(Error::Io("unexpected record kind".into()));
    }
    r.read_exact(&mut b4).map_err(io)?;
    let dim = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b8).map_err(io)?;
    let m = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8).map_err(io)?;
    let l = f64::from_le_bytes(b8);
    PositionGrid::new(dim, l, m)
}

fn read_values<R: Read>(r: &mut R, n: usize) -> Result<Vec<Complex64>> {
    let mut buf = vec![0u8; n * 16];
    r.read_exact(&mut buf).map_err(|e| Error::Io(e.to_string()))?;
    Ok(buf
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect())
}

impl WaveFunction {
    /// Flat little-endian layout: magic, version, kind, N, M, L, then (re, im) pairs.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let io = |e: std::io::Error| Error::Io(e.to_string());
        write_header(w, 0, &self.grid).map_err(io)?;
        write_values(w, &self.values).map_err(io)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let g = read_header(r, 0)?;
        let values = read_values(r, g.len())?;
        Ok(Self { grid: g, values })
    }
}

impl KernelOperator {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let io = |e: std::io::Error| Error::Io(e.to_string());
        write_header(w, 1, &self.grid).map_err(io)?;
        write_values(w, &self.kernel).map_err(io)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let g = read_header(r, 1)?;
        let n = g.len();
        let kernel = read_values(r, n * n)?;
        Self::new(g, kernel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reciprocal_is_involutive() {
        let g = PositionGrid::new(2, 3.0, 16).unwrap();
        assert!(g.reciprocal().reciprocal().same_as(&g));
    }

    #[test]
    fn odd_points_rejected() {
        assert!(PositionGrid::new(1, 1.0, 15).is_err());
        assert!(PositionGrid::new(2, 1.0, 512).is_err());
    }

    #[test]
    fn flat_round_trip() {
        let g = PositionGrid::new(3, 1.0, 4).unwrap();
        for i in 0..g.len() {
            let mi = g.multi_index(i);
            assert_eq!(g.flat_index(&mi[..3]), i);
        }
    }

    #[test]
    fn derivative_matrix_is_hermitian() {
        let g = PositionGrid::new(1, 2.0, 8).unwrap();
        let d = derivative_matrix_1d(&g);
        for i in 0..8 {
            for j in 0..8 {
                assert!((d[i * 8 + j] - d[j * 8 + i].conj()).norm() < 1e-13);
            }
        }
    }
}

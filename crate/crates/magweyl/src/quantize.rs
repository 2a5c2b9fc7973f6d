//! The magnetic Weyl system, the quantization map and its inverse.
//!
//! Kernel convention: Op^A_ℏ(f) has kernel
//! K(x,y) = (2πℏ)^{−N} e^{−(i/ℏ)Γ^A[x,y]} Φ_f((x+y)/2, (x−y)/ℏ),
//! with Φ_f(m,t) = ∫ dη e^{i t·η} f(m,η).

use crate::error::{dim_check, Error, Result};
use crate::geometry::{PhaseSpacePoint, VectorPotential};
use crate::hilbert::{derivative_matrix_1d, fft_nd, KernelOperator, PositionGrid, WaveFunction};
use crate::linalg::{self, LinearOperator};
use crate::symbol::{fft_axes, ClosedSymbol, GaussTerm, GridSymbol, PhaseLattice, Symbol};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Planck constant restricted to (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PlanckParameter(f64);

impl PlanckParameter {
    pub fn new(hbar: f64) -> Result<Self> {
        check_hbar(hbar)?;
        Ok(Self(hbar))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// 1, 1/2, ..., 2^{−k}.
    pub fn dyadic_ladder(rungs: usize) -> Vec<f64> {
        (0..rungs).map(|k| 0.5f64.powi(k as i32)).collect()
    }
}

pub fn check_hbar(hbar: f64) -> Result<()> {
    if !(hbar > 0.0 && hbar <= 1.0) {
        return Err(Error::Input(format!("hbar = {hbar} is outside (0, 1]")));
    }
    Ok(())
}

fn check_setup(a: &VectorPotential, hbar: f64, grid: &PositionGrid) -> Result<()> {
    check_hbar(hbar)?;
    dim_check("vector potential vs grid", a.dim(), grid.dim())
}

/// W^A_ℏ(Y) applied matrix-free: multiplication phases after an FFT translation.
pub struct WeylOperator {
    grid: PositionGrid,
    /// e^{−i(x+ℏy/2)·η} e^{−(i/ℏ)Γ^A[x,x+ℏy]} per grid point.
    phase: Vec<Complex64>,
    /// e^{i k·ℏy} per FFT mode, already divided by the point count.
    shift: Vec<Complex64>,
}

impl WeylOperator {
    pub fn new(a: &VectorPotential, hbar: f64, y: &PhaseSpacePoint, grid: &PositionGrid) -> Result<Self> {
        check_setup(a, hbar, grid)?;
        dim_check("Weyl system point", y.dim(), grid.dim())?;
        let n = grid.dim();
        let s: Vec<f64> = y.x.iter().map(|v| hbar * v).collect();
        let phase = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let x = grid.point(i);
                let xs: Vec<f64> = x.iter().zip(&s).map(|(a, b)| a + b).collect();
                let lin: f64 = (0..n).map(|k| (x[k] + 0.5 * s[k]) * y.xi[k]).sum();
                let circ = if a.is_zero() { 0.0 } else { a.circulation(&x, &xs) };
                Complex64::from_polar(1.0, -lin - circ / hbar)
            })
            .collect();
        let inv = 1.0 / grid.len() as f64;
        let shift = (0..grid.len())
            .map(|i| {
                let mi = grid.multi_index(i);
                let ph: f64 = (0..n).map(|k| grid.fft_frequency(mi[k]) * s[k]).sum();
                Complex64::from_polar(inv, ph)
            })
            .collect();
        Ok(Self { grid: *grid, phase, shift })
    }

    pub fn apply(&self, u: &WaveFunction) -> Result<WaveFunction> {
        if !u.grid.same_as(&self.grid) {
            return Err(Error::Input("grid mismatch".into()));
        }
        let mut out = vec![C0; u.values.len()];
        self.apply_raw(&u.values, &mut out);
        Ok(WaveFunction { grid: self.grid, values: out })
    }

    /// Dense kernel, one column per unit vector.
    pub fn to_kernel(&self) -> Result<KernelOperator> {
        let n = self.grid.len();
        let mut k = KernelOperator::zeros(self.grid)?;
        let cols: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut e = vec![C0; n];
                e[j] = ONE;
                let mut out = vec![C0; n];
                self.apply_raw(&e, &mut out);
                out
            })
            .collect();
        let w = 1.0 / self.grid.cell();
        for (j, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                k.kernel[i * n + j] = v * w;
            }
        }
        Ok(k)
    }
}

impl LinearOperator for WeylOperator {
    fn len(&self) -> usize {
        self.grid.len()
    }

    fn apply_raw(&self, u: &[Complex64], out: &mut [Complex64]) {
        let (n, m) = (self.grid.dim(), self.grid.points_per_axis());
        out.copy_from_slice(u);
        fft_nd(out, n, m, false);
        out.iter_mut().zip(&self.shift).for_each(|(o, s)| *o *= s);
        fft_nd(out, n, m, true);
        out.iter_mut().zip(&self.phase).for_each(|(o, p)| *o *= p);
    }

    fn apply_adjoint_raw(&self, u: &[Complex64], out: &mut [Complex64]) {
        let (n, m) = (self.grid.dim(), self.grid.points_per_axis());
        for ((o, x), p) in out.iter_mut().zip(u).zip(&self.phase) {
            *o = x * p.conj();
        }
        fft_nd(out, n, m, false);
        out.iter_mut().zip(&self.shift).for_each(|(o, s)| *o *= s.conj());
        fft_nd(out, n, m, true);
    }
}

/// The magnetic Weyl system W^A_ℏ(Y) as a dense kernel.
pub fn weyl_system(a: &VectorPotential, hbar: f64, y: &PhaseSpacePoint, grid: &PositionGrid) -> Result<KernelOperator> {
    WeylOperator::new(a, hbar, y, grid)?.to_kernel()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Twist {
    /// e^{−(i/ℏ)Γ^A[x,y]}: the covariant quantization.
    Circulation,
    /// e^{(i/ℏ)(x−y)·A((x+y)/2)}: momentum shifted by A at the midpoint.
    Midpoint,
}

/// Phase angle of the twist at (x, y); it changes sign when x and y swap.
fn twist_angle(a: &VectorPotential, hbar: f64, x: &[f64], y: &[f64], t: Twist) -> f64 {
    match t {
        Twist::Circulation => -a.circulation(x, y) / hbar,
        Twist::Midpoint => {
            let mut m = [0.0; 3];
            for j in 0..x.len() {
                m[j] = 0.5 * (x[j] + y[j]);
            }
            (0..x.len()).map(|j| (x[j] - y[j]) * a.component(j, &m[..x.len()])).sum::<f64>() / hbar
        }
    }
}

fn twist_phase(a: &VectorPotential, hbar: f64, x: &[f64], y: &[f64], t: Twist) -> Complex64 {
    if a.is_zero() {
        return ONE;
    }
    Complex64::from_polar(1.0, twist_angle(a, hbar, x, y, t))
}

/// Magnetic Weyl quantization Op^A_ℏ(f) on the grid.
pub fn op_a(f: &Symbol, a: &VectorPotential, hbar: f64, grid: &PositionGrid) -> Result<KernelOperator> {
    quantize_with(f, a, hbar, grid, Twist::Circulation)
}

/// The non-covariant quantization with kernel built from f((x+y)/2, η − A((x+y)/2)).
pub fn wrong_op(f: &Symbol, a: &VectorPotential, hbar: f64, grid: &PositionGrid) -> Result<KernelOperator> {
    quantize_with(f, a, hbar, grid, Twist::Midpoint)
}

fn quantize_with(f: &Symbol, a: &VectorPotential, hbar: f64, grid: &PositionGrid, t: Twist) -> Result<KernelOperator> {
    check_setup(a, hbar, grid)?;
    dim_check("symbol vs grid", f.dim(), grid.dim())?;
    let mut k = KernelOperator::zeros(*grid)?;
    match f {
        Symbol::Closed(c) => {
            let mut integrable = Vec::new();
            let mut poly = Vec::new();
            for term in &c.terms {
                if term.xi_integrable() {
                    integrable.push(term);
                } else if term.xi_polynomial() {
                    poly.push(term);
                } else {
                    return Err(Error::Unsupported(
                        "symbol term mixes a momentum phase with polynomial growth".into(),
                    ));
                }
            }
            if !integrable.is_empty() {
                fill_integrable(&mut k.kernel, &integrable, a, hbar, grid, t);
            }
            if !poly.is_empty() {
                let m = polynomial_matrix(&poly, a, hbar, grid)?;
                let w = 1.0 / grid.cell();
                k.kernel.iter_mut().zip(&m).for_each(|(k, v)| *k += v * w);
            }
        }
        Symbol::Grid(g) => fill_grid(&mut k.kernel, g, a, hbar, grid, t)?,
    }
    Ok(k)
}

fn fill_integrable(kernel: &mut [Complex64], terms: &[&GaussTerm], a: &VectorPotential, hbar: f64, grid: &PositionGrid, t: Twist) {
    let (n, m, dim) = (grid.len(), grid.points_per_axis(), grid.dim());
    let axis = grid.axis();
    // Per term and axis: x-factor at the midpoint times the ξ-factor transform at (x−y)/ℏ.
    let tables: Vec<Vec<Vec<Complex64>>> = terms
        .iter()
        .map(|term| {
            (0..dim)
                .map(|d| {
                    let mut tab = vec![C0; m * m];
                    for i in 0..m {
                        for j in 0..m {
                            let mid = 0.5 * (axis[i] + axis[j]);
                            tab[i * m + j] = term.x[d].eval(mid) * term.xi[d].fourier((axis[i] - axis[j]) / hbar);
                        }
                    }
                    tab
                })
                .collect()
        })
        .collect();
    let coeffs: Vec<Complex64> = terms.iter().map(|t| t.coeff).collect();
    let pref = (2.0 * PI * hbar).powi(-(dim as i32));
    // Entries below this bound are left at zero; they are 16 orders of
    // magnitude under the largest possible entry and need no twist phase.
    let bound: f64 = coeffs
        .iter()
        .zip(&tables)
        .map(|(c, tab)| c.norm() * tab.iter().map(|t| t.iter().map(|v| v.norm()).fold(0.0, f64::max)).product::<f64>())
        .sum();
    let negligible = 1e-16 * bound;
    let pts: Vec<f64> = (0..n).flat_map(|i| grid.point(i)).collect();
    let mis: Vec<[usize; 3]> = (0..n).map(|i| grid.multi_index(i)).collect();
    let entry = |i: usize, j: usize| {
        let (mi, mj) = (mis[i], mis[j]);
        let mut s = C0;
        for (tt, tab) in tables.iter().enumerate() {
            let mut v = coeffs[tt];
            for d in 0..dim {
                v *= tab[d][mi[d] * m + mj[d]];
            }
            s += v;
        }
        s
    };
    let point = |i: usize| &pts[i * dim..(i + 1) * dim];
    // Angles for j ≥ i only; the lower triangle is their negative.
    let angles: Vec<Vec<f64>> = if a.is_zero() {
        Vec::new()
    } else {
        (0..n)
            .into_par_iter()
            .map(|i| {
                (i..n)
                    .map(|j| {
                        if j == i || (entry(i, j).norm() <= negligible && entry(j, i).norm() <= negligible) {
                            0.0
                        } else {
                            twist_angle(a, hbar, point(i), point(j), t)
                        }
                    })
                    .collect()
            })
            .collect()
    };
    kernel.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, out) in row.iter_mut().enumerate() {
            let s = entry(i, j);
            if s.norm() > negligible {
                let phase = match angles.is_empty() {
                    true => ONE,
                    false if j >= i => Complex64::from_polar(1.0, angles[i][j - i]),
                    false => Complex64::from_polar(1.0, -angles[j][i - j]),
                };
                *out += s * pref * phase;
            }
        }
    });
}

/// Plain matrix of Op^A(Σ a(x) ξ^β) for |β| ≤ 2 through the identity
/// Op^A(a ξ^β) = Op^0(a (ξ − A)^β), exact at this degree because the
/// circulation differs from A(m)·(y−x) only at third order in y−x.
fn polynomial_matrix(terms: &[&GaussTerm], a: &VectorPotential, hbar: f64, grid: &PositionGrid) -> Result<Vec<Complex64>> {
    let (n, dim) = (grid.len(), grid.dim());
    let pts = grid.points();
    let avals: Vec<Vec<f64>> = (0..dim)
        .map(|j| pts.iter().map(|x| if a.is_zero() { 0.0 } else { a.component(j, x) }).collect())
        .collect();
    let calc = Calculus::new(grid, hbar);
    let mut out = vec![C0; n * n];
    for term in terms {
        let beta: Vec<u32> = term.xi.iter().map(|f| f.pow).collect();
        if beta.iter().sum::<u32>() > 2 {
            return Err(Error::Unsupported("polynomial symbols of momentum degree above 2".into()));
        }
        let base: Vec<Complex64> = pts.iter().map(|x| term.eval_x(x)).collect();
        // Expand Π_a (ξ_a − A_a)^{β_a} = Σ_γ c_γ(x) ξ^γ.
        for g0 in 0..=beta.first().copied().unwrap_or(0) {
            for g1 in 0..=beta.get(1).copied().unwrap_or(0) {
                for g2 in 0..=beta.get(2).copied().unwrap_or(0) {
                    let gamma = [g0, g1, g2];
                    let b: Vec<Complex64> = (0..n)
                        .map(|i| {
                            let mut v = base[i];
                            for d in 0..dim {
                                let e = beta[d] - gamma[d];
                                if e > 0 {
                                    v *= binom(beta[d], gamma[d]) * (-avals[d][i]).powi(e as i32);
                                }
                            }
                            v
                        })
                        .collect();
                    calc.weyl_monomial(&mut out, &b, &gamma[..dim]);
                }
            }
        }
    }
    Ok(out)
}

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Symmetric orderings of P_j = −iℏ∂_j and multiplication operators.
struct Calculus {
    grid: PositionGrid,
    hbar: f64,
    d1: Vec<Complex64>,
}

impl Calculus {
    fn new(grid: &PositionGrid, hbar: f64) -> Self {
        Self { grid: *grid, hbar, d1: derivative_matrix_1d(grid) }
    }

    /// Adds the plain matrix of Op^0(b(x) ξ^γ), |γ| ≤ 2.
    fn weyl_monomial(&self, out: &mut [Complex64], b: &[Complex64], gamma: &[u32]) {
        let n = self.grid.len();
        let one = vec![ONE; n];
        let axes: Vec<usize> = gamma.iter().enumerate().flat_map(|(d, &g)| std::iter::repeat(d).take(g as usize)).collect();
        match axes.as_slice() {
            [] => {
                for i in 0..n {
                    out[i * n + i] += b[i];
                }
            }
            [j] => {
                self.add_product(out, Complex64::new(0.5, 0.0), b, None, &one, Some(*j), &one);
                self.add_product(out, Complex64::new(0.5, 0.0), &one, Some(*j), b, None, &one);
            }
            [j, k] => {
                let q = Complex64::new(0.25, 0.0);
                self.add_product(out, q, &one, Some(*j), &one, Some(*k), b);
                self.add_product(out, q, &one, Some(*j), b, Some(*k), &one);
                self.add_product(out, q, &one, Some(*k), b, Some(*j), &one);
                self.add_product(out, q, b, Some(*k), &one, Some(*j), &one);
            }
            _ => unreachable!("degree checked by caller"),
        }
    }

    /// Row entries of P_j (or the identity) at flat index i.
    fn row(&self, i: usize, axis: Option<usize>) -> Vec<(usize, Complex64)> {
        match axis {
            None => vec![(i, ONE)],
            Some(j) => {
                let m = self.grid.points_per_axis();
                let stride = m.pow((self.grid.dim() - 1 - j) as u32);
                let ij = self.grid.multi_index(i)[j];
                let base = i - ij * stride;
                (0..m)
                    .filter_map(|t| {
                        let v = self.d1[ij * m + t] * self.hbar;
                        (v != C0).then_some((base + t * stride, v))
                    })
                    .collect()
            }
        }
    }

    /// out += c · diag(a0) L diag(a1) R diag(a2), with L, R ∈ {1, P_j}.
    #[allow(clippy::too_many_arguments)]
    fn add_product(
        &self,
        out: &mut [Complex64],
        c: Complex64,
        a0: &[Complex64],
        l: Option<usize>,
        a1: &[Complex64],
        r: Option<usize>,
        a2: &[Complex64],
    ) {
        let n = self.grid.len();
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            if a0[i] == C0 {
                return;
            }
            for (mid, lv) in self.row(i, l) {
                let w = c * a0[i] * lv * a1[mid];
                if w == C0 {
                    continue;
                }
                for (col, rv) in self.row(mid, r) {
                    row[col] += w * rv * a2[col];
                }
            }
        });
    }
}

/// Shift each selected line along `axis` by `frac`·h using the FFT
/// (Nyquist term weighted by cos, so real data stays real).
fn shift_lines(data: &mut [Complex64], shape: &[usize], axis: usize, frac: f64, select: impl Fn(usize) -> bool) {
    use rustfft::FftPlanner;
    let m = shape[axis];
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    let factors: Vec<Complex64> = (0..m)
        .map(|k| {
            let s = if k < m / 2 { k as f64 } else { k as f64 - m as f64 };
            let th = 2.0 * PI * s * frac / m as f64;
            if k == m / 2 {
                Complex64::new(th.cos() / m as f64, 0.0)
            } else {
                Complex64::from_polar(1.0 / m as f64, th)
            }
        })
        .collect();
    let stride: usize = shape[axis + 1..].iter().product();
    let outer = data.len() / (stride * m);
    let mut line = vec![C0; m];
    for o in 0..outer {
        for s in 0..stride {
            let base = o * stride * m + s;
            if !select(base) {
                continue;
            }
            for (k, l) in line.iter_mut().enumerate() {
                *l = data[base + k * stride];
            }
            fwd.process(&mut line);
            line.iter_mut().zip(&factors).for_each(|(l, f)| *l *= f);
            inv.process(&mut line);
            for (k, l) in line.iter().enumerate() {
                data[base + k * stride] = *l;
            }
        }
    }
}

/// Parity of the separation index n_a (stored mod 2M) of the flat entry `idx`
/// in an array of shape [M; N] ++ [2M; N].
fn sep_parity(idx: usize, dim: usize, m: usize, a: usize) -> bool {
    let sep = idx % (2 * m).pow(dim as u32);
    let k = (sep / (2 * m).pow((dim - 1 - a) as u32)) % (2 * m);
    k % 2 == 1
}

fn check_lattice(g: &GridSymbol, grid: &PositionGrid, hbar: f64) -> Result<()> {
    let want = PhaseLattice::for_grid(grid, hbar);
    let l = g.lattice;
    let close = |a: f64, b: f64, s: f64| (a - b).abs() <= 1e-9 * s.abs().max(1.0);
    if l.dim != want.dim
        || l.nx != want.nx
        || l.nxi != want.nxi
        || !close(l.x0, want.x0, want.dx)
        || !close(l.dx, want.dx, want.dx)
        || !close(l.xi0, want.xi0, want.dxi)
        || !close(l.dxi, want.dxi, want.dxi)
    {
        return Err(Error::Config(format!(
            "grid symbol lattice does not match the quantization lattice of this grid at hbar = {hbar}"
        )));
    }
    Ok(())
}

fn fill_grid(kernel: &mut [Complex64], g: &GridSymbol, a: &VectorPotential, hbar: f64, grid: &PositionGrid, t: Twist) -> Result<()> {
    check_lattice(g, grid, hbar)?;
    let (n, m, dim) = (grid.len(), grid.points_per_axis(), grid.dim());
    let l = g.lattice;
    // The momentum window must hold the symbol: its outermost ξ-slices must be negligible.
    let maxv = g.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut edge: f64 = 0.0;
    for (idx, v) in g.values.iter().enumerate() {
        let r = idx % l.xi_len();
        let on_edge = (0..dim).any(|a| (r / l.nxi.pow((dim - 1 - a) as u32)) % l.nxi == 0);
        if on_edge {
            edge = edge.max(v.norm());
        }
    }
    if maxv > 0.0 && edge > 1e-6 * maxv {
        return Err(Error::Resolution {
            msg: format!(
                "symbol is not negligible at |xi| = pi*hbar/h = {:.4}; (x-y)/hbar is under-resolved",
                -l.xi0
            ),
            min_points: 2 * m,
        });
    }
    let mut shape = vec![m; dim];
    shape.extend(std::iter::repeat(2 * m).take(dim));
    // Φ(c, n) = Δη^N (−1)^{Σn} Σ_r e^{2πi n·r/(2M)} f(c, η_r).
    let mut phi = g.values.clone();
    fft_axes(&mut phi, &shape, &(dim..2 * dim).collect::<Vec<_>>(), true);
    let sep_len = (2 * m).pow(dim as u32);
    let scale = l.dxi.powi(dim as i32);
    for (idx, v) in phi.iter_mut().enumerate() {
        let sep = idx % sep_len;
        let mut parity = 0;
        let mut s = sep;
        for _ in 0..dim {
            parity += s % 2;
            s /= 2 * m;
        }
        *v *= if parity % 2 == 0 { scale } else { -scale };
    }
    // Odd separations pair with half-grid midpoints.
    for ax in 0..dim {
        shift_lines(&mut phi, &shape, ax, 0.5, |base| sep_parity(base, dim, m, ax));
    }
    let pref = (2.0 * PI * hbar).powi(-(dim as i32));
    kernel.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let mi = grid.multi_index(i);
        let x = grid.point(i);
        for (j, out) in row.iter_mut().enumerate() {
            let mj = grid.multi_index(j);
            let mut c = 0;
            let mut s = 0;
            for d in 0..dim {
                c = c * m + (mi[d] + mj[d]) / 2;
                s = s * 2 * m + (mi[d] + 2 * m - mj[d]) % (2 * m);
            }
            let v = phi[c * sep_len + s];
            if v != C0 {
                *out += v * pref * twist_phase(a, hbar, &x, &grid.point(j), t);
            }
        }
    });
    Ok(())
}

/// Inverse of `op_a`: the grid symbol on `PhaseLattice::for_grid(grid, ℏ)`.
pub fn dequantize(s: &KernelOperator, a: &VectorPotential, hbar: f64) -> Result<GridSymbol> {
    let grid = s.grid;
    check_setup(a, hbar, &grid)?;
    let (n, m, dim) = (grid.len(), grid.points_per_axis(), grid.dim());
    if m % 2 != 0 {
        return Err(Error::Config("midpoint re-indexing needs an even number of points per axis".into()));
    }
    let lattice = PhaseLattice::for_grid(&grid, hbar);
    let sep_len = (2 * m).pow(dim as u32);
    let mut data = vec![C0; n * sep_len];
    // K̃(m, d) = K(x,y) e^{+(i/ℏ)Γ^A[x,y]}, stored at (⌊(i+j)/2⌋, (i−j) mod 2M).
    let rows: Vec<Vec<(usize, Complex64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mi = grid.multi_index(i);
            let x = grid.point(i);
            (0..n)
                .filter_map(|j| {
                    let k = s.kernel[i * n + j];
                    if k == C0 {
                        return None;
                    }
                    let mj = grid.multi_index(j);
                    let mut c = 0;
                    let mut sp = 0;
                    for d in 0..dim {
                        c = c * m + (mi[d] + mj[d]) / 2;
                        sp = sp * 2 * m + (mi[d] + 2 * m - mj[d]) % (2 * m);
                    }
                    let ph = twist_phase(a, hbar, &x, &grid.point(j), Twist::Circulation).conj();
                    Some((c * sep_len + sp, k * ph))
                })
                .collect()
        })
        .collect();
    for row in rows {
        for (idx, v) in row {
            data[idx] = v;
        }
    }
    let mut shape = vec![m; dim];
    shape.extend(std::iter::repeat(2 * m).take(dim));
    for ax in 0..dim {
        shift_lines(&mut data, &shape, ax, -0.5, |base| sep_parity(base, dim, m, ax));
    }
    // f(c, η_r) = h^N Σ_n (−1)^{Σn} e^{−2πi n·r/(2M)} K̃(c, n).
    let scale = grid.cell();
    for (idx, v) in data.iter_mut().enumerate() {
        let sep = idx % sep_len;
        let mut parity = 0;
        let mut s = sep;
        for _ in 0..dim {
            parity += s % 2;
            s /= 2 * m;
        }
        *v *= if parity % 2 == 0 { scale } else { -scale };
    }
    fft_axes(&mut data, &shape, &(dim..2 * dim).collect::<Vec<_>>(), false);
    GridSymbol::new(lattice, data)
}

/// Π^A_{ℏ,j} = −iℏ∂_j − A_j as a dense kernel (j zero-based).
pub fn magnetic_momentum(a: &VectorPotential, hbar: f64, j: usize, grid: &PositionGrid) -> Result<KernelOperator> {
    check_setup(a, hbar, grid)?;
    if j >= grid.dim() {
        return Err(Error::Input(format!("momentum axis {j} out of range")));
    }
    let n = grid.len();
    let calc = Calculus::new(grid, hbar);
    let one = vec![ONE; n];
    let mut t = vec![C0; n * n];
    calc.add_product(&mut t, ONE, &one, Some(j), &one, None, &one);
    if !a.is_zero() {
        for (i, x) in grid.points().iter().enumerate() {
            t[i * n + i] -= a.component(j, x);
        }
    }
    KernelOperator::from_matrix(*grid, t)
}

/// Q_k, multiplication by the k-th coordinate.
pub fn position(k: usize, grid: &PositionGrid) -> Result<KernelOperator> {
    if k >= grid.dim() {
        return Err(Error::Input(format!("position axis {k} out of range")));
    }
    KernelOperator::multiplication(*grid, |x| Complex64::new(x[k], 0.0))
}

/// 𝔉_Ξ f, normalized so that f(Y) = (2π)^{−N} ∫ dX 𝔉_Ξ f(X) e^{−iσ(X,Y)}.
pub fn symplectic_fourier(f: &Symbol) -> Result<Symbol> {
    f.symplectic_fourier()
}

/// Sample a closed symbol on the quantization lattice of `grid` at ℏ.
pub fn sample_symbol(f: &ClosedSymbol, grid: &PositionGrid, hbar: f64) -> GridSymbol {
    GridSymbol::sample(PhaseLattice::for_grid(grid, hbar), f)
}

/// Lowest `count` eigenvalues of a self-adjoint kernel operator: dense
/// diagonalization for small grids, Lanczos otherwise.
pub fn lowest_eigenvalues(s: &KernelOperator, count: usize) -> Result<Vec<f64>> {
    let n = s.size();
    if n <= 1024 {
        let ev = linalg::hermitian_eigenvalues(&s.matrix(), n);
        return Ok(ev.into_iter().take(count).collect());
    }
    let steps = (40 * count).clamp(200, n);
    let r = linalg::lanczos(s, steps, false, linalg::START_SEED);
    Ok(r.values.into_iter().take(count).collect())
}

/// Fraction of the half-width that counts as the interior for [`bulk_levels`].
pub const BULK_FRACTION: f64 = 0.6;

/// The lowest `count` distinct eigenvalues of a self-adjoint operator on `grid`
/// whose eigenvectors live in the interior of the box.
///
/// Lanczos starts from a Gaussian centered at the origin with seeded random
/// phases. A Ritz pair is kept when its residual is below `rel_residual`
/// times max(1, |λ|), which bounds the distance to a true eigenvalue, and at
/// least 95% of its mass lies within [`BULK_FRACTION`] of the half-width;
/// states hugging the edge of a truncated box are dropped. Kept values whose
/// residual intervals overlap are merged.
pub fn bulk_levels<T: LinearOperator + ?Sized>(
    op: &T,
    grid: &PositionGrid,
    count: usize,
    steps: usize,
    rel_residual: f64,
) -> Result<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    let n = grid.len();
    if op.len() != n {
        return Err(Error::Input(format!("operator size {} does not match grid size {n}", op.len())));
    }
    let l = grid.half_width();
    let sigma = l / 8.0;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(linalg::START_SEED);
    let mut start: Vec<Complex64> = (0..n)
        .map(|i| {
            let r2: f64 = grid.point(i).iter().map(|t| t * t).sum();
            let c = Complex64::new(1.0 + rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            c * (-r2 / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s = start.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    start.iter_mut().for_each(|c| *c /= s);
    let inside: Vec<bool> =
        (0..n).map(|i| grid.point(i).iter().all(|t| t.abs() <= BULK_FRACTION * l)).collect();
    let r = linalg::lanczos_from(op, steps, true, start);
    let mut kept: Vec<(f64, f64)> = Vec::new();
    for ((val, vec), res) in r.values.iter().zip(&r.vectors).zip(&r.residuals) {
        if *res > rel_residual * val.abs().max(1.0) {
            continue;
        }
        let total: f64 = vec.iter().map(|c| c.norm_sqr()).sum();
        let interior: f64 = vec.iter().zip(&inside).filter(|(_, &b)| b).map(|(c, _)| c.norm_sqr()).sum();
        if interior < 0.95 * total {
            continue;
        }
        match kept.last() {
            Some(&(last, lres)) if (val - last).abs() <= lres + res + 1e-3 * val.abs().max(1.0) => {}
            _ => kept.push((*val, *res)),
        }
        if kept.len() == count {
            return Ok(kept.into_iter().map(|k| k.0).collect());
        }
    }
    Err(Error::Numerical {
        msg: format!("found {} of {count} bulk levels", kept.len()),
        iterations: r.values.len(),
        residual: r.residuals.iter().copied().fold(0.0, f64::max),
    })
}

//! Phase-space symbols.
//!
//! A closed-form symbol is a finite sum of terms
//!
//! ```text
//! c · Π_a x_a^{α_a} e^{−(x_a−p_a)²/(2w_a²)} e^{i k_a x_a} · Π_a ξ_a^{β_a} e^{−(ξ_a−q_a)²/(2v_a²)} e^{i κ_a ξ_a}
//! ```
//!
//! where any width may be infinite (no Gaussian on that axis). The family is
//! closed under products, conjugation and differentiation, and its partial
//! Fourier transform in ξ is available in closed form whenever every ξ-width
//! is finite.

use crate::error::{dim_check, Error, Result};
use crate::geometry::{bracket_from_partials, MagneticField, PhaseFunction, PhaseSpacePoint};
use crate::hilbert::PositionGrid;
use num_complex::Complex64;
use std::f64::consts::PI;

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// One-variable factor t^pow · e^{−(t−center)²/(2 width²)} · e^{i k t}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Factor {
    pub pow: u32,
    pub center: f64,
    pub width: f64,
    pub k: f64,
}

impl Factor {
    pub const ONE: Factor = Factor { pow: 0, center: 0.0, width: f64::INFINITY, k: 0.0 };

    pub fn gaussian(center: f64, width: f64) -> Self {
        Self { pow: 0, center, width, k: 0.0 }
    }

    pub fn has_gaussian(&self) -> bool {
        self.width.is_finite()
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        let mut v = t.powi(self.pow as i32);
        if self.has_gaussian() {
            let d = (t - self.center) / self.width;
            v *= (-0.5 * d * d).exp();
        }
        if self.k != 0.0 {
            Complex64::from_polar(v, self.k * t)
        } else {
            Complex64::new(v, 0.0)
        }
    }

    fn precision(&self) -> f64 {
        if self.has_gaussian() {
            1.0 / (self.width * self.width)
        } else {
            0.0
        }
    }

    /// Product of two factors as (constant, factor).
    pub fn mul(&self, o: &Factor) -> (f64, Factor) {
        let (p1, p2) = (self.precision(), o.precision());
        let p = p1 + p2;
        let (center, width, c) = if p == 0.0 {
            (0.0, f64::INFINITY, 1.0)
        } else if p1 == 0.0 {
            (o.center, o.width, 1.0)
        } else if p2 == 0.0 {
            (self.center, self.width, 1.0)
        } else {
            let center = (self.center * p1 + o.center * p2) / p;
            let d = self.center - o.center;
            let s = self.width * self.width + o.width * o.width;
            (center, 1.0 / p.sqrt(), (-0.5 * d * d / s).exp())
        };
        (c, Factor { pow: self.pow + o.pow, center, width, k: self.k + o.k })
    }

    /// d/dt as a list of (coefficient, factor).
    pub fn derivative(&self) -> Vec<(Complex64, Factor)> {
        let mut out = Vec::new();
        if self.pow > 0 {
            out.push((Complex64::new(self.pow as f64, 0.0), Factor { pow: self.pow - 1, ..*self }));
        }
        let p = self.precision();
        if p != 0.0 {
            out.push((Complex64::new(-p, 0.0), Factor { pow: self.pow + 1, ..*self }));
        }
        let c = Complex64::new(self.center * p, self.k);
        if c != C0 {
            out.push((c, *self));
        }
        out
    }

    pub fn conj(&self) -> Factor {
        Factor { k: -self.k, ..*self }
    }

    /// ∫ dη f(η) e^{i t η}; requires a finite width.
    pub fn fourier(&self, t: f64) -> Complex64 {
        debug_assert!(self.has_gaussian());
        let w = self.width;
        let u = t + self.k;
        let ints = gauss_moments(w, u, self.pow as usize);
        let c = self.center;
        let mut s = C0;
        let mut cp = 1.0;
        // Σ_j C(p,j) c^{p−j} I_j(u); iterate j downward so c^{p−j} builds up.
        let p = self.pow as usize;
        let mut binom = 1.0;
        for j in (0..=p).rev() {
            s += ints[j] * (binom * cp);
            cp *= c;
            binom = binom * j as f64 / (p - j + 1) as f64;
        }
        s * Complex64::from_polar(1.0, u * c)
    }

    /// The same transform as polynomial-in-u coefficients times √(2π)w e^{−w²u²/2}.
    fn fourier_poly(&self) -> Vec<Complex64> {
        let w = self.width;
        let p = self.pow as usize;
        // P_0 = 1, P_{j+1}(u) = w²(j P_{j−1} + i u P_j), I_j = √(2π) w P_j e^{−w²u²/2}.
        let mut polys: Vec<Vec<Complex64>> = vec![vec![Complex64::new(1.0, 0.0)]];
        for j in 0..p {
            let mut next = vec![C0; j + 2];
            for (d, c) in polys[j].iter().enumerate() {
                next[d + 1] += I * c * (w * w);
            }
            if j > 0 {
                for (d, c) in polys[j - 1].iter().enumerate() {
                    next[d] += c * (j as f64 * w * w);
                }
            }
            polys.push(next);
        }
        let mut out = vec![C0; p + 1];
        let c = self.center;
        let mut binom = 1.0;
        let mut cp = 1.0;
        for j in (0..=p).rev() {
            for (d, v) in polys[j].iter().enumerate() {
                out[d] += v * (binom * cp);
            }
            cp *= c;
            binom = binom * j as f64 / (p - j + 1) as f64;
        }
        out
    }
}

/// I_j(u) = ∫ s^j e^{−s²/(2w²)} e^{ius} ds for j = 0..=p.
fn gauss_moments(w: f64, u: f64, p: usize) -> Vec<Complex64> {
    let mut v = Vec::with_capacity(p + 1);
    v.push(Complex64::new((2.0 * PI).sqrt() * w * (-0.5 * w * w * u * u).exp(), 0.0));
    for j in 0..p {
        let prev = if j > 0 { v[j - 1] } else { C0 };
        let next = (prev * j as f64 + I * u * v[j]) * (w * w);
        v.push(next);
    }
    v
}

/// Expand Σ_d a_d (s·t + k)^d in powers of t.
fn substitute(a: &[Complex64], s: f64, k: f64) -> Vec<Complex64> {
    let mut out = vec![C0; a.len()];
    for (d, c) in a.iter().enumerate() {
        let mut binom = 1.0;
        for e in 0..=d {
            out[e] += c * binom * s.powi(e as i32) * k.powi((d - e) as i32);
            binom = binom * (d - e) as f64 / (e + 1) as f64;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussTerm {
    pub coeff: Complex64,
    pub x: Vec<Factor>,
    pub xi: Vec<Factor>,
}

impl GaussTerm {
    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn eval(&self, p: &PhaseSpacePoint) -> Complex64 {
        let mut v = self.coeff;
        for (f, t) in self.x.iter().zip(&p.x) {
            v *= f.eval(*t);
        }
        for (f, t) in self.xi.iter().zip(&p.xi) {
            v *= f.eval(*t);
        }
        v
    }

    pub fn eval_x(&self, x: &[f64]) -> Complex64 {
        self.x.iter().zip(x).fold(self.coeff, |acc, (f, t)| acc * f.eval(*t))
    }

    pub fn mul(&self, o: &GaussTerm) -> GaussTerm {
        let mut coeff = self.coeff * o.coeff;
        let mut x = Vec::with_capacity(self.dim());
        let mut xi = Vec::with_capacity(self.dim());
        for (a, b) in self.x.iter().zip(&o.x) {
            let (c, f) = a.mul(b);
            coeff *= c;
            x.push(f);
        }
        for (a, b) in self.xi.iter().zip(&o.xi) {
            let (c, f) = a.mul(b);
            coeff *= c;
            xi.push(f);
        }
        GaussTerm { coeff, x, xi }
    }

    /// True when every ξ-factor carries a Gaussian, so that the kernel formula applies.
    pub fn xi_integrable(&self) -> bool {
        self.xi.iter().all(|f| f.has_gaussian())
    }

    /// True for a(x)·ξ^β with no ξ Gaussian and no ξ phase.
    pub fn xi_polynomial(&self) -> bool {
        self.xi.iter().all(|f| !f.has_gaussian() && f.k == 0.0)
    }

    pub fn xi_degree(&self) -> u32 {
        self.xi.iter().map(|f| f.pow).sum()
    }

    /// Φ(m, t) = ∫ dη e^{i t·η} term(m, η).
    pub fn phi(&self, m: &[f64], t: &[f64]) -> Complex64 {
        let mut v = self.eval_x(m);
        for (f, s) in self.xi.iter().zip(t) {
            v *= f.fourier(*s);
        }
        v
    }

    fn derivative(&self, axis: usize, momentum: bool) -> Vec<GaussTerm> {
        let f = if momentum { self.xi[axis] } else { self.x[axis] };
        f.derivative()
            .into_iter()
            .map(|(c, nf)| {
                let mut t = self.clone();
                t.coeff *= c;
                if momentum {
                    t.xi[axis] = nf;
                } else {
                    t.x[axis] = nf;
                }
                t
            })
            .collect()
    }
}

/// A symbol given as a finite sum of Gaussian-family terms.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedSymbol {
    dim: usize,
    pub terms: Vec<GaussTerm>,
}

impl ClosedSymbol {
    pub fn from_terms(dim: usize, terms: Vec<GaussTerm>) -> Result<Self> {
        for t in &terms {
            dim_check("symbol term x", t.x.len(), dim)?;
            dim_check("symbol term xi", t.xi.len(), dim)?;
        }
        Ok(Self { dim, terms })
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: vec![] }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self {
            dim,
            terms: vec![GaussTerm { coeff: Complex64::new(c, 0.0), x: vec![Factor::ONE; dim], xi: vec![Factor::ONE; dim] }],
        }
    }

    /// amplitude · exp(−Σ (x_a−z_a)²/(2 sx_a²) − Σ (ξ_a−ζ_a)²/(2 sξ_a²)).
    pub fn gaussian(center: &PhaseSpacePoint, sx: &[f64], sxi: &[f64], amplitude: f64) -> Result<Self> {
        let n = center.dim();
        dim_check("gaussian widths x", sx.len(), n)?;
        dim_check("gaussian widths xi", sxi.len(), n)?;
        if sx.iter().chain(sxi).any(|w| !(*w > 0.0)) {
            return Err(Error::Input("gaussian widths must be positive".into()));
        }
        Ok(Self {
            dim: n,
            terms: vec![GaussTerm {
                coeff: Complex64::new(amplitude, 0.0),
                x: (0..n).map(|a| Factor::gaussian(center.x[a], sx[a])).collect(),
                xi: (0..n).map(|a| Factor::gaussian(center.xi[a], sxi[a])).collect(),
            }],
        })
    }

    /// Isotropic phase-space Gaussian e^{−|X−Z|²/(2s²)}.
    pub fn isotropic_gaussian(center: &PhaseSpacePoint, s: f64) -> Result<Self> {
        let n = center.dim();
        Self::gaussian(center, &vec![s; n], &vec![s; n], 1.0)
    }

    /// x^α ξ^β with no decay.
    pub fn monomial(alpha: &[u32], beta: &[u32]) -> Result<Self> {
        dim_check("monomial", alpha.len(), beta.len())?;
        let f = |p: u32| Factor { pow: p, ..Factor::ONE };
        Ok(Self {
            dim: alpha.len(),
            terms: vec![GaussTerm {
                coeff: Complex64::new(1.0, 0.0),
                x: alpha.iter().map(|&p| f(p)).collect(),
                xi: beta.iter().map(|&p| f(p)).collect(),
            }],
        })
    }

    /// The character 𝔢_X(Z) = e^{−iσ(X,Z)} multiplied by the mollifier e^{−|Z|²/(2w²)}.
    pub fn mollified_character(x: &PhaseSpacePoint, w: f64) -> Result<Self> {
        let n = x.dim();
        // −σ(X,Z) = −(z·ξ_X − x_X·ζ): phase −ξ_X on z, +x_X on ζ.
        Ok(Self {
            dim: n,
            terms: vec![GaussTerm {
                coeff: Complex64::new(1.0, 0.0),
                x: (0..n).map(|a| Factor { k: -x.xi[a], ..Factor::gaussian(0.0, w) }).collect(),
                xi: (0..n).map(|a| Factor { k: x.x[a], ..Factor::gaussian(0.0, w) }).collect(),
            }],
        })
    }

    /// The constant 1 mollified in position by e^{−|x|²/(2w²)}; constant in ξ,
    /// so it quantizes to a multiplication operator.
    pub fn mollified_one(dim: usize, w: f64) -> Result<Self> {
        if !(w > 0.0) {
            return Err(Error::Input("mollifier width must be positive".into()));
        }
        Ok(Self {
            dim,
            terms: vec![GaussTerm {
                coeff: Complex64::new(1.0, 0.0),
                x: vec![Factor::gaussian(0.0, w); dim],
                xi: vec![Factor::ONE; dim],
            }],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, p: &PhaseSpacePoint) -> Complex64 {
        self.terms.iter().map(|t| t.eval(p)).sum()
    }

    pub fn phi(&self, m: &[f64], t: &[f64]) -> Complex64 {
        self.terms.iter().map(|tm| tm.phi(m, t)).sum()
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(o.terms.iter().cloned());
        Self { dim: self.dim, terms }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            dim: self.dim,
            terms: self.terms.iter().map(|t| GaussTerm { coeff: t.coeff * c, ..t.clone() }).collect(),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Pointwise product.
    pub fn mul(&self, o: &Self) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * o.terms.len());
        for a in &self.terms {
            for b in &o.terms {
                terms.push(a.mul(b));
            }
        }
        Self { dim: self.dim, terms }
    }

    pub fn conj(&self) -> Self {
        Self {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|t| GaussTerm {
                    coeff: t.coeff.conj(),
                    x: t.x.iter().map(|f| f.conj()).collect(),
                    xi: t.xi.iter().map(|f| f.conj()).collect(),
                })
                .collect(),
        }
    }

    pub fn d_x(&self, axis: usize) -> Self {
        Self { dim: self.dim, terms: self.terms.iter().flat_map(|t| t.derivative(axis, false)).collect() }
    }

    pub fn d_xi(&self, axis: usize) -> Self {
        Self { dim: self.dim, terms: self.terms.iter().flat_map(|t| t.derivative(axis, true)).collect() }
    }

    pub fn is_xi_integrable(&self) -> bool {
        self.terms.iter().all(|t| t.xi_integrable())
    }

    /// {f, g}^B as a closed-form symbol; needs a polynomial field.
    pub fn bracket(&self, o: &Self, b: &MagneticField) -> Result<Self> {
        dim_check("bracket", o.dim, self.dim)?;
        dim_check("bracket field", b.dim(), self.dim)?;
        let n = self.dim;
        let mut out = ClosedSymbol::zero(n);
        for j in 0..n {
            out = out.add(&self.d_xi(j).mul(&o.d_x(j)));
            out = out.sub(&o.d_xi(j).mul(&self.d_x(j)));
        }
        if !b.is_zero() {
            let bsym = field_symbol(b)?;
            for j in 0..n {
                for k in j + 1..n {
                    let w = self.d_xi(j).mul(&o.d_xi(k)).sub(&self.d_xi(k).mul(&o.d_xi(j)));
                    out = out.add(&w.mul(&bsym[j][k]));
                }
            }
        }
        Ok(out.pruned())
    }

    /// Drop terms with vanishing coefficient.
    pub fn pruned(mut self) -> Self {
        self.terms.retain(|t| t.coeff != C0);
        self
    }

    /// 𝔉_Ξ f(X) = (2π)^{−N} ∫ dY e^{iσ(X,Y)} f(Y), so that
    /// f(Y) = (2π)^{−N} ∫ dX 𝔉_Ξ f(X) e^{−iσ(X,Y)}.
    pub fn symplectic_fourier(&self) -> Result<Self> {
        let n = self.dim;
        let mut out = Vec::new();
        for t in &self.terms {
            if !(t.x.iter().all(|f| f.has_gaussian()) && t.xi.iter().all(|f| f.has_gaussian())) {
                return Err(Error::Unsupported(
                    "symplectic Fourier transform of a term without Gaussian decay on every axis".into(),
                ));
            }
            // New ξ-axis a comes from the old y-axis a at frequency +ξ;
            // new x-axis a from the old η-axis a at frequency −x.
            let mut per_axis: Vec<Vec<(Complex64, Factor)>> = Vec::with_capacity(2 * n);
            for a in 0..n {
                per_axis.push(transformed_factor(&t.xi[a], -1.0));
            }
            for a in 0..n {
                per_axis.push(transformed_factor(&t.x[a], 1.0));
            }
            let scale = t.coeff / (2.0 * PI).powi(n as i32);
            let mut acc: Vec<(Complex64, Vec<Factor>)> = vec![(scale, vec![])];
            for choices in &per_axis {
                let mut next = Vec::with_capacity(acc.len() * choices.len());
                for (c, fs) in &acc {
                    for (d, f) in choices {
                        let mut v = fs.clone();
                        v.push(*f);
                        next.push((c * d, v));
                    }
                }
                acc = next;
            }
            for (c, fs) in acc {
                if c != C0 {
                    out.push(GaussTerm { coeff: c, x: fs[..n].to_vec(), xi: fs[n..].to_vec() });
                }
            }
        }
        Ok(Self { dim: n, terms: out })
    }
}

/// ∫ dt F(t) e^{i s τ t} as a sum of factors in τ.
fn transformed_factor(f: &Factor, s: f64) -> Vec<(Complex64, Factor)> {
    // With u = sτ + k: e^{iuc} · √(2π) w · P(u) · e^{−w²u²/2}.
    let poly = f.fourier_poly();
    let coeffs = substitute(&poly, s, f.k);
    let w = f.width;
    let center = -f.k / s;
    let pref = (2.0 * PI).sqrt() * w * Complex64::from_polar(1.0, f.k * f.center);
    coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != C0)
        .map(|(d, c)| {
            (pref * c, Factor { pow: d as u32, center, width: 1.0 / w, k: s * f.center })
        })
        .collect()
}

/// B_jk(x) as closed-form symbols (j<k entries filled).
fn field_symbol(b: &MagneticField) -> Result<Vec<Vec<ClosedSymbol>>> {
    let n = b.dim();
    if b.poly_degree().is_none() {
        return Err(Error::Unsupported(format!(
            "closed-form bracket needs a polynomial field, got `{}`",
            b.family().tag()
        )));
    }
    let zero = vec![0.0; n];
    let mut out = vec![vec![ClosedSymbol::zero(n); n]; n];
    for j in 0..n {
        for k in j + 1..n {
            let c0 = b.component(j, k, &zero);
            let mut s = ClosedSymbol::constant(n, c0);
            if b.poly_degree() == Some(1) {
                for a in 0..n {
                    let mut e = zero.clone();
                    e[a] = 1.0;
                    let slope = b.component(j, k, &e) - c0;
                    if slope != 0.0 {
                        let mut alpha = vec![0; n];
                        alpha[a] = 1;
                        let m = ClosedSymbol::monomial(&alpha, &vec![0; n])?;
                        s = s.add(&m.scale(Complex64::new(slope, 0.0)));
                    }
                }
            }
            out[j][k] = s.pruned();
        }
    }
    Ok(out)
}

/// Uniform lattice in phase space: on every axis the x-samples are
/// x0 + i·dx (i < nx) and the ξ-samples ξ0 + r·dξ (r < nξ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseLattice {
    pub dim: usize,
    pub x0: f64,
    pub dx: f64,
    pub nx: usize,
    pub xi0: f64,
    pub dxi: f64,
    pub nxi: usize,
}

impl PhaseLattice {
    /// The lattice produced by `dequantize` on `grid` at Planck constant ℏ:
    /// x on the grid, Δξ = πℏ/(2L) with 2M samples covering [−πℏ/h, πℏ/h).
    pub fn for_grid(grid: &PositionGrid, hbar: f64) -> Self {
        let m = grid.points_per_axis();
        let dxi = PI * hbar / (2.0 * grid.half_width());
        Self {
            dim: grid.dim(),
            x0: -grid.half_width(),
            dx: grid.spacing(),
            nx: m,
            xi0: -(m as f64) * dxi,
            dxi,
            nxi: 2 * m,
        }
    }

    pub fn len(&self) -> usize {
        (self.nx * self.nxi).pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x_len(&self) -> usize {
        self.nx.pow(self.dim as u32)
    }

    pub fn xi_len(&self) -> usize {
        self.nxi.pow(self.dim as u32)
    }

    /// Flat index of (x multi-index, ξ multi-index); x blocks are outermost.
    pub fn index(&self, ix: &[usize], ir: &[usize]) -> usize {
        let xf = ix.iter().fold(0, |a, &i| a * self.nx + i);
        let rf = ir.iter().fold(0, |a, &i| a * self.nxi + i);
        xf * self.xi_len() + rf
    }

    pub fn point(&self, idx: usize) -> PhaseSpacePoint {
        let (xf, rf) = (idx / self.xi_len(), idx % self.xi_len());
        let mut x = vec![0.0; self.dim];
        let mut xi = vec![0.0; self.dim];
        let (mut a, mut b) = (xf, rf);
        for d in (0..self.dim).rev() {
            x[d] = self.x0 + (a % self.nx) as f64 * self.dx;
            xi[d] = self.xi0 + (b % self.nxi) as f64 * self.dxi;
            a /= self.nx;
            b /= self.nxi;
        }
        PhaseSpacePoint { x, xi }
    }

    /// Lattice index of X if it lies on the lattice.
    pub fn locate(&self, p: &PhaseSpacePoint) -> Result<usize> {
        dim_check("lattice point", p.dim(), self.dim)?;
        let find = |t: f64, t0: f64, dt: f64, n: usize| -> Result<usize> {
            let r = (t - t0) / dt;
            let i = r.round();
            if (r - i).abs() > 1e-6 || i < 0.0 || i >= n as f64 {
                return Err(Error::Domain(format!("{t} is not a sample of the symbol lattice")));
            }
            Ok(i as usize)
        };
        let ix: Vec<usize> = p.x.iter().map(|&t| find(t, self.x0, self.dx, self.nx)).collect::<Result<_>>()?;
        let ir: Vec<usize> = p.xi.iter().map(|&t| find(t, self.xi0, self.dxi, self.nxi)).collect::<Result<_>>()?;
        Ok(self.index(&ix, &ir))
    }

    pub fn cell(&self) -> f64 {
        (self.dx * self.dxi).powi(self.dim as i32)
    }
}

/// Samples of a symbol on a phase-space lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSymbol {
    pub lattice: PhaseLattice,
    pub values: Vec<Complex64>,
}

impl GridSymbol {
    pub fn new(lattice: PhaseLattice, values: Vec<Complex64>) -> Result<Self> {
        dim_check("grid symbol values", values.len(), lattice.len())?;
        Ok(Self { lattice, values })
    }

    pub fn sample(lattice: PhaseLattice, f: &ClosedSymbol) -> Self {
        let values = (0..lattice.len()).map(|i| f.eval(&lattice.point(i))).collect();
        Self { lattice, values }
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim
    }

    pub fn eval(&self, p: &PhaseSpacePoint) -> Result<Complex64> {
        Ok(self.values[self.lattice.locate(p)?])
    }

    pub fn conj(&self) -> Self {
        Self { lattice: self.lattice, values: self.values.iter().map(|v| v.conj()).collect() }
    }

    pub fn axpy(&self, c: Complex64, o: &Self) -> Result<Self> {
        if self.lattice != o.lattice {
            return Err(Error::Input("grid symbols on different lattices".into()));
        }
        Ok(Self {
            lattice: self.lattice,
            values: self.values.iter().zip(&o.values).map(|(a, b)| a + c * b).collect(),
        })
    }

    /// Discrete L² norm Σ |f|² (ΔxΔξ)^N, square-rooted.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.lattice.cell()).sqrt()
    }

    /// Relative L² distance to another lattice symbol, restricted to `mask`.
    pub fn rel_l2_error(&self, reference: &Self) -> Result<f64> {
        let d = self.axpy(Complex64::new(-1.0, 0.0), reference)?;
        Ok(d.l2_norm() / reference.l2_norm())
    }

    /// Symplectic Fourier transform on the lattice by FFT.
    pub fn symplectic_fourier(&self) -> Result<Self> {
        let l = self.lattice;
        let n = l.dim;
        // New ξ from old x (frequency +ξ), new x from old ξ (frequency −x).
        let nxi_new = l.nx;
        let dxi_new = 2.0 * PI / (l.nx as f64 * l.dx);
        let nx_new = l.nxi;
        let dx_new = 2.0 * PI / (l.nxi as f64 * l.dxi);
        let out_l = PhaseLattice {
            dim: n,
            x0: -(nx_new as f64 / 2.0) * dx_new,
            dx: dx_new,
            nx: nx_new,
            xi0: -(nxi_new as f64 / 2.0) * dxi_new,
            dxi: dxi_new,
            nxi: nxi_new,
        };
        if l.nx % 2 != 0 || l.nxi % 2 != 0 {
            return Err(Error::Config("lattice sizes must be even".into()));
        }
        // Edge check: the transform assumes decay at the lattice boundary.
        let maxv = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut edge: f64 = 0.0;
        for i in 0..l.len() {
            let p = l.point(i);
            let on_edge = p.x.iter().any(|&t| (t - l.x0).abs() < 1e-9 * l.dx.abs().max(1.0))
                || p.xi.iter().any(|&t| (t - l.xi0).abs() < 1e-9 * l.dxi.abs().max(1.0));
            if on_edge {
                edge = edge.max(self.values[i].norm());
            }
        }
        if edge > 1e-6 * maxv {
            return Err(Error::Resolution {
                msg: "symbol does not decay at the lattice boundary".into(),
                min_points: 2 * l.nx.max(l.nxi),
            });
        }
        let mut shape = Vec::new();
        for _ in 0..n {
            shape.push(l.nx);
        }
        for _ in 0..n {
            shape.push(l.nxi);
        }
        let mut data = self.values.clone();
        // Pre-twist: sample index j gets e^{iω0 t_j}·(sign); ω0 is the first output frequency.
        // Old x-axis → frequency +ξ_new; old ξ-axis → frequency −x_new.
        let total = data.len();
        for (idx, v) in data.iter_mut().enumerate() {
            let p = l.point(idx);
            let mut ph = 0.0;
            for a in 0..n {
                ph += out_l.xi0 * (p.x[a] - l.x0);
                ph += -(out_l.x0) * (p.xi[a] - l.xi0);
            }
            *v *= Complex64::from_polar(1.0, ph);
        }
        // Axis order in `data`: x axes then ξ axes. Old x uses e^{+}, old ξ uses e^{−}.
        fft_axes(&mut data, &shape, &(0..n).collect::<Vec<_>>(), true);
        fft_axes(&mut data, &shape, &(n..2 * n).collect::<Vec<_>>(), false);
        let scale = l.cell() / (2.0 * PI).powi(n as i32);
        // Output index: old-x axis a → new ξ axis a; old-ξ axis a → new x axis a.
        let mut out = vec![C0; total];
        let mut ix = vec![0usize; n];
        let mut ir = vec![0usize; n];
        for (idx, v) in data.iter().enumerate() {
            let (xf, rf) = (idx / l.xi_len(), idx % l.xi_len());
            let (mut a, mut b) = (xf, rf);
            for d in (0..n).rev() {
                ir[d] = a % l.nx;
                ix[d] = b % l.nxi;
                a /= l.nx;
                b /= l.nxi;
            }
            let o = out_l.index(&ix, &ir);
            let q = out_l.point(o);
            let mut ph = 0.0;
            for d in 0..n {
                ph += q.xi[d] * l.x0 - q.x[d] * l.xi0;
            }
            out[o] = v * scale * Complex64::from_polar(1.0, ph);
        }
        Ok(GridSymbol { lattice: out_l, values: out })
    }
}

/// Unnormalized 1-D FFTs along the listed axes of a row-major array.
pub(crate) fn fft_axes(data: &mut [Complex64], shape: &[usize], axes: &[usize], inverse: bool) {
    use rustfft::FftPlanner;
    let mut planner = FftPlanner::new();
    for &axis in axes {
        let m = shape[axis];
        let plan = if inverse { planner.plan_fft_inverse(m) } else { planner.plan_fft_forward(m) };
        let stride: usize = shape[axis + 1..].iter().product();
        let total = data.len();
        let outer = total / (stride * m);
        let mut line = vec![C0; m];
        for o in 0..outer {
            for s in 0..stride {
                let base = o * stride * m + s;
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

#[derive(Debug, Clone, PartialEq)]
pub enum Symbol {
    Closed(ClosedSymbol),
    Grid(GridSymbol),
}

impl Symbol {
    pub fn dim(&self) -> usize {
        match self {
            Symbol::Closed(c) => c.dim(),
            Symbol::Grid(g) => g.dim(),
        }
    }

    pub fn eval(&self, p: &PhaseSpacePoint) -> Result<Complex64> {
        match self {
            Symbol::Closed(c) => {
                dim_check("symbol point", p.dim(), c.dim())?;
                Ok(c.eval(p))
            }
            Symbol::Grid(g) => g.eval(p),
        }
    }

    pub fn conj(&self) -> Self {
        match self {
            Symbol::Closed(c) => Symbol::Closed(c.conj()),
            Symbol::Grid(g) => Symbol::Grid(g.conj()),
        }
    }

    pub fn closed(&self) -> Option<&ClosedSymbol> {
        match self {
            Symbol::Closed(c) => Some(c),
            Symbol::Grid(_) => None,
        }
    }

    pub fn symplectic_fourier(&self) -> Result<Self> {
        match self {
            Symbol::Closed(c) => Ok(Symbol::Closed(c.symplectic_fourier()?)),
            Symbol::Grid(g) => Ok(Symbol::Grid(g.symplectic_fourier()?)),
        }
    }
}

impl From<ClosedSymbol> for Symbol {
    fn from(c: ClosedSymbol) -> Self {
        Symbol::Closed(c)
    }
}

impl From<GridSymbol> for Symbol {
    fn from(g: GridSymbol) -> Self {
        Symbol::Grid(g)
    }
}

impl PhaseFunction for ClosedSymbol {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &PhaseSpacePoint) -> Result<Complex64> {
        Ok(self.eval(x))
    }

    fn partials(&self, x: &PhaseSpacePoint) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let n = self.dim;
        Ok((
            (0..n).map(|j| self.d_x(j).eval(x)).collect(),
            (0..n).map(|j| self.d_xi(j).eval(x)).collect(),
        ))
    }
}

impl PhaseFunction for GridSymbol {
    fn dim(&self) -> usize {
        self.lattice.dim
    }

    fn value(&self, x: &PhaseSpacePoint) -> Result<Complex64> {
        self.eval(x)
    }

    /// Central differences with the lattice spacings.
    fn partials(&self, p: &PhaseSpacePoint) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let n = self.lattice.dim;
        let mut dx = Vec::with_capacity(n);
        let mut dxi = Vec::with_capacity(n);
        for j in 0..n {
            let h = self.lattice.dx;
            let mut a = p.clone();
            let mut b = p.clone();
            a.x[j] += h;
            b.x[j] -= h;
            dx.push((self.eval(&a)? - self.eval(&b)?) / (2.0 * h));
        }
        for j in 0..n {
            let h = self.lattice.dxi;
            let mut a = p.clone();
            let mut b = p.clone();
            a.xi[j] += h;
            b.xi[j] -= h;
            dxi.push((self.eval(&a)? - self.eval(&b)?) / (2.0 * h));
        }
        Ok((dx, dxi))
    }
}

impl PhaseFunction for Symbol {
    fn dim(&self) -> usize {
        Symbol::dim(self)
    }

    fn value(&self, x: &PhaseSpacePoint) -> Result<Complex64> {
        self.eval(x)
    }

    fn partials(&self, x: &PhaseSpacePoint) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        match self {
            Symbol::Closed(c) => c.partials(x),
            Symbol::Grid(g) => g.partials(x),
        }
    }
}

/// {f,g}^B evaluated pointwise from analytic partials (closed symbols) and the field.
pub fn bracket_at(b: &MagneticField, f: &ClosedSymbol, g: &ClosedSymbol, x: &PhaseSpacePoint) -> Complex64 {
    let (fx, fxi) = f.partials(x).unwrap();
    let (gx, gxi) = g.partials(x).unwrap();
    bracket_from_partials(b, &x.x, &fx, &fxi, &gx, &gxi)
}

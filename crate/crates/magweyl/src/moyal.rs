//! The magnetic Moyal product: pointwise oscillatory quadrature and the
//! operator route through Op^A_ℏ, plus the semiclassical defect norms.

use crate::error::{dim_check, Error, Result};
use crate::geometry::{flux_auto, MagneticField, PhaseSpacePoint, VectorPotential};
use crate::hilbert::PositionGrid;
use crate::linalg::{operator_norm, Combination, LinearOperator, DEFAULT_MAX_ITER};
use crate::quad::hermite_on;
use crate::quantize::{check_hbar, dequantize, op_a};
use crate::symbol::{bracket_at, ClosedSymbol, Factor, GaussTerm, GridSymbol, PhaseLattice, Symbol};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct StarQuadratureConfig {
    /// Gauss–Hermite nodes per integration axis (2N axes after the momenta
    /// are integrated analytically).
    pub nodes_per_axis: usize,
    /// Multiplier on the matched Gaussian weight width.
    pub taper_width: f64,
    pub sample_points: Vec<PhaseSpacePoint>,
    /// Maximum number of integrand evaluations per sample point.
    pub budget: usize,
    /// Gauss–Legendre order for the flux of non-polynomial fields.
    pub flux_order: usize,
}

impl StarQuadratureConfig {
    pub fn for_dim(dim: usize) -> Self {
        Self {
            nodes_per_axis: if dim == 1 { 12 } else { 8 },
            taper_width: 1.0,
            sample_points: vec![PhaseSpacePoint::zero(dim)],
            budget: 100_000_000,
            flux_order: 8,
        }
    }
}

/// (f ♯^B_ℏ g)(X) = (πℏ)^{−2N} ∫dY dZ e^{−(2i/ℏ)σ(X−Y,X−Z)} e^{−(i/ℏ)Γ^B⟨x−y+z, y−z+x, z−x+y⟩} f(Y) g(Z).
///
/// The momenta enter only through the partial Fourier transforms, which are
/// analytic for Gaussian-family symbols; what remains is a 2N-dimensional
/// integral over (y, z) done by tensor Gauss–Hermite quadrature.
pub fn star_direct(
    f: &Symbol,
    g: &Symbol,
    b: &MagneticField,
    hbar: f64,
    x: &PhaseSpacePoint,
    cfg: &StarQuadratureConfig,
) -> Result<Complex64> {
    check_hbar(hbar)?;
    let (f, g) = match (f, g) {
        (Symbol::Closed(f), Symbol::Closed(g)) => (f, g),
        _ => return Err(Error::Unsupported("star_direct needs closed-form Gaussian-family symbols".into())),
    };
    let n = b.dim();
    dim_check("star f", f.dim(), n)?;
    dim_check("star g", g.dim(), n)?;
    dim_check("star point", x.dim(), n)?;
    if n > 2 {
        return Err(Error::Unsupported("star_direct is limited to N <= 2".into()));
    }
    if !(f.is_xi_integrable() && g.is_xi_integrable()) {
        return Err(Error::Unsupported("star_direct needs a Gaussian in every momentum factor".into()));
    }
    let q = cfg.nodes_per_axis;
    if q == 0 || !(cfg.taper_width > 0.0) {
        return Err(Error::Config("nodes_per_axis and taper_width must be positive".into()));
    }
    let per_point = q.checked_pow(2 * n as u32).and_then(|v| v.checked_mul(f.terms.len() * g.terms.len()));
    match per_point {
        Some(v) if v <= cfg.budget => {}
        _ => {
            return Err(Error::Config(format!(
                "{q}^{} nodes x {} term pairs exceeds the budget {}",
                2 * n,
                f.terms.len() * g.terms.len(),
                cfg.budget
            )))
        }
    }
    let mut total = C0;
    for tf in &f.terms {
        for tg in &g.terms {
            total += term_pair(tf, tg, b, hbar, x, cfg);
        }
    }
    Ok(total / (PI * hbar).powi(2 * n as i32))
}

fn gauss_nodes(w: &Factor, q: usize, taper: f64) -> (Vec<f64>, Vec<f64>) {
    hermite_on(w.center, w.width * taper, q)
}

fn term_pair(tf: &GaussTerm, tg: &GaussTerm, b: &MagneticField, hbar: f64, x: &PhaseSpacePoint, cfg: &StarQuadratureConfig) -> Complex64 {
    let n = x.dim();
    let q = cfg.nodes_per_axis;
    // Separable part per axis on the (y_a, z_a) node grid.
    let mut ys = Vec::with_capacity(n);
    let mut zs = Vec::with_capacity(n);
    let mut sep: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for a in 0..n {
        let (ff, fk) = (tf.xi[a], tf.xi[a].k);
        let (gf, gk) = (tg.xi[a], tg.xi[a].k);
        // Φ_g(z, −2(x−y)/ℏ) is concentrated at y = x − ℏk_g/2 with width ℏ/(2v_g).
        let ywt = Factor::gaussian(tf.x[a].center, tf.x[a].width)
            .mul(&Factor::gaussian(x.x[a] - 0.5 * hbar * gk, 0.5 * hbar / gf.width))
            .1;
        let zwt = Factor::gaussian(tg.x[a].center, tg.x[a].width)
            .mul(&Factor::gaussian(x.x[a] + 0.5 * hbar * fk, 0.5 * hbar / ff.width))
            .1;
        let (yn, yw) = gauss_nodes(&ywt, q, cfg.taper_width);
        let (zn, zw) = gauss_nodes(&zwt, q, cfg.taper_width);
        let mut tab = vec![C0; q * q];
        for i in 0..q {
            let y = yn[i];
            let fy = tf.x[a].eval(y) * gf.fourier(-2.0 * (x.x[a] - y) / hbar);
            for j in 0..q {
                let z = zn[j];
                let gz = tg.x[a].eval(z) * ff.fourier(2.0 * (x.x[a] - z) / hbar);
                let ph = Complex64::from_polar(yw[i] * zw[j], -2.0 * (y - z) * x.xi[a] / hbar);
                tab[i * q + j] = fy * gz * ph;
            }
        }
        ys.push(yn);
        zs.push(zn);
        sep.push(tab);
    }
    let coeff = tf.coeff * tg.coeff;
    let pairs = q * q;
    let count = pairs.pow(n as u32);
    let s: Complex64 = (0..count)
        .into_par_iter()
        .map(|idx| {
            let mut v = Complex64::new(1.0, 0.0);
            let mut r = idx;
            let mut y = [0.0; 2];
            let mut z = [0.0; 2];
            for a in (0..n).rev() {
                let k = r % pairs;
                r /= pairs;
                v *= sep[a][k];
                y[a] = ys[a][k / q];
                z[a] = zs[a][k % q];
            }
            if v == C0 || b.is_zero() {
                return v;
            }
            let mut p1 = [0.0; 2];
            let mut p2 = [0.0; 2];
            let mut p3 = [0.0; 2];
            for a in 0..n {
                p1[a] = x.x[a] - y[a] + z[a];
                p2[a] = y[a] - z[a] + x.x[a];
                p3[a] = z[a] - x.x[a] + y[a];
            }
            let flux = flux_auto(b, &p1[..n], &p2[..n], &p3[..n], cfg.flux_order);
            v * Complex64::from_polar(1.0, -flux / hbar)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    s * coeff
}

/// f ♯ g realized as dequantize(Op(f) Op(g)).
pub fn star_operator(f: &Symbol, g: &Symbol, a: &VectorPotential, hbar: f64, grid: &PositionGrid) -> Result<GridSymbol> {
    let p = op_a(f, a, hbar, grid)?.compose(&op_a(g, a, hbar, grid)?)?;
    dequantize(&p, a, hbar)
}

/// (f ∘ g, [f, g]) = (½(f♯g + g♯f), (f♯g − g♯f)/(iℏ)) through the operator algebra.
pub fn jordan_and_commutator(
    f: &Symbol,
    g: &Symbol,
    a: &VectorPotential,
    hbar: f64,
    grid: &PositionGrid,
) -> Result<(GridSymbol, GridSymbol)> {
    let fo = op_a(f, a, hbar, grid)?;
    let go = op_a(g, a, hbar, grid)?;
    let fg = fo.compose(&go)?;
    let gf = go.compose(&fo)?;
    let jordan = fg.axpy(Complex64::new(1.0, 0.0), &gf)?.scale(Complex64::new(0.5, 0.0));
    let comm = fg.axpy(Complex64::new(-1.0, 0.0), &gf)?.scale(Complex64::new(0.0, -1.0 / hbar));
    Ok((dequantize(&jordan, a, hbar)?, dequantize(&comm, a, hbar)?))
}

/// ‖f‖^B_ℏ = ‖Op^A_ℏ(f)‖.
pub fn magnetic_norm(f: &Symbol, a: &VectorPotential, hbar: f64, grid: &PositionGrid) -> Result<f64> {
    operator_norm(&op_a(f, a, hbar, grid)?, NORM_TOL, DEFAULT_MAX_ITER)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectReport {
    pub hbar: f64,
    /// ‖f ∘ g − fg‖^B_ℏ
    pub von_neumann_defect: f64,
    /// ‖[f, g] − {f, g}^B‖^B_ℏ
    pub dirac_defect: f64,
    /// ‖f‖^B_ℏ
    pub norm_value: f64,
}

/// The classical limit of (f♯g − g♯f)/(iℏ) under Op^A_ℏ, namely
/// Σ_j(∂_{x_j}f ∂_{ξ_j}g − ∂_{ξ_j}f ∂_{x_j}g) + Σ_{jk} B_jk ∂_{ξ_j}f ∂_{ξ_k}g.
///
/// This differs from `poisson_bracket` in the sign of the canonical part: with
/// [Q_j, Π_k] = iℏδ_jk and [Π_j, Π_k] = iℏB_jk the commutator of x_j and ξ_j
/// tends to +1 while the bracket gives {x_j, ξ_j}^B = −1. Written as
/// {f,g}^B − 2{f,g}^0. Closed form for polynomial fields, lattice samples of the
/// analytic partials otherwise.
pub fn commutator_limit(f: &ClosedSymbol, g: &ClosedSymbol, b: &MagneticField, grid: &PositionGrid, hbar: f64) -> Result<Symbol> {
    let flat = MagneticField::zero(b.dim());
    let two = Complex64::new(2.0, 0.0);
    match f.bracket(g, b) {
        Ok(s) => Ok(s.sub(&f.bracket(g, &flat)?.scale(two)).pruned().into()),
        Err(Error::Unsupported(_)) => {
            let lattice = PhaseLattice::for_grid(grid, hbar);
            let values = (0..lattice.len())
                .map(|i| {
                    let p = lattice.point(i);
                    bracket_at(b, f, g, &p) - two * bracket_at(&flat, f, g, &p)
                })
                .collect();
            Ok(GridSymbol::new(lattice, values)?.into())
        }
        Err(e) => Err(e),
    }
}

/// Von Neumann and Dirac defects as operator norms of
/// ½(FG + GF) − Op(fg) and (FG − GF)/(iℏ) − Op(commutator_limit(f, g)).
pub fn semiclassical_defects(
    f: &ClosedSymbol,
    g: &ClosedSymbol,
    a: &VectorPotential,
    hbar: f64,
    grid: &PositionGrid,
) -> Result<DefectReport> {
    let b = a.field();
    let fo = op_a(&f.clone().into(), a, hbar, grid)?;
    let go = op_a(&g.clone().into(), a, hbar, grid)?;
    let prod = op_a(&f.mul(g).into(), a, hbar, grid)?;
    let br = op_a(&commutator_limit(f, g, b, grid, hbar)?, a, hbar, grid)?;
    let half = Complex64::new(0.5, 0.0);
    let ops: [&dyn LinearOperator; 4] = [&fo, &go, &prod, &br];
    let jordan = Combination {
        terms: vec![(half, vec![ops[0], ops[1]]), (half, vec![ops[1], ops[0]]), (Complex64::new(-1.0, 0.0), vec![ops[2]])],
    };
    let ih = Complex64::new(0.0, -1.0 / hbar);
    let dirac = Combination {
        terms: vec![(ih, vec![ops[0], ops[1]]), (-ih, vec![ops[1], ops[0]]), (Complex64::new(-1.0, 0.0), vec![ops[3]])],
    };
    Ok(DefectReport {
        hbar,
        von_neumann_defect: operator_norm(&jordan, NORM_TOL, DEFAULT_MAX_ITER)?,
        dirac_defect: operator_norm(&dirac, NORM_TOL, DEFAULT_MAX_ITER)?,
        norm_value: operator_norm(&fo, NORM_TOL, DEFAULT_MAX_ITER)?,
    })
}

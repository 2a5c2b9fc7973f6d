//! Magnetic coherent vectors and the states they generate.
//!
//! v^A_ℏ(Z)(x) = e^{(i/ℏ)(x−z/2)·ζ} e^{(i/ℏ)Γ^A[z,x]} v_ℏ(x−z) with
//! v_ℏ(x) = ℏ^{−N/4} v(x/√ℏ).

use crate::error::{dim_check, Error, Result};
use crate::geometry::{circulation_segment, flux_auto, MagneticField, PhaseSpacePoint, VectorPotential};
use crate::hilbert::{fft_nd, inner_product, PositionGrid, WaveFunction};
use crate::quad::{hermite_on, legendre01, legendre_on};
use crate::quantize::{check_hbar, WeylOperator};
use crate::symbol::{ClosedSymbol, Factor, GaussTerm};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Largest grid the local coherent-state computations may build.
pub const LOCAL_POINT_CAP: usize = 1 << 18;

/// Agreement demanded between the two expectation routes.
pub const ROUTE_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FiducialKind {
    /// π^{−N/4} e^{−|x|²/2}
    Gaussian,
    /// √2 x_axis times the Gaussian.
    Hermite { axis: usize },
    /// c · exp(−1/(1 − |x|²/R²)) inside the ball of radius R.
    Bump { radius: f64 },
}

/// A normalized real fiducial vector v.
#[derive(Debug, Clone, PartialEq)]
pub struct FiducialVector {
    dim: usize,
    kind: FiducialKind,
    norm_const: f64,
}

fn unit_ball_surface(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    }
}

impl FiducialVector {
    pub fn gaussian(dim: usize) -> Result<Self> {
        Self::new(dim, FiducialKind::Gaussian)
    }

    pub fn hermite(dim: usize, axis: usize) -> Result<Self> {
        Self::new(dim, FiducialKind::Hermite { axis })
    }

    pub fn bump(dim: usize, radius: f64) -> Result<Self> {
        Self::new(dim, FiducialKind::Bump { radius })
    }

    pub fn new(dim: usize, kind: FiducialKind) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Input(format!("fiducial dimension {dim} outside 1..=3")));
        }
        let norm_const = match kind {
            FiducialKind::Gaussian => PI.powf(-0.25 * dim as f64),
            FiducialKind::Hermite { axis } => {
                if axis >= dim {
                    return Err(Error::Input(format!("Hermite axis {axis} >= dimension {dim}")));
                }
                std::f64::consts::SQRT_2 * PI.powf(-0.25 * dim as f64)
            }
            FiducialKind::Bump { radius } => {
                if !(radius.is_finite() && radius > 0.0) {
                    return Err(Error::Input(format!("bump radius {radius} must be positive")));
                }
                let rule = legendre01(80);
                let mut s = 0.0;
                for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                    let r = t * radius;
                    s += w * radius * r.powi(dim as i32 - 1) * (-2.0 / (1.0 - t * t)).exp();
                }
                1.0 / (unit_ball_surface(dim) * s).sqrt()
            }
        };
        Ok(Self { dim, kind, norm_const })
    }

    /// Parses "gaussian", "hermite" (first axis), "hermite:<axis>" or "bump:<radius>".
    pub fn parse(dim: usize, tag: &str) -> Result<Self> {
        let (head, arg) = match tag.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (tag, None),
        };
        let num = |a: Option<&str>, d: f64| -> Result<f64> {
            a.map(|s| s.trim().parse::<f64>().map_err(|_| Error::Input(format!("bad fiducial argument in {tag:?}"))))
                .unwrap_or(Ok(d))
        };
        match head {
            "gaussian" => Self::gaussian(dim),
            "hermite" => Self::hermite(dim, num(arg, 0.0)? as usize),
            "bump" => Self::bump(dim, num(arg, 1.0)?),
            _ => Err(Error::Input(format!("unknown fiducial vector {tag:?}"))),
        }
    }

    pub fn tag(&self) -> String {
        match self.kind {
            FiducialKind::Gaussian => "gaussian".into(),
            FiducialKind::Hermite { axis } => format!("hermite:{axis}"),
            FiducialKind::Bump { radius } => format!("bump:{radius}"),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> FiducialKind {
        self.kind
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|t| t * t).sum();
        match self.kind {
            FiducialKind::Gaussian => self.norm_const * (-0.5 * r2).exp(),
            FiducialKind::Hermite { axis } => self.norm_const * x[axis] * (-0.5 * r2).exp(),
            FiducialKind::Bump { radius } => {
                let s = r2 / (radius * radius);
                if s >= 1.0 {
                    0.0
                } else {
                    self.norm_const * (-1.0 / (1.0 - s)).exp()
                }
            }
        }
    }

    /// v_ℏ(x) = ℏ^{−N/4} v(x/√ℏ).
    pub fn scaled(&self, hbar: f64, x: &[f64]) -> f64 {
        let s = hbar.sqrt();
        let y: Vec<f64> = x.iter().map(|t| t / s).collect();
        hbar.powf(-0.25 * self.dim as f64) * self.eval(&y)
    }

    /// Half-width of a box outside which |v|² is negligible (below about 1e-13).
    pub fn radius(&self) -> f64 {
        match self.kind {
            FiducialKind::Gaussian => 5.5,
            FiducialKind::Hermite { .. } => 6.0,
            FiducialKind::Bump { radius } => radius,
        }
    }

    /// Mass of |v|² outside the box [−r, r]^N.
    pub fn tail_outside_box(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 1.0;
        }
        if let FiducialKind::Bump { radius } = self.kind {
            if r >= radius {
                return 0.0;
            }
        }
        let q = 64;
        let (nodes, weights) = legendre_on(-r, r, q);
        let n = self.dim;
        let mut s = 0.0;
        let mut p = vec![0.0; n];
        for idx in 0..q.pow(n as u32) {
            let mut k = idx;
            let mut w = 1.0;
            for a in 0..n {
                p[a] = nodes[k % q];
                w *= weights[k % q];
                k /= q;
            }
            let v = self.eval(&p);
            s += w * v * v;
        }
        (1.0 - s).max(0.0)
    }

    /// Cumulative distribution of the `axis` marginal of |v|², tabulated on
    /// [−radius, radius].
    fn marginal_cdf(&self, axis: usize) -> MarginalCdf {
        let rho = self.radius();
        let pts = 4001;
        let dt = 2.0 * rho / (pts - 1) as f64;
        let q = 64;
        let (nodes, weights) = legendre_on(-rho, rho, q);
        let others = self.dim - 1;
        let mut p = vec![0.0; self.dim];
        let density: Vec<f64> = (0..pts)
            .map(|i| {
                p[axis] = -rho + i as f64 * dt;
                let mut s = 0.0;
                for idx in 0..q.pow(others as u32) {
                    let mut k = idx;
                    let mut w = 1.0;
                    for a in (0..self.dim).filter(|&a| a != axis) {
                        p[a] = nodes[k % q];
                        w *= weights[k % q];
                        k /= q;
                    }
                    let v = self.eval(&p);
                    s += w * v * v;
                }
                s
            })
            .collect();
        let mut cdf = vec![0.0; pts];
        for i in 1..pts {
            cdf[i] = cdf[i - 1] + 0.5 * dt * (density[i - 1] + density[i]);
        }
        let total = cdf[pts - 1];
        cdf.iter_mut().for_each(|c| *c /= total);
        MarginalCdf { lo: -rho, dt, cdf }
    }

    /// v_ℏ sampled on a grid.
    pub fn sample(&self, hbar: f64, grid: &PositionGrid) -> Result<WaveFunction> {
        check_hbar(hbar)?;
        dim_check("fiducial vector", self.dim, grid.dim())?;
        Ok(WaveFunction::from_fn(grid.clone(), |x| Complex64::new(self.scaled(hbar, x), 0.0)))
    }
}

struct MarginalCdf {
    lo: f64,
    dt: f64,
    cdf: Vec<f64>,
}

impl MarginalCdf {
    fn at(&self, t: f64) -> f64 {
        let u = (t - self.lo) / self.dt;
        if u <= 0.0 {
            return 0.0;
        }
        let i = u.floor() as usize;
        if i + 1 >= self.cdf.len() {
            return 1.0;
        }
        let f = u - i as f64;
        self.cdf[i] * (1.0 - f) + self.cdf[i + 1] * f
    }
}

/// v^A_ℏ(Z)(x) from the defining formula.
fn coherent_value(v: &FiducialVector, a: &VectorPotential, hbar: f64, z: &PhaseSpacePoint, x: &[f64]) -> Complex64 {
    let lin: f64 = (0..x.len()).map(|k| (x[k] - 0.5 * z.x[k]) * z.xi[k]).sum();
    let circ = if a.is_zero() { 0.0 } else { a.circulation(&z.x, x) };
    let d: Vec<f64> = x.iter().zip(&z.x).map(|(p, q)| p - q).collect();
    Complex64::from_polar(v.scaled(hbar, &d), (lin + circ) / hbar)
}

/// A magnetic coherent vector sampled and normalized on a grid.
#[derive(Debug, Clone)]
pub struct CoherentVector {
    pub center: PhaseSpacePoint,
    pub hbar: f64,
    pub gauge: VectorPotential,
    pub state: WaveFunction,
}

fn check_setup(v: &FiducialVector, a: &VectorPotential, hbar: f64, z: &PhaseSpacePoint) -> Result<()> {
    check_hbar(hbar)?;
    dim_check("fiducial vector", v.dim(), a.dim())?;
    dim_check("coherent center", z.dim(), a.dim())?;
    if z.flat().iter().any(|t| !t.is_finite()) {
        return Err(Error::Input("coherent center is not finite".into()));
    }
    Ok(())
}

/// v^A_ℏ(Z) on `grid`, normalized there.
pub fn coherent_vector(
    v: &FiducialVector,
    a: &VectorPotential,
    hbar: f64,
    z: &PhaseSpacePoint,
    grid: &PositionGrid,
) -> Result<CoherentVector> {
    check_setup(v, a, hbar, z)?;
    dim_check("grid", grid.dim(), a.dim())?;
    let margin = 3.0 * hbar.sqrt();
    let l = grid.half_width();
    if z.x.iter().any(|&c| c - margin < -l || c + margin > l) {
        return Err(Error::Domain(format!(
            "center {:?} lies within 3√ℏ = {margin:.3} of the grid edge ±{l}",
            z.x
        )));
    }
    let values: Vec<Complex64> =
        (0..grid.len()).into_par_iter().map(|i| coherent_value(v, a, hbar, z, &grid.point(i))).collect();
    let raw = WaveFunction::new(grid.clone(), values)?;
    let norm = raw.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Numerical { msg: "coherent vector vanishes on the grid".into(), iterations: 0, residual: norm });
    }
    let state = raw.normalized()?;

    // Spot-check the stored phases against an independent circulation rule.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..16 {
        let i = rng.gen_range(0..grid.len());
        let x = grid.point(i);
        let lin: f64 = (0..x.len()).map(|k| (x[k] - 0.5 * z.x[k]) * z.xi[k]).sum();
        let circ = circulation_segment(a, &z.x, &x, 24)?;
        let d: Vec<f64> = x.iter().zip(&z.x).map(|(p, q)| p - q).collect();
        let expect = Complex64::from_polar(v.scaled(hbar, &d), (lin + circ) / hbar) / norm;
        let diff = (state.values[i] - expect).norm();
        if diff > 1e-8 * (1.0 + expect.norm()) {
            return Err(Error::Consistency(format!("coherent vector value at {x:?} off by {diff:.3e}")));
        }
    }
    Ok(CoherentVector { center: z.clone(), hbar, gauge: a.clone(), state })
}

/// The same vector built as e^{iΓ^A[z,·]/ℏ} W₀(−Z/ℏ) v_ℏ with the flat Weyl system.
pub fn coherent_vector_via_weyl(
    v: &FiducialVector,
    a: &VectorPotential,
    hbar: f64,
    z: &PhaseSpacePoint,
    grid: &PositionGrid,
) -> Result<WaveFunction> {
    check_setup(v, a, hbar, z)?;
    let vh = v.sample(hbar, grid)?;
    let y = z.scale(-1.0 / hbar);
    let moved = WeylOperator::new(&VectorPotential::zero(a.dim()), hbar, &y, grid)?.apply(&vh)?;
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.point(i);
            let circ = if a.is_zero() { 0.0 } else { a.circulation(&z.x, &x) };
            moved.values[i] * Complex64::from_polar(1.0, circ / hbar)
        })
        .collect();
    WaveFunction::new(grid.clone(), values)?.normalized()
}

/// |⟨c₁, c₂⟩|².
pub fn transition_probability(c1: &CoherentVector, c2: &CoherentVector) -> Result<f64> {
    if (c1.hbar - c2.hbar).abs() > 1e-14 * c1.hbar {
        return Err(Error::Input(format!("coherent vectors at different ℏ ({} vs {})", c1.hbar, c2.hbar)));
    }
    if c1.gauge != c2.gauge {
        return Err(Error::Input("coherent vectors built in different gauges".into()));
    }
    if !c1.state.grid.same_as(&c2.state.grid) {
        return Err(Error::Input("coherent vectors on different grids".into()));
    }
    Ok(inner_product(&c1.state, &c2.state)?.norm_sqr())
}

/// Discretization of the phase-space integral ∫ dY/(2πℏ)^N: midpoint cells in
/// position, the grid's FFT lattice in momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCells {
    /// Half-width of the position window; `None` takes the operation's default.
    pub half_width: Option<f64>,
    /// Midpoint cells per √ℏ along each position axis.
    pub cells_per_width: f64,
    /// Largest tolerated mass outside the window.
    pub tail_budget: f64,
}

impl Default for PhaseCells {
    fn default() -> Self {
        Self { half_width: None, cells_per_width: 2.0, tail_budget: 1e-4 }
    }
}

impl PhaseCells {
    fn check(&self) -> Result<()> {
        if let Some(w) = self.half_width {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Config(format!("window half-width {w} must be positive")));
            }
        }
        if !(self.cells_per_width.is_finite() && self.cells_per_width >= 0.5) {
            return Err(Error::Config(format!("cells per √ℏ = {} must be >= 0.5", self.cells_per_width)));
        }
        if !(self.tail_budget > 0.0 && self.tail_budget < 1.0) {
            return Err(Error::Config(format!("tail budget {} outside (0, 1)", self.tail_budget)));
        }
        Ok(())
    }

    fn centers(&self, center: &[f64], w: f64, hbar: f64) -> (Vec<Vec<f64>>, f64) {
        let n = center.len();
        let nc = ((2.0 * w * self.cells_per_width / hbar.sqrt()).ceil() as usize).max(1);
        let delta = 2.0 * w / nc as f64;
        let axis: Vec<f64> = (0..nc).map(|i| -w + (i as f64 + 0.5) * delta).collect();
        let out = (0..nc.pow(n as u32))
            .map(|mut k| {
                let mut p = vec![0.0; n];
                for a in (0..n).rev() {
                    p[a] = center[a] + axis[k % nc];
                    k /= nc;
                }
                p
            })
            .collect();
        (out, delta.powi(n as i32))
    }
}

/// A grid translated so that its center sits at `offset`.
struct LocalGrid {
    grid: PositionGrid,
    offset: Vec<f64>,
}

impl LocalGrid {
    fn new(center: &[f64], half_width: f64, spacing: f64) -> Result<Self> {
        let m = 2 * ((half_width / spacing).ceil() as usize).max(2);
        let grid = PositionGrid::with_cap(center.len(), half_width, m, LOCAL_POINT_CAP)?;
        Ok(Self { grid, offset: center.to_vec() })
    }

    fn point(&self, i: usize) -> Vec<f64> {
        let mut p = self.grid.point(i);
        for (t, o) in p.iter_mut().zip(&self.offset) {
            *t += o;
        }
        p
    }
}

/// For each position cell center y, sums |⟨target, v^A_ℏ(y, η)⟩|² over the FFT
/// momentum lattice around `zeta_ref`, weighted by the cell measure. Returns
/// (Σ weight · g, Σ weight).
#[allow(clippy::too_many_arguments)]
fn overlap_sweep(
    target: &[Complex64],
    lg: &LocalGrid,
    zeta_ref: &[f64],
    v: &FiducialVector,
    a: &VectorPotential,
    hbar: f64,
    centers: &[Vec<f64>],
    cell_vol: f64,
    g: Option<&(dyn Fn(&PhaseSpacePoint) -> f64 + Sync)>,
) -> (f64, f64) {
    let grid = &lg.grid;
    let n = grid.dim();
    let m = grid.points_per_axis();
    let h = grid.spacing();
    let deta = hbar * PI / grid.half_width();
    let weight = cell_vol * h.powi(2 * n as i32) * (deta / (2.0 * PI * hbar)).powi(n as i32);
    let points: Vec<Vec<f64>> = (0..grid.len()).map(|i| lg.point(i)).collect();
    let demod: Vec<Complex64> = points
        .iter()
        .zip(target)
        .map(|(x, t)| {
            let ph: f64 = x.iter().zip(zeta_ref).map(|(p, q)| p * q).sum::<f64>() / hbar;
            t.conj() * Complex64::from_polar(1.0, ph)
        })
        .collect();
    let reach = v.radius() * hbar.sqrt();
    let per_cell: Vec<(f64, f64)> = centers
        .par_iter()
        .map(|y| {
            let mut w = vec![C0; grid.len()];
            for (i, x) in points.iter().enumerate() {
                if demod[i] == C0 || x.iter().zip(y).any(|(p, q)| (p - q).abs() > reach) {
                    continue;
                }
                let d: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
                let vv = v.scaled(hbar, &d);
                if vv == 0.0 {
                    continue;
                }
                let circ = if a.is_zero() { 0.0 } else { a.circulation(y, x) };
                w[i] = demod[i] * Complex64::from_polar(vv, circ / hbar);
            }
            fft_nd(&mut w, n, m, true);
            let mut mass = 0.0;
            let mut acc = 0.0;
            for (k, f) in w.iter().enumerate() {
                let p = f.norm_sqr() * weight;
                if p == 0.0 {
                    continue;
                }
                mass += p;
                if let Some(g) = g {
                    let mi = grid.multi_index(k);
                    let eta: Vec<f64> = (0..n).map(|ax| zeta_ref[ax] + hbar * grid.fft_frequency(mi[ax])).collect();
                    acc += p * g(&PhaseSpacePoint { x: y.clone(), xi: eta });
                }
            }
            (acc, mass)
        })
        .collect();
    per_cell.iter().fold((0.0, 0.0), |(s, t), (a, b)| (s + a, t + b))
}

/// ∫ |⟨v^A_ℏ(Y), u⟩|² dY/(2πℏ)^N, which equals ‖u‖² = 1 up to the window tail.
pub fn resolution_of_identity(
    u: &WaveFunction,
    v: &FiducialVector,
    a: &VectorPotential,
    hbar: f64,
    cells: &PhaseCells,
) -> Result<f64> {
    check_hbar(hbar)?;
    cells.check()?;
    let n = u.grid.dim();
    dim_check("state", n, a.dim())?;
    dim_check("fiducial vector", v.dim(), n)?;
    let nu = u.norm();
    if (nu - 1.0).abs() > 1e-8 {
        return Err(Error::Input(format!("state must be normalized (norm {nu})")));
    }
    let g = &u.grid;
    let mut center = vec![0.0; n];
    for i in 0..g.len() {
        let p = u.values[i].norm_sqr() * g.cell();
        for (c, x) in center.iter_mut().zip(g.point(i)) {
            *c += p * x;
        }
    }
    let sq = hbar.sqrt();
    // Integrated over η, the integrand is |u|² * |v_ℏ|² in y; bound the mass
    // outside the box by the sum of the per-axis tails.
    let cdfs: Vec<MarginalCdf> = (0..n).map(|ax| v.marginal_cdf(ax)).collect();
    let weights: Vec<(Vec<f64>, f64)> = (0..g.len())
        .map(|i| (g.point(i), u.values[i].norm_sqr() * g.cell()))
        .filter(|(_, p)| *p > 0.0)
        .collect();
    let tail_for = |w: f64| -> f64 {
        let t: f64 = weights
            .iter()
            .map(|(x, p)| {
                let s: f64 = (0..n)
                    .map(|ax| {
                        1.0 - cdfs[ax].at((center[ax] + w - x[ax]) / sq) + cdfs[ax].at((center[ax] - w - x[ax]) / sq)
                    })
                    .sum();
                p * s
            })
            .sum();
        t.min(1.0)
    };
    let grow = |from: f64| {
        let mut w = from;
        for _ in 0..200 {
            if tail_for(w) <= cells.tail_budget {
                break;
            }
            w += 0.25 * sq;
        }
        w
    };
    // The default window starts at max(6√ℏ, 3) and widens with the state.
    let w = match cells.half_width {
        Some(w) => {
            let tail = tail_for(w);
            if tail > cells.tail_budget {
                return Err(Error::Window { tail, budget: cells.tail_budget, required: grow(w) });
            }
            w
        }
        None => {
            let w = grow((6.0 * sq).max(3.0));
            let tail = tail_for(w);
            if tail > cells.tail_budget {
                return Err(Error::Window { tail, budget: cells.tail_budget, required: w });
            }
            w
        }
    };
    let (centers, vol) = cells.centers(&center, w, hbar);
    let work = centers.len() as f64 * g.len() as f64;
    if work > 5e9 {
        return Err(Error::Config(format!("{} cells x {} points is too much work", centers.len(), g.len())));
    }
    let lg = LocalGrid { grid: g.clone(), offset: vec![0.0; n] };
    let (_, mass) = overlap_sweep(&u.values, &lg, &vec![0.0; n], v, a, hbar, &centers, vol, None);
    Ok(mass)
}

/// Berezin symbol ∫ g(Y) |⟨v^A_ℏ(Z), v^A_ℏ(Y)⟩|² dY/(2πℏ)^N of a bounded g.
///
/// The default window is 8√ℏ around z.
#[allow(clippy::too_many_arguments)]
pub fn berezin_average(
    g: &(dyn Fn(&PhaseSpacePoint) -> f64 + Sync),
    bound: f64,
    v: &FiducialVector,
    a: &VectorPotential,
    hbar: f64,
    z: &PhaseSpacePoint,
    cells: &PhaseCells,
) -> Result<f64> {
    check_setup(v, a, hbar, z)?;
    cells.check()?;
    if !(bound.is_finite() && bound > 0.0) {
        return Err(Error::Input(format!("bound {bound} must be positive")));
    }
    let sq = hbar.sqrt();
    let w = cells.half_width.unwrap_or(8.0 * sq);
    let reach = v.radius() * sq;
    let spacing = (sq / 3.0).min(PI * hbar / (w + 2.0 * sq));
    let lg = LocalGrid::new(&z.x, w + reach, spacing)?;
    let target: Vec<Complex64> =
        (0..lg.grid.len()).into_par_iter().map(|i| coherent_value(v, a, hbar, z, &lg.point(i))).collect();
    let tn = (target.iter().map(|c| c.norm_sqr()).sum::<f64>() * lg.grid.cell()).sqrt();
    let target: Vec<Complex64> = target.iter().map(|c| c / tn).collect();
    let (centers, vol) = cells.centers(&z.x, w, hbar);
    let bound_ok = |p: &PhaseSpacePoint| {
        let val = g(p);
        val.is_finite() && val.abs() <= bound * (1.0 + 1e-12)
    };
    let checked = |p: &PhaseSpacePoint| -> f64 {
        let val = g(p);
        if bound_ok(p) {
            val
        } else {
            f64::NAN
        }
    };
    let (acc, mass) = overlap_sweep(&target, &lg, &z.xi, v, a, hbar, &centers, vol, Some(&checked));
    if acc.is_nan() {
        return Err(Error::Input(format!("g exceeds its bound {bound} inside the window")));
    }
    let tail = (1.0 - mass).abs();
    if tail * bound > cells.tail_budget {
        let grow = if tail < 1.0 { (cells.tail_budget.ln() / tail.ln()).max(1.0).sqrt() } else { 2.0 };
        return Err(Error::Window { tail, budget: cells.tail_budget, required: w * grow.max(1.25) });
    }
    Ok(acc)
}

#[allow(clippy::too_many_arguments)]
fn pullback_at(
    v: &FiducialVector,
    a: &VectorPotential,
    hbar: f64,
    lg: &LocalGrid,
    x: &PhaseSpacePoint,
    y: &PhaseSpacePoint,
    zt: &PhaseSpacePoint,
    s: f64,
) -> f64 {
    let diff = |dir: &PhaseSpacePoint, p: &[f64]| -> Complex64 {
        let plus = x.add(&dir.scale(s));
        let minus = x.sub(&dir.scale(s));
        (coherent_value(v, a, hbar, &plus, p) - coherent_value(v, a, hbar, &minus, p)) / (2.0 * s)
    };
    let terms: Vec<Complex64> = (0..lg.grid.len())
        .into_par_iter()
        .map(|i| {
            let p = lg.point(i);
            diff(y, &p).conj() * diff(zt, &p)
        })
        .collect();
    let ip: Complex64 = terms.iter().sum::<Complex64>() * lg.grid.cell();
    -2.0 * hbar * ip.im
}

/// The pulled-back form −2ℏ Im⟨D_Y v^A_ℏ(X), D_Z v^A_ℏ(X)⟩, with directional
/// derivatives by central differences refined by step halving and Richardson
/// extrapolation.
pub fn pullback_form(
    v: &FiducialVector,
    a: &VectorPotential,
    hbar: f64,
    x: &PhaseSpacePoint,
    y: &PhaseSpacePoint,
    zt: &PhaseSpacePoint,
    step: f64,
) -> Result<f64> {
    check_setup(v, a, hbar, x)?;
    dim_check("direction Y", y.dim(), a.dim())?;
    dim_check("direction Z", zt.dim(), a.dim())?;
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Input(format!("step {step} must be positive")));
    }
    let sq = hbar.sqrt();
    let move_x = y.x.iter().chain(&zt.x).fold(0.0f64, |m, t| m.max(t.abs())) * step;
    let lg = LocalGrid::new(&x.x, v.radius() * sq + move_x, sq / 5.0)?;
    let mut s = step;
    let mut prev_p = pullback_at(v, a, hbar, &lg, x, y, zt, s);
    let mut prev_r: Option<f64> = None;
    let mut last = f64::INFINITY;
    for _ in 0..14 {
        s *= 0.5;
        let p = pullback_at(v, a, hbar, &lg, x, y, zt, s);
        let r = (4.0 * p - prev_p) / 3.0;
        if let Some(q) = prev_r {
            last = (r - q).abs();
            if last <= 1e-7 * r.abs().max(1.0) {
                return Ok(r);
            }
        }
        prev_r = Some(r);
        prev_p = p;
    }
    Err(Error::Numerical { msg: "pull-back form did not settle under step halving".into(), iterations: 14, residual: last })
}

/// Kernel terms of a symbol, and x-only terms that act by multiplication.
fn split_terms(f: &ClosedSymbol) -> Result<(Vec<GaussTerm>, Vec<GaussTerm>)> {
    let mut kern = Vec::new();
    let mut mult = Vec::new();
    for t in &f.terms {
        if t.xi_integrable() {
            kern.push(t.clone());
        } else if t.xi_polynomial() && t.xi_degree() == 0 {
            mult.push(t.clone());
        } else {
            return Err(Error::Unsupported(
                "coherent expectations need ξ-integrable terms or x-only terms".into(),
            ));
        }
    }
    Ok((kern, mult))
}

fn field_scale(b: &MagneticField, x: &[f64]) -> f64 {
    let n = b.dim();
    let mut m = 0.0f64;
    for j in 0..n {
        for k in 0..n {
            m = m.max(b.component(j, k, x).abs());
        }
    }
    m
}

/// ⟨v^A_ℏ(Z), Op^A_ℏ(f) v^A_ℏ(Z)⟩ by a banded kernel sum on a local grid.
fn expectation_matrix(
    f: &ClosedSymbol,
    v: &FiducialVector,
    a: &VectorPotential,
    hbar: f64,
    z: &PhaseSpacePoint,
) -> Result<Complex64> {
    let n = a.dim();
    let (kern, mult) = split_terms(f)?;
    let sq = hbar.sqrt();
    let half = v.radius() * sq;
    let mut omega = 0.0f64;
    for t in kern.iter().chain(&mult) {
        for ax in 0..n {
            let xf = &t.x[ax];
            let xi = &t.xi[ax];
            let band = if xi.has_gaussian() {
                (z.xi[ax] - xi.center).abs() + (7.5 + xi.pow as f64) * xi.width
            } else {
                0.0
            };
            omega = omega.max(band + 0.5 * xf.k.abs());
        }
    }
    omega += 8.0 * sq + field_scale(a.field(), &z.x) * half;
    let spacing = (sq / 3.0).min(2.0 * PI * hbar / (1.1 * omega));
    let lg = LocalGrid::new(&z.x, half, spacing)?;
    let grid = &lg.grid;
    let m = grid.points_per_axis();
    let h = grid.spacing();
    let coords: Vec<Vec<f64>> = (0..n).map(|ax| grid.axis().iter().map(|t| t + lg.offset[ax]).collect()).collect();
    let c: Vec<Complex64> =
        (0..grid.len()).into_par_iter().map(|i| coherent_value(v, a, hbar, z, &lg.point(i))).collect();
    let cn2 = c.iter().map(|x| x.norm_sqr()).sum::<f64>() * grid.cell();
    let c: Vec<Complex64> = c.iter().map(|x| x / cn2.sqrt()).collect();
    let cmax = c.iter().fold(0.0f64, |s, x| s.max(x.norm()));
    let tiny = 1e-14 * cmax;

    let mut total = C0;
    for t in &mult {
        total += (0..grid.len()).map(|i| c[i].norm_sqr() * t.eval_x(&lg.point(i))).sum::<Complex64>() * grid.cell();
    }
    if kern.is_empty() {
        return Ok(total);
    }

    // Offsets j − i along each axis that any term can reach.
    let mut off_lo = vec![i64::MAX; n];
    let mut off_hi = vec![i64::MIN; n];
    for t in &kern {
        for ax in 0..n {
            let xi = &t.xi[ax];
            let c0 = -xi.k * hbar;
            let r = (7.5 + xi.pow as f64) * hbar / xi.width;
            // d = x_i − x_j = −(j − i)h
            off_lo[ax] = off_lo[ax].min((-(c0 + r) / h).floor() as i64);
            off_hi[ax] = off_hi[ax].max((-(c0 - r) / h).ceil() as i64);
        }
    }
    let nb: Vec<usize> = (0..n).map(|ax| (off_hi[ax] - off_lo[ax] + 1) as usize).collect();
    // tables[t][ax][i * nb + o] = X((x_i+x_j)/2) F((x_i−x_j)/ℏ)
    let tables: Vec<Vec<Vec<Complex64>>> = kern
        .iter()
        .map(|t| {
            (0..n)
                .map(|ax| {
                    let mut tab = vec![C0; m * nb[ax]];
                    for i in 0..m {
                        for o in 0..nb[ax] {
                            let j = i as i64 + off_lo[ax] + o as i64;
                            if j < 0 || j >= m as i64 {
                                continue;
                            }
                            let (xi_, xj) = (coords[ax][i], coords[ax][j as usize]);
                            tab[i * nb[ax] + o] = t.x[ax].eval(0.5 * (xi_ + xj)) * t.xi[ax].fourier((xi_ - xj) / hbar);
                        }
                    }
                    tab
                })
                .collect()
        })
        .collect();
    let band_len: usize = nb.iter().product();
    let rows: Vec<Complex64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            if c[i].norm() <= tiny {
                return C0;
            }
            let mi = grid.multi_index(i);
            let xi_pt = lg.point(i);
            let mut acc = C0;
            let mut mj = [0usize; 3];
            let mut oj = [0usize; 3];
            'band: for b in 0..band_len {
                let mut k = b;
                for ax in (0..n).rev() {
                    let o = k % nb[ax];
                    k /= nb[ax];
                    let j = mi[ax] as i64 + off_lo[ax] + o as i64;
                    if j < 0 || j >= m as i64 {
                        continue 'band;
                    }
                    mj[ax] = j as usize;
                    oj[ax] = o;
                }
                let jflat = grid.flat_index(&mj[..n]);
                if c[jflat].norm() <= tiny {
                    continue;
                }
                let mut kval = C0;
                for (t, tab) in kern.iter().zip(&tables) {
                    let mut p = t.coeff;
                    for ax in 0..n {
                        p *= tab[ax][mi[ax] * nb[ax] + oj[ax]];
                    }
                    kval += p;
                }
                if kval == C0 {
                    continue;
                }
                let yj: Vec<f64> = (0..n).map(|ax| coords[ax][mj[ax]]).collect();
                let circ = if a.is_zero() { 0.0 } else { a.circulation(&xi_pt, &yj) };
                acc += kval * Complex64::from_polar(1.0, -circ / hbar) * c[jflat];
            }
            c[i].conj() * acc
        })
        .collect();
    let s: Complex64 = rows.iter().sum();
    total += s * grid.cell() * grid.cell() * (2.0 * PI * hbar).powi(-(n as i32));
    Ok(total)
}

/// Quadrature nodes on one axis for a fiducial-weighted integral, combining the
/// fiducial envelope (precision `pv`, center 0) with an optional extra Gaussian.
fn axis_rule(v: &FiducialVector, pv: f64, extra: Option<(f64, f64)>, span: f64, q: usize) -> (Vec<f64>, Vec<f64>) {
    match v.kind() {
        FiducialKind::Bump { .. } => {
            let (mut lo, mut hi) = (-span, span);
            if let Some((c, s)) = extra {
                lo = lo.max(c - 9.0 * s);
                hi = hi.min(c + 9.0 * s);
            }
            if hi <= lo {
                return (vec![], vec![]);
            }
            legendre_on(lo, hi, q)
        }
        _ => {
            let (mut prec, mut mean) = (pv, 0.0);
            if let Some((c, s)) = extra {
                let p = 1.0 / (s * s);
                mean = (mean * prec + c * p) / (prec + p);
                prec += p;
            }
            hermite_on(mean, prec.powf(-0.5), q)
        }
    }
}

fn gauss_extra(f: &Factor, scale: f64, shift: f64) -> Option<(f64, f64)> {
    if f.has_gaussian() {
        Some(((f.center - shift) / scale, f.width / scale))
    } else {
        None
    }
}

/// The same expectation as a direct integral in centered coordinates
/// x = z + √ℏ(m + d/2), y = z + √ℏ(m − d/2).
fn expectation_direct(
    f: &ClosedSymbol,
    v: &FiducialVector,
    b: &MagneticField,
    hbar: f64,
    z: &PhaseSpacePoint,
    q: usize,
    flux_order: usize,
) -> Result<Complex64> {
    let n = b.dim();
    let (kern, mult) = split_terms(f)?;
    let sq = hbar.sqrt();
    let span = v.radius();
    let mut total = C0;
    for t in &mult {
        let rules: Vec<_> =
            (0..n).map(|ax| axis_rule(v, 2.0, gauss_extra(&t.x[ax], sq, z.x[ax]), span, q)).collect();
        let count: usize = rules.iter().map(|r| r.0.len()).product();
        let mut mm = vec![0.0; n];
        let mut xx = vec![0.0; n];
        for idx in 0..count {
            let mut k = idx;
            let mut w = 1.0;
            for ax in 0..n {
                let len = rules[ax].0.len();
                mm[ax] = rules[ax].0[k % len];
                w *= rules[ax].1[k % len];
                k /= len;
                xx[ax] = z.x[ax] + sq * mm[ax];
            }
            let vv = v.eval(&mm);
            total += t.eval_x(&xx) * (w * vv * vv);
        }
    }
    let pref = (2.0 * PI).powi(-(n as i32)) * hbar.powf(-0.5 * n as f64);
    for t in &kern {
        // Per axis: m-rule and d-rule, then a separable table S[i][j].
        let mut mrules = Vec::with_capacity(n);
        let mut drules = Vec::with_capacity(n);
        let mut tabs = Vec::with_capacity(n);
        for ax in 0..n {
            let mr = axis_rule(v, 2.0, gauss_extra(&t.x[ax], sq, z.x[ax]), span, q);
            let xi = &t.xi[ax];
            let dr = axis_rule(v, 0.5, Some((-xi.k * sq, sq / xi.width)), 2.0 * span, q);
            let mut tab = vec![C0; mr.0.len() * dr.0.len()];
            for (i, (mv, mw)) in mr.0.iter().zip(&mr.1).enumerate() {
                let xf = t.x[ax].eval(z.x[ax] + sq * mv) * *mw;
                for (j, (dv, dw)) in dr.0.iter().zip(&dr.1).enumerate() {
                    tab[i * dr.0.len() + j] =
                        xf * xi.fourier(dv / sq) * Complex64::from_polar(*dw, -dv * z.xi[ax] / sq);
                }
            }
            mrules.push(mr.0);
            drules.push(dr.0);
            tabs.push(tab);
        }
        let sizes: Vec<usize> = (0..n).map(|ax| mrules[ax].len() * drules[ax].len()).collect();
        let count: usize = sizes.iter().product();
        let parts: Vec<Complex64> = (0..count)
            .into_par_iter()
            .map(|idx| {
                let mut k = idx;
                let mut s = t.coeff;
                let mut xp = vec![0.0; n];
                let mut yp = vec![0.0; n];
                let mut px = vec![0.0; n];
                let mut py = vec![0.0; n];
                for ax in 0..n {
                    let e = k % sizes[ax];
                    k /= sizes[ax];
                    s *= tabs[ax][e];
                    let nd = drules[ax].len();
                    let (mv, dv) = (mrules[ax][e / nd], drules[ax][e % nd]);
                    xp[ax] = mv + 0.5 * dv;
                    yp[ax] = mv - 0.5 * dv;
                    px[ax] = z.x[ax] + sq * xp[ax];
                    py[ax] = z.x[ax] + sq * yp[ax];
                }
                if s == C0 {
                    return C0;
                }
                let vv = v.eval(&xp) * v.eval(&yp);
                if vv == 0.0 {
                    return C0;
                }
                let flux = flux_auto(b, &z.x, &px, &py, flux_order);
                s * Complex64::from_polar(vv, -flux / hbar)
            })
            .collect();
        total += parts.iter().sum::<Complex64>() * pref;
    }
    Ok(total)
}

/// Both evaluations of the coherent-state expectation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectationRoutes {
    /// Banded kernel sum against the sampled coherent vector.
    pub matrix: Complex64,
    /// Direct quadrature in centered coordinates.
    pub direct: Complex64,
}

impl ExpectationRoutes {
    pub fn gap(&self) -> f64 {
        (self.matrix - self.direct).norm()
    }
}

pub fn coherent_expectation_routes(
    f: &ClosedSymbol,
    v: &FiducialVector,
    a: &VectorPotential,
    hbar: f64,
    z: &PhaseSpacePoint,
) -> Result<ExpectationRoutes> {
    check_setup(v, a, hbar, z)?;
    dim_check("symbol", f.dim(), a.dim())?;
    let q = match v.kind() {
        FiducialKind::Bump { .. } => 48,
        _ => 24,
    };
    let matrix = expectation_matrix(f, v, a, hbar, z)?;
    let direct = expectation_direct(f, v, a.field(), hbar, z, q, 6)?;
    Ok(ExpectationRoutes { matrix, direct })
}

/// ⟨v^A_ℏ(Z), Op^A_ℏ(f) v^A_ℏ(Z)⟩. Both routes run; a gap beyond ten times
/// [`ROUTE_TOLERANCE`] is reported as an inconsistency.
pub fn coherent_expectation(
    f: &ClosedSymbol,
    v: &FiducialVector,
    a: &VectorPotential,
    hbar: f64,
    z: &PhaseSpacePoint,
) -> Result<Complex64> {
    let r = coherent_expectation_routes(f, v, a, hbar, z)?;
    if r.gap() > 10.0 * ROUTE_TOLERANCE {
        return Err(Error::Consistency(format!(
            "expectation routes disagree: {} vs {} (gap {:.3e})",
            r.matrix,
            r.direct,
            r.gap()
        )));
    }
    Ok(r.matrix)
}

/// Repeated Richardson extrapolation to h → 0. The leading order is estimated
/// from the last three rungs, rounded to a multiple of 1/2 and clamped to
/// [1/2, 4]; later levels raise it by one each. Returns (limit, order).
pub fn richardson(h: &[f64], vals: &[f64]) -> Result<(f64, f64)> {
    if h.len() != vals.len() || h.len() < 2 {
        return Err(Error::Input("Richardson needs at least two matching rungs".into()));
    }
    if h.windows(2).any(|w| !(w[1] < w[0] && w[1] > 0.0)) {
        return Err(Error::Input("Richardson rungs must decrease strictly to 0".into()));
    }
    let k = h.len();
    let mut p = 1.0;
    if k >= 3 {
        let d1 = vals[k - 3] - vals[k - 2];
        let d2 = vals[k - 2] - vals[k - 1];
        if d2.abs() > 1e-15 * vals[k - 1].abs().max(1.0) && d1 / d2 > 0.0 {
            let r = h[k - 2] / h[k - 1];
            p = (((d1 / d2).ln() / r.ln()) * 2.0).round() / 2.0;
            p = p.clamp(0.5, 4.0);
        }
    }
    let levels = (k - 1).min(3);
    let mut t = vals.to_vec();
    for l in 0..levels {
        let e = p + l as f64;
        t = (0..t.len() - 1)
            .map(|i| {
                let rr = (h[i] / h[i + 1]).powf(e);
                (rr * t[i + 1] - t[i]) / (rr - 1.0)
            })
            .collect();
    }
    Ok((*t.last().unwrap(), p))
}

/// ω(δ) = C δ^α.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuityModulus {
    pub constant: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityScan {
    /// (ℏ, Re ⟨Op(g_ℏ)⟩ at Z) per rung.
    pub rows: Vec<(f64, f64)>,
    pub extrapolated: f64,
    pub order: f64,
    /// g₀(Z).
    pub reference: f64,
    /// Largest ratio of a consecutive jump to its modulus budget.
    pub worst_jump_ratio: f64,
    pub jumps_within_modulus: bool,
}

/// Coherent-state expectations of an ℏ-dependent symbol family along a ladder,
/// with Richardson extrapolation to ℏ = 0 and a jump check against a modulus.
pub fn state_continuity_scan<F>(
    family: F,
    v: &FiducialVector,
    a: &VectorPotential,
    z: &PhaseSpacePoint,
    ladder: &[f64],
    modulus: ContinuityModulus,
) -> Result<ContinuityScan>
where
    F: Fn(f64) -> Result<ClosedSymbol>,
{
    if ladder.len() < 2 {
        return Err(Error::Input("continuity scan needs at least two ℏ values".into()));
    }
    if !(modulus.constant > 0.0 && modulus.exponent > 0.0) {
        return Err(Error::Input("continuity modulus must have positive constant and exponent".into()));
    }
    let mut rows = Vec::with_capacity(ladder.len());
    for &hb in ladder {
        let val = coherent_expectation(&family(hb)?, v, a, hb, z)?;
        rows.push((hb, val.re));
    }
    let hs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let vs: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let (extrapolated, order) = richardson(&hs, &vs)?;
    let reference = family(0.0)?.eval(z).re;
    let worst = rows
        .windows(2)
        .map(|w| (w[0].1 - w[1].1).abs() / (modulus.constant * (w[0].0 - w[1].0).abs().powf(modulus.exponent)))
        .fold(0.0f64, f64::max);
    Ok(ContinuityScan {
        rows,
        extrapolated,
        order,
        reference,
        worst_jump_ratio: worst,
        jumps_within_modulus: worst <= 1.0,
    })
}

//! Magnetic fields, vector potentials, gauge functions, circulations, fluxes,
//! the magnetic symplectic form and the magnetic Poisson bracket.
//!
//! Orientation convention: `circulation_segment(A, x, y)` integrates from `x`
//! to `y`, and `flux_triangle(B, a, b, c)` is oriented so that
//!
//! ```text
//! Γ^A[a,b] + Γ^A[b,c] + Γ^A[c,a] = Γ^B⟨a,b,c⟩      with  B_jk = ∂_j A_k − ∂_k A_j.
//! ```
//!
//! With this choice `Op^{A+dρ} = e^{iρ/ℏ} Op^A e^{−iρ/ℏ}` and the Weyl system
//! composes with the multiplier `e^{(iℏ/2)σ(Y,Z)} e^{−(i/ℏ)Γ^B⟨x, x+ℏy, x+ℏy+ℏz⟩}`.

use crate::error::{dim_check, Error, Result};
use crate::quad::{exact_order, legendre01};
use num_complex::Complex64;

/// A point X = (x, ξ) of phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpacePoint {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

impl PhaseSpacePoint {
    pub fn new(x: Vec<f64>, xi: Vec<f64>) -> Result<Self> {
        dim_check("phase-space point", x.len(), xi.len())?;
        if x.is_empty() || x.len() > 3 {
            return Err(Error::Input(format!("dimension {} not in 1..=3", x.len())));
        }
        Ok(Self { x, xi })
    }

    pub fn zero(n: usize) -> Self {
        Self { x: vec![0.0; n], xi: vec![0.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn add(&self, o: &Self) -> Self {
        Self {
            x: self.x.iter().zip(&o.x).map(|(a, b)| a + b).collect(),
            xi: self.xi.iter().zip(&o.xi).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            x: self.x.iter().map(|a| a * s).collect(),
            xi: self.xi.iter().map(|a| a * s).collect(),
        }
    }

    /// Phase-space coordinates as one vector (x, ξ).
    pub fn flat(&self) -> Vec<f64> {
        self.x.iter().chain(&self.xi).copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldFamily {
    Zero,
    Constant,
    /// B_12(x) = b₀ + b₁x₁.
    Linear,
    /// B_12(x) = b₀ / (1 + x₁² + x₂²).
    BoundedSmooth,
}

impl FieldFamily {
    pub fn parse(tag: &str) -> Result<Self> {
        match tag {
            "zero" => Ok(Self::Zero),
            "constant" => Ok(Self::Constant),
            "linear" => Ok(Self::Linear),
            "bounded-smooth" => Ok(Self::BoundedSmooth),
            _ => Err(Error::Input(format!("unknown field family `{tag}`"))),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::Constant => "constant",
            Self::Linear => "linear",
            Self::BoundedSmooth => "bounded-smooth",
        }
    }
}

/// Closed-form magnetic field B_jk(x) on ℝ^N.
///
/// For N = 1 every family is identically zero. The constant family takes one
/// parameter b₀ = B_12 at N = 2 and three parameters (B_12, B_13, B_23) at N = 3.
/// The linear and bounded-smooth families only have a B_12 component.
#[derive(Debug, Clone, PartialEq)]
pub struct MagneticField {
    dim: usize,
    family: FieldFamily,
    params: Vec<f64>,
}

impl MagneticField {
    pub fn new(dim: usize, family: FieldFamily, params: &[f64]) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Input(format!("dimension {dim} not in 1..=3")));
        }
        let want = match (family, dim) {
            (_, 1) => params.len(),
            (FieldFamily::Zero, _) => 0,
            (FieldFamily::Constant, 2) => 1,
            (FieldFamily::Constant, _) => 3,
            (FieldFamily::Linear, _) => 2,
            (FieldFamily::BoundedSmooth, _) => 1,
        };
        if params.len() != want {
            return Err(Error::Input(format!(
                "field family `{}` in dimension {dim} takes {want} parameters, got {}",
                family.tag(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Input("non-finite field parameter".into()));
        }
        let family = if dim == 1 { FieldFamily::Zero } else { family };
        let params = if dim == 1 { vec![] } else { params.to_vec() };
        Ok(Self { dim, family, params })
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, family: FieldFamily::Zero, params: vec![] }
    }

    /// Constant field with B_12 = b0 (N = 2).
    pub fn constant(b0: f64) -> Self {
        Self { dim: 2, family: FieldFamily::Constant, params: vec![b0] }
    }

    pub fn linear(dim: usize, b0: f64, b1: f64) -> Result<Self> {
        Self::new(dim, FieldFamily::Linear, &[b0, b1])
    }

    pub fn bounded_smooth(dim: usize, b0: f64) -> Result<Self> {
        Self::new(dim, FieldFamily::BoundedSmooth, &[b0])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> FieldFamily {
        self.family
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn is_zero(&self) -> bool {
        self.family == FieldFamily::Zero || self.params.iter().all(|&p| p == 0.0)
    }

    /// Polynomial degree in x, if the field is polynomial.
    pub fn poly_degree(&self) -> Option<usize> {
        match self.family {
            FieldFamily::Zero | FieldFamily::Constant => Some(0),
            FieldFamily::Linear => Some(1),
            FieldFamily::BoundedSmooth => None,
        }
    }

    fn b12(&self, x: &[f64]) -> f64 {
        match self.family {
            FieldFamily::Zero => 0.0,
            FieldFamily::Constant => self.params[0],
            FieldFamily::Linear => self.params[0] + self.params[1] * x[0],
            FieldFamily::BoundedSmooth => self.params[0] / (1.0 + x[0] * x[0] + x[1] * x[1]),
        }
    }

    /// B_jk(x), zero-based indices.
    pub fn component(&self, j: usize, k: usize, x: &[f64]) -> f64 {
        if j == k || self.dim == 1 {
            return 0.0;
        }
        let (a, b, sign) = if j < k { (j, k, 1.0) } else { (k, j, -1.0) };
        let v = match (self.family, a, b) {
            (FieldFamily::Constant, 0, 1) if self.dim == 3 => self.params[0],
            (FieldFamily::Constant, 0, 2) => self.params[1],
            (FieldFamily::Constant, 1, 2) => self.params[2],
            (_, 0, 1) => self.b12(x),
            _ => 0.0,
        };
        sign * v
    }

    /// Cyclic sum ∂_l B_jk + ∂_j B_kl + ∂_k B_lj by central differences.
    pub fn closedness_defect(&self, j: usize, k: usize, l: usize, x: &[f64], step: f64) -> f64 {
        let d = |a: usize, b: usize, c: usize| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[c] += step;
            m[c] -= step;
            (self.component(a, b, &p) - self.component(a, b, &m)) / (2.0 * step)
        };
        d(j, k, l) + d(k, l, j) + d(l, j, k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GaugeFunction {
    /// ρ(x) = c·x
    Linear { c: Vec<f64> },
    /// ρ(x) = ½ xᵀQx + c·x, Q symmetric and stored row-major.
    Quadratic { q: Vec<f64>, c: Vec<f64> },
    /// ρ(x) = amp · sin(k·x)
    Oscillatory { amp: f64, k: Vec<f64> },
}

impl GaugeFunction {
    pub fn linear(c: Vec<f64>) -> Self {
        Self::Linear { c }
    }

    pub fn quadratic(q: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        let n = c.len();
        dim_check("quadratic gauge", q.len(), n * n)?;
        for i in 0..n {
            for j in 0..n {
                if (q[i * n + j] - q[j * n + i]).abs() > 0.0 {
                    return Err(Error::Input("quadratic gauge matrix must be symmetric".into()));
                }
            }
        }
        Ok(Self::Quadratic { q, c })
    }

    pub fn oscillatory(amp: f64, k: Vec<f64>) -> Self {
        Self::Oscillatory { amp, k }
    }

    /// ρ = b₀x₁x₂/2, which maps the Landau gauge (−b₀x₂, 0) to the symmetric gauge.
    pub fn landau_to_symmetric(b0: f64) -> Self {
        Self::Quadratic { q: vec![0.0, 0.5 * b0, 0.5 * b0, 0.0], c: vec![0.0, 0.0] }
    }

    pub fn family_tag(&self) -> &'static str {
        match self {
            Self::Linear { .. } => "linear",
            Self::Quadratic { .. } => "quadratic",
            Self::Oscillatory { .. } => "oscillatory",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Linear { c } | Self::Quadratic { c, .. } => c.len(),
            Self::Oscillatory { k, .. } => k.len(),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Self::Linear { c } => dot(c, x),
            Self::Quadratic { q, c } => {
                let n = c.len();
                let mut s = dot(c, x);
                for i in 0..n {
                    for j in 0..n {
                        s += 0.5 * x[i] * q[i * n + j] * x[j];
                    }
                }
                s
            }
            Self::Oscillatory { amp, k } => amp * dot(k, x).sin(),
        }
    }

    /// ∂_j ρ(x).
    pub fn gradient(&self, j: usize, x: &[f64]) -> f64 {
        match self {
            Self::Linear { c } => c[j],
            Self::Quadratic { q, c } => {
                let n = c.len();
                c[j] + (0..n).map(|i| q[j * n + i] * x[i]).sum::<f64>()
            }
            Self::Oscillatory { amp, k } => amp * k[j] * dot(k, x).cos(),
        }
    }

    /// ∂_k ∂_j ρ(x).
    pub fn hessian(&self, j: usize, k: usize, x: &[f64]) -> f64 {
        match self {
            Self::Linear { .. } => 0.0,
            Self::Quadratic { q, c } => q[j * c.len() + k],
            Self::Oscillatory { amp, k: kv } => -amp * kv[j] * kv[k] * dot(kv, x).sin(),
        }
    }

    fn grad_degree(&self) -> Option<usize> {
        match self {
            Self::Linear { .. } => Some(0),
            Self::Quadratic { .. } => Some(1),
            Self::Oscillatory { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum PotentialKind {
    Transverse,
    Axial,
    Transformed(Box<VectorPotential>, GaugeFunction),
}

/// Vector potential A with dA = B, given in closed form.
///
/// * `transverse`: A_k(x) = ∫₀¹ t x_j B_jk(tx) dt; the symmetric gauge for constant B.
/// * `axial`: A_j(x) = −Σ_{k>j} ∫₀^{x_k} B_jk; the Landau gauge (−b₀x₂, 0) for constant B.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorPotential {
    field: MagneticField,
    kind: PotentialKind,
}

impl VectorPotential {
    pub fn transverse(field: &MagneticField) -> Self {
        Self { field: field.clone(), kind: PotentialKind::Transverse }
    }

    pub fn axial(field: &MagneticField) -> Self {
        Self { field: field.clone(), kind: PotentialKind::Axial }
    }

    pub fn zero(dim: usize) -> Self {
        Self::transverse(&MagneticField::zero(dim))
    }

    pub fn dim(&self) -> usize {
        self.field.dim
    }

    /// The field this potential generates.
    pub fn field(&self) -> &MagneticField {
        &self.field
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, PotentialKind::Transverse | PotentialKind::Axial) && self.field.is_zero()
    }

    pub fn gauge_tag(&self) -> String {
        match &self.kind {
            PotentialKind::Transverse => "transverse".into(),
            PotentialKind::Axial => "axial".into(),
            PotentialKind::Transformed(a, r) => format!("{}+d{}", a.gauge_tag(), r.family_tag()),
        }
    }

    /// Polynomial degree of A in x, if polynomial.
    pub fn poly_degree(&self) -> Option<usize> {
        match &self.kind {
            PotentialKind::Transformed(a, r) => Some(a.poly_degree()?.max(r.grad_degree()?)),
            _ => self.field.poly_degree().map(|d| d + 1),
        }
    }

    /// A_j(x), zero-based j.
    pub fn component(&self, j: usize, x: &[f64]) -> f64 {
        let f = &self.field;
        let p = &f.params;
        match &self.kind {
            PotentialKind::Transformed(a, r) => a.component(j, x) + r.gradient(j, x),
            _ if f.dim == 1 || f.family == FieldFamily::Zero => 0.0,
            PotentialKind::Transverse => match f.family {
                FieldFamily::Constant => {
                    0.5 * (0..f.dim).map(|i| f.component(i, j, x) * x[i]).sum::<f64>()
                }
                FieldFamily::Linear => {
                    let phi = 0.5 * p[0] + p[1] * x[0] / 3.0;
                    match j {
                        0 => -x[1] * phi,
                        1 => x[0] * phi,
                        _ => 0.0,
                    }
                }
                FieldFamily::BoundedSmooth => {
                    let a = radial_a(p[0], x[0] * x[0] + x[1] * x[1]).0;
                    match j {
                        0 => -x[1] * a,
                        1 => x[0] * a,
                        _ => 0.0,
                    }
                }
                FieldFamily::Zero => 0.0,
            },
            PotentialKind::Axial => match f.family {
                FieldFamily::Constant => {
                    -(j + 1..f.dim).map(|k| f.component(j, k, x) * x[k]).sum::<f64>()
                }
                FieldFamily::Linear if j == 0 => -(p[0] + p[1] * x[0]) * x[1],
                FieldFamily::BoundedSmooth if j == 0 => {
                    let c = (1.0 + x[0] * x[0]).sqrt();
                    -p[0] / c * (x[1] / c).atan()
                }
                _ => 0.0,
            },
        }
    }

    /// ∂_k A_j(x), zero-based indices.
    pub fn gradient(&self, j: usize, k: usize, x: &[f64]) -> f64 {
        let f = &self.field;
        let p = &f.params;
        match &self.kind {
            PotentialKind::Transformed(a, r) => a.gradient(j, k, x) + r.hessian(j, k, x),
            _ if f.dim == 1 || f.family == FieldFamily::Zero => 0.0,
            PotentialKind::Transverse => match f.family {
                FieldFamily::Constant => 0.5 * f.component(k, j, x),
                FieldFamily::Linear => {
                    let phi = 0.5 * p[0] + p[1] * x[0] / 3.0;
                    match (j, k) {
                        (0, 0) => -x[1] * p[1] / 3.0,
                        (0, 1) => -phi,
                        (1, 0) => phi + x[0] * p[1] / 3.0,
                        _ => 0.0,
                    }
                }
                FieldFamily::BoundedSmooth => {
                    let (a, da) = radial_a(p[0], x[0] * x[0] + x[1] * x[1]);
                    if k > 1 {
                        return 0.0;
                    }
                    match j {
                        0 => -(if k == 1 { a } else { 0.0 }) - x[1] * da * 2.0 * x[k],
                        1 => (if k == 0 { a } else { 0.0 }) + x[0] * da * 2.0 * x[k],
                        _ => 0.0,
                    }
                }
                FieldFamily::Zero => 0.0,
            },
            PotentialKind::Axial => match f.family {
                FieldFamily::Constant => {
                    if k > j {
                        -f.component(j, k, x)
                    } else {
                        0.0
                    }
                }
                FieldFamily::Linear => match (j, k) {
                    (0, 0) => -p[1] * x[1],
                    (0, 1) => -(p[0] + p[1] * x[0]),
                    _ => 0.0,
                },
                FieldFamily::BoundedSmooth => {
                    let c2 = 1.0 + x[0] * x[0];
                    let c = c2.sqrt();
                    match (j, k) {
                        (0, 0) => {
                            p[0] * x[0]
                                * ((x[1] / c).atan() / (c2 * c) + x[1] / (c2 * (c2 + x[1] * x[1])))
                        }
                        (0, 1) => -p[0] / (c2 + x[1] * x[1]),
                        _ => 0.0,
                    }
                }
                FieldFamily::Zero => 0.0,
            },
        }
    }

    /// (∂_j A_k − ∂_k A_j)(x) from the analytic gradients.
    pub fn curl(&self, j: usize, k: usize, x: &[f64]) -> f64 {
        self.gradient(k, j, x) - self.gradient(j, k, x)
    }

    /// Circulation with the cheapest exact rule for polynomial potentials and
    /// a length-dependent order otherwise; gauge terms dρ contribute ρ(y) − ρ(x) exactly.
    pub fn circulation(&self, x: &[f64], y: &[f64]) -> f64 {
        if let PotentialKind::Transformed(a, r) = &self.kind {
            return a.circulation(x, y) + r.value(y) - r.value(x);
        }
        let (order, pieces) = match self.poly_degree() {
            Some(d) => (exact_order(d), 1),
            None => segment_order(x, y),
        };
        if pieces == 1 {
            return circulation_raw(self, x, y, order);
        }
        let n = x.len();
        let (mut p, mut q) = ([0.0; 3], [0.0; 3]);
        p[..n].copy_from_slice(x);
        let mut s = 0.0;
        for k in 1..=pieces {
            let t = k as f64 / pieces as f64;
            for i in 0..n {
                q[i] = x[i] + t * (y[i] - x[i]);
            }
            s += circulation_raw(self, &p[..n], &q[..n], order);
            p = q;
        }
        s
    }
}

/// Gauss–Legendre order and piece count for a non-polynomial potential along
/// a segment. The bounded-smooth family is analytic within distance 1 of the
/// real domain, so short segments converge fast; longer ones are cut into
/// pieces of length at most 4, where order 20 is good to about 1e-10.
fn segment_order(x: &[f64], y: &[f64]) -> (usize, usize) {
    let len = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    match len {
        l if l <= 0.25 => (6, 1),
        l if l <= 1.0 => (10, 1),
        l if l <= 4.0 => (20, 1),
        l => (20, (l / 4.0).ceil() as usize),
    }
}

/// a(q) = b₀ ln(1+q)/(2q) and its derivative in q.
fn radial_a(b0: f64, q: f64) -> (f64, f64) {
    if q < 1e-3 {
        let a = 0.5 * b0 * (1.0 - q / 2.0 + q * q / 3.0 - q * q * q / 4.0 + q.powi(4) / 5.0);
        let da = 0.5 * b0 * (-0.5 + 2.0 * q / 3.0 - 0.75 * q * q + 0.8 * q * q * q);
        (a, da)
    } else {
        let l = q.ln_1p();
        (0.5 * b0 * l / q, 0.5 * b0 * (q / (1.0 + q) - l) / (q * q))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn circulation_raw(a: &VectorPotential, x: &[f64], y: &[f64], order: usize) -> f64 {
    let n = x.len();
    if a.is_zero() {
        return 0.0;
    }
    let rule = legendre01(order);
    let mut d = [0.0; 3];
    for i in 0..n {
        d[i] = y[i] - x[i];
    }
    // Transverse bounded-smooth: A(p)·d = a(|p|²)(p₁d₂ − p₂d₁), and the cross
    // term is constant along the segment.
    if n >= 2 && matches!(a.kind, PotentialKind::Transverse) && a.field.family == FieldFamily::BoundedSmooth {
        let cross = x[0] * y[1] - x[1] * y[0];
        if cross == 0.0 {
            return 0.0;
        }
        let b0 = a.field.params[0];
        let s: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(t, w)| {
                let (p0, p1) = (x[0] + t * d[0], x[1] + t * d[1]);
                w * radial_a(b0, p0 * p0 + p1 * p1).0
            })
            .sum();
        return cross * s;
    }
    let mut p = [0.0; 3];
    let mut s = 0.0;
    for (t, w) in rule.nodes.iter().zip(&rule.weights) {
        for i in 0..n {
            p[i] = x[i] + t * d[i];
        }
        let mut dotp = 0.0;
        for i in 0..n {
            if d[i] != 0.0 {
                dotp += a.component(i, &p[..n]) * d[i];
            }
        }
        s += w * dotp;
    }
    s
}

/// Γ^A[x, y] = ∫₀¹ A(x + s(y−x))·(y−x) ds by Gauss–Legendre of the given order.
pub fn circulation_segment(a: &VectorPotential, x: &[f64], y: &[f64], order: usize) -> Result<f64> {
    dim_check("circulation start", x.len(), a.dim())?;
    dim_check("circulation end", y.len(), a.dim())?;
    if order < 2 {
        return Err(Error::Input(format!("quadrature order {order} < 2")));
    }
    Ok(circulation_raw(a, x, y, order))
}

/// Γ^B⟨a,b,c⟩ = Σ_jk (b−a)_j (c−b)_k ∫∫ μ B_jk(a + μ(b−a) + μν(c−b)) dμ dν.
pub fn flux_triangle(b: &MagneticField, a: &[f64], bb: &[f64], c: &[f64], order: usize) -> Result<f64> {
    let n = b.dim();
    dim_check("triangle vertex a", a.len(), n)?;
    dim_check("triangle vertex b", bb.len(), n)?;
    dim_check("triangle vertex c", c.len(), n)?;
    if order < 2 {
        return Err(Error::Input(format!("quadrature order {order} < 2")));
    }
    Ok(flux_raw(b, a, bb, c, order))
}

/// Flux with the cheapest exact order for polynomial fields (closed form for
/// constant ones), `order` otherwise.
pub fn flux_auto(b: &MagneticField, a: &[f64], bb: &[f64], c: &[f64], order: usize) -> f64 {
    let o = b.poly_degree().map(|d| exact_order(d + 1)).unwrap_or(order);
    flux_raw(b, a, bb, c, o)
}

fn flux_raw(b: &MagneticField, a: &[f64], bb: &[f64], c: &[f64], order: usize) -> f64 {
    let n = b.dim();
    if n == 1 || b.is_zero() {
        return 0.0;
    }
    let u: Vec<f64> = (0..n).map(|i| bb[i] - a[i]).collect();
    let v: Vec<f64> = (0..n).map(|i| c[i] - bb[i]).collect();
    // Only pairs j<k are needed: B_jk u_j v_k + B_kj u_k v_j = B_jk (u_j v_k − u_k v_j).
    let mut wedge = Vec::new();
    for j in 0..n {
        for k in j + 1..n {
            let w = u[j] * v[k] - u[k] * v[j];
            if w != 0.0 {
                wedge.push((j, k, w));
            }
        }
    }
    if wedge.is_empty() {
        return 0.0;
    }
    if b.family() == FieldFamily::Constant {
        return 0.5 * wedge.iter().map(|&(j, k, w)| w * b.component(j, k, a)).sum::<f64>();
    }
    let rule = legendre01(order);
    let mut p = vec![0.0; n];
    let mut s = 0.0;
    for (mu, wm) in rule.nodes.iter().zip(&rule.weights) {
        for (nu, wn) in rule.nodes.iter().zip(&rule.weights) {
            for i in 0..n {
                p[i] = a[i] + mu * u[i] + mu * nu * v[i];
            }
            let f: f64 = wedge.iter().map(|&(j, k, w)| w * b.component(j, k, &p)).sum();
            s += wm * wn * mu * f;
        }
    }
    s
}

/// A′ = A + dρ. A′ reports the same magnetic field as A.
pub fn gauge_transform(a: &VectorPotential, rho: &GaugeFunction) -> Result<VectorPotential> {
    dim_check("gauge function", rho.dim(), a.dim())?;
    Ok(VectorPotential {
        field: a.field.clone(),
        kind: PotentialKind::Transformed(Box::new(a.clone()), rho.clone()),
    })
}

/// σ(Y, Z) = z·η − y·ζ.
pub fn sigma(y: &PhaseSpacePoint, z: &PhaseSpacePoint) -> f64 {
    dot(&z.x, &y.xi) - dot(&y.x, &z.xi)
}

/// σ^B_base(Y, Z) = σ(Y, Z) + Σ_jk B_jk(base) y_j z_k.
pub fn sigma_b(b: &MagneticField, base: &[f64], y: &PhaseSpacePoint, z: &PhaseSpacePoint) -> Result<f64> {
    let n = b.dim();
    dim_check("sigma_B base", base.len(), n)?;
    dim_check("sigma_B Y", y.dim(), n)?;
    dim_check("sigma_B Z", z.dim(), n)?;
    let mut s = sigma(y, z);
    for j in 0..n {
        for k in 0..n {
            s += b.component(j, k, base) * y.x[j] * z.x[k];
        }
    }
    Ok(s)
}

/// Something with first partial derivatives on phase space.
pub trait PhaseFunction {
    fn dim(&self) -> usize;
    fn value(&self, x: &PhaseSpacePoint) -> Result<Complex64>;
    /// (∂_x f, ∂_ξ f) at X.
    fn partials(&self, x: &PhaseSpacePoint) -> Result<(Vec<Complex64>, Vec<Complex64>)>;
}

/// {f,g}^B(X) = Σ_j(∂_{ξ_j}f ∂_{x_j}g − ∂_{ξ_j}g ∂_{x_j}f) + Σ_jk B_jk(x) ∂_{ξ_j}f ∂_{ξ_k}g.
pub fn poisson_bracket<F, G>(b: &MagneticField, f: &F, g: &G, x: &PhaseSpacePoint) -> Result<Complex64>
where
    F: PhaseFunction + ?Sized,
    G: PhaseFunction + ?Sized,
{
    let n = b.dim();
    dim_check("bracket f", f.dim(), n)?;
    dim_check("bracket g", g.dim(), n)?;
    dim_check("bracket point", x.dim(), n)?;
    let (fx, fxi) = f.partials(x)?;
    let (gx, gxi) = g.partials(x)?;
    Ok(bracket_from_partials(b, &x.x, &fx, &fxi, &gx, &gxi))
}

pub(crate) fn bracket_from_partials(
    b: &MagneticField,
    x: &[f64],
    fx: &[Complex64],
    fxi: &[Complex64],
    gx: &[Complex64],
    gxi: &[Complex64],
) -> Complex64 {
    let n = b.dim();
    let mut s = Complex64::new(0.0, 0.0);
    for j in 0..n {
        s += fxi[j] * gx[j] - gxi[j] * fx[j];
        for k in 0..n {
            let bjk = b.component(j, k, x);
            if bjk != 0.0 {
                s += fxi[j] * gxi[k] * bjk;
            }
        }
    }
    s
}

/// Same bracket with all partials from central differences of the values.
pub fn poisson_bracket_fd<F, G>(
    b: &MagneticField,
    f: &F,
    g: &G,
    x: &PhaseSpacePoint,
    step: f64,
) -> Result<Complex64>
where
    F: PhaseFunction + ?Sized,
    G: PhaseFunction + ?Sized,
{
    let n = b.dim();
    dim_check("bracket point", x.dim(), n)?;
    let (fx, fxi) = fd_partials(f, x, step)?;
    let (gx, gxi) = fd_partials(g, x, step)?;
    Ok(bracket_from_partials(b, &x.x, &fx, &fxi, &gx, &gxi))
}

/// Central-difference partials of any phase-space function.
pub fn fd_partials<F: PhaseFunction + ?Sized>(
    f: &F,
    x: &PhaseSpacePoint,
    step: f64,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let n = x.dim();
    let mut dx = Vec::with_capacity(n);
    let mut dxi = Vec::with_capacity(n);
    for j in 0..n {
        let mut p = x.clone();
        let mut m = x.clone();
        p.x[j] += step;
        m.x[j] -= step;
        dx.push((f.value(&p)? - f.value(&m)?) / (2.0 * step));
    }
    for j in 0..n {
        let mut p = x.clone();
        let mut m = x.clone();
        p.xi[j] += step;
        m.xi[j] -= step;
        dxi.push((f.value(&p)? - f.value(&m)?) / (2.0 * step));
    }
    Ok((dx, dxi))
}

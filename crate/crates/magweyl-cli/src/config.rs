//! Experiment configuration: one JSON document per experiment.

use std::collections::BTreeMap;

use magweyl::coherent::FiducialVector;
use magweyl::geometry::{gauge_transform, FieldFamily, GaugeFunction, MagneticField, PhaseSpacePoint, VectorPotential};
use magweyl::hilbert::PositionGrid;
use magweyl::symbol::ClosedSymbol;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    FluxCheck,
    GaugeCheck,
    Spectrum,
    Identity,
    OverlapSweep,
    BerezinSweep,
    PullbackSweep,
    AxiomsSweep,
    StarCrosscheck,
    StateContinuity,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Self::FluxCheck,
        Self::GaugeCheck,
        Self::Spectrum,
        Self::Identity,
        Self::OverlapSweep,
        Self::BerezinSweep,
        Self::PullbackSweep,
        Self::AxiomsSweep,
        Self::StarCrosscheck,
        Self::StateContinuity,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Self::FluxCheck => "flux-check",
            Self::GaugeCheck => "gauge-check",
            Self::Spectrum => "spectrum",
            Self::Identity => "identity",
            Self::OverlapSweep => "overlap-sweep",
            Self::BerezinSweep => "berezin-sweep",
            Self::PullbackSweep => "pullback-sweep",
            Self::AxiomsSweep => "axioms-sweep",
            Self::StarCrosscheck => "star-crosscheck",
            Self::StateContinuity => "state-continuity",
        }
    }

    pub fn parse(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.tag() == tag)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub family: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeSpec {
    /// `transverse` or `axial`.
    #[serde(default = "default_potential")]
    pub potential: String,
    /// Gauge function added to the potential, A + dρ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<GaugeFunctionSpec>,
}

fn default_potential() -> String {
    "transverse".into()
}

impl Default for GaugeSpec {
    fn default() -> Self {
        Self { potential: default_potential(), transform: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeFunctionSpec {
    /// `linear`, `quadratic` or `oscillatory`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub q: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub c: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amp: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub k: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub half_width: f64,
    pub points: usize,
    /// Scale the spacing with ℏ (points per axis grow like 1/ℏ).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub adapt: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

/// A closed-form symbol. `kind` is one of gaussian, isotropic, monomial,
/// harmonic (|x|² + |ξ|²), kinetic (|ξ|²), mollified-one, sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub x: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub xi: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sx: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sxi: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alpha: Vec<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub beta: Vec<u32>,
    /// Complex coefficient (re, im); defaults to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeff: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<SymbolSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusSpec {
    pub constant: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub field: FieldSpec,
    #[serde(default)]
    pub gauge: GaugeSpec,
    #[serde(default = "default_fiducial")]
    pub fiducial: String,
    pub grid: GridSpec,
    pub hbar: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub symbols: Vec<SymbolSpec>,
    /// Base points Z (berezin, pullback, state-continuity, identity).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<PointSpec>,
    /// Point pairs (overlap-sweep) or tangent pairs (pullback-sweep).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<[PointSpec; 2]>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
    pub output: String,
    #[serde(default)]
    pub seed: u64,
    /// Number of random triangles (flux-check).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Number of eigenvalues (spectrum).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    /// Record the magnetic norm of the first symbol alongside the axioms defects.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub rieffel: bool,
    /// Symbol family g_ℏ = (1 + drift·ℏ) g (state-continuity).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulus: Option<ModulusSpec>,
}

fn default_fiducial() -> String {
    "gaussian".into()
}

/// A config turned into library objects.
#[derive(Debug, Clone)]
pub struct Setup {
    pub experiment: Experiment,
    pub field: MagneticField,
    pub potential: VectorPotential,
    /// Potential before the optional gauge transform.
    pub base_potential: VectorPotential,
    pub transform: Option<GaugeFunction>,
    pub fiducial: FiducialVector,
    pub grid: PositionGrid,
    pub adapt: bool,
    pub ladder: Vec<f64>,
    pub symbols: Vec<ClosedSymbol>,
    /// Symbol kinds as configured, used for references that depend on the shape.
    pub symbol_kinds: Vec<String>,
    pub points: Vec<PhaseSpacePoint>,
    pub pairs: Vec<(PhaseSpacePoint, PhaseSpacePoint)>,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: u64,
    pub samples: usize,
    pub levels: usize,
    pub rieffel: bool,
    pub drift: f64,
    pub modulus: ModulusSpec,
}

/// Parses and validates a config document. `sweep` requires a strictly
/// decreasing ladder.
pub fn load(text: &str, sweep: bool) -> Result<(ExperimentConfig, Setup), CliError> {
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Validation {
        field: json_field(&e.to_string()),
        line: Some(e.line()),
        msg: e.to_string(),
    })?;
    let setup = validate(&cfg, text, sweep)?;
    Ok((cfg, setup))
}

fn json_field(msg: &str) -> String {
    msg.split('`').nth(1).unwrap_or("document").to_string()
}

/// Line of the first occurrence of `"key"` in the source, 1-based.
pub(crate) fn line_of(text: &str, key: &str) -> Option<usize> {
    let pat = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&pat)).map(|i| i + 1)
}

struct V<'a> {
    text: &'a str,
}

impl V<'_> {
    fn err(&self, field: &str, msg: impl Into<String>) -> CliError {
        let last = field.rsplit('.').next().unwrap_or(field);
        let key = last.split('[').next().unwrap_or(last);
        CliError::Validation { field: field.into(), line: line_of(self.text, key), msg: msg.into() }
    }
}

pub fn validate(cfg: &ExperimentConfig, text: &str, sweep: bool) -> Result<Setup, CliError> {
    let v = V { text };
    let experiment = Experiment::parse(&cfg.experiment)
        .ok_or_else(|| v.err("experiment", format!("unknown experiment `{}`", cfg.experiment)))?;

    let g = &cfg.grid;
    let grid = PositionGrid::new(g.dim, g.half_width, g.points).map_err(|e| v.err("grid", e.to_string()))?;
    let n = g.dim;

    let family = FieldFamily::parse(&cfg.field.family).map_err(|e| v.err("field.family", e.to_string()))?;
    let field = MagneticField::new(n, family, &cfg.field.params).map_err(|e| v.err("field.params", e.to_string()))?;
    let base_potential = match cfg.gauge.potential.as_str() {
        "transverse" => VectorPotential::transverse(&field),
        "axial" => VectorPotential::axial(&field),
        other => return Err(v.err("gauge.potential", format!("unknown potential `{other}`"))),
    };
    let transform = cfg.gauge.transform.as_ref().map(|t| gauge_function(t, n, &v)).transpose()?;
    let potential = match &transform {
        Some(rho) => gauge_transform(&base_potential, rho).map_err(|e| v.err("gauge.transform", e.to_string()))?,
        None => base_potential.clone(),
    };
    let fiducial = FiducialVector::parse(n, &cfg.fiducial).map_err(|e| v.err("fiducial", e.to_string()))?;

    let ladder = cfg.hbar.clone();
    if ladder.is_empty() {
        return Err(v.err("hbar", "ladder is empty"));
    }
    if let Some(h) = ladder.iter().find(|h| !(h.is_finite() && **h > 0.0 && **h <= 1.0)) {
        return Err(v.err("hbar", format!("ℏ = {h} outside (0, 1]")));
    }
    if sweep && ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(v.err("hbar", "sweep ladder must be strictly decreasing"));
    }

    let symbols = cfg
        .symbols
        .iter()
        .enumerate()
        .map(|(i, s)| symbol(s, n).map_err(|m| v.err(&format!("symbols[{i}]"), m)))
        .collect::<Result<Vec<_>, _>>()?;
    let point = |p: &PointSpec, what: &str| {
        PhaseSpacePoint::new(p.x.clone(), p.xi.clone())
            .ok()
            .filter(|q| q.dim() == n)
            .ok_or_else(|| v.err(what, format!("point must have {n} position and {n} momentum coordinates")))
    };
    let points = cfg.points.iter().enumerate().map(|(i, p)| point(p, &format!("points[{i}]"))).collect::<Result<Vec<_>, _>>()?;
    let pairs = cfg
        .pairs
        .iter()
        .enumerate()
        .map(|(i, [p, q])| Ok((point(p, &format!("pairs[{i}]"))?, point(q, &format!("pairs[{i}]"))?)))
        .collect::<Result<Vec<_>, CliError>>()?;

    let known = crate::experiments::check_names(experiment);
    for (k, t) in &cfg.tolerances {
        if !known.contains(&k.as_str()) {
            return Err(v.err(&format!("tolerances.{k}"), format!("no check `{k}` in {} (known: {})", experiment.tag(), known.join(", "))));
        }
        if !(t.is_finite() && *t >= 0.0) {
            return Err(v.err(&format!("tolerances.{k}"), format!("tolerance {t} must be finite and non-negative")));
        }
    }
    let modulus = cfg.modulus.unwrap_or(ModulusSpec { constant: 1.0, exponent: 1.0 });
    if !(modulus.constant > 0.0 && modulus.exponent > 0.0) {
        return Err(v.err("modulus", "constant and exponent must be positive"));
    }
    let setup = Setup {
        experiment,
        field,
        potential,
        base_potential,
        transform,
        fiducial,
        grid,
        adapt: g.adapt,
        ladder,
        symbols,
        symbol_kinds: cfg.symbols.iter().map(|s| s.kind.clone()).collect(),
        points,
        pairs,
        tolerances: cfg.tolerances.clone(),
        seed: cfg.seed,
        samples: cfg.samples.unwrap_or(100),
        levels: cfg.levels.unwrap_or(if n == 1 { 5 } else { 3 }),
        rieffel: cfg.rieffel,
        drift: cfg.drift.unwrap_or(0.0),
        modulus,
    };
    crate::experiments::requirements(&setup).map_err(|(field, msg)| v.err(field, msg))?;
    Ok(setup)
}

fn gauge_function(t: &GaugeFunctionSpec, n: usize, v: &V) -> Result<GaugeFunction, CliError> {
    let field = "gauge.transform";
    let len = |x: &[f64], want: usize, name: &str| {
        if x.len() == want {
            Ok(())
        } else {
            Err(v.err(field, format!("`{name}` needs {want} entries, got {}", x.len())))
        }
    };
    match t.kind.as_str() {
        "linear" => {
            len(&t.c, n, "c")?;
            Ok(GaugeFunction::linear(t.c.clone()))
        }
        "quadratic" => {
            len(&t.q, n * n, "q")?;
            let c = if t.c.is_empty() { vec![0.0; n] } else { t.c.clone() };
            len(&c, n, "c")?;
            GaugeFunction::quadratic(t.q.clone(), c).map_err(|e| v.err(field, e.to_string()))
        }
        "oscillatory" => {
            len(&t.k, n, "k")?;
            let amp = t.amp.ok_or_else(|| v.err(field, "oscillatory gauge needs `amp`"))?;
            Ok(GaugeFunction::oscillatory(amp, t.k.clone()))
        }
        other => Err(v.err(field, format!("unknown gauge function `{other}`"))),
    }
}

pub fn symbol(s: &SymbolSpec, n: usize) -> Result<ClosedSymbol, String> {
    let vec_or = |x: &[f64], d: f64| if x.is_empty() { Ok(vec![d; n]) } else if x.len() == n { Ok(x.to_vec()) } else { Err(format!("expected {n} entries, got {}", x.len())) };
    let center = || -> Result<PhaseSpacePoint, String> {
        PhaseSpacePoint::new(vec_or(&s.x, 0.0)?, vec_or(&s.xi, 0.0)?).map_err(|e| e.to_string())
    };
    let sq = |pick: fn(usize, usize) -> (u32, u32)| -> Result<ClosedSymbol, String> {
        let mut out = ClosedSymbol::zero(n);
        for j in 0..n {
            let (a, b) = pick(j, n);
            let mut alpha = vec![0; n];
            let mut beta = vec![0; n];
            alpha[j] = a;
            beta[j] = b;
            if a > 0 {
                out = out.add(&ClosedSymbol::monomial(&alpha, &vec![0; n]).map_err(|e| e.to_string())?);
            }
            if b > 0 {
                out = out.add(&ClosedSymbol::monomial(&vec![0; n], &beta).map_err(|e| e.to_string())?);
            }
        }
        Ok(out)
    };
    let base = match s.kind.as_str() {
        "gaussian" => ClosedSymbol::gaussian(&center()?, &vec_or(&s.sx, 1.0)?, &vec_or(&s.sxi, 1.0)?, 1.0).map_err(|e| e.to_string())?,
        "isotropic" => ClosedSymbol::isotropic_gaussian(&center()?, s.width.unwrap_or(1.0)).map_err(|e| e.to_string())?,
        "monomial" => {
            let alpha = if s.alpha.is_empty() { vec![0; n] } else { s.alpha.clone() };
            let beta = if s.beta.is_empty() { vec![0; n] } else { s.beta.clone() };
            ClosedSymbol::monomial(&alpha, &beta).map_err(|e| e.to_string())?
        }
        "harmonic" => sq(|_, _| (2, 2))?,
        "kinetic" => sq(|_, _| (0, 2))?,
        "mollified-one" => ClosedSymbol::mollified_one(n, s.width.unwrap_or(400.0)).map_err(|e| e.to_string())?,
        "sum" => {
            if s.terms.is_empty() {
                return Err("sum needs at least one term".into());
            }
            let mut out = ClosedSymbol::zero(n);
            for t in &s.terms {
                out = out.add(&symbol(t, n)?);
            }
            out
        }
        other => return Err(format!("unknown symbol kind `{other}`")),
    };
    if base.dim() != n {
        return Err(format!("symbol dimension {} does not match grid dimension {n}", base.dim()));
    }
    Ok(match s.coeff {
        Some([re, im]) => base.scale(Complex64::new(re, im)),
        None => base,
    })
}

//! Experiment dispatch: one function per experiment tag, evaluated per ℏ rung.

use std::f64::consts::PI;

use magweyl::coherent::{
    berezin_average, coherent_expectation, coherent_vector, pullback_form, resolution_of_identity, transition_probability,
    FiducialKind, PhaseCells, LOCAL_POINT_CAP,
};
use magweyl::geometry::{flux_auto, sigma_b, FieldFamily, GaugeFunction, PhaseSpacePoint};
use magweyl::hilbert::{operator_norm, KernelOperator, PositionGrid, WaveFunction};
use magweyl::moyal::{magnetic_norm, semiclassical_defects, star_direct, star_operator, StarQuadratureConfig};
use magweyl::quantize::{bulk_levels, lowest_eigenvalues, op_a, wrong_op};
use magweyl::symbol::{ClosedSymbol, PhaseLattice, Symbol};
use magweyl::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Experiment, Setup};
use crate::report::{Check, Row, Rule};

/// Check names per experiment; these are the keys accepted under `tolerances`.
pub fn check_names(e: Experiment) -> Vec<&'static str> {
    match e {
        Experiment::FluxCheck => vec!["stokes"],
        Experiment::GaugeCheck => vec!["covariance", "wrong-op"],
        Experiment::Spectrum => vec!["levels"],
        Experiment::Identity => vec!["identity"],
        Experiment::OverlapSweep => vec!["collapse", "monotone", "oracle"],
        Experiment::BerezinSweep => vec!["ratio", "final"],
        Experiment::PullbackSweep => vec!["final", "decreasing"],
        Experiment::AxiomsSweep => vec!["von-neumann", "dirac", "rieffel"],
        Experiment::StarCrosscheck => vec!["routes"],
        Experiment::StateContinuity => vec!["limit", "jumps"],
    }
}

fn pt(x: &[f64], xi: &[f64], n: usize) -> PhaseSpacePoint {
    let take = |v: &[f64]| (0..n).map(|i| v.get(i).copied().unwrap_or(0.0)).collect::<Vec<_>>();
    PhaseSpacePoint { x: take(x), xi: take(xi) }
}

/// The wide Gaussian used when a config names no symbol.
fn test_symbol(n: usize) -> ClosedSymbol {
    ClosedSymbol::gaussian(&pt(&[0.3; 3], &[-0.2; 3], n), &vec![2.0; n], &vec![1.6; n], 1.0).expect("valid widths")
}

fn default_pairs(n: usize) -> Vec<(ClosedSymbol, ClosedSymbol)> {
    let iso = |x: &[f64], xi: &[f64], s: f64| ClosedSymbol::isotropic_gaussian(&pt(x, xi, n), s).expect("valid width");
    let f = ClosedSymbol::gaussian(&pt(&[0.3, -0.2], &[0.1, 0.4], n), &[1.0, 1.2, 1.0][..n], &[0.9, 1.0, 0.9][..n], 1.0)
        .expect("valid widths");
    let g = ClosedSymbol::gaussian(&pt(&[-0.4, 0.1], &[-0.2, 0.0], n), &[1.1, 0.8, 1.1][..n], &[1.0, 1.3, 1.0][..n], 1.0)
        .expect("valid widths")
        .add(
            &ClosedSymbol::gaussian(&pt(&[0.0, 0.5], &[0.3, -0.1], n), &[0.7, 0.9, 0.7][..n], &[1.2, 0.8, 1.2][..n], 0.5)
                .expect("valid widths")
                .scale(Complex64::new(0.0, 1.0)),
        );
    vec![(iso(&[0.3, 0.1], &[-0.2, 0.2], 1.0), iso(&[-0.2, 0.0], &[0.4, -0.1], 1.2)), (f, g)]
}

fn symbols_or_default(s: &Setup) -> Vec<ClosedSymbol> {
    if s.symbols.is_empty() {
        vec![test_symbol(s.grid.dim())]
    } else {
        s.symbols.clone()
    }
}

fn symbol_pairs(s: &Setup) -> Vec<(ClosedSymbol, ClosedSymbol)> {
    if s.symbols.is_empty() {
        default_pairs(s.grid.dim())
    } else {
        s.symbols.chunks(2).map(|c| (c[0].clone(), c[1].clone())).collect()
    }
}

fn gauge_symbols(n: usize) -> Vec<ClosedSymbol> {
    let z = PhaseSpacePoint::zero(n);
    let g0 = ClosedSymbol::isotropic_gaussian(&z, 1.0).expect("valid width");
    let mut off = z.clone();
    off.x[0] = 0.7;
    off.xi[n - 1] = -0.5;
    let g1 = ClosedSymbol::gaussian(&off, &vec![0.8; n], &vec![1.2; n], 1.5).expect("valid widths");
    let mut alpha = vec![0; n];
    let mut beta = vec![0; n];
    alpha[0] = 1;
    beta[n - 1] = 1;
    let poly = ClosedSymbol::monomial(&alpha, &beta).expect("valid monomial").mul(&g0);
    let complex = g1.scale(Complex64::new(0.3, 0.8)).add(&g0);
    vec![g0, g1, poly, complex]
}

fn points_or(s: &Setup, defaults: &[([f64; 2], [f64; 2])]) -> Vec<PhaseSpacePoint> {
    if s.points.is_empty() {
        defaults.iter().map(|(x, xi)| pt(x, xi, s.grid.dim())).collect()
    } else {
        s.points.clone()
    }
}

fn pairs_or(s: &Setup, defaults: &[(([f64; 2], [f64; 2]), ([f64; 2], [f64; 2]))]) -> Vec<(PhaseSpacePoint, PhaseSpacePoint)> {
    let n = s.grid.dim();
    if s.pairs.is_empty() {
        defaults.iter().map(|((a, b), (c, d))| (pt(a, b, n), pt(c, d, n))).collect()
    } else {
        s.pairs.clone()
    }
}

const OVERLAP_PAIRS: [(([f64; 2], [f64; 2]), ([f64; 2], [f64; 2])); 3] = [
    (([0.0, 0.0], [0.0, 0.0]), ([0.4, 0.0], [0.0, 0.3])),
    (([0.2, -0.1], [0.1, 0.0]), ([-0.2, 0.2], [0.3, -0.2])),
    (([-0.3, 0.3], [-0.2, 0.2]), ([0.1, 0.3], [-0.2, -0.3])),
];

const PULLBACK_BASES: [([f64; 2], [f64; 2]); 3] = [([0.5, 0.2], [-0.3, 0.1]), ([-0.4, 0.3], [0.2, -0.2]), ([0.1, -0.5], [0.0, 0.4])];

const PULLBACK_TANGENTS: [(([f64; 2], [f64; 2]), ([f64; 2], [f64; 2])); 3] = [
    (([1.0, 0.0], [0.0, 0.0]), ([0.0, 1.0], [0.5, 0.0])),
    (([1.0, 0.0], [0.0, 0.5]), ([0.0, 1.0], [0.0, 0.0])),
    (([0.5, 0.5], [1.0, 0.0]), ([-0.5, 0.5], [0.0, 0.3])),
];

/// Lattice offsets (position, momentum) from the center of the star-product sample set.
const STAR_OFFSETS: [([i64; 2], [i64; 2]); 9] = [
    ([0, 0], [0, 0]),
    ([1, -1], [1, -1]),
    ([-2, 2], [-2, 2]),
    ([2, 2], [0, -2]),
    ([-1, 0], [2, 1]),
    ([0, 3], [-1, 0]),
    ([-3, 0], [0, 3]),
    ([3, -2], [-3, 0]),
    ([0, 1], [1, 1]),
];

/// Static checks that need more than one field: which experiments need which inputs.
pub fn requirements(s: &Setup) -> std::result::Result<(), (&'static str, String)> {
    let n = s.grid.dim();
    match s.experiment {
        Experiment::GaugeCheck if s.transform.is_none() => {
            Err(("gauge.transform", "gauge-check needs a gauge transform to compare against".into()))
        }
        Experiment::Spectrum => {
            let kind = s.symbol_kinds.first().map(String::as_str).unwrap_or(default_spectrum_kind(s));
            match kind {
                "harmonic" if s.field.is_zero() => Ok(()),
                "kinetic" if n == 2 && s.field.family() == FieldFamily::Constant && s.field.params()[0] != 0.0 => Ok(()),
                _ => Err((
                    "symbols",
                    "spectrum has reference levels for `harmonic` with a zero field and `kinetic` with a constant nonzero field at N = 2".into(),
                )),
            }
        }
        Experiment::BerezinSweep => {
            let g = berezin_symbol(s);
            if g.terms.iter().any(|t| t.x.iter().chain(&t.xi).any(|f| f.pow > 0)) {
                Err(("symbols", "berezin-sweep needs a bounded symbol (Gaussian-family terms without polynomial factors)".into()))
            } else {
                Ok(())
            }
        }
        Experiment::AxiomsSweep | Experiment::StarCrosscheck if s.symbols.len() % 2 == 1 => {
            Err(("symbols", "symbols are read in (f, g) pairs; an even count is needed".into()))
        }
        Experiment::StarCrosscheck if n > 2 => Err(("grid", "star-crosscheck is limited to N <= 2".into())),
        _ => Ok(()),
    }
}

fn default_spectrum_kind(s: &Setup) -> &'static str {
    if s.field.is_zero() {
        "harmonic"
    } else {
        "kinetic"
    }
}

fn tol(s: &Setup, name: &str, default: f64) -> f64 {
    s.tolerances.get(name).copied().unwrap_or(default)
}

/// Sup bound of a bounded Gaussian-family symbol.
fn sup_bound(g: &ClosedSymbol) -> f64 {
    g.terms.iter().map(|t| t.coeff.norm()).sum()
}

/// The checks for a setup with their tolerances. Limit checks only exist in sweeps.
pub fn checks(s: &Setup, sweep: bool) -> Vec<Check> {
    let mut out = Vec::new();
    match s.experiment {
        Experiment::FluxCheck => out.push(Check::new("stokes", &["stokes"], Rule::AbsError, tol(s, "stokes", 1e-8))),
        Experiment::GaugeCheck => {
            out.push(Check::new("covariance", &["op_a"], Rule::AbsError, tol(s, "covariance", 1e-8)));
            if !matches!(s.transform, Some(GaugeFunction::Linear { .. })) {
                out.push(Check::new("wrong-op", &["wrong_op"], Rule::MinMeasured, tol(s, "wrong-op", 1e-2)));
            }
        }
        Experiment::Spectrum => {
            let default = if s.grid.dim() == 1 { 5e-3 } else { 2e-2 };
            out.push(Check::new("levels", &["levels"], Rule::Relative, tol(s, "levels", default)));
        }
        Experiment::Identity => out.push(Check::new("identity", &["identity"], Rule::AbsError, tol(s, "identity", 1e-3))),
        Experiment::OverlapSweep => {
            out.push(Check::new("collapse", &["p_qu"], Rule::FinalAbsError, tol(s, "collapse", 1e-3)));
            if s.ladder.len() > 1 {
                out.push(Check::new("monotone", &["p_qu"], Rule::MeasuredDecreasing, tol(s, "monotone", 0.0)));
            }
            if has_overlap_oracle(s) {
                out.push(Check::new("oracle", &["oracle"], Rule::AbsError, tol(s, "oracle", 1e-5)));
            }
        }
        Experiment::BerezinSweep => {
            let bound = sup_bound(&berezin_symbol(s));
            if s.ladder.len() > 1 {
                out.push(Check::new("ratio", &["berezin"], Rule::ErrorRatio, tol(s, "ratio", 0.7 * 1.05)));
            }
            out.push(Check::new("final", &["berezin"], Rule::FinalAbsError, tol(s, "final", 2e-2) * bound));
        }
        Experiment::PullbackSweep => {
            out.push(Check::new("final", &["pullback"], Rule::FinalScaled, tol(s, "final", 0.05)));
            if s.ladder.len() > 1 {
                out.push(Check::new("decreasing", &["pullback"], Rule::ErrorDecreasing, tol(s, "decreasing", 0.0)));
            }
        }
        Experiment::AxiomsSweep => {
            out.push(Check::new("von-neumann", &["von_neumann"], Rule::FinalFraction, tol(s, "von-neumann", 0.1)));
            out.push(Check::new("dirac", &["dirac"], Rule::FinalFraction, tol(s, "dirac", 0.1)));
            if s.rieffel && s.ladder.len() > 1 {
                out.push(Check::new("rieffel", &["norm"], Rule::AdjacentVariation, tol(s, "rieffel", 0.05)));
            }
        }
        Experiment::StarCrosscheck => out.push(Check::new("routes", &["re", "im"], Rule::ComplexModulus, tol(s, "routes", 1e-3))),
        Experiment::StateContinuity => {
            if sweep {
                out.push(Check::new("limit", &["expectation"], Rule::Limit, tol(s, "limit", 1e-3)));
            }
            if s.ladder.len() > 1 {
                let m = s.modulus;
                out.push(Check::new(
                    "jumps",
                    &["expectation"],
                    Rule::JumpBudget { constant: m.constant, exponent: m.exponent },
                    tol(s, "jumps", 1.0),
                ));
            }
        }
    }
    out
}

fn has_overlap_oracle(s: &Setup) -> bool {
    s.fiducial.kind() == FiducialKind::Gaussian
        && (s.field.is_zero() || (s.grid.dim() == 2 && s.field.family() == FieldFamily::Constant))
}

/// The ℏ-dependent grid: the configured grid, or with `adapt` the same box
/// with spacing proportional to ℏ.
fn grid_at(s: &Setup, hbar: f64) -> Result<PositionGrid> {
    if !s.adapt {
        return Ok(s.grid);
    }
    let m = s.grid.points_per_axis() as f64 / hbar;
    let m = 2 * (m / 2.0).ceil() as usize;
    PositionGrid::new(s.grid.dim(), s.grid.half_width(), m)
}

/// A grid around a set of phase-space points that holds coherent vectors
/// centered there and resolves their momenta, including the potential.
fn coherent_grid(s: &Setup, hbar: f64, pts: &[&PhaseSpacePoint]) -> Result<PositionGrid> {
    let n = s.grid.dim();
    let sq = hbar.sqrt();
    let rx = pts.iter().flat_map(|p| p.x.iter()).fold(0.0f64, |m, t| m.max(t.abs()));
    let rxi = pts.iter().flat_map(|p| p.xi.iter()).fold(0.0f64, |m, t| m.max(t.abs()));
    let l = rx + 0.5 + 4.0 * sq * s.fiducial.radius() / 5.5;
    let corners = 1usize << n;
    let amax = (0..corners)
        .flat_map(|c| {
            let x: Vec<f64> = (0..n).map(|a| if c >> a & 1 == 1 { l } else { -l }).collect();
            (0..n).map(move |j| (j, x.clone()))
        })
        .map(|(j, x)| s.potential.component(j, &x).abs())
        .fold(0.0f64, f64::max);
    let h = PI * hbar / (rxi + amax + 1.0 + 8.0 * sq);
    PositionGrid::with_cap(n, l, 2 * (l / h).ceil() as usize, LOCAL_POINT_CAP)
}

/// Rows for one rung of the ladder.
pub fn rung(s: &Setup, hbar: f64) -> Result<Vec<Row>> {
    match s.experiment {
        Experiment::FluxCheck => flux_check(s, hbar),
        Experiment::GaugeCheck => gauge_check(s, hbar),
        Experiment::Spectrum => spectrum(s, hbar),
        Experiment::Identity => identity(s, hbar),
        Experiment::OverlapSweep => overlap(s, hbar),
        Experiment::BerezinSweep => berezin(s, hbar),
        Experiment::PullbackSweep => pullback(s, hbar),
        Experiment::AxiomsSweep => axioms(s, hbar),
        Experiment::StarCrosscheck => star(s, hbar),
        Experiment::StateContinuity => continuity(s, hbar),
    }
}

/// Random triangles from the config seed; cycle circulation against the flux.
fn flux_check(s: &Setup, hbar: f64) -> Result<Vec<Row>> {
    let n = s.grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut vertex = || (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<f64>>();
    let a = &s.potential;
    Ok((0..s.samples)
        .map(|i| {
            let (p, q, r) = (vertex(), vertex(), vertex());
            let cycle = a.circulation(&p, &q) + a.circulation(&q, &r) + a.circulation(&r, &p);
            let flux = flux_auto(&s.field, &p, &q, &r, 32);
            Row::new("stokes", &format!("t{i}"), hbar, cycle, flux)
        })
        .collect())
}

/// U S U* with U multiplication by e^{iρ/ℏ}.
fn conjugate(k: &KernelOperator, rho: &GaugeFunction, hbar: f64) -> KernelOperator {
    let g = k.grid;
    let n = g.len();
    let ph: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(1.0, rho.value(&g.point(i)) / hbar)).collect();
    let mut out = k.clone();
    for i in 0..n {
        for j in 0..n {
            out.kernel[i * n + j] *= ph[i] * ph[j].conj();
        }
    }
    out
}

fn relative_defect(moved: &KernelOperator, base: &KernelOperator, rho: &GaugeFunction, hbar: f64) -> Result<f64> {
    let scale = operator_norm(base, 1e-10)?;
    let d = moved.axpy(Complex64::new(-1.0, 0.0), &conjugate(base, rho, hbar))?;
    Ok(operator_norm(&d, 1e-10)? / scale)
}

fn gauge_check(s: &Setup, hbar: f64) -> Result<Vec<Row>> {
    let rho = s.transform.as_ref().ok_or_else(|| Error::Config("gauge-check needs a gauge transform".into()))?;
    let grid = grid_at(s, hbar)?;
    let syms = if s.symbols.is_empty() { gauge_symbols(s.grid.dim()) } else { s.symbols.clone() };
    let mut rows = Vec::new();
    for (i, f) in syms.into_iter().enumerate() {
        let f = Symbol::Closed(f);
        let label = format!("f{i}");
        let d = relative_defect(&op_a(&f, &s.potential, hbar, &grid)?, &op_a(&f, &s.base_potential, hbar, &grid)?, rho, hbar)?;
        rows.push(Row::new("op_a", &label, hbar, d, 0.0));
        if !matches!(rho, GaugeFunction::Linear { .. }) {
            let w = relative_defect(&wrong_op(&f, &s.potential, hbar, &grid)?, &wrong_op(&f, &s.base_potential, hbar, &grid)?, rho, hbar)?;
            rows.push(Row::new("wrong_op", &label, hbar, w, 0.0));
        }
    }
    Ok(rows)
}

/// ℏ(2|k| + N) with multiplicity C(k+N−1, N−1), sorted.
fn oscillator_levels(n: usize, hbar: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0usize;
    while out.len() < count {
        let mult = (1..n).fold(1usize, |m, j| m * (k + j) / j);
        for _ in 0..mult {
            out.push(hbar * (2 * k + n) as f64);
        }
        k += 1;
    }
    out.truncate(count);
    out
}

fn spectrum(s: &Setup, hbar: f64) -> Result<Vec<Row>> {
    let n = s.grid.dim();
    let grid = grid_at(s, hbar)?;
    let kind = s.symbol_kinds.first().map(String::as_str).unwrap_or(default_spectrum_kind(s));
    let f = match s.symbols.first() {
        Some(f) => f.clone(),
        None => crate::config::symbol(
            &crate::config::SymbolSpec {
                kind: kind.into(),
                x: vec![],
                xi: vec![],
                sx: vec![],
                sxi: vec![],
                width: None,
                alpha: vec![],
                beta: vec![],
                coeff: None,
                terms: vec![],
            },
            n,
        )
        .map_err(Error::Config)?,
    };
    let op = op_a(&Symbol::Closed(f), &s.potential, hbar, &grid)?;
    let (levels, reference) = if kind == "harmonic" {
        (lowest_eigenvalues(&op, s.levels)?, oscillator_levels(n, hbar, s.levels))
    } else {
        let b = s.field.params()[0].abs();
        let r = (0..s.levels).map(|k| hbar * b * (2 * k + 1) as f64).collect();
        (bulk_levels(&op, &grid, s.levels, 350, 2e-2)?, r)
    };
    Ok(levels.iter().zip(&reference).enumerate().map(|(k, (m, r))| Row::new("levels", &format!("n{k}"), hbar, *m, *r)).collect())
}

/// A normalized Gaussian packet of width 1 at the given phase-space point.
fn packet(grid: &PositionGrid, p: &PhaseSpacePoint) -> Result<WaveFunction> {
    WaveFunction::from_fn(*grid, |x| {
        let r2: f64 = x.iter().zip(&p.x).map(|(a, b)| (a - b) * (a - b)).sum();
        let ph: f64 = x.iter().zip(&p.xi).map(|(a, b)| a * b).sum();
        Complex64::from_polar((-r2 / 2.0).exp(), ph)
    })
    .normalized()
}

fn identity(s: &Setup, hbar: f64) -> Result<Vec<Row>> {
    let grid = grid_at(s, hbar)?;
    let points = points_or(s, &[([0.0, 0.0], [0.0, 0.0])]);
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let u = packet(&grid, p)?;
            let r = resolution_of_identity(&u, &s.fiducial, &s.potential, hbar, &PhaseCells::default())?;
            Ok(Row::new("identity", &format!("u{i}"), hbar, r, 1.0))
        })
        .collect()
}

/// |⟨v(Y), v(Z)⟩|² for the Gaussian fiducial in a constant field b (N = 2) or none.
fn gaussian_overlap(b: f64, hbar: f64, y: &PhaseSpacePoint, z: &PhaseSpacePoint) -> f64 {
    let n = y.dim();
    let d: Vec<f64> = (0..n).map(|a| y.x[a] - z.x[a]).collect();
    let mut k: Vec<f64> = (0..n).map(|a| z.xi[a] - y.xi[a]).collect();
    if n == 2 {
        k[0] += 0.5 * b * d[1];
        k[1] -= 0.5 * b * d[0];
    }
    (-d.iter().chain(&k).map(|t| t * t).sum::<f64>() / (2.0 * hbar)).exp()
}

fn overlap(s: &Setup, hbar: f64) -> Result<Vec<Row>> {
    let oracle = has_overlap_oracle(s);
    let b = if s.field.is_zero() { 0.0 } else { s.field.params()[0] };
    let mut rows = Vec::new();
    for (i, (z, y)) in pairs_or(s, &OVERLAP_PAIRS).iter().enumerate() {
        let grid = coherent_grid(s, hbar, &[z, y])?;
        let cz = coherent_vector(&s.fiducial, &s.potential, hbar, z, &grid)?;
        let cy = coherent_vector(&s.fiducial, &s.potential, hbar, y, &grid)?;
        let p = transition_probability(&cz, &cy)?;
        let label = format!("pair{i}");
        let classical = if z == y { 1.0 } else { 0.0 };
        rows.push(Row::new("p_qu", &label, hbar, p, classical));
        if oracle {
            rows.push(Row::new("oracle", &label, hbar, p, gaussian_overlap(b, hbar, y, z)));
        }
    }
    Ok(rows)
}

/// The configured symbol, or e^{−|Y|²/8}.
fn berezin_symbol(s: &Setup) -> ClosedSymbol {
    match s.symbols.first() {
        Some(g) => g.clone(),
        None => ClosedSymbol::isotropic_gaussian(&PhaseSpacePoint::zero(s.grid.dim()), 2.0).expect("valid width"),
    }
}

fn berezin(s: &Setup, hbar: f64) -> Result<Vec<Row>> {
    let g = berezin_symbol(s);
    let bound = sup_bound(&g);
    let eval = |p: &PhaseSpacePoint| g.eval(p).re;
    points_or(s, &[([0.2, -0.1], [0.3, 0.4])])
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let val = berezin_average(&eval, bound, &s.fiducial, &s.potential, hbar, z, &PhaseCells::default())?;
            Ok(Row::new("berezin", &format!("z{i}"), hbar, val, eval(z)))
        })
        .collect()
}

fn pullback(s: &Setup, hbar: f64) -> Result<Vec<Row>> {
    let tangents = pairs_or(s, &PULLBACK_TANGENTS);
    let mut rows = Vec::new();
    for (i, x) in points_or(s, &PULLBACK_BASES).iter().enumerate() {
        for (j, (y, z)) in tangents.iter().enumerate() {
            let p = pullback_form(&s.fiducial, &s.potential, hbar, x, y, z, 0.1)?;
            let want = sigma_b(&s.field, &x.x, y, z)?;
            rows.push(Row::new("pullback", &format!("b{i}t{j}"), hbar, p, want));
        }
    }
    Ok(rows)
}

fn axioms(s: &Setup, hbar: f64) -> Result<Vec<Row>> {
    let grid = grid_at(s, hbar)?;
    let mut rows = Vec::new();
    for (i, (f, g)) in symbol_pairs(s).iter().enumerate() {
        let d = semiclassical_defects(f, g, &s.potential, hbar, &grid)?;
        let label = format!("pair{i}");
        rows.push(Row::new("von_neumann", &label, hbar, d.von_neumann_defect, 0.0));
        rows.push(Row::new("dirac", &label, hbar, d.dirac_defect, 0.0));
    }
    if s.rieffel {
        // e^{−|X|²/32}, whose quantization has norm (1 + ℏ/32)^{−N}.
        let n = s.grid.dim();
        let f = ClosedSymbol::isotropic_gaussian(&PhaseSpacePoint::zero(n), 4.0)?;
        let norm = magnetic_norm(&f.into(), &s.potential, hbar, &grid)?;
        rows.push(Row::new("norm", "gaussian", hbar, norm, (1.0 + hbar / 32.0).powi(-(n as i32))));
    }
    Ok(rows)
}

fn star(s: &Setup, hbar: f64) -> Result<Vec<Row>> {
    let n = s.grid.dim();
    let grid = grid_at(s, hbar)?;
    let lat = PhaseLattice::for_grid(&grid, hbar);
    let cfg = StarQuadratureConfig { nodes_per_axis: 12, ..StarQuadratureConfig::for_dim(n) };
    let m = grid.points_per_axis() as i64;
    let mut rows = Vec::new();
    for (i, (f, g)) in symbol_pairs(s).iter().enumerate() {
        let (f, g): (Symbol, Symbol) = (f.clone().into(), g.clone().into());
        let op = star_operator(&f, &g, &s.potential, hbar, &grid)?;
        for (k, (dx, dr)) in STAR_OFFSETS.iter().enumerate() {
            let ix: Vec<usize> = (0..n).map(|a| (m / 2 + dx[a]) as usize).collect();
            let ir: Vec<usize> = (0..n).map(|a| (m + dr[a]) as usize).collect();
            let x = lat.point(lat.index(&ix, &ir));
            let direct = star_direct(&f, &g, &s.field, hbar, &x, &cfg)?;
            let via_ops = op.eval(&x)?;
            let label = format!("pair{i}s{k}");
            rows.push(Row::new("re", &label, hbar, direct.re, via_ops.re));
            rows.push(Row::new("im", &label, hbar, direct.im, via_ops.im));
        }
    }
    Ok(rows)
}

fn continuity(s: &Setup, hbar: f64) -> Result<Vec<Row>> {
    let g = symbols_or_default(s).swap_remove(0);
    let family = g.scale(Complex64::new(1.0 + s.drift * hbar, 0.0));
    points_or(s, &[([0.1, 0.4], [0.2, -0.5])])
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let val = coherent_expectation(&family, &s.fiducial, &s.potential, hbar, z)?;
            Ok(Row::new("expectation", &format!("z{i}"), hbar, val.re, g.eval(z).re))
        })
        .collect()
}

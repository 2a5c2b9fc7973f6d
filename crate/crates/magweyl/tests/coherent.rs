use magweyl::coherent::*;
use magweyl::geometry::{gauge_transform, sigma, GaugeFunction, MagneticField, PhaseSpacePoint, VectorPotential};
use magweyl::hilbert::{inner_product, PositionGrid, WaveFunction};
use magweyl::symbol::ClosedSymbol;
use magweyl::Error;
use num_complex::Complex64;
use proptest::prelude::*;

fn pt(x: &[f64], xi: &[f64]) -> PhaseSpacePoint {
    PhaseSpacePoint::new(x.to_vec(), xi.to_vec()).unwrap()
}

fn const_b(b0: f64) -> VectorPotential {
    VectorPotential::transverse(&MagneticField::constant(b0))
}

/// |⟨v(Y), v(Z)⟩|² for the Gaussian fiducial in a constant field b (N = 2) or
/// none (b = 0): the flux term shifts the relative momentum by (b/2)(d₂, −d₁).
fn gaussian_overlap(b: f64, hbar: f64, y: &PhaseSpacePoint, z: &PhaseSpacePoint) -> f64 {
    let n = y.dim();
    let d: Vec<f64> = (0..n).map(|a| y.x[a] - z.x[a]).collect();
    let mut k: Vec<f64> = (0..n).map(|a| z.xi[a] - y.xi[a]).collect();
    if n == 2 {
        k[0] += 0.5 * b * d[1];
        k[1] -= 0.5 * b * d[0];
    }
    let s: f64 = d.iter().chain(&k).map(|t| t * t).sum();
    (-s / (2.0 * hbar)).exp()
}

#[test]
fn fiducials_are_normalized() {
    for dim in 1..=3 {
        for v in [
            FiducialVector::gaussian(dim).unwrap(),
            FiducialVector::hermite(dim, dim - 1).unwrap(),
            FiducialVector::bump(dim, 2.0).unwrap(),
        ] {
            assert!(v.tail_outside_box(v.radius()) < 1e-12, "{}", v.tag());
            assert!(v.tail_outside_box(0.5) > 0.05);
        }
    }
    let g = PositionGrid::new(2, 8.0, 64).unwrap();
    for hbar in [1.0, 0.25] {
        for v in [FiducialVector::gaussian(2).unwrap(), FiducialVector::hermite(2, 0).unwrap()] {
            let n = v.sample(hbar, &g).unwrap().norm();
            assert!((n - 1.0).abs() < 1e-10, "{} {hbar}: {n}", v.tag());
        }
    }
    // The bump is smooth but not analytic; a fine grid is needed.
    let g = PositionGrid::new(1, 2.5, 1024).unwrap();
    let n = FiducialVector::bump(1, 2.0).unwrap().sample(1.0, &g).unwrap().norm();
    assert!((n - 1.0).abs() < 1e-10, "{n}");
    assert!(FiducialVector::hermite(2, 2).is_err());
    assert_eq!(FiducialVector::parse(2, "bump:1.5").unwrap(), FiducialVector::bump(2, 1.5).unwrap());
}

#[test]
fn flat_vector_at_origin_is_the_scaled_fiducial() {
    let g = PositionGrid::new(1, 8.0, 64).unwrap();
    let v = FiducialVector::gaussian(1).unwrap();
    let c = coherent_vector(&v, &VectorPotential::zero(1), 0.5, &pt(&[0.0], &[0.0]), &g).unwrap();
    let vh = v.sample(0.5, &g).unwrap();
    let d = c.state.values.iter().zip(&vh.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(d < 1e-12);
    assert!((c.state.norm() - 1.0).abs() < 1e-10);

    let z = pt(&[1.5], &[-2.0]);
    let c = coherent_vector(&v, &VectorPotential::zero(1), 0.5, &z, &g).unwrap();
    for i in 0..g.len() {
        let x = g.point(i)[0];
        assert!((c.state.values[i].norm() - v.scaled(0.5, &[x - 1.5]).abs()).abs() < 1e-10);
    }
}

#[test]
fn direct_and_weyl_constructions_agree() {
    // Translation by FFT is periodic, so the shifted vector must be negligible at the edge.
    let g = PositionGrid::new(2, 9.0, 64).unwrap();
    let fields = [
        VectorPotential::zero(2),
        const_b(1.0),
        VectorPotential::transverse(&MagneticField::linear(2, 1.0, 0.3).unwrap()),
        VectorPotential::transverse(&MagneticField::bounded_smooth(2, 1.5).unwrap()),
    ];
    for a in &fields {
        for v in [FiducialVector::gaussian(2).unwrap(), FiducialVector::hermite(2, 1).unwrap()] {
            let z = pt(&[0.7, -1.1], &[0.4, 1.2]);
            let c = coherent_vector(&v, a, 1.0, &z, &g).unwrap();
            let w = coherent_vector_via_weyl(&v, a, 1.0, &z, &g).unwrap();
            let d = c.state.values.iter().zip(&w.values).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
            assert!(d < 1e-8, "{} {}: {d:.3e}", a.gauge_tag(), v.tag());
        }
    }
}

#[test]
fn center_near_edge_is_rejected() {
    let g = PositionGrid::new(1, 4.0, 32).unwrap();
    let v = FiducialVector::gaussian(1).unwrap();
    let e = coherent_vector(&v, &VectorPotential::zero(1), 1.0, &pt(&[2.0], &[0.0]), &g).unwrap_err();
    assert!(matches!(e, Error::Domain(_)));
}

#[test]
fn overlaps_match_the_gaussian_formula() {
    let g = PositionGrid::new(2, 8.0, 64).unwrap();
    let v = FiducialVector::gaussian(2).unwrap();
    let pairs = [
        (pt(&[0.0, 0.0], &[0.0, 0.0]), pt(&[0.5, -0.3], &[0.2, 0.1])),
        (pt(&[1.0, 0.5], &[-0.5, 0.0]), pt(&[-0.4, 0.2], &[0.3, -0.6])),
        (pt(&[-1.0, 1.0], &[1.0, 1.0]), pt(&[-1.2, 0.4], &[0.8, 0.5])),
    ];
    for b in [0.0, 1.0] {
        let a = if b == 0.0 { VectorPotential::zero(2) } else { const_b(b) };
        for hbar in [1.0, 0.5] {
            for (z, y) in &pairs {
                let cz = coherent_vector(&v, &a, hbar, z, &g).unwrap();
                let cy = coherent_vector(&v, &a, hbar, y, &g).unwrap();
                let p = transition_probability(&cz, &cy).unwrap();
                let want = gaussian_overlap(b, hbar, y, z);
                assert!((p - want).abs() < 1e-5, "b={b} ℏ={hbar}: {p} vs {want}");
                assert_eq!(p, transition_probability(&cy, &cz).unwrap());
            }
        }
    }
}

/// A grid around the origin wide enough for centers within 0.5 of it and
/// momenta below about 1.
fn local_grid(hbar: f64) -> PositionGrid {
    let l = 0.5 + 4.0 * hbar.sqrt();
    let h = std::f64::consts::PI * hbar / (1.5 + 8.0 * hbar.sqrt());
    PositionGrid::new(2, l, 2 * (l / h).ceil() as usize).unwrap()
}

#[test]
fn separated_states_decouple_as_hbar_shrinks() {
    let v = FiducialVector::gaussian(2).unwrap();
    let a = VectorPotential::transverse(&MagneticField::bounded_smooth(2, 1.0).unwrap());
    let z = pt(&[0.0, 0.0], &[0.0, 0.0]);
    let y = pt(&[0.4, 0.0], &[0.0, 0.3]);
    let mut last = 1.0;
    for k in 0..=6 {
        let hbar = 0.5f64.powi(k);
        let g = local_grid(hbar);
        let cz = coherent_vector(&v, &a, hbar, &z, &g).unwrap();
        let cy = coherent_vector(&v, &a, hbar, &y, &g).unwrap();
        let p = transition_probability(&cz, &cy).unwrap();
        assert!(p < last, "ℏ={hbar}: {p} !< {last}");
        assert!((transition_probability(&cz, &cz).unwrap() - 1.0).abs() < 1e-10);
        last = p;
    }
    assert!(last < 1e-3, "{last}");
}

#[test]
fn mismatched_vectors_are_rejected() {
    let g = PositionGrid::new(2, 6.0, 32).unwrap();
    let v = FiducialVector::gaussian(2).unwrap();
    let z = pt(&[0.0, 0.0], &[0.0, 0.0]);
    let c1 = coherent_vector(&v, &const_b(1.0), 1.0, &z, &g).unwrap();
    let c2 = coherent_vector(&v, &const_b(1.0), 0.5, &z, &g).unwrap();
    let c3 = coherent_vector(&v, &VectorPotential::axial(&MagneticField::constant(1.0)), 1.0, &z, &g).unwrap();
    assert!(matches!(transition_probability(&c1, &c2), Err(Error::Input(_))));
    assert!(matches!(transition_probability(&c1, &c3), Err(Error::Input(_))));
}

fn packet(g: &PositionGrid, x0: &[f64], k0: &[f64], s: f64) -> WaveFunction {
    WaveFunction::from_fn(g.clone(), |x| {
        let r2: f64 = x.iter().zip(x0).map(|(p, q)| (p - q) * (p - q)).sum();
        let ph: f64 = x.iter().zip(k0).map(|(p, q)| p * q).sum();
        Complex64::from_polar((-r2 / (2.0 * s * s)).exp(), ph)
    })
    .normalized()
    .unwrap()
}

#[test]
fn gauge_change_multiplies_by_the_gauge_phase() {
    let g = PositionGrid::new(2, 7.0, 48).unwrap();
    let v = FiducialVector::gaussian(2).unwrap();
    let a = const_b(1.0);
    let hbar = 0.5;
    let z = pt(&[0.5, 0.2], &[-0.3, 0.8]);
    let c = coherent_vector(&v, &a, hbar, &z, &g).unwrap().state;
    let u = packet(&g, &[0.3, -0.2], &[0.5, 0.1], 1.3);
    for rho in [
        GaugeFunction::oscillatory(0.4, vec![0.7, -0.5]),
        GaugeFunction::quadratic(vec![0.3, -0.2, -0.2, 0.5], vec![0.1, 0.4]).unwrap(),
    ] {
        let ap = gauge_transform(&a, &rho).unwrap();
        let cp = coherent_vector(&v, &ap, hbar, &z, &g).unwrap().state;
        let phase = |w: &WaveFunction| {
            let vals = (0..g.len()).map(|i| w.values[i] * Complex64::from_polar(1.0, rho.value(&g.point(i)) / hbar));
            WaveFunction::new(g.clone(), vals.collect()).unwrap()
        };
        // v^{A+dρ}(Z) = e^{−iρ(z)/ℏ} e^{iρ/ℏ} v^A(Z)
        let moved = phase(&c).scale(Complex64::from_polar(1.0, -rho.value(&z.x) / hbar));
        let d = moved.values.iter().zip(&cp.values).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(d < 1e-10, "{d:.3e}");
        let before = inner_product(&u, &c).unwrap().norm();
        let after = inner_product(&phase(&u), &cp).unwrap().norm();
        assert!((before - after).abs() < 1e-8, "{before} vs {after}");
    }
}

#[test]
fn resolution_of_identity_recovers_the_norm() {
    let cells = PhaseCells::default();
    // Flat case, u a coherent vector at the window center.
    let g = PositionGrid::new(1, 10.0, 64).unwrap();
    let v = FiducialVector::gaussian(1).unwrap();
    let u = coherent_vector(&v, &VectorPotential::zero(1), 1.0, &pt(&[0.0], &[0.0]), &g).unwrap().state;
    let r = resolution_of_identity(&u, &v, &VectorPotential::zero(1), 1.0, &cells).unwrap();
    assert!((r - 1.0).abs() < 1e-3, "{r}");

    // First Hermite excitation in a constant field, two fiducials.
    let g = PositionGrid::new(2, 6.0, 48).unwrap();
    let a = const_b(1.0);
    let u = coherent_vector(&FiducialVector::hermite(2, 0).unwrap(), &a, 0.5, &pt(&[0.2, 0.0], &[0.0, 0.5]), &g)
        .unwrap()
        .state;
    for v in [FiducialVector::gaussian(2).unwrap(), FiducialVector::bump(2, 2.5).unwrap()] {
        let r = resolution_of_identity(&u, &v, &a, 0.5, &cells).unwrap();
        assert!((r - 1.0).abs() < 1e-3, "{}: {r}", v.tag());
    }
}

#[test]
fn shrinking_the_window_loses_the_tail_mass() {
    let g = PositionGrid::new(1, 10.0, 64).unwrap();
    let v = FiducialVector::gaussian(1).unwrap();
    let a = VectorPotential::zero(1);
    let u = packet(&g, &[0.0], &[0.0], 2.0);
    let e = resolution_of_identity(&u, &v, &a, 1.0, &PhaseCells { half_width: Some(2.5), ..Default::default() })
        .unwrap_err();
    assert!(matches!(e, Error::Window { required, .. } if required > 2.5));

    // |⟨v(Y), u⟩|² integrated over η is the convolution |u|² * |v|², a Gaussian
    // of variance (4 + 1)/2 in y; the mass outside [−W, W] is erfc(W/√5).
    let w = 2.6;
    let loose = PhaseCells { half_width: Some(w), tail_budget: 0.5, cells_per_width: 8.0 };
    let r = resolution_of_identity(&u, &v, &a, 1.0, &loose).unwrap();
    let lost = erfc(w / 5f64.sqrt());
    assert!(lost > 0.05 && lost < 0.2);
    assert!((1.0 - r - lost).abs() < 1e-3, "lost {} vs {lost}", 1.0 - r);
}

/// Complementary error function by Gauss–Legendre on [x, x + 12].
fn erfc(x: f64) -> f64 {
    let n = 400;
    let h = 12.0 / n as f64;
    // composite Simpson
    let f = |t: f64| (-t * t).exp();
    let mut s = f(x) + f(x + 12.0);
    for i in 1..n {
        let t = x + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(t);
    }
    s * h / 3.0 * 2.0 / std::f64::consts::PI.sqrt()
}

#[test]
fn berezin_of_constants_and_odd_functions() {
    let v = FiducialVector::gaussian(2).unwrap();
    let a = VectorPotential::transverse(&MagneticField::bounded_smooth(2, 1.0).unwrap());
    let cells = PhaseCells::default();
    let z = pt(&[0.0, 0.0], &[0.0, 0.0]);
    let one = berezin_average(&|_| 1.0, 1.0, &v, &const_b(1.0), 0.25, &z, &cells).unwrap();
    assert!((one - 1.0).abs() < 1e-6, "{one}");
    let odd = berezin_average(&|p| p.x[0].tanh(), 1.0, &v, &const_b(1.0), 0.25, &z, &cells).unwrap();
    assert!(odd.abs() < 1e-6, "{odd}");
    let one = berezin_average(&|_| 1.0, 1.0, &v, &a, 0.25, &pt(&[0.3, -0.2], &[0.5, 0.0]), &cells).unwrap();
    assert!((one - 1.0).abs() < 1e-6, "{one}");
    let e = berezin_average(&|_| 2.0, 1.0, &v, &a, 0.25, &z, &cells).unwrap_err();
    assert!(matches!(e, Error::Input(_)));
}

#[test]
fn berezin_average_localizes() {
    let v = FiducialVector::gaussian(2).unwrap();
    let a = VectorPotential::transverse(&MagneticField::bounded_smooth(2, 1.0).unwrap());
    let z = pt(&[0.2, -0.1], &[0.3, 0.4]);
    let bump = |p: &PhaseSpacePoint| {
        let r2: f64 = p.flat().iter().map(|t| t * t).sum();
        (-r2 / 8.0).exp()
    };
    let exact = bump(&z);
    let mut errs = Vec::new();
    for k in 0..=6 {
        let hbar = 0.5f64.powi(k);
        let val = berezin_average(&bump, 1.0, &v, &a, hbar, &z, &PhaseCells::default()).unwrap();
        errs.push((val - exact).abs());
    }
    for w in errs.windows(2) {
        assert!(w[1] <= 0.7 * 1.05 * w[0], "{errs:?}");
    }
    assert!(*errs.last().unwrap() <= 2e-2, "{errs:?}");
}

#[test]
fn pullback_of_flat_states_is_sigma() {
    let v = FiducialVector::gaussian(2).unwrap();
    let a = VectorPotential::zero(2);
    let x = pt(&[0.3, -0.4], &[0.2, 0.1]);
    let y = pt(&[1.0, 0.0], &[0.0, 0.5]);
    let zt = pt(&[0.2, -0.3], &[1.0, 0.4]);
    let p = pullback_form(&v, &a, 1.0, &x, &y, &zt, 0.1).unwrap();
    let s = sigma(&y, &zt);
    assert!((p - s).abs() <= 0.02 * s.abs(), "{p} vs {s}");
    let same = pullback_form(&v, &const_b(1.0), 1.0, &x, &y, &y, 0.1).unwrap();
    assert!(same.abs() < 1e-8, "{same}");
}

#[test]
fn pullback_in_a_constant_field_is_the_magnetic_form() {
    let v = FiducialVector::gaussian(2).unwrap();
    let b = MagneticField::constant(1.0);
    let a = VectorPotential::transverse(&b);
    let x = pt(&[0.5, 0.2], &[-0.3, 0.1]);
    let y = pt(&[1.0, 0.0], &[0.0, 0.0]);
    let zt = pt(&[0.0, 1.0], &[0.5, 0.0]);
    let want = magweyl::geometry::sigma_b(&b, &x.x, &y, &zt).unwrap();
    for hbar in [1.0, 0.25, 1.0 / 16.0] {
        let p = pullback_form(&v, &a, hbar, &x, &y, &zt, 0.1).unwrap();
        assert!((p - want).abs() < 1e-6, "ℏ={hbar}: {p} vs {want}");
    }
}

#[test]
fn pullback_tends_to_the_magnetic_form() {
    let v = FiducialVector::gaussian(2).unwrap();
    let b = MagneticField::bounded_smooth(2, 1.0).unwrap();
    let a = VectorPotential::transverse(&b);
    let x = pt(&[0.5, 0.2], &[-0.3, 0.1]);
    let y = pt(&[1.0, 0.0], &[0.0, 0.0]);
    let zt = pt(&[0.0, 1.0], &[0.5, 0.0]);
    let want = magweyl::geometry::sigma_b(&b, &x.x, &y, &zt).unwrap();
    let mut errs = Vec::new();
    for k in [0, 2, 4, 6] {
        let hbar = 0.5f64.powi(k);
        let p = pullback_form(&v, &a, hbar, &x, &y, &zt, 0.1).unwrap();
        errs.push((p - want).abs());
    }
    for w in errs.windows(2) {
        assert!(w[1] < w[0], "{errs:?}");
    }
    assert!(*errs.last().unwrap() <= 0.05 * want.abs().max(1.0), "{errs:?} want {want}");
}

fn test_symbols(dim: usize) -> Vec<ClosedSymbol> {
    let c = pt(&vec![0.3; dim], &vec![-0.2; dim]);
    let g = ClosedSymbol::gaussian(&c, &vec![2.0; dim], &vec![1.6; dim], 1.0).unwrap();
    let h = ClosedSymbol::isotropic_gaussian(&pt(&vec![-0.4; dim], &vec![0.5; dim]), 1.2).unwrap();
    vec![g.clone(), g.add(&h.scale(Complex64::new(0.0, 0.7))), ClosedSymbol::mollified_one(dim, 400.0).unwrap()]
}

#[test]
fn expectation_routes_agree() {
    let fields = [
        VectorPotential::zero(2),
        const_b(1.0),
        VectorPotential::transverse(&MagneticField::bounded_smooth(2, 1.0).unwrap()),
    ];
    let z = pt(&[0.1, 0.4], &[0.2, -0.5]);
    let gaussian = FiducialVector::gaussian(2).unwrap();
    let hermite = FiducialVector::hermite(2, 0).unwrap();
    let mut cases = Vec::new();
    for a in &fields {
        cases.push((a, &gaussian, 1.0));
        cases.push((a, &gaussian, 0.25));
    }
    cases.push((&fields[2], &hermite, 0.5));
    for (a, v, hbar) in cases {
        for f in test_symbols(2) {
            let r = coherent_expectation_routes(&f, v, a, hbar, &z).unwrap();
            assert!(r.gap() < ROUTE_TOLERANCE, "{} ℏ={hbar} {}: {:?}", a.gauge_tag(), v.tag(), r);
        }
    }
}

#[test]
fn expectation_basics() {
    let v = FiducialVector::gaussian(2).unwrap();
    let a = const_b(1.0);
    let z = pt(&[0.1, 0.4], &[0.2, -0.5]);
    let syms = test_symbols(2);
    let re = coherent_expectation(&syms[0], &v, &a, 0.5, &z).unwrap();
    assert!(re.im.abs() <= 1e-10, "{re}");
    let one = coherent_expectation(&syms[2], &v, &a, 0.5, &z).unwrap();
    assert!((one - 1.0).norm() < 1e-5, "{one}");
    let xi_poly = ClosedSymbol::monomial(&[0, 0], &[2, 0]).unwrap();
    assert!(matches!(coherent_expectation(&xi_poly, &v, &a, 0.5, &z), Err(Error::Unsupported(_))));
}

#[test]
fn expectations_tend_to_point_values() {
    let v = FiducialVector::gaussian(2).unwrap();
    let a = const_b(1.0);
    let z = pt(&[0.1, 0.4], &[0.2, -0.5]);
    let f = &test_symbols(2)[0];
    let exact = f.eval(&z).re;
    let mut errs = Vec::new();
    for k in 0..=4 {
        let hbar = 0.5f64.powi(k);
        errs.push((coherent_expectation(f, &v, &a, hbar, &z).unwrap().re - exact).abs());
    }
    for w in errs.windows(2) {
        assert!(w[1] <= 0.6 * w[0], "{errs:?}");
    }
}

#[test]
fn richardson_recovers_polynomial_limits() {
    let h = [1.0, 0.5, 0.25, 0.125, 0.0625];
    let vals: Vec<f64> = h.iter().map(|t| 2.0 + 0.7 * t - 0.3 * t * t + 0.1 * t * t * t).collect();
    let (lim, p) = richardson(&h, &vals).unwrap();
    assert_eq!(p, 1.0);
    assert!((lim - 2.0).abs() < 1e-12, "{lim}");
    let vals: Vec<f64> = h.iter().map(|t| 1.0 + t.sqrt()).collect();
    let (_, p) = richardson(&h, &vals).unwrap();
    assert_eq!(p, 0.5);
    assert!(richardson(&[1.0, 1.0], &[0.0, 0.0]).is_err());
}

#[test]
fn state_continuity_extrapolates_to_the_symbol_value() {
    let v = FiducialVector::gaussian(2).unwrap();
    let a = const_b(1.0);
    let z = pt(&[0.1, 0.4], &[0.2, -0.5]);
    let g = test_symbols(2)[0].clone();
    let ladder: Vec<f64> = (0..5).map(|k| 0.5f64.powi(k)).collect();
    let modulus = ContinuityModulus { constant: 1.0, exponent: 1.0 };
    let scan = state_continuity_scan(|_| Ok(g.clone()), &v, &a, &z, &ladder, modulus).unwrap();
    assert!((scan.extrapolated - scan.reference).abs() < 1e-3, "{scan:?}");
    assert!(scan.jumps_within_modulus);

    let scaled = state_continuity_scan(
        |h| Ok(g.scale(Complex64::new(1.0 + h, 0.0))),
        &v,
        &a,
        &z,
        &ladder,
        modulus,
    )
    .unwrap();
    assert!((scaled.reference - g.eval(&z).re).abs() < 1e-15);
    assert!((scaled.extrapolated - scaled.reference).abs() < 1e-3, "{scaled:?}");
    for (r, s) in scan.rows.iter().zip(&scaled.rows) {
        assert!((s.1 - (1.0 + r.0) * r.1).abs() < 1e-9);
    }
    let first_jump = (scan.rows[0].1 - scan.rows[1].1).abs() / 0.5;
    assert!(scan.worst_jump_ratio >= first_jump && first_jump > 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn transition_probability_is_symmetric_and_gauge_free(
        z in prop::array::uniform4(-1.5f64..1.5),
        y in prop::array::uniform4(-1.5f64..1.5),
        rho in -0.8f64..0.8,
    ) {
        let g = PositionGrid::new(2, 6.0, 40).unwrap();
        let v = FiducialVector::gaussian(2).unwrap();
        let b = MagneticField::constant(1.0);
        let a1 = VectorPotential::transverse(&b);
        let a2 = gauge_transform(&a1, &GaugeFunction::oscillatory(rho, vec![0.6, 0.9])).unwrap();
        let zp = pt(&z[..2], &z[2..]);
        let yp = pt(&y[..2], &y[2..]);
        let p = |a: &VectorPotential| {
            let c1 = coherent_vector(&v, a, 1.0, &zp, &g).unwrap();
            let c2 = coherent_vector(&v, a, 1.0, &yp, &g).unwrap();
            (transition_probability(&c1, &c2).unwrap(), transition_probability(&c2, &c1).unwrap())
        };
        let (p12, p21) = p(&a1);
        prop_assert_eq!(p12, p21);
        prop_assert!(p12 <= 1.0 + 1e-10);
        let (q12, _) = p(&a2);
        prop_assert!((p12 - q12).abs() < 1e-8);
    }
}

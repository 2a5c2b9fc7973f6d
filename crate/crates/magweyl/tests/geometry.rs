use magweyl::geometry::*;
use magweyl::symbol::ClosedSymbol;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pt(x: &[f64], xi: &[f64]) -> PhaseSpacePoint {
    PhaseSpacePoint::new(x.to_vec(), xi.to_vec()).unwrap()
}

fn fields(n: usize) -> Vec<MagneticField> {
    let mut out = vec![MagneticField::zero(n)];
    out.push(if n == 2 {
        MagneticField::constant(1.3)
    } else {
        MagneticField::new(3, FieldFamily::Constant, &[1.3, -0.4, 0.7]).unwrap()
    });
    out.push(MagneticField::linear(n, 0.8, 0.5).unwrap());
    out.push(MagneticField::bounded_smooth(n, 1.5).unwrap());
    out
}

fn potentials(b: &MagneticField) -> Vec<VectorPotential> {
    let n = b.dim();
    let t = VectorPotential::transverse(b);
    let osc = GaugeFunction::oscillatory(0.6, (0..n).map(|i| 0.7 + 0.3 * i as f64).collect());
    vec![t.clone(), VectorPotential::axial(b), gauge_transform(&t, &osc).unwrap()]
}

/// Order 16 is exact for the polynomial families; the bounded-smooth family
/// needs order 32 on triangles of this size.
#[test]
fn stokes_on_a_random_corpus() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for n in [2, 3] {
        for b in fields(n) {
            let order = if b.family() == FieldFamily::BoundedSmooth { 32 } else { 16 };
            for a in potentials(&b) {
                for _ in 0..100 {
                    let v: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
                    let cycle = circulation_segment(&a, &v[0], &v[1], order).unwrap()
                        + circulation_segment(&a, &v[1], &v[2], order).unwrap()
                        + circulation_segment(&a, &v[2], &v[0], order).unwrap();
                    let flux = flux_triangle(&b, &v[0], &v[1], &v[2], order).unwrap();
                    worst = worst.max((cycle - flux).abs());
                }
            }
        }
    }
    assert!(worst <= 1e-8, "worst Stokes defect {worst:.3e}");
}

#[test]
fn flux_examples() {
    for b in fields(2) {
        assert_eq!(flux_triangle(&b, &[0.0, 0.0], &[0.0, 0.0], &[0.0, 0.0], 16).unwrap(), 0.0);
    }
    // Monte Carlo surface integral of a constant field over the unit triangle.
    let b0 = 1.7;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let samples = 1_000_000;
    let inside = (0..samples)
        .filter(|_| {
            let (p, q): (f64, f64) = (rng.gen(), rng.gen());
            p + q <= 1.0
        })
        .count();
    let mc = b0 * inside as f64 / samples as f64;
    let f = flux_triangle(&MagneticField::constant(b0), &[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], 16).unwrap();
    assert!((f - mc).abs() < 5e-3, "{f} vs {mc}");
    assert!((f - 0.5 * b0).abs() < 1e-14);

    // B_12 = x₁: polynomial, so low orders are already exact.
    let lin = MagneticField::linear(2, 0.0, 1.0).unwrap();
    let tri = ([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]);
    let reference = flux_triangle(&lin, &tri.0, &tri.1, &tri.2, 32).unwrap();
    for order in [4, 8, 16] {
        assert!((flux_triangle(&lin, &tri.0, &tri.1, &tri.2, order).unwrap() - reference).abs() < 1e-12);
    }
    assert!(flux_triangle(&lin, &[0.0], &tri.1, &tri.2, 8).is_err());
}

#[test]
fn circulation_examples() {
    let b = MagneticField::constant(2.0);
    let sym = VectorPotential::transverse(&b);
    assert_eq!(circulation_segment(&sym, &[0.3, 0.4], &[0.3, 0.4], 8).unwrap(), 0.0);
    assert_eq!(circulation_segment(&VectorPotential::zero(2), &[0.0, 0.0], &[1.0, 2.0], 8).unwrap(), 0.0);
    assert!(circulation_segment(&sym, &[0.0, 0.0], &[1.0, 1.0], 8).unwrap().abs() < 1e-15);
    // Symmetric gauge: A = (b₀/2)(−x₂, x₁).
    assert!((sym.component(0, &[0.3, 0.5]) + 0.5).abs() < 1e-15);
    assert!((sym.component(1, &[0.3, 0.5]) - 0.3).abs() < 1e-15);
    // Landau gauge: A = (−b₀x₂, 0).
    let landau = VectorPotential::axial(&b);
    assert!((landau.component(0, &[0.3, 0.5]) + 1.0).abs() < 1e-15);
    assert_eq!(landau.component(1, &[0.3, 0.5]), 0.0);
}

#[test]
fn gauge_transform_examples() {
    let zero = VectorPotential::zero(2);
    let flat = gauge_transform(&zero, &GaugeFunction::linear(vec![0.0, 0.0])).unwrap();
    for x in [[0.1, 0.2], [-1.0, 3.0]] {
        for j in 0..2 {
            assert_eq!(flat.component(j, &x), zero.component(j, &x));
        }
    }
    let c = gauge_transform(&zero, &GaugeFunction::linear(vec![0.7, -1.2])).unwrap();
    assert_eq!(c.component(0, &[5.0, -3.0]), 0.7);
    assert_eq!(c.component(1, &[5.0, -3.0]), -1.2);
    assert!(c.curl(0, 1, &[0.4, 0.1]).abs() < 1e-14);

    let b0 = 1.3;
    let b = MagneticField::constant(b0);
    let landau = VectorPotential::axial(&b);
    let sym = gauge_transform(&landau, &GaugeFunction::landau_to_symmetric(b0)).unwrap();
    let direct = VectorPotential::transverse(&b);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
        for j in 0..2 {
            assert!((sym.component(j, &x) - direct.component(j, &x)).abs() < 1e-14);
        }
        let v: Vec<Vec<f64>> = (0..3).map(|_| (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let cyc = |a: &VectorPotential| a.circulation(&v[0], &v[1]) + a.circulation(&v[1], &v[2]) + a.circulation(&v[2], &v[0]);
        assert!((cyc(&sym) - cyc(&landau)).abs() < 1e-10);
        assert!((cyc(&sym) - flux_triangle(sym.field(), &v[0], &v[1], &v[2], 16).unwrap()).abs() < 1e-10);
    }
}

#[test]
fn fields_are_antisymmetric_and_closed() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [2, 3] {
        for b in fields(n) {
            for _ in 0..20 {
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                for j in 0..n {
                    assert_eq!(b.component(j, j, &x), 0.0);
                    for k in 0..n {
                        assert_eq!(b.component(j, k, &x), -b.component(k, j, &x));
                    }
                }
                if n == 3 {
                    assert!(b.closedness_defect(0, 1, 2, &x, 1e-3) < 1e-6, "{:?}", b.family());
                }
                for a in potentials(&b) {
                    for j in 0..n {
                        for k in 0..n {
                            assert!((a.curl(j, k, &x) - b.component(j, k, &x)).abs() < 1e-10, "{} {j}{k}", a.gauge_tag());
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn gauge_gradients_match_differences() {
    let fs = [
        GaugeFunction::linear(vec![0.3, -0.8]),
        GaugeFunction::quadratic(vec![0.4, 0.3, 0.3, -0.2], vec![0.1, 0.0]).unwrap(),
        GaugeFunction::oscillatory(0.8, vec![1.3, 0.7]),
    ];
    let h = 1e-5;
    for rho in &fs {
        for x in [[0.2, -0.7], [1.5, 0.3]] {
            for j in 0..2 {
                let mut p = x;
                let mut m = x;
                p[j] += h;
                m[j] -= h;
                let fd = (rho.value(&p) - rho.value(&m)) / (2.0 * h);
                assert!((fd - rho.gradient(j, &x)).abs() < 1e-6, "{}", rho.family_tag());
            }
        }
    }
}

#[test]
fn sigma_examples() {
    let y1 = pt(&[1.0, 0.0], &[0.0, 0.0]);
    let z1 = pt(&[0.0, 0.0], &[1.0, 0.0]);
    assert_eq!(sigma(&y1, &z1), -1.0);
    assert_eq!(sigma_b(&MagneticField::zero(2), &[3.0, 1.0], &y1, &z1).unwrap(), -1.0);
    let b = MagneticField::bounded_smooth(2, 1.2).unwrap();
    let w = pt(&[0.3, -0.2], &[1.1, 0.4]);
    assert!(sigma_b(&b, &[0.5, 0.5], &w, &w).unwrap().abs() < 1e-15);
    let b0 = 0.9;
    let yb = pt(&[1.0, 0.0], &[0.0, 0.0]);
    let zb = pt(&[0.0, 1.0], &[0.0, 0.0]);
    assert_eq!(sigma_b(&MagneticField::constant(b0), &[0.0, 0.0], &yb, &zb).unwrap(), b0);
}

#[test]
fn bracket_examples() {
    let b = MagneticField::linear(2, 0.8, 0.5).unwrap();
    let x1 = ClosedSymbol::monomial(&[1, 0], &[0, 0]).unwrap();
    let xi1 = ClosedSymbol::monomial(&[0, 0], &[1, 0]).unwrap();
    let xi2 = ClosedSymbol::monomial(&[0, 0], &[0, 1]).unwrap();
    for p in [pt(&[0.0, 0.0], &[0.0, 0.0]), pt(&[1.2, -0.3], &[0.4, 2.0])] {
        assert!((poisson_bracket(&b, &x1, &xi1, &p).unwrap() + 1.0).norm() < 1e-14);
        let want = b.component(0, 1, &p.x);
        assert!((poisson_bracket(&b, &xi1, &xi2, &p).unwrap() - want).norm() < 1e-14);
    }
}

fn gaussian(c: [f64; 4], s: f64) -> ClosedSymbol {
    ClosedSymbol::isotropic_gaussian(&pt(&c[..2], &c[2..]), s).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn flux_is_antisymmetric_in_the_vertices(
        v in prop::array::uniform6(-2.0f64..2.0),
        fam in 0usize..4,
    ) {
        let b = &fields(2)[fam];
        let (a, p, c) = ([v[0], v[1]], [v[2], v[3]], [v[4], v[5]]);
        let f = flux_triangle(b, &a, &p, &c, 16).unwrap();
        let g = flux_triangle(b, &a, &c, &p, 16).unwrap();
        prop_assert!((f + g).abs() <= 1e-12 * f.abs().max(1.0));
    }

    #[test]
    fn bracket_is_a_biderivation(
        c1 in prop::array::uniform4(-1.0f64..1.0),
        c2 in prop::array::uniform4(-1.0f64..1.0),
        c3 in prop::array::uniform4(-1.0f64..1.0),
        x in prop::array::uniform4(-1.0f64..1.0),
        fam in 0usize..4,
    ) {
        let b = &fields(2)[fam];
        let (f, g, h) = (gaussian(c1, 1.0), gaussian(c2, 1.3), gaussian(c3, 0.8));
        let p = pt(&x[..2], &x[2..]);
        let br = |u: &ClosedSymbol, w: &ClosedSymbol| poisson_bracket(b, u, w, &p).unwrap();
        prop_assert!(br(&f, &f).norm() < 1e-12);
        prop_assert!((br(&f, &g) + br(&g, &f)).norm() < 1e-12);
        let s = Complex64::new(0.7, -0.2);
        let lin = br(&f, &g.scale(s).add(&h));
        prop_assert!((lin - (s * br(&f, &g) + br(&f, &h))).norm() < 1e-8);
        let leibniz = br(&f, &g.mul(&h));
        let want = br(&f, &g) * h.eval(&p) + g.eval(&p) * br(&f, &h);
        prop_assert!((leibniz - want).norm() < 1e-8);
        let fd = poisson_bracket_fd(b, &f, &g, &p, 1e-4).unwrap();
        prop_assert!((fd - br(&f, &g)).norm() < 1e-5);
    }
}

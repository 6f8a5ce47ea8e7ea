use cubicmm::curve::ModelParams;
use cubicmm::growth::*;
use cubicmm::{Complex, Error, PrecisionContext};
use num_complex::Complex64;
use proptest::prelude::*;
use std::sync::OnceLock;

fn ctx256() -> PrecisionContext {
    PrecisionContext::new(256).unwrap()
}

fn pa() -> ModelParams {
    ModelParams::from_decimal("0.5", "0.25", ctx256()).unwrap()
}

fn pa_double() -> ModelParams {
    ModelParams::new(0.5, 0.25, PrecisionContext::double()).unwrap()
}

fn pb() -> ModelParams {
    ModelParams::from_decimal("2", "0.25", ctx256()).unwrap()
}

fn domain_a() -> &'static GrowthDomain {
    static D: OnceLock<GrowthDomain> = OnceLock::new();
    D.get_or_init(|| GrowthDomain::new(&pa()).unwrap())
}

fn domain_a_double() -> &'static GrowthDomain {
    static D: OnceLock<GrowthDomain> = OnceLock::new();
    D.get_or_init(|| GrowthDomain::new(&pa_double()).unwrap())
}

#[test]
fn conformal_coefficients() {
    // 40-digit evaluation of the closed forms
    let c = conformal_coeffs(&pa()).unwrap();
    assert!((c.r.to_f64() - 0.7320508075688772935).abs() < 1e-15);
    assert!((c.a.to_f64() - 0.1339745962155613532).abs() < 1e-15);
    assert!((c.rho_crit.to_f64() - 0.7153255588077790849).abs() < 1e-15);
    let c = conformal_coeffs(&pb()).unwrap();
    assert!((c.r.to_f64() - 2.0).abs() < 1e-30);
    assert!((c.a.to_f64() - 1.0).abs() < 1e-30);
    assert!((c.rho_crit.to_f64() - 1.0).abs() < 1e-30);
    let sup = ModelParams::new(3.0, 0.25, ctx256()).unwrap();
    assert!(matches!(conformal_coeffs(&sup), Err(Error::SupercriticalRegime { .. })));
}

#[test]
fn h_rotation_covariance() {
    let d = domain_a();
    let ctx = ctx256();
    let w = ctx.complex(1.3, -0.4);
    let lhs = d.h(&(&ctx.omega() * &w));
    let rhs = &ctx.omega() * &d.h(&w);
    assert!((&lhs - &rhs).abs().to_f64() < 1e-70);
}

#[test]
fn curve_residual_at_random_points() {
    let d = domain_a();
    let ctx = ctx256();
    let mut seed = 0x2545_f491_u64;
    for _ in 0..50 {
        let mut next = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        let w = ctx.complex(4.0 * next() - 2.0, 4.0 * next() - 2.0);
        assert!(d.curve_residual(&w) < 1e-25);
    }
}

#[test]
fn area_equals_pi_t0() {
    let d = domain_a();
    let pi = std::f64::consts::PI;
    let area = d.area();
    assert!((&area - &d.area_closed_form()).abs().to_f64() < 1e-60);
    assert!((area.to_f64() - pi / 2.0).abs() < 1e-10);
    let crit = GrowthDomain::new(&pb()).unwrap();
    assert!((crit.area().to_f64() - 2.0 * pi).abs() < 1e-10);
}

#[test]
fn area_tracks_t0_on_grid() {
    for t0 in [0.2, 0.5, 1.0] {
        for t3 in [0.1, 0.2, 0.3] {
            let p = ModelParams::new(t0, t3, ctx256()).unwrap();
            let d = GrowthDomain::with_samples(&p, 64).unwrap();
            let ratio = d.area().to_f64() / std::f64::consts::PI;
            assert!((ratio - t0).abs() < 1e-10, "({t0}, {t3}): {ratio}");
        }
    }
}

#[test]
fn harmonic_moments() {
    let d = domain_a();
    let t3 = d.harmonic_moment(3).unwrap();
    assert!((t3.re.to_f64() - 0.25).abs() < 1e-8 && t3.im.to_f64().abs() < 1e-8);
    assert!((&t3 - &Complex::from_real(d.params.t3.clone())).abs().to_f64() < 1e-60);
    for k in [1, 2, 4, 5, 6] {
        assert!(d.harmonic_moment(k).unwrap().abs().to_f64() < 1e-60, "k = {k}");
    }
    assert!(d.harmonic_moment(0).is_err());
}

#[test]
fn moments_at_critical_point() {
    let d = GrowthDomain::with_samples(&pb(), 64).unwrap();
    assert!((d.harmonic_moment(3).unwrap().re.to_f64() - 0.25).abs() < 1e-30);
    assert!(d.harmonic_moment(4).unwrap().abs().to_f64() < 1e-30);
}

#[test]
fn schwarz_identity_on_boundary() {
    let d = domain_a();
    let ctx = ctx256();
    let r0 = d.schwarz_residual(&ctx.real(0.0)).unwrap();
    assert!(r0 < 1e-12);
    for j in 0..64 {
        let theta = &ctx.pi() * &ctx.ratio(2 * j, 64);
        let res = schwarz_residual(&theta, d).unwrap();
        assert!(res < 1e-12, "theta index {j}: {res:e}");
        let mirror = d.schwarz_residual(&(-theta)).unwrap();
        assert!((res - mirror).abs() < 1e-12);
    }
}

#[test]
fn boundary_geometry_subcritical() {
    let d = domain_a_double();
    assert_eq!(d.boundary.len(), 2048);
    assert!(d.is_simple());
    assert_eq!(d.winding_number(Complex64::new(0.0, 0.0)), 1);
    let r_plus_a = d.conformal.r.to_f64() + d.conformal.a.to_f64();
    let x_star = 0.78548197949983965732;
    assert!(x_star < r_plus_a);
    assert!(d.min_h_prime_on_circle(3000) > 0.1);
}

#[test]
fn boundary_geometry_critical() {
    let p = ModelParams::new(2.0, 0.25, PrecisionContext::double()).unwrap();
    let d = GrowthDomain::new(&p).unwrap();
    assert!(d.is_critical());
    // cusps at w = 1, omega, omega^2
    assert!(d.min_h_prime_on_circle(3000) < 1e-14);
    assert_eq!(d.winding_number(Complex64::new(0.0, 0.0)), 1);
    // the support endpoint x_star = 3 reaches h(1) = r + a
    assert!((d.conformal.r.to_f64() + d.conformal.a.to_f64() - 3.0).abs() < 1e-15);
}

#[test]
fn exterior_classification() {
    let d = domain_a_double();
    assert_eq!(d.is_exterior(Complex64::new(0.1, 0.0)), Some(false));
    assert_eq!(d.is_exterior(Complex64::new(3.0, 1.0)), Some(true));
    let edge = d.boundary[17];
    assert_eq!(d.is_exterior(edge), None);
}

#[test]
fn exterior_potential_identity() {
    let d = domain_a_double();
    let ctx = PrecisionContext::double();
    let far = d.conformal.r.to_f64() * 2.0 + d.conformal.a.to_f64() * 2.0;
    let pts = [
        (far, 0.0),
        (1.2, 0.0),
        (-1.0, 0.0),
        (0.0, 1.1),
        (0.9, 0.9),
        (-0.7, -1.0),
        (2.5, -1.5),
        (1.5, 2.0),
        (-3.0, 0.2),
        (0.3, -1.2),
    ];
    for (x, y) in pts {
        let z = ctx.complex(x, y);
        let res = exterior_potential_residual(&z, d).unwrap();
        assert!(res < 1e-4, "z = ({x}, {y}): {res:e}");
    }
}

#[test]
fn exterior_potential_rotation_and_control() {
    let d = domain_a_double();
    let ctx = PrecisionContext::double();
    let z = ctx.complex(1.4, 0.3);
    let res = d.exterior_potential_residual(&z).unwrap();
    let rot = d.exterior_potential_residual(&(&ctx.omega() * &z)).unwrap();
    assert!((res - rot).abs() < 1e-10);
    let scaled = d.exterior_potential_residual_scaled(&z, 1.1, AreaGrid::default()).unwrap();
    let f1 = d.curve().cauchy_f1(&z).unwrap().to_c64().norm();
    let expected = 0.1 * f1 / 1.1;
    assert!((scaled - expected).abs() < 1e-4 + 1e-6 * expected, "{scaled} vs {expected}");
}

#[test]
fn exterior_potential_rejects_interior() {
    let d = domain_a_double();
    let ctx = PrecisionContext::double();
    assert!(matches!(d.exterior_potential_residual(&ctx.complex(0.2, 0.1)), Err(Error::InsideDomain)));
}

#[test]
fn m11_closed_form_matches_path_integral() {
    let d = domain_a();
    let ctx = ctx256();
    for (x, y) in [(1.5, 0.0), (0.0, 1.2), (-2.0, 0.7), (5.0, 5.0), (1.0, -0.9), (0.95, 0.0)] {
        let z = ctx.complex(x, y);
        let a = m11(&z, d).unwrap();
        let b = d.m11_by_path(&z).unwrap();
        assert!((&a - &b).abs().to_f64() < 1e-20, "({x}, {y})");
        assert!(a.abs().to_f64() > 0.0);
    }
}

#[test]
fn m11_normalization_and_symmetry() {
    let d = domain_a();
    let ctx = ctx256();
    let big = d.m11(&ctx.complex(1e8, 3e7)).unwrap();
    assert!((&big - &ctx.one()).abs().to_f64() < 1e-8);
    let z = ctx.complex(1.1, 0.6);
    let m = d.m11_by_path(&z).unwrap();
    let mr = d.m11_by_path(&(&ctx.omega() * &z)).unwrap();
    assert!((&m - &mr).abs().to_f64() < 1e-40);
}

#[test]
fn m11_rejects_points_near_boundary() {
    let d = domain_a();
    let ctx = ctx256();
    // h(e^{i 0.3}) lies on the boundary: |w| = 1 for its preimage
    let z = d.boundary_point(&ctx.real(0.3));
    assert!(matches!(d.m11(&z), Err(Error::SheetAmbiguity)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn parametrization_gives_first_sheet(rad in 1.05f64..4.0, th in 0.05f64..2.0) {
        // xi_1(h(w)) = h(1/w) for |w| > 1, away from the real axis
        let d = domain_a_double();
        let w = Complex::from_c64(Complex64::from_polar(rad, th), 53);
        let z = d.h(&w);
        let xi = d.curve().xi_branches(&z).unwrap().xi[0].clone();
        let want = d.h(&w.recip());
        prop_assert!((&xi - &want).abs().to_f64() < 1e-10 * (1.0 + want.abs().to_f64()));
    }
}

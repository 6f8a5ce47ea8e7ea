use cubicmm::curve::{cauchy_transform, curve_constants, ModelParams, Side};
use cubicmm::measures::*;
use cubicmm::numerics::panel_nodes;
use cubicmm::{Complex, Error, PrecisionContext, Real};
use proptest::prelude::*;
use std::f64::consts::PI;

fn ctx() -> PrecisionContext {
    PrecisionContext::double()
}

fn pa() -> ModelParams {
    ModelParams::new(0.5, 0.25, ctx()).unwrap()
}

fn pc() -> ModelParams {
    ModelParams::new(0.25, 0.5, ctx()).unwrap()
}

fn c(re: f64, im: f64) -> Complex {
    ctx().complex(re, im)
}

fn c64(z: &Complex) -> num_complex::Complex64 {
    z.to_c64()
}

/// `int_x^{x_star} rho1` by Gauss-Legendre under `s = x_star - (x_star - x) u^2`,
/// straight from the density.
fn mu1_above(m: &EquilibriumMeasures, x: f64) -> f64 {
    let xs = m.x_star().to_f64();
    let len = xs - x;
    let mut acc = 0.0;
    for (u, w) in panel_nodes(&ctx().real(0.0), &ctx().real(1.0), 30, 4) {
        let u = u.to_f64();
        let s = xs - len * u * u;
        acc += w.to_f64() * 2.0 * len * u * m.density_mu1(&ctx().real(s)).unwrap().to_f64();
    }
    acc
}

#[test]
fn masses_within_budget() {
    for p in [pa(), pc()] {
        let m = EquilibriumMeasures::new(&p).unwrap();
        let m1 = m.mass_mu1();
        let m2 = m.mass_mu2().unwrap();
        assert!((m1.value.to_f64() - 1.0).abs() < 1e-8, "m1 {}", m1.value.to_f64());
        assert!(m1.error < 1e-8);
        assert!((m2.value.to_f64() - 0.5).abs() < 1e-6, "m2 {}", m2.value.to_f64());
        assert!(m2.error < 1e-6);
    }
}

#[test]
fn masses_on_parameter_grid() {
    for t3 in [0.2, 0.35, 0.5] {
        let crit = 1.0 / (8.0 * t3 * t3);
        for frac in [0.3, 0.6, 0.9] {
            let p = ModelParams::new(frac * crit, t3, ctx()).unwrap();
            let m = EquilibriumMeasures::new(&p).unwrap();
            let m1 = m.mass_mu1();
            let m2 = m.mass_mu2().unwrap();
            assert!((m1.value.to_f64() - 1.0).abs() <= m1.error.max(1e-12), "t3 {t3} frac {frac}");
            assert!((m2.value.to_f64() - 0.5).abs() <= m2.error.max(1e-12) + 1e-10, "t3 {t3} frac {frac}");
        }
    }
}

#[test]
fn mass_at_extended_precision() {
    let ctx = PrecisionContext::new(128).unwrap();
    let p = ModelParams::new(0.5, 0.25, ctx).unwrap();
    let m = EquilibriumMeasures::new(&p).unwrap().mass_mu1();
    assert!((m.value - 1.0).abs() < 1e-30);
}

#[test]
fn mu1_density_shape() {
    let m = EquilibriumMeasures::new(&pa()).unwrap();
    let xs = m.x_star().to_f64();
    let mut prev = f64::INFINITY;
    for k in 1..100 {
        let v = m.density_mu1(&ctx().real(xs * k as f64 / 100.0)).unwrap().to_f64();
        assert!(v > 0.0);
        assert!(v < prev, "not decreasing at {k}");
        prev = v;
    }
    let near = m.density_mu1(&ctx().real(xs * (1.0 - 1e-10))).unwrap().to_f64();
    assert!(near < 1e-4);
    assert!(matches!(m.density_mu1(&ctx().real(xs * 1.01)), Err(Error::OutOfSupport)));
    assert!(matches!(m.density_mu1(&ctx().real(0.0)), Err(Error::OutOfSupport)));
}

#[test]
fn mu2_density_positive_and_symmetric() {
    let m = EquilibriumMeasures::new(&pa()).unwrap();
    for s in [1e-6, 1e-3, 0.1, 1.0, 10.0, 1e3] {
        let s = ctx().real(s);
        let v: Vec<DensitySample> = (0..3).map(|j| m.density_mu2_sample(&s, j).unwrap()).collect();
        assert!(v[0].value > 0.0);
        // far out the density is a small difference of O(1/s) transforms; compare within the rounding bound
        for j in 1..3 {
            let d = (&v[j].value - &v[0].value).abs().to_f64();
            assert!(d <= 1e-12 * v[0].value.to_f64() + v[j].error + v[0].error, "{} {}", v[0].value.to_f64(), v[j].value.to_f64());
        }
    }
    // positive limit at the origin
    let a = m.density_mu2(&ctx().real(1e-10)).unwrap().to_f64();
    let b = m.density_mu2(&ctx().real(1e-12)).unwrap().to_f64();
    assert!(a > 0.1 && (a - b).abs() < 1e-4);
    assert!(matches!(m.density_mu2(&ctx().real(-1.0)), Err(Error::OutOfSupport)));
}

#[test]
fn mu2_tail_decays_like_power() {
    let m = EquilibriumMeasures::new(&pa()).unwrap();
    let e = m.tail_exponent().unwrap();
    assert!((e + 2.5).abs() < 1e-3, "{e}");
}

#[test]
fn g1_is_log_at_infinity() {
    let m = EquilibriumMeasures::new(&pa()).unwrap();
    let mut prev = f64::INFINITY;
    for r in [4.0, 40.0] {
        let z = Complex::cis(&ctx().real(0.4)).scale_f64(r);
        let d = (c64(&m.g1(&z, Side::Off).unwrap().value) - c64(&z.ln())).norm();
        assert!(d < prev / 500.0 || prev.is_infinite(), "{d} vs {prev}");
        prev = d;
    }
    assert!(prev < 1e-5);
}

#[test]
fn g1_rotation_rule() {
    let m = EquilibriumMeasures::new(&pa()).unwrap();
    let w = ctx().omega();
    for z in [c(1.2, 0.3), c(0.3, -0.2), c(0.5, 0.7)] {
        let g = c64(&m.g1(&z, Side::Off).unwrap().value);
        let gw = c64(&m.g1(&(&z * &w), Side::Off).unwrap().value);
        let want = g + num_complex::Complex64::new(0.0, 2.0 * PI / 3.0);
        assert!((gw - want).norm() < 1e-12, "{gw} {want}");
    }
}

#[test]
fn g2_real_on_positive_axis() {
    let m = EquilibriumMeasures::new(&pa()).unwrap();
    for x in [1e-3, 0.3, 1.0, 5.0, 60.0] {
        let g = m.g2(&c(x, 0.0), Side::Off).unwrap().value;
        assert!(g.im.abs() < 1e-14);
    }
}

#[test]
fn g_functions_reject_cuts() {
    let m = EquilibriumMeasures::new(&pa()).unwrap();
    assert!(matches!(m.g1(&c(0.3, 0.0), Side::Off), Err(Error::OnCut)));
    assert!(matches!(m.g1(&c(-1.0, 0.0), Side::Off), Err(Error::OnCut)));
    assert!(matches!(m.g2(&c(-1.0, 0.0), Side::Off), Err(Error::OnCut)));
    assert!(matches!(g_function(FieldFunction::Phi1, &c(1.0, 1.0), &pa()), Err(Error::InvalidParameters(_))));
}

#[test]
fn g_derivative_is_cauchy_transform() {
    let p = pa();
    let m = EquilibriumMeasures::new(&p).unwrap();
    let h = 1e-5;
    for z in [c(1.1, 0.4), c(-0.4, 0.3), c(0.2, -0.9), c(3.0, 0.1)] {
        for (k, which) in [(1, FieldFunction::G1), (2, FieldFunction::G2)] {
            let f = |dz: f64| c64(&m.g_function(which, &(&z + &c(dz, 0.0)), Side::Off).unwrap().value);
            let d = (f(h) - f(-h)) / (2.0 * h);
            let want = c64(&cauchy_transform(k, &z, &p).unwrap());
            assert!((d - want).norm() < 1e-8 * want.norm().max(1.0), "k {k} z {z:?}: {d} vs {want}");
        }
    }
}

#[test]
fn g1_jump_on_first_support() {
    let m = EquilibriumMeasures::new(&pa()).unwrap();
    let x = 0.4;
    let gp = c64(&m.g1(&c(x, 0.0), Side::Plus).unwrap().value);
    let gm = c64(&m.g1(&c(x, 0.0), Side::Minus).unwrap().value);
    // the side limits agree with nearby off-cut values
    let above = c64(&m.g1(&c(x, 1e-9), Side::Off).unwrap().value);
    assert!((gp - above).norm() < 1e-6);
    let jump = (gp - gm).im;
    assert!((jump - 2.0 * PI * mu1_above(&m, x)).abs() < 1e-10);
}

#[test]
fn el3_identity_on_first_support() {
    let m = EquilibriumMeasures::new(&pa()).unwrap();
    let ell = m.el_constant().unwrap().ell.to_f64();
    for x in [0.05, 0.3, 0.7] {
        let z = c(x, 0.0);
        let gp = m.g1(&z, Side::Plus).unwrap().value.re.to_f64();
        let gm = m.g1(&z, Side::Minus).unwrap().value.re.to_f64();
        let g2 = m.g2(&z, Side::Off).unwrap().value.re.to_f64();
        let v = m.external_field(&z).to_f64();
        assert!((gp + gm - g2 - v - ell).abs() < 1e-10);
    }
}

#[test]
fn phi1_vanishes_at_branch_points() {
    let m = EquilibriumMeasures::new(&pa()).unwrap();
    let xs = m.x_star().clone();
    for j in 0..3 {
        let z = ctx().omega_pow(j).scale(&xs);
        let v = m.phi1(&z, Side::Plus).unwrap().value;
        assert!(v.abs() < 1e-14);
    }
}

#[test]
fn phi1_boundary_values_are_mu1_masses() {
    let m = EquilibriumMeasures::new(&pa()).unwrap();
    for x in [0.05, 0.3, 0.6, 0.78] {
        let want = PI * mu1_above(&m, x);
        let p = c64(&m.phi1(&c(x, 0.0), Side::Plus).unwrap().value);
        let q = c64(&m.phi1(&c(x, 0.0), Side::Minus).unwrap().value);
        assert!(p.re.abs() < 1e-12 && q.re.abs() < 1e-12);
        assert!((p.im - want).abs() < 1e-10, "{} vs {want}", p.im);
        assert!((q.im + want).abs() < 1e-10);
    }
}

#[test]
fn re_phi1_minimal_at_node() {
    let p = pa();
    let m = EquilibriumMeasures::new(&p).unwrap();
    let k = curve_constants(&p).unwrap();
    let (xs, xh) = (k.x_star.to_f64(), k.x_hat.to_f64());
    let n = 80;
    let vals: Vec<(f64, f64)> = (1..=n)
        .map(|i| {
            let x = xs + 2.0 * (xh - xs) * i as f64 / n as f64;
            (x, m.phi1(&c(x, 0.0), Side::Off).unwrap().value.re.to_f64())
        })
        .collect();
    let best = vals.iter().cloned().fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    assert!(best.1 < 0.0);
    assert!((best.0 - xh).abs() <= 2.0 * (xh - xs) / n as f64, "min at {} not {xh}", best.0);
}

#[test]
fn phi_derivatives_are_branch_differences() {
    let p = pa();
    let m = EquilibriumMeasures::new(&p).unwrap();
    let h = 1e-6;
    let two_t0 = 2.0 * p.t0_f64();
    for z in [c(1.0, 0.5), c(-0.3, 0.2), c(0.1, -0.8), c(2.0, 0.05)] {
        let b = m.curve().xi_branches(&z).unwrap();
        let x: Vec<_> = b.xi.iter().map(c64).collect();
        for (which, want) in [(FieldFunction::Phi1, x[0] - x[1]), (FieldFunction::Phi2, x[1] - x[2])] {
            let f = |dz: f64| c64(&m.g_function(which, &(&z + &c(dz, 0.0)), Side::Off).unwrap().value);
            let d = (f(h) - f(-h)) / (2.0 * h) * two_t0;
            assert!((d - want).norm() < 1e-8 * want.norm(), "{which:?} at {z:?}");
        }
    }
}

#[test]
fn phi1_path_independent() {
    // phi1(z) = phi1(z1) + (1/2t0) int_{z1}^{z} (xi1 - xi2) along a segment inside S0
    let p = pa();
    let m = EquilibriumMeasures::new(&p).unwrap();
    let (z1, z) = (c(1.5, 0.6), c(0.9, -0.4));
    let a = c64(&z1);
    let d = c64(&z) - a;
    let mut acc = num_complex::Complex64::new(0.0, 0.0);
    for (u, w) in panel_nodes(&ctx().real(0.0), &ctx().real(1.0), 20, 4) {
        let s = a + d * u.to_f64();
        let b = m.curve().xi_branches(&c(s.re, s.im)).unwrap();
        acc += (c64(&b.xi[0]) - c64(&b.xi[1])) * d * w.to_f64();
    }
    let want = c64(&m.phi1(&z1, Side::Off).unwrap().value) + acc / (2.0 * p.t0_f64());
    let got = c64(&m.phi1(&z, Side::Off).unwrap().value);
    assert!((got - want).norm() < 1e-12);
}

#[test]
fn phi1_rotation_invariant() {
    let m = EquilibriumMeasures::new(&pa()).unwrap();
    let z = c(1.1, 0.3);
    let v = c64(&m.phi1(&z, Side::Off).unwrap().value);
    for j in 1..3 {
        let zw = &z * &ctx().omega_pow(j);
        let vw = c64(&m.phi1(&zw, Side::Off).unwrap().value);
        assert!((v - vw).norm() < 1e-13);
    }
}

#[test]
fn el1_constant_and_strict_off_support() {
    let p = pa();
    let m = EquilibriumMeasures::new(&p).unwrap();
    let e = m.el_constant().unwrap();
    assert!(e.spread < 1e-8);
    assert_eq!(e.profile.len(), 50);
    let k = curve_constants(&p).unwrap();
    let (xs, xh) = (k.x_star.to_f64(), k.x_hat.to_f64());
    for i in 1..=20 {
        let x = xs + (xh - xs) * i as f64 / 20.0;
        let lhs = m.el1_lhs(&c(x, 0.0)).unwrap();
        assert!(lhs < e.ell, "x = {x}");
    }
}

#[test]
fn ell_is_three_gamma2() {
    for p in [pa(), pc()] {
        let e = el_constant(&p).unwrap();
        assert!((e.ell.to_f64() - 3.0 * e.gamma2.to_f64()).abs() < 1e-6);
        assert!((e.gamma2.to_f64() - e.gamma2_direct.to_f64()).abs() < 1e-8);
    }
}

#[test]
fn el_constant_needs_subcritical() {
    let p = ModelParams::new(2.0, 0.25, ctx()).unwrap();
    assert!(matches!(el_constant(&p), Err(Error::CriticalRegime)));
}

#[test]
fn el2_balayage_residual() {
    let m = EquilibriumMeasures::new(&pa()).unwrap();
    let xs = m.x_star().to_f64();
    let mut max_res: f64 = 0.0;
    let mut max_scaled: f64 = 0.0;
    for i in 1..=20 {
        let s = 2.0 * xs * i as f64 / 20.0;
        let ray = i % 3;
        let dir = [ctx().unit(1, 3), ctx().complex(-1.0, 0.0), ctx().unit(-1, 3)][ray].clone();
        let z = dir.scale_f64(s);
        let r = m.el2_residual(&z).unwrap();
        max_res = max_res.max(r.abs());
        max_scaled = max_scaled.max(m.el2_residual_scaled(&z, 0.9).unwrap().abs());
        let on_other: Vec<f64> = (0..3)
            .map(|j| {
                let d = [ctx().unit(1, 3), ctx().complex(-1.0, 0.0), ctx().unit(-1, 3)][j].clone();
                m.el2_residual(&d.scale_f64(s)).unwrap()
            })
            .collect();
        assert!((on_other[0] - on_other[1]).abs() < 1e-12 && (on_other[0] - on_other[2]).abs() < 1e-12);
    }
    assert!(max_res < 1e-6, "{max_res}");
    assert!(max_scaled > 1e3 * max_res.max(1e-12));
    assert!(matches!(m.el2_residual(&c(0.3, 0.0)), Err(Error::InvalidParameters(_))));
}

#[test]
fn endpoint_exponents() {
    let pb = ModelParams::new(2.0, 0.25, ctx()).unwrap();
    let a = endpoint_exponent(&pa()).unwrap();
    let cc = endpoint_exponent(&pc()).unwrap();
    let b = endpoint_exponent(&pb).unwrap();
    assert!((a - 0.5).abs() < 0.02, "{a}");
    assert!((cc - 0.5).abs() < 0.02, "{cc}");
    assert!((b - 1.5).abs() < 0.05, "{b}");
}

fn analytic_cells(m: &EquilibriumMeasures) -> (CellMeasure, CellMeasure) {
    let edges = geometric_edges(m.r_tail().to_f64(), 120, 1.05);
    m.cells(100, &edges).unwrap()
}

#[test]
fn energy_minimal_and_rotation_invariant() {
    let p = pa();
    let m = EquilibriumMeasures::new(&p).unwrap();
    let (mu1, mu2) = analytic_cells(&m);
    assert!((mu1.total_mass() - 1.0).abs() < 1e-12);
    assert!((mu2.total_mass() - 0.5).abs() < 1e-12);
    let e0 = energy(&mu1, &mu2, &p).unwrap();
    // move 5% of the first measure into the cell at the origin
    let mut pushed = mu1.clone();
    for cell in pushed.cells.iter_mut() {
        cell.mass *= 0.95;
    }
    for ray in 0..3 {
        let first = pushed.cells.iter_mut().find(|c| c.ray == ray).unwrap();
        first.mass += 0.05 / 3.0;
    }
    let e1 = energy(&pushed, &mu2, &p).unwrap();
    assert!(e1 > e0, "{e1} <= {e0}");
    for perm in [[1, 2, 0], [2, 0, 1]] {
        let er = energy(&mu1.relabeled(perm), &mu2.relabeled(perm), &p).unwrap();
        assert!((er - e0).abs() < 1e-10 * e0.abs().max(1.0));
    }
}

#[test]
fn energy_checks_masses() {
    let p = pa();
    let m = EquilibriumMeasures::new(&p).unwrap();
    let (mut mu1, mu2) = analytic_cells(&m);
    mu1.cells[0].mass += 1e-3;
    assert!(matches!(energy(&mu1, &mu2, &p), Err(Error::MassViolation { .. })));
}

#[test]
fn collinear_log_average_matches_quadrature() {
    // closed form against a fine tensor rule on the smooth far-field case
    let closed = mean_log_distance(0.0, 0.0, 1.0, 1.5, 2.5);
    let mut acc = 0.0;
    let g = panel_nodes(&ctx().real(0.0), &ctx().real(1.0), 20, 1);
    for (u, wu) in &g {
        for (v, wv) in &g {
            acc += wu.to_f64() * wv.to_f64() * (1.5 + v.to_f64() - u.to_f64()).ln();
        }
    }
    assert!((closed - acc).abs() < 1e-12);
    // diagonal: average of ln|x - y| over a square of side h is ln h - 3/2
    let h: f64 = 0.01;
    assert!((mean_log_distance(0.0, 0.0, h, 0.0, h) - (h.ln() - 1.5)).abs() < 1e-12);
}

#[test]
fn sample_pair_reports_everything() {
    let m = EquilibriumMeasures::new(&pa()).unwrap();
    let s = m.sample(20, 20).unwrap();
    assert_eq!(s.mu1.len(), 21);
    assert_eq!(s.mu2.len(), 20);
    assert!(s.mu1.iter().all(|d| d.value >= 0.0 && d.s <= *m.x_star()));
    assert!(s.mu2.iter().all(|d| d.value > 0.0));
    assert!(s.ell.is_some());
    assert!((s.tail_exponent + 2.5).abs() < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn densities_nonnegative(u in 0.001f64..0.999, ls in -6.0f64..4.0) {
        let m = EquilibriumMeasures::new(&pa()).unwrap();
        let x: Real = m.x_star() * u;
        prop_assert!(m.density_mu1(&x).unwrap() > 0.0);
        prop_assert!(m.density_mu2(&ctx().real(10f64.powf(ls))).unwrap() > 0.0);
    }

    #[test]
    fn g1_rotation_random(r in 0.2f64..5.0, th in -1.0f64..1.0) {
        let m = EquilibriumMeasures::new(&pa()).unwrap();
        let z = Complex::cis(&ctx().real(th)).scale_f64(r);
        prop_assume!((r - m.x_star().to_f64()).abs() > 1e-3 || th.abs() > 1e-3);
        prop_assume!(th.abs() > 1e-6);
        let g = c64(&m.g1(&z, Side::Off).unwrap().value);
        let gw = c64(&m.g1(&(&z * &ctx().omega()), Side::Off).unwrap().value);
        prop_assert!((gw - g - num_complex::Complex64::new(0.0, 2.0 * PI / 3.0)).norm() < 1e-10);
    }
}

#[test]
fn re_phi1_sign_chart_window() {
    let p = ModelParams::new(1.8, 0.25, PrecisionContext::double()).unwrap();
    let m = EquilibriumMeasures::new(&p).unwrap();
    let xh = curve_constants(&p).unwrap().x_hat.to_f64();
    let one = num_complex::Complex64::new(1.0, 0.0);
    let outer = m.re_phi1_sign_flip(one, xh).unwrap();
    assert!(outer > xh);
    assert!(m.re_phi1(one * (outer * 0.999)).unwrap() < 0.0);
    assert!(m.re_phi1(one * (outer * 1.001)).unwrap() > 0.0);
    // on the first support the extension is zero; just off it, positive
    assert!(m.re_phi1(num_complex::Complex64::new(0.5, 1e-4)).unwrap() > 0.0);
    assert!(m.re_phi1_window().unwrap() >= 1.3 * outer);
    let crit = EquilibriumMeasures::new(&ModelParams::new(2.0, 0.25, PrecisionContext::double()).unwrap()).unwrap();
    assert!(matches!(crit.re_phi1_window(), Err(Error::CriticalRegime)));
}

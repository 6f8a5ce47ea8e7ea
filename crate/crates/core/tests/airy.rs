use cubicmm::airy::*;
use cubicmm::curve::ModelParams;
use cubicmm::{Complex, Error, PrecisionContext, Real};

fn ctx() -> PrecisionContext {
    PrecisionContext::new(256).unwrap()
}

// (re, im, Ai re, Ai im, Ai' re, Ai' im), 80-digit reference values from an
// independent arbitrary-precision library
const REFERENCE: [(f64, f64, &str, &str, &str, &str); 7] = [
    (0.3, -0.2, "0.27710256927587665682351119396222076188921284923753251839379972056568690242722812", "0.049302117253468179700247078443060792921663358759179291439898042570548061216170271", "-0.2492305833505044967227036804951849973240224854198488095482608178008934954589208", "-0.017350467779168919297290397006028883646403342476173593696414641924246678531211754"),
    (2.5, 1.5, "-0.017675940123105692235627496543583297350298544005675093735504374561253329477107971", "-0.012457640201063189569464452895117095096215430316881765000017690142218713700552407", "0.025097616844942297786292346270230577349275807896501891383357325068621647452566477", "0.028797519109549521021835831418916071734257663143878136656591543196786364130116043"),
    (-4.0, 0.5, "-0.11296309743809584181631716959813354551572658811264314063212715996167097499629373", "-0.46278795314780677562976248479758246032520372631020734305357033911022516471076231", "-1.2078781976948420371750714237769883824551894322062870073099884073417086321385303", "0.20319101450179930094152315900012966570032876432244037024748185563562541516462068"),
    (-1.0, -6.0, "723.73736710392532535625797652314111494845029690571828224462080852266766668527354", "-648.97322131539147344601114217401877440894583077793221515474176689107230330087068", "44.418718048967442830593363888094012245341265538146359112218443684514935552277626", "2362.1009365797650387625379478072647368367271312701102927537117811614578660848537"),
    (12.0, -3.0, "-0.00000000000013035077828781400761459255574658351443474890655630363992850665637604995834454844", "-0.00000000000022973280364299732264169907472739151835859158296030909162293192159514907300681855", "0.00000000000055516593860105247943717463814131310728979207410515701495651378326094220465491955", "0.0000000000007509727646125060852092380086676637489895207321293972028233671668780579129202813"),
    (-25.0, 2.0, "2154.8639258927854701783634202242343609069118010714069518487039264327642859576477", "1763.1045771346837971013574420423767582236430523342428649944469408639311752327816", "8412.048403568829925301548730758209770666997502600540696770783107626233050681992", "-11116.118418494318777548500464805748863140388802645825516476162764515872323244809"),
    (40.0, 30.0, "3.8921257947917992065307398108154859878275233330317661439917357752615666869292825e-60", "4.2179588597912913211768776084756262477961778662210769131886444079057115563507393e-60", "-1.6705717219071796255203969185537358368177879278226284632420869009745565763317419e-59", "-3.7003217103137566141721679066177714707308788419259362207586083036318897615503769e-59"),
];

fn rel(a: &Complex, b: &Complex) -> f64 {
    ((a - b).abs() / b.abs()).to_f64()
}

/// ln Gamma(x) by Stirling's series after shifting the argument up by `shift`.
fn ln_gamma_stirling(x: &Real, shift: usize) -> Real {
    let bits = x.bits();
    // Bernoulli numbers from sum_{j<=m} C(m+1, j) B_j = 0
    let terms = 24;
    let mut b: Vec<Real> = vec![Real::from_f64(1.0, bits)];
    for m in 1..=2 * terms {
        let mut s = Real::from_f64(0.0, bits);
        let mut binom = 1.0f64;
        for (j, bj) in b.iter().enumerate() {
            s += bj * binom;
            binom = binom * (m + 1 - j) as f64 / (j + 1) as f64;
        }
        b.push(-(s / (m + 1) as f64));
    }
    let mut acc = Real::from_f64(0.0, bits);
    let mut y = x.clone();
    for _ in 0..shift {
        acc -= y.ln();
        y += 1.0;
    }
    let half_ln_2pi = (Real::pi(bits) * 2.0).ln() * 0.5;
    let mut s = (&y - 0.5) * y.ln() - &y + half_ln_2pi;
    let mut yp = y.clone();
    let y2 = y.square();
    for k in 1..=terms {
        s += &b[2 * k] / ((2 * k) as f64 * (2 * k - 1) as f64) / &yp;
        yp = &yp * &y2;
    }
    acc + s
}

#[test]
fn gamma_third_matches_stirling_oracle() {
    let bits = 300;
    let x = Real::from_f64(1.0, bits) / 3.0;
    let oracle = ln_gamma_stirling(&x, 400);
    let got = gamma_one_third(bits).ln();
    assert!((got - oracle).abs().to_f64() < 1e-80);
}

#[test]
fn origin_values_from_gamma() {
    let (a, b) = airy_origin(256);
    let c = ctx();
    assert!((a - c.parse("0.35502805388781723926").unwrap()).abs().to_f64() < 1e-20);
    assert!((b - c.parse("-0.25881940379280679840").unwrap()).abs().to_f64() < 1e-20);
}

#[test]
fn values_against_reference() {
    let c = ctx();
    for (re, im, ar, ai, br, bi) in REFERENCE {
        let z = c.complex(re, im);
        let (a, b) = airy_pair(&z, false, &c).unwrap();
        let wa = Complex::new(c.parse(ar).unwrap(), c.parse(ai).unwrap());
        let wb = Complex::new(c.parse(br).unwrap(), c.parse(bi).unwrap());
        let tol = 8.0 * c.eps() * (1.0 + z.abs().to_f64());
        assert!(rel(&a, &wa) < tol, "Ai at {re}+{im}i: {:e}", rel(&a, &wa));
        assert!(rel(&b, &wb) < tol, "Ai' at {re}+{im}i: {:e}", rel(&b, &wb));
    }
}

#[test]
fn hardware_precision_path() {
    let c = PrecisionContext::double();
    let (re, im, ar, ai, ..) = REFERENCE[1];
    let a = airy_ai(&c.complex(re, im), false, &c).unwrap().to_c64();
    let want = num_complex::Complex64::new(ar.parse().unwrap(), ai.parse().unwrap());
    assert!((a - want).norm() / want.norm() < 1e-14);
}

#[test]
fn scaled_and_unscaled_agree() {
    let c = ctx();
    for (re, im) in [(3.0, 1.0), (-2.0, -2.0), (20.0, 5.0)] {
        let z = c.complex(re, im);
        let s = airy_ai(&z, true, &c).unwrap();
        let u = airy_ai(&z, false, &c).unwrap();
        let back = &s * &(-airy_zeta(&z)).exp();
        assert!(rel(&back, &u) < 1e-70);
    }
    // far out on the positive axis the unscaled value is tiny but representable
    let z = c.complex(500.0, 0.0);
    let s = airy_ai(&z, true, &c).unwrap();
    let want = 0.5 / (std::f64::consts::PI.sqrt() * 500f64.powf(0.25));
    assert!((s.re.to_f64() - want).abs() / want < 1e-4);
    let u = airy_ai(&z, false, &c).unwrap();
    let lz = u.abs().ln().to_f64() + airy_zeta(&z).re.to_f64();
    assert!((lz - want.ln()).abs() < 1e-4);
    assert!(matches!(
        airy_ai(&PrecisionContext::double().complex(500.0, 0.0), false, &PrecisionContext::double()),
        Err(Error::OverflowAtPrecision { .. })
    ));
}

fn y(k: usize, z: &Complex, d: bool) -> Complex {
    solution_y(AirySolutionId::new(k).unwrap(), z, d, &ctx()).unwrap()
}

fn sample_points(n: usize) -> Vec<Complex> {
    let c = ctx();
    (0..n)
        .map(|k| {
            let t = k as f64;
            c.complex(3.0 * (1.7 * t + 0.3).sin(), 3.0 * (2.3 * t + 1.1).cos())
        })
        .collect()
}

#[test]
fn three_term_identity() {
    for z in sample_points(8) {
        let s = &(&y(0, &z, false) + &y(1, &z, false)) + &y(2, &z, false);
        assert!(s.abs().to_f64() < 1e-70 * (1.0 + y(0, &z, false).abs().to_f64()));
    }
}

#[test]
fn wronskians_are_constant() {
    let c = ctx();
    let id = |k| AirySolutionId::new(k).unwrap();
    let two_pi_i = c.complex(0.0, 1.0).scale(&(c.pi() * 2.0));
    let minus_inv = -two_pi_i.recip();
    let cases: Vec<(usize, usize, Complex)> = vec![
        (0, 3, c.one()),
        (1, 4, c.one()),
        (2, 5, c.one()),
        (3, 4, c.zero()),
        (3, 5, c.zero()),
        (4, 5, c.zero()),
        (0, 1, minus_inv.clone()),
        (1, 2, minus_inv.clone()),
        (2, 0, minus_inv),
    ];
    for (i, j, want) in cases {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for z in sample_points(20) {
            let w = wronskian(id(i), id(j), &z, &c).unwrap();
            let d = (&w - &want).abs().to_f64();
            assert!(d < 1e-65, "W(y{i}, y{j}) off by {d:e}");
            lo = lo.min(w.re.to_f64());
            hi = hi.max(w.re.to_f64());
        }
        assert!(hi - lo <= 10.0 * c.eps().max(f64::EPSILON), "spread {}", hi - lo);
    }
}

#[test]
fn rotation_identities() {
    let c = ctx();
    let w = c.omega();
    for z in sample_points(5) {
        let y3 = y(3, &z, false);
        assert!(rel(&y(3, &(&z * &w), false), &y3) < 1e-70);
        assert!(rel(&y(4, &z, false), &(&y3 * &w)) < 1e-70);
        assert!(rel(&y(5, &z, false), &(&y3 * &c.omega_pow(2))) < 1e-70);
        // y6 = (y2 - y1)/3
        let y6 = (&y(2, &z, false) - &y(1, &z, false)) / 3.0;
        assert!((&y(6, &z, false) - &y6).abs().to_f64() < 1e-70 * (1.0 + y6.abs().to_f64()));
    }
    // y3'(0) = 0 up to rounding
    assert!(y(3, &c.zero(), true).abs().to_f64() < 1e-75);
}

#[test]
fn airy_equation_residual() {
    // y'' from a Cauchy integral on a circle (trapezoid rule converges geometrically)
    let c = ctx();
    let m = 96;
    let rho = 1.0;
    for z in [c.complex(0.4, -0.7), c.complex(-2.0, 1.5)] {
        for k in 0..9 {
            let mut acc = c.zero();
            for p in 0..m {
                let th = c.pi() * 2.0 * (p as f64) / (m as f64);
                let e = Complex::cis(&th);
                let pt = &z + &e.scale_f64(rho);
                // (2/(2 pi i)) \oint y/(s-z)^3 ds with ds = i rho e dth
                acc += &(&y(k, &pt, false) * &e.square().recip());
            }
            let ypp = acc.scale_f64(2.0 / (rho * rho)) / (m as f64);
            let val = y(k, &z, false);
            let res = (&ypp - &(&z * &val)).abs().to_f64();
            let bound = 1e3 * c.eps() * z.abs().to_f64().max(1.0) * val.abs().to_f64().max(1.0);
            assert!(res < bound, "y{k}: residual {res:e} > {bound:e}");
        }
    }
}

fn spec(level: u8, n: usize, piece: ContourPiece) -> WeightSpec {
    WeightSpec {
        level,
        n,
        params: ModelParams::new(0.5, 0.25, ctx()).unwrap(),
        piece,
        exact_constants: false,
    }
}

#[test]
fn weight_at_origin_is_ai0() {
    let c = ctx();
    let w = weight_w(&spec(0, 10, ContourPiece::Segment(0)), &c.zero(), &c).unwrap();
    let (a, b) = airy_origin(256);
    assert!((&w - &Complex::from_real(a)).abs().to_f64() < 1e-70);
    let w1 = weight_w(&spec(1, 10, ContourPiece::Segment(0)), &c.zero(), &c).unwrap();
    assert!((&w1 - &Complex::from_real(b)).abs().to_f64() < 1e-70);
}

#[test]
fn weight_rotation_covariance() {
    let c = ctx();
    let w = c.omega();
    let pts = [
        (ContourPiece::Segment(0), ContourPiece::Segment(1), c.complex(1.7, 0.0)),
        (ContourPiece::LegPlus(0), ContourPiece::LegPlus(1), c.complex(4.5, 0.7)),
        (ContourPiece::LegMinus(0), ContourPiece::LegMinus(1), c.complex(4.5, -0.7)),
        (ContourPiece::LegMinus(1), ContourPiece::LegMinus(2), &c.complex(4.5, -0.7) * &w),
    ];
    for (p0, p1, z) in pts {
        let zr = &z * &w;
        let a0 = weight_w(&spec(0, 8, p0), &z, &c).unwrap();
        let b0 = weight_w(&spec(0, 8, p1), &zr, &c).unwrap();
        assert!(rel(&b0, &(&a0 * &c.omega_pow(2))) < 1e-70);
        let a1 = weight_w(&spec(1, 8, p0), &z, &c).unwrap();
        let b1 = weight_w(&spec(1, 8, p1), &zr, &c).unwrap();
        assert!(rel(&b1, &(&a1 * &w)) < 1e-70);
    }
}

#[test]
fn weight_piece_mismatch() {
    let c = ctx();
    let r = weight_w(&spec(0, 8, ContourPiece::Segment(0)), &c.complex(1.0, 0.5), &c);
    assert!(matches!(r, Err(Error::PieceMismatch(_))));
    let r = weight_w(&spec(0, 8, ContourPiece::LegPlus(0)), &c.complex(4.5, -0.7), &c);
    assert!(matches!(r, Err(Error::PieceMismatch(_))));
    let r = weight_w(&spec(0, 8, ContourPiece::Segment(1)), &c.complex(1.0, 0.0), &c);
    assert!(matches!(r, Err(Error::PieceMismatch(_))));
}

#[test]
fn exact_constants_restore_prefactors() {
    let c = ctx();
    let z = c.complex(1.1, 0.0);
    let mut s = spec(0, 12, ContourPiece::Segment(0));
    let plain = weight_w(&s, &z, &c).unwrap();
    s.exact_constants = true;
    let exact = weight_w(&s, &z, &c).unwrap();
    let sc = ScaleConstants::new(12, &s.params).unwrap();
    assert!(rel(&exact, &plain.scale(&(&sc.d_n * 3.0))) < 1e-70);
}

#[test]
fn scale_constants() {
    let p = ModelParams::new(0.5, 0.25, ctx()).unwrap();
    let sc = ScaleConstants::new(40, &p).unwrap();
    // c_n d_n^2 = n^{2/3} t0^{-2/3} t3^{-1/3} (t0/(n t3))^{2/3} = 1/t3
    assert!(((&sc.c_n * sc.d_n.square()) - 4.0).abs().to_f64() < 1e-70);
    assert!(sc.c_n > 0.0 && sc.d_n > 0.0);
}

#[test]
fn weight_exponent_asymptotics() {
    // w0(x) / (leading form) = 1 + O(1/n): the log deviation halves with n
    let c = ctx();
    let p = ModelParams::new(0.5, 0.25, c).unwrap();
    let k = cubicmm::curve::curve_constants(&p).unwrap();
    let x = &k.x_star * 0.5;
    let mut devs = Vec::new();
    for n in [40usize, 80] {
        let w = weight_w(&spec(0, n, ContourPiece::Segment(0)), &Complex::from_real(x.clone()), &c).unwrap();
        let sc = ScaleConstants::new(n, &p).unwrap();
        let nn = n as f64;
        let field = x.powf(&x.lit(1.5)) * 2.0 / (p.t3.sqrt() * 3.0) - x.powi(3) * &p.t3 / 3.0;
        let lead = -(field * nn / &p.t0) - (&sc.c_n * &x).ln() * 0.25 - (Real::pi(256).sqrt() * 2.0).ln();
        let lw = w.re.ln();
        let d = (&lw - &lead).abs().to_f64();
        devs.push(d);
    }
    assert!(devs[0] * 40.0 < 1.0);
    let ratio = devs[1] / devs[0];
    assert!(ratio > 0.3 && ratio < 0.7, "ratio {ratio}");
}

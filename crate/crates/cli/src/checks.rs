//! Numerical checks shared by `verify`, `phi-field` and the acceptance run.
//! Each function returns plain [`Check`] values; none of them measures time,
//! so reports stay byte-identical between runs.

use std::f64::consts::PI;

use cubicmm::airy::{solution_y, weight_w, AirySolutionId, ContourPiece, ScaleConstants, WeightSpec};
use cubicmm::curve::{curve_constants, discriminant_zeta, xi_branches, ModelParams, Regime};
use cubicmm::growth::{conformal_coeffs, GrowthDomain};
use cubicmm::measures::EquilibriumMeasures;
use cubicmm::numerics::solve_polynomial;
use cubicmm::orthopoly::{
    distance_to_sigma1, exterior_testpoints, orthopoly, zero_diagnostics, AsymptoticModel, ContourConfig, HermitianForm,
    MonicPolynomial,
};
use cubicmm::{oracle, Complex, PrecisionContext, Real};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::report::{dec64, Check};
use crate::{RunConfig, Suite};

/// Values within this band of zero count as zero.
pub const SIGN_BAND: f64 = 1e-12;

pub fn sign(v: f64) -> i8 {
    if v > SIGN_BAND {
        1
    } else if v < -SIGN_BAND {
        -1
    } else {
        0
    }
}

fn rel(a: &Complex, b: &Complex) -> f64 {
    (a - b).magnitude() / b.magnitude().max(f64::MIN_POSITIVE)
}

fn rel_real(a: &Real, b: &Real) -> f64 {
    (a - b).abs().to_f64() / b.abs().to_f64().max(f64::MIN_POSITIVE)
}

fn wrap<T>(name: &str, r: cubicmm::Result<T>, f: impl FnOnce(T) -> Vec<Check>) -> Vec<Check> {
    match r {
        Ok(v) => f(v),
        Err(e) => vec![Check::failed(name, e)],
    }
}

// ---- curve ----------------------------------------------------------------

/// Constants recomputed from the uniformizer relations alone:
/// `r^2 - 2 a^2 = t0`, `a = t3 r^2`, `rho^3 = 2a/r`, `x_star = h(rho)`,
/// `x_hat` the larger root of `2 t3 x^2 - 3x + t0 t3 + 1/t3` and
/// `A = -(2 s^3 - t3 s^4 - (t0 t3 + 1/t3) s^2)` with `s = r + a`.
pub struct ConstantsOracle {
    pub x_star: Real,
    pub x_hat: Real,
    pub a_const: Real,
    pub r: Real,
    pub a: Real,
    pub rho_crit: Real,
}

pub fn constants_oracle(params: &ModelParams) -> cubicmm::Result<ConstantsOracle> {
    let ctx = params.ctx();
    let (t0, t3) = (&params.t0, &params.t3);
    let cx = |v: Real| Complex::from_real(v);
    // 2 t3^2 R^2 - R + t0 = 0 in R = r^2; the smaller root continues from t3 = 0
    let big_r = solve_polynomial(&[cx(t0.clone()), cx(ctx.real(-1.0)), cx(t3.square() * 2.0)], &ctx)?;
    let rr = big_r.iter().map(|z| z.re.clone()).min_by(|a, b| a.partial_cmp(b).unwrap()).unwrap();
    let r = rr.sqrt();
    let a = t3 * &rr;
    let rho_crit = (&a * 2.0 / &r).cbrt();
    let x_star = &r * &rho_crit + &a / rho_crit.square();
    let lin = t0 * t3 + 1.0 / t3;
    let xs = solve_polynomial(&[cx(lin.clone()), cx(ctx.real(-3.0)), cx(t3 * 2.0)], &ctx)?;
    let x_hat = xs.iter().map(|z| z.re.clone()).max_by(|a, b| a.partial_cmp(b).unwrap()).unwrap();
    let s = &r + &a;
    let a_const = -(s.powi(3) * 2.0 - t3 * s.powi(4) - &lin * s.square());
    Ok(ConstantsOracle { x_star, x_hat, a_const, r, a, rho_crit })
}

/// Library constants against the oracle at 512 bits, relative `1e-30`.
pub fn constants(cfg: &RunConfig) -> Vec<Check> {
    let ctx = PrecisionContext::new(512).expect("512 bits");
    let params = match cfg.params_at(ctx) {
        Ok(p) => p,
        Err(e) => return vec![Check::failed("constants", e)],
    };
    let got = curve_constants(&params).and_then(|k| Ok((k, conformal_coeffs(&params)?)));
    let want = constants_oracle(&params);
    wrap("constants", got.and_then(|g| Ok((g, want?))), |((k, conf), o)| {
        [
            ("x_star", &k.x_star, &o.x_star),
            ("x_hat", &k.x_hat, &o.x_hat),
            ("A", &k.a_const, &o.a_const),
            ("r", &conf.r, &o.r),
            ("a", &conf.a, &o.a),
            ("rho_crit", &conf.rho_crit, &o.rho_crit),
        ]
        .into_iter()
        .map(|(name, g, w)| Check::below(format!("constants: {name} vs 512-bit oracle (rel)"), rel_real(g, w), 1e-30))
        .collect()
    })
}

/// Discriminant roots in `zeta = z^3`: `{x_star^3, x_hat^3, x_hat^3}`, a
/// triple root when critical.
pub fn discriminant(params: &ModelParams) -> Vec<Check> {
    let name = if params.regime == Regime::Critical {
        "discriminant: triple root at x_star^3 (rel)"
    } else {
        "discriminant: roots {x_star^3, x_hat^3 double} (rel)"
    };
    wrap(name, discriminant_zeta(params), |d| vec![Check::below(name, d.pattern_residual, 1e-20)])
}

/// `|xi1(x_hat) - x_hat| + |xi2(x_hat) - x_hat|`.
pub fn node_identity(params: &ModelParams) -> Vec<Check> {
    if params.regime != Regime::Subcritical {
        return Vec::new();
    }
    let name = "node: xi1(x_hat) = xi2(x_hat) = x_hat";
    let r = curve_constants(params).and_then(|k| {
        let xh = Complex::from_real(k.x_hat);
        let b = xi_branches(&xh, params)?;
        Ok((&b.xi[0] - &xh).magnitude() + (&b.xi[1] - &xh).magnitude())
    });
    wrap(name, r, |v| vec![Check::below(name, v, 1e-18)])
}

// ---- measures -------------------------------------------------------------

fn double(params: &ModelParams) -> ModelParams {
    params.with_ctx(PrecisionContext::double())
}

pub fn masses(params: &ModelParams) -> Vec<Check> {
    let r = EquilibriumMeasures::new(&double(params)).and_then(|m| Ok((m.mass_mu1(), m.mass_mu2()?)));
    wrap("masses", r, |(m1, m2)| {
        vec![
            Check::below("masses: 3 x first density integral = 1", (m1.value.to_f64() - 1.0).abs(), 1e-8),
            Check::below("masses: 3 x second density integral = 1/2", (m2.value.to_f64() - 0.5).abs(), 1e-6),
        ]
    })
}

/// Euler-Lagrange conditions on both supports and `ell = 3 gamma2`.
pub fn euler_lagrange(params: &ModelParams) -> Vec<Check> {
    let p = double(params);
    let r = EquilibriumMeasures::new(&p).and_then(|m| {
        let e = m.el_constant_with(50, f64::INFINITY)?;
        let k = curve_constants(&p)?;
        let (xs, xh) = (k.x_star.to_f64(), k.x_hat.to_f64());
        let mut gap = f64::INFINITY;
        for i in 1..=20 {
            let x = xs + (xh - xs) * i as f64 / 20.0;
            let lhs = m.el1_lhs(&p.ctx().complex(x, 0.0))?;
            gap = gap.min((&e.ell - &lhs).to_f64());
        }
        let ctx = p.ctx();
        let dirs = [ctx.unit(1, 3), ctx.complex(-1.0, 0.0), ctx.unit(-1, 3)];
        let mut el2: f64 = 0.0;
        for i in 1..=20 {
            let z = dirs[i % 3].scale_f64(2.0 * xs * i as f64 / 20.0);
            el2 = el2.max(m.el2_residual(&z)?.abs());
        }
        let l3g = (e.ell.to_f64() - 3.0 * e.gamma2.to_f64()).abs();
        Ok((e.spread, gap, el2, l3g))
    });
    wrap("euler-lagrange", r, |(spread, gap, el2, l3g)| {
        vec![
            Check::below("euler-lagrange: spread on first support (50 points)", spread, 1e-8),
            Check::holds("euler-lagrange: strictly below ell on (x_star, x_hat]", gap > 0.0, format!("min gap {}", dec64(gap)), "> 0"),
            Check::below("euler-lagrange: balayage residual on second support (20 points)", el2, 1e-6),
            Check::below("euler-lagrange: |ell - 3 gamma2|", l3g, 1e-6),
        ]
    })
}

/// Fitted exponent of the first density at `x_star`.
pub fn endpoint(params: &ModelParams) -> Vec<Check> {
    let (want, tol) = if params.regime == Regime::Critical { (1.5, 0.05) } else { (0.5, 0.02) };
    let name = format!("endpoint exponent = {want} +- {tol}");
    let r = EquilibriumMeasures::new(&double(params)).map(|m| m.endpoint_exponent());
    wrap(&name, r, |e| vec![Check::holds(&name, (e - want).abs() < tol, dec64(e), format!("{want} +- {tol}"))])
}

/// Discretized energy minimizer against the analytic first density.
pub fn oracle_agreement(params: &ModelParams, n1: usize) -> Vec<Check> {
    let p = double(params);
    let r = (|| {
        let problem = oracle::build_problem(&p, n1, 160, None)?;
        let sol = oracle::solve(&problem)?;
        let m = EquilibriumMeasures::new(&p)?;
        let ell = m.el_constant_with(50, f64::INFINITY)?.ell.to_f64();
        let d = problem.density1(&sol.weights1);
        let mut sup: f64 = 0.0;
        // interior nodes: drop the cells at the origin and next to x_star
        for (x, v) in &d[2..d.len() - 3] {
            let a = m.density_mu1(&p.ctx().real(*x))?.to_f64();
            sup = sup.max(((v - a) / a).abs());
        }
        Ok((sup, (sol.multiplier - ell).abs() / ell.abs()))
    })();
    wrap("oracle", r, |(sup, mult)| {
        vec![
            Check::below(format!("oracle: sup relative density error (n1 = {n1})"), sup, 5e-2),
            Check::below("oracle: multiplier vs ell (rel)", mult, 2e-2),
        ]
    })
}

// ---- domain ---------------------------------------------------------------

/// Max Schwarz residual over 64 equispaced boundary points; points where the
/// branch evaluation fails (cusps) are skipped and counted.
pub fn schwarz_max(d: &GrowthDomain) -> (f64, usize) {
    let ctx = d.ctx();
    let mut worst: f64 = 0.0;
    let mut skipped = 0;
    for k in 0..64 {
        let th = ctx.pi() * (2.0 * k as f64 / 64.0);
        match d.schwarz_residual(&th) {
            Ok(v) => worst = worst.max(v),
            Err(_) => skipped += 1,
        }
    }
    (worst, skipped)
}

pub fn domain_identities(params: &ModelParams, d: &GrowthDomain, schwarz: f64) -> Vec<Check> {
    let ctx = params.ctx();
    let mut out = Vec::new();
    let area = (&d.area() / &ctx.pi() - &params.t0).abs().to_f64();
    out.push(Check::below("domain: area / pi = t0", area, 1e-10));
    for k in 1..=6u32 {
        match d.harmonic_moment(k) {
            Ok(m) if k == 3 => out.push(Check::below("domain: moment 3 = t3", (&m - &Complex::from_real(params.t3.clone())).magnitude(), 1e-8)),
            Ok(m) => out.push(Check::below(format!("domain: |moment {k}| = 0"), m.magnitude(), 1e-8)),
            Err(e) => out.push(Check::failed(format!("domain: moment {k}"), e)),
        }
    }
    out.push(Check::below("domain: Schwarz residual (64 boundary points)", schwarz, 1e-12));
    if params.regime == Regime::Subcritical {
        out.extend(exterior_potential(params));
    }
    out
}

/// Cauchy transform of the first measure against the area integral over the
/// domain at 10 exterior points.
pub fn exterior_potential(params: &ModelParams) -> Vec<Check> {
    let name = "domain: exterior potential residual (10 points)";
    let p = double(params);
    let r = (|| {
        let d = GrowthDomain::with_samples(&p, 512)?;
        let mut worst: f64 = 0.0;
        for z in exterior_testpoints(&p, 10)? {
            worst = worst.max(d.exterior_potential_residual(&Complex::from_c64(z, 53))?);
        }
        Ok(worst)
    })();
    wrap(name, r, |v| vec![Check::below(name, v, 1e-4)])
}

// ---- Hermitian form ---------------------------------------------------------

fn random_poly(rng: &mut ChaCha8Rng, deg: usize) -> Vec<Complex> {
    (0..=deg).map(|_| Complex::from_f64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 53)).collect()
}

fn shift(f: &[Complex], k: usize) -> Vec<Complex> {
    let mut out = vec![Complex::from_f64(0.0, 0.0, 53); k];
    out.extend_from_slice(f);
    out
}

fn derivative(f: &[Complex]) -> Vec<Complex> {
    f.iter().enumerate().skip(1).map(|(k, c)| c * (k as f64)).collect()
}

fn rotate(f: &[Complex]) -> Vec<Complex> {
    let w = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
    f.iter().enumerate().map(|(k, c)| Complex::from_c64(c.to_c64() * w.powi(k as i32), 53)).collect()
}

/// Hermitian symmetry, rotation invariance and the structure relation
/// `t0 <f, g'> = n <z f, g> - n t3 <f, z^2 g>` for 20 random pairs of degree <= 4.
pub fn hermitian(params: &ModelParams, seed: u64) -> Vec<Check> {
    let p = double(params);
    let n = 2usize;
    let r = HermitianForm::new(n, 6, &p, &p.ctx()).and_then(|h| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (t0, t3, nf) = (p.t0_f64(), p.t3_f64(), n as f64);
        let (mut herm, mut rot, mut stru): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for _ in 0..20 {
            let (df, dg) = (rng.gen_range(0..=4), rng.gen_range(0..=4));
            let f = random_poly(&mut rng, df);
            let g = random_poly(&mut rng, dg);
            let fg = h.eval(&f, &g)?.to_c64();
            let gf = h.eval(&g, &f)?.to_c64();
            let scale = h.scale(&f, &g)?;
            herm = herm.max((fg - gf.conj()).norm() / scale);
            rot = rot.max((fg - h.eval(&rotate(&f), &rotate(&g))?.to_c64()).norm() / scale);
            let a = h.eval(&f, &derivative(&g))?.to_c64() * t0;
            let b = h.eval(&shift(&f, 1), &g)?.to_c64() * nf;
            let c = h.eval(&f, &shift(&g, 2))?.to_c64() * (nf * t3);
            let s = h.scale(&f, &derivative(&g))? * t0 + h.scale(&shift(&f, 1), &g)? * nf + h.scale(&f, &shift(&g, 2))? * nf * t3;
            stru = stru.max((a - b + c).norm() / s);
        }
        Ok((herm, rot, stru))
    });
    wrap("hermitian form", r, |(herm, rot, stru)| {
        vec![
            Check::below("hermitian form: symmetry / scale (20 pairs)", herm, 1e-10),
            Check::below("hermitian form: rotation invariance / scale", rot, 1e-10),
            Check::below("hermitian form: structure relation / scale", stru, 1e-10),
        ]
    })
}

// ---- Airy layer -------------------------------------------------------------

fn yk(k: usize, z: &Complex, deriv: bool, ctx: &PrecisionContext) -> cubicmm::Result<Complex> {
    solution_y(AirySolutionId::new(k)?, z, deriv, ctx)
}

/// ODE residual, three-term identity and Wronskian constants at 20 random
/// points, plus the weight covariance.
pub fn airy(params: &ModelParams, seed: u64) -> Vec<Check> {
    let ctx = PrecisionContext::new(256).expect("256 bits");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa1);
    let pts: Vec<Complex> = (0..20)
        .map(|_| {
            let r = 4.0 * rng.gen::<f64>().sqrt();
            let th = rng.gen_range(-PI..PI);
            Complex::from_c64(Complex64::from_polar(r, th), 256)
        })
        .collect();
    let mut out = Vec::new();
    out.extend(wrap("airy: equation residual", airy_ode(&pts, &ctx), |v| {
        vec![Check::below("airy: y'' - z y (scaled, 9 solutions, 20 points)", v, 1e-25)]
    }));
    let sum = pts.iter().try_fold(0.0f64, |acc, z| {
        let y0 = yk(0, z, false, &ctx)?;
        let s = &(&y0 + &yk(1, z, false, &ctx)?) + &yk(2, z, false, &ctx)?;
        Ok(acc.max(s.magnitude() / y0.magnitude().max(1.0)))
    });
    out.extend(wrap("airy: y0 + y1 + y2 = 0", sum, |v| vec![Check::below("airy: y0 + y1 + y2 = 0", v, 1e-25)]));
    out.extend(wrap("airy: Wronskians", wronskians(&pts, &ctx), |v| {
        vec![Check::below("airy: Wronskian constants (9 pairs)", v, 1e-25)]
    }));
    out.extend(wrap("airy: weight covariance", weight_covariance(params, 8, &ctx), |v| {
        vec![Check::below("airy: weight rotation covariance (rel)", v, 1e-20)]
    }));
    out
}

/// `y''` from the Cauchy integral on a unit circle (64 trapezoid nodes)
/// against `z y`, scaled by the size of `y` on that circle.
fn airy_ode(pts: &[Complex], ctx: &PrecisionContext) -> cubicmm::Result<f64> {
    let m = 64;
    let mut worst: f64 = 0.0;
    for z in pts {
        for k in 0..9 {
            let mut acc = ctx.zero();
            let mut size: f64 = 0.0;
            for p in 0..m {
                let e = ctx.unit(2 * p as i64, m as i64);
                let v = yk(k, &(z + &e), false, ctx)?;
                size = size.max(v.magnitude());
                acc += &(&v * &e.square().recip());
            }
            let ypp = acc.scale_f64(2.0) / (m as f64);
            let res = (&ypp - &(z * &yk(k, z, false, ctx)?)).magnitude();
            worst = worst.max(res / (size * z.magnitude().max(1.0)));
        }
    }
    Ok(worst)
}

fn wronskians(pts: &[Complex], ctx: &PrecisionContext) -> cubicmm::Result<f64> {
    use cubicmm::airy::wronskian;
    let two_pi_i = ctx.complex(0.0, 1.0).scale(&(ctx.pi() * 2.0));
    let minus_inv = -two_pi_i.recip();
    let cases = [
        (0, 3, ctx.one()),
        (1, 4, ctx.one()),
        (2, 5, ctx.one()),
        (3, 4, ctx.zero()),
        (3, 5, ctx.zero()),
        (4, 5, ctx.zero()),
        (0, 1, minus_inv.clone()),
        (1, 2, minus_inv.clone()),
        (2, 0, minus_inv),
    ];
    let mut worst: f64 = 0.0;
    for (i, j, want) in cases {
        for z in pts {
            let w = wronskian(AirySolutionId::new(i)?, AirySolutionId::new(j)?, z, ctx)?;
            worst = worst.max((&w - &want).magnitude());
        }
    }
    Ok(worst)
}

/// The weights on sector `j` are defined from sector 0 through
/// `w0(omega^j u) = omega^{2j} w0(u)`, `w1(omega^j u) = omega^j w1(u)`. Written
/// in the solutions at the actual point `z = omega^j u` this says
/// `w0(z) = y_{-j}(c z) e(z)` on the segment and `(y_{-j} - y_{k-j})(c z) e(z) / 3`
/// on the legs (`k = 1` upper, `k = 2` lower), with derivatives for `w1`.
/// Comparing with the library weights exercises the rotation bookkeeping
/// against an evaluation that never rotates back to sector 0.
pub fn weight_covariance(params: &ModelParams, n: usize, ctx: &PrecisionContext) -> cubicmm::Result<f64> {
    let p = params.with_ctx(ctx.clone());
    let k = curve_constants(&p)?;
    let xh = k.x_hat.to_f64();
    let sc = ScaleConstants::new(n, &p)?;
    let kappa = &p.t3 * (n as f64) / (&p.t0 * 3.0);
    let base: Vec<(ContourPiece, Complex64)> = vec![
        (ContourPiece::Segment(0), Complex64::new(0.3 * xh, 0.0)),
        (ContourPiece::Segment(0), Complex64::new(0.9 * xh, 0.0)),
        (ContourPiece::LegPlus(0), Complex64::new(xh + 0.6, 0.7)),
        (ContourPiece::LegPlus(0), Complex64::new(xh + 0.2, 1.5)),
        (ContourPiece::LegMinus(0), Complex64::new(xh + 0.6, -0.7)),
        (ContourPiece::LegMinus(0), Complex64::new(xh + 0.2, -1.5)),
    ];
    let mut worst: f64 = 0.0;
    for j in 0..3usize {
        for (piece, u) in &base {
            let z = &Complex::from_c64(*u, ctx.bits()) * &ctx.omega_pow(j as i64);
            let cz = z.scale(&sc.c_n);
            let e = z.powi(3).scale(&kappa).exp();
            let idx = |m: i64| (m - j as i64).rem_euclid(3) as usize;
            for level in [0u8, 1] {
                let d = level == 1;
                let direct = match piece {
                    ContourPiece::Segment(_) => yk(idx(0), &cz, d, ctx)?,
                    ContourPiece::LegPlus(_) => (&yk(idx(0), &cz, d, ctx)? - &yk(idx(1), &cz, d, ctx)?) / 3.0,
                    ContourPiece::LegMinus(_) => (&yk(idx(0), &cz, d, ctx)? - &yk(idx(2), &cz, d, ctx)?) / 3.0,
                };
                let direct = &direct * &e;
                let piece_j = match piece {
                    ContourPiece::Segment(_) => ContourPiece::Segment(j),
                    ContourPiece::LegPlus(_) => ContourPiece::LegPlus(j),
                    ContourPiece::LegMinus(_) => ContourPiece::LegMinus(j),
                };
                let spec = WeightSpec { level, n, params: p.clone(), piece: piece_j, exact_constants: false };
                let lib = weight_w(&spec, &z, ctx)?;
                worst = worst.max(rel(&lib, &direct));
            }
        }
    }
    Ok(worst)
}

// ---- polynomials -------------------------------------------------------------

/// Sup over `Sigma1` of the distance to the nearest zero: how well the zeros
/// cover the star.
pub fn covering_distance(p: &MonicPolynomial, x_star: f64) -> f64 {
    let zs: Vec<Complex64> = p.zeros.iter().map(|z| z.to_c64()).collect();
    let w = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
    let mut worst: f64 = 0.0;
    for j in 0..3 {
        for i in 0..=400 {
            let s = w.powi(j) * (x_star * i as f64 / 400.0);
            let d = zs.iter().map(|z| (z - s).norm()).fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
    }
    worst
}

/// Per-degree facts about the polynomial at `n`.
pub struct PolyFacts {
    pub n: usize,
    pub sparsity: f64,
    pub rotation: f64,
    pub max_dist: f64,
    pub covering: f64,
    pub poly: MonicPolynomial,
}

pub fn poly_facts(params: &ModelParams, n: usize, bits: usize) -> cubicmm::Result<PolyFacts> {
    let ctx = PrecisionContext::new(bits)?;
    let p = params.with_ctx(ctx.clone());
    let poly = orthopoly(n, &p, &ContourConfig::stokes(), &ctx)?;
    let diag = zero_diagnostics(&poly, &p)?;
    let xs = curve_constants(&p)?.x_star.to_f64();
    debug_assert!(poly.zeros.iter().all(|z| distance_to_sigma1(z.to_c64(), xs).is_finite()));
    Ok(PolyFacts {
        n,
        sparsity: poly.sparsity(),
        rotation: diag.rotation_mismatch,
        max_dist: diag.max_dist_to_sigma1,
        covering: covering_distance(&poly, xs),
        poly,
    })
}

/// Solvability, sparsity and rotation invariance for each degree; the zero
/// distance trend over `{6, 12, 18, 24}` when those degrees are present.
pub fn orthopoly_sweep(params: &ModelParams, degrees: &[usize], bits: usize) -> (Vec<Check>, Vec<PolyFacts>) {
    let mut checks = Vec::new();
    let mut facts = Vec::new();
    for &n in degrees {
        match poly_facts(params, n, bits) {
            Ok(f) => {
                checks.push(Check::below(format!("polynomial n = {n}: sparsity (rel)"), f.sparsity, 1e-20));
                checks.push(Check::below(format!("polynomial n = {n}: zero set omega-invariant"), f.rotation, 1e-12));
                facts.push(f);
            }
            Err(e) => checks.push(Check::failed(format!("polynomial n = {n}: system solvable"), e)),
        }
    }
    let trend: Vec<&PolyFacts> = [6, 12, 18, 24].iter().filter_map(|n| facts.iter().find(|f| f.n == *n)).collect();
    if trend.len() == 4 {
        let dist: Vec<f64> = trend.iter().map(|f| f.max_dist).collect();
        let shown = dist.iter().map(|d| dec64(*d)).collect::<Vec<_>>().join(", ");
        // the zeros lie on the star up to rounding, so the distances are noise
        checks.push(Check::holds(
            "polynomials: max zero distance to Sigma1 at n = 6, 12, 18, 24",
            dist.iter().all(|d| *d < 1e-12),
            shown,
            "all on Sigma1 (< 1e-12)",
        ));
        checks.push(Check::below("polynomials: max zero distance to Sigma1 at n = 24", dist[3], 0.1));
        let cov: Vec<f64> = trend.iter().map(|f| f.covering).collect();
        checks.push(Check::holds(
            "polynomials: covering distance of Sigma1 strictly decreasing over n = 6, 12, 18, 24",
            cov.windows(2).all(|w| w[1] < w[0]),
            cov.iter().map(|d| dec64(*d)).collect::<Vec<_>>().join(", "),
            "strictly decreasing",
        ));
    }
    (checks, facts)
}

/// `n` times the normalized strong residual within a factor 3 across the
/// given degrees, and the log-potential residual shrinking from the first
/// degree of `lp` to the second.
pub fn asymptotics(params: &ModelParams, polys: &[&MonicPolynomial], lp: (&MonicPolynomial, &MonicPolynomial)) -> Vec<Check> {
    let r = (|| {
        let model = AsymptoticModel::new(params)?;
        let pts = exterior_testpoints(params, 12)?;
        let mut scaled = Vec::new();
        for p in polys {
            scaled.push(p.degree as f64 * model.strong_residual_scaled(p, &pts, 1.0)?.normalized);
        }
        let a = model.log_potential_residual(lp.0, &pts)?;
        let b = model.log_potential_residual(lp.1, &pts)?;
        Ok((scaled, a, b))
    })();
    let degs = polys.iter().map(|p| p.degree.to_string()).collect::<Vec<_>>().join(", ");
    wrap("asymptotics", r, |(scaled, a, b)| {
        let max = scaled.iter().cloned().fold(0.0, f64::max);
        let min = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
        vec![
            Check::holds(
                format!("asymptotics: n x strong residual within factor 3 (n = {degs})"),
                min > 0.0 && max / min <= 3.0,
                scaled.iter().map(|v| dec64(*v)).collect::<Vec<_>>().join(", "),
                "max/min <= 3",
            ),
            Check::holds(
                format!("asymptotics: log-potential residual n = {} below n = {}", lp.1.degree, lp.0.degree),
                b < a,
                format!("{} -> {}", dec64(a), dec64(b)),
                "decreases",
            ),
        ]
    })
}

// ---- phi field ---------------------------------------------------------------

/// `Re phi1` at cell centres of a square grid `[-half, half]^2`;
/// `values[i][j]` sits at column `i` (x) and row `j` (y). Failed evaluations are NaN.
pub struct PhiField {
    pub n: usize,
    pub half: f64,
    pub values: Vec<Vec<f64>>,
}

/// A 4-connected set of cells with one sign.
#[derive(Clone, Debug)]
pub struct Component {
    pub sign: i8,
    pub cells: Vec<(usize, usize)>,
    pub touches_edge: bool,
}

impl PhiField {
    pub fn sample(m: &EquilibriumMeasures, n: usize, half: f64) -> cubicmm::Result<PhiField> {
        let mut f = PhiField { n, half, values: vec![vec![f64::NAN; n]; n] };
        for i in 0..n {
            for j in 0..n {
                let (x, y) = f.point(i, j);
                f.values[i][j] = m.re_phi1(Complex64::new(x, y)).unwrap_or(f64::NAN);
            }
        }
        Ok(f)
    }

    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        let h = 2.0 * self.half / self.n as f64;
        (-self.half + (i as f64 + 0.5) * h, -self.half + (j as f64 + 0.5) * h)
    }

    /// Cell containing `(x, y)`, if on the grid.
    pub fn cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let h = 2.0 * self.half / self.n as f64;
        let i = ((x + self.half) / h).floor();
        let j = ((y + self.half) / h).floor();
        let ok = |v: f64| v >= 0.0 && v < self.n as f64;
        (ok(i) && ok(j)).then_some((i as usize, j as usize))
    }

    pub fn count(&self, s: i8) -> usize {
        self.values.iter().flatten().filter(|v| !v.is_nan() && sign(**v) == s).count()
    }

    pub fn failures(&self) -> usize {
        self.values.iter().flatten().filter(|v| v.is_nan()).count()
    }

    pub fn components(&self) -> Vec<Component> {
        let n = self.n;
        let mut seen = vec![vec![false; n]; n];
        let mut out = Vec::new();
        for i0 in 0..n {
            for j0 in 0..n {
                let v = self.values[i0][j0];
                if seen[i0][j0] || v.is_nan() || sign(v) == 0 {
                    continue;
                }
                let s = sign(v);
                let mut comp = Component { sign: s, cells: Vec::new(), touches_edge: false };
                let mut stack = vec![(i0, j0)];
                seen[i0][j0] = true;
                while let Some((i, j)) = stack.pop() {
                    comp.cells.push((i, j));
                    comp.touches_edge |= i == 0 || j == 0 || i == n - 1 || j == n - 1;
                    let nb = [(i.wrapping_sub(1), j), (i + 1, j), (i, j.wrapping_sub(1)), (i, j + 1)];
                    for (a, b) in nb {
                        if a < n && b < n && !seen[a][b] {
                            let w = self.values[a][b];
                            if !w.is_nan() && sign(w) == s {
                                seen[a][b] = true;
                                stack.push((a, b));
                            }
                        }
                    }
                }
                out.push(comp);
            }
        }
        out
    }
}

/// Point values and grid topology of the sign of `Re phi1`.
pub fn phi_topology(m: &EquilibriumMeasures, field: &PhiField) -> Vec<Check> {
    let mut out = Vec::new();
    let xs = m.x_star().to_f64();
    let k = match curve_constants(m.params()) {
        Ok(k) => k,
        Err(e) => return vec![Check::failed("phi: constants", e)],
    };
    let xh = k.x_hat.to_f64();
    let w = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
    let point = |name: String, z: Complex64, want: i8| match m.re_phi1(z) {
        Ok(v) => Check::holds(name, sign(v) == want, dec64(v), if want < 0 { "< 0" } else { "> 0" }),
        Err(e) => Check::failed(name, e),
    };
    out.push(point("phi: Re phi1(x_hat) < 0".into(), Complex64::new(xh, 0.0), -1));
    out.push(point("phi: Re phi1 < 0 just right of x_star".into(), Complex64::new(xs * (1.0 + 1e-3), 0.0), -1));
    let mut inner = Vec::new();
    for j in 0..3 {
        for s in [1.0, -1.0] {
            let z = w.powi(j) * Complex64::new(xs / 2.0, s * 1e-3 * xs);
            inner.push(m.re_phi1(z));
        }
    }
    let inner_ok = inner.iter().all(|v| matches!(v, Ok(x) if sign(*x) == 1));
    let inner_min = inner.iter().filter_map(|v| v.as_ref().ok()).cloned().fold(f64::INFINITY, f64::min);
    out.push(Check::holds(
        "phi: Re phi1 > 0 beside the star at x_star/2 (6 points)",
        inner_ok,
        format!("min {}", dec64(inner_min)),
        "> 0",
    ));
    out.push(Check::holds("phi: every grid cell evaluated", field.failures() == 0, field.failures().to_string(), "0 failures"));
    let comps = field.components();
    let owner = |z: Complex64| field.cell(z.re, z.im).and_then(|c| comps.iter().position(|k| k.cells.contains(&c)));
    let far = 0.95 * field.half;
    // the negative set is one region: it holds every rotated x_hat and runs
    // out to the edge along pi/3, pi, -pi/3
    let neg: Vec<usize> = (0..comps.len()).filter(|&i| comps[i].sign < 0).collect();
    let nodes: Vec<Option<usize>> = (0..3).map(|j| owner(w.powi(j) * xh)).collect();
    let arms: Vec<Option<usize>> = [1.0, 3.0, 5.0].iter().map(|k| owner(Complex64::from_polar(far, k * PI / 3.0))).collect();
    let one = neg.len() == 1;
    let joined = one && nodes.iter().chain(&arms).all(|o| *o == Some(neg[0])) && comps[neg[0]].touches_edge;
    out.push(Check::holds(
        "phi: negative set connected, holding the rotated x_hat and unbounded toward pi/3, pi, -pi/3",
        joined,
        format!("{} negative components", neg.len()),
        "1, holding all six marks",
    ));
    // the positive set: a bounded region around the star plus three sectors
    let pos = (0..comps.len()).filter(|&i| comps[i].sign > 0).count();
    let centre = owner(Complex64::new(0.0, 0.0));
    let sectors: Vec<Option<usize>> = [0.0, 2.0, 4.0].iter().map(|k| owner(Complex64::from_polar(far, k * PI / 3.0))).collect();
    let centre_ok = centre.is_some_and(|c| comps[c].sign > 0 && !comps[c].touches_edge);
    let distinct = sectors.iter().all(|o| o.is_some_and(|c| comps[c].sign > 0 && comps[c].touches_edge))
        && sectors[0] != sectors[1]
        && sectors[1] != sectors[2]
        && sectors[0] != sectors[2];
    out.push(Check::holds(
        "phi: positive set is a bounded region around the star plus sectors at 0, 2pi/3, -2pi/3",
        pos == 4 && centre_ok && distinct,
        format!("{pos} positive components, bounded centre: {centre_ok}, separate sectors: {distinct}"),
        "4, true, true",
    ));
    out
}

// ---- suites ------------------------------------------------------------------

/// Checks of the chosen suite and the names of those skipped for the regime.
pub fn suite(cfg: &RunConfig, which: Suite) -> (Vec<Check>, Vec<String>) {
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    let params = match cfg.params() {
        Ok(p) => p,
        Err(e) => return (vec![Check::failed("parameters", e)], skipped),
    };
    let sub = params.regime == Regime::Subcritical;
    let full = which == Suite::Full;
    out.extend(constants(cfg));
    out.extend(discriminant(&params));
    if sub {
        out.extend(node_identity(&params));
    } else {
        skipped.push("node identity (needs subcritical)".to_string());
    }
    out.extend(endpoint(&params));
    if sub {
        out.extend(masses(&params));
        out.extend(euler_lagrange(&params));
    } else {
        skipped.push("masses, Euler-Lagrange (need subcritical)".to_string());
    }
    match GrowthDomain::new(&params) {
        Ok(d) => {
            let (schwarz, _) = schwarz_max(&d);
            out.extend(domain_identities(&params, &d, schwarz));
        }
        Err(e) => out.push(Check::failed("domain", e)),
    }
    if !sub {
        skipped.push("exterior potential, Airy weights, polynomials, asymptotics (need subcritical)".to_string());
        return (out, skipped);
    }
    out.extend(hermitian(&params, cfg.seed));
    out.extend(airy(&params, cfg.seed));
    if full {
        out.extend(oracle_agreement(&params, 400));
        let degrees: Vec<usize> = (1..=16).map(|k| 2 * k).collect();
        let (c, facts) = orthopoly_sweep(&params, &degrees, 512);
        out.extend(c);
        let get = |n: usize| facts.iter().find(|f| f.n == n).map(|f| &f.poly);
        if let (Some(p6), Some(p24)) = (get(6), get(24)) {
            let strong: Vec<&MonicPolynomial> = [8, 16, 24, 32].iter().filter_map(|n| get(*n)).collect();
            out.extend(asymptotics(&params, &strong, (p6, p24)));
        }
    } else {
        let (c, facts) = orthopoly_sweep(&params, &[6, 8, 12, 16], 256);
        out.extend(c);
        let get = |n: usize| facts.iter().find(|f| f.n == n).map(|f| &f.poly);
        if let (Some(p6), Some(p8), Some(p16)) = (get(6), get(8), get(16)) {
            out.extend(asymptotics(&params, &[p8, p16], (p6, p16)));
        }
        skipped.push("oracle comparison and the full degree sweep (full suite only)".to_string());
    }
    (out, skipped)
}

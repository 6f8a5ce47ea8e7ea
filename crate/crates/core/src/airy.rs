//! Airy functions in extended precision, the nine solutions `y0..y8` built from
//! rotations of `Ai`, and the model weights on the deformed contour.

use std::cell::RefCell;
use std::collections::HashMap;

use crate::curve::{curve_constants, ModelParams};
use crate::error::{Error, Result};
use crate::numerics::{Complex, PrecisionContext, Real};

thread_local! {
    static GAMMA_THIRD: RefCell<HashMap<usize, Real>> = RefCell::new(HashMap::new());
    static ORIGIN: RefCell<HashMap<usize, (Real, Real)>> = RefCell::new(HashMap::new());
}

/// Arithmetic-geometric mean of two positive reals.
fn agm(a: &Real, b: &Real) -> Real {
    let mut a = a.clone();
    let mut b = b.clone();
    let tol = 2f64.powi(-(a.bits() as i32) + 4);
    for _ in 0..200 {
        let next = (&a + &b) * 0.5;
        b = (&a * &b).sqrt();
        a = next;
        if ((&a - &b).abs() / &a).to_f64() <= tol {
            break;
        }
    }
    a
}

/// `Gamma(1/3)` from `Gamma(1/3)^3 = 2^{4/3} pi^2 / (3^{1/4} AGM(1, (sqrt6 + sqrt2)/4))`.
pub fn gamma_one_third(bits: usize) -> Real {
    GAMMA_THIRD.with(|m| {
        m.borrow_mut()
            .entry(bits)
            .or_insert_with(|| {
                let wp = bits.max(64) + 32;
                let one = Real::from_f64(1.0, wp);
                let k = ((one.lit(6.0)).sqrt() + one.lit(2.0).sqrt()) / 4.0;
                let m = agm(&one, &k);
                let pi = Real::pi(wp);
                let two_43 = one.lit(2.0).powf(&(one.lit(4.0) / 3.0));
                let three_14 = one.lit(3.0).sqrt().sqrt();
                (two_43 * pi.square() / (three_14 * m)).cbrt().with_bits(bits)
            })
            .clone()
    })
}

/// `Ai(0)` and `Ai'(0)`.
pub fn airy_origin(bits: usize) -> (Real, Real) {
    ORIGIN.with(|m| {
        m.borrow_mut()
            .entry(bits)
            .or_insert_with(|| {
                let wp = bits.max(64) + 16;
                let g13 = gamma_one_third(wp);
                let pi = Real::pi(wp);
                let s3 = Real::from_f64(3.0, wp).sqrt();
                let g23 = &pi * 2.0 / (&s3 * &g13);
                let c3 = Real::from_f64(3.0, wp).cbrt();
                let ai0 = 1.0 / (c3.square() * g23);
                let aip0 = -(1.0 / (c3 * g13));
                (ai0.with_bits(bits), aip0.with_bits(bits))
            })
            .clone()
    })
}

/// `zeta = (2/3) z^{3/2}` on the principal branch.
pub fn airy_zeta(z: &Complex) -> Complex {
    (z * &z.sqrt()).scale_f64(2.0) / 3.0
}

fn ln2() -> f64 {
    std::f64::consts::LN_2
}

/// Where the asymptotic expansion reaches `2^-bits` before diverging.
fn asymptotic_threshold(bits: usize) -> f64 {
    0.36 * bits as f64 + 8.0
}

/// Maclaurin series for `(Ai, Ai')` at working precision `wp`.
fn series(z: &Complex, wp: usize) -> (Complex, Complex) {
    let z = z.with_bits(wp);
    let (c1, c2) = airy_origin(wp);
    let c2 = -c2;
    let z3 = &z.square() * &z;
    let tol = 2f64.powi(-(wp as i32));
    // f = sum a_k, g = sum b_k and their derivatives
    let mut a = z.one_like();
    let mut b = z.clone();
    let mut fa = a.clone();
    let mut gb = b.clone();
    let mut ap = z.square().scale_f64(0.5);
    let mut bp = z.one_like();
    let mut fpa = ap.clone();
    let mut gpb = bp.clone();
    let mut k = 1usize;
    loop {
        let kf = k as f64;
        a = (&a * &z3) / ((3.0 * kf - 1.0) * (3.0 * kf));
        b = (&b * &z3) / ((3.0 * kf) * (3.0 * kf + 1.0));
        bp = (&bp * &z3) / ((3.0 * kf - 2.0) * (3.0 * kf));
        if k >= 2 {
            ap = (&ap * &z3) / ((3.0 * kf - 3.0) * (3.0 * kf - 1.0));
            fpa += &ap;
        }
        fa += &a;
        gb += &b;
        gpb += &bp;
        let small = [&a, &b, &ap, &bp].iter().all(|t| t.magnitude() <= tol);
        if (small && k > 2) || k > 100_000 {
            break;
        }
        k += 1;
    }
    let ai = &fa.scale(&c1) - &gb.scale(&c2);
    let aip = &fpa.scale(&c1) - &gpb.scale(&c2);
    (ai, aip)
}

/// Scaled asymptotic expansion `(Ai e^zeta, Ai' e^zeta)` for `|arg z| <= 2pi/3`.
fn asymptotic_scaled(z: &Complex, wp: usize) -> Result<(Complex, Complex)> {
    let z = z.with_bits(wp);
    let zeta = airy_zeta(&z);
    let inv = zeta.recip();
    let tol = 2f64.powi(-(wp as i32));
    let mut su = z.one_like();
    let mut sv = z.one_like();
    let mut u = Real::from_f64(1.0, wp);
    let mut pw = z.one_like();
    let mut last = f64::INFINITY;
    let mut k = 1usize;
    loop {
        let kf = k as f64;
        u = u * ((6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0)) / ((2.0 * kf - 1.0) * 216.0 * kf);
        let v = -(&u * (6.0 * kf + 1.0) / (6.0 * kf - 1.0));
        pw = (&pw * &inv).scale_f64(-1.0);
        let tu = pw.scale(&u);
        let tv = pw.scale(&v);
        let mag = tu.magnitude().max(tv.magnitude());
        if mag > last {
            return Err(Error::NonConvergence { what: "Airy asymptotic series", iterations: k });
        }
        su += &tu;
        sv += &tv;
        if mag <= tol {
            break;
        }
        last = mag;
        k += 1;
    }
    let pi = Real::pi(wp);
    let half_rsqrt_pi = 0.5 / pi.sqrt();
    let q = z.sqrt().sqrt();
    let ai = (&su / &q).scale(&half_rsqrt_pi);
    let aip = -(&sv * &q).scale(&half_rsqrt_pi);
    Ok((ai, aip))
}

/// `(Ai(z) e^{zeta}, Ai'(z) e^{zeta})` at working precision `wp` (at least 64 bits).
fn scaled_pair(z: &Complex, wp: usize) -> Result<(Complex, Complex)> {
    if z.is_zero() {
        let (a, b) = airy_origin(wp);
        return Ok((Complex::from_real(a), Complex::from_real(b)));
    }
    let zc = z.to_c64();
    let zeta_abs = 2.0 / 3.0 * zc.norm().powf(1.5);
    let zeta = airy_zeta(&z.with_bits(wp + 32));
    if zeta_abs > asymptotic_threshold(wp) {
        let th = zc.arg().abs();
        if th <= 2.0 * std::f64::consts::PI / 3.0 + 1e-12 {
            return asymptotic_scaled(z, wp + 32);
        }
        // Ai(z) = -omega Ai(omega z) - omega^2 Ai(omega^2 z)
        let ctx = PrecisionContext::new(wp + 32)?;
        let zz = z.with_bits(wp + 32);
        let mut ai = zz.zero_like();
        let mut aip = zz.zero_like();
        for (k, dk) in [(1i64, 2i64), (2, 4)] {
            let rot = ctx.omega_pow(k);
            let zr = &zz * &rot;
            let (a, b) = asymptotic_scaled(&zr, wp + 32)?;
            let fac = (&zeta - &airy_zeta(&zr)).exp();
            ai -= &(&(&a * &fac) * &rot);
            aip -= &(&(&b * &fac) * &ctx.omega_pow(dk));
        }
        return Ok((ai, aip));
    }
    let extra = (zeta_abs + zeta.re.to_f64().max(0.0)) / ln2();
    // rounded up so the cached constants are shared between nearby arguments
    let sp = (wp + 32 + extra.ceil() as usize).div_ceil(64) * 64;
    let (ai, aip) = series(z, sp);
    let fac = zeta.with_bits(sp).exp();
    Ok((&ai * &fac, &aip * &fac))
}

fn work_bits(ctx: &PrecisionContext) -> usize {
    ctx.bits().max(64) + 8
}

fn finish(v: Complex, ctx: &PrecisionContext) -> Result<Complex> {
    let out = v.with_bits(ctx.bits());
    if !out.is_finite() {
        return Err(Error::OverflowAtPrecision { bits: ctx.bits() });
    }
    Ok(out)
}

/// `Ai(z)` and `Ai'(z)`; with `scaled` both carry the factor `exp((2/3) z^{3/2})`.
pub fn airy_pair(z: &Complex, scaled: bool, ctx: &PrecisionContext) -> Result<(Complex, Complex)> {
    if !z.is_finite() {
        return Err(Error::EvaluationFailure("Airy argument is not finite".into()));
    }
    let wp = work_bits(ctx);
    let (a, b) = scaled_pair(z, wp)?;
    if scaled {
        return Ok((finish(a, ctx)?, finish(b, ctx)?));
    }
    let zeta = airy_zeta(&z.with_bits(wp + 32));
    let re = zeta.re.to_f64();
    // e^{-zeta} must be representable; MP exponents are effectively unbounded
    let limit = if ctx.is_double() { 700.0 } else { 1e15 };
    if re.abs() > limit {
        return Err(Error::OverflowAtPrecision { bits: ctx.bits() });
    }
    let fac = (-zeta).exp();
    Ok((finish(&a * &fac, ctx)?, finish(&b * &fac, ctx)?))
}

pub fn airy_ai(z: &Complex, scaled: bool, ctx: &PrecisionContext) -> Result<Complex> {
    Ok(airy_pair(z, scaled, ctx)?.0)
}

pub fn airy_ai_prime(z: &Complex, scaled: bool, ctx: &PrecisionContext) -> Result<Complex> {
    Ok(airy_pair(z, scaled, ctx)?.1)
}

/// One of the nine Airy solutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AirySolutionId(u8);

impl AirySolutionId {
    pub fn new(index: usize) -> Result<AirySolutionId> {
        if index > 8 {
            return Err(Error::InvalidParameters(format!("Airy solution index {index} > 8")));
        }
        Ok(AirySolutionId(index as u8))
    }

    pub fn index(&self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = AirySolutionId> {
        (0..9).map(AirySolutionId)
    }
}

/// Linear combination `sum_k coef_k (d/dz)^deriv Ai(omega^k z)`: every solution
/// is of this form, so identities hold up to rounding only.
fn ai_combo(coef: [Complex; 3], z: &Complex, deriv: bool, ctx: &PrecisionContext) -> Result<Complex> {
    let wp = work_bits(ctx);
    let c = PrecisionContext::new(wp)?;
    let z = z.with_bits(wp);
    let mut acc = z.zero_like();
    for (k, ck) in coef.iter().enumerate() {
        if ck.is_zero() {
            continue;
        }
        let rot = c.omega_pow(k as i64);
        let (a, b) = airy_pair(&(&z * &rot), false, &c)?;
        let term = if deriv { &b * &rot } else { a };
        acc += &(&term * &ck.with_bits(wp));
    }
    finish(acc, ctx)
}

/// Coefficients of `y_id` in the basis `Ai(z), Ai(omega z), Ai(omega^2 z)`.
fn coefficients(id: AirySolutionId, ctx: &PrecisionContext) -> [Complex; 3] {
    let bits = ctx.bits().max(64) + 8;
    let c = PrecisionContext::new(bits).expect("bits >= 64");
    let w = |k: i64| c.omega_pow(k);
    let zero = c.zero();
    let two_pi_i = c.complex(0.0, 1.0).scale(&(c.pi() * 2.0));
    // y3 = 2 pi i (omega^2 Ai(omega z) - omega Ai(omega^2 z))
    let y3 = [zero.clone(), &two_pi_i * &w(2), -(&two_pi_i * &w(1))];
    // y6 = (y2 - y1)/3 = (omega^2 Ai(omega^2 z) - omega Ai(omega z))/3
    let y6 = [zero.clone(), w(1) / -3.0, w(2) / 3.0];
    // omega^m f(omega^m z): coefficient of Ai(omega^k z) moves to k + m
    let rotate = |base: &[Complex; 3], m: i64| -> [Complex; 3] {
        let mut out = [zero.clone(), zero.clone(), zero.clone()];
        for k in 0..3 {
            out[((k as i64 + m).rem_euclid(3)) as usize] = &base[k] * &w(m);
        }
        out
    };
    match id.0 {
        0 => [c.one(), zero.clone(), zero],
        1 => [zero.clone(), w(1), zero],
        2 => [zero.clone(), zero, w(2)],
        3 => y3,
        4 => rotate(&y3, 1),
        5 => rotate(&y3, 2),
        6 => y6,
        7 => rotate(&y6, 1),
        _ => rotate(&y6, 2),
    }
}

/// Value (or derivative) of `y_id` at `z`.
pub fn solution_y(id: AirySolutionId, z: &Complex, deriv: bool, ctx: &PrecisionContext) -> Result<Complex> {
    ai_combo(coefficients(id, ctx), z, deriv, ctx)
}

/// `W(y_i, y_j) = y_i y_j' - y_i' y_j`.
pub fn wronskian(i: AirySolutionId, j: AirySolutionId, z: &Complex, ctx: &PrecisionContext) -> Result<Complex> {
    let wp = PrecisionContext::new(ctx.bits().max(64) + 16)?;
    let yi = solution_y(i, z, false, &wp)?;
    let dyi = solution_y(i, z, true, &wp)?;
    let yj = solution_y(j, z, false, &wp)?;
    let dyj = solution_y(j, z, true, &wp)?;
    finish(&(&yi * &dyj) - &(&dyi * &yj), ctx)
}

/// `c_n = n^{2/3} / (t0^{2/3} t3^{1/3})` and `d_n = (t0 / (n t3))^{1/3}`.
#[derive(Clone, Debug)]
pub struct ScaleConstants {
    pub c_n: Real,
    pub d_n: Real,
}

impl ScaleConstants {
    pub fn new(n: usize, params: &ModelParams) -> Result<ScaleConstants> {
        if n == 0 {
            return Err(Error::InvalidParameters("n must be positive".into()));
        }
        let nn = params.t0.lit(n as f64);
        let two_thirds = nn.lit(2.0) / 3.0;
        let c_n = (&nn / &params.t0).powf(&two_thirds) / params.t3.cbrt();
        let d_n = (&params.t0 / (&nn * &params.t3)).cbrt();
        Ok(ScaleConstants { c_n, d_n })
    }
}

/// Piece of the deformed contour. `j` is the sector index: pieces with
/// index `j` are the images of the sector-0 pieces under `z -> omega^j z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContourPiece {
    /// `[0, omega^j x_hat]`.
    Segment(usize),
    /// Unbounded leg leaving `omega^j x_hat` into the upper half of its sector.
    LegPlus(usize),
    /// Unbounded leg leaving `omega^j x_hat` into the lower half of its sector.
    LegMinus(usize),
}

impl ContourPiece {
    pub fn sector(&self) -> usize {
        match *self {
            ContourPiece::Segment(j) | ContourPiece::LegPlus(j) | ContourPiece::LegMinus(j) => j % 3,
        }
    }

    fn base(&self) -> ContourPiece {
        match self {
            ContourPiece::Segment(_) => ContourPiece::Segment(0),
            ContourPiece::LegPlus(_) => ContourPiece::LegPlus(0),
            ContourPiece::LegMinus(_) => ContourPiece::LegMinus(0),
        }
    }
}

/// Which weight, for which `n`, on which piece.
#[derive(Clone, Debug)]
pub struct WeightSpec {
    /// 0 selects `w_{0,n}`, 1 selects `w_{1,n}`.
    pub level: u8,
    pub n: usize,
    pub params: ModelParams,
    pub piece: ContourPiece,
    /// Reinstate the prefactors `3 d_n` (level 0) and `-3 d_n^2` (level 1).
    pub exact_constants: bool,
}

/// Check that `u = omega^{-j} z` lies on the sector-0 version of the piece.
fn check_piece(u: &Complex, piece: ContourPiece, x_hat: f64) -> Result<()> {
    let uc = u.to_c64();
    let tol = 1e-9 * x_hat.max(1.0);
    let ok = match piece {
        ContourPiece::Segment(_) => uc.im.abs() <= tol && uc.re >= -tol && uc.re <= x_hat + tol,
        ContourPiece::LegPlus(_) | ContourPiece::LegMinus(_) => {
            let plus = matches!(piece, ContourPiece::LegPlus(_));
            let side = if plus { uc.im >= -tol } else { uc.im <= tol };
            let inside = uc.arg().abs() <= std::f64::consts::PI / 3.0 + 1e-9;
            side && inside && (uc - x_hat).norm() > 0.0 || (uc - x_hat).norm() <= tol
        }
    };
    if ok {
        Ok(())
    } else {
        Err(Error::PieceMismatch(format!("{uc} is not on {piece:?}")))
    }
}

/// Rescaled weight `w_{level,n}(z)` on the named piece. The cubic exponential
/// is combined with the Airy scaling exponent before exponentiating.
pub fn weight_w(spec: &WeightSpec, z: &Complex, ctx: &PrecisionContext) -> Result<Complex> {
    if spec.level > 1 {
        return Err(Error::InvalidParameters(format!("weight level {} not in {{0, 1}}", spec.level)));
    }
    let params = spec.params.with_ctx(PrecisionContext::new(ctx.bits().max(64) + 16)?);
    let wc = params.ctx();
    let k = curve_constants(&params)?;
    let sc = ScaleConstants::new(spec.n, &params)?;
    let j = spec.piece.sector() as i64;
    // u = omega^{-j} z on the sector-0 piece; w(omega^j u) = omega^{2j} w0(u), omega^j w1(u)
    let u = &z.with_bits(wc.bits()) * &wc.omega_pow(-j);
    check_piece(&u, spec.piece, k.x_hat.to_f64())?;
    let cz = u.scale(&sc.c_n);
    let expo = u.powi(3).scale(&(&params.t3 * (spec.n as f64) / (&params.t0 * 3.0)));
    let deriv = spec.level == 1;
    // terms (coefficient, rotation m) meaning coefficient * y_m-type Ai(omega^m cz)
    let terms: Vec<(Complex, i64)> = match spec.piece.base() {
        ContourPiece::Segment(_) => vec![(wc.one(), 0)],
        // (y0 - y1)/3 with y1 = omega Ai(omega .)
        ContourPiece::LegPlus(_) => vec![(wc.one() / 3.0, 0), (wc.omega() / -3.0, 1)],
        ContourPiece::LegMinus(_) => vec![(wc.one() / 3.0, 0), (wc.omega_pow(2) / -3.0, 2)],
    };
    let wp = work_bits(&wc);
    let mut acc = wc.zero();
    for (coef, m) in terms {
        let rot = wc.omega_pow(m);
        let arg = &cz * &rot;
        let (a, b) = scaled_pair(&arg, wp)?;
        let zeta = airy_zeta(&arg.with_bits(wp + 32));
        let fac = (&expo.with_bits(wp + 32) - &zeta).exp();
        let v = if deriv { &b * &rot } else { a };
        acc += &(&(&v * &fac) * &coef.with_bits(wp + 32));
    }
    let mut w = if deriv { &acc * &wc.omega_pow(j) } else { &acc * &wc.omega_pow(2 * j) };
    if spec.exact_constants {
        w = if deriv { w.scale(&(-(sc.d_n.square() * 3.0))) } else { w.scale(&(&sc.d_n * 3.0)) };
    }
    finish(w, ctx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_values() {
        let (a, b) = airy_origin(256);
        let c = PrecisionContext::new(256).unwrap();
        let want_a = c.parse("0.35502805388781723926006318600418317639797917419918").unwrap();
        let want_b = c.parse("-0.25881940379280679840518356018920396347909113835493").unwrap();
        assert!((a - want_a).abs().to_f64() < 1e-48);
        assert!((b - want_b).abs().to_f64() < 1e-48);
    }

    #[test]
    fn series_and_asymptotic_overlap() {
        // both methods at a radius where each reaches the working precision
        let wp = 128;
        for th in [0.0, 0.7, -1.5, 2.0] {
            let z = Complex::from_polar(&Real::from_f64(30.0, wp), &Real::from_f64(th, wp));
            let (a1, b1) = asymptotic_scaled(&z, wp + 32).unwrap();
            let zeta = airy_zeta(&z.with_bits(wp + 600));
            let (a2, b2) = series(&z, wp + 600);
            let f = zeta.exp();
            let (a2, b2) = (&a2 * &f, &b2 * &f);
            assert!(((&a1 - &a2).abs() / a1.abs()).to_f64() < 1e-35, "th {th}");
            assert!(((&b1 - &b2).abs() / b1.abs()).to_f64() < 1e-35, "th {th}");
        }
    }
}

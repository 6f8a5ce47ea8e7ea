//! Simultaneous polynomial root finding (Aberth-Ehrlich) with Newton polish.

use num_complex::Complex64;

use super::{Complex, PrecisionContext};
use crate::error::{Error, Result};

/// Horner evaluation of `sum c_k z^k` and its derivative.
pub fn poly_eval(coeffs: &[Complex], z: &Complex) -> (Complex, Complex) {
    let n = coeffs.len();
    let mut p = coeffs[n - 1].clone();
    let mut d = z.zero_like();
    for k in (0..n - 1).rev() {
        d = &d * z + &p;
        p = &p * z + &coeffs[k];
    }
    (p, d)
}

fn eval64(c: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let n = c.len();
    let mut p = c[n - 1];
    let mut d = Complex64::new(0.0, 0.0);
    for k in (0..n - 1).rev() {
        d = d * z + p;
        p = p * z + c[k];
    }
    (p, d)
}

fn initial_guesses(c: &[Complex64]) -> Vec<Complex64> {
    let deg = c.len() - 1;
    let lead = c[deg].norm();
    // geometric mean radius |c_0 / c_n|^(1/n), guarded by the Cauchy bound
    let mut cauchy: f64 = 0.0;
    for ck in &c[..deg] {
        cauchy = cauchy.max(ck.norm() / lead);
    }
    let cauchy = 1.0 + cauchy;
    let gm = if c[0].norm() > 0.0 { (c[0].norm() / lead).powf(1.0 / deg as f64) } else { 0.5 };
    let r = if gm.is_finite() && gm > 0.0 { gm.min(cauchy) } else { 1.0 };
    (0..deg)
        .map(|k| Complex64::from_polar(r, 2.0 * std::f64::consts::PI * k as f64 / deg as f64 + 0.4))
        .collect()
}

/// Aberth sweep in hardware precision; good starting values only.
pub(crate) fn aberth64(c: &[Complex64]) -> Option<Vec<Complex64>> {
    let mut z = initial_guesses(c);
    let deg = z.len();
    for _ in 0..500 {
        let mut moved: f64 = 0.0;
        for k in 0..deg {
            let (p, d) = eval64(c, z[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / d;
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..deg {
                if j != k {
                    s += 1.0 / (z[k] - z[j]);
                }
            }
            let step = ratio / (1.0 - ratio * s);
            if !step.re.is_finite() || !step.im.is_finite() {
                return None;
            }
            z[k] -= step;
            moved = moved.max(step.norm() / (1.0 + z[k].norm()));
        }
        if moved < 1e-15 {
            break;
        }
    }
    if z.iter().all(|w| w.re.is_finite() && w.im.is_finite()) {
        Some(z)
    } else {
        None
    }
}

/// All roots of `sum coeffs[k] z^k`, ordered by ascending principal argument
/// then modulus. Each root is polished until `|p(root)| < eps * scale`.
pub fn solve_polynomial(coeffs: &[Complex], ctx: &PrecisionContext) -> Result<Vec<Complex>> {
    if coeffs.len() < 2 {
        return Err(Error::InvalidParameters("polynomial degree must be at least 1".into()));
    }
    if coeffs.last().map(|c| c.is_zero()).unwrap_or(true) {
        return Err(Error::InvalidParameters("leading coefficient is zero".into()));
    }
    let bits = ctx.bits();
    let c: Vec<Complex> = coeffs.iter().map(|x| x.with_bits(bits)).collect();
    let deg = c.len() - 1;
    let c64: Vec<Complex64> = c.iter().map(|x| x.to_c64()).collect();
    let start = if c64.iter().all(|x| x.re.is_finite() && x.im.is_finite()) { aberth64(&c64) } else { None };
    let start = start.unwrap_or_else(|| initial_guesses(&c64));
    let mut z: Vec<Complex> = start.iter().map(|w| Complex::from_c64(*w, bits)).collect();
    let eps = ctx.eps();
    let maxc = c.iter().map(|x| x.abs().to_f64()).fold(0.0, f64::max);

    if !ctx.is_double() {
        let mut converged = false;
        for _ in 0..200 {
            let mut moved: f64 = 0.0;
            for k in 0..deg {
                let (p, d) = poly_eval(&c, &z[k]);
                if p.is_zero() {
                    continue;
                }
                let ratio = &p / &d;
                let mut s = z[k].zero_like();
                for j in 0..deg {
                    if j != k {
                        s += (&z[k] - &z[j]).recip();
                    }
                }
                let step = &ratio / &(z[k].one_like() - &ratio * &s);
                if !step.is_finite() {
                    return Err(Error::NonConvergence { what: "Aberth iteration", iterations: 0 });
                }
                z[k] -= &step;
                moved = moved.max(step.abs().to_f64() / (1.0 + z[k].abs().to_f64()));
            }
            if moved < eps * 16.0 {
                converged = true;
                break;
            }
        }
        if !converged {
            // clustered roots converge linearly; accept if residuals are small
            for w in &z {
                if !residual_ok(&c, w, maxc, eps.sqrt()) {
                    return Err(Error::NonConvergence { what: "Aberth iteration", iterations: 200 });
                }
            }
        }
    }

    // Newton polish, keeping only steps that reduce the residual
    for w in z.iter_mut() {
        for _ in 0..60 {
            if residual_ok(&c, w, maxc, eps) {
                break;
            }
            let (p, d) = poly_eval(&c, w);
            if d.is_zero() {
                break;
            }
            let cand = &*w - &(&p / &d);
            let (pc, _) = poly_eval(&c, &cand);
            if pc.abs() < p.abs() {
                *w = cand;
            } else {
                break;
            }
        }
    }
    for w in &z {
        if !w.is_finite() {
            return Err(Error::NonConvergence { what: "polynomial roots", iterations: 0 });
        }
        let tol = if ctx.is_double() { 1e-6 } else { eps.sqrt() };
        if !residual_ok(&c, w, maxc, tol) {
            return Err(Error::NonConvergence { what: "polynomial roots", iterations: 60 });
        }
    }
    sort_roots(&mut z);
    Ok(z)
}

fn residual_ok(c: &[Complex], w: &Complex, maxc: f64, tol: f64) -> bool {
    let deg = c.len() - 1;
    let (p, _) = poly_eval(c, w);
    let scale = maxc * w.abs().to_f64().max(1.0).powi(deg as i32);
    p.abs().to_f64() <= tol * scale
}

/// Sort by ascending principal argument, then modulus.
pub(crate) fn sort_roots(z: &mut [Complex]) {
    z.sort_by(|a, b| {
        let (aa, ab) = (a.arg(), b.arg());
        match aa.partial_cmp(&ab) {
            Some(std::cmp::Ordering::Equal) | None => {
                a.abs().partial_cmp(&b.abs()).unwrap_or(std::cmp::Ordering::Equal)
            }
            Some(o) => o,
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roots_of_unity() {
        let ctx = PrecisionContext::new(192).unwrap();
        let c = vec![ctx.complex(-1.0, 0.0), ctx.zero(), ctx.zero(), ctx.one()];
        let r = solve_polynomial(&c, &ctx).unwrap();
        let w = ctx.omega();
        // ordered by argument: omega^2 (arg -2pi/3), 1, omega
        assert!((&r[0] - &w.conj()).abs() < 1e-55);
        assert!((&r[1] - &ctx.one()).abs() < 1e-55);
        assert!((&r[2] - &w).abs() < 1e-55);
    }

    #[test]
    fn double_root_residual() {
        let ctx = PrecisionContext::new(256).unwrap();
        // (z - 2)^2 (z + 1) = z^3 - 3 z^2 + 4
        let c = vec![ctx.complex(4.0, 0.0), ctx.zero(), ctx.complex(-3.0, 0.0), ctx.one()];
        let r = solve_polynomial(&c, &ctx).unwrap();
        for w in &r {
            let (p, _) = poly_eval(&c, w);
            assert!(p.abs() < 1e-60);
        }
        assert!((&r[0] - &ctx.complex(2.0, 0.0)).abs() < 1e-30);
    }
}

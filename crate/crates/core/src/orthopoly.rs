//! Multiple orthogonal polynomials `P_{n,n}` for the Airy weights: moments on
//! the contour, the linear system, zeros, a brute-force Hermitian form used
//! for validation, and the asymptotic residuals.
//!
//! The contour in sector 0 consists of a piece on `[0, x_hat]` and two legs
//! going to infinity. By Cauchy's theorem the legs may start anywhere; the
//! default anchors them at the origin along the Stokes rays `arg z = ±pi/3`.
//! There the Airy combinations stay bounded and oscillatory, so nothing
//! cancels, and they are continued from their values at `0` by a Taylor ODE
//! stepper instead of being evaluated afresh at every node. Legs anchored at
//! `x_hat` carry weights of size `exp((2/3)(c_n x_hat)^{3/2} + kappa x_hat^3)`
//! that cancel between the two legs; that variant is kept for validation.

use std::f64::consts::{LN_10, LN_2, PI};

use num_complex::Complex64;

use crate::airy::{airy_origin, airy_pair, airy_zeta, ContourPiece, ScaleConstants};
use crate::curve::{curve_constants, ModelParams, Regime, Side};
use crate::error::{Error, Result};
use crate::growth::GrowthDomain;
use crate::measures::EquilibriumMeasures;
use crate::numerics::{check_finite, gauss_legendre, poly_eval, solve_linear, solve_polynomial, Complex, PrecisionContext, Real};

/// Where the unbounded legs of the sector-0 contour start.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LegAnchor {
    /// Legs leave the origin along `arg z = ±pi/3`; the segment is empty.
    Origin,
    /// Legs leave `x_hat` as straight rays at `±leg_angle`; the segment is `[0, x_hat]`.
    XHat,
}

/// Contour geometry and quadrature sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct ContourConfig {
    pub anchor: LegAnchor,
    /// Leg direction measured from the sector axis. Only used with `XHat`;
    /// the asymptotic angle `5 pi / 12` of the sector-1 legs is `pi / 4` here.
    pub leg_angle: f64,
    /// Change of the integrand's complex log per Gauss panel.
    pub panel_variation: f64,
    /// Gauss points per panel; derived from the precision when `None`.
    pub order: Option<usize>,
}

impl ContourConfig {
    pub fn stokes() -> ContourConfig {
        ContourConfig { anchor: LegAnchor::Origin, leg_angle: PI / 3.0, panel_variation: 32.0, order: None }
    }

    pub fn deformed() -> ContourConfig {
        ContourConfig { anchor: LegAnchor::XHat, leg_angle: PI / 4.0, panel_variation: 32.0, order: None }
    }

    /// Same contour with panels half as wide.
    pub fn refined(&self) -> ContourConfig {
        ContourConfig { panel_variation: self.panel_variation / 2.0, ..self.clone() }
    }
}

impl Default for ContourConfig {
    fn default() -> Self {
        ContourConfig::stokes()
    }
}

/// `m_l[j] = int_Gamma z^j w_{l,n}(z) dz` for `j < len`, with error estimates.
#[derive(Clone, Debug)]
pub struct MomentTable {
    pub n: usize,
    pub m0: Vec<Complex>,
    pub m1: Vec<Complex>,
    pub err0: Vec<f64>,
    pub err1: Vec<f64>,
    /// Whether the prefactors `3 d_n` and `-3 d_n^2` are included.
    pub exact_constants: bool,
    /// Precision the entries were accumulated at (above the caller's).
    pub bits: usize,
}

impl MomentTable {
    pub fn len(&self) -> usize {
        self.m0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m0.is_empty()
    }

    /// Largest entry modulus.
    pub fn scale(&self) -> f64 {
        self.m0.iter().chain(&self.m1).map(|m| m.magnitude()).fold(0.0, f64::max)
    }

    /// The same table with the weight prefactors reinstated.
    pub fn with_exact_constants(&self, params: &ModelParams) -> Result<MomentTable> {
        if self.exact_constants {
            return Ok(self.clone());
        }
        let p = params.with_ctx(PrecisionContext::new(self.bits)?);
        let d = ScaleConstants::new(self.n, &p)?.d_n;
        let f0 = &d * 3.0;
        let f1 = -(d.square() * 3.0);
        let (a0, a1) = (f0.to_f64().abs(), f1.to_f64().abs());
        Ok(MomentTable {
            n: self.n,
            m0: self.m0.iter().map(|m| m.scale(&f0)).collect(),
            m1: self.m1.iter().map(|m| m.scale(&f1)).collect(),
            err0: self.err0.iter().map(|e| e * a0).collect(),
            err1: self.err1.iter().map(|e| e * a1).collect(),
            exact_constants: true,
            bits: self.bits,
        })
    }

    /// `mu_{a,b} = <z^a, z^b>` from exact-constant moments. Second slots above
    /// one are reduced by integrating by parts in `w`; slots above two use
    /// Hermitian symmetry and need `a <= 2`.
    pub fn mu(&self, a: usize, b: usize, params: &ModelParams) -> Result<Complex> {
        if !self.exact_constants {
            return Err(Error::InvalidParameters("mu needs exact-constant moments".into()));
        }
        let get = |v: &Vec<Complex>, i: usize| {
            v.get(i).cloned().ok_or_else(|| Error::InvalidParameters(format!("moment index {i} beyond table")))
        };
        match b {
            0 => get(&self.m0, a),
            1 => get(&self.m1, a),
            2 => {
                let t3 = params.t3.with_bits(self.bits);
                Ok(&get(&self.m0, a + 1)? / &t3)
            }
            _ if a <= 2 => Ok(self.mu(b, a, params)?.conj()),
            _ => Err(Error::InvalidParameters(format!("mu({a}, {b}) not reachable"))),
        }
    }
}

// ---- quadrature plumbing ------------------------------------------------

/// Smallest Gauss order whose error model `(V/4)^{2Q} / (2Q)!` for a panel of
/// log-variation `V` is below `2^-bits`.
fn gauss_order(bits: usize, variation: f64) -> usize {
    let target = -(bits as f64) * LN_2 - 3.0 * LN_10;
    let lq = (variation / 4.0).ln();
    let mut lnfact = 0.0;
    for q in 1..=320usize {
        lnfact += ((2 * q - 1) as f64).ln() + ((2 * q) as f64).ln();
        if q >= 8 && 2.0 * q as f64 * lq - lnfact < target {
            return q;
        }
    }
    320
}

/// Panels on `[0, end]` so that `rate * width` stays near `variation`.
fn build_panels(end: f64, variation: f64, rate: &dyn Fn(f64) -> f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut t = 0.0;
    while t < end {
        let w0 = variation / rate(t);
        let w = variation / rate(t).max(rate((t + w0).min(end)));
        let mut b = (t + w).min(end);
        if end - b < 0.25 * w {
            b = end;
        }
        out.push((t, b));
        t = b;
    }
    out
}

/// Gauss nodes `(t, weight)` in increasing `t` over the panels.
fn panel_points(panels: &[(f64, f64)], order: usize, bits: usize) -> Vec<(Real, Real)> {
    let rule = gauss_legendre(order, bits);
    let mut idx: Vec<usize> = (0..rule.x.len()).collect();
    idx.sort_by(|&i, &j| rule.x[i].to_f64().total_cmp(&rule.x[j].to_f64()));
    let mut out = Vec::with_capacity(order * panels.len());
    for &(a, b) in panels {
        let a = Real::from_f64(a, bits);
        let b = Real::from_f64(b, bits);
        let half = (&b - &a) * 0.5;
        let mid = (&a + &b) * 0.5;
        for &i in &idx {
            out.push((&mid + &(&half * &rule.x[i]), &half * &rule.w[i]));
        }
    }
    out
}

/// Log of `max_r r^j exp(-kappa r^3)`.
fn ln_peak(j: usize, kappa: f64) -> f64 {
    if j == 0 {
        0.0
    } else {
        let r = (j as f64 / (3.0 * kappa)).cbrt();
        j as f64 * r.ln() - j as f64 / 3.0
    }
}

/// Radius beyond which `r^j exp(-kappa r^3)` stays below its peak times
/// `2^-bits` for every `j < len`.
fn tail_radius(len: usize, kappa: f64, c: f64, bits: usize) -> f64 {
    let mut rmax: f64 = 0.0;
    for j in 0..len {
        let target = ln_peak(j, kappa) - bits as f64 * LN_2 - 10.0;
        let f = |r: f64| j as f64 * r.ln() - kappa * r.powi(3) + 0.25 * (1.0 + c * r).ln();
        let lo = if j == 0 { 1e-9 } else { (j as f64 / (3.0 * kappa)).cbrt() };
        let (mut lo, mut hi) = (lo, lo + 1.0);
        while f(hi) > target {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        rmax = rmax.max(hi);
    }
    rmax
}

/// One Taylor step of `y'' = u y` from `u0` to `u0 + h`.
fn airy_step(y: &Complex, yp: &Complex, u0: &Complex, h: &Complex, tol: f64) -> (Complex, Complex) {
    let a = u0 * &h.square();
    let b = h.powi(3);
    let mut tm1 = y.zero_like();
    let mut tk = y.clone();
    let mut tk1 = yp * h;
    let mut sum = &tk + &tk1;
    let mut dsum = tk1.clone();
    let reference = y.magnitude().max(tk1.magnitude()).max(f64::MIN_POSITIVE);
    let mut small = 0;
    for k in 0..4000usize {
        // t_{k+2} = (u0 h^2 t_k + h^3 t_{k-1}) / ((k+1)(k+2))
        let t = (&a * &tk + &b * &tm1) / ((k + 1) * (k + 2)) as f64;
        sum += &t;
        dsum += &t * ((k + 2) as f64);
        if t.magnitude() <= tol * reference {
            small += 1;
            if small == 3 {
                break;
            }
        } else {
            small = 0;
        }
        tm1 = tk;
        tk = tk1;
        tk1 = t;
    }
    (sum, &dsum / h)
}

/// Constants shared by the moment integrals for one `n`.
struct Setup {
    len: usize,
    wp: usize,
    ctx: PrecisionContext,
    c: Real,
    kappa: Real,
    c64: f64,
    kappa64: f64,
    x_hat: f64,
}

impl Setup {
    fn new(n: usize, len: usize, params: &ModelParams, wp: usize) -> Result<Setup> {
        let ctx = PrecisionContext::new(wp)?;
        let params = params.with_ctx(ctx);
        let sc = ScaleConstants::new(n, &params)?;
        let kappa = &params.t3 * (n as f64) / (&params.t0 * 3.0);
        let x_hat = curve_constants(&params)?.x_hat.to_f64();
        Ok(Setup {
            len,
            wp,
            ctx,
            c64: sc.c_n.to_f64(),
            kappa64: kappa.to_f64(),
            c: sc.c_n,
            kappa,
            x_hat,
        })
    }

    /// Log-variation rate of the integrand along a path through `z`.
    fn rate(&self, z: Complex64) -> f64 {
        let r = z.norm();
        self.c64.powf(1.5) * r.sqrt() + 3.0 * self.kappa64 * r * r + self.len as f64 / r.max(1.0 / self.c64)
    }

    /// `sum_s rho_l^s omega^{s (j+1)}`: the three rotated sectors.
    fn sector_factor(&self, level: usize, j: usize) -> Complex {
        let e = if level == 0 { 2 } else { 1 };
        let mut acc = self.ctx.zero();
        for s in 0..3i64 {
            acc += self.ctx.omega_pow(s * (j as i64 + 1 + e));
        }
        acc
    }
}

/// Rescaled weights `(w0, w1)` at the nodes of a Stokes ray, by continuation
/// from the origin. `upper` selects `arg z = pi/3` (combination `(y0 - y1)/3`)
/// over `-pi/3` (`(y0 - y2)/3`). Calls `visit(index, r, w0, w1)` in order.
fn walk_stokes_ray(
    s: &Setup,
    upper: bool,
    radii: &[Real],
    visit: &mut dyn FnMut(usize, &Real, Complex, Complex) -> Result<()>,
) -> Result<()> {
    let ctx = &s.ctx;
    let (ai0, aip0) = airy_origin(s.wp);
    let (ai0, aip0) = (Complex::from_real(ai0), Complex::from_real(aip0));
    let one = ctx.one();
    let (ry, ryp) = if upper { (ctx.omega(), ctx.omega_pow(2)) } else { (ctx.omega_pow(2), ctx.omega()) };
    let mut y = (&(&one - &ry) * &ai0) / 3.0;
    let mut yp = (&(&one - &ryp) * &aip0) / 3.0;
    let dir = ctx.unit(if upper { 1 } else { -1 }, 3);
    let tol = 2f64.powi(-(s.wp as i32));
    let mut prev = ctx.real(0.0);
    for (i, r) in radii.iter().enumerate() {
        let h = dir.scale(&(&s.c * &(r - &prev)));
        let u0 = dir.scale(&(&s.c * &prev));
        let (ny, nyp) = airy_step(&y, &yp, &u0, &h, tol);
        y = ny;
        yp = nyp;
        prev = r.clone();
        // on the ray z^3 = -r^3, so the cubic exponential is real
        let e = (-(&s.kappa * &r.powi(3))).exp();
        visit(i, r, y.scale(&e), yp.scale(&e))?;
    }
    Ok(())
}

/// Rescaled `(w0, w1)` at `z = r exp(±i pi/3)` obtained by ODE continuation
/// along the Stokes ray. Exposed so the stepper can be checked against
/// direct evaluation.
pub fn stokes_ray_weights(
    n: usize,
    params: &ModelParams,
    upper: bool,
    radii: &[f64],
    ctx: &PrecisionContext,
) -> Result<Vec<(Complex, Complex)>> {
    let mut sorted = radii.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.first().is_some_and(|r| *r < 0.0) || sorted != radii {
        return Err(Error::InvalidParameters("radii must be non-negative and increasing".into()));
    }
    let s = Setup::new(n, 1, params, ctx.bits() + 32)?;
    let rs: Vec<Real> = radii.iter().map(|r| Real::from_f64(*r, s.wp)).collect();
    let mut out = Vec::with_capacity(rs.len());
    walk_stokes_ray(&s, upper, &rs, &mut |_, _, w0, w1| {
        out.push((w0.with_bits(ctx.bits()), w1.with_bits(ctx.bits())));
        Ok(())
    })?;
    Ok(out)
}

/// Sector-0 sums `sum_i wt_i r_i^j w_l(z_i)` on both Stokes rays, times the
/// direction factors `exp(i (j+1) theta)`.
fn stokes_sector(s: &Setup, order: usize, panels: &[(f64, f64)]) -> Result<[Vec<Complex>; 2]> {
    let pts = panel_points(panels, order, s.wp);
    let radii: Vec<Real> = pts.iter().map(|(r, _)| r.clone()).collect();
    let mut total = [vec![s.ctx.zero(); s.len], vec![s.ctx.zero(); s.len]];
    for upper in [true, false] {
        let mut acc = [vec![s.ctx.zero(); s.len], vec![s.ctx.zero(); s.len]];
        let last = radii.len() - 1;
        walk_stokes_ray(s, upper, &radii, &mut |i, r, w0, w1| {
            let wt = &pts[i].1;
            let mut b0 = w0.scale(wt);
            let mut b1 = w1.scale(wt);
            if i == last {
                // the weights must have decayed as the tail radius assumed
                let rf = r.to_f64();
                let lw = b0.magnitude().max(b1.magnitude() / s.c64).ln() - wt.to_f64().ln();
                for j in 0..s.len {
                    let excess = lw + j as f64 * rf.ln() - ln_peak(j, s.kappa64) + s.wp as f64 * LN_2;
                    if excess > 30.0 {
                        return Err(Error::TailBoundViolation { t: rf });
                    }
                }
            }
            for j in 0..s.len {
                acc[0][j] += &b0;
                acc[1][j] += &b1;
                if j + 1 < s.len {
                    b0 = b0.scale(r);
                    b1 = b1.scale(r);
                }
            }
            Ok(())
        })?;
        let sign = if upper { 1 } else { -1 };
        for j in 0..s.len {
            let dir = s.ctx.unit(sign * (j as i64 + 1), 3);
            for l in 0..2 {
                total[l][j] += &dir * &acc[l][j];
            }
        }
    }
    Ok(total)
}

/// Model of `log |z^jmax w(z)|` on the legs anchored at `x_hat`.
fn leg_log_size(s: &Setup, z: Complex64) -> f64 {
    let zeta = (2.0 / 3.0) * (s.c64 * z).powf(1.5);
    s.len as f64 * z.norm().max(1e-300).ln() + (s.kappa64 * z.powi(3)).re + zeta.re.abs()
}

/// Sector-0 sums on `[0, x_hat]` and the straight legs from `x_hat`, with the
/// weights evaluated directly.
fn xhat_sector(s: &Setup, order: usize, variation: f64, leg_angle: f64, leg_len: f64) -> Result<[Vec<Complex>; 2]> {
    let mut total = [vec![s.ctx.zero(); s.len], vec![s.ctx.zero(); s.len]];
    let pieces = [
        (ContourPiece::Segment(0), Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), s.x_hat),
        (ContourPiece::LegPlus(0), Complex64::new(s.x_hat, 0.0), Complex64::from_polar(1.0, leg_angle), leg_len),
        (ContourPiece::LegMinus(0), Complex64::new(s.x_hat, 0.0), Complex64::from_polar(1.0, -leg_angle), leg_len),
    ];
    let wctx = s.ctx;
    for (piece, z0, dir, len) in pieces {
        let panels = build_panels(len, variation, &|t| s.rate(z0 + dir * t));
        let pts = panel_points(&panels, order, s.wp);
        let z0m = Complex::from_c64(z0, s.wp);
        let dirm = if matches!(piece, ContourPiece::Segment(_)) {
            wctx.one()
        } else {
            wctx.unit(if matches!(piece, ContourPiece::LegPlus(_)) { 1 } else { -1 }, 4)
        };
        // (coefficient, m): coefficient * Ai(omega^m c z), as in the weight definition
        let terms: Vec<(Complex, i64)> = match piece {
            ContourPiece::Segment(_) => vec![(wctx.one(), 0)],
            ContourPiece::LegPlus(_) => vec![(wctx.one() / 3.0, 0), (wctx.omega() / -3.0, 1)],
            ContourPiece::LegMinus(_) => vec![(wctx.one() / 3.0, 0), (wctx.omega_pow(2) / -3.0, 2)],
        };
        for (t, wt) in &pts {
            let z = &z0m + &dirm.scale(t);
            let expo = z.powi(3).scale(&s.kappa);
            let cz = z.scale(&s.c);
            // one Airy pair per term serves both levels
            let mut w = [wctx.zero(), wctx.zero()];
            for (coef, m) in &terms {
                let rot = wctx.omega_pow(*m);
                let arg = &cz * &rot;
                let (a, b) = airy_pair(&arg, true, &wctx)?;
                let fac = &(&expo - &airy_zeta(&arg)).exp() * coef;
                w[0] += &a * &fac;
                w[1] += &(&b * &rot) * &fac;
            }
            check_finite(&w[0], "contour weight")?;
            let dz = dirm.scale(wt);
            let mut b = [&w[0] * &dz, &w[1] * &dz];
            for j in 0..s.len {
                for l in 0..2 {
                    total[l][j] += &b[l];
                    if j + 1 < s.len {
                        b[l] = &b[l] * &z;
                    }
                }
            }
        }
    }
    Ok(total)
}

/// Moment table with entries `j < len`.
pub fn moment_table_len(
    n: usize,
    len: usize,
    params: &ModelParams,
    contour: &ContourConfig,
    ctx: &PrecisionContext,
) -> Result<MomentTable> {
    if n == 0 || len == 0 {
        return Err(Error::InvalidParameters("n and the table length must be positive".into()));
    }
    params.require_not_supercritical()?;
    if params.regime == Regime::Critical {
        return Err(Error::CriticalRegime);
    }
    let probe = Setup::new(n, len, params, 64)?;
    // guard bits for rounding plus the cancellation among high moments
    let mut wp = ctx.bits() + 32 + len;
    let leg_angle = contour.leg_angle;
    let mut leg_len = 0.0;
    if contour.anchor == LegAnchor::XHat {
        if !(leg_angle > 0.0 && leg_angle < PI / 3.0) {
            return Err(Error::InvalidParameters(format!("leg angle {leg_angle} outside (0, pi/3)")));
        }
        // the legs grow before the cubic decay wins and cancel against each
        // other; widen by the peak size along the leg
        let dir = Complex64::from_polar(1.0, leg_angle);
        let size = |t: f64| leg_log_size(&probe, Complex64::new(probe.x_hat, 0.0) + dir * t);
        let mut peak = size(0.0);
        let mut t: f64 = 0.0;
        while t < 1.0 || size(t) > peak - 5.0 {
            t += 0.01_f64.max(0.02 * t);
            peak = peak.max(size(t));
        }
        wp += (peak.max(0.0) / LN_2).ceil() as usize;
        let target = peak - wp as f64 * LN_2 - 10.0;
        while size(t) > target {
            t += 0.01_f64.max(0.02 * t);
        }
        leg_len = t;
    }
    let s = Setup::new(n, len, params, wp)?;
    let order = contour.order.unwrap_or_else(|| gauss_order(wp, contour.panel_variation));
    let coarse = order.saturating_sub(3).max(4);
    let (fine, rough) = match contour.anchor {
        LegAnchor::Origin => {
            let rmax = tail_radius(len, s.kappa64, s.c64, wp);
            let panels = build_panels(rmax, contour.panel_variation, &|r| s.rate(Complex64::new(r, 0.0)));
            (stokes_sector(&s, order, &panels)?, stokes_sector(&s, coarse, &panels)?)
        }
        LegAnchor::XHat => (
            xhat_sector(&s, order, contour.panel_variation, leg_angle, leg_len)?,
            xhat_sector(&s, coarse, contour.panel_variation, leg_angle, leg_len)?,
        ),
    };
    let mut m = [Vec::with_capacity(len), Vec::with_capacity(len)];
    let mut err = [Vec::with_capacity(len), Vec::with_capacity(len)];
    for l in 0..2 {
        for j in 0..len {
            let f = s.sector_factor(l, j);
            let a = &fine[l][j] * &f;
            let b = &rough[l][j] * &f;
            let tail = (ln_peak(j, s.kappa64) - wp as f64 * LN_2).exp() * 1e4;
            err[l].push((&a - &b).magnitude() + tail);
            m[l].push(a);
        }
    }
    let [m0, m1] = m;
    let [err0, err1] = err;
    Ok(MomentTable { n, m0, m1, err0, err1, exact_constants: false, bits: wp })
}

/// Moments up to the index needed by `orthopoly` (`n + ceil(n/2)`), at least six.
pub fn moment_table(n: usize, params: &ModelParams, contour: &ContourConfig, ctx: &PrecisionContext) -> Result<MomentTable> {
    moment_table_len(n, (n + n.div_ceil(2)).max(6), params, contour, ctx)
}

/// Largest `|k t0 mu_{j,k-1} - n mu_{j+1,k} + n t3 mu_{j,k+2}|` over the 3x3
/// block `j, k < 3`, relative to the largest term.
pub fn moment_recursion_residual(table: &MomentTable, params: &ModelParams) -> Result<f64> {
    let t = table.with_exact_constants(params)?;
    let p = params.with_ctx(PrecisionContext::new(t.bits)?);
    let nn = t.n as f64;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for j in 0..3 {
        for k in 0..3 {
            let first = if k == 0 { p.ctx().zero() } else { t.mu(j, k - 1, &p)?.scale(&(&p.t0 * k as f64)) };
            let second = t.mu(j + 1, k, &p)? * nn;
            let third = t.mu(j, k + 2, &p)?.scale(&(&p.t3 * nn));
            scale = scale.max(first.magnitude()).max(second.magnitude()).max(third.magnitude());
            worst = worst.max((&(&first - &second) + &third).magnitude());
        }
    }
    Ok(worst / scale)
}

// ---- polynomials ----------------------------------------------------------

/// Normalized zero counting measure: mass `weight` at each point.
#[derive(Clone, Debug)]
pub struct ZeroCountingMeasure {
    pub points: Vec<Complex>,
    pub weight: f64,
}

/// Monic polynomial with ascending coefficients (`coeffs[degree] = 1`).
#[derive(Clone, Debug)]
pub struct MonicPolynomial {
    pub degree: usize,
    /// The `n` of the weights it is orthogonal against.
    pub n: usize,
    pub coeffs: Vec<Complex>,
    pub zeros: Vec<Complex>,
    /// Relative residual of the moment system.
    pub residual: f64,
}

impl MonicPolynomial {
    pub fn eval(&self, z: &Complex) -> Complex {
        poly_eval(&self.coeffs, &z.with_bits(self.coeffs[0].bits())).0
    }

    pub fn nu(&self) -> ZeroCountingMeasure {
        ZeroCountingMeasure { points: self.zeros.clone(), weight: 1.0 / self.degree.max(1) as f64 }
    }

    /// Largest `|coeff[j]|` with `j` not congruent to the degree mod 3,
    /// relative to the largest coefficient.
    pub fn sparsity(&self) -> f64 {
        let scale = self.coeffs.iter().map(|c| c.magnitude()).fold(0.0, f64::max);
        let off = (0..self.degree)
            .filter(|j| (self.degree - j) % 3 != 0)
            .map(|j| self.coeffs[j].magnitude())
            .fold(0.0, f64::max);
        off / scale
    }

    /// Largest imaginary part among the coefficients, relative to the largest.
    pub fn imaginary_part(&self) -> f64 {
        let scale = self.coeffs.iter().map(|c| c.magnitude()).fold(0.0, f64::max);
        self.coeffs.iter().map(|c| c.im.to_f64().abs()).fold(0.0, f64::max) / scale
    }
}

/// Degree-`k` polynomial orthogonal to `z^q w_0` (`q < ceil(k/2)`) and
/// `z^q w_1` (`q < floor(k/2)`), from a table at `n`. The columns are scaled
/// to unit size before the fully pivoted solve.
pub fn orthopoly_from_table(k: usize, table: &MomentTable, ctx: &PrecisionContext) -> Result<MonicPolynomial> {
    let need = k + k.div_ceil(2);
    if table.len() < need {
        return Err(Error::InvalidParameters(format!("degree {k} needs {need} moments, table has {}", table.len())));
    }
    let wp = PrecisionContext::new(table.bits)?;
    let mut rows: Vec<Vec<Complex>> = Vec::with_capacity(k);
    let mut rhs = Vec::with_capacity(k);
    for (m, count) in [(&table.m0, k.div_ceil(2)), (&table.m1, k / 2)] {
        for q in 0..count {
            rows.push((0..k).map(|i| m[i + q].clone()).collect());
            rhs.push(-&m[k + q]);
        }
    }
    let col_scale: Vec<f64> = (0..k)
        .map(|i| rows.iter().map(|r| r[i].magnitude()).fold(0.0, f64::max))
        .map(|s| if s > 0.0 { s } else { 1.0 })
        .collect();
    let scaled: Vec<Vec<Complex>> =
        rows.iter().map(|r| r.iter().zip(&col_scale).map(|(x, s)| x * (1.0 / *s)).collect()).collect();
    let y = solve_linear(scaled, rhs.clone(), &wp)?;
    let mut coeffs: Vec<Complex> = y.iter().zip(&col_scale).map(|(v, s)| v * (1.0 / *s)).collect();
    coeffs.push(wp.one());
    let mut residual: f64 = 0.0;
    for (row, b) in rows.iter().zip(&rhs) {
        let mut acc = -b;
        let mut size = b.magnitude();
        for (a, c) in row.iter().zip(&coeffs) {
            let t = a * c;
            size += t.magnitude();
            acc += &t;
        }
        residual = residual.max(acc.magnitude() / size.max(f64::MIN_POSITIVE));
    }
    let zeros = if k == 0 { Vec::new() } else { solve_polynomial(&coeffs, &wp)? };
    let bits = ctx.bits();
    Ok(MonicPolynomial {
        degree: k,
        n: table.n,
        coeffs: coeffs.iter().map(|c| c.with_bits(bits)).collect(),
        zeros: zeros.iter().map(|z| z.with_bits(bits)).collect(),
        residual,
    })
}

/// `P_{n,n}`. A singular system is retried once with more bits.
pub fn orthopoly(n: usize, params: &ModelParams, contour: &ContourConfig, ctx: &PrecisionContext) -> Result<MonicPolynomial> {
    let attempt = |c: &PrecisionContext| {
        let table = moment_table(n, params, contour, c)?;
        orthopoly_from_table(n, &table, c)
    };
    match attempt(ctx) {
        Err(Error::SingularSystem { .. }) => {
            let wider = PrecisionContext::new(ctx.bits() + (4 * n).max(64))?;
            let p = attempt(&wider)?;
            let bits = ctx.bits();
            Ok(MonicPolynomial {
                coeffs: p.coeffs.iter().map(|c| c.with_bits(bits)).collect(),
                zeros: p.zeros.iter().map(|z| z.with_bits(bits)).collect(),
                ..p
            })
        }
        other => other,
    }
}

/// Where the zeros sit relative to `Sigma1`.
#[derive(Clone, Debug)]
pub struct ZeroDiagnostics {
    pub max_dist_to_sigma1: f64,
    /// Largest distance from `omega z` to the nearest zero, over all zeros `z`.
    pub rotation_mismatch: f64,
    pub nu: ZeroCountingMeasure,
}

/// Distance from `z` to `Sigma1 = U_j [0, omega^j x_star]`.
pub fn distance_to_sigma1(z: Complex64, x_star: f64) -> f64 {
    let w = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
    (0..3)
        .map(|j| {
            let u = z * w.powi(-j);
            let x = u.re.clamp(0.0, x_star);
            (u - x).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn zero_diagnostics(poly: &MonicPolynomial, params: &ModelParams) -> Result<ZeroDiagnostics> {
    let x_star = curve_constants(params)?.x_star.to_f64();
    let zs: Vec<Complex64> = poly.zeros.iter().map(|z| z.to_c64()).collect();
    let w = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
    let max_dist = zs.iter().map(|z| distance_to_sigma1(*z, x_star)).fold(0.0, f64::max);
    let mismatch = zs
        .iter()
        .map(|z| zs.iter().map(|v| (w * z - v).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    Ok(ZeroDiagnostics { max_dist_to_sigma1: max_dist, rotation_mismatch: mismatch, nu: poly.nu() })
}

// ---- brute-force Hermitian form ------------------------------------------

/// Ray angles of the contours: `Gamma_j` runs in along `THETA[j]` and out along `THETA[j+1]`.
const THETA: [f64; 3] = [-PI / 3.0, PI / 3.0, PI];
const EPS: [[i32; 3]; 3] = [[0, -1, 1], [1, 0, -1], [-1, 1, 0]];

/// `<z^a, z^b>` for `a, b <= max_degree` from the double contour integral
/// over ray pairs through the origin.
#[derive(Clone, Debug)]
pub struct HermitianForm {
    pub n: usize,
    pub max_degree: usize,
    mu: Vec<Vec<Complex>>,
    abs_mu: Vec<Vec<f64>>,
}

struct RayNodes {
    z: Vec<Complex>,
    /// `dz` weight times `exp(n t3 z^3 / (3 t0))`.
    wt: Vec<Complex>,
}

impl HermitianForm {
    pub fn new(n: usize, max_degree: usize, params: &ModelParams, ctx: &PrecisionContext) -> Result<HermitianForm> {
        if n == 0 {
            return Err(Error::InvalidParameters("n must be positive".into()));
        }
        params.require_not_supercritical()?;
        let bits = if ctx.is_double() { 53 } else { ctx.bits() + 16 };
        let wctx = if ctx.is_double() { PrecisionContext::double() } else { PrecisionContext::new(bits)? };
        let p = params.with_ctx(wctx);
        let nn = n as f64;
        let kappa = p.t3_f64() * nn / (3.0 * p.t0_f64());
        let lam = nn / p.t0_f64();
        let deg = max_degree as f64;
        // exponent bound: lam s u - kappa (s^3 + u^3) + deg ln(s u), maximized over u
        let log_size = |s: f64| {
            (0..400)
                .map(|i| {
                    let u = 0.025 * i as f64 + 1e-9;
                    lam * s * u - kappa * (s.powi(3) + u.powi(3)) + deg * (s * u).max(1e-300).ln()
                })
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let peak = (1..400).map(|i| log_size(0.025 * i as f64)).fold(f64::NEG_INFINITY, f64::max);
        let target = peak - bits as f64 * LN_2 - 10.0;
        let mut smax = 0.5;
        while log_size(smax) > target {
            smax += 0.05;
        }
        let variation = 16.0;
        let rate = |s: f64| lam * smax + 3.0 * kappa * s * s + deg / s.max(0.1) + 1.0;
        let panels = build_panels(smax, variation, &rate);
        let order = gauss_order(bits, variation);
        let pts = panel_points(&panels, order, bits);
        let kap = &p.t3 * nn / (&p.t0 * 3.0);
        let rays: Vec<RayNodes> = THETA
            .iter()
            .enumerate()
            .map(|(i, _)| {
                // exp(i theta) exactly for the three angles
                let dir = match i {
                    0 => wctx.unit(-1, 3),
                    1 => wctx.unit(1, 3),
                    _ => wctx.complex(-1.0, 0.0),
                };
                let mut z = Vec::with_capacity(pts.len());
                let mut wt = Vec::with_capacity(pts.len());
                for (s, w) in &pts {
                    let zz = dir.scale(s);
                    let cubic = (&zz.powi(3) * &kap).exp();
                    wt.push(&dir.scale(w) * &cubic);
                    z.push(zz);
                }
                RayNodes { z, wt }
            })
            .collect();
        let lam_m = wctx.real(nn) / &p.t0;
        let dim = max_degree + 1;
        // T[p][q][a][b] = int_{ray p} int_{ray q} z^a w^b exp(-lam w z) wt dz dw
        let mut table: Vec<Option<Vec<Vec<Complex>>>> = vec![None; 9];
        let mut pair = |pz: usize, qw: usize| -> Vec<Vec<Complex>> {
            if let Some(t) = &table[pz * 3 + qw] {
                return t.clone();
            }
            let (zr, wr) = (&rays[pz], &rays[qw]);
            let wpow: Vec<Vec<Complex>> = wr
                .z
                .iter()
                .zip(&wr.wt)
                .map(|(w, t)| {
                    let mut v = Vec::with_capacity(dim);
                    let mut x = t.clone();
                    for _ in 0..dim {
                        v.push(x.clone());
                        x = &x * w;
                    }
                    v
                })
                .collect();
            let mut t = vec![vec![wctx.zero(); dim]; dim];
            for (z, zw) in zr.z.iter().zip(&zr.wt) {
                let mut inner = vec![wctx.zero(); dim];
                let mlz = -(z.scale(&lam_m));
                for (w, wp) in wr.z.iter().zip(&wpow) {
                    let k = (&mlz * w).exp();
                    for b in 0..dim {
                        inner[b] += &k * &wp[b];
                    }
                }
                let mut za = zw.clone();
                for row in t.iter_mut() {
                    for b in 0..dim {
                        row[b] += &za * &inner[b];
                    }
                    za = &za * z;
                }
            }
            table[pz * 3 + qw] = Some(t.clone());
            t
        };
        // conjugation maps the ray at theta to the ray at -theta
        let conj_ray = [1usize, 0, 2];
        let pieces = |j: usize| [(j, -1.0), ((j + 1) % 3, 1.0)];
        let mut mu = vec![vec![wctx.zero(); dim]; dim];
        let mut abs_mu = vec![vec![0.0; dim]; dim];
        for j in 0..3 {
            for k in 0..3 {
                let e = EPS[j][k];
                if e == 0 {
                    continue;
                }
                for (pz, sz) in pieces(j) {
                    for (qk, sw) in pieces(k) {
                        let t = pair(pz, conj_ray[qk]);
                        let sign = e as f64 * sz * sw;
                        for a in 0..dim {
                            for b in 0..dim {
                                abs_mu[a][b] += t[a][b].magnitude();
                                mu[a][b] += &t[a][b] * sign;
                            }
                        }
                    }
                }
            }
        }
        // 1 / (2 pi i) = -i / (2 pi)
        let pre = Complex::new(wctx.real(0.0), -(wctx.real(1.0) / (wctx.pi() * 2.0)));
        let mu: Vec<Vec<Complex>> = mu.iter().map(|r| r.iter().map(|m| m * &pre).collect()).collect();
        let abs_mu = abs_mu.iter().map(|r| r.iter().map(|m| m / (2.0 * PI)).collect()).collect();
        Ok(HermitianForm { n, max_degree, mu, abs_mu })
    }

    pub fn moment(&self, a: usize, b: usize) -> &Complex {
        &self.mu[a][b]
    }

    fn check(&self, f: &[Complex], g: &[Complex]) -> Result<()> {
        if f.len() > self.max_degree + 1 || g.len() > self.max_degree + 1 {
            return Err(Error::InvalidParameters(format!("degree above {}", self.max_degree)));
        }
        Ok(())
    }

    /// `<f, g> = sum_{a,b} f_a conj(g_b) mu_{a,b}` (ascending coefficients).
    pub fn eval(&self, f: &[Complex], g: &[Complex]) -> Result<Complex> {
        self.check(f, g)?;
        let mut acc = self.mu[0][0].zero_like();
        for (a, fa) in f.iter().enumerate() {
            for (b, gb) in g.iter().enumerate() {
                acc += &(fa * &gb.conj()) * &self.mu[a][b];
            }
        }
        Ok(acc)
    }

    /// Rounding scale of `eval`: the same sum with every term in modulus and
    /// the ray integrals taken before cancellation between rays.
    pub fn scale(&self, f: &[Complex], g: &[Complex]) -> Result<f64> {
        self.check(f, g)?;
        let mut acc = 0.0;
        for (a, fa) in f.iter().enumerate() {
            for (b, gb) in g.iter().enumerate() {
                acc += fa.magnitude() * gb.magnitude() * self.abs_mu[a][b];
            }
        }
        Ok(acc)
    }
}

/// `<f, g>` by direct double contour quadrature; `f` and `g` have degree at most 4.
pub fn hermitian_form_bruteforce(
    f: &[Complex],
    g: &[Complex],
    n: usize,
    params: &ModelParams,
    ctx: &PrecisionContext,
) -> Result<Complex> {
    if f.len() > 5 || g.len() > 5 {
        return Err(Error::InvalidParameters("brute-force form is limited to degree 4".into()));
    }
    HermitianForm::new(n, 4, params, ctx)?.eval(f, g)
}

// ---- asymptotics ------------------------------------------------------------

/// Points `h(rho e^{i phi})` outside the domain at distance at least
/// `0.2 x_star` from `Sigma1`.
pub fn exterior_testpoints(params: &ModelParams, count: usize) -> Result<Vec<Complex64>> {
    let p = params.with_ctx(PrecisionContext::double());
    let dom = GrowthDomain::with_samples(&p, 256)?;
    let x_star = curve_constants(&p)?.x_star.to_f64();
    let mut out = Vec::with_capacity(count);
    let mut k = 0;
    while out.len() < count && k < 50 * count.max(1) {
        let rho = [1.3, 1.7, 2.4][k % 3];
        let phi = 0.37 + 2.0 * PI * (k as f64) * 0.618_033_988_75;
        let z = dom.h(&Complex::from_c64(Complex64::from_polar(rho, phi), 53)).to_c64();
        if distance_to_sigma1(z, x_star) >= 0.2 * x_star && dom.is_exterior(z) == Some(true) {
            out.push(z);
        }
        k += 1;
    }
    Ok(out)
}

/// Double-precision `g1` and `M11` used to judge the polynomials.
pub struct AsymptoticModel {
    measures: EquilibriumMeasures,
    domain: GrowthDomain,
}

/// Sup of the absolute and of the relative strong-asymptotics residual.
#[derive(Clone, Copy, Debug)]
pub struct StrongResidual {
    pub sup: f64,
    pub normalized: f64,
}

impl AsymptoticModel {
    pub fn new(params: &ModelParams) -> Result<AsymptoticModel> {
        let p = params.with_ctx(PrecisionContext::double());
        Ok(AsymptoticModel { measures: EquilibriumMeasures::new(&p)?, domain: GrowthDomain::with_samples(&p, 512)? })
    }

    /// `g1(z)` with the branch for which `exp(n g1)` is analytic off `Sigma1` (n even).
    pub fn g1(&self, z: Complex64) -> Result<Complex64> {
        let zz = Complex::from_c64(z, 53);
        Ok(self.measures.g1(&zz, Side::Plus)?.value.to_c64())
    }

    pub fn m11(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.domain.m11(&Complex::from_c64(z, 53))?.to_c64())
    }

    fn check_point(&self, z: Complex64) -> Result<()> {
        if self.domain.is_exterior(z) != Some(true) {
            return Err(Error::InsideDomain);
        }
        Ok(())
    }

    pub fn log_potential_residual(&self, poly: &MonicPolynomial, pts: &[Complex64]) -> Result<f64> {
        let bits = poly.coeffs[0].bits();
        let mut worst: f64 = 0.0;
        for &z in pts {
            self.check_point(z)?;
            let p = poly.eval(&Complex::from_c64(z, bits));
            let lp = p.abs().ln().to_f64() / poly.degree as f64;
            worst = worst.max((lp - self.g1(z)?.re).abs());
        }
        Ok(worst)
    }

    /// `|P(z) exp(-n g_scale g1(z)) - M11(z)|`, sup over the points; `g_scale`
    /// is 1 except in the negative control.
    pub fn strong_residual_scaled(&self, poly: &MonicPolynomial, pts: &[Complex64], g_scale: f64) -> Result<StrongResidual> {
        let bits = poly.coeffs[0].bits();
        let nn = poly.degree as f64;
        let (mut sup, mut norm): (f64, f64) = (0.0, 0.0);
        for &z in pts {
            self.check_point(z)?;
            let p = poly.eval(&Complex::from_c64(z, bits));
            let g = Complex::from_c64(self.g1(z)? * (-nn * g_scale), bits);
            let v = (&p * &g.exp()).to_c64();
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::OverflowAtPrecision { bits });
            }
            let m = self.m11(z)?;
            let d = (v - m).norm();
            sup = sup.max(d);
            norm = norm.max(d / m.norm());
        }
        Ok(StrongResidual { sup, normalized: norm })
    }
}

pub fn log_potential_residual(poly: &MonicPolynomial, params: &ModelParams, testpoints: &[Complex64]) -> Result<f64> {
    AsymptoticModel::new(params)?.log_potential_residual(poly, testpoints)
}

pub fn strong_asymptotics_residual(
    poly: &MonicPolynomial,
    params: &ModelParams,
    testpoints: &[Complex64],
) -> Result<StrongResidual> {
    AsymptoticModel::new(params)?.strong_residual_scaled(poly, testpoints, 1.0)
}

//! Model parameters, critical constants, the spectral cubic
//! `xi^3 - t3 z^2 xi^2 - (t0 t3 + 1/t3) z xi + z^3 + A = 0`,
//! its labeled branches and the Cauchy transforms of the equilibrium measures.
//!
//! Branch labels are computed on the rational uniformizer
//! `z = r w + a w^-2`, `xi = a w^2 + r w^-1`: the three preimages `w` of a
//! point `z` only collide at the branch points, so continuation in the
//! `w`-plane is well conditioned at the nodes where two `xi` coincide.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{aberth64, solve_polynomial, Complex, PrecisionContext, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

/// `(t0, t3)` together with the working precision.
#[derive(Clone, Debug)]
pub struct ModelParams {
    pub t0: Real,
    pub t3: Real,
    pub regime: Regime,
    ctx: PrecisionContext,
}

impl ModelParams {
    pub fn new(t0: f64, t3: f64, ctx: PrecisionContext) -> Result<ModelParams> {
        if !(t0.is_finite() && t3.is_finite() && t0 > 0.0 && t3 > 0.0) {
            return Err(Error::InvalidParameters(format!("need t0 > 0 and t3 > 0, got ({t0}, {t3})")));
        }
        Self::from_reals(ctx.real(t0), ctx.real(t3), ctx)
    }

    /// Parameters from decimal strings, rounded once at the context precision.
    pub fn from_decimal(t0: &str, t3: &str, ctx: PrecisionContext) -> Result<ModelParams> {
        Self::from_reals(ctx.parse(t0)?, ctx.parse(t3)?, ctx)
    }

    pub fn from_reals(t0: Real, t3: Real, ctx: PrecisionContext) -> Result<ModelParams> {
        if !(t0 > 0.0 && t3 > 0.0) || !t0.is_finite() || !t3.is_finite() {
            return Err(Error::InvalidParameters("need t0 > 0 and t3 > 0".into()));
        }
        let t0 = t0.with_bits(ctx.bits());
        let t3 = t3.with_bits(ctx.bits());
        let d = 1.0 - &t0 * t3.square() * 8.0;
        let tol = ctx.eps() * 64.0;
        let regime = if d.abs().to_f64() <= tol {
            Regime::Critical
        } else if d.is_negative() {
            Regime::Supercritical
        } else {
            Regime::Subcritical
        };
        Ok(ModelParams { t0, t3, regime, ctx })
    }

    pub fn ctx(&self) -> PrecisionContext {
        self.ctx
    }

    /// Same parameters at another precision.
    pub fn with_ctx(&self, ctx: PrecisionContext) -> ModelParams {
        ModelParams::from_reals(self.t0.clone(), self.t3.clone(), ctx).expect("parameters already validated")
    }

    pub fn t0_f64(&self) -> f64 {
        self.t0.to_f64()
    }

    pub fn t3_f64(&self) -> f64 {
        self.t3.to_f64()
    }

    pub fn require_not_supercritical(&self) -> Result<()> {
        if self.regime == Regime::Supercritical {
            return Err(Error::SupercriticalRegime {
                t0: self.t0_f64(),
                t0_crit: critical_t0(&self.t3).to_f64(),
            });
        }
        Ok(())
    }
}

/// `t0_crit = 1 / (8 t3^2)`.
pub fn critical_t0(t3: &Real) -> Real {
    1.0 / (t3.square() * 8.0)
}

/// Closed-form constants of the curve and of its rational uniformizer.
#[derive(Clone, Debug)]
pub struct CurveConstants {
    /// Endpoint of the star-shaped support of the first measure.
    pub x_star: Real,
    /// Node of the curve on the positive axis.
    pub x_hat: Real,
    /// Constant term `A` of the spectral cubic.
    pub a_const: Real,
    pub t0_crit: Real,
    /// `sqrt(1 - 8 t0 t3^2)`.
    pub root: Real,
    /// Uniformizer coefficients `z = r w + a w^-2`.
    pub r: Real,
    pub a: Real,
}

pub fn curve_constants(params: &ModelParams) -> Result<CurveConstants> {
    params.require_not_supercritical()?;
    let t0 = &params.t0;
    let t3 = &params.t3;
    let q = t0 * t3.square() * 8.0;
    let root = if params.regime == Regime::Critical { q.zero_like() } else { (1.0 - &q).sqrt() };
    // 1 - s written without cancellation
    let one_minus_s = &q / (&root + 1.0);
    let two_thirds = q.lit(2.0) / 3.0;
    let x_star = if one_minus_s.is_zero() {
        one_minus_s.clone()
    } else {
        one_minus_s.powf(&two_thirds) * 3.0 / (t3 * 4.0)
    };
    let x_hat = (&root + 3.0) / (t3 * 4.0);
    let t3_3 = t3.powi(3);
    let a_const = (1.0 + t0 * t3.square() * 20.0 - t0.square() * t3.powi(4) * 8.0 - root.powi(3)) / (&t3_3 * 32.0);
    let r = one_minus_s.sqrt() / (t3 * 2.0);
    let a = &one_minus_s / (t3 * 4.0);
    Ok(CurveConstants { x_star, x_hat, a_const, t0_crit: critical_t0(t3), root, r, a })
}

/// Coefficients (ascending in `zeta = z^3`) and roots of the discriminant.
#[derive(Clone, Debug)]
pub struct Discriminant {
    pub coeffs: [Real; 4],
    pub roots: Vec<Complex>,
    /// Largest relative deviation of the root set from `{x_star^3, x_hat^3, x_hat^3}`.
    pub pattern_residual: f64,
}

pub fn discriminant_zeta(params: &ModelParams) -> Result<Discriminant> {
    let k = curve_constants(params)?;
    let ctx = params.ctx();
    let t0 = &params.t0;
    let t3 = &params.t3;
    let a = &k.a_const;
    let c3 = t3.powi(3) * 4.0;
    let c2 = t0.square() * t3.powi(4) + a * t3.powi(3) * 4.0 + t0 * t3.square() * 20.0 - 8.0;
    let c1 = t0.powi(3) * t3.powi(3) * 4.0 + a * t0 * t3.square() * 18.0 + t0.square() * t3 * 12.0 - a * 36.0
        + t0 / t3 * 12.0
        + 4.0 / t3.powi(3);
    let c0 = -(a.square() * 27.0);
    let cz: Vec<Complex> = [&c0, &c1, &c2, &c3].iter().map(|c| Complex::from_real((*c).clone())).collect();
    let roots = solve_polynomial(&cz, &ctx)?;
    let s3 = k.x_star.powi(3);
    let h3 = k.x_hat.powi(3);
    let mut expected = [s3, h3.clone(), h3];
    expected.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut got: Vec<Complex> = roots.clone();
    got.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap());
    let mut worst: f64 = 0.0;
    for (g, e) in got.iter().zip(expected.iter()) {
        let d = (g - &Complex::from_real(e.clone())).abs().to_f64() / e.to_f64().abs().max(1.0);
        worst = worst.max(d);
    }
    // a double root is only resolved to about half the working digits
    let tol = if ctx.is_double() { 1e-5 } else { ctx.eps().powf(0.3) };
    if !(worst <= tol) {
        return Err(Error::RootMismatch(worst));
    }
    Ok(Discriminant { coeffs: [c0, c1, c2, c3], roots, pattern_residual: worst })
}

/// Sectors `S0: |arg z| < pi/3`, `S1: pi/3 < arg z < pi`, `S2: -pi < arg z < -pi/3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sector {
    S0,
    S1,
    S2,
}

/// Sign of the `z^{1/2} / sqrt(t3)` term of `(xi2, xi3)` in each sector
/// (principal square root).
pub const SHEET_SIGNS: [(Sector, i8, i8); 3] = [(Sector::S0, 1, -1), (Sector::S1, -1, 1), (Sector::S2, -1, 1)];

pub fn sheet_signs(sector: Sector) -> (i8, i8) {
    let row = SHEET_SIGNS.iter().find(|row| row.0 == sector).expect("every sector has a row");
    (row.1, row.2)
}

/// Which rule produced the labels of a [`BranchTriple`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelRule {
    /// `|z| >= R_far`, labels from the large-`z` expansions.
    FarField,
    /// Continued along the ray from `R_far z/|z|`.
    RayContinuation,
    /// On the first support: real root is `xi3`, conjugate pair is `xi1,+`, `xi1,-`.
    ConjugatePair,
    /// On the second support: one-sided limit from the `+` side.
    OneSided,
}

/// Side of an oriented cut. `Plus` is the left side for the outward orientation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
    Off,
}

/// The three labeled roots of the spectral cubic at `z`.
#[derive(Clone, Debug)]
pub struct BranchTriple {
    pub xi: [Complex; 3],
    pub sector: Sector,
    pub rule: LabelRule,
    pub side: Side,
    /// Uniformizer preimages in sheet order (`xi_k = a w_k^2 + r / w_k`).
    pub w: [Complex; 3],
}

/// Where a point sits relative to the cut system.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutLocation {
    Off,
    /// On the open segment `[0, omega^j x_star]`.
    FirstSupport(usize),
    /// On the ray of the second support with argument `pi/3`, `pi`, `-pi/3` (index 0, 1, 2).
    SecondSupport(usize),
    Origin,
}

/// Curve with precomputed constants; cheap to clone.
#[derive(Clone, Debug)]
pub struct SpectralCurve {
    pub params: ModelParams,
    pub k: CurveConstants,
    ctx: PrecisionContext,
    r_far: f64,
    tau_bp: f64,
    sqrt_t3: Real,
    f: Floats,
}

#[derive(Clone, Copy, Debug)]
struct Floats {
    r: f64,
    a: f64,
    t3: f64,
    x_star: f64,
}

fn c64_sep(w: &[Complex64; 3]) -> f64 {
    let d01 = (w[0] - w[1]).norm();
    let d02 = (w[0] - w[2]).norm();
    let d12 = (w[1] - w[2]).norm();
    d01.min(d02).min(d12)
}

impl SpectralCurve {
    pub fn new(params: &ModelParams) -> Result<SpectralCurve> {
        let k = curve_constants(params)?;
        let ctx = params.ctx();
        let x_hat = k.x_hat.to_f64();
        let x_star = k.x_star.to_f64();
        let f = Floats { r: k.r.to_f64(), a: k.a.to_f64(), t3: params.t3_f64(), x_star };
        Ok(SpectralCurve {
            sqrt_t3: params.t3.sqrt(),
            params: params.clone(),
            k,
            ctx,
            r_far: 10.0 * x_hat.max(1.0),
            // within this radius the labels of the two merging sheets are not resolvable
            tau_bp: 1e3 * f64::EPSILON * x_star,
            f,
        })
    }

    pub fn ctx(&self) -> PrecisionContext {
        self.ctx
    }

    /// Radius beyond which labels come straight from the expansions at infinity.
    pub fn r_far(&self) -> f64 {
        self.r_far
    }

    /// Cubic coefficients in `xi` (ascending) at `z`.
    pub fn cubic_coeffs(&self, z: &Complex) -> [Complex; 4] {
        let t0 = &self.params.t0;
        let t3 = &self.params.t3;
        let z2 = z.square();
        let z3 = &z2 * z;
        let c1 = z.scale(&(-(t0 * t3) - 1.0 / t3));
        let c2 = z2.scale(&(-t3));
        let c0 = z3 + self.k.a_const.clone();
        [c0, c1, c2, z.one_like()]
    }

    /// Residual of the spectral cubic at `(z, xi)`.
    pub fn cubic_residual(&self, z: &Complex, xi: &Complex) -> Complex {
        let c = self.cubic_coeffs(z);
        let mut p = c[3].clone();
        for k in (0..3).rev() {
            p = &p * xi + &c[k];
        }
        p
    }

    pub fn sector_of(&self, z: &Complex) -> Sector {
        let th = z.arg();
        let pi3 = self.ctx.pi() / 3.0;
        if th.abs() < pi3 {
            Sector::S0
        } else if th.is_negative() {
            Sector::S2
        } else {
            Sector::S1
        }
    }

    /// Classify `z` against the first support `Sigma1` and the rays of `Sigma2`.
    pub fn locate(&self, z: &Complex) -> CutLocation {
        if z.is_zero() {
            return CutLocation::Origin;
        }
        let z3 = z.powi(3);
        let m3 = z3.abs();
        let tol = m3.to_f64() * self.ctx.eps() * 64.0;
        if z3.im.abs().to_f64() > tol {
            return CutLocation::Off;
        }
        let th = z.arg().to_f64();
        let sixth = std::f64::consts::PI / 3.0;
        if z3.re.is_negative() {
            // arguments pi/3, pi, -pi/3
            let idx = if (th - sixth).abs() < 0.5 {
                0
            } else if th.abs() > 2.0 * sixth + 0.5 {
                1
            } else {
                2
            };
            CutLocation::SecondSupport(idx)
        } else if z.abs() < self.k.x_star {
            let j = ((th / (2.0 * sixth)).round() as i64).rem_euclid(3) as usize;
            CutLocation::FirstSupport(j)
        } else {
            CutLocation::Off
        }
    }

    fn check_branch_point(&self, z: &Complex) -> Result<()> {
        let zc = z.to_c64();
        for j in 0..3 {
            let bp = Complex64::from_polar(self.f.x_star, 2.0 * std::f64::consts::PI * j as f64 / 3.0);
            if (zc - bp).norm() < self.tau_bp {
                return Err(Error::BranchTrackingFailure(format!("{zc} is a branch point")));
            }
        }
        Ok(())
    }

    /// Uniformizer preimages of `zf` (hardware precision), in sheet order,
    /// using the expansions at infinity. `sector` picks the sign table row.
    fn far_preimages(&self, zf: Complex64, sector: Sector) -> Result<[Complex64; 3]> {
        let Floats { r, a, t3, .. } = self.f;
        let c = [Complex64::new(a, 0.0), Complex64::new(0.0, 0.0), -zf, Complex64::new(r, 0.0)];
        let mut ws = aberth64(&c).ok_or_else(|| Error::BranchTrackingFailure(format!("far roots at {zf}")))?;
        for w in ws.iter_mut() {
            *w = newton_w64(r, a, zf, *w);
        }
        ws.sort_by(|x, y| y.norm().partial_cmp(&x.norm()).unwrap());
        let (s2, _) = sheet_signs(sector);
        let target = zf.sqrt() * (s2 as f64) / t3.sqrt();
        let xi = |w: Complex64| a * w * w + r / w;
        let (w2, w3) = if (xi(ws[1]) - target).norm() <= (xi(ws[2]) - target).norm() {
            (ws[1], ws[2])
        } else {
            (ws[2], ws[1])
        };
        Ok([ws[0], w2, w3])
    }

    /// Continue sheet-ordered preimages from `from` to `to` along a straight path.
    fn continue_preimages(&self, mut w: [Complex64; 3], from: Complex64, to: Complex64) -> Result<[Complex64; 3]> {
        let Floats { r, a, .. } = self.f;
        let delta = to - from;
        if delta.norm() == 0.0 {
            return Ok(w);
        }
        let mut tau = 0.0f64;
        let mut step = 0.05f64;
        let mut zc = from;
        while tau < 1.0 {
            let h = step.min(1.0 - tau);
            let dz = delta * h;
            let vel: Vec<Complex64> = w.iter().map(|wk| *wk / (3.0 * r * *wk - 2.0 * zc)).collect();
            // each root may move at most a tenth of the distance to its nearest neighbour
            let too_far = (0..3).any(|k| {
                let near = (0..3).filter(|&j| j != k).map(|j| (w[k] - w[j]).norm()).fold(f64::INFINITY, f64::min);
                vel[k].norm() * dz.norm() * 10.0 >= near
            });
            if too_far {
                step *= 0.5;
                if step < 1e-13 {
                    return Err(Error::BranchTrackingFailure(format!("near z = {zc}")));
                }
                continue;
            }
            let znew = zc + dz;
            let pred: [Complex64; 3] = [w[0] + vel[0] * dz, w[1] + vel[1] * dz, w[2] + vel[2] * dz];
            let corr = [newton_w64(r, a, znew, pred[0]), newton_w64(r, a, znew, pred[1]), newton_w64(r, a, znew, pred[2])];
            let mut ok = true;
            for i in 0..3 {
                for j in 0..3 {
                    if i != j && (corr[i] - pred[i]).norm() >= (corr[i] - pred[j]).norm() {
                        ok = false;
                    }
                }
            }
            if !ok || c64_sep(&corr) == 0.0 {
                step *= 0.5;
                if step < 1e-13 {
                    return Err(Error::BranchTrackingFailure(format!("near z = {zc}")));
                }
                continue;
            }
            w = corr;
            zc = znew;
            tau += h;
            step = (step * 1.5).min(0.25);
        }
        Ok(w)
    }

    /// Hardware preimages at `zc`, labeled at infinity and continued inward
    /// along the ray. A ray that grazes a branch point is bent around it on
    /// the side it already passes, which keeps the homotopy class.
    fn track(&self, zc: Complex64, sector: Sector) -> Result<[Complex64; 3]> {
        if zc.norm() >= self.r_far {
            return self.far_preimages(zc, sector);
        }
        let zf = zc / zc.norm() * self.r_far;
        let mut w = self.far_preimages(zf, sector)?;
        let clearance = 0.05 * self.f.x_star;
        let seg = zc - zf;
        let mut from = zf;
        for j in 0..3 {
            let b = Complex64::from_polar(self.f.x_star, 2.0 * std::f64::consts::PI * j as f64 / 3.0);
            let t = ((b - zf) * seg.conj()).re / seg.norm_sqr();
            if t <= 0.0 || t >= 1.0 {
                continue;
            }
            let near = zf + seg * t;
            let off = near - b;
            if off.norm() >= clearance || (zc - b).norm() < clearance {
                continue;
            }
            if off.norm() == 0.0 {
                return Err(Error::BranchTrackingFailure(format!("ray to {zc} meets a branch point")));
            }
            let waypoint = b + off / off.norm() * clearance;
            w = self.continue_preimages(w, from, waypoint)?;
            from = waypoint;
        }
        self.continue_preimages(w, from, zc)
    }

    /// Polish hardware preimages at `z` to the working precision.
    fn polish_preimages(&self, z: &Complex, w0: [Complex64; 3]) -> Result<[Complex; 3]> {
        let bits = self.ctx.bits();
        let r = &self.k.r;
        let a = &self.k.a;
        let eps = self.ctx.eps();
        let mut out: Vec<Complex> = Vec::with_capacity(3);
        for wk in w0.iter() {
            let mut w = Complex::from_c64(*wk, bits);
            for _ in 0..60 {
                let w2 = w.square();
                let f = &(&(&w2 * &w).scale(r) - &(z * &w2)) + &Complex::from_real(a.clone());
                let fp = &w2.scale(&(r * 3.0)) - &(z * &w).scale_f64(2.0);
                let step = &f / &fp;
                w -= &step;
                if step.abs().to_f64() <= 4.0 * eps * (1.0 + w.abs().to_f64()) {
                    break;
                }
            }
            if !w.is_finite() {
                return Err(Error::EvaluationFailure("uniformizer preimage".into()));
            }
            out.push(w);
        }
        let res: [Complex; 3] = [out[0].clone(), out[1].clone(), out[2].clone()];
        let sep = (&res[0] - &res[1]).abs().min((&res[0] - &res[2]).abs()).min((&res[1] - &res[2]).abs());
        if sep.to_f64() <= 1e-3 * c64_sep(&w0) {
            return Err(Error::BranchTrackingFailure("preimages merged while polishing".into()));
        }
        Ok(res)
    }

    fn xi_from_w(&self, w: &Complex) -> Complex {
        &w.square().scale(&self.k.a) + &w.recip().scale(&self.k.r)
    }

    /// Labeled sheet preimages at an off-cut point `z`.
    fn preimages_off_cut(&self, z: &Complex) -> Result<([Complex; 3], Sector, LabelRule)> {
        self.check_branch_point(z)?;
        let sector = self.sector_of(z);
        let zc = z.to_c64();
        let rule = if zc.norm() >= self.r_far { LabelRule::FarField } else { LabelRule::RayContinuation };
        let wf = self.track(zc, sector)?;
        Ok((self.polish_preimages(z, wf)?, sector, rule))
    }

    /// Labeled branches `xi1, xi2, xi3` at `z`. On a cut the `+`-side limit is
    /// returned (left side for the outward orientation of each ray).
    pub fn xi_branches(&self, z: &Complex) -> Result<BranchTriple> {
        self.xi_branches_on(z, Side::Plus)
    }

    /// Like [`xi_branches`](Self::xi_branches) but with the one-sided limit
    /// taken from `side` when `z` lies on a cut. `Side::Off` acts as `Plus`.
    pub fn xi_branches_on(&self, z: &Complex, side: Side) -> Result<BranchTriple> {
        let z = z.with_bits(self.ctx.bits());
        let minus = side == Side::Minus;
        match self.locate(&z) {
            CutLocation::Origin => Err(Error::OnCut),
            CutLocation::Off => {
                let (w, sector, rule) = self.preimages_off_cut(&z)?;
                let xi = [self.xi_from_w(&w[0]), self.xi_from_w(&w[1]), self.xi_from_w(&w[2])];
                Ok(BranchTriple { xi, sector, rule, side: Side::Off, w })
            }
            CutLocation::FirstSupport(j) => {
                let mut b = self.on_first_support(&z, j)?;
                if minus {
                    // xi1,- = xi2,+ and xi2,- = xi1,+
                    b.xi.swap(0, 1);
                    b.w.swap(0, 1);
                    b.side = Side::Minus;
                }
                Ok(b)
            }
            CutLocation::SecondSupport(_) => {
                self.check_branch_point(&z)?;
                // step to the requested side, label there, then polish back onto the ray
                let zc = z.to_c64();
                let dir = zc / zc.norm();
                let delta = (1e-6 * self.f.x_star.max(1.0)).min(0.05 * zc.norm());
                let normal = if minus { Complex64::new(0.0, -1.0) } else { Complex64::new(0.0, 1.0) };
                let zs = zc + normal * dir * delta;
                let side = Complex::from_c64(zs, self.ctx.bits());
                let sector = self.sector_of(&side);
                let wf = self.track(zs, sector)?;
                let w = self.polish_preimages(&z, wf)?;
                let xi = [self.xi_from_w(&w[0]), self.xi_from_w(&w[1]), self.xi_from_w(&w[2])];
                Ok(BranchTriple { xi, sector, rule: LabelRule::OneSided, side: if minus { Side::Minus } else { Side::Plus }, w })
            }
        }
    }

    /// Branches on `[0, omega^j x_star)`: rotate to the positive axis, where the
    /// cubic has real coefficients; the real root is `xi3` and `xi1,+` is the
    /// member of the conjugate pair with negative imaginary part.
    fn on_first_support(&self, z: &Complex, j: usize) -> Result<BranchTriple> {
        self.check_branch_point(z)?;
        let ctx = self.ctx;
        // x = omega^{-j} z is real positive; xi(omega^j x) = omega^{2j} xi(x)
        let x = Complex::from_real((z * &ctx.omega_pow(-(j as i64))).re);
        let roots = solve_polynomial(&self.cubic_coeffs(&x), &ctx)?;
        let mut idx: Vec<usize> = (0..3).collect();
        idx.sort_by(|&p, &q| roots[p].im.abs().partial_cmp(&roots[q].im.abs()).unwrap());
        let real_root = &roots[idx[0]];
        let (p, q) = (&roots[idx[1]], &roots[idx[2]]);
        let scale = p.abs().to_f64().max(1.0);
        if real_root.im.abs().to_f64() > 1e3 * ctx.eps().sqrt() * scale || p.im.abs().to_f64() == 0.0 {
            return Err(Error::BranchTrackingFailure("conjugate-pair rule does not apply".into()));
        }
        let (plus, minus) = if p.im.is_negative() { (p, q) } else { (q, p) };
        let rot = ctx.omega_pow(2 * j as i64);
        let xi3 = Complex::from_real(real_root.re.clone());
        let xi = [plus * &rot, minus * &rot, &xi3 * &rot];
        let w = [self.w_of_xi(z, &xi[0]), self.w_of_xi(z, &xi[1]), self.w_of_xi(z, &xi[2])];
        let sector = match j {
            0 => Sector::S0,
            1 => Sector::S1,
            _ => Sector::S2,
        };
        Ok(BranchTriple { xi, sector, rule: LabelRule::ConjugatePair, side: Side::Plus, w })
    }

    /// Uniformizer preimage from a branch value. Eliminating `w^3` between
    /// `z w^2 = r w^3 + a` and `xi w = a w^3 + r` leaves the quadratic
    /// `a z w^2 - r xi w + r^2 - a^2 = 0`; the root that solves the cubic is kept.
    fn w_of_xi(&self, z: &Complex, xi: &Complex) -> Complex {
        let r = &self.k.r;
        let a = &self.k.a;
        let qa = z.scale(a);
        let qb = -xi.scale(r);
        let qc = Complex::from_real(r.square() - a.square());
        let disc = (&qb.square() - &(&qa * &qc).scale_f64(4.0)).sqrt();
        let two_a = qa.scale_f64(2.0);
        let cands = [&(&(-&qb) + &disc) / &two_a, &(&(-&qb) - &disc) / &two_a];
        let resid = |w: &Complex| {
            let w2 = w.square();
            (&(&(&w2 * w).scale(r) - &(z * &w2)) + &Complex::from_real(a.clone())).abs()
        };
        if resid(&cands[0]) <= resid(&cands[1]) {
            cands[0].clone()
        } else {
            cands[1].clone()
        }
    }

    /// `F1 = (xi1 - t3 z^2) / t0`, the Cauchy transform of the first measure.
    pub fn cauchy_f1(&self, z: &Complex) -> Result<Complex> {
        if let CutLocation::FirstSupport(_) | CutLocation::Origin = self.locate(z) {
            return Err(Error::OnSupport);
        }
        let b = self.xi_branches(z)?;
        Ok(self.f1_from(z, &b))
    }

    pub fn f1_from(&self, z: &Complex, b: &BranchTriple) -> Complex {
        (&b.xi[0] - &z.square().scale(&self.params.t3)) / self.params.t0.clone()
    }

    /// `F2` from the third branch with the sector sign.
    pub fn cauchy_f2(&self, z: &Complex) -> Result<Complex> {
        if let CutLocation::SecondSupport(_) | CutLocation::Origin = self.locate(z) {
            return Err(Error::OnSupport);
        }
        let b = self.xi_branches(z)?;
        Ok(self.f2_from(z, &b))
    }

    /// `F2` on the side recorded in `b` (principal square root of `z`, taken on
    /// the side of `b.sector` when `z` sits on a ray of the second support).
    pub fn f2_from(&self, z: &Complex, b: &BranchTriple) -> Complex {
        let root = self.sqrt_on_sector(z, b.sector);
        let (_, s3) = sheet_signs(b.sector);
        // xi3 = s3 z^{1/2}/sqrt(t3) - t0 F2
        let lead = (root / self.sqrt_t3.clone()).scale_f64(s3 as f64);
        (&lead - &b.xi[2]) / self.params.t0.clone()
    }

    /// Principal `z^{1/2}`, with the limit from inside `sector` on the negative axis.
    pub fn sqrt_on_sector(&self, z: &Complex, sector: Sector) -> Complex {
        let s = z.sqrt();
        if z.im.is_zero() && z.re.is_negative() && sector == Sector::S2 {
            return s.conj();
        }
        s
    }

    /// Dispatch on `k`.
    pub fn cauchy_transform(&self, k: usize, z: &Complex) -> Result<Complex> {
        match k {
            1 => self.cauchy_f1(z),
            2 => self.cauchy_f2(z),
            _ => Err(Error::InvalidParameters(format!("no Cauchy transform with index {k}"))),
        }
    }

    /// Preimage under `h` of an exterior point: the unique root with `|w| > 1`.
    pub fn exterior_preimage(&self, z: &Complex) -> Result<Complex> {
        let bits = self.ctx.bits();
        let c = [
            Complex::from_real(self.k.a.clone()),
            z.zero_like(),
            -z.with_bits(bits),
            Complex::from_real(self.k.r.clone()),
        ];
        let roots = solve_polynomial(&c, &self.ctx)?;
        let outside: Vec<&Complex> = roots.iter().filter(|w| w.abs() > 1.0).collect();
        let margin: f64 = 1e-9;
        if outside.len() != 1 || roots.iter().any(|w| (w.abs().to_f64() - 1.0).abs() < margin) {
            return Err(Error::SheetAmbiguity);
        }
        Ok(outside[0].clone())
    }

    /// `z = h(w) = r w + a w^-2`.
    pub fn h(&self, w: &Complex) -> Complex {
        &w.scale(&self.k.r) + &w.square().recip().scale(&self.k.a)
    }

    /// `h'(w) = r - 2 a w^-3`.
    pub fn h_prime(&self, w: &Complex) -> Complex {
        let t = w.powi(3).recip().scale(&(&self.k.a * 2.0));
        Complex::from_real(self.k.r.clone()) - t
    }
}

fn newton_w64(r: f64, a: f64, z: Complex64, mut w: Complex64) -> Complex64 {
    for _ in 0..30 {
        let f = r * w * w * w - z * w * w + a;
        let fp = 3.0 * r * w * w - 2.0 * z * w;
        let step = f / fp;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        w -= step;
        if step.norm() <= 1e-15 * (1.0 + w.norm()) {
            break;
        }
    }
    w
}

/// Free-function form of [`SpectralCurve::xi_branches`].
pub fn xi_branches(z: &Complex, params: &ModelParams) -> Result<BranchTriple> {
    SpectralCurve::new(params)?.xi_branches(z)
}

/// Free-function form of [`SpectralCurve::cauchy_transform`].
pub fn cauchy_transform(k: usize, z: &Complex, params: &ModelParams) -> Result<Complex> {
    SpectralCurve::new(params)?.cauchy_transform(k, z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(256).unwrap()
    }

    fn curve(t0: f64, t3: f64) -> SpectralCurve {
        SpectralCurve::new(&ModelParams::new(t0, t3, ctx()).unwrap()).unwrap()
    }

    fn close(a: &Complex, b: &Complex, tol: f64) -> bool {
        (a - b).abs().to_f64() <= tol
    }

    #[test]
    fn critical_values() {
        let c = ctx();
        assert_eq!(critical_t0(&c.ratio(1, 4)).to_f64(), 2.0);
        assert_eq!(critical_t0(&c.ratio(1, 2)).to_f64(), 0.5);
        let l = c.real(1.7);
        let t3 = c.real(0.3);
        let lhs = critical_t0(&(&t3 * &l));
        let rhs = critical_t0(&t3) / l.square();
        assert!(((lhs - rhs) / critical_t0(&t3)).abs().to_f64() < 1e-70);
    }

    #[test]
    fn regime_detection() {
        let c = ctx();
        assert_eq!(ModelParams::new(0.5, 0.25, c).unwrap().regime, Regime::Subcritical);
        assert_eq!(ModelParams::new(2.0, 0.25, c).unwrap().regime, Regime::Critical);
        let p = ModelParams::new(2.5, 0.25, c).unwrap();
        assert_eq!(p.regime, Regime::Supercritical);
        assert!(matches!(curve_constants(&p), Err(Error::SupercriticalRegime { .. })));
        assert!(matches!(ModelParams::new(-1.0, 0.25, c), Err(Error::InvalidParameters(_))));
    }

    #[test]
    fn subcritical_constants() {
        // independent 40-digit evaluation of the closed forms
        let k = curve_constants(&ModelParams::from_decimal("0.5", "0.25", ctx()).unwrap()).unwrap();
        let c = ctx();
        let want = [
            (&k.x_star, "0.7854819794998396573210247671679395227729"),
            (&k.x_hat, "3.866025403784438646763723170752936183471"),
            (&k.a_const, "1.935336894323342029854415243870595724793"),
        ];
        for (got, s) in want {
            assert!((got - c.parse(s).unwrap()).abs().to_f64() < 1e-38, "{got:?} vs {s}");
        }
        assert!(k.x_star < k.x_hat);
    }

    #[test]
    fn critical_constants() {
        let k = curve_constants(&ModelParams::from_decimal("2", "0.25", ctx()).unwrap()).unwrap();
        assert!((&k.x_star - 3.0).abs().to_f64() < 1e-70);
        assert!((&k.x_hat - 3.0).abs().to_f64() < 1e-70);
        assert!((&k.a_const - 6.75).abs().to_f64() < 1e-70);
        assert!((&k.r - 2.0).abs().to_f64() < 1e-70);
        assert!((&k.a - 1.0).abs().to_f64() < 1e-70);
    }

    #[test]
    fn x_star_shrinks_with_t0() {
        let mut last = f64::INFINITY;
        for e in 1..12 {
            let t0 = 2f64.powi(-2 * e);
            let k = curve_constants(&ModelParams::new(t0, 0.25, ctx()).unwrap()).unwrap();
            let x = k.x_star.to_f64();
            assert!(x > 0.0 && x < last);
            last = x;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn discriminant_root_pattern() {
        let d = discriminant_zeta(&ModelParams::new(0.5, 0.25, ctx()).unwrap()).unwrap();
        assert!(d.pattern_residual < 1e-20);
        assert!(d.coeffs[0].is_negative());
        let d = discriminant_zeta(&ModelParams::from_decimal("2", "0.25", ctx()).unwrap()).unwrap();
        for r in &d.roots {
            assert!((&r.re - 27.0).abs().to_f64() < 1e-15 && r.im.abs().to_f64() < 1e-15);
        }
    }

    #[test]
    fn discriminant_matches_generic_formula() {
        // disc of x^3 + b x^2 + c x + d = 18bcd - 4b^3 d + b^2 c^2 - 4c^3 - 27d^2
        let p = ModelParams::new(0.2, 0.7, ctx()).unwrap();
        let cv = SpectralCurve::new(&p).unwrap();
        let d = discriminant_zeta(&p).unwrap();
        for (re, im) in [(0.4, 0.1), (-1.3, 2.0), (2.5, -0.7)] {
            let z = ctx().complex(re, im);
            let [d0, c1, b2, _] = cv.cubic_coeffs(&z);
            let generic = &(&(&(&b2 * &c1) * &d0).scale_f64(18.0) - &(&b2.powi(3) * &d0).scale_f64(4.0))
                + &(&(&b2.square() * &c1.square()) - &c1.powi(3).scale_f64(4.0));
            let generic = &generic - &d0.square().scale_f64(27.0);
            let zeta = z.powi(3);
            let mut poly = Complex::from_real(d.coeffs[3].clone());
            for k in (0..3).rev() {
                poly = &(&poly * &zeta) + &Complex::from_real(d.coeffs[k].clone());
            }
            assert!(close(&poly, &generic, 1e-60 * (1.0 + generic.abs().to_f64())));
        }
    }

    #[test]
    fn node_is_double_branch() {
        let cv = curve(0.5, 0.25);
        let xh = Complex::from_real(cv.k.x_hat.clone());
        let b = cv.xi_branches(&xh).unwrap();
        assert!(close(&b.xi[0], &xh, 1e-60));
        assert!(close(&b.xi[1], &xh, 1e-60));
        // rotated nodes: xi_{1,2}(omega^j x_hat) = omega^{2j} x_hat
        for j in 1..3 {
            let z = &xh * &ctx().omega_pow(j);
            let b = cv.xi_branches(&z).unwrap();
            let want = &xh * &ctx().omega_pow(2 * j);
            assert!(close(&b.xi[0], &want, 1e-60) && close(&b.xi[1], &want, 1e-60));
        }
    }

    #[test]
    fn symmetric_functions_and_residual() {
        let cv = curve(0.5, 0.25);
        let c = ctx();
        for (re, im) in [(1.0, 0.5), (-1.0, 0.3), (0.2, -2.0), (5.0, 5.0), (-30.0, -4.0), (0.1, 0.05)] {
            let z = c.complex(re, im);
            let b = cv.xi_branches(&z).unwrap();
            let sum = &(&b.xi[0] + &b.xi[1]) + &b.xi[2];
            let e2 = &(&(&b.xi[0] * &b.xi[1]) + &(&b.xi[0] * &b.xi[2])) + &(&b.xi[1] * &b.xi[2]);
            let prod = &(&b.xi[0] * &b.xi[1]) * &b.xi[2];
            let scale = 1e-60 * z.abs().to_f64().max(1.0).powi(6);
            assert!(close(&sum, &z.square().scale_f64(0.25), scale));
            assert!(close(&e2, &z.scale_f64(-(0.5 * 0.25 + 4.0)), scale));
            let want = -&(&z.powi(3) + &Complex::from_real(cv.k.a_const.clone()));
            assert!(close(&prod, &want, scale));
            for xi in &b.xi {
                assert!(cv.cubic_residual(&z, xi).abs().to_f64() < 1e3 * c.eps() * z.abs().to_f64().max(1.0).powi(6));
            }
        }
    }

    #[test]
    fn rotation_covariance() {
        let cv = curve(0.5, 0.25);
        let c = ctx();
        let w = c.omega();
        let w2 = c.omega_pow(2);
        for (re, im) in [(1.2, 0.4), (0.3, -0.2), (8.0, 1.0)] {
            let z = c.complex(re, im);
            let b = cv.xi_branches(&z).unwrap();
            let br = cv.xi_branches(&(&z * &w)).unwrap();
            assert!(close(&br.xi[0], &(&b.xi[0] * &w2), 1e-60));
            let fr = cv.cauchy_f1(&(&z * &w)).unwrap();
            let f = cv.cauchy_f1(&z).unwrap();
            assert!(close(&fr, &(&f * &w2), 1e-60));
        }
    }

    #[test]
    fn sheet_sign_cells() {
        // far from the origin xi2, xi3 ~ +-z^{1/2}/sqrt(t3); pin each cell
        let cv = curve(0.5, 0.25);
        let c = ctx();
        let cells = [(0.1, Sector::S0, 1, -1), (2.0, Sector::S1, -1, 1), (-2.0, Sector::S2, -1, 1)];
        for (th, sector, s2, s3) in cells {
            let z = Complex::from_polar(&c.real(60.0), &c.real(th));
            let b = cv.xi_branches(&z).unwrap();
            assert_eq!(b.sector, sector);
            assert_eq!(sheet_signs(sector), (s2, s3));
            let lead = z.sqrt().scale_f64(2.0);
            for (xi, s) in [(&b.xi[1], s2), (&b.xi[2], s3)] {
                let dev = (xi - &lead.scale_f64(s as f64)).abs().to_f64();
                let other = (xi + &lead.scale_f64(s as f64)).abs().to_f64();
                assert!(dev < 1.0 && other > 20.0, "{sector:?} {dev} {other}");
            }
        }
    }

    #[test]
    fn conjugate_pair_rule_matches_upper_side() {
        let cv = curve(0.5, 0.25);
        let c = ctx();
        for x in [0.1, 0.4, 0.7] {
            let on = cv.xi_branches(&c.complex(x, 0.0)).unwrap();
            assert_eq!(on.rule, LabelRule::ConjugatePair);
            assert!(on.xi[0].im.is_negative());
            let up = cv.xi_branches(&c.complex(x, 1e-12)).unwrap();
            for k in 0..3 {
                assert!(close(&on.xi[k], &up.xi[k], 1e-9));
            }
            // the uniformizer preimages agree as well
            for k in 0..3 {
                assert!(close(&on.w[k], &up.w[k], 1e-9));
            }
        }
    }

    #[test]
    fn second_support_plus_side() {
        let cv = curve(0.5, 0.25);
        let c = ctx();
        // the + side is the left of the outward orientation
        for (p, q, m) in [(1, 1, 2.0), (-1, 3, 0.6), (1, 3, 5.0)] {
            let dir = c.unit(p, q);
            let z = dir.scale_f64(m);
            let on = cv.xi_branches(&z).unwrap();
            assert_eq!(on.rule, LabelRule::OneSided);
            let side = cv.xi_branches(&(&z + &dir.mul_i().scale_f64(1e-12))).unwrap();
            for k in 0..3 {
                assert!(close(&on.xi[k], &side.xi[k], 1e-9));
            }
        }
    }

    #[test]
    fn loop_labels_are_continuous() {
        let cv = curve(0.5, 0.25);
        let c = ctx();
        let n = 64;
        let mut prev: Option<BranchTriple> = None;
        for k in 0..=n {
            let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let z = c.complex(2.0 + 0.8 * th.cos(), 0.8 * th.sin());
            let b = cv.xi_branches(&z).unwrap();
            if let Some(p) = &prev {
                for j in 0..3 {
                    assert!((&b.xi[j] - &p.xi[j]).abs().to_f64() < 0.5);
                }
            }
            prev = Some(b);
        }
    }

    #[test]
    fn uniformizer_gives_first_sheet() {
        let cv = curve(0.5, 0.25);
        let c = ctx();
        for (re, im) in [(1.3, 0.2), (-0.4, 1.7), (2.0, -2.0)] {
            let w = c.complex(re, im);
            let z = cv.h(&w);
            let b = cv.xi_branches(&z).unwrap();
            assert!(close(&b.xi[0], &cv.h(&w.recip()), 1e-60));
            assert!(close(&cv.exterior_preimage(&z).unwrap(), &w, 1e-60));
        }
    }

    #[test]
    fn cauchy_transform_asymptotics() {
        let cv = curve(0.5, 0.25);
        let c = ctx();
        let th = std::f64::consts::PI / 7.0;
        let mut last1 = f64::INFINITY;
        for r in [1e2, 1e3, 1e4] {
            let z = Complex::from_polar(&c.real(r), &c.real(th));
            let e1 = (&cv.cauchy_f1(&z).unwrap() * &z - 1.0).abs().to_f64();
            let e2 = (&cv.cauchy_f2(&z).unwrap() * &z - 0.5).abs().to_f64();
            assert!(e1 < 10.0 / r.powi(3) && e1 < last1);
            assert!(e2 < 10.0 / r.powf(1.5));
            last1 = e1;
        }
    }

    #[test]
    fn support_and_branch_point_errors() {
        let cv = curve(0.5, 0.25);
        let c = ctx();
        assert_eq!(cv.cauchy_f1(&c.complex(0.3, 0.0)), Err(Error::OnSupport));
        assert_eq!(cv.cauchy_f2(&c.complex(-1.0, 0.0)), Err(Error::OnSupport));
        assert!(matches!(cv.cauchy_transform(3, &c.complex(1.0, 1.0)), Err(Error::InvalidParameters(_))));
        assert!(matches!(cv.xi_branches(&c.zero()), Err(Error::OnCut)));
        let bp = Complex::from_real(cv.k.x_star.clone());
        assert!(matches!(cv.xi_branches(&bp), Err(Error::BranchTrackingFailure(_))));
    }
}

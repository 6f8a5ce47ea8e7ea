//! The two equilibrium measures: densities, masses, log potentials
//! (g-functions), the phase functions `phi1`, `phi2`, the Euler-Lagrange
//! constant and the discrete energy.
//!
//! Both measures are invariant under `z -> omega z`, so everything is computed
//! on one ray: `x in [0, x_star]` for the first measure, arclength `t` on a ray
//! of the second. Sums over the three rays collapse to `log(1 - x^3/z^3)` and
//! `log(z^3 + t^3)`.

use std::borrow::Cow;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::curve::{sheet_signs, BranchTriple, CutLocation, ModelParams, Regime, Sector, Side, SpectralCurve};
use crate::error::{Error, Result};
use crate::numerics::{aberth64, gauss_legendre, graded_intervals, panel_nodes, Complex, Estimate, PrecisionContext, Real};

/// Which analytic function a [`GValue`] holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldFunction {
    G1,
    G2,
    Phi1,
    Phi2,
}

/// Value of a g- or phi-function, with the side used on a cut.
#[derive(Clone, Debug)]
pub struct GValue {
    pub which: FieldFunction,
    pub z: Complex,
    pub value: Complex,
    pub side: Side,
    /// Quadrature error estimate (zero where no estimate is formed).
    pub error: f64,
}

/// Density with respect to arclength at distance `s` from the origin on ray `ray`.
#[derive(Clone, Debug)]
pub struct DensitySample {
    pub s: Real,
    pub ray: usize,
    pub value: Real,
    pub error: f64,
}

/// Quadrature knobs shared by all integrals against the measures.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadSettings {
    /// Gauss-Legendre points per panel.
    pub order: usize,
    /// Halving levels of the mesh graded toward a log singularity.
    pub levels: usize,
    /// The second-measure mesh is finite on `[0, r_tail_factor * x_star]`.
    pub r_tail_factor: f64,
    /// Halving levels of the tail map toward infinity.
    pub tail_levels: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        QuadSettings { order: 20, levels: 40, r_tail_factor: 50.0, tail_levels: 16 }
    }
}

/// Nodes with the density folded into the weights.
type Weighted = Vec<(Real, Real)>;

/// Result of [`EquilibriumMeasures::el_constant`].
#[derive(Clone, Debug)]
pub struct ElConstant {
    pub ell: Real,
    /// Deviation of the left-hand side from `ell` at each sample point.
    pub profile: Vec<(Real, f64)>,
    pub spread: f64,
    /// `lim g2(z)` as `z -> 0` in `S0`, Richardson-extrapolated.
    pub gamma2: Real,
    /// The same limit as `3 * int log t d mu2(t)` on one ray.
    pub gamma2_direct: Real,
}

/// Sampled densities with masses and the Euler-Lagrange constant.
#[derive(Clone, Debug)]
pub struct MeasurePair {
    pub mu1: Vec<DensitySample>,
    pub mu2: Vec<DensitySample>,
    pub r_tail: Real,
    /// Log-log slope of the second density on `[r_tail/2, r_tail]`.
    pub tail_exponent: f64,
    pub mass1: Estimate<Real>,
    pub mass2: Estimate<Real>,
    /// Only available in the subcritical regime.
    pub ell: Option<Real>,
}

/// The equilibrium pair for fixed `(t0, t3)`; meshes are built lazily and reused.
pub struct EquilibriumMeasures {
    curve: SpectralCurve,
    ctx: PrecisionContext,
    settings: QuadSettings,
    x_star: Real,
    r_tail: Real,
    sqrt_t3: Real,
    mu1_mesh: OnceLock<Weighted>,
    mu2_mesh: OnceLock<Weighted>,
}

fn levels_for(len: f64, dist: f64, default: usize) -> usize {
    if dist <= 0.0 {
        return default;
    }
    let l = (len / dist).log2().ceil() + 2.0;
    if l.is_finite() {
        (l.max(1.0) as usize).min(default + 30)
    } else {
        default
    }
}

/// Caps grading so the smallest panel next to `at` stays resolvable at precision `eps`.
fn cap_levels(levels: usize, len: f64, at: f64, eps: f64) -> usize {
    // the first Gauss node of an order-20 panel sits at about 1e-3 of its width
    let floor = 1e4 * eps * at.abs().max(len);
    if len <= floor {
        return 1;
    }
    levels.min((len / floor).log2().floor().max(1.0) as usize)
}

fn push_panels(out: &mut Vec<(Real, Real)>, intervals: &[(Real, Real)], order: usize) {
    for (a, b) in intervals {
        out.extend(panel_nodes(a, b, order, 1));
    }
}

/// Nodes on `[a, b]` via `x = b - (b - a) u^2`, which removes a square-root endpoint at `b`.
fn push_sqrt_end(out: &mut Vec<(Real, Real)>, a: &Real, b: &Real, order: usize, panels: usize) {
    let len = b - a;
    for (u, w) in panel_nodes(&a.zero_like(), &a.one_like(), order, panels) {
        let x = b - &len * u.square();
        let wt = w * &len * &u * 2.0;
        out.push((x, wt));
    }
}

impl EquilibriumMeasures {
    pub fn new(params: &ModelParams) -> Result<EquilibriumMeasures> {
        Self::with_settings(params, QuadSettings::default())
    }

    pub fn with_settings(params: &ModelParams, settings: QuadSettings) -> Result<EquilibriumMeasures> {
        params.require_not_supercritical()?;
        if settings.order < 2 || settings.levels < 1 || !(settings.r_tail_factor > 1.0) {
            return Err(Error::InvalidParameters("quadrature settings out of range".into()));
        }
        let curve = SpectralCurve::new(params)?;
        let x_star = curve.k.x_star.clone();
        if !(x_star > 0.0) {
            return Err(Error::InvalidParameters("degenerate support".into()));
        }
        let r_tail = &x_star * settings.r_tail_factor;
        Ok(EquilibriumMeasures {
            ctx: params.ctx(),
            sqrt_t3: params.t3.sqrt(),
            curve,
            settings,
            x_star,
            r_tail,
            mu1_mesh: OnceLock::new(),
            mu2_mesh: OnceLock::new(),
        })
    }

    pub fn curve(&self) -> &SpectralCurve {
        &self.curve
    }

    pub fn params(&self) -> &ModelParams {
        &self.curve.params
    }

    pub fn settings(&self) -> QuadSettings {
        self.settings
    }

    pub fn x_star(&self) -> &Real {
        &self.x_star
    }

    pub fn r_tail(&self) -> &Real {
        &self.r_tail
    }

    fn bits(&self) -> usize {
        self.ctx.bits()
    }

    // ---- first measure -------------------------------------------------

    /// Density of the first measure on one ray, `|Im xi1,+(x)| / (pi t0)`.
    pub fn density_mu1(&self, x: &Real) -> Result<Real> {
        Ok(self.density_mu1_sample(x)?.value)
    }

    pub fn density_mu1_sample(&self, x: &Real) -> Result<DensitySample> {
        let x = x.with_bits(self.bits());
        if !(x > 0.0) || x >= self.x_star {
            return Err(Error::OutOfSupport);
        }
        let (value, error) = self.rho1(&x);
        Ok(DensitySample { s: x, ray: 0, value, error })
    }

    /// On the support the real root `xi3` is well separated from the conjugate
    /// pair; the pair then follows from Vieta's formulas, which keeps its
    /// imaginary part accurate right up to the branch point.
    fn rho1(&self, x: &Real) -> (Real, f64) {
        let t0 = &self.curve.params.t0;
        let t3 = &self.curve.params.t3;
        let b2 = -(t3 * x.square());
        let b1 = -((t0 * t3 + 1.0 / t3) * x);
        let b0 = x.powi(3) + &self.curve.k.a_const;
        let xi3 = self.real_root(&b2, &b1, &b0);
        let m = (-&b2 - &xi3) * 0.5;
        let p = -(&b0 / &xi3);
        let d = &p - m.square();
        let pit0 = self.ctx.pi() * t0;
        let eps = self.ctx.eps();
        let scale = p.abs().to_f64() + m.square().to_f64();
        let df = d.to_f64().max(0.0);
        let err = 16.0 * eps * scale / (2.0 * df.sqrt() + (eps * scale).sqrt()) / pit0.to_f64();
        if !(d > 0.0) {
            return (d.zero_like(), err);
        }
        (d.sqrt() / pit0, err)
    }

    fn real_root(&self, b2: &Real, b1: &Real, b0: &Real) -> Real {
        let c = [
            Complex64::new(b0.to_f64(), 0.0),
            Complex64::new(b1.to_f64(), 0.0),
            Complex64::new(b2.to_f64(), 0.0),
            Complex64::new(1.0, 0.0),
        ];
        let start = aberth64(&c)
            .and_then(|r| r.into_iter().min_by(|u, v| u.im.abs().partial_cmp(&v.im.abs()).unwrap()))
            .map(|r| r.re)
            .unwrap_or(-b0.to_f64().cbrt());
        let eps = self.ctx.eps();
        let mut r = self.ctx.real(start);
        for _ in 0..60 {
            let f = ((&r + b2) * &r + b1) * &r + b0;
            let fp = (&r * 3.0 + b2 * 2.0) * &r + b1;
            if fp.is_zero() {
                break;
            }
            let step = &f / &fp;
            r -= &step;
            if step.abs().to_f64() <= 2.0 * eps * (1.0 + r.abs().to_f64()) {
                break;
            }
        }
        r
    }

    /// `[0, x_star]` with a square-root map at `x_star`, density folded in.
    fn mu1_regular(&self) -> &Weighted {
        self.mu1_mesh.get_or_init(|| self.mu1_weighted(self.mu1_raw_regular(self.settings.order, 4)))
    }

    fn mu1_raw_regular(&self, order: usize, panels: usize) -> Vec<(Real, Real)> {
        let mut raw = Vec::new();
        push_sqrt_end(&mut raw, &self.x_star.zero_like(), &self.x_star, order, panels);
        raw
    }

    fn mu1_weighted(&self, raw: Vec<(Real, Real)>) -> Weighted {
        raw.into_iter()
            .map(|(x, w)| {
                let rho = self.rho1(&x).0;
                (x, w * rho)
            })
            .collect()
    }

    /// Mesh graded toward `xs in [0, x_star]`; `dist` is the distance of the
    /// singularity from the segment (0 for a point on it).
    fn mu1_split(&self, xs: &Real, dist: f64) -> Weighted {
        let order = self.settings.order;
        let lv = self.settings.levels;
        let xsf = xs.to_f64();
        let xstar = self.x_star.to_f64();
        let eps = self.ctx.eps();
        let zero = self.x_star.zero_like();
        let mut raw = Vec::new();
        if xsf >= xstar * (1.0 - 1e-12) {
            let l = cap_levels(levels_for(xstar, dist, lv), xstar, xstar, eps);
            push_panels(&mut raw, &graded_intervals(&zero, &self.x_star, false, l), order);
        } else if xsf <= 0.0 {
            let m = &self.x_star * 0.5;
            let l = cap_levels(levels_for(xstar * 0.5, dist, lv), xstar * 0.5, 0.0, eps);
            push_panels(&mut raw, &graded_intervals(&zero, &m, true, l), order);
            push_sqrt_end(&mut raw, &m, &self.x_star, order, 2);
        } else {
            let m = (xs + &self.x_star) * 0.5;
            let ll = cap_levels(levels_for(xsf, dist, lv), xsf, xsf, eps);
            let lr = cap_levels(levels_for(m.to_f64() - xsf, dist, lv), m.to_f64() - xsf, xsf, eps);
            push_panels(&mut raw, &graded_intervals(&zero, xs, false, ll), order);
            push_panels(&mut raw, &graded_intervals(xs, &m, true, lr), order);
            push_sqrt_end(&mut raw, &m, &self.x_star, order, 2);
        }
        self.mu1_weighted(raw)
    }

    /// Nodes for integrating a kernel with singularities at `z, omega z, omega^2 z`.
    fn mu1_nodes_for(&self, z: &Complex) -> Cow<'_, [(Real, Real)]> {
        let th = z.arg().to_f64();
        let j = ((th / (2.0 * std::f64::consts::PI / 3.0)).round() as i64).rem_euclid(3);
        let zeta = z * &self.ctx.omega_pow(-j);
        let xs = if zeta.re.is_negative() {
            zeta.re.zero_like()
        } else if zeta.re > self.x_star {
            self.x_star.clone()
        } else {
            zeta.re.clone()
        };
        let dist = (&zeta - &Complex::from_real(xs.clone())).abs().to_f64();
        if dist >= 0.3 * self.x_star.to_f64() {
            Cow::Borrowed(self.mu1_regular().as_slice())
        } else {
            Cow::Owned(self.mu1_split(&xs, dist))
        }
    }

    /// `3 * int rho1` with an error from halving the panels.
    pub fn mass_mu1(&self) -> Estimate<Real> {
        let sum = |mesh: &Weighted| {
            let mut acc = self.x_star.zero_like();
            let mut abs = 0.0;
            for (_, w) in mesh {
                acc += w;
                abs += w.abs().to_f64();
            }
            (acc * 3.0, abs * 3.0)
        };
        let (coarse, _) = sum(self.mu1_regular());
        let (fine, abs) = sum(&self.mu1_weighted(self.mu1_raw_regular(self.settings.order, 8)));
        let error = (&fine - &coarse).abs().to_f64() + 64.0 * self.ctx.eps() * abs;
        Estimate { value: fine, error }
    }

    // ---- second measure ------------------------------------------------

    fn ray_dir(&self, ray: usize) -> Complex {
        match ray {
            0 => self.ctx.unit(1, 3),
            1 => self.ctx.complex(-1.0, 0.0),
            _ => self.ctx.unit(-1, 3),
        }
    }

    /// Density of the second measure on the ray `arg z = pi`.
    pub fn density_mu2(&self, s: &Real) -> Result<Real> {
        self.density_mu2_on_ray(s, 1)
    }

    /// Density on ray `ray` (arguments `pi/3`, `pi`, `-pi/3`), from the jump
    /// `e^{i theta} (F2,- - F2,+) / (2 pi i)` of the Cauchy transform.
    pub fn density_mu2_on_ray(&self, s: &Real, ray: usize) -> Result<Real> {
        Ok(self.density_mu2_sample(s, ray)?.value)
    }

    pub fn density_mu2_sample(&self, s: &Real, ray: usize) -> Result<DensitySample> {
        let s = s.with_bits(self.bits());
        if !(s > 0.0) || ray > 2 {
            return Err(Error::OutOfSupport);
        }
        let (value, error) = self.rho2(&s, ray)?;
        Ok(DensitySample { s, ray, value, error })
    }

    fn rho2(&self, s: &Real, ray: usize) -> Result<(Real, f64)> {
        let dir = self.ray_dir(ray);
        let z = dir.scale(s);
        let bp = self.curve.xi_branches_on(&z, Side::Plus)?;
        let bm = self.curve.xi_branches_on(&z, Side::Minus)?;
        let fp = self.f2_stable(&z, &bp);
        let fm = self.f2_stable(&z, &bm);
        let q = &(&fm - &fp) * &dir;
        let two_pi = self.ctx.pi() * 2.0;
        let err = 16.0 * self.ctx.eps() * (fp.abs().to_f64() + fm.abs().to_f64()) / two_pi.to_f64();
        Ok((q.im / two_pi, err))
    }

    /// `F2` from the sheet-3 preimage `w`. Far out `xi3` and the square-root
    /// term nearly cancel; writing `s3 z^{1/2}/sqrt(t3) = (r/w) sqrt(1 + r w^3/a)`
    /// removes the cancellation.
    fn f2_stable(&self, z: &Complex, b: &BranchTriple) -> Complex {
        let k = &self.curve.k;
        let t0 = &self.curve.params.t0;
        let (_, s3) = sheet_signs(b.sector);
        let lead = (self.curve.sqrt_on_sector(z, b.sector) / self.sqrt_t3.clone()).scale_f64(s3 as f64);
        let w = &b.w[2];
        let w2 = w.square();
        let q = (&w2 * w).scale(&(&k.r / &k.a));
        let root = (q + 1.0).sqrt();
        let c = &w.recip().scale(&k.r) * &root;
        if (&lead - &c).abs() <= lead.abs() * 1e-3 {
            let num = w2.scale(&(k.r.square() / &k.a));
            let t = &num / &(root + 1.0);
            (t - w2.scale(&k.a)) / t0.clone()
        } else {
            self.curve.f2_from(z, b)
        }
    }

    fn mu2_weighted(&self, raw: Vec<(Real, Real)>) -> Result<Weighted> {
        raw.into_iter()
            .map(|(t, w)| {
                let rho = self.rho2(&t, 1)?.0;
                Ok((t, w * rho))
            })
            .collect()
    }

    /// Tail `[r0, inf)` through `t = r0 v^{-2/3}`: the density decays like
    /// `t^{-5/2}` (three rays bound sectors of opening `2 pi/3`), so the mapped
    /// integrand is smooth in `v` apart from logarithms at `v = 0`.
    fn push_tail(&self, out: &mut Vec<(Real, Real)>, r0: &Real, order: usize) {
        let zero = r0.zero_like();
        let one = r0.one_like();
        let e = r0.lit(-2.0) / 3.0;
        for (a, b) in graded_intervals(&zero, &one, true, self.settings.tail_levels) {
            for (v, w) in panel_nodes(&a, &b, order, 1) {
                let vp = v.powf(&e);
                let t = r0 * &vp;
                // dt/dv = (2/3) r0 v^{-5/3}
                let jac = &t / &v * 2.0 / 3.0;
                out.push((t, w * jac));
            }
        }
    }

    fn mu2_raw_regular(&self, order: usize) -> Vec<(Real, Real)> {
        let zero = self.r_tail.zero_like();
        let mut raw = Vec::new();
        push_panels(&mut raw, &graded_intervals(&zero, &self.r_tail, true, self.settings.levels), order);
        self.push_tail(&mut raw, &self.r_tail, order);
        raw
    }

    /// Geometric panels toward the origin on `[0, R]` plus the tail map.
    fn mu2_regular(&self) -> Result<&Weighted> {
        if let Some(m) = self.mu2_mesh.get() {
            return Ok(m);
        }
        let mesh = self.mu2_weighted(self.mu2_raw_regular(self.settings.order))?;
        Ok(self.mu2_mesh.get_or_init(|| mesh))
    }

    fn mu2_split(&self, ts: &Real, dist: f64) -> Result<Weighted> {
        let order = self.settings.order;
        let lv = self.settings.levels;
        let tsf = ts.to_f64();
        let r_eff = if tsf * 4.0 > self.r_tail.to_f64() { ts * 4.0 } else { self.r_tail.clone() };
        let d = if dist > 0.0 { dist.min(tsf) } else { tsf * 0.5f64.powi(lv as i32) };
        let eps = self.ctx.eps();
        let ll = cap_levels(levels_for(tsf, d, lv + 30), tsf, tsf, eps);
        let lr = cap_levels(levels_for(r_eff.to_f64() - tsf, d, lv + 30), r_eff.to_f64() - tsf, tsf, eps);
        let mut raw = Vec::new();
        // rho2 has a square-root term at the origin, so grade toward both ends of [0, ts]
        let half = ts * 0.5;
        push_panels(&mut raw, &graded_intervals(&ts.zero_like(), &half, true, lv), order);
        push_panels(&mut raw, &graded_intervals(&half, ts, false, ll.saturating_sub(1).max(1)), order);
        push_panels(&mut raw, &graded_intervals(ts, &r_eff, true, lr), order);
        self.push_tail(&mut raw, &r_eff, order);
        self.mu2_weighted(raw)
    }

    /// Nodes for a kernel singular where `t^3 = -z^3`.
    fn mu2_nodes_for(&self, z: &Complex) -> Result<Cow<'_, [(Real, Real)]>> {
        let zf = z.to_c64();
        let phi = (-(zf * zf * zf)).arg();
        let modz = zf.norm();
        let ts = modz * (phi / 3.0).cos();
        let dist = modz * (phi / 3.0).sin().abs();
        let floor = 8.0 * self.r_tail.to_f64() * 0.5f64.powi(self.settings.levels as i32);
        if dist >= 0.3 * modz && modz >= floor {
            Ok(Cow::Borrowed(self.mu2_regular()?.as_slice()))
        } else {
            Ok(Cow::Owned(self.mu2_split(&self.ctx.real(ts), dist)?))
        }
    }

    /// `3 * int rho2` over one ray (all three rays), with the error taken as
    /// the change when the Gauss order grows by ten.
    pub fn mass_mu2(&self) -> Result<Estimate<Real>> {
        let sum = |mesh: &Weighted| {
            let mut acc = self.r_tail.zero_like();
            let mut abs = 0.0;
            for (_, w) in mesh {
                acc += w;
                abs += w.abs().to_f64();
            }
            (acc * 3.0, abs * 3.0)
        };
        let (coarse, _) = sum(self.mu2_regular()?);
        let fine_mesh = self.mu2_weighted(self.mu2_raw_regular(self.settings.order + 10))?;
        let (fine, abs) = sum(&fine_mesh);
        let error = (&fine - &coarse).abs().to_f64() + 64.0 * self.ctx.eps() * abs;
        Ok(Estimate { value: fine, error })
    }

    /// Mass of one ray of the second measure beyond `r_tail`.
    pub fn tail_mass(&self) -> Result<Real> {
        let mut raw = Vec::new();
        self.push_tail(&mut raw, &self.r_tail, self.settings.order);
        let mut acc = self.r_tail.zero_like();
        for (_, w) in self.mu2_weighted(raw)? {
            acc += w;
        }
        Ok(acc)
    }

    /// Least-squares log-log slope of the second density on `[R/2, R]`.
    pub fn tail_exponent(&self) -> Result<f64> {
        let r = self.r_tail.to_f64();
        let mut pts = Vec::new();
        for k in 0..9 {
            let t = r * 0.5 * 2f64.powf(k as f64 / 8.0);
            let rho = self.rho2(&self.ctx.real(t), 1)?.0.to_f64();
            pts.push((t.ln(), rho.ln()));
        }
        Ok(slope(&pts))
    }

    /// `F1(z) = int d mu1(s) / (z - s)` by quadrature of the density,
    /// `sum_j 1/(z - omega^j x) = 3 z^2 / (z^3 - x^3)`.
    pub fn cauchy_mu1(&self, z: &Complex) -> Result<Complex> {
        let z = z.with_bits(self.bits());
        if matches!(self.curve.locate(&z), CutLocation::FirstSupport(_) | CutLocation::Origin) {
            return Err(Error::OnSupport);
        }
        let z3 = z.powi(3);
        let num = z.square().scale_f64(3.0);
        let mut acc = z.zero_like();
        for (x, w) in self.mu1_nodes_for(&z).iter() {
            let den = &z3 - &Complex::from_real(x.powi(3));
            acc += (&num / &den).scale(w);
        }
        Ok(acc)
    }

    // ---- g-functions ---------------------------------------------------

    /// `g1(z) = int log(z - s) d mu1(s)`, analytic off `Sigma1` and the negative
    /// axis and real beyond `x_star`; on a cut the limit from `side` is returned.
    pub fn g1(&self, z: &Complex, side: Side) -> Result<GValue> {
        let z = z.with_bits(self.bits());
        let pi = self.ctx.pi();
        let (value, side) = match self.curve.locate(&z) {
            CutLocation::Origin => return Err(Error::OnCut),
            CutLocation::FirstSupport(j) => {
                if side == Side::Off {
                    return Err(Error::OnCut);
                }
                let x0 = z.abs();
                let x03 = x0.powi(3);
                let mut re = x0.ln();
                let mut above = x0.zero_like();
                for (x, w) in self.mu1_split(&x0, 0.0) {
                    // 1 - x^3/x0^3 without cancellation
                    let q = (&x0 - &x) * (x0.square() + &x0 * &x + x.square()) / &x03;
                    re += &w * q.abs().ln();
                    if x > x0 {
                        above += w;
                    }
                }
                let sigma = if side == Side::Plus { 1.0 } else { -1.0 };
                let arg = match j {
                    0 => pi.zero_like(),
                    1 => &pi * 2.0 / 3.0,
                    _ => -(&pi * 2.0 / 3.0),
                };
                (Complex::new(re, arg + above * &pi * sigma), side)
            }
            loc => {
                let on_negative_axis = loc == CutLocation::SecondSupport(1);
                if on_negative_axis && side == Side::Off {
                    return Err(Error::OnCut);
                }
                let mut lz = z.ln();
                if on_negative_axis {
                    // the + side of the ray arg z = pi is the lower half-plane
                    lz.im = if side == Side::Plus { -pi.clone() } else { pi.clone() };
                }
                let inv3 = z.powi(3).recip();
                let mut acc = z.zero_like();
                for (x, w) in self.mu1_nodes_for(&z).iter() {
                    let u = (z.one_like() - inv3.scale(&x.powi(3))).ln();
                    acc += u.scale(w);
                }
                let side = if on_negative_axis { side } else { Side::Off };
                (lz + acc, side)
            }
        };
        Ok(GValue { which: FieldFunction::G1, z, value, side, error: 0.0 })
    }

    fn g2_sector_constant(&self, sector: Sector) -> Real {
        let pi3 = self.ctx.pi() / 3.0;
        match sector {
            Sector::S0 => pi3.zero_like(),
            Sector::S1 => pi3,
            Sector::S2 => -pi3,
        }
    }

    /// `g2(z) = int log(z - s) d mu2(s)`, analytic in each sector, real on the
    /// positive axis; on a ray of `Sigma2` the limit from `side` is returned.
    pub fn g2(&self, z: &Complex, side: Side) -> Result<GValue> {
        let z = z.with_bits(self.bits());
        let pi = self.ctx.pi();
        let (value, side) = match self.curve.locate(&z) {
            CutLocation::Origin => return Err(Error::OnCut),
            CutLocation::SecondSupport(k) => {
                if side == Side::Off {
                    return Err(Error::OnCut);
                }
                let s = z.abs();
                let mut re = s.zero_like();
                let mut below = s.zero_like();
                for (t, w) in self.mu2_split(&s, 0.0)? {
                    let q = (&t - &s) * (t.square() + &t * &s + s.square());
                    re += &w * q.abs().ln();
                    if t < s {
                        below += w;
                    }
                }
                // z^3 + t^3 approaches the negative axis from below on the + side
                let sigma = if side == Side::Plus { -1.0 } else { 1.0 };
                let plus = side == Side::Plus;
                let sector = match (k, plus) {
                    (0, true) => Sector::S1,
                    (0, false) => Sector::S0,
                    (1, true) => Sector::S2,
                    (1, false) => Sector::S1,
                    (_, true) => Sector::S0,
                    (_, false) => Sector::S2,
                };
                let im = below * &pi * sigma + self.g2_sector_constant(sector);
                (Complex::new(re, im), side)
            }
            _ => {
                let z3 = z.powi(3);
                let mut acc = z.zero_like();
                for (t, w) in self.mu2_nodes_for(&z)?.iter() {
                    let u = (&z3 + &Complex::from_real(t.powi(3))).ln();
                    acc += u.scale(w);
                }
                acc.im += self.g2_sector_constant(self.curve.sector_of(&z));
                (acc, Side::Off)
            }
        };
        Ok(GValue { which: FieldFunction::G2, z, value, side, error: 0.0 })
    }

    pub fn g_function(&self, which: FieldFunction, z: &Complex, side: Side) -> Result<GValue> {
        match which {
            FieldFunction::G1 => self.g1(z, side),
            FieldFunction::G2 => self.g2(z, side),
            FieldFunction::Phi1 => self.phi1(z, side),
            FieldFunction::Phi2 => self.phi2(z, side),
        }
    }

    // ---- phi-functions -------------------------------------------------

    /// `int_a^b f(u) du` along the path `s = s0 + ds u`, with square-root maps
    /// at the flagged ends. Panels are graded toward the nearest point where
    /// the branches are singular (the origin and the three branch points). The
    /// error is the change when the panel count doubles.
    fn param_quad(
        &self,
        a: &Real,
        b: &Real,
        sing_a: bool,
        sing_b: bool,
        path: (Complex64, Complex64),
        f: &mut dyn FnMut(&Real) -> Result<Complex>,
    ) -> Result<Estimate<Complex>> {
        let (af, bf) = (a.to_f64(), b.to_f64());
        let len = bf - af;
        let (s0, ds) = path;
        let xs = self.x_star.to_f64();
        let w = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        let mut near: Option<(f64, f64)> = None;
        for p in [Complex64::new(0.0, 0.0), Complex64::new(xs, 0.0), w * xs, w.conj() * xs] {
            let u = (((p - s0) * ds.conj()).re / ds.norm_sqr()).clamp(af, bf);
            let d = (s0 + ds * u - p).norm() / ds.norm();
            let at_mapped_end = d < 1e-9 * len && ((sing_a && u - af < 1e-9 * len) || (sing_b && bf - u < 1e-9 * len));
            if at_mapped_end || d >= 0.5 * len {
                continue;
            }
            if near.map_or(true, |n| d < n.1) {
                near = Some((u, d));
            }
        }
        let mut pieces: Vec<(Real, Real)> = Vec::new();
        match near {
            None => pieces.push((a.clone(), b.clone())),
            Some((u, d)) => {
                let uc = self.ctx.real(u);
                if u - af > 1e-9 * len {
                    pieces.extend(graded_intervals(a, &uc, false, levels_for(u - af, d, 50)));
                }
                if bf - u > 1e-9 * len {
                    pieces.extend(graded_intervals(&uc, b, true, levels_for(bf - u, d, 50)));
                }
            }
        }
        let base = if pieces.len() == 1 { 2 } else { 1 };
        let mut coarse = Complex::from_real(a.zero_like());
        let mut fine = coarse.clone();
        for (pa, pb) in &pieces {
            let sa = sing_a && pa == a;
            let sb = sing_b && pb == b;
            coarse += self.mapped_panels(pa, pb, sa, sb, base, f)?;
            fine += self.mapped_panels(pa, pb, sa, sb, 2 * base, f)?;
        }
        let error = (&fine - &coarse).abs().to_f64();
        Ok(Estimate { value: fine, error })
    }

    fn mapped_panels(
        &self,
        a: &Real,
        b: &Real,
        sing_a: bool,
        sing_b: bool,
        panels: usize,
        f: &mut dyn FnMut(&Real) -> Result<Complex>,
    ) -> Result<Complex> {
        if sing_a && sing_b {
            let m = (a + b) * 0.5;
            let l = self.mapped_panels(a, &m, true, false, panels, f)?;
            return Ok(l + self.mapped_panels(&m, b, false, true, panels, f)?);
        }
        let len = b - a;
        let mut acc = Complex::from_real(a.zero_like());
        for (v, w) in panel_nodes(&a.zero_like(), &a.one_like(), self.settings.order, panels) {
            let (u, jac) = if sing_a {
                (a + &len * v.square(), &len * &v * 2.0)
            } else if sing_b {
                (b - &len * v.square(), &len * &v * 2.0)
            } else {
                (a + &len * &v, len.clone())
            };
            let val = f(&u)?;
            if !val.is_finite() {
                return Err(Error::EvaluationFailure("phase-function integrand".into()));
            }
            acc += val.scale(&(w * jac));
        }
        Ok(acc)
    }

    /// Sector `S_j` entered from `side` at a point of a cut.
    fn sector_index(&self, z: &Complex, side: Side) -> Result<usize> {
        Ok(match self.curve.locate(z) {
            CutLocation::Origin => return Err(Error::OnCut),
            CutLocation::FirstSupport(j) => j,
            CutLocation::SecondSupport(k) => {
                if side == Side::Off {
                    return Err(Error::OnCut);
                }
                let plus = side == Side::Plus;
                match (k, plus) {
                    (0, true) | (1, false) => 1,
                    (1, true) | (2, false) => 2,
                    _ => 0,
                }
            }
            CutLocation::Off => match self.curve.sector_of(z) {
                Sector::S0 => 0,
                Sector::S1 => 1,
                Sector::S2 => 2,
            },
        })
    }

    /// `phi1(z) = (1/2t0) int_{omega^j x_star}^z (xi1 - xi2) ds` inside `S_j`.
    /// The integral is invariant under `z -> omega z`, so it is evaluated in
    /// `S0` along the segment from `x_star`, with `s - x_star` quadratic in the
    /// path parameter to absorb the square-root branch point.
    pub fn phi1(&self, z: &Complex, side: Side) -> Result<GValue> {
        let z = z.with_bits(self.bits());
        let loc = self.curve.locate(&z);
        if loc == CutLocation::Origin {
            return Err(Error::OnCut);
        }
        let on_first = matches!(loc, CutLocation::FirstSupport(_));
        if on_first && side == Side::Off {
            return Err(Error::OnCut);
        }
        let j = self.sector_index(&z, side)?;
        let zeta = if on_first { Complex::from_real(z.abs()) } else { &z * &self.ctx.omega_pow(-(j as i64)) };
        let out_side = if matches!(loc, CutLocation::Off) { Side::Off } else { side };
        let xs = Complex::from_real(self.x_star.clone());
        let d = &zeta - &xs;
        // phi1 vanishes like |z - x_star|^{3/2}; rotation rounding can leave a tiny offset
        if d.abs() <= &self.x_star * (1e3 * self.ctx.eps()) {
            return Ok(GValue { which: FieldFunction::Phi1, z: z.clone(), value: z.zero_like(), side: out_side, error: 0.0 });
        }
        let two_t0 = &self.curve.params.t0 * 2.0;
        let bside = if on_first { side } else { Side::Plus };
        let mut f = |u: &Real| -> Result<Complex> {
            let s = &xs + &d.scale(u);
            let b = self.curve.xi_branches_on(&s, bside)?;
            Ok(&(&b.xi[0] - &b.xi[1]) * &d / two_t0.clone())
        };
        let zero = self.x_star.zero_like();
        let path = (xs.to_c64(), d.to_c64());
        let est = self.param_quad(&zero, &zero.one_like(), true, false, path, &mut f)?;
        Ok(GValue { which: FieldFunction::Phi1, z, value: est.value, side: out_side, error: est.error })
    }

    /// `Re phi1(z)` in double precision for any `z`, using the continuous
    /// extension across both supports. Points on a cut or where branch
    /// tracking fails are retried after a tiny rotation and shift.
    pub fn re_phi1(&self, z: Complex64) -> Result<f64> {
        let mut last = Error::OnCut;
        for nudge in [0.0, 1e-9, -1e-9, 1e-7] {
            let w = z * Complex64::from_polar(1.0, nudge) + Complex64::new(nudge.abs(), 0.0);
            match self.phi1(&Complex::from_c64(w, 53), Side::Off) {
                Ok(v) => return Ok(v.value.re.to_f64()),
                Err(e) => last = e,
            }
        }
        Err(last)
    }

    /// First radius beyond `from` along `dir` where the sign of `Re phi1`
    /// flips (values within `1e-12` of zero count as zero).
    pub fn re_phi1_sign_flip(&self, dir: Complex64, from: f64) -> Result<f64> {
        let sign = |v: f64| if v > 1e-12 { 1 } else if v < -1e-12 { -1 } else { 0 };
        let s0 = sign(self.re_phi1(dir * from)?);
        let (mut lo, mut hi) = (from, from);
        loop {
            hi *= 1.1;
            if hi > 1e4 * from {
                return Err(Error::EvaluationFailure(format!("no sign change of Re phi1 along {dir} up to {hi:e}")));
            }
            if sign(self.re_phi1(dir * hi)?) != s0 {
                break;
            }
            lo = hi;
        }
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if sign(self.re_phi1(dir * mid)?) == s0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Half-width of a square that shows the bounded part of the sign chart
    /// of `Re phi1`: 1.3 times the larger of the outer zero on the positive
    /// axis and the tip of the positive region on the negative axis.
    pub fn re_phi1_window(&self) -> Result<f64> {
        if self.curve.params.regime != Regime::Subcritical {
            return Err(Error::CriticalRegime);
        }
        let xh = crate::curve::curve_constants(&self.curve.params)?.x_hat.to_f64();
        let outer = self.re_phi1_sign_flip(Complex64::new(1.0, 0.0), xh)?;
        let tip = self.re_phi1_sign_flip(Complex64::new(-1.0, 0.0), 1e-3 * xh)?;
        Ok(1.3 * outer.max(tip))
    }

    /// `phi2(z) = (1/2t0) int_0^z (xi2 - xi3) ds + c_k` along the segment from
    /// the origin, with the constant `c_k` of the sextant containing `z`.
    pub fn phi2(&self, z: &Complex, side: Side) -> Result<GValue> {
        let z = z.with_bits(self.bits());
        if z.is_zero() {
            return Err(Error::OnCut);
        }
        let zf = z.to_c64();
        let z3 = zf * zf * zf;
        let on_ray = z3.im.abs() <= 64.0 * f64::EPSILON * z3.norm();
        if on_ray && side == Side::Off {
            return Err(Error::OnCut);
        }
        let sixth = std::f64::consts::PI / 3.0;
        let mut th = zf.arg();
        if on_ray {
            th += if side == Side::Plus { 1e-9 } else { -1e-9 };
            if th > std::f64::consts::PI {
                th -= 2.0 * std::f64::consts::PI;
            }
        }
        let k = ((th / sixth).floor() as i64).clamp(-3, 2);
        let pi = self.ctx.pi();
        let c = match k {
            0 => -(&pi / 6.0),
            1 => &pi / 6.0,
            2 => &pi / 3.0,
            -1 => &pi / 6.0,
            -2 => -(&pi / 6.0),
            _ => -(&pi / 3.0),
        };
        let bside = if on_ray { side } else { Side::Plus };
        let two_t0 = &self.curve.params.t0 * 2.0;
        let mut f = |u: &Real| -> Result<Complex> {
            let s = z.scale(u);
            let b = self.curve.xi_branches_on(&s, bside)?;
            Ok(&(&b.xi[1] - &b.xi[2]) * &z / two_t0.clone())
        };
        let zero = self.x_star.zero_like();
        let one = zero.one_like();
        // xi2 - xi3 has a square-root term at the origin
        let path = (Complex64::new(0.0, 0.0), zf);
        // the segment passes through the branch point when z lies on a ray of Sigma1 beyond x_star
        let on_first_ray = on_ray && z3.re > 0.0;
        let modz = z.abs();
        let est = if on_first_ray && modz > self.x_star {
            let ub = &self.x_star / &modz;
            let l = self.param_quad(&zero, &ub, true, true, path, &mut f)?;
            let r = self.param_quad(&ub, &one, true, false, path, &mut f)?;
            Estimate { value: l.value + r.value, error: l.error + r.error }
        } else {
            let at_branch = on_first_ray && modz == self.x_star;
            self.param_quad(&zero, &one, true, at_branch, path, &mut f)?
        };
        let mut value = est.value;
        value.im += c;
        let out_side = if on_ray { side } else { Side::Off };
        Ok(GValue { which: FieldFunction::Phi2, z, value, side: out_side, error: est.error })
    }

    // ---- Euler-Lagrange ------------------------------------------------

    /// External field `(1/t0) (2/(3 sqrt t3) |z|^{3/2} - (t3/3) Re z^3)`.
    pub fn external_field(&self, z: &Complex) -> Real {
        let t0 = &self.curve.params.t0;
        let t3 = &self.curve.params.t3;
        let m = z.abs();
        let a = &m * m.sqrt() * 2.0 / (&self.sqrt_t3 * 3.0);
        let b = t3 * z.powi(3).re / 3.0;
        (a - b) / t0
    }

    /// `2 int log|z - s| d mu1 - int log|z - s| d mu2 - V(z)`.
    pub fn el1_lhs(&self, z: &Complex) -> Result<Real> {
        let g1 = self.g1(z, Side::Plus)?.value.re;
        let g2 = self.g2(z, Side::Plus)?.value.re;
        Ok(g1 * 2.0 - g2 - self.external_field(z))
    }

    /// `lim g2(z)` as `z -> 0` in `S0`: Richardson extrapolation of
    /// `g2(10^-k)`, `k = 4..8`, over the exponents `1, 3/2, 2, 5/2`
    /// (`g2'` has a square-root term at the origin), plus the direct value
    /// `3 int log t rho2(t) dt`.
    pub fn gamma2(&self) -> Result<(Real, Real)> {
        let mut direct = self.r_tail.zero_like();
        for (t, w) in self.mu2_regular()? {
            direct += w * t.ln();
        }
        let direct = direct * 3.0;
        let mut table = Vec::new();
        for k in 4..=8 {
            let z = Complex::from_real(self.ctx.real(10f64.powi(-k)));
            table.push(self.g2(&z, Side::Off)?.value.re);
        }
        for p in [1.0, 1.5, 2.0, 2.5] {
            let f = 10f64.powf(p);
            table = table.windows(2).map(|w| (&w[1] * f - &w[0]) / (f - 1.0)).collect();
        }
        Ok((table[0].clone(), direct))
    }

    /// The constant of the Euler-Lagrange equality on the first support,
    /// sampled at `count` interior points; fails with `NonConstantEL` when the
    /// spread exceeds `tol`.
    pub fn el_constant_with(&self, count: usize, tol: f64) -> Result<ElConstant> {
        if self.curve.params.regime != Regime::Subcritical {
            return Err(Error::CriticalRegime);
        }
        let count = count.max(2);
        let mut vals = Vec::with_capacity(count);
        for k in 0..count {
            let x = &self.x_star * ((k as f64 + 0.5) / count as f64);
            vals.push((x.clone(), self.el1_lhs(&Complex::from_real(x))?));
        }
        let mut ell = self.x_star.zero_like();
        for (_, v) in &vals {
            ell += v;
        }
        let ell = ell / count as f64;
        let profile: Vec<(Real, f64)> = vals.iter().map(|(x, v)| (x.clone(), (v - &ell).to_f64())).collect();
        let hi = profile.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let lo = profile.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let spread = hi - lo;
        if !(spread <= tol) {
            return Err(Error::NonConstantEL(spread));
        }
        let (gamma2, gamma2_direct) = self.gamma2()?;
        Ok(ElConstant { ell, profile, spread, gamma2, gamma2_direct })
    }

    pub fn el_constant(&self) -> Result<ElConstant> {
        self.el_constant_with(50, 1e-8)
    }

    /// `2 c int log|z - s| d mu2 - int log|z - s| d mu1` for `z` on `Sigma2`;
    /// `c = 1` is the balayage identity.
    pub fn el2_residual_scaled(&self, z: &Complex, c: f64) -> Result<f64> {
        if !matches!(self.curve.locate(z), CutLocation::SecondSupport(_)) {
            return Err(Error::InvalidParameters("point is not on the second support".into()));
        }
        let g2 = self.g2(z, Side::Plus)?.value.re;
        let g1 = self.g1(z, Side::Plus)?.value.re;
        Ok((g2 * (2.0 * c) - g1).to_f64())
    }

    pub fn el2_residual(&self, z: &Complex) -> Result<f64> {
        self.el2_residual_scaled(z, 1.0)
    }

    /// Log-log slope of the first density on `x_star (1 - delta)`,
    /// `delta in [1e-5, 1e-2]`.
    pub fn endpoint_exponent(&self) -> f64 {
        let mut pts = Vec::new();
        for k in 0..=30 {
            let delta = 10f64.powf(-2.0 - 3.0 * k as f64 / 30.0);
            let x = &self.x_star * (1.0 - delta);
            let rho = self.rho1(&x).0;
            pts.push(((self.x_star.to_f64() * delta).ln(), rho.ln().to_f64()));
        }
        slope(&pts)
    }

    // ---- samples and cells ---------------------------------------------

    /// Densities at `n1 + 1` equispaced points of `[0, x_star]` and `n2`
    /// equispaced points of `(0, r_tail]`, with masses and (when subcritical) `ell`.
    pub fn sample(&self, n1: usize, n2: usize) -> Result<MeasurePair> {
        let n1 = n1.max(1);
        let n2 = n2.max(1);
        let mut mu1 = Vec::with_capacity(n1 + 1);
        for k in 0..=n1 {
            let x = &self.x_star * (k as f64 / n1 as f64);
            let (value, error) = self.rho1(&x);
            mu1.push(DensitySample { s: x, ray: 0, value, error });
        }
        let mut mu2 = Vec::with_capacity(n2);
        for k in 1..=n2 {
            let t = &self.r_tail * (k as f64 / n2 as f64);
            let (value, error) = self.rho2(&t, 1)?;
            mu2.push(DensitySample { s: t, ray: 1, value, error });
        }
        let ell = if self.curve.params.regime == Regime::Subcritical { Some(self.el_constant()?.ell) } else { None };
        Ok(MeasurePair {
            mu1,
            mu2,
            r_tail: self.r_tail.clone(),
            tail_exponent: self.tail_exponent()?,
            mass1: self.mass_mu1(),
            mass2: self.mass_mu2()?,
            ell,
        })
    }

    /// Piecewise-constant versions of both measures on all three rays. The
    /// first uses `n1` equal cells on `[0, x_star]`; the second the given
    /// `edges` on `[0, R]` with the mass beyond `R` added to the last cell.
    /// Cell masses are exact integrals of the densities, renormalized to
    /// `1/3` and `1/6` per ray.
    pub fn cells(&self, n1: usize, edges2: &[f64]) -> Result<(CellMeasure, CellMeasure)> {
        if n1 == 0 || edges2.len() < 2 {
            return Err(Error::InvalidParameters("need at least one cell per measure".into()));
        }
        let order = self.settings.order;
        let xs = self.x_star.to_f64();
        let mut m1 = Vec::with_capacity(n1);
        for k in 0..n1 {
            let a = &self.x_star * (k as f64 / n1 as f64);
            let b = &self.x_star * ((k + 1) as f64 / n1 as f64);
            let mut raw = Vec::new();
            if k + 1 == n1 {
                push_sqrt_end(&mut raw, &a, &b, order, 1);
            } else {
                raw.extend(panel_nodes(&a, &b, order, 1));
            }
            let mass: f64 = self.mu1_weighted(raw).iter().map(|(_, w)| w.to_f64()).sum();
            m1.push((xs * k as f64 / n1 as f64, xs * (k + 1) as f64 / n1 as f64, mass));
        }
        let mut m2 = Vec::with_capacity(edges2.len() - 1);
        for e in edges2.windows(2) {
            let raw = panel_nodes(&self.ctx.real(e[0]), &self.ctx.real(e[1]), order, 1);
            let mass: f64 = self.mu2_weighted(raw)?.iter().map(|(_, w)| w.to_f64()).sum();
            m2.push((e[0], e[1], mass));
        }
        let r_last = self.ctx.real(*edges2.last().unwrap());
        let mut raw = Vec::new();
        self.push_tail(&mut raw, &r_last, order);
        let tail: f64 = self.mu2_weighted(raw)?.iter().map(|(_, w)| w.to_f64()).sum();
        if let Some(last) = m2.last_mut() {
            last.2 += tail;
        }
        Ok((CellMeasure::from_ray(Support::First, &m1, 1.0), CellMeasure::from_ray(Support::Second, &m2, 0.5)))
    }
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

// ---- discrete measures and energy -------------------------------------------

/// Which star a discrete measure lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Support {
    /// Segments at arguments `0, 2 pi/3, -2 pi/3`.
    First,
    /// Rays at arguments `pi/3, pi, -pi/3`.
    Second,
}

impl Support {
    pub fn ray_angle(self, ray: usize) -> f64 {
        let third = std::f64::consts::PI / 3.0;
        match (self, ray % 3) {
            (Support::First, 0) => 0.0,
            (Support::First, 1) => 2.0 * third,
            (Support::First, _) => -2.0 * third,
            (Support::Second, 0) => third,
            (Support::Second, 1) => 3.0 * third,
            (Support::Second, _) => -third,
        }
    }
}

/// Mass `mass` spread uniformly over arclength `[lo, hi]` of ray `ray`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub ray: usize,
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
}

#[derive(Clone, Debug)]
pub struct CellMeasure {
    pub support: Support,
    pub cells: Vec<Cell>,
}

impl CellMeasure {
    /// Copies one ray's `(lo, hi, mass)` cells onto all three rays, scaled to `total`.
    pub fn from_ray(support: Support, cells: &[(f64, f64, f64)], total: f64) -> CellMeasure {
        let sum: f64 = cells.iter().map(|c| c.2).sum();
        let scale = if sum > 0.0 { total / (3.0 * sum) } else { 0.0 };
        let mut out = Vec::with_capacity(3 * cells.len());
        for ray in 0..3 {
            for &(lo, hi, mass) in cells {
                out.push(Cell { ray, lo, hi, mass: mass * scale });
            }
        }
        CellMeasure { support, cells: out }
    }

    pub fn total_mass(&self) -> f64 {
        self.cells.iter().map(|c| c.mass).sum()
    }

    /// The same measure with ray labels permuted by `perm`.
    pub fn relabeled(&self, perm: [usize; 3]) -> CellMeasure {
        let cells = self.cells.iter().map(|c| Cell { ray: perm[c.ray % 3], ..*c }).collect();
        CellMeasure { support: self.support, cells }
    }
}

thread_local! {
    static GAUSS_F64: std::cell::RefCell<std::collections::HashMap<usize, std::rc::Rc<Vec<(f64, f64)>>>> =
        std::cell::RefCell::new(std::collections::HashMap::new());
}

fn gauss_f64(n: usize) -> std::rc::Rc<Vec<(f64, f64)>> {
    GAUSS_F64.with(|m| {
        m.borrow_mut()
            .entry(n)
            .or_insert_with(|| {
                let g = gauss_legendre(n, 53);
                std::rc::Rc::new(g.x.iter().zip(&g.w).map(|(x, w)| (x.to_f64(), w.to_f64())).collect())
            })
            .clone()
    })
}

fn g2_antiderivative(u: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        0.5 * u * u * u.abs().ln() - 0.75 * u * u
    }
}

/// Average of `ln|x e^{i alpha} - y|` over `x in [a, b]`, `y in [c, d]`.
/// Collinear, equally oriented pairs that are close use the closed form;
/// everything else uses tensor Gauss rules sized by the separation.
pub fn mean_log_distance(alpha: f64, a: f64, b: f64, c: f64, d: f64) -> f64 {
    let (ca, sa) = (alpha.cos(), alpha.sin());
    let mx = 0.5 * (a + b);
    let my = 0.5 * (c + d);
    let sep = ((mx * ca - my).powi(2) + (mx * sa).powi(2)).sqrt();
    let width = (b - a) + (d - c);
    let collinear = sa.abs() < 1e-14 && ca > 0.0;
    if collinear && sep <= 20.0 * width {
        let g = g2_antiderivative;
        let total = g(b - c) - g(a - c) - g(b - d) + g(a - d);
        return total / ((b - a) * (d - c));
    }
    let n = if sep > 4.0 * width { 2 } else { 8 };
    let rule = gauss_f64(n);
    let (hx, hy) = (0.5 * (b - a), 0.5 * (d - c));
    let mut acc = 0.0;
    for &(u, wu) in rule.iter() {
        let x = mx + hx * u;
        let (px, py) = (x * ca, x * sa);
        for &(v, wv) in rule.iter() {
            let y = my + hy * v;
            let r2 = (px - y).powi(2) + py * py;
            acc += wu * wv * 0.5 * r2.ln();
        }
    }
    acc / 4.0
}

/// Mutual energy `int int log 1/|x - y| d mu d nu` of two cell measures.
pub fn mutual_energy(mu: &CellMeasure, nu: &CellMeasure) -> f64 {
    let mut acc = 0.0;
    for p in &mu.cells {
        let ap = mu.support.ray_angle(p.ray);
        for q in &nu.cells {
            let aq = nu.support.ray_angle(q.ray);
            acc -= p.mass * q.mass * mean_log_distance(ap - aq, p.lo, p.hi, q.lo, q.hi);
        }
    }
    acc
}

/// Cell average of the external field over arclength `[a, b]` of the first support.
pub fn field_average(t0: f64, t3: f64, a: f64, b: f64) -> f64 {
    let p52 = 0.4 * (b.powf(2.5) - a.powf(2.5));
    let p4 = 0.25 * (b.powi(4) - a.powi(4));
    (2.0 / (3.0 * t3.sqrt()) * p52 - t3 / 3.0 * p4) / (t0 * (b - a))
}

/// `I(mu1) + I(mu2) - I(mu1, mu2) + int V d mu1` for piecewise-constant measures.
pub fn energy(mu1: &CellMeasure, mu2: &CellMeasure, params: &ModelParams) -> Result<f64> {
    if mu1.support != Support::First || mu2.support != Support::Second {
        return Err(Error::InvalidParameters("energy expects (first, second) supports".into()));
    }
    let (m1, m2) = (mu1.total_mass(), mu2.total_mass());
    if (m1 - 1.0).abs() > 1e-6 || (m2 - 0.5).abs() > 1e-6 {
        return Err(Error::MassViolation { m1, m2 });
    }
    let (t0, t3) = (params.t0_f64(), params.t3_f64());
    let ext: f64 = mu1.cells.iter().map(|c| c.mass * field_average(t0, t3, c.lo, c.hi)).sum();
    Ok(mutual_energy(mu1, mu1) + mutual_energy(mu2, mu2) - mutual_energy(mu1, mu2) + ext)
}

/// Cell edges `0 = e_0 < ... < e_n = r` with widths growing by `growth`.
pub fn geometric_edges(r: f64, n: usize, growth: f64) -> Vec<f64> {
    let n = n.max(1);
    let h0 = if (growth - 1.0).abs() < 1e-15 { r / n as f64 } else { r * (growth - 1.0) / (growth.powi(n as i32) - 1.0) };
    let mut edges = Vec::with_capacity(n + 1);
    let mut e = 0.0;
    let mut h = h0;
    edges.push(0.0);
    for _ in 0..n {
        e += h;
        h *= growth;
        edges.push(e);
    }
    edges[n] = r;
    edges
}

// ---- free-function forms ------------------------------------------------------

pub fn density_mu1(x: &Real, params: &ModelParams) -> Result<Real> {
    EquilibriumMeasures::new(params)?.density_mu1(x)
}

pub fn density_mu2(s: &Real, params: &ModelParams) -> Result<Real> {
    EquilibriumMeasures::new(params)?.density_mu2(s)
}

/// `g1` or `g2` at `z`; on a cut the `+`-side limit.
pub fn g_function(which: FieldFunction, z: &Complex, params: &ModelParams) -> Result<GValue> {
    match which {
        FieldFunction::G1 | FieldFunction::G2 => EquilibriumMeasures::new(params)?.g_function(which, z, Side::Plus),
        _ => Err(Error::InvalidParameters("g_function takes G1 or G2".into())),
    }
}

/// `phi1` or `phi2` at `z`; on a cut the `+`-side limit.
pub fn phi_function(which: FieldFunction, z: &Complex, params: &ModelParams) -> Result<GValue> {
    match which {
        FieldFunction::Phi1 | FieldFunction::Phi2 => EquilibriumMeasures::new(params)?.g_function(which, z, Side::Plus),
        _ => Err(Error::InvalidParameters("phi_function takes Phi1 or Phi2".into())),
    }
}

pub fn el_constant(params: &ModelParams) -> Result<ElConstant> {
    EquilibriumMeasures::new(params)?.el_constant()
}

pub fn el2_residual(z: &Complex, params: &ModelParams) -> Result<f64> {
    EquilibriumMeasures::new(params)?.el2_residual(z)
}

/// Endpoint exponent, evaluated with at least 160 bits: at the critical point
/// three branches meet at `x_star` and double precision cannot resolve them.
pub fn endpoint_exponent(params: &ModelParams) -> Result<f64> {
    let ctx = if params.ctx().bits() < 160 { PrecisionContext::new(160)? } else { params.ctx() };
    Ok(EquilibriumMeasures::new(&params.with_ctx(ctx))?.endpoint_exponent())
}

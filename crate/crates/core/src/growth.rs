//! The Laplacian growth domain: the image of `|w| > 1` under
//! `h(w) = r w + a w^-2` is the exterior of `Omega`, whose area is `pi t0`
//! and whose Schwarz function is the first sheet of the spectral curve.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::curve::{ModelParams, Regime, SpectralCurve};
use crate::measures::EquilibriumMeasures;
use crate::numerics::{graded_intervals, panel_nodes, Complex, PrecisionContext, Real};
use crate::{Error, Result};

/// Boundary samples used for the geometric checks.
pub const BOUNDARY_SAMPLES: usize = 2048;

/// Points closer than this to the sampled boundary are not classified.
pub const BOUNDARY_BAND: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct ConformalData {
    pub r: Real,
    pub a: Real,
    /// `(2a/r)^(1/3)`: `|w|` of the critical points of `h`.
    pub rho_crit: Real,
}

pub fn conformal_coeffs(params: &ModelParams) -> Result<ConformalData> {
    let k = crate::curve::curve_constants(params)?;
    let rho_crit = (&k.a * 2.0 / &k.r).cbrt();
    Ok(ConformalData { r: k.r, a: k.a, rho_crit })
}

/// Grid for the area integral in the exterior potential identity.
#[derive(Clone, Copy, Debug)]
pub struct AreaGrid {
    /// Gauss nodes in the radial scaling variable.
    pub radial: usize,
    /// Trapezoid nodes in the boundary angle.
    pub angular: usize,
}

impl Default for AreaGrid {
    fn default() -> Self {
        AreaGrid { radial: 200, angular: 400 }
    }
}

pub struct GrowthDomain {
    pub conformal: ConformalData,
    /// `h(e^{i theta})` at equispaced `theta`, double precision.
    pub boundary: Vec<Complex64>,
    pub params: ModelParams,
    curve: SpectralCurve,
    measures: OnceLock<std::result::Result<EquilibriumMeasures, Error>>,
    band: f64,
}

impl GrowthDomain {
    pub fn new(params: &ModelParams) -> Result<GrowthDomain> {
        Self::with_samples(params, BOUNDARY_SAMPLES)
    }

    pub fn with_samples(params: &ModelParams, samples: usize) -> Result<GrowthDomain> {
        if samples < 16 {
            return Err(Error::InvalidParameters(format!("need at least 16 boundary samples, got {samples}")));
        }
        let conformal = conformal_coeffs(params)?;
        let curve = SpectralCurve::new(params)?;
        let (r, a) = (conformal.r.to_f64(), conformal.a.to_f64());
        let h = |th: f64| {
            let w = Complex64::from_polar(1.0, th);
            r * w + a / (w * w)
        };
        let step = std::f64::consts::TAU / samples as f64;
        let boundary: Vec<Complex64> = (0..samples).map(|j| h(j as f64 * step)).collect();
        // chord sag: distance from the true arc midpoint to the polygon edge
        let sag = (0..samples)
            .map(|j| {
                let mid = h((j as f64 + 0.5) * step);
                let (p, q) = (boundary[j], boundary[(j + 1) % samples]);
                segment_distance(mid, p, q)
            })
            .fold(0.0, f64::max);
        Ok(GrowthDomain {
            conformal,
            boundary,
            params: params.clone(),
            curve,
            measures: OnceLock::new(),
            band: BOUNDARY_BAND.max(4.0 * sag),
        })
    }

    pub fn ctx(&self) -> PrecisionContext {
        self.params.ctx()
    }

    pub fn curve(&self) -> &SpectralCurve {
        &self.curve
    }

    pub fn h(&self, w: &Complex) -> Complex {
        self.curve.h(w)
    }

    pub fn h_prime(&self, w: &Complex) -> Complex {
        self.curve.h_prime(w)
    }

    pub fn boundary_point(&self, theta: &Real) -> Complex {
        self.h(&Complex::cis(&theta.with_bits(self.ctx().bits())))
    }

    /// `pi (r^2 - 2 a^2)`.
    pub fn area_closed_form(&self) -> Real {
        let ConformalData { r, a, .. } = &self.conformal;
        (r.square() - a.square() * 2.0) * self.ctx().pi()
    }

    /// `(1/2i) oint conj(z) dz` by the trapezoid rule on `|w| = 1`.
    pub fn area(&self) -> Real {
        self.contour_mean(0).re * self.ctx().pi()
    }

    /// `t_k = (1/2 pi i) oint conj(z) z^-k dz` over the boundary.
    pub fn harmonic_moment(&self, k: u32) -> Result<Complex> {
        if k == 0 {
            return Err(Error::InvalidParameters("harmonic moments are indexed from k = 1".into()));
        }
        Ok(self.contour_mean(k))
    }

    /// Trapezoid nodes on the unit circle. With `conj(z) = h(1/w)` there, the
    /// integrand is analytic for `|w| > (a/r)^(1/3)` and its positive Laurent
    /// part is a polynomial, so the rule converges like `(a/r)^(N/3)`.
    fn trapezoid_count(&self, k: u32) -> usize {
        let ratio = (self.conformal.a.to_f64() / self.conformal.r.to_f64()).cbrt();
        let bits = self.ctx().bits() as f64;
        let n = if ratio < 1e-3 {
            32.0
        } else {
            2.0 * bits * std::f64::consts::LN_2 / -ratio.ln() + 16.0
        };
        (n.ceil() as usize + 2 * k as usize).clamp(32, 1 << 14)
    }

    /// `(1/N) sum conj(z) z^-k h'(w) w` over the roots of unity.
    fn contour_mean(&self, k: u32) -> Complex {
        let ctx = self.ctx();
        let n = self.trapezoid_count(k);
        let mut acc = ctx.zero();
        for j in 0..n {
            let w = ctx.unit(2 * j as i64, n as i64);
            let z = self.h(&w);
            let zc = self.h(&w.conj());
            let mut term = &(&zc * &self.h_prime(&w)) * &w;
            if k > 0 {
                term = &term / &z.powi(k);
            }
            acc += term;
        }
        acc / (n as f64)
    }

    /// `|xi_1(z) - conj(z)|` at `z = h(e^{i theta})`.
    pub fn schwarz_residual(&self, theta: &Real) -> Result<f64> {
        let z = self.boundary_point(theta);
        let b = self.curve.xi_branches(&z)?;
        Ok((&b.xi[0] - &z.conj()).abs().to_f64())
    }

    /// Residual of the spectral cubic at `(h(w), h(1/w))`.
    pub fn curve_residual(&self, w: &Complex) -> f64 {
        let z = self.h(w);
        let xi = self.h(&w.recip());
        self.curve.cubic_residual(&z, &xi).abs().to_f64()
    }

    /// Winding number of the sampled boundary around `z`.
    pub fn winding_number(&self, z: Complex64) -> i64 {
        let n = self.boundary.len();
        let mut total = 0.0;
        for j in 0..n {
            let p = self.boundary[j] - z;
            let q = self.boundary[(j + 1) % n] - z;
            total += (q / p).arg();
        }
        (total / std::f64::consts::TAU).round() as i64
    }

    /// Distance from `z` to the sampled boundary polygon.
    pub fn boundary_distance(&self, z: Complex64) -> f64 {
        let n = self.boundary.len();
        (0..n)
            .map(|j| segment_distance(z, self.boundary[j], self.boundary[(j + 1) % n]))
            .fold(f64::INFINITY, f64::min)
    }

    /// `true` outside the closure of the domain; `None` within the band
    /// around the boundary where the sampled test is not trusted.
    pub fn is_exterior(&self, z: Complex64) -> Option<bool> {
        if self.boundary_distance(z) <= self.band {
            return None;
        }
        Some(self.winding_number(z) == 0)
    }

    fn require_exterior(&self, z: &Complex) -> Result<()> {
        match self.is_exterior(z.to_c64()) {
            Some(true) => Ok(()),
            _ => Err(Error::InsideDomain),
        }
    }

    /// No two non-adjacent edges of the sampled boundary intersect.
    pub fn is_simple(&self) -> bool {
        let b = &self.boundary;
        let n = b.len();
        for i in 0..n {
            let (p1, p2) = (b[i], b[(i + 1) % n]);
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                if segments_cross(p1, p2, b[j], b[(j + 1) % n]) {
                    return false;
                }
            }
        }
        true
    }

    /// `min |h'(e^{i theta})|` over `samples` equispaced angles.
    pub fn min_h_prime_on_circle(&self, samples: usize) -> f64 {
        let ctx = self.ctx();
        (0..samples)
            .map(|j| self.h_prime(&ctx.unit(2 * j as i64, samples as i64)).abs().to_f64())
            .fold(f64::INFINITY, f64::min)
    }

    fn measures(&self) -> Result<&EquilibriumMeasures> {
        self.measures
            .get_or_init(|| {
                let p = ModelParams::from_reals(
                    self.params.t0.with_bits(53),
                    self.params.t3.with_bits(53),
                    PrecisionContext::double(),
                )?;
                EquilibriumMeasures::new(&p)
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// `int_Omega dA(s) / (z - s)` over the radial scaling `s = u h(e^{i phi})`,
    /// `u in [0, 1]`, which has area element `u Im(conj(b) b') du dphi`.
    pub fn area_cauchy(&self, z: Complex64, grid: AreaGrid) -> Complex64 {
        let (r, a) = (self.conformal.r.to_f64(), self.conformal.a.to_f64());
        let radial = panel_nodes(&Real::from_f64(0.0, 53), &Real::from_f64(1.0, 53), grid.radial, 1);
        let radial: Vec<(f64, f64)> = radial.iter().map(|(u, w)| (u.to_f64(), w.to_f64())).collect();
        let step = std::f64::consts::TAU / grid.angular as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..grid.angular {
            let w = Complex64::from_polar(1.0, j as f64 * step);
            let b = r * w + a / (w * w);
            let db = Complex64::i() * w * (r - 2.0 * a / (w * w * w));
            let jac = (b.conj() * db).im;
            let inner: Complex64 = radial.iter().map(|&(u, wt)| wt * u / (z - u * b)).sum();
            acc += inner * jac;
        }
        acc * step
    }

    /// `|F1(z) - (1/(pi t0)) int_Omega dA / (z - s)|` for exterior `z`.
    pub fn exterior_potential_residual(&self, z: &Complex) -> Result<f64> {
        self.exterior_potential_residual_scaled(z, 1.0, AreaGrid::default())
    }

    /// Same with `t0` replaced by `scale * t0` in the area prefactor.
    pub fn exterior_potential_residual_scaled(&self, z: &Complex, scale: f64, grid: AreaGrid) -> Result<f64> {
        self.require_exterior(z)?;
        let f1 = self.measures()?.cauchy_mu1(&z.with_bits(53))?.to_c64();
        let area = self.area_cauchy(z.to_c64(), grid);
        let t0 = self.params.t0_f64() * scale;
        Ok((f1 - area / (std::f64::consts::PI * t0)).norm())
    }

    /// The unique preimage of an exterior `z` with `|w| > 1`.
    pub fn exterior_preimage(&self, z: &Complex) -> Result<Complex> {
        self.curve.exterior_preimage(&z.with_bits(self.ctx().bits()))
    }

    /// `M11(z) = v1(z) = (1 - 2a / (r w^3))^(-1/2)` with `w` the exterior
    /// preimage: the differential `d log v1` has residue `-1/2` at each
    /// critical point `w^3 = 2a/r`, `3/2` at `w = 0`, and `v1(inf) = 1`.
    pub fn m11(&self, z: &Complex) -> Result<Complex> {
        let w = self.exterior_preimage(z)?;
        let c = self.crit_cube();
        let inner = Complex::from_real(w.one_like().re) - (&Complex::from_real(c) / &w.powi(3));
        Ok(inner.sqrt().recip())
    }

    /// `M11` by integrating `d log v1` from `w = inf` along `w0 / u`:
    /// `log v1 = int_0^1 (3c/2) u^2 / (w0^3 - c u^3) du`, `c = 2a/r`.
    pub fn m11_by_path(&self, z: &Complex) -> Result<Complex> {
        let w0 = self.exterior_preimage(z)?;
        let c = self.crit_cube();
        let w3 = w0.powi(3);
        let bits = self.ctx().bits();
        // the integrand's poles sit at |u| = |w0| / rho_crit; grade toward u = 1
        let gap = (w0.abs().to_f64() / self.conformal.rho_crit.to_f64() - 1.0).max(1e-30);
        let levels = ((1.0 / gap).log2().ceil().max(0.0) as usize + 2).min(120);
        let order = 20 + bits / 8;
        let zero = Real::from_f64(0.0, bits);
        let one = Real::from_f64(1.0, bits);
        let mut acc = w0.zero_like();
        for (lo, hi) in graded_intervals(&zero, &one, false, levels) {
            for (u, wt) in panel_nodes(&lo, &hi, order, 1) {
                let u2 = u.square();
                let den = &w3 - &Complex::from_real(&u2 * &u * &c);
                acc += &Complex::from_real(&u2 * &c * 1.5 * &wt) / &den;
            }
        }
        Ok(acc.exp())
    }

    fn crit_cube(&self) -> Real {
        &self.conformal.a * 2.0 / &self.conformal.r
    }

    pub fn is_critical(&self) -> bool {
        self.params.regime == Regime::Critical
    }
}

fn segment_distance(z: Complex64, p: Complex64, q: Complex64) -> f64 {
    let d = q - p;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (z - p).norm();
    }
    let t = (((z - p) * d.conj()).re / len2).clamp(0.0, 1.0);
    (z - (p + d * t)).norm()
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

/// Proper crossing of the closed segments `[p1, p2]` and `[q1, q2]`.
fn segments_cross(p1: Complex64, p2: Complex64, q1: Complex64, q2: Complex64) -> bool {
    let d1 = cross(p2 - p1, q1 - p1);
    let d2 = cross(p2 - p1, q2 - p1);
    let d3 = cross(q2 - q1, p1 - q1);
    let d4 = cross(q2 - q1, p2 - q1);
    d1 * d2 <= 0.0 && d3 * d4 <= 0.0 && !(d1 == 0.0 && d2 == 0.0)
}

pub fn area(domain: &GrowthDomain) -> Real {
    domain.area()
}

pub fn harmonic_moment(k: u32, domain: &GrowthDomain) -> Result<Complex> {
    domain.harmonic_moment(k)
}

pub fn schwarz_residual(theta: &Real, domain: &GrowthDomain) -> Result<f64> {
    domain.schwarz_residual(theta)
}

pub fn exterior_potential_residual(z: &Complex, domain: &GrowthDomain) -> Result<f64> {
    domain.exterior_potential_residual(z)
}

pub fn m11(z: &Complex, domain: &GrowthDomain) -> Result<Complex> {
    domain.m11(z)
}

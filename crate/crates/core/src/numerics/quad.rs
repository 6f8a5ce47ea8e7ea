//! Gauss-Legendre rules, composite panels and mapped rays.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use super::{Complex, PrecisionContext, Real};
use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub struct GaussRule {
    pub x: Vec<Real>,
    pub w: Vec<Real>,
}

thread_local! {
    static RULES: RefCell<HashMap<(usize, usize), Rc<GaussRule>>> = RefCell::new(HashMap::new());
}

fn legendre_with_derivative(n: usize, x: &Real) -> (Real, Real) {
    let mut p0 = x.one_like();
    let mut p1 = x.clone();
    for k in 1..n {
        let kf = k as f64;
        let p2 = (x * &p1 * (2.0 * kf + 1.0) - &p0 * kf) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    // P_n' = n (x P_n - P_{n-1}) / (x^2 - 1)
    let d = (x * &p1 - &p0) * (n as f64) / (x.square() - 1.0);
    (p1, d)
}

fn legendre_f64(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

fn build_rule(n: usize, bits: usize) -> GaussRule {
    let mut x = vec![Real::from_f64(0.0, bits); n];
    let mut w = vec![Real::from_f64(0.0, bits); n];
    let eps = 2f64.powi(-(bits.min(2000) as i32));
    for k in 0..n.div_ceil(2) {
        let mut g = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_f64(n, g);
            let dx = p / d;
            g -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let mut r = Real::from_f64(g, bits);
        if bits > 53 {
            for _ in 0..40 {
                let (p, d) = legendre_with_derivative(n, &r);
                let dx = &p / &d;
                r -= &dx;
                if dx.abs().to_f64() <= eps * 4.0 {
                    break;
                }
            }
        }
        let (_, d) = legendre_with_derivative(n, &r);
        let wk = 2.0 / ((1.0 - r.square()) * d.square());
        // nodes come out in descending order; store ascending
        let lo = k;
        let hi = n - 1 - k;
        x[hi] = r.clone();
        w[hi] = wk.clone();
        if lo != hi {
            x[lo] = -r;
            w[lo] = wk;
        } else {
            x[lo] = x[lo].zero_like();
        }
    }
    GaussRule { x, w }
}

/// Cached `n`-point Gauss-Legendre rule at `bits` precision.
pub fn gauss_legendre(n: usize, bits: usize) -> Rc<GaussRule> {
    let n = n.max(1);
    RULES.with(|m| {
        m.borrow_mut().entry((n, bits)).or_insert_with(|| Rc::new(build_rule(n, bits))).clone()
    })
}

/// Values that can be integrated: real or complex.
pub trait QuadValue: Clone {
    fn zero(bits: usize) -> Self;
    fn add_scaled(&mut self, w: &Real, v: &Self);
    fn dist(&self, other: &Self) -> f64;
    fn is_finite_value(&self) -> bool;
    fn magnitude(&self) -> f64;
}

impl QuadValue for Real {
    fn zero(bits: usize) -> Self {
        Real::from_f64(0.0, bits)
    }
    fn add_scaled(&mut self, w: &Real, v: &Self) {
        *self += w * v;
    }
    fn dist(&self, other: &Self) -> f64 {
        (self - other).abs().to_f64()
    }
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
    fn magnitude(&self) -> f64 {
        self.abs().to_f64()
    }
}

impl QuadValue for Complex {
    fn zero(bits: usize) -> Self {
        Complex::from_f64(0.0, 0.0, bits)
    }
    fn add_scaled(&mut self, w: &Real, v: &Self) {
        self.re += w * &v.re;
        self.im += w * &v.im;
    }
    fn dist(&self, other: &Self) -> f64 {
        (self - other).abs().to_f64()
    }
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
    fn magnitude(&self) -> f64 {
        self.abs().to_f64()
    }
}

/// A value together with an error estimate.
#[derive(Clone, Debug)]
pub struct Estimate<V> {
    pub value: V,
    pub error: f64,
}

/// Composite Gauss-Legendre nodes on the real interval `[a, b]`.
pub fn panel_nodes(a: &Real, b: &Real, order: usize, panels: usize) -> Vec<(Real, Real)> {
    let bits = a.bits().max(b.bits());
    let rule = gauss_legendre(order, bits);
    let panels = panels.max(1);
    let h = (b - a) / (panels as f64);
    let half = &h * 0.5;
    let mut out = Vec::with_capacity(order * panels);
    for p in 0..panels {
        let mid = a + &h * (p as f64 + 0.5);
        for (x, w) in rule.x.iter().zip(&rule.w) {
            out.push((&mid + &half * x, &half * w));
        }
    }
    out
}

/// Sub-intervals of `[a, b]` refined geometrically toward `a` (if `toward_a`)
/// or toward `b`; each level halves the distance to the refined end.
pub fn graded_intervals(a: &Real, b: &Real, toward_a: bool, levels: usize) -> Vec<(Real, Real)> {
    let mut cuts = Vec::with_capacity(levels + 2);
    let len = b - a;
    let mut frac = a.one_like();
    for _ in 0..levels {
        frac *= 0.5;
        cuts.push(frac.clone());
    }
    let mut out = Vec::with_capacity(levels + 1);
    if toward_a {
        // [a, a + f_L len], ..., [a + len/2, b]
        let mut prev = a.clone();
        for f in cuts.iter().rev() {
            let next = a + &len * f;
            out.push((prev, next.clone()));
            prev = next;
        }
        out.push((prev, b.clone()));
    } else {
        let mut prev = a.clone();
        for f in &cuts {
            let next = b - &len * f;
            out.push((prev, next.clone()));
            prev = next;
        }
        out.push((prev, b.clone()));
    }
    out
}

/// Sum `w_i f(t_i)` over precomputed nodes, failing on non-finite values.
pub fn integrate<V: QuadValue>(
    nodes: &[(Real, Real)],
    bits: usize,
    mut f: impl FnMut(&Real) -> Result<V>,
) -> Result<V> {
    let mut acc = V::zero(bits);
    for (t, w) in nodes {
        let v = f(t)?;
        if !v.is_finite_value() {
            return Err(Error::EvaluationFailure(format!("integrand at t = {:e}", t.to_f64())));
        }
        acc.add_scaled(w, &v);
    }
    Ok(acc)
}

/// Quadrature rule descriptions.
#[derive(Clone, Debug, PartialEq)]
pub enum QuadratureRule {
    /// Composite Gauss-Legendre with `panels` equal panels of `order` points.
    Segment { order: usize, panels: usize },
    /// Ray rule `t = scale (e^u - 1)`, truncated where the declared envelope
    /// `m exp(-kappa t^{3/2})` drops the tail below `tol`.
    MappedRay { order: usize, panels: usize, scale: f64, m: f64, kappa: f64, tol: f64 },
}

impl QuadratureRule {
    pub fn segment(order: usize) -> QuadratureRule {
        QuadratureRule::Segment { order, panels: 1 }
    }

    pub fn node_count(&self) -> usize {
        match self {
            QuadratureRule::Segment { order, panels } => order * panels,
            QuadratureRule::MappedRay { order, panels, .. } => order * panels,
        }
    }
}

fn complex_segment(
    f: &mut impl FnMut(&Complex) -> Result<Complex>,
    a: &Complex,
    b: &Complex,
    order: usize,
    panels: usize,
    bits: usize,
) -> Result<Complex> {
    let zero = Real::from_f64(0.0, bits);
    let one = Real::from_f64(1.0, bits);
    let nodes = panel_nodes(&zero, &one, order, panels);
    let d = b - a;
    let mut acc = Complex::zero(bits);
    for (t, w) in &nodes {
        let z = a + &d.scale(t);
        let v = f(&z)?;
        if !v.is_finite() {
            return Err(Error::EvaluationFailure(format!("segment integrand at {:?}", z.to_c64())));
        }
        acc.add_scaled(w, &v);
    }
    Ok(&acc * &d)
}

/// Integral of `f` over the straight segment `[a, b]`. The returned estimate is
/// the difference between the rule and the rule with doubled panel count; the
/// value is the refined one.
pub fn quad_segment(
    mut f: impl FnMut(&Complex) -> Result<Complex>,
    a: &Complex,
    b: &Complex,
    rule: &QuadratureRule,
    ctx: &PrecisionContext,
) -> Result<Estimate<Complex>> {
    let (order, panels) = match rule {
        QuadratureRule::Segment { order, panels } => (*order, *panels),
        _ => return Err(Error::InvalidParameters("quad_segment needs a segment rule".into())),
    };
    if order < 1 {
        return Err(Error::InvalidParameters("rule needs at least one node".into()));
    }
    let coarse = complex_segment(&mut f, a, b, order, panels, ctx.bits())?;
    let fine = complex_segment(&mut f, a, b, order, 2 * panels, ctx.bits())?;
    let error = (&fine - &coarse).abs().to_f64();
    Ok(Estimate { value: fine, error })
}

/// Truncation radius where `m * int_R^inf exp(-kappa t^{3/2}) dt < tol`,
/// together with the bound itself (natural log).
fn ray_truncation(m: f64, kappa: f64, tol: f64) -> (f64, f64) {
    let log_tail = |r: f64| m.ln() - kappa * r.powf(1.5) - (1.5 * kappa * r.sqrt()).ln();
    let target = tol.ln();
    let mut r = 1.0;
    while log_tail(r) > target {
        r *= 1.25;
    }
    (r, log_tail(r))
}

/// Mapped-ray nodes: `t = scale (e^u - 1)` on `u in [0, ln(1 + R/scale)]`.
/// Returns `(t, weight)` pairs with the Jacobian folded into the weight.
pub fn ray_nodes(r: &Real, scale: &Real, order: usize, panels: usize) -> Vec<(Real, Real)> {
    let umax = (r / scale + 1.0).ln();
    let zero = umax.zero_like();
    panel_nodes(&zero, &umax, order, panels)
        .into_iter()
        .map(|(u, w)| {
            let eu = u.exp();
            let t = scale * (&eu - 1.0);
            (t, w * scale * eu)
        })
        .collect()
}

/// Integral of `f` along `origin + t * direction`, `t >= 0`. The caller declares
/// an envelope `|f| <= m exp(-kappa t^{3/2})`; sampled violations are reported.
pub fn quad_ray(
    mut f: impl FnMut(&Complex) -> Result<Complex>,
    origin: &Complex,
    direction: &Complex,
    rule: &QuadratureRule,
    ctx: &PrecisionContext,
) -> Result<Estimate<Complex>> {
    let (order, panels, scale, m, kappa, tol) = match rule {
        QuadratureRule::MappedRay { order, panels, scale, m, kappa, tol } => {
            (*order, *panels, *scale, *m, *kappa, *tol)
        }
        _ => return Err(Error::InvalidParameters("quad_ray needs a mapped-ray rule".into())),
    };
    if !(m > 0.0 && kappa > 0.0 && tol > 0.0 && scale > 0.0) {
        return Err(Error::InvalidParameters("ray envelope must be positive".into()));
    }
    let bits = ctx.bits();
    let (r, log_tail) = ray_truncation(m, kappa, tol);
    let rr = Real::from_f64(r, bits);
    let sc = Real::from_f64(scale, bits);
    let mut run = |panels: usize| -> Result<Complex> {
        let mut acc = Complex::zero(bits);
        for (t, w) in ray_nodes(&rr, &sc, order, panels) {
            let z = origin + &direction.scale(&t);
            let v = f(&z)?;
            if !v.is_finite() {
                return Err(Error::EvaluationFailure(format!("ray integrand at t = {:e}", t.to_f64())));
            }
            let tf = t.to_f64();
            let bound = m.ln() - kappa * tf.powf(1.5);
            let mag = v.abs();
            if !mag.is_zero() {
                let lm = mag.ln().to_f64();
                if lm > bound + 1e-9 * (1.0 + bound.abs()) {
                    return Err(Error::TailBoundViolation { t: tf });
                }
            }
            acc.add_scaled(&w, &v);
        }
        Ok(&acc * direction)
    };
    let coarse = run(panels)?;
    let fine = run(2 * panels)?;
    let error = (&fine - &coarse).abs().to_f64() + log_tail.exp();
    Ok(Estimate { value: fine, error })
}

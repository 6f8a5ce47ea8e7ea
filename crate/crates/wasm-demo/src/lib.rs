//! Browser bindings: three quick double-precision views of the model for the
//! static page in `www/`. The plain functions return `cubicmm` errors so they
//! can be tested natively; the exported wrappers turn them into JS errors.

use cubicmm::curve::{curve_constants, ModelParams, Regime};
use cubicmm::growth::GrowthDomain;
use cubicmm::measures::EquilibriumMeasures;
use cubicmm::{PrecisionContext, Result};
use num_complex::Complex64;
use wasm_bindgen::prelude::*;

fn params(t0: f64, t3: f64) -> Result<ModelParams> {
    ModelParams::new(t0, t3, PrecisionContext::double())
}

/// `[regime, x_star, x_hat, t0_crit]` with regime 0 subcritical, 1 critical.
pub fn curve_summary(t0: f64, t3: f64) -> Result<Vec<f64>> {
    let p = params(t0, t3)?;
    let k = curve_constants(&p)?;
    let regime = if p.regime == Regime::Critical { 1.0 } else { 0.0 };
    Ok(vec![regime, k.x_star.to_f64(), k.x_hat.to_f64(), k.t0_crit.to_f64()])
}

/// Boundary of the growth domain as interleaved `x, y` pairs.
pub fn boundary_points(t0: f64, t3: f64, samples: usize) -> Result<Vec<f64>> {
    let d = GrowthDomain::with_samples(&params(t0, t3)?, samples)?;
    Ok(d.boundary.iter().flat_map(|z| [z.re, z.im]).collect())
}

/// First density on `(0, x_star)` as interleaved `s, density` pairs.
pub fn first_density(t0: f64, t3: f64, samples: usize) -> Result<Vec<f64>> {
    let p = params(t0, t3)?;
    let m = EquilibriumMeasures::new(&p)?;
    let xs = m.x_star().to_f64();
    let n = samples.max(2);
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        // open interval: stay off both endpoints
        let s = xs * (i as f64 + 0.5) / n as f64;
        out.push(s);
        out.push(m.density_mu1(&p.ctx().real(s))?.to_f64());
    }
    Ok(out)
}

/// Sign of `Re phi1` on a `grid x grid` square: `[half_width, s(0,0), s(1,0), ...]`
/// with `x` varying fastest from the bottom-left corner; failed cells are 0.
pub fn phi1_signs(t0: f64, t3: f64, grid: usize) -> Result<Vec<f64>> {
    let m = EquilibriumMeasures::new(&params(t0, t3)?)?;
    let half = m.re_phi1_window()?;
    let h = 2.0 * half / grid as f64;
    let mut out = Vec::with_capacity(grid * grid + 1);
    out.push(half);
    for j in 0..grid {
        for i in 0..grid {
            let z = Complex64::new(-half + (i as f64 + 0.5) * h, -half + (j as f64 + 0.5) * h);
            out.push(m.re_phi1(z).map(f64::signum).unwrap_or(0.0));
        }
    }
    Ok(out)
}

fn js<T>(r: Result<T>) -> std::result::Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = curveSummary)]
pub fn curve_summary_js(t0: f64, t3: f64) -> std::result::Result<Vec<f64>, JsError> {
    js(curve_summary(t0, t3))
}

#[wasm_bindgen(js_name = boundaryPoints)]
pub fn boundary_points_js(t0: f64, t3: f64, samples: usize) -> std::result::Result<Vec<f64>, JsError> {
    js(boundary_points(t0, t3, samples))
}

#[wasm_bindgen(js_name = firstDensity)]
pub fn first_density_js(t0: f64, t3: f64, samples: usize) -> std::result::Result<Vec<f64>, JsError> {
    js(first_density(t0, t3, samples))
}

#[wasm_bindgen(js_name = phi1Signs)]
pub fn phi1_signs_js(t0: f64, t3: f64, grid: usize) -> std::result::Result<Vec<f64>, JsError> {
    js(phi1_signs(t0, t3, grid))
}

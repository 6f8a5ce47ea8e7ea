use std::f64::consts::PI;
use std::time::Instant;

use cubicmm::curve::{curve_constants, discriminant_zeta, xi_branches, Regime};
use cubicmm::growth::{conformal_coeffs, GrowthDomain};
use cubicmm::measures::EquilibriumMeasures;
use cubicmm::orthopoly::{orthopoly, zero_diagnostics, AsymptoticModel, ContourConfig};
use cubicmm::{Complex, PrecisionContext, Real};
use serde_json::json;

use crate::checks;
use crate::report::{closed, cnum, dec, dec64, exact, num, num64, Check, Report, Table};
use crate::{CliError, Measure, RunConfig, Suite};

pub const DEFAULT_DENSITY_SAMPLES: usize = 2001;
pub const DEFAULT_PHI_GRID: usize = 60;
pub const DEFAULT_ORTHO_N: usize = 12;

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::Subcritical => "subcritical",
        Regime::Critical => "critical",
        _ => "supercritical",
    }
}

fn base_report(name: &str, cfg: &RunConfig) -> Report {
    let mut r = Report::new(name);
    r.input("t0", cfg.t0.clone());
    r.input("t3", cfg.t3.clone());
    r.input("bits", cfg.bits);
    r
}

fn finish(mut r: Report, start: Instant) -> Report {
    r.wall_time = start.elapsed();
    r
}

/// Constants of the spectral curve, the discriminant roots and the node check.
pub fn cmd_curve(cfg: &RunConfig) -> Result<Report, CliError> {
    let start = Instant::now();
    let params = cfg.params()?;
    let mut rep = base_report("curve", cfg);
    let k = curve_constants(&params)?;
    let conf = conformal_coeffs(&params)?;
    let disc = discriminant_zeta(&params)?;
    rep.output("regime", exact(regime_name(params.regime)));
    rep.output("t0_crit", closed(&k.t0_crit));
    rep.output("x_star", closed(&k.x_star));
    rep.output("x_hat", closed(&k.x_hat));
    rep.output("A", closed(&k.a_const));
    rep.output("r", closed(&conf.r));
    rep.output("a", closed(&conf.a));
    rep.output("rho_crit", closed(&conf.rho_crit));
    let eps = params.ctx().eps();
    // a double root carries about half the digits, a triple root a third
    let root_err = if params.regime == Regime::Critical { eps.cbrt() } else { eps.sqrt() };
    let roots: Vec<_> = disc.roots.iter().map(|z| cnum(z, root_err * z.magnitude().max(1.0))).collect();
    rep.output("discriminant_roots", json!(roots));
    rep.output("discriminant_pattern_residual", exact(dec64(disc.pattern_residual)));
    rep.checks.extend(checks::discriminant(&params));
    rep.checks.extend(checks::node_identity(&params));

    rep.table = Table::new(&["quantity", "value", "err"]);
    for key in ["t0_crit", "x_star", "x_hat", "A", "r", "a", "rho_crit"] {
        let v = &rep.outputs[key];
        let row = vec![key.to_string(), v["value"].as_str().unwrap_or_default().to_string(), v["err"].as_str().unwrap_or_default().to_string()];
        rep.table.push(row);
    }
    Ok(finish(rep, start))
}

/// Sample points for the first density: cosine-clustered toward both ends of
/// `(0, x_star (1 - 1e-6)]`, so the trapezoid rule resolves the square-root edge.
fn mu1_grid(x_star: &Real, samples: usize) -> Vec<Real> {
    let top = x_star * (1.0 - 1e-6);
    let n = samples.max(2);
    (0..n)
        .map(|i| {
            if i == 0 {
                return &top * 1e-12;
            }
            let th = PI * i as f64 / (n - 1) as f64;
            &top * ((1.0 - th.cos()) / 2.0)
        })
        .collect()
}

fn trapezoid(s: &[f64], v: &[f64]) -> f64 {
    s.windows(2).zip(v.windows(2)).map(|(s, v)| (s[1] - s[0]) * (v[0] + v[1]) / 2.0).sum()
}

/// Density of one measure on the positive ray (all rays agree).
pub fn cmd_density(cfg: &RunConfig, which: Measure) -> Result<Report, CliError> {
    let start = Instant::now();
    let params = cfg.params()?;
    let m = EquilibriumMeasures::with_settings(&params, cfg.quad_settings())?;
    let samples = cfg.samples.unwrap_or(DEFAULT_DENSITY_SAMPLES);
    if samples < 2 {
        return Err(CliError::Usage("--samples must be at least 2".into()));
    }
    let mut rep = base_report("density", cfg);
    rep.input("measure", if which == Measure::Mu1 { "mu1" } else { "mu2" });
    rep.input("samples", samples);
    rep.table = Table::new(&["s", "density", "err"]);
    let mut s64 = Vec::with_capacity(samples);
    let mut v64 = Vec::with_capacity(samples);
    match which {
        Measure::Mu1 => {
            for s in mu1_grid(m.x_star(), samples) {
                let d = m.density_mu1_sample(&s)?;
                s64.push(s.to_f64());
                v64.push(d.value.to_f64());
                rep.table.push(vec![dec(&s), dec(&d.value), dec64(d.error)]);
            }
            let mass = m.mass_mu1();
            let trap = trapezoid(&s64, &v64);
            rep.output("x_star", closed(m.x_star()));
            rep.output("mass", num(&mass.value, mass.error));
            rep.output("trapezoid_mass_per_ray", num64(trap, (trap - 1.0 / 3.0).abs()));
            let exponent = m.endpoint_exponent();
            rep.output("endpoint_exponent", num64(exponent, 0.0));
            let monotone = v64.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
            rep.output("monotone_decreasing", exact(monotone));
            rep.checks.push(Check::below("trapezoid mass per ray = 1/3", (trap - 1.0 / 3.0).abs(), 1e-6));
            rep.checks.push(Check::holds(
                "density falls toward x_star",
                v64[samples - 1] < v64[0],
                format!("{} -> {}", dec64(v64[0]), dec64(v64[samples - 1])),
                "last < first",
            ));
        }
        Measure::Mu2 => {
            let r = m.r_tail().clone();
            for i in 0..samples {
                let u = (i + 1) as f64 / samples as f64;
                let s = &r * (u * u);
                let d = m.density_mu2_sample(&s, 0)?;
                s64.push(s.to_f64());
                v64.push(d.value.to_f64());
                rep.table.push(vec![dec(&s), dec(&d.value), dec64(d.error)]);
            }
            let mass = m.mass_mu2()?;
            rep.output("r_tail", closed(&r));
            rep.output("mass", num(&mass.value, mass.error));
            rep.output("tail_exponent", num64(m.tail_exponent()?, 0.0));
            rep.checks.push(Check::below("mass of second measure = 1/2", (mass.value.to_f64() - 0.5).abs(), 1e-6));
            rep.checks.push(Check::holds(
                "density positive",
                v64.iter().all(|&v| v > 0.0),
                format!("min {}", dec64(v64.iter().cloned().fold(f64::INFINITY, f64::min))),
                "> 0",
            ));
        }
    }
    Ok(finish(rep, start))
}

/// Boundary of the growth domain with its area, moments and Schwarz residual.
pub fn cmd_domain(cfg: &RunConfig) -> Result<Report, CliError> {
    let start = Instant::now();
    let params = cfg.params()?;
    let samples = cfg.samples.unwrap_or(cubicmm::growth::BOUNDARY_SAMPLES);
    if samples < 16 {
        return Err(CliError::Usage("--samples must be at least 16".into()));
    }
    let d = GrowthDomain::with_samples(&params, samples)?;
    let mut rep = base_report("domain", cfg);
    rep.input("samples", samples);
    let bits = params.ctx().bits();
    let area = d.area();
    let area_err = (&area - &d.area_closed_form()).abs().to_f64();
    rep.output("regime", exact(regime_name(params.regime)));
    rep.output("r", closed(&d.conformal.r));
    rep.output("a", closed(&d.conformal.a));
    rep.output("rho_crit", closed(&d.conformal.rho_crit));
    rep.output("area", num(&area, area_err));
    rep.output("area_over_pi", num(&(&area / &params.ctx().pi()), area_err / PI));
    let mut moments = Vec::new();
    for k in 1..=6u32 {
        let m = d.harmonic_moment(k)?;
        moments.push(json!({ "k": k, "re": dec(&m.re), "im": dec(&m.im), "err": dec64(2f64.powi(8 - bits as i32)) }));
    }
    rep.output("moments", json!(moments));
    let (schwarz, cusps_skipped) = checks::schwarz_max(&d);
    rep.output("schwarz_max_residual", num64(schwarz, 0.0));
    rep.output("schwarz_points_skipped", exact(cusps_skipped));
    let min_hp = d.min_h_prime_on_circle(3000);
    rep.output("min_h_prime", num64(min_hp, 0.0));
    rep.output("cusps", exact(min_hp < 1e-6));
    rep.checks.extend(checks::domain_identities(&params, &d, schwarz));

    rep.table = Table::new(&["x", "y"]);
    for z in &d.boundary {
        rep.table.push(vec![dec64(z.re), dec64(z.im)]);
    }
    Ok(finish(rep, start))
}

/// Multiple orthogonal polynomial of degree `n` with its zeros.
pub fn cmd_ortho(cfg: &RunConfig) -> Result<Report, CliError> {
    let start = Instant::now();
    let n = cfg.n.unwrap_or(DEFAULT_ORTHO_N);
    if n == 0 {
        return Err(CliError::Usage("--n must be positive".into()));
    }
    let bits = cfg.bits.max(PrecisionContext::for_degree(n).bits());
    let ctx = PrecisionContext::new(bits).map_err(|_| CliError::Usage("--bits must be at least 64".into()))?;
    let params = cfg.params_at(ctx)?;
    let mut rep = base_report("ortho", cfg);
    rep.input("n", n);
    rep.output("working_bits", exact(bits));
    if n % 2 == 1 {
        rep.warnings.push("asymptotics unsupported for odd n".into());
    }
    let p = orthopoly(n, &params, &ContourConfig::stokes(), &ctx)?;
    let diag = zero_diagnostics(&p, &params)?;
    let err = p.residual;
    rep.output("coeffs", json!(p.coeffs.iter().map(|c| cnum(c, err * c.magnitude().max(1.0))).collect::<Vec<_>>()));
    let zeros: Vec<_> = p.zeros.iter().map(|z| cnum(z, 0.0)).collect();
    rep.output("zeros", json!(zeros));
    rep.output("max_dist_sigma1", num64(diag.max_dist_to_sigma1, 0.0));
    rep.output("rotation_mismatch", num64(diag.rotation_mismatch, 0.0));
    rep.output("system_residual", exact(dec64(p.residual)));
    rep.output("sparsity", exact(dec64(p.sparsity())));
    rep.checks.push(Check::below("coefficient sparsity", p.sparsity(), 1e-20));
    rep.checks.push(Check::below("zero set omega-invariant", diag.rotation_mismatch, 1e-12));
    if n % 2 == 0 && params.regime == Regime::Subcritical {
        let model = AsymptoticModel::new(&params)?;
        let pts = cubicmm::orthopoly::exterior_testpoints(&params, 12)?;
        let lp = model.log_potential_residual(&p, &pts)?;
        let st = model.strong_residual_scaled(&p, &pts, 1.0)?;
        rep.output("log_potential_residual", num64(lp, 0.0));
        rep.output("strong_residual", json!({ "sup": dec64(st.sup), "normalized": dec64(st.normalized), "exact": false }));
    }
    rep.table = Table::new(&["re", "im"]);
    for z in &p.zeros {
        rep.table.push(vec![dec(&z.re), dec(&z.im)]);
    }
    Ok(finish(rep, start))
}

/// Sign of `Re phi1` on a square grid, plus point checks of its topology.
pub fn cmd_phi_field(cfg: &RunConfig) -> Result<Report, CliError> {
    let start = Instant::now();
    // the field is a sign chart: double precision is ample and keeps grids cheap
    let params = cfg.params_at(PrecisionContext::double())?;
    if params.regime != Regime::Subcritical {
        return Err(cubicmm::Error::CriticalRegime.into());
    }
    let m = EquilibriumMeasures::with_settings(&params, cfg.quad_settings())?;
    let grid = cfg.samples.unwrap_or(DEFAULT_PHI_GRID);
    if grid < 4 {
        return Err(CliError::Usage("--samples must be at least 4".into()));
    }
    let half = m.re_phi1_window()?;
    let mut rep = base_report("phi-field", cfg);
    rep.input("samples", grid);
    rep.output("precision", exact("double"));
    rep.output("half_width", num64(half, 0.0));
    let field = checks::PhiField::sample(&m, grid, half)?;
    rep.table = Table::new(&["x", "y", "sign", "re_phi1"]);
    for (i, row) in field.values.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let (x, y) = field.point(i, j);
            rep.table.push(vec![dec64(x), dec64(y), format!("{}", checks::sign(*v)), dec64(*v)]);
        }
    }
    rep.output("negative_cells", exact(field.count(-1)));
    rep.output("positive_cells", exact(field.count(1)));
    rep.checks.extend(checks::phi_topology(&m, &field));
    Ok(finish(rep, start))
}

/// Verification suite; the report fails when any check fails.
pub fn cmd_verify(cfg: &RunConfig, suite: Suite) -> Result<Report, CliError> {
    let start = Instant::now();
    // fail early on bad input so that usage errors keep their exit code
    let params = cfg.params()?;
    curve_constants(&params)?;
    let mut rep = base_report("verify", cfg);
    rep.input("suite", if suite == Suite::Fast { "fast" } else { "full" });
    rep.input("seed", cfg.seed);
    let (checks, skipped) = checks::suite(cfg, suite);
    rep.checks = checks;
    rep.warnings.extend(skipped.into_iter().map(|s| format!("skipped: {s}")));
    rep.output("checks_run", exact(rep.checks.len()));
    rep.output("checks_failed", exact(rep.failures().count()));
    rep.table = Table::new(&["check", "pass", "measured", "limit"]);
    for c in &rep.checks {
        rep.table.push(vec![c.name.clone(), c.pass.to_string(), c.measured.clone(), c.limit.clone()]);
    }
    Ok(finish(rep, start))
}

/// `xi1, xi2` at the node, for reporting.
pub fn node_branches(params: &cubicmm::curve::ModelParams) -> cubicmm::Result<(Complex, Complex, Real)> {
    let k = curve_constants(params)?;
    let xh = Complex::from_real(k.x_hat.clone());
    let b = xi_branches(&xh, params)?;
    Ok((b.xi[0].clone(), b.xi[1].clone(), k.x_hat))
}

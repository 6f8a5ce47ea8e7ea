//! Brute-force solver for the discretized vector equilibrium problem.
//!
//! Both measures are piecewise constant on cells of one ray and copied to the
//! other two. Three-fold symmetry collapses the pair sums over rays, so the
//! energy becomes the quadratic form
//!
//! `E(P, Q) = (P K11 P + Q K22 Q - P K12 Q) / 3 + P . f`
//!
//! in the total cell masses `P` (sum 1) and `Q` (sum 1/2). The kernels are the
//! exact cell averages used by [`measures::energy`](crate::measures::energy),
//! so both agree on the same cell measures up to the field term (node value
//! here, cell average there).

use crate::curve::{curve_constants, ModelParams, Regime};
use crate::error::{Error, Result};
use crate::measures::{geometric_edges, mean_log_distance, CellMeasure, Support};

/// Diagonal convention, reported with every problem.
pub const DIAGONAL_CONVENTION: &str =
    "self-cell log average is exact for a uniform density: mean ln|x - y| over a cell of width h is ln h - 3/2";

/// Growth ratio of consecutive second-measure cells.
pub const MU2_GROWTH: f64 = 1.05;

#[derive(Clone, Debug)]
pub struct DiscretizedProblem {
    pub t0: f64,
    pub t3: f64,
    pub n1: usize,
    pub n2: usize,
    pub edges1: Vec<f64>,
    pub edges2: Vec<f64>,
    /// Cell midpoints.
    pub nodes1: Vec<f64>,
    pub nodes2: Vec<f64>,
    /// `-sum_k mean ln|x - omega^k y|`, row-major `n1 x n1`.
    pub k11: Vec<f64>,
    /// Same on the second support, `n2 x n2`.
    pub k22: Vec<f64>,
    /// `-sum_k mean ln|x + omega^k y|`, row-major `n1 x n2`.
    pub k12: Vec<f64>,
    /// External field at `nodes1`.
    pub field: Vec<f64>,
    pub masses: (f64, f64),
    pub r_tail: f64,
    pub metadata: String,
}

/// Symmetry-collapsed kernel between cells `[a, b]` and `[c, d]` whose rays
/// differ by `offset` (0 for the same support, `pi/3` across supports).
fn collapsed(offset: f64, a: f64, b: f64, c: f64, d: f64) -> f64 {
    let third = 2.0 * std::f64::consts::PI / 3.0;
    -(0..3).map(|k| mean_log_distance(offset + third * k as f64, a, b, c, d)).sum::<f64>()
}

fn field_at(t0: f64, t3: f64, x: f64) -> f64 {
    (2.0 / (3.0 * t3.sqrt()) * x.powf(1.5) - t3 / 3.0 * x.powi(3)) / t0
}

/// Uniform cells on `[0, x_star]` for the first measure, geometric cells
/// (growth 1.05) on `[0, r_tail]` for the second. `r_tail` defaults to `50 x_star`.
pub fn build_problem(params: &ModelParams, n1: usize, n2: usize, r_tail: Option<f64>) -> Result<DiscretizedProblem> {
    match params.regime {
        Regime::Subcritical => {}
        Regime::Critical => return Err(Error::CriticalRegime),
        Regime::Supercritical => params.require_not_supercritical()?,
    }
    if n1 < 16 || n2 < 16 {
        return Err(Error::InvalidParameters(format!("need at least 16 cells per measure, got ({n1}, {n2})")));
    }
    let x_star = curve_constants(params)?.x_star.to_f64();
    let r_tail = r_tail.unwrap_or(50.0 * x_star);
    if !(r_tail > x_star) {
        return Err(Error::InvalidParameters("r_tail must exceed x_star".into()));
    }
    let (t0, t3) = (params.t0_f64(), params.t3_f64());
    let edges1: Vec<f64> = (0..=n1).map(|k| x_star * k as f64 / n1 as f64).collect();
    let edges2 = geometric_edges(r_tail, n2, MU2_GROWTH);
    let mid = |e: &[f64]| e.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect::<Vec<f64>>();
    let (nodes1, nodes2) = (mid(&edges1), mid(&edges2));

    let mut k11 = vec![0.0; n1 * n1];
    for i in 0..n1 {
        for j in i..n1 {
            let v = collapsed(0.0, edges1[i], edges1[i + 1], edges1[j], edges1[j + 1]);
            k11[i * n1 + j] = v;
            k11[j * n1 + i] = v;
        }
    }
    let mut k22 = vec![0.0; n2 * n2];
    for i in 0..n2 {
        for j in i..n2 {
            let v = collapsed(0.0, edges2[i], edges2[i + 1], edges2[j], edges2[j + 1]);
            k22[i * n2 + j] = v;
            k22[j * n2 + i] = v;
        }
    }
    let offset = std::f64::consts::PI / 3.0;
    let mut k12 = vec![0.0; n1 * n2];
    for i in 0..n1 {
        for j in 0..n2 {
            k12[i * n2 + j] = collapsed(offset, edges1[i], edges1[i + 1], edges2[j], edges2[j + 1]);
        }
    }
    let field = nodes1.iter().map(|&x| field_at(t0, t3, x)).collect();
    Ok(DiscretizedProblem {
        t0,
        t3,
        n1,
        n2,
        edges1,
        edges2,
        nodes1,
        nodes2,
        k11,
        k22,
        k12,
        field,
        masses: (1.0, 0.5),
        r_tail,
        metadata: DIAGONAL_CONVENTION.to_string(),
    })
}

fn matvec(a: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    (0..rows).map(|i| a[i * cols..(i + 1) * cols].iter().zip(x).map(|(u, v)| u * v).sum()).collect()
}

fn matvec_t(a: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for i in 0..rows {
        let xi = x[i];
        for (o, v) in out.iter_mut().zip(&a[i * cols..(i + 1) * cols]) {
            *o += v * xi;
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Euclidean projection onto `{x >= 0, sum x = mass}`.
pub fn project_simplex(v: &[f64], mass: f64) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        acc += uk;
        let t = (acc - mass) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

impl DiscretizedProblem {
    pub fn energy(&self, p: &[f64], q: &[f64]) -> f64 {
        let a = dot(p, &matvec(&self.k11, self.n1, self.n1, p));
        let b = dot(q, &matvec(&self.k22, self.n2, self.n2, q));
        let c = dot(p, &matvec(&self.k12, self.n1, self.n2, q));
        (a + b - c) / 3.0 + dot(p, &self.field)
    }

    pub fn gradient(&self, p: &[f64], q: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let k11p = matvec(&self.k11, self.n1, self.n1, p);
        let k12q = matvec(&self.k12, self.n1, self.n2, q);
        let k22q = matvec(&self.k22, self.n2, self.n2, q);
        let k12tp = matvec_t(&self.k12, self.n1, self.n2, p);
        let gp = (0..self.n1).map(|i| (2.0 * k11p[i] - k12q[i]) / 3.0 + self.field[i]).collect();
        let gq = (0..self.n2).map(|j| (2.0 * k22q[j] - k12tp[j]) / 3.0).collect();
        (gp, gq)
    }

    /// Projected-gradient residual `max |x - Proj(x - grad)|` over both blocks.
    pub fn kkt_residual(&self, p: &[f64], q: &[f64]) -> f64 {
        let (gp, gq) = self.gradient(p, q);
        let r = |x: &[f64], g: &[f64], m: f64| {
            let y: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - b).collect();
            project_simplex(&y, m).iter().zip(x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        r(p, &gp, self.masses.0).max(r(q, &gq, self.masses.1))
    }

    /// Initial iterate: masses spread uniformly over cells.
    pub fn uniform_start(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![self.masses.0 / self.n1 as f64; self.n1], vec![self.masses.1 / self.n2 as f64; self.n2])
    }

    /// Density with respect to arclength on one ray, at the cell midpoints.
    pub fn density1(&self, weights1: &[f64]) -> Vec<(f64, f64)> {
        self.nodes1
            .iter()
            .zip(weights1)
            .zip(self.edges1.windows(2))
            .map(|((&x, &w), e)| (x, w / (3.0 * (e[1] - e[0]))))
            .collect()
    }

    pub fn density2(&self, weights2: &[f64]) -> Vec<(f64, f64)> {
        self.nodes2
            .iter()
            .zip(weights2)
            .zip(self.edges2.windows(2))
            .map(|((&x, &w), e)| (x, w / (3.0 * (e[1] - e[0]))))
            .collect()
    }

    /// The cell measures on all three rays, for [`measures::energy`](crate::measures::energy).
    pub fn cell_measures(&self, weights1: &[f64], weights2: &[f64]) -> (CellMeasure, CellMeasure) {
        let cells = |e: &[f64], w: &[f64]| e.windows(2).zip(w).map(|(e, &w)| (e[0], e[1], w)).collect::<Vec<_>>();
        (
            CellMeasure::from_ray(Support::First, &cells(&self.edges1, weights1), self.masses.0),
            CellMeasure::from_ray(Support::Second, &cells(&self.edges2, weights2), self.masses.1),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    pub max_iter: usize,
    /// Stop when the KKT residual is below `tol * (1 + |multiplier|)`.
    pub tol: f64,
    pub armijo: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { max_iter: 200_000, tol: 1e-8, armijo: 1e-4 }
    }
}

#[derive(Clone, Debug)]
pub struct OracleSolution {
    /// Total cell masses of the first measure (all rays), sum 1.
    pub weights1: Vec<f64>,
    /// Total cell masses of the second measure, sum 1/2.
    pub weights2: Vec<f64>,
    /// Approximation of the Euler-Lagrange constant: the gradient on the
    /// first support is `-ell`, so this is minus its mass-weighted mean.
    pub multiplier: f64,
    /// Mass-weighted mean gradient on the second support (zero in the limit).
    pub multiplier2: f64,
    pub kkt_residual: f64,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Energy after every accepted step.
    pub energy_trace: Vec<f64>,
}

/// Projected gradient with Barzilai-Borwein trial steps and Armijo
/// backtracking. Always returns the best iterate; see `converged`.
pub fn solve_with(problem: &DiscretizedProblem, settings: SolverSettings) -> OracleSolution {
    let (m1, m2) = problem.masses;
    let (mut p, mut q) = problem.uniform_start();
    let (mut gp, mut gq) = problem.gradient(&p, &q);
    let mut e = problem.energy(&p, &q);
    let mut step: f64 = 1e-3;
    let mut trace = vec![e];
    let mut iterations = 0;
    let mut converged = false;
    let mut kkt = f64::INFINITY;
    let mut lambda1 = 0.0;
    while iterations < settings.max_iter {
        lambda1 = dot(&p, &gp) / m1;
        kkt = problem.kkt_residual(&p, &q);
        if kkt <= settings.tol * (1.0 + lambda1.abs()) {
            converged = true;
            break;
        }
        iterations += 1;
        let mut s = step;
        let (np, nq, ne) = loop {
            let yp: Vec<f64> = p.iter().zip(&gp).map(|(x, g)| x - s * g).collect();
            let yq: Vec<f64> = q.iter().zip(&gq).map(|(x, g)| x - s * g).collect();
            let np = project_simplex(&yp, m1);
            let nq = project_simplex(&yq, m2);
            let ne = problem.energy(&np, &nq);
            let dec = dot(&gp, &np.iter().zip(&p).map(|(a, b)| a - b).collect::<Vec<_>>())
                + dot(&gq, &nq.iter().zip(&q).map(|(a, b)| a - b).collect::<Vec<_>>());
            if ne <= e + settings.armijo * dec || s < 1e-14 {
                break (np, nq, ne);
            }
            s *= 0.5;
        };
        let (ngp, ngq) = problem.gradient(&np, &nq);
        // Barzilai-Borwein step for the next iteration
        let sp: Vec<f64> = np.iter().zip(&p).map(|(a, b)| a - b).chain(nq.iter().zip(&q).map(|(a, b)| a - b)).collect();
        let yg: Vec<f64> = ngp.iter().zip(&gp).map(|(a, b)| a - b).chain(ngq.iter().zip(&gq).map(|(a, b)| a - b)).collect();
        let sy = dot(&sp, &yg);
        step = if sy > 0.0 { (dot(&sp, &sp) / sy).clamp(1e-10, 1e6) } else { (2.0 * s).min(1e6) };
        p = np;
        q = nq;
        gp = ngp;
        gq = ngq;
        e = ne;
        trace.push(e);
    }
    let lambda2 = dot(&q, &gq) / m2;
    OracleSolution {
        weights1: p,
        weights2: q,
        multiplier: -lambda1,
        multiplier2: lambda2,
        kkt_residual: kkt,
        energy: e,
        iterations,
        converged,
        energy_trace: trace,
    }
}

/// [`solve_with`] under default settings; fails with `NonConvergence` when
/// the iteration budget runs out.
pub fn solve(problem: &DiscretizedProblem) -> Result<OracleSolution> {
    let settings = SolverSettings::default();
    let sol = solve_with(problem, settings);
    if !sol.converged {
        return Err(Error::NonConvergence { what: "projected gradient", iterations: sol.iterations });
    }
    Ok(sol)
}

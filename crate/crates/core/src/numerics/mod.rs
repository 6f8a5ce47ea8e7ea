//! Extended-precision arithmetic, quadrature and polynomial roots.

mod complex;
mod linalg;
mod quad;
mod real;
mod roots;

pub use complex::Complex;
pub use linalg::solve_linear;
pub use quad::{
    gauss_legendre, graded_intervals, integrate, panel_nodes, quad_ray, quad_segment, ray_nodes,
    Estimate, GaussRule, QuadValue, QuadratureRule,
};
pub use real::Real;
pub use roots::{poly_eval, solve_polynomial};
pub(crate) use roots::aberth64;

use crate::error::{Error, Result};

/// Working precision shared by a computation. Immutable once built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PrecisionContext {
    bits: usize,
}

impl Default for PrecisionContext {
    fn default() -> Self {
        PrecisionContext { bits: 256 }
    }
}

impl PrecisionContext {
    /// Arbitrary precision context; `bits` must be at least 64.
    pub fn new(bits: usize) -> Result<PrecisionContext> {
        if bits < 64 {
            return Err(Error::InvalidParameters(format!("precision {bits} < 64 bits")));
        }
        Ok(PrecisionContext { bits })
    }

    /// Hardware double precision. Used where speed matters more than digits
    /// (interactive plots, the discretized oracle).
    pub fn double() -> PrecisionContext {
        PrecisionContext { bits: 53 }
    }

    /// Precision used for polynomial degree `n`.
    pub fn for_degree(n: usize) -> PrecisionContext {
        PrecisionContext { bits: if n > 24 { 512 } else { 256 } }
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    /// Unit roundoff `2^(1-bits)`.
    pub fn eps(&self) -> f64 {
        2f64.powi(1 - self.bits as i32)
    }

    pub fn is_double(&self) -> bool {
        self.bits <= 53
    }

    /// Same context with `extra` more bits.
    pub fn widen(&self, extra: usize) -> PrecisionContext {
        if self.is_double() {
            return *self;
        }
        PrecisionContext { bits: self.bits + extra }
    }

    pub fn real(&self, x: f64) -> Real {
        Real::from_f64(x, self.bits)
    }

    pub fn int(&self, x: i64) -> Real {
        Real::from_i64(x, self.bits)
    }

    /// Exact rational `p/q` rounded once.
    pub fn ratio(&self, p: i64, q: i64) -> Real {
        self.int(p) / self.int(q)
    }

    pub fn parse(&self, s: &str) -> Result<Real> {
        Real::parse(s, self.bits).ok_or_else(|| Error::InvalidParameters(format!("cannot parse number {s:?}")))
    }

    pub fn complex(&self, re: f64, im: f64) -> Complex {
        Complex::from_f64(re, im, self.bits)
    }

    pub fn zero(&self) -> Complex {
        self.complex(0.0, 0.0)
    }

    pub fn one(&self) -> Complex {
        self.complex(1.0, 0.0)
    }

    pub fn pi(&self) -> Real {
        Real::pi(self.bits)
    }

    /// The primitive cube root of unity `exp(2 pi i / 3)`.
    pub fn omega(&self) -> Complex {
        let half = self.real(-0.5);
        let s = self.real(3.0).sqrt() * 0.5;
        Complex::new(half, s)
    }

    /// `omega^k` for any integer `k`.
    pub fn omega_pow(&self, k: i64) -> Complex {
        match k.rem_euclid(3) {
            0 => self.one(),
            1 => self.omega(),
            _ => self.omega().conj(),
        }
    }

    /// `exp(i pi p / q)` computed from the exact rational angle.
    pub fn unit(&self, p: i64, q: i64) -> Complex {
        let th = self.pi() * self.ratio(p, q);
        Complex::cis(&th)
    }
}

/// Reject non-finite values.
pub fn check_finite(z: &Complex, what: &str) -> Result<()> {
    if z.is_finite() {
        Ok(())
    } else {
        Err(Error::EvaluationFailure(what.to_string()))
    }
}

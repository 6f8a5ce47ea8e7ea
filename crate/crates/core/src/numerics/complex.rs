//! Complex numbers over [`Real`], principal branches throughout.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;

use super::real::Real;

#[derive(Clone, PartialEq)]
pub struct Complex {
    pub re: Real,
    pub im: Real,
}

impl Complex {
    pub fn new(re: Real, im: Real) -> Complex {
        Complex { re, im }
    }

    pub fn from_f64(re: f64, im: f64, bits: usize) -> Complex {
        Complex { re: Real::from_f64(re, bits), im: Real::from_f64(im, bits) }
    }

    pub fn from_c64(z: Complex64, bits: usize) -> Complex {
        Complex::from_f64(z.re, z.im, bits)
    }

    pub fn from_real(re: Real) -> Complex {
        let im = re.zero_like();
        Complex { re, im }
    }

    pub fn bits(&self) -> usize {
        self.re.bits().max(self.im.bits())
    }

    pub fn lit(&self, re: f64, im: f64) -> Complex {
        Complex::from_f64(re, im, self.bits())
    }

    pub fn zero_like(&self) -> Complex {
        self.lit(0.0, 0.0)
    }

    pub fn one_like(&self) -> Complex {
        self.lit(1.0, 0.0)
    }

    pub fn i_like(&self) -> Complex {
        self.lit(0.0, 1.0)
    }

    pub fn with_bits(&self, bits: usize) -> Complex {
        Complex { re: self.re.with_bits(bits), im: self.im.with_bits(bits) }
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Complex {
        Complex { re: self.re.clone(), im: -&self.im }
    }

    pub fn norm_sqr(&self) -> Real {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn abs(&self) -> Real {
        let a = self.re.abs();
        let b = self.im.abs();
        let (big, small) = if a >= b { (a, b) } else { (b, a) };
        if big.is_zero() {
            return big;
        }
        let q = &small / &big;
        &big * (q.square() + 1.0).sqrt()
    }

    /// `|z|` in double precision; cheap, for tolerance tests.
    pub fn magnitude(&self) -> f64 {
        self.re.to_f64().hypot(self.im.to_f64())
    }

    /// Principal argument in `(-pi, pi]`.
    pub fn arg(&self) -> Real {
        self.im.atan2(&self.re)
    }

    pub fn scale(&self, s: &Real) -> Complex {
        Complex { re: &self.re * s, im: &self.im * s }
    }

    pub fn scale_f64(&self, s: f64) -> Complex {
        Complex { re: &self.re * s, im: &self.im * s }
    }

    pub fn mul_i(&self) -> Complex {
        Complex { re: -&self.im, im: self.re.clone() }
    }

    pub fn square(&self) -> Complex {
        self * self
    }

    pub fn recip(&self) -> Complex {
        let d = self.norm_sqr();
        Complex { re: &self.re / &d, im: -(&self.im / &d) }
    }

    /// `exp(i theta)`.
    pub fn cis(theta: &Real) -> Complex {
        Complex { re: theta.cos(), im: theta.sin() }
    }

    pub fn from_polar(r: &Real, theta: &Real) -> Complex {
        Complex::cis(theta).scale(r)
    }

    pub fn exp(&self) -> Complex {
        Complex::cis(&self.im).scale(&self.re.exp())
    }

    /// Principal logarithm.
    pub fn ln(&self) -> Complex {
        Complex { re: self.abs().ln(), im: self.arg() }
    }

    /// Principal square root (non-negative real part, branch cut on the negative axis).
    pub fn sqrt(&self) -> Complex {
        if self.is_zero() {
            return self.zero_like();
        }
        let m = self.abs();
        if !self.re.is_negative() {
            let t = ((&m + &self.re) * 0.5).sqrt();
            let im = &self.im / (&t * 2.0);
            Complex { re: t, im }
        } else {
            let t = ((&m - &self.re) * 0.5).sqrt();
            let re = self.im.abs() / (&t * 2.0);
            let im = if self.im.is_negative() { -t } else { t };
            Complex { re, im }
        }
    }

    /// Principal power `exp(e * Log z)` with a real exponent.
    pub fn powf(&self, e: f64) -> Complex {
        if self.is_zero() {
            return self.zero_like();
        }
        let r = self.abs().powf(&self.re.lit(e));
        let th = self.arg() * e;
        Complex::from_polar(&r, &th)
    }

    /// Principal power `exp(e * Log z)`.
    pub fn powc(&self, e: &Complex) -> Complex {
        if self.is_zero() {
            return self.zero_like();
        }
        (e * &self.ln()).exp()
    }

    pub fn powi(&self, n: u32) -> Complex {
        let mut acc = self.one_like();
        let mut base = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            k >>= 1;
            if k > 0 {
                base = base.square();
            }
        }
        acc
    }
}

impl fmt::Debug for Complex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?} {} {:?}i)", self.re, if self.im.is_negative() { "-" } else { "+" }, self.im.abs())
    }
}

impl<'a, 'b> Add<&'b Complex> for &'a Complex {
    type Output = Complex;
    fn add(self, o: &'b Complex) -> Complex {
        Complex { re: &self.re + &o.re, im: &self.im + &o.im }
    }
}

impl<'a, 'b> Sub<&'b Complex> for &'a Complex {
    type Output = Complex;
    fn sub(self, o: &'b Complex) -> Complex {
        Complex { re: &self.re - &o.re, im: &self.im - &o.im }
    }
}

impl<'a, 'b> Mul<&'b Complex> for &'a Complex {
    type Output = Complex;
    fn mul(self, o: &'b Complex) -> Complex {
        Complex {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }
}

impl<'a, 'b> Div<&'b Complex> for &'a Complex {
    type Output = Complex;
    fn div(self, o: &'b Complex) -> Complex {
        // Smith's algorithm
        if o.re.abs() >= o.im.abs() {
            let r = &o.im / &o.re;
            let d = &o.re + &r * &o.im;
            Complex {
                re: (&self.re + &r * &self.im) / &d,
                im: (&self.im - &r * &self.re) / &d,
            }
        } else {
            let r = &o.re / &o.im;
            let d = &o.im + &r * &o.re;
            Complex {
                re: (&r * &self.re + &self.im) / &d,
                im: (&r * &self.im - &self.re) / &d,
            }
        }
    }
}

macro_rules! complex_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Complex> for Complex {
            type Output = Complex;
            fn $m(self, o: Complex) -> Complex {
                (&self).$m(&o)
            }
        }
        impl<'b> $tr<&'b Complex> for Complex {
            type Output = Complex;
            fn $m(self, o: &'b Complex) -> Complex {
                (&self).$m(o)
            }
        }
        impl<'a> $tr<Complex> for &'a Complex {
            type Output = Complex;
            fn $m(self, o: Complex) -> Complex {
                self.$m(&o)
            }
        }
    };
}

complex_owned!(Add, add);
complex_owned!(Sub, sub);
complex_owned!(Mul, mul);
complex_owned!(Div, div);

impl<'a> Mul<&'a Real> for &'a Complex {
    type Output = Complex;
    fn mul(self, s: &'a Real) -> Complex {
        self.scale(s)
    }
}

impl Mul<Real> for Complex {
    type Output = Complex;
    fn mul(self, s: Real) -> Complex {
        self.scale(&s)
    }
}

impl<'a> Mul<f64> for &'a Complex {
    type Output = Complex;
    fn mul(self, s: f64) -> Complex {
        self.scale_f64(s)
    }
}

impl Mul<f64> for Complex {
    type Output = Complex;
    fn mul(self, s: f64) -> Complex {
        self.scale_f64(s)
    }
}

impl<'a> Div<&'a Real> for &'a Complex {
    type Output = Complex;
    fn div(self, s: &'a Real) -> Complex {
        Complex { re: &self.re / s, im: &self.im / s }
    }
}

impl Div<Real> for Complex {
    type Output = Complex;
    fn div(self, s: Real) -> Complex {
        Complex { re: &self.re / &s, im: &self.im / &s }
    }
}

impl Div<f64> for Complex {
    type Output = Complex;
    fn div(self, s: f64) -> Complex {
        Complex { re: &self.re / s, im: &self.im / s }
    }
}

impl<'a> Add<&'a Real> for &'a Complex {
    type Output = Complex;
    fn add(self, s: &'a Real) -> Complex {
        Complex { re: &self.re + s, im: self.im.clone() }
    }
}

impl Add<Real> for Complex {
    type Output = Complex;
    fn add(self, s: Real) -> Complex {
        Complex { re: self.re + s, im: self.im }
    }
}

impl Add<f64> for Complex {
    type Output = Complex;
    fn add(self, s: f64) -> Complex {
        Complex { re: self.re + s, im: self.im }
    }
}

impl Sub<f64> for Complex {
    type Output = Complex;
    fn sub(self, s: f64) -> Complex {
        Complex { re: self.re - s, im: self.im }
    }
}

impl Sub<Real> for Complex {
    type Output = Complex;
    fn sub(self, s: Real) -> Complex {
        Complex { re: self.re - s, im: self.im }
    }
}

impl AddAssign<&Complex> for Complex {
    fn add_assign(&mut self, o: &Complex) {
        self.re += &o.re;
        self.im += &o.im;
    }
}

impl AddAssign<Complex> for Complex {
    fn add_assign(&mut self, o: Complex) {
        self.re += o.re;
        self.im += o.im;
    }
}

impl SubAssign<&Complex> for Complex {
    fn sub_assign(&mut self, o: &Complex) {
        self.re -= &o.re;
        self.im -= &o.im;
    }
}

impl SubAssign<Complex> for Complex {
    fn sub_assign(&mut self, o: Complex) {
        self.re -= o.re;
        self.im -= o.im;
    }
}

impl MulAssign<&Complex> for Complex {
    fn mul_assign(&mut self, o: &Complex) {
        *self = &*self * o;
    }
}

impl Neg for Complex {
    type Output = Complex;
    fn neg(self) -> Complex {
        Complex { re: -self.re, im: -self.im }
    }
}

impl<'a> Neg for &'a Complex {
    type Output = Complex;
    fn neg(self) -> Complex {
        Complex { re: -&self.re, im: -&self.im }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::from_f64(re, im, 192)
    }

    fn close(a: &Complex, b: Complex64, tol: f64) -> bool {
        (a.to_c64() - b).norm() <= tol * (1.0 + b.norm())
    }

    #[test]
    fn principal_branches_match_hardware() {
        let pts = [(1.0, 0.5), (-2.0, 0.3), (-2.0, -0.3), (0.0, -1.5), (-1.0, 0.0), (3.0, -4.0)];
        for &(x, y) in &pts {
            let z = c(x, y);
            let w = Complex64::new(x, y);
            assert!(close(&z.sqrt(), w.sqrt(), 1e-15));
            assert!(close(&z.ln(), w.ln(), 1e-15));
            assert!(close(&z.exp(), w.exp(), 1e-15));
            assert!(close(&z.powf(1.5), w.powf(1.5), 1e-14));
            assert!(close(&z.powf(-0.25), w.powf(-0.25), 1e-14));
            assert!(close(&(c(1.0, 2.0) / z.clone()), Complex64::new(1.0, 2.0) / w, 1e-15));
        }
    }

    #[test]
    fn sqrt_squares_back_at_high_precision() {
        let z = c(-0.7, 1e-30);
        let s = z.sqrt();
        let back = s.square() - z;
        assert!(back.abs() < 1e-55);
    }

    #[test]
    fn integer_power() {
        let z = c(0.3, -1.1);
        let p = z.powi(7);
        let w = Complex64::new(0.3, -1.1).powi(7);
        assert!(close(&p, w, 1e-14));
    }
}

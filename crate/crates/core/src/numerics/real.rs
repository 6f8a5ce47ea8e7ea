//! Real scalar backed either by a hardware double or by an arbitrary
//! precision binary float.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use astro_float::{BigFloat, Consts, Radix, RoundingMode, Sign};

const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("constant cache allocation"));
}

pub(crate) fn with_consts<R>(f: impl FnOnce(&mut Consts) -> R) -> R {
    CONSTS.with(|c| f(&mut c.borrow_mut()))
}

/// A real number. `Hw` is the 53-bit fast path, `Mp` carries its own precision.
#[derive(Clone)]
pub enum Real {
    Hw(f64),
    Mp(BigFloat, usize),
}

fn ldexp(mut x: f64, mut e: i64) -> f64 {
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
        if x.is_infinite() {
            return x;
        }
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
        if x == 0.0 {
            return x;
        }
    }
    x * 2f64.powi(e as i32)
}

impl Real {
    pub fn from_f64(x: f64, bits: usize) -> Real {
        if bits <= 53 {
            Real::Hw(x)
        } else {
            Real::Mp(BigFloat::from_f64(x, bits), bits)
        }
    }

    pub fn from_i64(x: i64, bits: usize) -> Real {
        if bits <= 53 {
            Real::Hw(x as f64)
        } else {
            Real::Mp(BigFloat::from_i64(x, bits), bits)
        }
    }

    /// Parse a decimal literal at the given precision.
    pub fn parse(s: &str, bits: usize) -> Option<Real> {
        if bits <= 53 {
            return s.trim().parse::<f64>().ok().map(Real::Hw);
        }
        let b = with_consts(|cc| BigFloat::parse(s.trim(), Radix::Dec, bits, RM, cc));
        if b.is_nan() || b.is_inf() {
            None
        } else {
            Some(Real::Mp(b, bits))
        }
    }

    pub fn pi(bits: usize) -> Real {
        if bits <= 53 {
            Real::Hw(std::f64::consts::PI)
        } else {
            Real::Mp(with_consts(|cc| cc.pi(bits, RM)), bits)
        }
    }

    /// Precision in bits (53 for hardware doubles).
    pub fn bits(&self) -> usize {
        match self {
            Real::Hw(_) => 53,
            Real::Mp(_, p) => *p,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Real::Hw(x) => *x,
            Real::Mp(b, _) => {
                if b.is_nan() {
                    return f64::NAN;
                }
                if b.is_inf() {
                    return if b.is_inf_pos() { f64::INFINITY } else { f64::NEG_INFINITY };
                }
                match b.as_raw_parts() {
                    None => f64::NAN,
                    Some((words, _, sign, exp, _)) => {
                        let top = words.last().copied().unwrap_or(0);
                        if top == 0 {
                            return 0.0;
                        }
                        let next = if words.len() > 1 { words[words.len() - 2] } else { 0 };
                        let m = top as f64 + next as f64 / 18446744073709551616.0;
                        let v = ldexp(m, exp as i64 - 64);
                        if matches!(sign, Sign::Neg) {
                            -v
                        } else {
                            v
                        }
                    }
                }
            }
        }
    }

    fn to_big(&self, bits: usize) -> BigFloat {
        match self {
            Real::Hw(x) => BigFloat::from_f64(*x, bits),
            Real::Mp(b, _) => b.clone(),
        }
    }

    /// Re-round to a new precision.
    pub fn with_bits(&self, bits: usize) -> Real {
        if bits <= 53 {
            return Real::Hw(self.to_f64());
        }
        match self {
            Real::Hw(x) => Real::Mp(BigFloat::from_f64(*x, bits), bits),
            Real::Mp(b, _) => {
                let mut c = b.clone();
                if !c.is_nan() && !c.is_inf() && !c.is_zero() {
                    let _ = c.set_precision(bits, RM);
                }
                Real::Mp(c, bits)
            }
        }
    }

    /// A constant of the same precision as `self`.
    pub fn lit(&self, x: f64) -> Real {
        Real::from_f64(x, self.bits())
    }

    pub fn zero_like(&self) -> Real {
        self.lit(0.0)
    }

    pub fn one_like(&self) -> Real {
        self.lit(1.0)
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Real::Hw(x) => x.is_finite(),
            Real::Mp(b, _) => !b.is_nan() && !b.is_inf(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Real::Hw(x) => *x == 0.0,
            Real::Mp(b, _) => b.is_zero(),
        }
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Real::Hw(x) => *x < 0.0,
            Real::Mp(b, _) => b.is_negative() && !b.is_zero(),
        }
    }

    pub fn abs(&self) -> Real {
        match self {
            Real::Hw(x) => Real::Hw(x.abs()),
            Real::Mp(b, p) => Real::Mp(b.abs(), *p),
        }
    }

    pub fn square(&self) -> Real {
        self * self
    }

    pub fn sqrt(&self) -> Real {
        match self {
            Real::Hw(x) => Real::Hw(x.sqrt()),
            Real::Mp(b, p) => Real::Mp(b.sqrt(*p, RM), *p),
        }
    }

    pub fn cbrt(&self) -> Real {
        match self {
            Real::Hw(x) => Real::Hw(x.cbrt()),
            Real::Mp(b, p) => Real::Mp(b.cbrt(*p, RM), *p),
        }
    }

    pub fn exp(&self) -> Real {
        match self {
            Real::Hw(x) => Real::Hw(x.exp()),
            Real::Mp(b, p) => Real::Mp(with_consts(|cc| b.exp(*p, RM, cc)), *p),
        }
    }

    pub fn ln(&self) -> Real {
        match self {
            Real::Hw(x) => Real::Hw(x.ln()),
            Real::Mp(b, p) => Real::Mp(with_consts(|cc| b.ln(*p, RM, cc)), *p),
        }
    }

    pub fn sin(&self) -> Real {
        match self {
            Real::Hw(x) => Real::Hw(x.sin()),
            Real::Mp(b, p) => Real::Mp(with_consts(|cc| b.sin(*p, RM, cc)), *p),
        }
    }

    pub fn cos(&self) -> Real {
        match self {
            Real::Hw(x) => Real::Hw(x.cos()),
            Real::Mp(b, p) => Real::Mp(with_consts(|cc| b.cos(*p, RM, cc)), *p),
        }
    }

    pub fn atan(&self) -> Real {
        match self {
            Real::Hw(x) => Real::Hw(x.atan()),
            Real::Mp(b, p) => Real::Mp(with_consts(|cc| b.atan(*p, RM, cc)), *p),
        }
    }

    /// Four-quadrant arctangent of `self / x`, in `(-pi, pi]`.
    pub fn atan2(&self, x: &Real) -> Real {
        let y = self;
        if let (Real::Hw(a), Real::Hw(b)) = (y, x) {
            return Real::Hw(a.atan2(*b));
        }
        let bits = y.bits().max(x.bits());
        let pi = Real::pi(bits);
        if x.is_zero() {
            if y.is_zero() {
                return Real::from_f64(0.0, bits);
            }
            let h = &pi * 0.5;
            return if y.is_negative() { -h } else { h };
        }
        // reduce to |ratio| <= 1 for accuracy
        if x.abs() >= y.abs() {
            let base = (y / x).atan();
            if x.is_negative() {
                if y.is_negative() {
                    base - pi
                } else {
                    base + pi
                }
            } else {
                base
            }
        } else {
            let base = (x / y).atan();
            let h = &pi * 0.5;
            if y.is_negative() {
                -h - base
            } else {
                h - base
            }
        }
    }

    pub fn powi(&self, n: i32) -> Real {
        match self {
            Real::Hw(x) => Real::Hw(x.powi(n)),
            Real::Mp(b, p) => {
                let p = *p;
                let r = b.powi(n.unsigned_abs() as usize, p + 64, RM);
                let r = if n < 0 { BigFloat::from_f64(1.0, p + 64).div(&r, p + 64, RM) } else { r };
                let mut r = r;
                if !r.is_zero() && !r.is_nan() && !r.is_inf() {
                    let _ = r.set_precision(p, RM);
                }
                Real::Mp(r, p)
            }
        }
    }

    /// `self^e` for positive `self`.
    pub fn powf(&self, e: &Real) -> Real {
        if self.is_zero() {
            return self.zero_like();
        }
        (&self.ln() * e).exp()
    }

    pub fn floor(&self) -> Real {
        match self {
            Real::Hw(x) => Real::Hw(x.floor()),
            Real::Mp(b, p) => Real::Mp(b.floor(), *p),
        }
    }

    pub fn max(self, other: Real) -> Real {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Real) -> Real {
        if other < self {
            other
        } else {
            self
        }
    }

    /// Decimal rendering with `digits` significant digits, e.g. `-1.2345e-3`.
    pub fn to_sci_string(&self, digits: usize) -> String {
        let digits = digits.max(1);
        match self {
            Real::Hw(x) => format!("{:.*e}", digits - 1, x),
            Real::Mp(b, _) => {
                if b.is_nan() {
                    return "NaN".into();
                }
                if b.is_inf() {
                    return if b.is_inf_pos() { "inf".into() } else { "-inf".into() };
                }
                if b.is_zero() {
                    return format!("{:.*e}", digits - 1, 0.0);
                }
                let s = with_consts(|cc| b.format(Radix::Dec, RM, cc)).unwrap_or_default();
                round_sci(&s, digits)
            }
        }
    }
}

/// Round an astro-style decimal string (`[-]d.ddde[+-]x` or plain) to `digits`
/// significant digits and normalize it to `d.ddd e[-]x` form.
fn round_sci(s: &str, digits: usize) -> String {
    let (neg, body) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s),
    };
    let (mant, exp) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], body[i + 1..].parse::<i64>().unwrap_or(0)),
        None => (body, 0),
    };
    let (ip, fp) = match mant.find('.') {
        Some(i) => (&mant[..i], &mant[i + 1..]),
        None => (mant, ""),
    };
    let all: Vec<u8> = ip.bytes().chain(fp.bytes()).map(|c| c - b'0').collect();
    let lead = all.iter().position(|&d| d != 0);
    let lead = match lead {
        Some(l) => l,
        None => return format!("{:.*e}", digits - 1, 0.0),
    };
    // decimal exponent of the leading digit
    let mut e10 = exp + ip.len() as i64 - 1 - lead as i64;
    let mut sig: Vec<u8> = all[lead..].to_vec();
    sig.resize(sig.len().max(digits + 1), 0);
    let round_up = sig[digits] >= 5;
    sig.truncate(digits);
    if round_up {
        let mut i = digits;
        loop {
            if i == 0 {
                sig.insert(0, 1);
                sig.truncate(digits);
                e10 += 1;
                break;
            }
            i -= 1;
            if sig[i] == 9 {
                sig[i] = 0;
            } else {
                sig[i] += 1;
                break;
            }
        }
    }
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    out.push((b'0' + sig[0]) as char);
    if digits > 1 {
        out.push('.');
        for d in &sig[1..] {
            out.push((b'0' + d) as char);
        }
    }
    out.push('e');
    out.push_str(&e10.to_string());
    out
}

impl fmt::Debug for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_sci_string(20))
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = ((self.bits() as f64) * std::f64::consts::LOG10_2).floor() as usize;
        write!(f, "{}", self.to_sci_string(f.precision().unwrap_or(digits.max(1))))
    }
}

impl PartialEq for Real {
    fn eq(&self, other: &Real) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Real) -> Option<Ordering> {
        match (self, other) {
            (Real::Hw(a), Real::Hw(b)) => a.partial_cmp(b),
            _ => {
                let bits = self.bits().max(other.bits()).max(64);
                let a = self.to_big(bits);
                let b = other.to_big(bits);
                a.cmp(&b).map(|c| c.cmp(&0))
            }
        }
    }
}

impl PartialEq<f64> for Real {
    fn eq(&self, other: &f64) -> bool {
        *self == self.lit(*other)
    }
}

impl PartialOrd<f64> for Real {
    fn partial_cmp(&self, other: &f64) -> Option<Ordering> {
        self.partial_cmp(&self.lit(*other))
    }
}

macro_rules! real_binop {
    ($tr:ident, $m:ident, $hw:tt, $mp:ident, $atr:ident, $am:ident) => {
        impl<'a, 'b> $tr<&'b Real> for &'a Real {
            type Output = Real;
            fn $m(self, rhs: &'b Real) -> Real {
                match (self, rhs) {
                    (Real::Hw(a), Real::Hw(b)) => Real::Hw(*a $hw *b),
                    (Real::Mp(a, pa), Real::Mp(b, pb)) => {
                        let p = (*pa).max(*pb);
                        Real::Mp(a.$mp(b, p, RM), p)
                    }
                    (Real::Mp(a, p), Real::Hw(b)) => {
                        Real::Mp(a.$mp(&BigFloat::from_f64(*b, *p), *p, RM), *p)
                    }
                    (Real::Hw(a), Real::Mp(b, p)) => {
                        Real::Mp(BigFloat::from_f64(*a, *p).$mp(b, *p, RM), *p)
                    }
                }
            }
        }
        impl $tr<Real> for Real {
            type Output = Real;
            fn $m(self, rhs: Real) -> Real {
                (&self).$m(&rhs)
            }
        }
        impl<'b> $tr<&'b Real> for Real {
            type Output = Real;
            fn $m(self, rhs: &'b Real) -> Real {
                (&self).$m(rhs)
            }
        }
        impl<'a> $tr<Real> for &'a Real {
            type Output = Real;
            fn $m(self, rhs: Real) -> Real {
                self.$m(&rhs)
            }
        }
        impl<'a> $tr<f64> for &'a Real {
            type Output = Real;
            fn $m(self, rhs: f64) -> Real {
                match self {
                    Real::Hw(a) => Real::Hw(*a $hw rhs),
                    Real::Mp(a, p) => Real::Mp(a.$mp(&BigFloat::from_f64(rhs, *p), *p, RM), *p),
                }
            }
        }
        impl $tr<f64> for Real {
            type Output = Real;
            fn $m(self, rhs: f64) -> Real {
                (&self).$m(rhs)
            }
        }
        impl<'b> $tr<&'b Real> for f64 {
            type Output = Real;
            fn $m(self, rhs: &'b Real) -> Real {
                rhs.lit(self).$m(rhs)
            }
        }
        impl $tr<Real> for f64 {
            type Output = Real;
            fn $m(self, rhs: Real) -> Real {
                rhs.lit(self).$m(&rhs)
            }
        }
        impl<'b> $atr<&'b Real> for Real {
            fn $am(&mut self, rhs: &'b Real) {
                *self = (&*self).$m(rhs);
            }
        }
        impl $atr<Real> for Real {
            fn $am(&mut self, rhs: Real) {
                *self = (&*self).$m(&rhs);
            }
        }
        impl $atr<f64> for Real {
            fn $am(&mut self, rhs: f64) {
                *self = (&*self).$m(rhs);
            }
        }
    };
}

real_binop!(Add, add, +, add, AddAssign, add_assign);
real_binop!(Sub, sub, -, sub, SubAssign, sub_assign);
real_binop!(Mul, mul, *, mul, MulAssign, mul_assign);
real_binop!(Div, div, /, div, DivAssign, div_assign);

impl Neg for Real {
    type Output = Real;
    fn neg(self) -> Real {
        match self {
            Real::Hw(a) => Real::Hw(-a),
            Real::Mp(a, p) => Real::Mp(a.neg(), p),
        }
    }
}

impl<'a> Neg for &'a Real {
    type Output = Real;
    fn neg(self) -> Real {
        match self {
            Real::Hw(a) => Real::Hw(-a),
            Real::Mp(a, p) => Real::Mp(a.neg(), *p),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_f64() {
        for &x in &[1.0, -3.5, 1e-300, 7.25e200, 0.1, -2.0f64.powi(-40)] {
            let r = Real::from_f64(x, 256);
            assert_eq!(r.to_f64(), x);
        }
    }

    #[test]
    fn sci_string_rounding() {
        let third = Real::from_f64(1.0, 256) / 3.0;
        assert_eq!(third.to_sci_string(5), "3.3333e-1");
        let two3 = Real::from_f64(2.0, 256) / 3.0;
        assert_eq!(two3.to_sci_string(3), "6.67e-1");
        let big = Real::from_f64(999.96, 128);
        assert_eq!(big.to_sci_string(4), "1.000e3");
        assert_eq!(Real::from_f64(-0.25, 128).to_sci_string(2), "-2.5e-1");
    }

    #[test]
    fn atan2_quadrants() {
        for &(y, x) in &[(1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (-1.0, 1.0), (2.0, 0.5), (-0.5, -3.0), (0.0, -1.0)] {
            let a = Real::from_f64(y, 128).atan2(&Real::from_f64(x, 128));
            assert!((a.to_f64() - f64::atan2(y, x)).abs() < 1e-15, "{y} {x}");
        }
    }

    #[test]
    fn pi_digits() {
        let pi = Real::pi(256);
        assert_eq!(pi.to_sci_string(30), "3.14159265358979323846264338328e0");
    }

    #[test]
    fn parse_and_compare() {
        let a = Real::parse("0.1", 256).unwrap();
        let b = Real::from_f64(0.1, 256);
        assert!(a != b);
        assert!((a.clone() - b).abs() < 1e-17);
        assert!(a > 0.0);
    }
}

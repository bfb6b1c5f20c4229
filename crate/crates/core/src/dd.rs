//! Double-double arithmetic: an unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`,
//! giving about 106 bits of significand.

use core::ops::{Add, Mul, Neg, Sub};

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

const LN2: Dd = Dd { hi: core::f64::consts::LN_2, lo: 2.319_046_813_846_299_6e-17 };

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn fast_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, math::fma(a, b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    #[inline]
    pub const fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    /// Exact conversion for `|n| < 2^106`.
    pub fn from_i128(n: i128) -> Self {
        let hi = n as f64;
        let lo = (n - hi as i128) as f64;
        let (hi, lo) = fast_two_sum(hi, lo);
        Dd { hi, lo }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    #[inline]
    pub fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        let e = math::fma(self.lo, b, e);
        let (hi, lo) = fast_two_sum(p, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn add_f64(self, b: f64) -> Self {
        let (s, e) = two_sum(self.hi, b);
        let (hi, lo) = fast_two_sum(s, e + self.lo);
        Dd { hi, lo }
    }

    pub fn recip(self) -> Self {
        Dd::ONE.div(self)
    }

    pub fn div(self, b: Dd) -> Self {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = fast_two_sum(q1, q2);
        Dd { hi, lo }.add_f64(q3)
    }

    /// `floor` of a double-double.
    pub fn floor(self) -> Self {
        let fh = math::floor(self.hi);
        if fh == self.hi {
            let fl = math::floor(self.lo);
            let (hi, lo) = fast_two_sum(fh, fl);
            Dd { hi, lo }
        } else {
            Dd { hi: fh, lo: 0.0 }
        }
    }

    /// Fractional part in `[0, 1)` rounded to the nearest double.
    pub fn frac_f64(self) -> f64 {
        let f = self - self.floor();
        let v = f.hi + f.lo;
        if v >= 1.0 {
            v - 1.0
        } else if v < 0.0 {
            v + 1.0
        } else {
            v
        }
    }

    /// Natural exponential, relative error around `2^-102` for `|x| < 700`.
    pub fn exp(self) -> Self {
        if self.hi == 0.0 {
            return Dd::ONE;
        }
        let k = math::round(self.hi / LN2.hi);
        let r = self - LN2.mul_f64(k);
        const SQ: i32 = 10;
        let r = r.mul_f64(1.0 / (1u64 << SQ) as f64);
        // expm1(r) by Taylor; |r| < 4e-4 so 14 terms is plenty.
        let mut term = r;
        let mut acc = r;
        for i in 2..=14 {
            term = (term * r).div(Dd::from_f64(i as f64));
            acc = acc + term;
        }
        // expm1(2x) = expm1(x) * (2 + expm1(x))
        for _ in 0..SQ {
            acc = acc * acc.add_f64(2.0);
        }
        let res = acc.add_f64(1.0);
        let scale = libm::ldexp(1.0, k as i32);
        Dd { hi: res.hi * scale, lo: res.lo * scale }
    }

    /// Natural logarithm by Newton refinement of the double result.
    pub fn ln(self) -> Self {
        assert!(self.hi > 0.0, "ln of non-positive double-double");
        let mut y = Dd::from_f64(math::ln(self.hi));
        for _ in 0..2 {
            y = y + (self * (-y).exp()).add_f64(-1.0);
        }
        y
    }

    /// `x^p` for positive `x`.
    pub fn powf(self, p: Dd) -> Self {
        (self.ln() * p).exp()
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = fast_two_sum(s, e + t);
        let (hi, lo) = fast_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = fast_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::from_f64(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_ln_roundtrip() {
        for &x in &[0.5, 1.0, 3.7, 1e6, 123456.789] {
            let d = Dd::from_f64(x);
            let back = d.ln().exp();
            let rel = ((back - d).to_f64() / x).abs();
            assert!(rel < 1e-30, "x={x} rel={rel}");
        }
    }

    #[test]
    fn exp_one_is_e() {
        let e1 = Dd::ONE.exp();
        // e = 2.718281828459045 + 1.4456468917292502e-16
        assert_eq!(e1.hi, core::f64::consts::E);
        assert!((e1.lo - 1.445_646_891_729_250_2e-16).abs() < 1e-31);
    }

    #[test]
    fn frac_of_large_value() {
        let v = Dd::from_f64(1e12).add_f64(0.25);
        assert!((v.frac_f64() - 0.25).abs() < 1e-20);
        let w = Dd::from_f64(-3.0).add_f64(0.125);
        assert_eq!(w.frac_f64(), 0.125);
    }

    #[test]
    fn division() {
        let q = Dd::ONE.div(Dd::from_f64(3.0));
        let back = q.mul_f64(3.0).add_f64(-1.0);
        assert!(back.to_f64().abs() < 1e-31);
    }
}

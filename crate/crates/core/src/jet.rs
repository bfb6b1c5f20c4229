//! Truncated Taylor series for exact derivatives of the smooth cutoffs.
//!
//! `Jet<N>` stores `c[k] = f^(k)(x0) / k!` for `k < N`.

use core::ops::{Add, Mul, Neg, Sub};

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<const N: usize> {
    pub c: [f64; N],
}

impl<const N: usize> Jet<N> {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = v;
        Self { c }
    }

    /// The identity function at `x0`.
    pub fn var(x0: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = x0;
        if N > 1 {
            c[1] = 1.0;
        }
        Self { c }
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// The k-th derivative.
    pub fn deriv(&self, k: usize) -> f64 {
        self.c[k] * math::factorial(k)
    }

    pub fn scale(self, a: f64) -> Self {
        let mut c = self.c;
        c.iter_mut().for_each(|x| *x *= a);
        Self { c }
    }

    pub fn add_const(mut self, a: f64) -> Self {
        self.c[0] += a;
        self
    }

    pub fn recip(self) -> Self {
        let mut r = [0.0; N];
        r[0] = 1.0 / self.c[0];
        for k in 1..N {
            let mut s = 0.0;
            for j in 1..=k {
                s += self.c[j] * r[k - j];
            }
            r[k] = -s * r[0];
        }
        Self { c: r }
    }

    pub fn exp(self) -> Self {
        let mut r = [0.0; N];
        r[0] = math::exp(self.c[0]);
        for k in 1..N {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * self.c[j] * r[k - j];
            }
            r[k] = s / k as f64;
        }
        Self { c: r }
    }

    pub fn ln(self) -> Self {
        let mut r = [0.0; N];
        r[0] = math::ln(self.c[0]);
        for k in 1..N {
            let mut s = self.c[k];
            for j in 1..k {
                s -= j as f64 * r[j] * self.c[k - j] / k as f64;
            }
            r[k] = s / self.c[0];
        }
        Self { c: r }
    }
}

impl<const N: usize> Add for Jet<N> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut c = self.c;
        for k in 0..N {
            c[k] += o.c[k];
        }
        Self { c }
    }
}

impl<const N: usize> Sub for Jet<N> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl<const N: usize> Neg for Jet<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl<const N: usize> Mul for Jet<N> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut c = [0.0; N];
        for i in 0..N {
            for j in 0..N - i {
                c[i + j] += self.c[i] * o.c[j];
            }
        }
        Self { c }
    }
}

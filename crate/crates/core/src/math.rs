//! Thin wrappers so the rest of the crate reads like std float code.

use num_complex::Complex64;

pub const PI: f64 = core::f64::consts::PI;
pub const TAU: f64 = core::f64::consts::TAU;
pub const LN2: f64 = core::f64::consts::LN_2;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}
#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}
#[inline]
pub fn pow(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}
#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}
#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}
#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}
#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}
#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}
#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}
#[inline]
pub fn fma(a: f64, b: f64, c: f64) -> f64 {
    libm::fma(a, b, c)
}

/// Fractional part in `[0, 1)`.
#[inline]
pub fn frac(x: f64) -> f64 {
    let f = x - floor(x);
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// Distance to the nearest integer.
#[inline]
pub fn circ_dist(x: f64) -> f64 {
    (x - round(x)).abs()
}

/// `e(x) = exp(2 pi i x)`, with the argument reduced mod 1 first.
#[inline]
pub fn e(x: f64) -> Complex64 {
    let t = x - round(x);
    let (s, c) = libm::sincos(TAU * t);
    Complex64::new(c, s)
}

/// `n!` as a float.
pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

/// Binomial coefficient `C(n, k)` as a float.
pub fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    round(acc)
}

/// Generalised binomial `C(p, j) = p (p-1) ... (p-j+1) / j!` for real `p`.
pub fn binom_real(p: f64, j: usize) -> f64 {
    falling(p, j) / factorial(j)
}

/// Falling factorial `(p)_j = p (p-1) ... (p-j+1)`.
pub fn falling(p: f64, j: usize) -> f64 {
    (0..j).fold(1.0, |a, i| a * (p - i as f64))
}

/// Compensated (Neumaier) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Pairwise sum; the association order depends only on `xs.len()`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => {
            let mut k = KahanSum::new();
            xs.iter().for_each(|&x| k.add(x));
            k.value()
        }
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

/// Pairwise sum of complex values.
pub fn pairwise_sum_c(xs: &[Complex64]) -> Complex64 {
    match xs.len() {
        0 => Complex64::new(0.0, 0.0),
        n if n <= 8 => xs.iter().fold(Complex64::new(0.0, 0.0), |a, &b| a + b),
        n => pairwise_sum_c(&xs[..n / 2]) + pairwise_sum_c(&xs[n / 2..]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn e_is_periodic() {
        let a = e(0.3);
        let b = e(1e6 + 0.3);
        assert!((a - b).norm() < 1e-9);
        assert!((e(0.25) - Complex64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn binomials() {
        assert_eq!(binom(6, 3), 20.0);
        assert_eq!(binom(3, 5), 0.0);
        assert!((binom_real(2.5, 2) - 1.875).abs() < 1e-15);
        assert!((falling(2.5, 3) - 2.5 * 1.5 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let xs: std::vec::Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
    }
}

//! In-place radix-2 FFT. Only power-of-two lengths are needed here.

use num_complex::Complex64;

use crate::math::{self, TAU};

/// Forward transform `X_j = sum_k x_k exp(-2 pi i jk/n)`; `inverse` flips the
/// sign of the exponent (no 1/n scaling).
pub fn fft(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * TAU / len as f64;
        // Direct twiddles keep the error at O(eps log n).
        let tw: alloc::vec::Vec<Complex64> =
            (0..len / 2).map(|k| Complex64::new(math::cos(ang * k as f64), math::sin(ang * k as f64))).collect();
        for start in (0..n).step_by(len) {
            for k in 0..len / 2 {
                let a = buf[start + k];
                let b = buf[start + k + len / 2] * tw[k];
                buf[start + k] = a + b;
                buf[start + k + len / 2] = a - b;
            }
        }
        len <<= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn matches_naive_dft() {
        let x: Vec<Complex64> = (0..16).map(|i| Complex64::new((i as f64).sin(), (i * i) as f64 * 0.01)).collect();
        let mut y = x.clone();
        fft(&mut y, false);
        for j in 0..16 {
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..16 {
                s += x[k] * math::e(-((j * k) as f64) / 16.0);
            }
            assert!((s - y[j]).norm() < 1e-12);
        }
        fft(&mut y, true);
        for k in 0..16 {
            assert!((y[k] / 16.0 - x[k]).norm() < 1e-14);
        }
    }
}

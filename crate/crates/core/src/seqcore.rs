//! The sequence `y(n) = alpha * n^theta`, its values mod 1 and the phases
//! `k * y(n) mod 1` that every exponential sum is built from.

use alloc::vec::Vec;

use crate::dd::Dd;
use crate::error::{bail, Result};
use crate::math;

/// Unit roundoff of f64.
pub const U53: f64 = 1.110_223_024_625_156_5e-16;
/// Relative error certified for a double-double evaluation of `alpha n^theta`.
pub const DD_REL: f64 = 2.524_354_896_707_238e-29; // 2^-95
/// Relative error certified for the plain `libm::pow` route.
pub const STD_REL: f64 = 4.0 * U53;
/// Default `|k y|` above which [`Precision::Auto`] switches to double-double.
pub const AUTO_SWITCH: f64 = 1_048_576.0; // 2^20

/// How `y(n)` and `k y(n) mod 1` are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Precision {
    /// `libm::pow` and one exact product.
    Standard,
    /// Double-double throughout.
    Compensated,
    /// Standard below the threshold on `|k y|`, compensated above it.
    Auto { threshold: f64 },
}

impl Default for Precision {
    fn default() -> Self {
        Precision::Auto { threshold: AUTO_SWITCH }
    }
}

/// `alpha * n^theta` with `alpha > 0` and `0 < theta < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceSpec {
    pub alpha: f64,
    pub theta: f64,
    pub precision: Precision,
}

/// A value in `[0, 1)` together with a bound on its absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseValue {
    pub value_mod1: f64,
    pub abs_error_bound: f64,
}

impl SequenceSpec {
    pub fn new(alpha: f64, theta: f64) -> Result<Self> {
        Self::with_precision(alpha, theta, Precision::default())
    }

    pub fn with_precision(alpha: f64, theta: f64, precision: Precision) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            bail!(InvalidParameter, "alpha must be positive and finite, got {alpha}");
        }
        if !(theta > 0.0 && theta < 1.0) {
            bail!(InvalidParameter, "theta must lie in (0, 1), got {theta}");
        }
        if let Precision::Auto { threshold } = precision {
            if !(threshold > 0.0) {
                bail!(InvalidParameter, "auto threshold must be positive");
            }
        }
        Ok(Self { alpha, theta, precision })
    }

    /// `y(n)` in double-double.
    pub fn y_dd(&self, n: u64) -> Dd {
        if n == 0 {
            return Dd::ZERO;
        }
        let ln_n = Dd::from_i128(n as i128).ln();
        let y = (ln_n.mul_f64(self.theta)).exp();
        y.mul_f64(self.alpha)
    }

    /// `y(n)` with the standard libm route.
    pub fn y_std(&self, n: u64) -> f64 {
        self.alpha * math::pow(n as f64, self.theta)
    }

    /// `y(n)` with a certified relative error bound. The value is returned
    /// as a double-double so the compensated bound is meaningful.
    pub fn eval_y(&self, n: u64) -> Result<(Dd, f64)> {
        if n == 0 {
            bail!(OutOfRange, "n must be at least 1");
        }
        Ok(match self.precision {
            Precision::Standard => (Dd::from_f64(self.y_std(n)), STD_REL),
            _ => (self.y_dd(n), DD_REL),
        })
    }

    /// `k * y(n) mod 1`.
    pub fn phase_mod1(&self, k: i64, n: u64) -> Result<PhaseValue> {
        if n == 0 {
            bail!(OutOfRange, "n must be at least 1");
        }
        let compensated = match self.precision {
            Precision::Standard => false,
            Precision::Compensated => true,
            Precision::Auto { threshold } => (k as f64 * self.y_std(n)).abs() > threshold,
        };
        Ok(if compensated {
            phase_dd(k, self.y_dd(n))
        } else {
            phase_std(k, self.y_std(n))
        })
    }

    /// `y(n) mod 1`.
    pub fn x_mod1(&self, n: u64) -> f64 {
        match self.precision {
            Precision::Standard => math::frac(self.y_std(n)),
            _ => self.y_dd(n).frac_f64(),
        }
    }

    /// Double-double values of `y(n)` for `n` in `lo..=hi`.
    pub fn y_table(&self, lo: u64, hi: u64) -> Vec<Dd> {
        (lo..=hi).map(|n| self.y_dd(n)).collect()
    }

    /// Whether `k` times the values up to `y_max` should go through double-double.
    pub fn wants_dd(&self, k_max: f64, y_max: f64) -> bool {
        match self.precision {
            Precision::Standard => false,
            Precision::Compensated => true,
            Precision::Auto { threshold } => k_max * y_max > threshold,
        }
    }
}

/// `k y mod 1` from a double-double `y`.
#[inline]
pub fn phase_dd(k: i64, y: Dd) -> PhaseValue {
    let ky = y.mul_f64(k as f64);
    let v = ky.frac_f64();
    PhaseValue { value_mod1: v, abs_error_bound: ky.hi.abs() * DD_REL + U53 * 0.5 }
}

/// `k y mod 1` from a plain double `y`, with the product formed exactly.
#[inline]
pub fn phase_std(k: i64, y: f64) -> PhaseValue {
    let kf = k as f64;
    let p = kf * y;
    let err = math::fma(kf, y, -p);
    let v = math::frac(math::frac(p) + err);
    PhaseValue { value_mod1: v, abs_error_bound: p.abs() * STD_REL + U53 }
}

/// Points on the circle whose correlations are being counted.
pub trait PointSequence: Sync {
    /// Position of the n-th point in `[0, 1)`, `n >= 1`.
    fn x(&self, n: u64) -> f64;
    /// Unreduced value `y(n)` as a double-double, for phases `k y(n) mod 1`.
    fn y(&self, n: u64) -> Dd;
}

impl PointSequence for SequenceSpec {
    fn x(&self, n: u64) -> f64 {
        self.x_mod1(n)
    }
    fn y(&self, n: u64) -> Dd {
        match self.precision {
            Precision::Standard => Dd::from_f64(self.y_std(n)),
            _ => self.y_dd(n),
        }
    }
}

/// The lattice `n / N`.
#[derive(Debug, Clone, Copy)]
pub struct Lattice {
    pub n_total: u64,
}

impl PointSequence for Lattice {
    fn x(&self, n: u64) -> f64 {
        (n % self.n_total) as f64 / self.n_total as f64
    }
    fn y(&self, n: u64) -> Dd {
        Dd::from_f64(n as f64).div(Dd::from_f64(self.n_total as f64))
    }
}

/// An explicit list of points; `points[n - 1]` is the n-th point.
#[derive(Debug, Clone)]
pub struct PointSet {
    pub points: Vec<f64>,
}

impl PointSet {
    /// `len` independent uniform points from a seeded ChaCha stream.
    pub fn uniform(len: usize, seed: u64) -> Self {
        use rand_chacha::rand_core::{RngCore, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let points = (0..len).map(|_| (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)).collect();
        Self { points }
    }
}

impl PointSequence for PointSet {
    fn x(&self, n: u64) -> f64 {
        math::frac(self.points[(n - 1) as usize])
    }
    fn y(&self, n: u64) -> Dd {
        Dd::from_f64(self.points[(n - 1) as usize])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        assert!(SequenceSpec::new(0.0, 0.5).is_err());
        assert!(SequenceSpec::new(1.0, 1.0).is_err());
        assert!(SequenceSpec::new(1.0, 0.0).is_err());
        let s = SequenceSpec::new(1.0, 0.5).unwrap();
        assert!(s.eval_y(0).is_err());
        assert!(s.phase_mod1(3, 0).is_err());
    }

    #[test]
    fn perfect_square_roots() {
        let s = SequenceSpec::new(1.0, 0.5).unwrap();
        for n in [4u64, 9, 10_000, 1 << 40] {
            let y = s.y_dd(n);
            let exact = (n as f64).sqrt();
            assert!((y - Dd::from_f64(exact)).to_f64().abs() < 1e-26 * exact);
        }
        let p = s.phase_mod1(7, 1 << 40).unwrap();
        assert_eq!(p.value_mod1, 0.0);
    }

    #[test]
    fn lattice_phase_is_exact() {
        let l = Lattice { n_total: 7 };
        assert!((phase_dd(3, l.y(5)).value_mod1 - 1.0 / 7.0).abs() < 1e-16);
        assert_eq!(l.x(7), 0.0);
    }

    #[test]
    fn uniform_points_are_reproducible() {
        let a = PointSet::uniform(10, 3);
        let b = PointSet::uniform(10, 3);
        assert_eq!(a.points, b.points);
        assert!(a.points.iter().all(|&x| (0.0..1.0).contains(&x)));
    }
}

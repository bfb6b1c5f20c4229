//! Even, compactly supported test functions, their Fourier transforms and
//! moments, and the induced kernel `F(z) = int f(s) prod f(z_i + ... + z_{m-1} + s) ds`.

use alloc::sync::Arc;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{bail, Result};
use crate::jet::Jet;
use crate::math::{self, PI, TAU};
use crate::quad::{self, GaussLegendre};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    C2Spline,
    CinfBump,
}

/// Table of the unit-radius bump transform and its derivative on a uniform grid.
#[derive(Debug)]
struct BumpTable {
    step: f64,
    values: Vec<f64>,
    derivs: Vec<f64>,
    seconds: Vec<f64>,
    /// `tail[i]` bounds the interpolant on every cell from `i` on.
    tail: Vec<f64>,
    /// `int |b^(8)|` for the unit bump, for the decay bound past the table.
    d8_norm: f64,
}

const BUMP_ETA_MAX: f64 = 128.0;
const BUMP_STEPS_PER_UNIT: usize = 128;

impl BumpTable {
    fn build() -> Self {
        let n = (BUMP_ETA_MAX as usize) * BUMP_STEPS_PER_UNIT + 1;
        let step = 1.0 / BUMP_STEPS_PER_UNIT as f64;
        let mut values = alloc::vec![0.0; n];
        let mut derivs = alloc::vec![0.0; n];
        let mut seconds = alloc::vec![0.0; n];
        let gl = GaussLegendre::new(12);
        let panels = 192;
        for p in 0..panels {
            let a = p as f64 / panels as f64;
            let b = (p + 1) as f64 / panels as f64;
            for (x, w) in gl.nodes.iter().zip(&gl.weights) {
                let x = 0.5 * (a + b) + 0.5 * (b - a) * x;
                let w = 0.5 * (b - a) * w;
                let fx = bump_unit(x);
                if fx == 0.0 {
                    continue;
                }
                // cos/sin of 2 pi x eta along the grid by rotation, reseeded every 256 steps.
                let rot = math::e(x * step);
                let mut z = Complex64::new(1.0, 0.0);
                for k in 0..n {
                    if k % 256 == 0 {
                        z = math::e(x * step * k as f64);
                    }
                    values[k] += 2.0 * w * fx * z.re;
                    derivs[k] -= 2.0 * w * fx * TAU * x * z.im;
                    seconds[k] -= 2.0 * w * fx * (TAU * x) * (TAU * x) * z.re;
                    z *= rot;
                }
            }
        }
        let breaks: Vec<f64> = (0..=4000).map(|i| 0.999 * i as f64 / 4000.0).collect();
        let d8_norm: f64 = GaussLegendre::new(8).integrate_pieces(&breaks, |x| bump_jet::<9>(x).deriv(8).abs());
        let mut table = Self { step, values, derivs, seconds, tail: Vec::new(), d8_norm: 2.0 * d8_norm * 1.001 };
        let mut tail = alloc::vec![0.0; n];
        let mut run = 0.0f64;
        for i in (0..n - 1).rev() {
            run = run.max(table.cell_max(i));
            tail[i] = run;
        }
        table.tail = tail;
        table
    }

    /// Monomial coefficients in `t` of the interpolant on cell `i`.
    fn coeffs(&self, i: usize) -> [f64; 6] {
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let h = self.step;
        let (d0, d1) = (self.derivs[i] * h, self.derivs[i + 1] * h);
        let (s0, s1) = (self.seconds[i] * h * h, self.seconds[i + 1] * h * h);
        [
            y0,
            d0,
            0.5 * s0,
            -10.0 * y0 - 6.0 * d0 - 1.5 * s0 + 0.5 * s1 - 4.0 * d1 + 10.0 * y1,
            15.0 * y0 + 8.0 * d0 + 1.5 * s0 - s1 + 7.0 * d1 - 15.0 * y1,
            -6.0 * y0 - 3.0 * d0 - 0.5 * s0 + 0.5 * s1 - 3.0 * d1 + 6.0 * y1,
        ]
    }

    /// Upper bound on `|p(t)|` over the cell: sampled maximum plus the
    /// linear-interpolation gap `delta^2 / 8 * sup |p''|`.
    fn cell_max(&self, i: usize) -> f64 {
        const SAMPLES: usize = 32;
        let c = self.coeffs(i);
        let mut best = 0.0f64;
        for j in 0..=SAMPLES {
            let t = j as f64 / SAMPLES as f64;
            let p = ((((c[5] * t + c[4]) * t + c[3]) * t + c[2]) * t + c[1]) * t + c[0];
            best = best.max(p.abs());
        }
        let curv: f64 = (2..6).map(|k| (k * (k - 1)) as f64 * c[k].abs()).sum();
        let delta = 1.0 / SAMPLES as f64;
        best + delta * delta / 8.0 * curv
    }

    fn eval(&self, eta: f64) -> f64 {
        let eta = eta.abs();
        let pos = eta / self.step;
        let i = pos as usize;
        if i + 1 >= self.values.len() {
            return 0.0;
        }
        let t = pos - i as f64;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let h = self.step;
        let (d0, d1) = (self.derivs[i] * h, self.derivs[i + 1] * h);
        let (s0, s1) = (self.seconds[i] * h * h, self.seconds[i + 1] * h * h);
        // quintic Hermite
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let t5 = t4 * t;
        let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
        let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
        let h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
        let h3 = 0.5 * (t3 - 2.0 * t4 + t5);
        let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
        let h5 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
        y0 * h0 + d0 * h1 + s0 * h2 + s1 * h3 + d1 * h4 + y1 * h5
    }
}

fn bump_unit(x: f64) -> f64 {
    let u = 1.0 - x * x;
    if u <= 0.0 {
        0.0
    } else {
        math::exp(-1.0 / u)
    }
}

fn bump_jet<const N: usize>(x: f64) -> Jet<N> {
    let t = Jet::<N>::var(x);
    let u = (t * t).scale(-1.0).add_const(1.0);
    if u.value() <= 1e-3 {
        return Jet::constant(0.0);
    }
    u.recip().scale(-1.0).exp()
}

/// An even test function supported on `[-radius, radius]`.
#[derive(Debug, Clone)]
pub struct TestFunction {
    pub radius: f64,
    pub smoothness: Smoothness,
    table: Option<Arc<BumpTable>>,
}

impl TestFunction {
    /// `f(x) = 1.5 M4(2x / radius)` with `M4` the cardinal cubic B-spline on
    /// `[-2, 2]`, so `f(0) = 1` and `f^(xi) = (3 radius / 4) sinc^4(pi radius xi / 2)`.
    pub fn bspline(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            bail!(InvalidParameter, "radius must be positive, got {radius}");
        }
        Ok(Self { radius, smoothness: Smoothness::C2Spline, table: None })
    }

    /// `f(x) = exp(-1 / (1 - (x / radius)^2))`.
    pub fn bump(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            bail!(InvalidParameter, "radius must be positive, got {radius}");
        }
        Ok(Self { radius, smoothness: Smoothness::CinfBump, table: Some(Arc::new(BumpTable::build())) })
    }

    /// A bump sharing the transform table of `self` (which must be a bump).
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            bail!(InvalidParameter, "radius must be positive, got {radius}");
        }
        Ok(Self { radius, smoothness: self.smoothness, table: self.table.clone() })
    }

    pub fn is_even(&self) -> bool {
        true
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = x.abs() / self.radius;
        match self.smoothness {
            Smoothness::C2Spline => {
                let t = 2.0 * t;
                1.5 * if t < 1.0 {
                    2.0 / 3.0 - t * t + 0.5 * t * t * t
                } else if t < 2.0 {
                    let u = 2.0 - t;
                    u * u * u / 6.0
                } else {
                    0.0
                }
            }
            Smoothness::CinfBump => bump_unit(t),
        }
    }

    /// `f^(xi) = int f(x) e(-x xi) dx`, real because `f` is even.
    pub fn fourier(&self, xi: f64) -> f64 {
        let r = self.radius;
        match self.smoothness {
            Smoothness::C2Spline => {
                let s = sinc(PI * r * xi / 2.0);
                0.75 * r * s * s * s * s
            }
            Smoothness::CinfBump => r * self.table.as_ref().map(|t| t.eval(r * xi)).unwrap_or(0.0),
        }
    }

    /// Upper bound on `|f^(eta)|` valid for all `|eta| >= |xi|`.
    pub fn fourier_tail_bound(&self, xi: f64) -> f64 {
        let r = self.radius;
        let xi = xi.abs();
        match self.smoothness {
            Smoothness::C2Spline => {
                if xi == 0.0 {
                    return 0.75 * r;
                }
                let q = 2.0 / (PI * r * xi);
                (0.75 * r * q * q * q * q).min(0.75 * r)
            }
            Smoothness::CinfBump => {
                let t = self.table.as_ref().expect("bump table");
                let eta = r * xi;
                let analytic = t.d8_norm * r / math::pow(TAU * eta.max(1e-300), 8.0);
                if eta >= BUMP_ETA_MAX {
                    return analytic;
                }
                let start = (eta / t.step) as usize;
                let tab = t.tail[start];
                let beyond = t.d8_norm * r / math::pow(TAU * BUMP_ETA_MAX, 8.0);
                // Interpolation error is far below 1e-14 but count it anyway.
                analytic.min(r * (tab + 1e-14)).max(beyond)
            }
        }
    }

    /// Smallest `xi` past which `|f^|` stays below `eps`.
    pub fn fourier_cutoff(&self, eps: f64) -> f64 {
        let r = self.radius;
        match self.smoothness {
            Smoothness::C2Spline => 2.0 / (PI * r) * math::pow(0.75 * r / eps, 0.25),
            Smoothness::CinfBump => {
                let (mut lo, mut hi) = (0.0, 1.0);
                while self.fourier_tail_bound(hi) > eps {
                    hi *= 2.0;
                    if hi > 1e12 {
                        break;
                    }
                }
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if self.fourier_tail_bound(mid) > eps {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        }
    }

    /// Breakpoints in `[a, b]` where the spline pieces change.
    fn knots_in(&self, shift: f64, a: f64, b: f64, out: &mut Vec<f64>) {
        if self.smoothness == Smoothness::C2Spline {
            for j in -2..=2 {
                let k = shift + j as f64 * self.radius / 2.0;
                if k > a && k < b {
                    out.push(k);
                }
            }
        }
    }

    /// `E(f^j) = int f(x)^j dx`.
    pub fn moment(&self, j: usize) -> Result<f64> {
        if j == 0 {
            bail!(InvalidParameter, "moment order must be at least 1");
        }
        let r = self.radius;
        Ok(match self.smoothness {
            Smoothness::C2Spline => {
                let gl = GaussLegendre::new((3 * j + 2) / 2 + 1);
                let mut br = alloc::vec![-r];
                self.knots_in(0.0, -r, r, &mut br);
                br.push(r);
                gl.integrate_pieces(&br, |x| math::pow(self.eval(x), j as f64))
            }
            Smoothness::CinfBump => {
                let (v, _) = quad::adaptive(-r, r, 1e-15 * r, |x| math::pow(self.eval(x), j as f64));
                v
            }
        })
    }

    pub fn mean(&self) -> f64 {
        self.moment(1).unwrap_or(0.0)
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        math::sin(x) / x
    }
}

/// The (m-1)-variable kernel induced by `f`.
#[derive(Debug, Clone)]
pub struct CorrKernel {
    pub base: TestFunction,
    pub m: usize,
}

impl CorrKernel {
    pub fn new(f: &TestFunction, m: usize) -> Result<Self> {
        if m < 2 {
            bail!(InvalidParameter, "kernel needs m >= 2, got {m}");
        }
        Ok(Self { base: f.clone(), m })
    }

    pub fn dim(&self) -> usize {
        self.m - 1
    }

    /// `F(z)` for `z` of length `m - 1`.
    pub fn eval(&self, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.m - 1);
        let mut w = alloc::vec![0.0; z.len()];
        let mut acc = 0.0;
        for i in (0..z.len()).rev() {
            acc += z[i];
            w[i] = acc;
        }
        self.eval_offsets(&w)
    }

    /// `G(w) = int f(s) prod_i f(s + w_i) ds`, so that `F(z) = G(partial sums of z)`.
    pub fn eval_offsets(&self, w: &[f64]) -> f64 {
        let r = self.base.radius;
        let mut lo = -r;
        let mut hi = r;
        for &wi in w {
            lo = lo.max(-r - wi);
            hi = hi.min(r - wi);
        }
        if hi <= lo {
            return 0.0;
        }
        let f = &self.base;
        let integrand = |s: f64| {
            let mut p = f.eval(s);
            for &wi in w {
                p *= f.eval(s + wi);
            }
            p
        };
        match f.smoothness {
            Smoothness::C2Spline => {
                let mut br = alloc::vec![lo];
                f.knots_in(0.0, lo, hi, &mut br);
                for &wi in w {
                    f.knots_in(-wi, lo, hi, &mut br);
                }
                br.push(hi);
                br.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let gl = GaussLegendre::new((3 * (w.len() + 1)).div_ceil(2) + 1);
                gl.integrate_pieces(&br, integrand)
            }
            Smoothness::CinfBump => quad::adaptive(lo, hi, 1e-15 * r, integrand).0,
        }
    }

    /// Each coordinate of the support lies in `[-2 radius, 2 radius]`.
    pub fn coord_radius(&self) -> f64 {
        2.0 * self.base.radius
    }
}

/// A kernel of `m - 1` nonnegative distances, as counted by the m-point correlation.
pub trait Kernel: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, z: &[f64]) -> f64;
    /// Every coordinate of the support satisfies `|z_i| < coord_radius`.
    fn coord_radius(&self) -> f64;
    /// `int F` over `R^(m-1)`.
    fn integral(&self) -> f64;
}

impl Kernel for CorrKernel {
    fn dim(&self) -> usize {
        self.m - 1
    }
    fn eval(&self, z: &[f64]) -> f64 {
        CorrKernel::eval(self, z)
    }
    fn coord_radius(&self) -> f64 {
        CorrKernel::coord_radius(self)
    }
    fn integral(&self) -> f64 {
        math::pow(self.base.mean(), self.m as f64)
    }
}

/// `F(z) = prod f(z_i)`.
#[derive(Debug, Clone)]
pub struct ProductKernel {
    pub base: TestFunction,
    pub dim: usize,
}

impl Kernel for ProductKernel {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, z: &[f64]) -> f64 {
        z.iter().map(|&x| self.base.eval(x)).product()
    }
    fn coord_radius(&self) -> f64 {
        self.base.radius
    }
    fn integral(&self) -> f64 {
        math::pow(self.base.mean(), self.dim as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spline_basics() {
        let f = TestFunction::bspline(1.0).unwrap();
        assert_eq!(f.eval(1.0), 0.0);
        assert_eq!(f.eval(3.0), 0.0);
        assert!((f.eval(0.0) - 1.0).abs() < 1e-15);
        assert!((f.fourier(0.0) - 0.75).abs() < 1e-15);
        assert!((f.moment(1).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn bump_table_against_quadrature() {
        let f = TestFunction::bump(1.0).unwrap();
        for &xi in &[0.0, 0.37, 1.0, 3.2, 7.77, 20.3] {
            let (v, _) = quad::adaptive(-1.0, 1.0, 1e-15, |x| f.eval(x) * math::cos(TAU * x * xi));
            assert!((f.fourier(xi) - v).abs() < 1e-12, "xi={xi}: {} vs {v}", f.fourier(xi));
        }
    }

    #[test]
    fn kernel_m2_is_second_moment() {
        let f = TestFunction::bspline(0.7).unwrap();
        let k = CorrKernel::new(&f, 2).unwrap();
        assert!((k.eval(&[0.0]) - f.moment(2).unwrap()).abs() < 1e-14);
        assert_eq!(k.eval(&[1.5]), 0.0);
    }
}

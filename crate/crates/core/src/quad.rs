//! Quadrature: Gauss-Legendre rules, adaptive Gauss-Kronrod, periodic
//! trapezoid refinement and an oscillatory integrator for `int g(s) e(phi(s)) ds`.

use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{bail, Result};
use crate::math::{self, PI};

/// Nodes and weights of the n-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = math::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// `int_a^b f`.
    pub fn integrate<T: QValue, F: FnMut(f64) -> T>(&self, a: f64, b: f64, mut f: F) -> T {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = T::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc = acc + f(mid + half * x) * (w * half);
        }
        acc
    }

    /// Composite rule over consecutive breakpoints.
    pub fn integrate_pieces<T: QValue, F: FnMut(f64) -> T>(&self, breaks: &[f64], mut f: F) -> T {
        let mut acc = T::zero();
        for w in breaks.windows(2) {
            if w[1] > w[0] {
                acc = acc + self.integrate(w[0], w[1], &mut f);
            }
        }
        acc
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Values that quadrature can accumulate.
pub trait QValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn mag(self) -> f64;
}

impl QValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn mag(self) -> f64 {
        self.abs()
    }
}

impl QValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn mag(self) -> f64 {
        self.norm()
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// One Gauss-Kronrod 7-15 step: (Kronrod value, |Kronrod - Gauss|).
pub fn gk15<T: QValue, F: FnMut(f64) -> T>(a: f64, b: f64, f: &mut F) -> (T, f64) {
    let (v, e, _) = gk15_l1(a, b, f);
    (v, e)
}

/// [`gk15`] plus the Kronrod estimate of `int |f|`.
fn gk15_l1<T: QValue, F: FnMut(f64) -> T>(a: f64, b: f64, f: &mut F) -> (T, f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    let mut l1 = fc.mag() * WGK[7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let (lo, hi) = (f(mid - dx), f(mid + dx));
        l1 += (lo.mag() + hi.mag()) * WGK[j];
        let s = lo + hi;
        k = k + s * WGK[j];
        if j % 2 == 1 {
            g = g + s * WG[j / 2];
        }
    }
    (k * half, ((k - g) * half).mag(), l1 * half.abs())
}

/// Adaptive Gauss-Kronrod with absolute tolerance. Returns (value, error estimate).
pub fn adaptive<T: QValue, F: FnMut(f64) -> T>(a: f64, b: f64, tol: f64, mut f: F) -> (T, f64) {
    let first = gk15_l1(a, b, &mut f);
    let floor = if a != b { ROUNDING * first.2 / (b - a).abs() } else { 0.0 };
    adaptive_rec(a, b, tol, floor, &mut f, 0, f64::INFINITY, Some(first))
}

/// Errors below `ROUNDING * int |f|` come from rounding steps in `f` itself.
const ROUNDING: f64 = 1e-14;

fn adaptive_rec<T: QValue, F: FnMut(f64) -> T>(a: f64, b: f64, tol: f64, floor: f64, f: &mut F, depth: usize, parent: f64, first: Option<(T, f64, f64)>) -> (T, f64) {
    let (v, e, l1) = first.unwrap_or_else(|| gk15_l1(a, b, f));
    // below the rounding floor, or past the point where halving still helps,
    // further splitting only multiplies noise
    let stalled = depth >= 12 && e > 0.25 * parent && e <= 1e-8 * l1;
    let noise = e <= ROUNDING * l1 || e <= floor * (b - a).abs();
    if e <= tol || noise || stalled || depth >= 48 || (b - a).abs() < 1e-14 * (1.0 + a.abs()) {
        return (v, e);
    }
    let m = 0.5 * (a + b);
    let (v1, e1) = adaptive_rec(a, m, 0.5 * tol, floor, f, depth + 1, e, None);
    let (v2, e2) = adaptive_rec(m, b, 0.5 * tol, floor, f, depth + 1, e, None);
    (v1 + v2, e1 + e2)
}

/// Adaptive integration over consecutive breakpoints.
pub fn adaptive_pieces<T: QValue, F: FnMut(f64) -> T>(breaks: &[f64], tol: f64, mut f: F) -> (T, f64) {
    let total: f64 = breaks.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let first: Vec<Option<(T, f64, f64)>> = breaks.windows(2).map(|w| if w[1] > w[0] { Some(gk15_l1(w[0], w[1], &mut f)) } else { None }).collect();
    let l1: f64 = first.iter().flatten().map(|x| x.2).sum();
    // the rounding floor per unit length, measured against the whole integral
    let floor = if total > 0.0 { ROUNDING * l1 / total } else { 0.0 };
    let mut acc = T::zero();
    let mut err = 0.0;
    for (w, first) in breaks.windows(2).zip(first) {
        if first.is_some() {
            let (v, e) = adaptive_rec(w[0], w[1], tol * (w[1] - w[0]) / total, floor, &mut f, 0, f64::INFINITY, first);
            acc = acc + v;
            err += e;
        }
    }
    (acc, err)
}

/// Outcome of a doubling trapezoid refinement on the unit circle.
#[derive(Debug, Clone)]
pub struct Refined<T> {
    pub value: T,
    pub nodes: usize,
    pub change: f64,
}

/// Trapezoid rule for a 1-periodic integrand, doubling from `m0` nodes until
/// two successive values differ by at most `tol`. Each doubling only evaluates
/// the new midpoints; `eval` receives the node indices to evaluate at spacing `1/m`.
pub fn periodic_refine<F>(m0: usize, max_nodes: usize, tol: f64, width: usize, mut eval: F) -> Result<Refined<Vec<f64>>>
where
    F: FnMut(usize, usize, usize) -> Vec<f64>,
{
    // eval(m, start, step) returns the componentwise sum over nodes j = start, start+step, ... < m.
    let mut m = m0.max(2);
    let mut sums = eval(m, 0, 1);
    let mut prev: Vec<f64> = sums.iter().map(|s| s / m as f64).collect();
    loop {
        if 2 * m > max_nodes {
            bail!(NotConverged, "trapezoid did not reach tolerance {tol} within {max_nodes} nodes");
        }
        let odd = eval(2 * m, 1, 2);
        for w in 0..width {
            sums[w] += odd[w];
        }
        m *= 2;
        let cur: Vec<f64> = sums.iter().map(|s| s / m as f64).collect();
        let change = cur.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if change <= tol {
            return Ok(Refined { value: cur, nodes: m, change });
        }
        prev = cur;
    }
}

/// Tuning for [`oscillatory`].
#[derive(Debug, Clone, Copy)]
pub struct OscOptions {
    pub tol: f64,
    /// Monotone pieces with fewer cycles than this are integrated directly.
    pub direct_cycles: f64,
    /// Chebyshev points per asymptotic-Filon panel.
    pub cheb_points: usize,
    /// Grid used to locate stationary points.
    pub scan_points: usize,
}

impl Default for OscOptions {
    fn default() -> Self {
        Self { tol: 1e-10, direct_cycles: 128.0, cheb_points: 20, scan_points: 2048 }
    }
}

/// `int_a^b g(s) e(phi(s)) ds` where `dphi` is the derivative of `phi`.
///
/// Stationary points are located by a sign scan of `dphi`. Monotone pieces are
/// either split at equal phase increments and integrated with Gauss-Kronrod,
/// or, when they carry many cycles, handled by the substitution `t = phi(s)`:
/// the smooth factor `g / phi'` is interpolated in `t` and the resulting
/// polynomial times `e(t)` is integrated exactly by repeated parts.
pub fn oscillatory<G, P, D>(a: f64, b: f64, g: G, phi: P, dphi: D, opt: OscOptions) -> (Complex64, f64)
where
    G: Fn(f64) -> f64,
    P: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut breaks = alloc::vec![a];
    let n = opt.scan_points.max(4);
    let mut prev = dphi(a);
    for i in 1..=n {
        let x = a + (b - a) * i as f64 / n as f64;
        let d = dphi(x);
        if prev * d < 0.0 {
            let (mut lo, mut hi) = (x - (b - a) / n as f64, x);
            let sl = prev;
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if dphi(mid) * sl > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            breaks.push(0.5 * (lo + hi));
        }
        if d != 0.0 {
            prev = d;
        }
    }
    breaks.push(b);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    for w in breaks.windows(2) {
        let local = opt.tol * (w[1] - w[0]) / (b - a);
        let (v, e) = monotone_piece(w[0], w[1], &g, &phi, &dphi, local, &opt, 0);
        acc += v;
        err += e;
    }
    (acc, err)
}

fn monotone_piece<G, P, D>(s0: f64, s1: f64, g: &G, phi: &P, dphi: &D, tol: f64, opt: &OscOptions, depth: usize) -> (Complex64, f64)
where
    G: Fn(f64) -> f64,
    P: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let (p0, p1) = (phi(s0), phi(s1));
    let cycles = (p1 - p0).abs();
    if cycles <= opt.direct_cycles || depth > 40 {
        return direct_piece(s0, s1, p0, p1, g, phi, tol);
    }
    if let Some(r) = filon_piece(s0, s1, p0, p1, g, phi, dphi, tol, opt) {
        return r;
    }
    let pm = 0.5 * (p0 + p1);
    let sm = invert(phi, s0, s1, p0, p1, pm);
    let (v1, e1) = monotone_piece(s0, sm, g, phi, dphi, 0.5 * tol, opt, depth + 1);
    let (v2, e2) = monotone_piece(sm, s1, g, phi, dphi, 0.5 * tol, opt, depth + 1);
    (v1 + v2, e1 + e2)
}

fn invert<P: Fn(f64) -> f64>(phi: &P, s0: f64, s1: f64, p0: f64, p1: f64, target: f64) -> f64 {
    let inc = p1 > p0;
    let (mut lo, mut hi) = (s0, s1);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        let v = phi(mid);
        if (v < target) == inc {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * (1.0 + lo.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn direct_piece<G, P>(s0: f64, s1: f64, p0: f64, p1: f64, g: &G, phi: &P, tol: f64) -> (Complex64, f64)
where
    G: Fn(f64) -> f64,
    P: Fn(f64) -> f64,
{
    let panels = math::ceil(2.0 * (p1 - p0).abs()).max(1.0) as usize;
    let mut cuts = Vec::with_capacity(panels + 1);
    cuts.push(s0);
    for j in 1..panels {
        let t = p0 + (p1 - p0) * j as f64 / panels as f64;
        cuts.push(invert(phi, s0, s1, p0, p1, t));
    }
    cuts.push(s1);
    // e(phi) cannot be more accurate than the rounding of phi itself
    let gmax = (0..=8).map(|i| g(s0 + (s1 - s0) * i as f64 / 8.0).abs()).fold(0.0, f64::max);
    let floor = 8.0 * f64::EPSILON * 2.0 * PI * p0.abs().max(p1.abs()) * gmax * (s1 - s0).abs();
    adaptive_pieces(&cuts, tol.max(floor), |s| math::e(phi(s)) * g(s))
}

fn filon_piece<G, P, D>(s0: f64, s1: f64, p0: f64, p1: f64, g: &G, phi: &P, dphi: &D, tol: f64, opt: &OscOptions) -> Option<(Complex64, f64)>
where
    G: Fn(f64) -> f64,
    P: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let n = opt.cheb_points;
    let (ta, tb) = (p0.min(p1), p0.max(p1));
    let half = 0.5 * (tb - ta);
    let mid = 0.5 * (ta + tb);
    // Chebyshev-Lobatto samples of H(t) = g(s(t)) / phi'(s(t)).
    let mut vals = alloc::vec![0.0; n];
    let mut hmax: f64 = 0.0;
    for j in 0..n {
        let tau = math::cos(PI * j as f64 / (n - 1) as f64);
        let t = mid + half * tau;
        let s = if j == 0 {
            if p1 > p0 { s1 } else { s0 }
        } else if j == n - 1 {
            if p1 > p0 { s0 } else { s1 }
        } else {
            invert(phi, s0, s1, p0, p1, t)
        };
        let d = dphi(s);
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        vals[j] = g(s) / d;
        hmax = hmax.max(vals[j].abs());
    }
    let coef = cheb_coeffs(&vals);
    let tail = coef[n - 1].abs() + coef[n - 2].abs() + 0.5 * coef[n - 3].abs();
    let err = tail * 2.0 * half;
    if err > tol && err > 1e-15 * hmax * 2.0 * half {
        return None;
    }
    // Endpoint derivatives of the interpolant with respect to t.
    let mut c = coef;
    let mut at_hi = Complex64::new(0.0, 0.0);
    let mut at_lo = Complex64::new(0.0, 0.0);
    let w = Complex64::new(0.0, 2.0 * PI);
    let mut denom = w;
    let mut sign = 1.0;
    for _ in 0..n {
        let vh: f64 = c.iter().sum();
        let vl: f64 = c.iter().enumerate().map(|(k, x)| if k % 2 == 0 { *x } else { -*x }).sum();
        at_hi += vh * sign / denom;
        at_lo += vl * sign / denom;
        if c.iter().all(|x| *x == 0.0) {
            break;
        }
        c = cheb_deriv(&c);
        c.iter_mut().for_each(|x| *x /= half);
        denom *= w;
        sign = -sign;
    }
    let v = math::e(tb) * at_hi - math::e(ta) * at_lo;
    // H already carries the orientation through the sign of phi'.
    let v = if p1 > p0 { v } else { -v };
    Some((v, err))
}

/// Chebyshev coefficients from values at Lobatto points `cos(pi j/(n-1))`.
fn cheb_coeffs(vals: &[f64]) -> Vec<f64> {
    let n = vals.len();
    let m = (n - 1) as f64;
    (0..n)
        .map(|k| {
            let mut s = 0.0;
            for j in 0..n {
                let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
                s += w * vals[j] * math::cos(PI * (k * j) as f64 / m);
            }
            let s = 2.0 * s / m;
            if k == 0 || k == n - 1 {
                0.5 * s
            } else {
                s
            }
        })
        .collect()
}

fn cheb_deriv(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut d = alloc::vec![0.0; n];
    if n < 2 {
        return d;
    }
    for k in (1..n).rev() {
        let next = if k + 1 < n { d[k + 1] } else { 0.0 };
        d[k - 1] = next + 2.0 * k as f64 * c[k];
    }
    d[0] *= 0.5;
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_polynomials_exact() {
        let gl = GaussLegendre::new(5);
        // exact for degree 9
        let v: f64 = gl.integrate(0.0, 2.0, |x| x.powi(9));
        assert!((v - 102.4).abs() < 1e-12);
        let w: f64 = gl.weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_sqrt() {
        let (v, _) = adaptive(0.0, 1.0, 1e-12, |x: f64| x.sqrt());
        assert!((v - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn oscillatory_linear_phase() {
        // int_0^1 e(lambda s) ds
        for &lam in &[3.0, 500.0, 20000.5] {
            let (v, _) = oscillatory(0.0, 1.0, |_| 1.0, |s| lam * s, |_| lam, OscOptions::default());
            let exact = (math::e(lam) - Complex64::new(1.0, 0.0)) / Complex64::new(0.0, 2.0 * PI * lam);
            assert!((v - exact).norm() < 1e-11, "lam={lam} got {v} want {exact}");
        }
    }

    #[test]
    fn oscillatory_gaussian_chirp() {
        // int_{-1}^{1} e(T s^2) exp(-s^2) ds against a brute force fine rule
        let t = 3000.0;
        let (v, _) = oscillatory(-1.0, 1.0, |s| (-s * s).exp(), |s| t * s * s, |s| 2.0 * t * s, OscOptions::default());
        let gl = GaussLegendre::new(30);
        let breaks: Vec<f64> = (0..=40000).map(|i| -1.0 + 2.0 * i as f64 / 40000.0).collect();
        let r: Complex64 = gl.integrate_pieces(&breaks, |s| math::e(t * s * s) * (-s * s).exp());
        assert!((v - r).norm() < 1e-10, "{v} vs {r}");
    }
}

//! Dyadic smooth windows in `n` and `k`, the windowed exponential sums
//! `E_{q,u}(s)`, and the degenerate-block bookkeeping.
//!
//! Every window is a difference of smooth steps `rho`, so the families
//! telescope and their partition-of-unity residual is pure rounding.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{bail, Result};
use crate::exec::Executor;
use crate::jet::Jet;
use crate::math::{self, KahanSum, LN2, TAU};
use crate::seqcore::{phase_dd, phase_std, SequenceSpec};
use crate::testfn::TestFunction;

pub const DEFAULT_EPS: f64 = 0.05;
pub const DEFAULT_DELTA: f64 = 0.1;
/// Largest per-term phase error accepted before a sum is declared uncertified.
pub const PHASE_CERT: f64 = 1e-8;

/// Width in `ln x` of one log ramp; chosen so the window with index `q`
/// lives on `[e^q / 2, 2 e^q)`.
const LOG_WIDTH: f64 = 2.0 * LN2 - 1.0;
const CERT_POINTS: usize = 2001;

/// `rho(t) = psi(t) / (psi(t) + psi(1 - t))`, `psi(t) = exp(-1/t)`: 0 for
/// `t <= 0`, 1 for `t >= 1`, and `C^inf` in between.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let g = 1.0 / t - 1.0 / (1.0 - t);
    if g > 700.0 {
        0.0
    } else if g < -700.0 {
        1.0
    } else {
        1.0 / (1.0 + math::exp(g))
    }
}

pub fn smooth_step_jet<const M: usize>(t: Jet<M>) -> Jet<M> {
    let v = t.value();
    if v <= 0.0 {
        return Jet::constant(0.0);
    }
    if v >= 1.0 {
        return Jet::constant(1.0);
    }
    let g = t.recip() - t.scale(-1.0).add_const(1.0).recip();
    if g.value() > 700.0 {
        Jet::constant(0.0)
    } else if g.value() < -700.0 {
        Jet::constant(1.0)
    } else if g.value() > 0.0 {
        // e^g overflows the derivative recursion of 1 / (1 + e^g) near g = 700
        let h = (-g).exp();
        h * h.add_const(1.0).recip()
    } else {
        g.exp().add_const(1.0).recip()
    }
}

#[inline]
fn log_ramp(x: f64, a: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    smooth_step(ramp_arg(x, a))
}

#[inline]
fn ramp_arg(x: f64, a: f64) -> f64 {
    (math::ln(x) - a + LN2) / LOG_WIDTH
}

/// `rho(t) - rho(t')` for two ramps whose transitions do not overlap; the
/// falling side is `rho(1 - t')` so nothing cancels against 1.
#[inline]
fn step_difference(t: f64, t_next: f64) -> f64 {
    if t_next <= 0.0 {
        smooth_step(t)
    } else if t >= 1.0 {
        smooth_step(1.0 - t_next)
    } else {
        smooth_step(t) - smooth_step(t_next)
    }
}

fn log_ramp_jet(x: Jet<5>, a: f64) -> Jet<5> {
    if x.value() <= 0.0 {
        return Jet::constant(0.0);
    }
    smooth_step_jet(x.ln().add_const(LN2 - a).scale(1.0 / LOG_WIDTH))
}

#[inline]
fn log_window(x: f64, q: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    step_difference(ramp_arg(x, q), ramp_arg(x, q + 1.0))
}

fn log_window_jet(x: Jet<5>, q: f64) -> Jet<5> {
    log_ramp_jet(x, q) - log_ramp_jet(x, q + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    N(i64),
    K(i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    BelowQ,
    AboveQ,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Log { q: f64 },
    Fine { j: usize, count: usize, base: f64, width: f64, top: f64, cut: f64 },
    KEven,
    KNeg { u: f64 },
}

/// One window with its support hull and measured derivative sups.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicWindow {
    pub kind: WindowKind,
    pub regime: Regime,
    /// Closed hull of the support.
    pub support: (f64, f64),
    /// Natural length scale: `e^q` below `Q`, `e^Q / Q` above.
    pub scale: f64,
    /// `sup |W^(t)|` for `t = 0..=4`, measured on a grid over the support.
    pub deriv_sup: [f64; 5],
    shape: Shape,
}

impl DyadicWindow {
    fn new(kind: WindowKind, regime: Regime, support: (f64, f64), scale: f64, shape: Shape) -> Self {
        let mut w = Self { kind, regime, support, scale, deriv_sup: [0.0; 5], shape };
        w.certify();
        w
    }

    fn certify(&mut self) {
        let (a, b) = self.support;
        let mut sup = [0.0f64; 5];
        for i in 0..CERT_POINTS {
            let x = a + (b - a) * i as f64 / (CERT_POINTS - 1) as f64;
            let j = self.eval_jet(x);
            for t in 0..5 {
                sup[t] = sup[t].max(j.deriv(t).abs());
            }
        }
        self.deriv_sup = sup;
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.shape {
            Shape::Log { q } => log_window(x, q),
            Shape::KEven => log_window(x.abs(), 0.0),
            Shape::KNeg { u } => log_window(-x, u),
            Shape::Fine { j, count, base, width, top, cut } => {
                if x < base || x >= cut + width {
                    return 0.0;
                }
                let g = log_ramp(x, top) * smooth_step(1.0 - (x - cut) / width);
                // lam(i) = rho((x - base - i W) / W), with lam(0) = 1 and lam(count) = 0
                let t = |i: usize| (x - base - i as f64 * width) / width;
                let d = match (j, j + 1 >= count) {
                    (0, true) => 1.0,
                    (0, false) => smooth_step(1.0 - t(j + 1)),
                    (_, true) => smooth_step(t(j)),
                    (_, false) => step_difference(t(j), t(j + 1)),
                };
                g * d
            }
        }
    }

    /// Taylor jet of order 4 at `x`.
    pub fn eval_jet(&self, x: f64) -> Jet<5> {
        match self.shape {
            Shape::Log { q } => log_window_jet(Jet::var(x), q),
            Shape::KEven | Shape::KNeg { .. } => {
                let q = if let Shape::KNeg { u } = self.shape { u } else { 0.0 };
                let flip = matches!(self.shape, Shape::KNeg { .. }) || x < 0.0;
                if flip {
                    let mut j = log_window_jet(Jet::var(-x), q);
                    for t in (1..5).step_by(2) {
                        j.c[t] = -j.c[t];
                    }
                    j
                } else {
                    log_window_jet(Jet::var(x), q)
                }
            }
            Shape::Fine { j, count, base, width, top, cut } => {
                let t = Jet::<5>::var(x);
                let g = log_ramp_jet(t, top) * (Jet::constant(1.0) - smooth_step_jet(t.add_const(-cut).scale(1.0 / width)));
                let lam = |i: usize| {
                    if i == 0 {
                        Jet::constant(1.0)
                    } else if i >= count {
                        Jet::constant(0.0)
                    } else {
                        smooth_step_jet(t.add_const(-base - i as f64 * width).scale(1.0 / width))
                    }
                };
                g * (lam(j) - lam(j + 1))
            }
        }
    }

    /// `sup |W^(t)| * scale^t`, the quantity that should stay bounded.
    pub fn scaled_deriv(&self, t: usize) -> f64 {
        self.deriv_sup[t] * math::pow(self.scale, t as f64)
    }

    /// First and last integer in the support hull.
    pub fn integer_range(&self) -> (i64, i64) {
        (math::ceil(self.support.0) as i64, math::floor(self.support.1) as i64)
    }
}

/// The `n`-windows for a given `N`: log windows for `q < Q`, then fine
/// windows of width `W = e^Q / (2Q)` tiling `[e^Q / 2, N + W)` and cut off on
/// `[N, N + W]`.
#[derive(Debug, Clone)]
pub struct NWindows {
    pub n: u64,
    pub big_q: i64,
    pub width: f64,
    pub fine_count: usize,
    windows: Vec<DyadicWindow>,
}

impl NWindows {
    pub fn new(n: u64) -> Result<Self> {
        if n < 8 {
            bail!(InvalidParameter, "N must be at least 8, got {n}");
        }
        let nf = n as f64;
        let big_q = math::floor(math::ln(nf)) as i64;
        let eq = math::exp(big_q as f64);
        let width = eq / (2.0 * big_q as f64);
        let base = eq / 2.0;
        let fine_count = math::ceil((nf + width - base) / width) as usize;
        let mut windows = Vec::with_capacity(big_q as usize + fine_count);
        for q in 0..big_q {
            let e = math::exp(q as f64);
            windows.push(DyadicWindow::new(WindowKind::N(q), Regime::BelowQ, (e / 2.0, 2.0 * e), e, Shape::Log { q: q as f64 }));
        }
        for j in 0..fine_count {
            let lo = base + j as f64 * width;
            let hi = (base + (j + 2) as f64 * width).min(nf + width);
            let shape = Shape::Fine { j, count: fine_count, base, width, top: big_q as f64, cut: nf };
            windows.push(DyadicWindow::new(WindowKind::N(big_q + j as i64), Regime::AboveQ, (lo, hi), eq / big_q as f64, shape));
        }
        Ok(Self { n, big_q, width, fine_count, windows })
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn get(&self, q: i64) -> Result<&DyadicWindow> {
        if q < 0 || q as usize >= self.windows.len() {
            bail!(OutOfRange, "q = {q} outside 0..{}", self.windows.len());
        }
        Ok(&self.windows[q as usize])
    }

    pub fn iter(&self) -> impl Iterator<Item = &DyadicWindow> {
        self.windows.iter()
    }

    /// Logarithmic size of the `n` carried by window `q`: `q` itself below
    /// `Q`, and `Q` for the fine windows, which all live near `e^Q`.
    pub fn log_scale(&self, q: i64) -> i64 {
        q.min(self.big_q)
    }

    /// Degeneracy of `(q, u)` with the fine windows classified at scale `Q`.
    pub fn classify(&self, alpha: f64, theta: f64, q: i64, u: i64, delta: f64) -> Result<BlockClass> {
        classify_degenerate(alpha, theta, u, self.log_scale(q), self.big_q, delta)
    }

    /// `sum_q N_q(x)`.
    pub fn total(&self, x: f64) -> f64 {
        self.windows.iter().map(|w| w.eval(x)).sum()
    }

    /// `max_q sup |N_q^(t)| scale_q^t`.
    pub fn uniform_constant(&self, t: usize) -> f64 {
        self.windows.iter().map(|w| w.scaled_deriv(t)).fold(0.0, f64::max)
    }
}

/// The `k`-windows `K_u`, `|u| <= U = ceil((1 + eps) ln N)`.
#[derive(Debug, Clone)]
pub struct KWindows {
    pub n: u64,
    pub eps: f64,
    pub big_u: i64,
    windows: Vec<DyadicWindow>,
}

impl KWindows {
    pub fn new(n: u64, eps: f64) -> Result<Self> {
        if n < 2 {
            bail!(InvalidParameter, "N must be at least 2, got {n}");
        }
        if !(eps > 0.0 && eps < 10.0) {
            bail!(InvalidParameter, "eps must lie in (0, 10), got {eps}");
        }
        let big_u = math::ceil((1.0 + eps) * math::ln(n as f64)) as i64;
        let mut windows = Vec::with_capacity(2 * big_u as usize + 1);
        for u in -big_u..=big_u {
            let e = math::exp(u.abs() as f64);
            let w = if u > 0 {
                DyadicWindow::new(WindowKind::K(u), Regime::BelowQ, (e / 2.0, 2.0 * e), e, Shape::Log { q: u as f64 })
            } else if u == 0 {
                DyadicWindow::new(WindowKind::K(0), Regime::BelowQ, (-2.0, 2.0), 1.0, Shape::KEven)
            } else {
                DyadicWindow::new(WindowKind::K(u), Regime::BelowQ, (-2.0 * e, -e / 2.0), e, Shape::KNeg { u: -u as f64 })
            };
            windows.push(w);
        }
        Ok(Self { n, eps, big_u, windows })
    }

    pub fn get(&self, u: i64) -> Result<&DyadicWindow> {
        if u.abs() > self.big_u {
            bail!(OutOfRange, "|u| = {} exceeds U = {}", u.abs(), self.big_u);
        }
        Ok(&self.windows[(u + self.big_u) as usize])
    }

    pub fn iter(&self) -> impl Iterator<Item = &DyadicWindow> {
        self.windows.iter()
    }

    /// `sum_u K_u(k)`.
    pub fn total(&self, k: f64) -> f64 {
        self.windows.iter().map(|w| w.eval(k)).sum()
    }

    /// Largest `|k|` below which the family sums to one.
    pub fn covered_up_to(&self) -> f64 {
        math::exp((self.big_u + 1) as f64) / 2.0
    }

    pub fn uniform_constant(&self, t: usize) -> f64 {
        self.windows.iter().map(|w| w.scaled_deriv(t)).fold(0.0, f64::max)
    }
}

/// `sum_n w_n e(k y_n)` plus `sum_n w_n * 2 pi * (phase error)`.
fn weighted_phase_sum(k: i64, ys: &[f64], ys_dd: &[crate::dd::Dd], ws: &[f64]) -> (Complex64, f64, f64) {
    let mut re = KahanSum::new();
    let mut im = KahanSum::new();
    let mut err = 0.0;
    let mut worst: f64 = 0.0;
    for i in 0..ws.len() {
        let p = if ys_dd.is_empty() { phase_std(k, ys[i]) } else { phase_dd(k, ys_dd[i]) };
        let z = math::e(p.value_mod1);
        re.add(ws[i] * z.re);
        im.add(ws[i] * z.im);
        err += ws[i].abs() * TAU * p.abs_error_bound;
        worst = worst.max(p.abs_error_bound);
    }
    (Complex64::new(re.value(), im.value()), err, worst)
}

/// Window weights and sequence values for the integers in `supp N_q`.
pub(crate) struct NSlice {
    pub ns: Vec<u64>,
    pub ws: Vec<f64>,
    pub ys: Vec<f64>,
    pub ys_dd: Vec<crate::dd::Dd>,
}

impl NSlice {
    pub(crate) fn new(seq: &SequenceSpec, win: &DyadicWindow, k_max: f64) -> Self {
        let (lo, hi) = win.integer_range();
        let lo = lo.max(1);
        let mut ns = Vec::new();
        let mut ws = Vec::new();
        for n in lo..=hi {
            let w = win.eval(n as f64);
            if w != 0.0 {
                ns.push(n as u64);
                ws.push(w);
            }
        }
        let y_max = ns.last().map(|&n| seq.y_std(n)).unwrap_or(0.0);
        let (ys, ys_dd) = if seq.wants_dd(k_max, y_max) {
            (Vec::new(), ns.iter().map(|&n| seq.y_dd(n)).collect())
        } else {
            (ns.iter().map(|&n| seq.y_std(n)).collect(), Vec::new())
        };
        Self { ns, ws, ys, ys_dd }
    }

    pub(crate) fn sum(&self, k: i64) -> (Complex64, f64, f64) {
        weighted_phase_sum(k, &self.ys, &self.ys_dd, &self.ws)
    }
}

/// The coefficients `d_k` of `E_{q,u}(s) = sum_k d_k e(k s)`.
#[derive(Debug, Clone)]
pub struct EquBlock {
    pub q: i64,
    pub u: i64,
    pub n: u64,
    pub ks: Vec<i64>,
    /// Inner sums `T_k = sum_n N_q(n) e(k y(n))`.
    pub inner: Vec<Complex64>,
    pub coeffs: Vec<Complex64>,
    /// Bound on what the `k`-cut removed from the block.
    pub truncation_bound: f64,
    /// Bound on the error introduced by phase rounding.
    pub phase_error_bound: f64,
}

impl EquBlock {
    /// Builds the block, keeping `|k| <= k_cut` when a cut is given.
    pub fn new<E: Executor>(
        seq: &SequenceSpec,
        f: &TestFunction,
        nw: &NWindows,
        kw: &KWindows,
        q: i64,
        u: i64,
        k_cut: Option<i64>,
        exec: &E,
    ) -> Result<Self> {
        let nwin = nw.get(q)?;
        let kwin = kw.get(u)?;
        let nf = nw.n as f64;
        let (klo, khi) = kwin.integer_range();
        let cut = k_cut.unwrap_or(i64::MAX);
        let mut ks = Vec::new();
        let mut dropped = 0usize;
        for k in klo..=khi {
            if k == 0 || kwin.eval(k as f64) == 0.0 {
                continue;
            }
            if k.abs() > cut {
                dropped += 1;
            } else {
                ks.push(k);
            }
        }
        let k_max = ks.iter().map(|k| k.abs()).max().unwrap_or(0) as f64;
        let slice = NSlice::new(seq, nwin, k_max);
        let wsum: f64 = slice.ws.iter().sum();
        let truncation_bound = if dropped > 0 { dropped as f64 * f.fourier_tail_bound((cut + 1) as f64 / nf) * wsum / nf } else { 0.0 };
        let res = exec.map(ks.len(), |i| {
            let k = ks[i];
            let (t, err, worst) = slice.sum(k);
            let amp = kwin.eval(k as f64) * f.fourier(k as f64 / nf) / nf;
            (t, Complex64::new(amp, 0.0) * t, amp.abs() * err, worst)
        });
        let worst = res.iter().map(|r| r.3).fold(0.0, f64::max);
        if worst > PHASE_CERT {
            bail!(Certificate, "phase error {worst:e} exceeds {PHASE_CERT:e} in block (q={q}, u={u})");
        }
        let phase_error_bound = res.iter().map(|r| r.2).sum();
        Ok(Self {
            q,
            u,
            n: nw.n,
            inner: res.iter().map(|r| r.0).collect(),
            coeffs: res.iter().map(|r| r.1).collect(),
            ks,
            truncation_bound,
            phase_error_bound,
        })
    }

    pub fn eval(&self, s: f64) -> Complex64 {
        let mut re = KahanSum::new();
        let mut im = KahanSum::new();
        for (k, d) in self.ks.iter().zip(&self.coeffs) {
            let z = *d * math::e(math::frac(*k as f64 * s));
            re.add(z.re);
            im.add(z.im);
        }
        Complex64::new(re.value(), im.value())
    }

    /// Values at `s = i / nodes`, `i < nodes`.
    pub fn grid<E: Executor>(&self, nodes: usize, exec: &E) -> GridEqu {
        let s: Vec<f64> = (0..nodes).map(|i| i as f64 / nodes as f64).collect();
        let values = exec.map(nodes, |i| self.eval(s[i]));
        GridEqu { q: self.q, u: self.u, n: self.n, s, values }
    }
}

/// `E_{q,u}` sampled on a grid.
#[derive(Debug, Clone)]
pub struct GridEqu {
    pub q: i64,
    pub u: i64,
    pub n: u64,
    pub s: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl GridEqu {
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// `E_{q,u}(s)` in one call.
pub fn e_qu_eval<E: Executor>(seq: &SequenceSpec, f: &TestFunction, n: u64, q: i64, u: i64, s: f64, exec: &E) -> Result<Complex64> {
    let nw = NWindows::new(n)?;
    let kw = KWindows::new(n, DEFAULT_EPS)?;
    Ok(EquBlock::new(seq, f, &nw, &kw, q, u, None, exec)?.eval(s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockClass {
    /// `slow_phase`: `alpha theta e^{|u| + (theta - 1) q} < 1/10`;
    /// `short_range`: `q <= delta Q`.
    Degenerate { slow_phase: bool, short_range: bool },
    Nondegenerate,
}

impl BlockClass {
    pub fn is_degenerate(&self) -> bool {
        matches!(self, BlockClass::Degenerate { .. })
    }
}

pub fn classify_degenerate(alpha: f64, theta: f64, u: i64, q: i64, big_q: i64, delta: f64) -> Result<BlockClass> {
    if !(delta > 0.0 && delta < 0.5) {
        bail!(InvalidParameter, "delta must lie in (0, 1/2), got {delta}");
    }
    let slow_phase = alpha * theta * math::exp(u.abs() as f64 + (theta - 1.0) * q as f64) < 0.1;
    let short_range = q as f64 <= delta * big_q as f64;
    Ok(if slow_phase || short_range { BlockClass::Degenerate { slow_phase, short_range } } else { BlockClass::Nondegenerate })
}

/// Largest `|T_k| |k| e^{(theta - 1) q}` over the `k`-window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KusminLandau {
    pub q: i64,
    pub u: i64,
    pub max_ratio: f64,
    pub argmax_k: i64,
    pub terms: usize,
}

pub fn kusmin_landau_check<E: Executor>(seq: &SequenceSpec, nw: &NWindows, kw: &KWindows, q: i64, u: i64, exec: &E) -> Result<KusminLandau> {
    let qs = nw.log_scale(q) as f64;
    let slow = seq.alpha * seq.theta * math::exp(u.abs() as f64 + (seq.theta - 1.0) * qs) < 0.1;
    if !slow {
        bail!(Precondition, "block (q={q}, u={u}) is not degenerate through a slow phase");
    }
    let nwin = nw.get(q)?;
    let kwin = kw.get(u)?;
    let (klo, khi) = kwin.integer_range();
    let ks: Vec<i64> = (klo..=khi).filter(|&k| k != 0 && kwin.eval(k as f64) != 0.0).collect();
    let k_max = ks.iter().map(|k| k.abs()).max().unwrap_or(0) as f64;
    let slice = NSlice::new(seq, nwin, k_max);
    let scale = math::exp((seq.theta - 1.0) * qs);
    let ratios = exec.map(ks.len(), |i| slice.sum(ks[i]).0.norm() * ks[i].abs() as f64 * scale);
    let (mut best, mut arg) = (0.0, 0);
    for (i, &r) in ratios.iter().enumerate() {
        if r > best {
            best = r;
            arg = ks[i];
        }
    }
    Ok(KusminLandau { q, u, max_ratio: best, argmax_k: arg, terms: slice.ns.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_is_symmetric() {
        for &t in &[0.1, 0.3, 0.5, 0.77] {
            assert!((smooth_step(t) + smooth_step(1.0 - t) - 1.0).abs() < 1e-15);
        }
        assert_eq!(smooth_step(-1.0), 0.0);
        assert_eq!(smooth_step(1.5), 1.0);
    }

    #[test]
    fn jet_matches_finite_difference() {
        let h = 1e-5;
        for &t in &[0.2, 0.45, 0.8] {
            let j = smooth_step_jet(Jet::<5>::var(t));
            let fd = (smooth_step(t + h) - smooth_step(t - h)) / (2.0 * h);
            assert!((j.deriv(1) - fd).abs() < 1e-8);
            let fd2 = (smooth_step(t + h) - 2.0 * smooth_step(t) + smooth_step(t - h)) / (h * h);
            assert!((j.deriv(2) - fd2).abs() < 1e-4);
        }
    }

    #[test]
    fn log_window_support() {
        let nw = NWindows::new(1000).unwrap();
        let w = nw.get(3).unwrap();
        let e3 = math::exp(3.0);
        assert_eq!(w.eval(e3 / 2.0 - 1e-9), 0.0);
        assert_eq!(w.eval(2.0 * e3 + 1e-9), 0.0);
        assert!(w.eval(e3) > 0.0);
    }

    #[test]
    fn degenerate_examples() {
        assert_eq!(classify_degenerate(1.0, 0.5, 1, 10, 12, 0.1).unwrap(), BlockClass::Degenerate { slow_phase: true, short_range: false });
        assert!(classify_degenerate(1.0, 0.5, 20, 0, 12, 0.1).unwrap().is_degenerate());
        assert_eq!(classify_degenerate(1.0, 0.5, 8, 10, 12, 0.1).unwrap(), BlockClass::Nondegenerate);
        assert!(classify_degenerate(1.0, 0.5, 8, 10, 12, 0.5).is_err());
    }
}

//! Off-diagonal machinery: the combined phase
//! `phi(s) = c sum_i sigma_i r_i (h_i - s)^(1/theta)`, diagonal detection, the
//! scaled Vandermonde system linking its derivatives to its coefficients,
//! localised van der Corput, and a sampled aggregate of the resulting bounds.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::bprocess::BConstants;
use crate::error::{bail, Result};
use crate::exec::Executor;
use crate::expsums::{DyadicWindow, KWindows, NWindows};
use crate::linalg::Mat;
use crate::math;
use crate::partitions::Partition;
use crate::quad::{self, OscOptions};
use crate::seqcore::SequenceSpec;
use crate::testfn::TestFunction;

pub const MAX_L: usize = 8;

/// Points used to scan for sign changes and suprema on `s`-intervals.
const SCAN_POINTS: usize = 1000;

/// One term of the reduced phase: `c * coeff * (h - s)^(1/theta)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReducedTerm {
    pub h: i64,
    pub coeff: i64,
    /// Original indices merged into this term.
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpec {
    pub theta: f64,
    pub c: f64,
    pub sigma: Vec<i8>,
    pub r: Vec<i64>,
    pub h: Vec<i64>,
    /// Distinct shifts with merged signed frequencies, positive ones first.
    pub reduced: Vec<ReducedTerm>,
}

fn group_by_h(sigma: &[i8], r: &[i64], h: &[i64]) -> Vec<ReducedTerm> {
    let mut groups: Vec<ReducedTerm> = Vec::new();
    for i in 0..h.len() {
        let v = sigma[i] as i64 * r[i];
        match groups.iter_mut().find(|g| g.h == h[i]) {
            Some(g) => {
                g.coeff += v;
                g.members.push(i);
            }
            None => groups.push(ReducedTerm { h: h[i], coeff: v, members: vec![i] }),
        }
    }
    groups
}

impl PhaseSpec {
    pub fn new(theta: f64, c: f64, sigma: &[i8], r: &[i64], h: &[i64]) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            bail!(InvalidParameter, "theta must lie in (0, 1), got {theta}");
        }
        if sigma.len() != r.len() || r.len() != h.len() || r.is_empty() {
            bail!(InvalidParameter, "sigma, r, h must have the same nonzero length");
        }
        if sigma.iter().any(|s| *s != 1 && *s != -1) {
            bail!(InvalidParameter, "signs must be +1 or -1");
        }
        if r.iter().any(|x| *x == 0) {
            bail!(InvalidParameter, "frequencies must be nonzero");
        }
        let mut reduced: Vec<ReducedTerm> = group_by_h(sigma, r, h).into_iter().filter(|g| g.coeff != 0).collect();
        reduced.sort_by_key(|g| (g.coeff < 0, g.h));
        Ok(Self { theta, c, sigma: sigma.to_vec(), r: r.to_vec(), h: h.to_vec(), reduced })
    }

    pub fn from_constants(k: &BConstants, sigma: &[i8], r: &[i64], h: &[i64]) -> Result<Self> {
        Self::new(k.theta, k.c, sigma, r, h)
    }

    pub fn m(&self) -> usize {
        self.r.len()
    }

    /// Number of distinct shifts after reduction.
    pub fn big_l(&self) -> usize {
        self.reduced.len()
    }

    /// Number of reduced terms with positive coefficient.
    pub fn small_l(&self) -> usize {
        self.reduced.iter().filter(|g| g.coeff > 0).count()
    }

    pub fn is_zero(&self) -> bool {
        self.reduced.is_empty()
    }

    fn check_s(&self, s: f64) -> Result<()> {
        if let Some(g) = self.reduced.iter().find(|g| g.h as f64 <= s) {
            bail!(InvalidParameter, "shift h={} is not above s={s}", g.h);
        }
        Ok(())
    }

    fn term(&self, g: &ReducedTerm, s: f64, j: usize) -> f64 {
        let p = 1.0 / self.theta;
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        self.c * g.coeff as f64 * sign * math::falling(p, j) * math::pow(g.h as f64 - s, p - j as f64)
    }

    /// `phi^(j)(s)` in closed form; `j = 0` is the phase itself.
    pub fn eval(&self, s: f64, j: usize) -> Result<f64> {
        self.check_s(s)?;
        Ok(self.reduced.iter().map(|g| self.term(g, s, j)).sum())
    }

    /// `sum |term|` of the closed form, the natural scale for `phi^(j)(s)`.
    pub fn term_scale(&self, s: f64, j: usize) -> Result<f64> {
        self.check_s(s)?;
        Ok(self.reduced.iter().map(|g| self.term(g, s, j).abs()).sum())
    }

    /// `Van(s) = max_{1 <= i <= L} |phi^(i)(s)|`.
    pub fn van(&self, s: f64) -> Result<f64> {
        let l = self.big_l();
        let mut v: f64 = 0.0;
        for i in 1..=l {
            v = v.max(self.eval(s, i)?.abs());
        }
        Ok(v)
    }

    /// Minimum of `Van` over an evenly spaced grid on `[a, b]`.
    pub fn van_min(&self, a: f64, b: f64, points: usize) -> Result<f64> {
        let mut lo = f64::INFINITY;
        for i in 0..points.max(2) {
            let s = a + (b - a) * i as f64 / (points.max(2) - 1) as f64;
            lo = lo.min(self.van(s)?);
        }
        Ok(lo)
    }
}

/// Shorthand for [`phase_eval`]-style access.
pub fn phase_eval(ps: &PhaseSpec, s: f64, j: usize) -> Result<f64> {
    ps.eval(s, j)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalFlag {
    pub is_diagonal: bool,
    /// Blocks of equal shift, each with zero signed frequency sum.
    pub witness: Option<Partition>,
}

/// Diagonal iff grouping the indices by equal `h` leaves every group with zero
/// signed frequency sum. A singleton group can never qualify since `r != 0`.
pub fn is_diagonal(r: &[i64], h: &[i64], sigma: &[i8]) -> Result<DiagonalFlag> {
    if r.len() != h.len() || r.len() != sigma.len() {
        bail!(InvalidParameter, "sigma, r, h must have the same length");
    }
    if r.iter().any(|x| *x == 0) {
        bail!(InvalidParameter, "frequencies must be nonzero");
    }
    let groups = group_by_h(sigma, r, h);
    if groups.iter().all(|g| g.coeff == 0) {
        let blocks: Vec<Vec<usize>> = groups.into_iter().map(|g| g.members).collect();
        Ok(DiagonalFlag { is_diagonal: true, witness: Some(Partition::from_blocks(r.len(), &blocks)?) })
    } else {
        Ok(DiagonalFlag { is_diagonal: false, witness: None })
    }
}

fn elementary_symmetric(xs: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; xs.len() + 1];
    e[0] = 1.0;
    for (i, x) in xs.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            e[k] += e[k - 1] * x;
        }
    }
    e
}

/// Closed-form inverse of `V[j][l] = tau_l^(j+1)`, `j, l < L`:
/// `v[t][T] = (-1)^(L-T) e_(L-T)(tau without t) / (tau_t prod_(m != t) (tau_t - tau_m))`
/// with `T` counted from 1.
pub fn vandermonde_inverse(tau: &[f64]) -> Result<Mat> {
    let l = tau.len();
    if l == 0 || l > MAX_L {
        bail!(InvalidParameter, "need 1 <= L <= {MAX_L}, got {l}");
    }
    for i in 0..l {
        if tau[i] == 0.0 || !tau[i].is_finite() {
            bail!(InvalidParameter, "tau must be finite and nonzero");
        }
        for j in 0..i {
            if tau[i] == tau[j] {
                bail!(InvalidParameter, "duplicate tau {}", tau[i]);
            }
        }
    }
    let mut inv = Mat::zeros(l, l);
    for t in 0..l {
        let others: Vec<f64> = (0..l).filter(|&m| m != t).map(|m| tau[m]).collect();
        let e = elementary_symmetric(&others);
        let denom = tau[t] * others.iter().map(|x| tau[t] - x).product::<f64>();
        for big_t in 1..=l {
            let k = l - big_t;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            inv[(t, big_t - 1)] = sign * e[k] / denom;
        }
    }
    Ok(inv)
}

/// The scaled Vandermonde matrix `V[j][l] = tau_l^(j+1)`.
pub fn vandermonde(tau: &[f64]) -> Mat {
    Mat::from_fn(tau.len(), tau.len(), |j, l| math::pow(tau[l], (j + 1) as f64))
}

/// `(a, b, M^-1)` with `a_j = phi^(j)(s)` for `j = 1..L`, `b_l = c coeff_l (h_l - s)^(1/theta)`
/// and `a = M b`, `M = diag((-1)^j (1/theta)_j) V(tau)`, `tau_l = 1/(h_l - s)`.
fn derivative_system(ps: &PhaseSpec, s: f64) -> Result<(Vec<f64>, Vec<f64>, Mat)> {
    ps.check_s(s)?;
    let l = ps.big_l();
    if l == 0 {
        bail!(Diagonal, "phase vanishes identically");
    }
    let p = 1.0 / ps.theta;
    let tau: Vec<f64> = ps.reduced.iter().map(|g| 1.0 / (g.h as f64 - s)).collect();
    let mut d = Vec::with_capacity(l);
    for j in 1..=l {
        let v = math::falling(p, j);
        if v == 0.0 {
            bail!(Precondition, "1/theta is an integer below {j}; the derivative system is singular");
        }
        d.push(if j % 2 == 0 { v } else { -v });
    }
    let vinv = vandermonde_inverse(&tau)?;
    let minv = Mat::from_fn(l, l, |t, j| vinv[(t, j)] / d[j]);
    let b: Vec<f64> = ps.reduced.iter().map(|g| ps.c * g.coeff as f64 * math::pow(g.h as f64 - s, p)).collect();
    let a: Vec<f64> = (1..=l).map(|j| ps.eval(s, j)).collect::<Result<_>>()?;
    Ok((a, b, minv))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvNorm {
    pub bound: f64,
    pub true_norm: f64,
    pub ratio: f64,
}

/// `max_t e^(theta ((L-1) q_t + sum_l q_l)) / prod_(l != t) |h_l - h_t|` next to the
/// spectral norm of `M^-1`. Without labels, `q_l = ln(h_l - s) / theta`.
pub fn inv_norm_bound(ps: &PhaseSpec, s: f64, q: Option<&[f64]>) -> Result<InvNorm> {
    let l = ps.big_l();
    if l < 2 {
        bail!(Precondition, "need at least two distinct shifts, got {l}");
    }
    let (_, _, minv) = derivative_system(ps, s)?;
    let qs: Vec<f64> = match q {
        Some(q) if q.len() == l => q.to_vec(),
        Some(q) => bail!(InvalidParameter, "expected {l} labels, got {}", q.len()),
        None => ps.reduced.iter().map(|g| math::ln(g.h as f64 - s) / ps.theta).collect(),
    };
    let total: f64 = qs.iter().sum();
    let mut bound: f64 = 0.0;
    for t in 0..l {
        let gaps: f64 = (0..l).filter(|&m| m != t).map(|m| (ps.reduced[m].h - ps.reduced[t].h).abs() as f64).product();
        bound = bound.max(math::exp(ps.theta * ((l - 1) as f64 * qs[t] + total)) / gaps);
    }
    let true_norm = minv.spectral_norm();
    Ok(InvNorm { bound, true_norm, ratio: true_norm / bound })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VanBound {
    /// `max_{1 <= i <= L} |phi^(i)(s)|`.
    pub van: f64,
    /// `|b| / |M^-1|`, a lower bound for `|a|_2`.
    pub bound: f64,
    pub big_l: usize,
}

pub fn van_lower_bound(ps: &PhaseSpec, s: f64) -> Result<VanBound> {
    let (a, b, minv) = derivative_system(ps, s)?;
    let norm_b = math::sqrt(b.iter().map(|x| x * x).sum());
    let bound = norm_b / minv.spectral_norm();
    let van = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let l = a.len();
    if van * (1.0 + 1e-9) < bound / math::sqrt(l as f64) {
        bail!(Certificate, "Van {van:e} below |b|/|M^-1|/sqrt(L) = {:e}", bound / math::sqrt(l as f64));
    }
    Ok(VanBound { van, bound, big_l: l })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscIntegral {
    pub value: Complex64,
    pub quad_error: f64,
    /// Total variation of `g` plus `|g(b)|`.
    pub variation: f64,
    /// `V(g) lambda^(-1/L)`.
    pub bound: f64,
    pub ratio: f64,
    /// Sign changes of `phi^(L)` seen on the scan grid, when known.
    pub top_zeros: Option<usize>,
}

/// Sampled total variation plus the value at the right endpoint.
pub fn variation<G: Fn(f64) -> f64>(a: f64, b: f64, g: &G, points: usize) -> f64 {
    let n = points.max(2);
    let mut prev = g(a);
    let mut tv = 0.0;
    for i in 1..=n {
        let v = g(a + (b - a) * i as f64 / n as f64);
        tv += (v - prev).abs();
        prev = v;
    }
    tv + prev.abs()
}

/// `int_a^b g e(phi)` next to `V(g) lambda^(-1/L)` for a generic phase.
pub fn van_der_corput_integral<G, P, D>(a: f64, b: f64, g: G, phi: P, dphi: D, lambda: f64, l: usize) -> Result<OscIntegral>
where
    G: Fn(f64) -> f64,
    P: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    if !(lambda > 0.0) {
        bail!(InvalidParameter, "lambda must be positive, got {lambda}");
    }
    if l == 0 {
        bail!(InvalidParameter, "L must be at least 1");
    }
    if !(b > a) {
        bail!(InvalidParameter, "empty interval [{a}, {b}]");
    }
    let v = variation(a, b, &g, 8 * SCAN_POINTS);
    let bound = v * math::pow(lambda, -1.0 / l as f64);
    let (value, quad_error) = quad::oscillatory(a, b, &g, &phi, &dphi, OscOptions::default());
    let ratio = if bound > 0.0 { value.norm() / bound } else { 0.0 };
    Ok(OscIntegral { value, quad_error, variation: v, bound, ratio, top_zeros: None })
}

/// [`van_der_corput_integral`] with the phase of `ps` on `[a, b]`. The order is
/// the reduced length `L`; `phi^(L)` is scanned for sign changes.
pub fn oscillatory_integral<G: Fn(f64) -> f64>(ps: &PhaseSpec, g: G, lambda: f64, a: f64, b: f64) -> Result<OscIntegral> {
    if ps.is_zero() {
        bail!(Diagonal, "phase vanishes identically");
    }
    ps.check_s(b)?;
    let l = ps.big_l();
    let mut zeros = 0;
    let mut prev = ps.eval(a, l)?;
    for i in 1..=SCAN_POINTS {
        let v = ps.eval(a + (b - a) * i as f64 / SCAN_POINTS as f64, l)?;
        if prev * v < 0.0 {
            zeros += 1;
        }
        if v != 0.0 {
            prev = v;
        }
    }
    let phi = |s: f64| ps.reduced.iter().map(|t| ps.term(t, s, 0)).sum::<f64>();
    let dphi = |s: f64| ps.reduced.iter().map(|t| ps.term(t, s, 1)).sum::<f64>();
    let mut out = van_der_corput_integral(a, b, g, phi, dphi, lambda, l)?;
    out.top_zeros = Some(zeros);
    Ok(out)
}

/// Windows and scales shared by the off-diagonal bounds.
pub struct OffdiagContext<'a> {
    pub consts: BConstants,
    pub f: &'a TestFunction,
    pub nw: &'a NWindows,
    pub kw: &'a KWindows,
}

impl<'a> OffdiagContext<'a> {
    pub fn new(seq: &SequenceSpec, f: &'a TestFunction, nw: &'a NWindows, kw: &'a KWindows) -> Result<Self> {
        if nw.n != kw.n {
            bail!(InvalidParameter, "window families built for different N");
        }
        Ok(Self { consts: BConstants::new(seq.alpha, seq.theta)?, f, nw, kw })
    }

    fn n(&self) -> f64 {
        self.nw.n as f64
    }

    /// `s`-interval inside `[0, 1)` on which both windows of one index can be nonzero.
    fn s_interval(&self, nwin: &DyadicWindow, kwin: &DyadicWindow, r: i64, h: i64) -> Option<(f64, f64)> {
        let k = &self.consts;
        let hf = h as f64;
        let (xlo, xhi) = nwin.support;
        let (mlo, mhi) = kwin.support;
        if mlo <= 0.0 {
            return None;
        }
        let e = 1.0 / (k.big_theta - 1.0);
        // h - s in alpha [xlo^theta, xhi^theta] and in [(mlo/(c0 r))^(1/e), (mhi/(c0 r))^(1/e)]
        let w_lo = (k.alpha * math::pow(xlo.max(0.0), k.theta)).max(math::pow(mlo / (k.c0 * r as f64), 1.0 / e));
        let w_hi = (k.alpha * math::pow(xhi, k.theta)).min(math::pow(mhi / (k.c0 * r as f64), 1.0 / e));
        let s0 = (hf - w_hi).max(0.0);
        let s1 = (hf - w_lo).min(1.0);
        if s1 > s0 {
            Some((s0, s1))
        } else {
            None
        }
    }

    /// `N_q(n(s)) K_u(mu(s)) |f^(mu(s)/N)|` for one index.
    fn window_amp(&self, nwin: &DyadicWindow, kwin: &DyadicWindow, r: i64, h: i64, s: f64) -> f64 {
        let hf = h as f64;
        if hf <= s {
            return 0.0;
        }
        let mu = self.consts.mu(r as f64, hf, s);
        let w = nwin.eval(self.consts.n_var(hf, s));
        if w == 0.0 {
            return 0.0;
        }
        w * kwin.eval(mu) * self.f.fourier(mu / self.n()).abs()
    }

    /// `mu^(Theta/2) / sqrt(phi_kk(mu, r))` for one index.
    fn stationary_amp(&self, r: i64, h: i64, s: f64) -> f64 {
        let mu = self.consts.mu(r as f64, h as f64, s);
        math::pow(mu, self.consts.big_theta / 2.0) / math::sqrt(self.consts.phi_kk(mu, r as f64))
    }
}

/// Labels of one index of an off-diagonal tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexLabel {
    pub q: i64,
    pub u: i64,
    pub r: i64,
    pub h: i64,
    pub sigma: i8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IhrBound {
    /// `I(h, r)` by quadrature.
    pub integral: Complex64,
    pub quad_error: f64,
    pub bound: f64,
    /// `sup_s prod_i N_(q_i) K_(u_i) |f^|`.
    pub window_sup: f64,
    pub ratio: f64,
}

/// `max_t (e^(-u_t) e^(theta ((L-1) q_t + sum_(l != t) q_l)) prod_(l != t) |h_l - h_t|^(-1))^(1/L)`
/// over the reduced terms, each carrying the smallest `u` and largest `q` of its members.
fn repulsion_factor(ps: &PhaseSpec, u: &[i64], q: &[f64]) -> f64 {
    let l = ps.big_l();
    let uq: Vec<(f64, f64)> = ps
        .reduced
        .iter()
        .map(|g| {
            let ut = g.members.iter().map(|&i| u[i]).min().unwrap_or(0) as f64;
            let qt = g.members.iter().map(|&i| q[i]).fold(f64::NEG_INFINITY, f64::max);
            (ut, qt)
        })
        .collect();
    let total: f64 = uq.iter().map(|x| x.1).sum();
    let mut best: f64 = 0.0;
    for t in 0..l {
        let gaps: f64 = (0..l).filter(|&m| m != t).map(|m| (ps.reduced[m].h - ps.reduced[t].h).abs() as f64).product();
        let e = -uq[t].0 + ps.theta * ((l - 1) as f64 * uq[t].1 + total - uq[t].1);
        best = best.max(math::pow(math::exp(e) / gaps, 1.0 / l as f64));
    }
    best
}

fn joint_window_sup(ctx: &OffdiagContext<'_>, labels: &[IndexLabel], wins: &[(&DyadicWindow, &DyadicWindow)], points: usize) -> f64 {
    let mut lo: f64 = 0.0;
    let mut hi: f64 = 1.0;
    for (lab, (nwin, kwin)) in labels.iter().zip(wins) {
        match ctx.s_interval(nwin, kwin, lab.r, lab.h) {
            Some((a, b)) => {
                lo = lo.max(a);
                hi = hi.min(b);
            }
            None => return 0.0,
        }
    }
    if hi <= lo {
        return 0.0;
    }
    let mut best: f64 = 0.0;
    for i in 0..points {
        let s = lo + (hi - lo) * (i as f64 + 0.5) / points as f64;
        let v: f64 = labels.iter().zip(wins).map(|(lab, (nw, kw))| ctx.window_amp(nw, kw, lab.r, lab.h, s)).product();
        best = best.max(v);
    }
    best
}

/// The bound on `I(h, r)` next to its quadrature value. `u_i > 0`; negative
/// frequencies are carried by `sigma_i`.
pub fn i_hr_bound(ctx: &OffdiagContext<'_>, labels: &[IndexLabel]) -> Result<IhrBound> {
    let sigma: Vec<i8> = labels.iter().map(|l| l.sigma).collect();
    let r: Vec<i64> = labels.iter().map(|l| l.r).collect();
    let h: Vec<i64> = labels.iter().map(|l| l.h).collect();
    let ps = PhaseSpec::from_constants(&ctx.consts, &sigma, &r, &h)?;
    if ps.is_zero() {
        bail!(Diagonal, "(r, h) lies on the diagonal");
    }
    if labels.iter().any(|l| l.u <= 0 || l.r <= 0) {
        bail!(InvalidParameter, "need u > 0 and r > 0 for every index");
    }
    let wins: Vec<(&DyadicWindow, &DyadicWindow)> = labels.iter().map(|l| Ok((ctx.nw.get(l.q)?, ctx.kw.get(l.u)?))).collect::<Result<_>>()?;
    let window_sup = joint_window_sup(ctx, labels, &wins, 256);

    let t = ctx.consts.big_theta;
    let u: Vec<i64> = labels.iter().map(|l| l.u).collect();
    let q: Vec<f64> = labels.iter().map(|l| ctx.nw.log_scale(l.q) as f64).collect();
    let pref = math::exp(u.iter().sum::<i64>() as f64) * r.iter().map(|x| math::pow(*x as f64, (t - 1.0) / 2.0)).product::<f64>();
    let bound = window_sup * pref * repulsion_factor(&ps, &u, &q);

    if window_sup == 0.0 {
        return Ok(IhrBound { integral: Complex64::new(0.0, 0.0), quad_error: 0.0, bound: 0.0, window_sup, ratio: 0.0 });
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for (lab, (nwin, kwin)) in labels.iter().zip(&wins) {
        let (a, b) = ctx.s_interval(nwin, kwin, lab.r, lab.h).unwrap_or((0.0, 0.0));
        lo = lo.max(a);
        hi = hi.min(b);
    }
    let amp = |s: f64| {
        labels.iter().zip(&wins).map(|(lab, (nw, kw))| {
            let hf = lab.h as f64;
            let mu = ctx.consts.mu(lab.r as f64, hf, s);
            nw.eval(ctx.consts.n_var(hf, s)) * kw.eval(mu) * ctx.f.fourier(mu / ctx.n()) * ctx.stationary_amp(lab.r, lab.h, s)
        })
        .product::<f64>()
    };
    // quadrature tolerances are absolute, so work with a unit-size amplitude
    let scale = (0..256).map(|i| amp(lo + (hi - lo) * (i as f64 + 0.5) / 256.0).abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(IhrBound { integral: Complex64::new(0.0, 0.0), quad_error: 0.0, bound, window_sup, ratio: 0.0 });
    }
    let phi = |s: f64| ps.reduced.iter().map(|g| ps.term(g, s, 0)).sum::<f64>();
    let dphi = |s: f64| ps.reduced.iter().map(|g| ps.term(g, s, 1)).sum::<f64>();
    let (unit, unit_err) = quad::oscillatory(lo, hi, |s| amp(s) / scale, phi, dphi, OscOptions::default());
    let (integral, quad_error) = (unit * scale, unit_err * scale);
    let ratio = if bound > 0.0 { integral.norm() / bound } else { 0.0 };
    Ok(IhrBound { integral, quad_error, bound, window_sup, ratio })
}

/// Hoelder exponents `p_i = m` for `i <= m-2` and `p_(m-1) = m/2`.
pub fn holder_exponents(m: usize) -> Vec<f64> {
    let mut p = vec![m as f64; m.saturating_sub(2)];
    p.push(m as f64 / 2.0);
    p
}

/// Predicted exponent `((m^2 + m - 1) theta - 1) / m` of the off-diagonal total.
pub fn predicted_exponent(m: usize, theta: f64) -> f64 {
    let m = m as f64;
    ((m * m + m - 1.0) * theta - 1.0) / m
}

#[derive(Debug, Clone, Copy)]
pub struct OffdiagOptions {
    pub samples_per_block: usize,
    pub blocks: usize,
    pub seed: u64,
    pub delta: f64,
    /// Grid points used for window suprema.
    pub sup_points: usize,
}

impl Default for OffdiagOptions {
    fn default() -> Self {
        Self { samples_per_block: 1024, blocks: 64, seed: 0, delta: crate::expsums::DEFAULT_DELTA, sup_points: 16 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffdiagEstimate {
    pub n: u64,
    pub m: usize,
    pub theta: f64,
    /// Estimate of the aggregate.
    pub total: f64,
    pub std_err: f64,
    pub predicted_exponent: f64,
    pub atoms: usize,
    pub samples: usize,
    /// Fraction of sampled tuples on the diagonal.
    pub diagonal_fraction: f64,
    pub holder_exponents: Vec<f64>,
}

/// One index `(q, u, r, h)` with `u > 0` and its window supremum over `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub q: i64,
    pub u: i64,
    pub r: i64,
    pub h: i64,
    pub sup: f64,
}

/// Every atom with nonzero windows for some `s` in `[0, 1)`, restricted to
/// nondegenerate `(q, u)`, with sampling weights `2 e^u / r * sup`.
pub struct AtomTable {
    pub atoms: Vec<Atom>,
    cdf: Vec<f64>,
    /// Total weight.
    pub z: f64,
}

impl AtomTable {
    pub fn new<E: Executor>(ctx: &OffdiagContext<'_>, delta: f64, points: usize, exec: &E) -> Result<Self> {
        let atoms = enumerate_atoms(ctx, delta, points, exec)?;
        let mut cdf = Vec::with_capacity(atoms.len());
        let mut acc = 0.0;
        for a in &atoms {
            acc += 2.0 * math::exp(a.u as f64) / a.r as f64 * a.sup;
            cdf.push(acc);
        }
        Ok(Self { atoms, cdf, z: acc })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Draws `m` indices by weight with uniform signs; also returns their sups.
    pub fn sample<R: RngCore>(&self, m: usize, rng: &mut R) -> (Vec<IndexLabel>, Vec<f64>) {
        let mut uniform = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        let mut labels = Vec::with_capacity(m);
        let mut sups = Vec::with_capacity(m);
        for _ in 0..m {
            let x = uniform() * self.z;
            let a = self.atoms[self.cdf.partition_point(|c| *c <= x).min(self.atoms.len() - 1)];
            let sigma = if uniform() < 0.5 { 1 } else { -1 };
            labels.push(IndexLabel { q: a.q, u: a.u, r: a.r, h: a.h, sigma });
            sups.push(a.sup);
        }
        (labels, sups)
    }
}

fn enumerate_atoms<E: Executor>(ctx: &OffdiagContext<'_>, delta: f64, points: usize, exec: &E) -> Result<Vec<Atom>> {
    let k = &ctx.consts;
    let mut cells = Vec::new();
    for q in 0..ctx.nw.len() as i64 {
        let nwin = ctx.nw.get(q)?;
        let (xlo, xhi) = nwin.support;
        let h0 = (math::floor(k.alpha * math::pow(xlo.max(0.0), k.theta)) as i64).max(1);
        let h1 = math::ceil(1.0 + k.alpha * math::pow(xhi, k.theta)) as i64;
        for u in 1..=ctx.kw.big_u {
            if ctx.nw.classify(k.alpha, k.theta, q, u, delta)?.is_degenerate() {
                continue;
            }
            for h in h0..=h1 {
                cells.push((q, u, h));
            }
        }
    }
    let e = 1.0 / (k.big_theta - 1.0);
    let found = exec.map(cells.len(), |i| {
        let (q, u, h) = cells[i];
        let nwin = ctx.nw.get(q).expect("q in range");
        let kwin = ctx.kw.get(u).expect("u in range");
        let (xlo, xhi) = nwin.support;
        let s0 = (h as f64 - k.alpha * math::pow(xhi, k.theta)).max(0.0);
        let s1 = (h as f64 - k.alpha * math::pow(xlo.max(0.0), k.theta)).min(1.0);
        let mut out = Vec::new();
        if s1 <= s0 {
            return out;
        }
        // mu / r = c0 (h - s)^e ranges over [m_lo, m_hi] on the interval
        let m_lo = k.c0 * math::pow(h as f64 - s1, e);
        let m_hi = k.c0 * math::pow(h as f64 - s0, e);
        let (klo, khi) = kwin.support;
        let r0 = (math::floor(klo / m_hi) as i64).max(1);
        let r1 = if m_lo > 0.0 { math::ceil(khi / m_lo) as i64 } else { r0 - 1 };
        for r in r0..=r1 {
            let Some((a, b)) = ctx.s_interval(nwin, kwin, r, h) else { continue };
            let mut sup: f64 = 0.0;
            for j in 0..points {
                let s = a + (b - a) * (j as f64 + 0.5) / points as f64;
                sup = sup.max(ctx.window_amp(nwin, kwin, r, h, s));
            }
            if sup > 0.0 {
                out.push(Atom { q, u, r, h, sup });
            }
        }
        out
    });
    Ok(found.into_iter().flatten().collect())
}

/// Sampled estimate of
/// `N^-m sum_(q,u,r,h,sigma) eta(r,h) e^(u_1+..+u_m) / (r_1..r_m) sup_s (windows) max_t (...)^(1/L)`.
///
/// Atoms are drawn from an [`AtomTable`]. The total is `Z^m E[rho] / N^m` with
/// `rho = eta * joint_sup / prod(sups) * max_t(...)^(1/L)`. Sample block `b` uses
/// its own ChaCha stream, so the result does not depend on the executor.
pub fn offdiag_err_estimate<E: Executor>(seq: &SequenceSpec, f: &TestFunction, n: u64, m: usize, eps: f64, opt: &OffdiagOptions, exec: &E) -> Result<OffdiagEstimate> {
    if m < 3 {
        bail!(InvalidParameter, "m must be at least 3, got {m}");
    }
    if opt.blocks < 2 || opt.samples_per_block == 0 {
        bail!(InvalidParameter, "need at least two sample blocks");
    }
    let nw = NWindows::new(n)?;
    let kw = KWindows::new(n, eps)?;
    let ctx = OffdiagContext::new(seq, f, &nw, &kw)?;
    let table = AtomTable::new(&ctx, opt.delta, opt.sup_points, exec)?;
    if table.is_empty() {
        bail!(Precondition, "no nondegenerate atoms at N={n}");
    }
    let block_stats = exec.map(opt.blocks, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(opt.seed);
        rng.set_stream(b as u64);
        let mut sum = 0.0;
        let mut diag = 0usize;
        for _ in 0..opt.samples_per_block {
            let (labels, sups) = table.sample(m, &mut rng);
            let sig: Vec<i8> = labels.iter().map(|l| l.sigma).collect();
            let r: Vec<i64> = labels.iter().map(|l| l.r).collect();
            let h: Vec<i64> = labels.iter().map(|l| l.h).collect();
            let ps = PhaseSpec::new(ctx.consts.theta, ctx.consts.c, &sig, &r, &h).expect("valid tuple");
            if ps.is_zero() {
                diag += 1;
                continue;
            }
            let wins: Vec<(&DyadicWindow, &DyadicWindow)> = labels.iter().map(|l| (nw.get(l.q).expect("q"), kw.get(l.u).expect("u"))).collect();
            let joint = joint_window_sup(&ctx, &labels, &wins, opt.sup_points);
            if joint == 0.0 {
                continue;
            }
            let u: Vec<i64> = labels.iter().map(|l| l.u).collect();
            let q: Vec<f64> = labels.iter().map(|l| nw.log_scale(l.q) as f64).collect();
            sum += joint / sups.iter().product::<f64>() * repulsion_factor(&ps, &u, &q);
        }
        (sum / opt.samples_per_block as f64, diag)
    });
    let means: Vec<f64> = block_stats.iter().map(|b| b.0).collect();
    let (mean, se) = crate::stats::mean_se(&means);
    let scale = math::pow(table.z / n as f64, m as f64);
    let samples = opt.blocks * opt.samples_per_block;
    Ok(OffdiagEstimate {
        n,
        m,
        theta: seq.theta,
        total: scale * mean,
        std_err: scale * se,
        predicted_exponent: predicted_exponent(m, seq.theta),
        atoms: table.len(),
        samples,
        diagonal_fraction: block_stats.iter().map(|b| b.1).sum::<usize>() as f64 / samples as f64,
        holder_exponents: holder_exponents(m),
    })
}

/// `sum over pairwise distinct h in [1, H]^m of max_t prod_(l != t) |h_l - h_t|^(-1/m)`.
/// Ranges too short to hold `m` distinct shifts give the empty sum 0.
pub fn h_sum_brute(m: usize, big_h: u64) -> f64 {
    if m == 0 || (big_h as usize) < m {
        return 0.0;
    }
    let mut h = vec![0i64; m];
    let mut total = 0.0;
    fn rec(pos: usize, m: usize, big_h: i64, h: &mut [i64], total: &mut f64) {
        if pos == m {
            let mut best: f64 = 0.0;
            for t in 0..m {
                let p: f64 = (0..m).filter(|&l| l != t).map(|l| (h[l] - h[t]).abs() as f64).product();
                best = best.max(math::pow(p, -1.0 / m as f64));
            }
            *total += best;
            return;
        }
        for v in 1..=big_h {
            if h[..pos].contains(&v) {
                continue;
            }
            h[pos] = v;
            rec(pos + 1, m, big_h, h, total);
        }
    }
    rec(0, m, big_h as i64, &mut h, &mut total);
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolderCheck {
    pub m: usize,
    pub theta: f64,
    /// `(H, brute force, ln(H)^((m-2)/m) H^(m-1+1/m), ratio)`.
    pub rows: Vec<(u64, f64, f64, f64)>,
    /// Log-log slope in `H`.
    pub slope_h: f64,
    /// The same slope in `N` under `H = N^theta`.
    pub slope_n: f64,
    /// `theta (m - 1) + theta / m`.
    pub predicted: f64,
    pub holder_exponents: Vec<f64>,
}

pub fn h_sum_holder_check(m: usize, theta: f64, hs: &[u64]) -> Result<HolderCheck> {
    if m < 2 {
        bail!(InvalidParameter, "m must be at least 2");
    }
    if !(theta > 0.0 && theta < 1.0) {
        bail!(InvalidParameter, "theta must lie in (0, 1)");
    }
    if hs.len() < 2 || hs.iter().any(|h| (*h as usize) < m) {
        bail!(InvalidParameter, "need at least two ranges, each holding m distinct shifts");
    }
    let mf = m as f64;
    let rows: Vec<(u64, f64, f64, f64)> = hs
        .iter()
        .map(|&h| {
            let b = h_sum_brute(m, h);
            let hf = h as f64;
            let g = math::pow(math::ln(hf), (mf - 2.0) / mf) * math::pow(hf, mf - 1.0 + 1.0 / mf);
            (h, b, g, b / g)
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let fit = crate::stats::loglog_fit(&xs, &ys).ok_or_else(|| crate::Error::NotConverged("slope fit failed".into()))?;
    Ok(HolderCheck {
        m,
        theta,
        rows,
        slope_h: fit.slope,
        slope_n: theta * fit.slope,
        predicted: theta * (mf - 1.0) + theta / mf,
        holder_exponents: holder_exponents(m),
    })
}

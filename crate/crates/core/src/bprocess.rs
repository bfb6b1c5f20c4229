//! The two B-process transforms of `E_{q,u}`, their constants, and a
//! stationary-phase evaluator for single oscillatory integrals.
//!
//! First transform: the `n`-sum of `E_{q,u}` becomes an `r`-sum with phase
//! `phi(k, r) = beta k^Theta r^(1 - Theta)`. Second: the `k`-sum becomes an
//! `h`-sum with phase `c r (h - s)^(1/theta)`.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::dd::Dd;
use crate::error::{bail, Result};
use crate::exec::Executor;
use crate::expsums::{DyadicWindow, EquBlock, KWindows, NWindows, DEFAULT_DELTA, DEFAULT_EPS};
use crate::math::{self, KahanSum};
use crate::quad::{self, OscOptions};
use crate::seqcore::SequenceSpec;
use crate::testfn::TestFunction;

/// Largest relative residual tolerated when checking the constants.
pub const CONSTANTS_TOL: f64 = 1e-8;

/// `Theta = 1/(1 - theta)`, `beta = alpha^Theta (theta^(Theta-1) - theta^Theta)`,
/// `c1 = sqrt(Theta (alpha theta)^Theta)`, `c0 = (beta Theta)^(-1/(Theta-1))`,
/// `c = -theta c0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BConstants {
    pub alpha: f64,
    pub theta: f64,
    pub big_theta: f64,
    pub beta: f64,
    pub c1: f64,
    pub c0: f64,
    pub c: f64,
    big_theta_dd: Dd,
    beta_dd: Dd,
    c_dd: Dd,
    inv_theta_dd: Dd,
}

/// Worst residuals of the closed forms against the numeric critical-point oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantsCheck {
    pub samples: usize,
    pub max_mu_residual: f64,
    pub max_value_residual: f64,
}

impl BConstants {
    pub fn new(alpha: f64, theta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            bail!(InvalidParameter, "alpha must be positive, got {alpha}");
        }
        if !(theta > 0.0 && theta < 1.0) {
            bail!(InvalidParameter, "theta must lie in (0, 1), got {theta}");
        }
        let big_theta = 1.0 / (1.0 - theta);
        let beta = math::pow(alpha, big_theta) * (math::pow(theta, big_theta - 1.0) - math::pow(theta, big_theta));
        let c1 = math::sqrt(big_theta * math::pow(alpha * theta, big_theta));
        let c0 = math::pow(beta * big_theta, -1.0 / (big_theta - 1.0));
        let c = -theta * c0;

        let one_minus = Dd::ONE.add_f64(-theta);
        let big_theta_dd = one_minus.recip();
        let a = Dd::from_f64(alpha);
        let t = Dd::from_f64(theta);
        let inv_theta_dd = t.recip();
        // beta = alpha^Theta theta^(Theta-1) (1 - theta), c = -alpha^(-1/theta)
        let beta_dd = a.powf(big_theta_dd) * t.powf(big_theta_dd.add_f64(-1.0)) * one_minus;
        let c_dd = -(a.powf(-inv_theta_dd));
        Ok(Self { alpha, theta, big_theta, beta, c1, c0, c, big_theta_dd, beta_dd, c_dd, inv_theta_dd })
    }

    /// Closed forms, then a check against [`critical_point_oracle`] on
    /// `samples` random `(r, h, s)`. Fails if a residual exceeds [`CONSTANTS_TOL`].
    pub fn derive(alpha: f64, theta: f64, samples: usize, seed: u64) -> Result<(Self, ConstantsCheck)> {
        let k = Self::new(alpha, theta)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        let mut check = ConstantsCheck { samples, max_mu_residual: 0.0, max_value_residual: 0.0 };
        for _ in 0..samples {
            let r = 1.0 + math::floor(50.0 * uniform());
            let h = 2.0 + math::floor(49.0 * uniform());
            let s = uniform();
            let (mu, val) = critical_point_oracle(alpha, theta, r, h - s)?;
            let mu_cf = k.mu(r, h, s);
            let val_cf = k.c * r * math::pow(h - s, 1.0 / theta);
            check.max_mu_residual = check.max_mu_residual.max((mu - mu_cf).abs() / mu_cf.abs());
            check.max_value_residual = check.max_value_residual.max((val - val_cf).abs() / val_cf.abs());
        }
        if check.max_mu_residual > CONSTANTS_TOL || check.max_value_residual > CONSTANTS_TOL {
            bail!(
                Certificate,
                "constants disagree with the critical-point oracle: mu {:e}, value {:e}",
                check.max_mu_residual,
                check.max_value_residual
            );
        }
        Ok((k, check))
    }

    /// `phi(k, r) = beta k^Theta r^(1 - Theta)`.
    pub fn phi(&self, k: f64, r: f64) -> f64 {
        self.beta * math::pow(k, self.big_theta) * math::pow(r, 1.0 - self.big_theta)
    }

    /// `phi(k, r) mod 1`, evaluated in double-double.
    pub fn phi_mod1(&self, k: f64, r: f64) -> f64 {
        let e = Dd::from_f64(k).ln() * self.big_theta_dd - Dd::from_f64(r).ln() * self.big_theta_dd.add_f64(-1.0);
        (self.beta_dd * e.exp()).frac_f64()
    }

    /// Second derivative of `phi` in its first argument.
    pub fn phi_kk(&self, k: f64, r: f64) -> f64 {
        let t = self.big_theta;
        self.beta * t * (t - 1.0) * math::pow(k, t - 2.0) * math::pow(r, 1.0 - t)
    }

    /// `mu = c0 r (h - s)^(1/(Theta - 1))`.
    pub fn mu(&self, r: f64, h: f64, s: f64) -> f64 {
        self.c0 * r * math::pow(h - s, 1.0 / (self.big_theta - 1.0))
    }

    /// The `n`-variable `(alpha theta c0 (h - s)^(1/(Theta-1)))^Theta`.
    pub fn n_var(&self, h: f64, s: f64) -> f64 {
        math::pow(self.alpha * self.theta * self.c0 * math::pow(h - s, 1.0 / (self.big_theta - 1.0)), self.big_theta)
    }

    /// `c r (h - s)^(1/theta) mod 1`, evaluated in double-double.
    pub fn second_phase_mod1(&self, r: f64, h: f64, s: f64) -> f64 {
        let base = Dd::from_f64(h).add_f64(-s);
        (self.c_dd * (base.ln() * self.inv_theta_dd).exp()).mul_f64(r).frac_f64()
    }
}

/// Numeric oracle for the second transform's critical point. Solves
/// `max_x (k alpha x^theta - r x)` by bisection to get `phi(k, r)` and its
/// maximiser `x(k)`, then solves `d/dk [phi(k, r) - k w] = alpha x(k)^theta - w = 0`
/// by bisection in `k`. Returns `(mu, phi(mu, r) - mu w)`.
pub fn critical_point_oracle(alpha: f64, theta: f64, r: f64, w: f64) -> Result<(f64, f64)> {
    if !(w > 0.0 && r > 0.0) {
        bail!(InvalidParameter, "need r > 0 and h - s > 0");
    }
    let argmax = |k: f64| {
        // k alpha theta x^(theta-1) - r is decreasing in x
        let (mut lo, mut hi) = (-700.0f64, 700.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let x = math::exp(mid);
            if k * alpha * theta * math::pow(x, theta - 1.0) > r {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        math::exp(0.5 * (lo + hi))
    };
    let (mut lo, mut hi) = (-300.0f64, 300.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let x = argmax(math::exp(mid));
        if alpha * math::pow(x, theta) < w {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let mu = math::exp(0.5 * (lo + hi));
    let x = argmax(mu);
    let phi = mu * alpha * math::pow(x, theta) - r * x;
    Ok((mu, phi - mu * w))
}

/// Input to [`stationary_phase_integral`]: `int_a^b Psi(x) e(Phi(x)) dx`.
pub struct StationaryPhaseSpec<'a> {
    pub a: f64,
    pub b: f64,
    pub phase: &'a dyn Fn(f64) -> f64,
    pub dphase: &'a dyn Fn(f64) -> f64,
    pub ddphase: &'a dyn Fn(f64) -> f64,
    pub amplitude: &'a dyn Fn(f64) -> f64,
    /// Size of `Phi''`.
    pub lambda: f64,
    /// Size of `Phi` derivatives beyond the second, and of `Psi`.
    pub omega_phi: f64,
    pub omega_psi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryPhase {
    pub x0: f64,
    /// `e(Phi(x0) +- 1/8) Psi(x0) / sqrt|Phi''(x0)|`.
    pub main_term: Complex64,
    pub quadrature: Complex64,
    /// `|quadrature - main_term|`.
    pub measured_error: f64,
    /// Error estimate of the quadrature itself.
    pub quadrature_error: f64,
}

const SCAN: usize = 4096;

pub fn stationary_phase_integral(sp: &StationaryPhaseSpec<'_>) -> Result<StationaryPhase> {
    if !(sp.b > sp.a) {
        bail!(InvalidParameter, "empty interval [{}, {}]", sp.a, sp.b);
    }
    let mut roots = Vec::new();
    let mut prev = (sp.dphase)(sp.a);
    let step = (sp.b - sp.a) / SCAN as f64;
    for i in 1..=SCAN {
        let x = sp.a + step * i as f64;
        let d = (sp.dphase)(x);
        if prev == 0.0 || prev * d < 0.0 {
            roots.push(x - step);
        }
        prev = d;
    }
    if (sp.dphase)(sp.b) == 0.0 {
        roots.push(sp.b - step);
    }
    match roots.len() {
        0 => bail!(Precondition, "phase has no critical point on [{}, {}]", sp.a, sp.b),
        1 => {}
        n => bail!(Precondition, "phase has {n} critical points"),
    }
    let (mut lo, mut hi) = (roots[0], (roots[0] + step).min(sp.b));
    let s_lo = (sp.dphase)(lo);
    if s_lo != 0.0 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (sp.dphase)(mid) * s_lo > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * (1.0 + lo.abs()) {
                break;
            }
        }
    } else {
        hi = lo;
    }
    let x0 = 0.5 * (lo + hi);
    let curv = (sp.ddphase)(x0);
    if curv == 0.0 {
        bail!(Precondition, "degenerate critical point at {x0}");
    }
    let eighth = if curv > 0.0 { 0.125 } else { -0.125 };
    let main_term = math::e((sp.phase)(x0) + eighth) * ((sp.amplitude)(x0) / math::sqrt(curv.abs()));
    let (quadrature, quadrature_error) = quad::oscillatory(sp.a, sp.b, sp.amplitude, sp.phase, sp.dphase, OscOptions::default());
    Ok(StationaryPhase { x0, main_term, quadrature, measured_error: (quadrature - main_term).norm(), quadrature_error })
}

fn check_block(nw: &NWindows, consts: &BConstants, q: i64, u: i64) -> Result<()> {
    if u == 0 {
        bail!(Precondition, "u = 0 has no B-process transform");
    }
    if nw.classify(consts.alpha, consts.theta, q, u.abs(), DEFAULT_DELTA)?.is_degenerate() {
        bail!(Precondition, "block (q={q}, u={u}) is degenerate");
    }
    Ok(())
}

/// Coefficients of `E^B_{q,u}(s) = sum_k d_k e(k s)` after the first transform.
#[derive(Debug, Clone)]
pub struct EbBlock {
    pub q: i64,
    pub u: i64,
    pub n: u64,
    pub ks: Vec<i64>,
    pub coeffs: Vec<Complex64>,
    /// Number of `(k, r)` terms kept.
    pub terms: usize,
}

impl EbBlock {
    pub fn new<E: Executor>(consts: &BConstants, f: &TestFunction, nw: &NWindows, kw: &KWindows, q: i64, u: i64, exec: &E) -> Result<Self> {
        check_block(nw, consts, q, u)?;
        let nwin = nw.get(q)?;
        let kwin = kw.get(u.abs())?;
        let nf = nw.n as f64;
        let (klo, khi) = kwin.integer_range();
        let ks: Vec<i64> = (klo.max(1)..=khi).filter(|&k| kwin.eval(k as f64) != 0.0).collect();
        let (xlo, xhi) = nwin.support;
        let t = consts.big_theta;
        let at = consts.alpha * consts.theta;
        let lead = math::e(-0.125) * (consts.c1 / nf);
        let res = exec.map(ks.len(), |i| {
            let k = ks[i] as f64;
            let r0 = (math::ceil(at * k * math::pow(xhi, consts.theta - 1.0)) as i64).max(1);
            let r1 = math::floor(at * k * math::pow(xlo, consts.theta - 1.0)) as i64;
            let mut re = KahanSum::new();
            let mut im = KahanSum::new();
            let mut terms = 0usize;
            for r in r0..=r1 {
                let rf = r as f64;
                let w = nwin.eval(math::pow(at * k / rf, t));
                if w == 0.0 {
                    continue;
                }
                let z = math::e(consts.phi_mod1(k, rf)) * (w * math::pow(k, t / 2.0) * math::pow(rf, -(t + 1.0) / 2.0));
                re.add(z.re);
                im.add(z.im);
                terms += 1;
            }
            let amp = kwin.eval(k) * f.fourier(k / nf);
            (lead * amp * Complex64::new(re.value(), im.value()), terms)
        });
        let mut q_ks = ks.clone();
        if u < 0 {
            q_ks.iter_mut().for_each(|k| *k = -*k);
        }
        Ok(Self {
            q,
            u,
            n: nw.n,
            ks: q_ks,
            coeffs: res.iter().map(|r| if u < 0 { r.0.conj() } else { r.0 }).collect(),
            terms: res.iter().map(|r| r.1).sum(),
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
}

/// One `(r, h)` summand of `E^BB` without the leading `c1 / N`:
/// `f^(mu/N) N_q(n) K_u(mu) mu^(Theta/2) phi_kk(mu, r)^(-1/2) r^(-(Theta+1)/2) e(c r (h-s)^(1/theta))`.
pub fn bb_term(consts: &BConstants, f: &TestFunction, nwin: &DyadicWindow, kwin: &DyadicWindow, n: u64, r: f64, h: f64, s: f64) -> Complex64 {
    let mu = consts.mu(r, h, s);
    let w = nwin.eval(consts.n_var(h, s)) * kwin.eval(mu);
    if w == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let t = consts.big_theta;
    let amp = f.fourier(mu / n as f64) * w * math::pow(mu, t / 2.0) / math::sqrt(consts.phi_kk(mu, r)) * math::pow(r, -(t + 1.0) / 2.0);
    math::e(consts.second_phase_mod1(r, h, s)) * amp
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BbValue {
    pub value: Complex64,
    /// `(r, h)` pairs skipped because `h <= s`.
    pub dropped: usize,
    pub terms: usize,
}

/// `E^BB_{q,u}(s)`: the direct `(r, h)` double sum after both transforms.
pub fn e_bb_eval(consts: &BConstants, f: &TestFunction, nw: &NWindows, kw: &KWindows, q: i64, u: i64, s: f64) -> Result<BbValue> {
    check_block(nw, consts, q, u)?;
    let nwin = nw.get(q)?;
    let kwin = kw.get(u.abs())?;
    let (xlo, xhi) = nwin.support;
    let (mlo, mhi) = kwin.support;
    let h0 = math::floor(s + consts.alpha * math::pow(xlo, consts.theta)) as i64 - 1;
    let h1 = math::ceil(s + consts.alpha * math::pow(xhi, consts.theta)) as i64 + 1;
    let mut re = KahanSum::new();
    let mut im = KahanSum::new();
    let (mut dropped, mut terms) = (0usize, 0usize);
    for h in h0..=h1 {
        let hf = h as f64;
        if hf <= s {
            dropped += 1;
            continue;
        }
        let unit = consts.mu(1.0, hf, s);
        let r0 = (math::floor(mlo / unit) as i64).max(1);
        let r1 = math::ceil(mhi / unit) as i64;
        for r in r0..=r1 {
            let z = bb_term(consts, f, nwin, kwin, nw.n, r as f64, hf, s);
            if z.re != 0.0 || z.im != 0.0 {
                re.add(z.re);
                im.add(z.im);
                terms += 1;
            }
        }
    }
    let v = Complex64::new(re.value(), im.value()) * (consts.c1 / nw.n as f64);
    Ok(BbValue { value: if u < 0 { v.conj() } else { v }, dropped, terms })
}

/// Grid maxima of the two transform residuals for one block.
#[derive(Debug, Clone, PartialEq)]
pub struct BResiduals {
    pub n: u64,
    pub q: i64,
    pub u: i64,
    pub nodes: usize,
    pub sup_e: f64,
    pub sup_e_minus_eb: f64,
    pub sup_eb_minus_ebb: f64,
    pub dropped: usize,
    /// `(s, |E - E^B|, |E^B - E^BB|)` on the grid.
    pub grid: Vec<(f64, f64, f64)>,
}

pub fn bprocess_residuals<E: Executor>(seq: &SequenceSpec, f: &TestFunction, n: u64, q: i64, u: i64, nodes: usize, exec: &E) -> Result<BResiduals> {
    let consts = BConstants::new(seq.alpha, seq.theta)?;
    let nw = NWindows::new(n)?;
    let kw = KWindows::new(n, DEFAULT_EPS)?;
    let e = EquBlock::new(seq, f, &nw, &kw, q, u, None, exec)?;
    let eb = EbBlock::new(&consts, f, &nw, &kw, q, u, exec)?;
    let rows = exec.map(nodes, |i| {
        let s = i as f64 / nodes as f64;
        let a = e.eval(s);
        let b = eb.eval(s);
        e_bb_eval(&consts, f, &nw, &kw, q, u, s).map(|c| (s, a.norm(), (a - b).norm(), (b - c.value).norm(), c.dropped))
    });
    let mut out = BResiduals { n, q, u, nodes, sup_e: 0.0, sup_e_minus_eb: 0.0, sup_eb_minus_ebb: 0.0, dropped: 0, grid: Vec::with_capacity(nodes) };
    for row in rows {
        let (s, a, d1, d2, dr) = row?;
        out.sup_e = out.sup_e.max(a);
        out.sup_e_minus_eb = out.sup_e_minus_eb.max(d1);
        out.sup_eb_minus_ebb = out.sup_eb_minus_ebb.max(d2);
        out.dropped += dr;
        out.grid.push((s, d1, d2));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_case_half() {
        let k = BConstants::new(1.0, 0.5).unwrap();
        assert!((k.big_theta - 2.0).abs() < 1e-15);
        assert!((k.beta - 0.25).abs() < 1e-15);
        assert!((k.c1 - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((k.c0 - 2.0).abs() < 1e-14);
        assert!((k.c + 1.0).abs() < 1e-14);
        assert!((k.phi(4.0, 1.0) - 4.0).abs() < 1e-13);
    }

    #[test]
    fn dd_phases_agree_with_plain_ones() {
        let k = BConstants::new(1.3, 0.3).unwrap();
        let p = k.phi(37.0, 3.0);
        assert!((k.phi_mod1(37.0, 3.0) - math::frac(p)).abs() < 1e-12);
        let v = k.c * 2.0 * math::pow(3.0 - 0.25, 1.0 / 0.3);
        assert!((k.second_phase_mod1(2.0, 3.0, 0.25) - math::frac(v)).abs() < 1e-11);
    }
}

//! m-point correlations, the counting function `S_N`, its moments, the
//! Poisson-dual form and the partition and zero-pattern decompositions.

use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::dd::Dd;
use crate::error::{bail, Result};
use crate::exec::{self, Executor};
use crate::fft::fft;
use crate::math::{self, binom};
use crate::partitions::{self, distinct_power_sum, Partition};
use crate::quad::{self, GaussLegendre};
use crate::seqcore::{phase_dd, PointSequence};
use crate::testfn::{CorrKernel, Kernel, Smoothness, TestFunction};

/// Result of a correlation run, ready to be serialized by a driver.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub m: usize,
    pub n: u64,
    pub value: f64,
    pub target: f64,
    pub abs_deviation: f64,
    pub seq: String,
    pub f: String,
    pub runtime_ms: f64,
}

impl CorrelationReport {
    pub fn new(m: usize, n: u64, value: f64, target: f64, seq: String, f: String) -> Self {
        Self { m, n, value, target, abs_deviation: (value - target).abs(), seq, f, runtime_ms: 0.0 }
    }
}

/// The first `n` points sorted on the circle.
#[derive(Debug, Clone)]
pub struct SortedPoints {
    pub xs: Vec<f64>,
    pub order: Vec<u64>,
}

impl SortedPoints {
    pub fn new<S: PointSequence, E: Executor>(seq: &S, n: u64, exec: &E) -> Self {
        let chunks = (n as usize).div_ceil(exec::CHUNK);
        let parts = exec.map(chunks, |c| {
            let lo = c * exec::CHUNK;
            let hi = ((c + 1) * exec::CHUNK).min(n as usize);
            (lo..hi).map(|i| seq.x(i as u64 + 1)).collect::<Vec<f64>>()
        });
        let xs: Vec<f64> = parts.into_iter().flatten().collect();
        let mut pairs: Vec<(f64, u64)> = xs.into_iter().zip(1..=n).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Self { xs: pairs.iter().map(|p| p.0).collect(), order: pairs.iter().map(|p| p.1).collect() }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Positions whose point lies within circular distance `< w` of `c`.
    pub fn near(&self, c: f64, w: f64, out: &mut Vec<usize>) {
        out.clear();
        let n = self.xs.len();
        if w >= 0.5 {
            out.extend(0..n);
            return;
        }
        let mut push_range = |lo: f64, hi: f64| {
            let a = self.xs.partition_point(|&x| x <= lo);
            let b = self.xs.partition_point(|&x| x < hi);
            out.extend(a..b);
        };
        let (lo, hi) = (c - w, c + w);
        if lo < 0.0 {
            push_range(lo + 1.0, 1.0);
            push_range(-1.0, hi);
        } else if hi > 1.0 {
            push_range(lo, 2.0);
            push_range(-1.0, hi - 1.0);
        } else {
            push_range(lo, hi);
        }
    }
}

fn check_common(m: usize, n: u64) -> Result<()> {
    if m < 1 {
        bail!(InvalidParameter, "m must be at least 1");
    }
    if n < 1 {
        bail!(InvalidParameter, "N must be at least 1");
    }
    Ok(())
}

/// `R^(m)(N, F) = (1/N) sum over distinct m-tuples of F(N||x1-x2||, .., N||x_{m-1}-x_m||)`.
///
/// Points are sorted once; only chains of neighbours within the kernel support
/// are visited.
pub fn rm_correlation<S, K, E>(seq: &S, kernel: &K, m: usize, n: u64, exec: &E) -> Result<f64>
where
    S: PointSequence,
    K: Kernel,
    E: Executor,
{
    if m < 2 {
        bail!(InvalidParameter, "m must be at least 2");
    }
    if n < m as u64 {
        bail!(InvalidParameter, "need N >= m");
    }
    if kernel.dim() != m - 1 {
        bail!(InvalidParameter, "kernel has dimension {} but m - 1 = {}", kernel.dim(), m - 1);
    }
    let j = kernel.coord_radius();
    if j >= n as f64 / 2.0 {
        bail!(InvalidParameter, "support radius {j} is not below N/2 = {}", n as f64 / 2.0);
    }
    let pts = SortedPoints::new(seq, n, exec);
    let nb = neighbours(&pts, j / n as f64, n as f64, exec);
    let total = exec::sum(exec, pts.len(), |p| {
        let mut chain = alloc::vec![p; m];
        let mut z = alloc::vec![0.0; m - 1];
        let mut acc = 0.0;
        chain_sum(&nb, kernel, &mut chain, &mut z, 1, &mut acc);
        acc
    });
    Ok(total / n as f64)
}

/// Neighbour lists in CSR form: for each sorted position, the other positions
/// within circular distance `< w`, with the distance scaled by `scale`.
struct Neighbours {
    start: Vec<usize>,
    pos: Vec<u32>,
    dist: Vec<f64>,
}

fn neighbours<E: Executor>(pts: &SortedPoints, w: f64, scale: f64, exec: &E) -> Neighbours {
    let n = pts.len();
    let chunks = n.div_ceil(exec::CHUNK);
    let parts = exec.map(chunks, |c| {
        let mut lists = Vec::new();
        for p in c * exec::CHUNK..((c + 1) * exec::CHUNK).min(n) {
            let mut l: Vec<(u32, f64)> = Vec::new();
            let x = pts.xs[p];
            for step in 1..n {
                let q = (p + step) % n;
                let mut a = pts.xs[q] - x;
                if q <= p {
                    a += 1.0;
                }
                if a >= w {
                    break;
                }
                l.push((q as u32, a * scale));
            }
            for step in 1..n {
                let q = (p + n - step) % n;
                let mut a = x - pts.xs[q];
                if q >= p {
                    a += 1.0;
                }
                if a >= w {
                    break;
                }
                l.push((q as u32, a * scale));
            }
            lists.push(l);
        }
        lists
    });
    let mut start = alloc::vec![0];
    let mut pos = Vec::new();
    let mut dist = Vec::new();
    for l in parts.into_iter().flatten() {
        for (q, d) in l {
            pos.push(q);
            dist.push(d);
        }
        start.push(pos.len());
    }
    Neighbours { start, pos, dist }
}

fn chain_sum<K: Kernel>(nb: &Neighbours, kernel: &K, chain: &mut [usize], z: &mut [f64], level: usize, acc: &mut f64) {
    let m = chain.len();
    let prev = chain[level - 1];
    for e in nb.start[prev]..nb.start[prev + 1] {
        let q = nb.pos[e] as usize;
        if chain[..level].contains(&q) {
            continue;
        }
        chain[level] = q;
        z[level - 1] = nb.dist[e];
        if level + 1 == m {
            *acc += kernel.eval(z);
        } else {
            chain_sum(nb, kernel, chain, z, level + 1, acc);
        }
    }
    chain[level] = chain[0];
}

/// The counting function `S_N(s) = sum_n sum_k f(N (y(n) + k + s))`.
pub struct CountingField<'a> {
    pub f: &'a TestFunction,
    pub n: u64,
    pub pts: SortedPoints,
}

impl<'a> CountingField<'a> {
    pub fn new<S: PointSequence, E: Executor>(seq: &S, f: &'a TestFunction, n: u64, exec: &E) -> Self {
        Self { f, n, pts: SortedPoints::new(seq, n, exec) }
    }

    /// Per-point contributions `g_n(s) = sum_k f(N (x_n + k + s))` for the
    /// points where it can be nonzero.
    pub fn point_values(&self, s: f64, scratch: &mut Vec<usize>, out: &mut Vec<f64>) {
        out.clear();
        let nf = self.n as f64;
        let r = self.f.radius;
        self.pts.near(math::frac(-s), r / nf, scratch);
        let kmax = math::ceil(r / nf) as i64;
        for &p in scratch.iter() {
            let t = self.pts.xs[p] + s;
            let d = t - math::round(t);
            let mut v = 0.0;
            for k in -kmax..=kmax {
                v += self.f.eval(nf * (d + k as f64));
            }
            if v != 0.0 {
                out.push(v);
            }
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        let mut scratch = Vec::new();
        let mut vals = Vec::new();
        self.point_values(s, &mut scratch, &mut vals);
        vals.iter().sum()
    }

    /// `int_0^1 I(s) ds` for an integrand built from the point values at `s`.
    /// Splines are integrated exactly between knots; smooth functions use a
    /// doubling trapezoid rule.
    pub fn integrate<E, G>(&self, degree: usize, width: usize, exec: &E, integrand: G) -> Result<SIntegral>
    where
        E: Executor,
        G: Fn(&[f64], &mut [f64]) + Sync + Send,
    {
        match self.f.smoothness {
            Smoothness::C2Spline => self.integrate_knots(degree, width, exec, integrand),
            Smoothness::CinfBump => self.integrate_trapezoid(width, exec, integrand),
        }
    }

    fn integrate_knots<E, G>(&self, degree: usize, width: usize, exec: &E, integrand: G) -> Result<SIntegral>
    where
        E: Executor,
        G: Fn(&[f64], &mut [f64]) + Sync + Send,
    {
        let nf = self.n as f64;
        let r = self.f.radius;
        let mut br: Vec<f64> = Vec::with_capacity(5 * self.pts.len() + 2);
        for &x in &self.pts.xs {
            for j in -2..=2 {
                br.push(math::frac(j as f64 * r / (2.0 * nf) - x));
            }
        }
        br.push(0.0);
        br.push(1.0);
        br.sort_by(f64::total_cmp);
        br.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        let gl = GaussLegendre::new((degree + 2) / 2);
        let pieces = br.len() - 1;
        let value = exec::sum_vec(exec, pieces, width, |i, out| {
            let (a, b) = (br[i], br[i + 1]);
            if b <= a {
                return;
            }
            let mut scratch = Vec::new();
            let mut vals = Vec::new();
            let mut tmp = alloc::vec![0.0; out.len()];
            let half = 0.5 * (b - a);
            for (x, w) in gl.nodes.iter().zip(&gl.weights) {
                let s = 0.5 * (a + b) + half * x;
                self.point_values(s, &mut scratch, &mut vals);
                tmp.iter_mut().for_each(|t| *t = 0.0);
                integrand(&vals, &mut tmp);
                for (o, t) in out.iter_mut().zip(&tmp) {
                    *o += w * half * t;
                }
            }
        });
        Ok(SIntegral { value, nodes: pieces * gl.nodes.len(), exact: true })
    }

    fn integrate_trapezoid<E, G>(&self, width: usize, exec: &E, integrand: G) -> Result<SIntegral>
    where
        E: Executor,
        G: Fn(&[f64], &mut [f64]) + Sync + Send,
    {
        let m0 = (16.0 * self.n as f64 * math::ceil(self.f.radius).max(1.0)) as usize;
        let m0 = m0.next_power_of_two();
        let r = quad::periodic_refine(m0, 1 << 26, 1e-12, width, |m, start, step| {
            let count = (m - start).div_ceil(step);
            exec::sum_vec(exec, count, width, |i, out| {
                let s = (start + i * step) as f64 / m as f64;
                let mut scratch = Vec::new();
                let mut vals = Vec::new();
                self.point_values(s, &mut scratch, &mut vals);
                integrand(&vals, out);
            })
        })?;
        Ok(SIntegral { value: r.value, nodes: r.nodes, exact: false })
    }
}

/// Output of [`CountingField::integrate`].
#[derive(Debug, Clone)]
pub struct SIntegral {
    pub value: Vec<f64>,
    pub nodes: usize,
    /// True when the rule is exact up to rounding (spline case).
    pub exact: bool,
}

/// `M^(m)(N) = int_0^1 S_N(s)^m ds`.
pub fn moment_m<S: PointSequence, E: Executor>(seq: &S, f: &TestFunction, m: usize, n: u64, exec: &E) -> Result<SIntegral> {
    check_common(m, n)?;
    let field = CountingField::new(seq, f, n, exec);
    field.integrate(3 * m, 1, exec, |vals, out| {
        let s: f64 = vals.iter().sum();
        out[0] = math::pow(s, m as f64);
    })
}

/// `M_P(N)`: the m-th moment restricted to P-distinct index tuples.
pub fn m_partition_restricted<S: PointSequence, E: Executor>(
    seq: &S,
    f: &TestFunction,
    p: &Partition,
    n: u64,
    exec: &E,
) -> Result<f64> {
    let all = m_partitions(seq, f, &[p.clone()], n, exec)?;
    Ok(all[0])
}

/// `M_P(N)` for each partition in `parts` (all of the same `m`), from one pass.
pub fn m_partitions<S: PointSequence, E: Executor>(
    seq: &S,
    f: &TestFunction,
    parts: &[Partition],
    n: u64,
    exec: &E,
) -> Result<Vec<f64>> {
    let m = parts.first().map(|p| p.m()).unwrap_or(1);
    check_common(m, n)?;
    if parts.iter().any(|p| p.m() != m) {
        bail!(InvalidParameter, "all partitions must have the same m");
    }
    let sizes: Vec<Vec<usize>> = parts.iter().map(|p| p.block_sizes()).collect();
    let field = CountingField::new(seq, f, n, exec);
    let r = field.integrate(3 * m, parts.len(), exec, |vals, out| {
        let mut pw = alloc::vec![0.0; m + 1];
        for &v in vals {
            let mut t = 1.0;
            for e in 0..=m {
                pw[e] += t;
                t *= v;
            }
        }
        for (o, s) in out.iter_mut().zip(&sizes) {
            *o = distinct_power_sum(s, &pw);
        }
    })?;
    Ok(r.value)
}

/// `(1/N) sum over all m-tuples and shifts of F(N (y(n_1) - y(n_2) + k_1), ..)`,
/// i.e. the completed correlation; equal to `M^(m)(N)`.
pub fn completed_correlation<S: PointSequence, E: Executor>(seq: &S, f: &TestFunction, m: usize, n: u64, exec: &E) -> Result<f64> {
    if m < 2 {
        bail!(InvalidParameter, "m must be at least 2");
    }
    check_common(m, n)?;
    let kern = CorrKernel::new(f, m)?;
    let pts = SortedPoints::new(seq, n, exec);
    let nf = n as f64;
    let w = 2.0 * f.radius;
    let kmax = math::ceil(w / nf) as i64 + 1;
    let total = exec::sum(exec, pts.len(), |p| {
        // Signed offsets N (x_q - x_p + k) inside the kernel support.
        let mut offs = Vec::new();
        let mut near = Vec::new();
        pts.near(pts.xs[p], (w / nf).min(0.5), &mut near);
        let near: Vec<usize> = if w / nf >= 0.5 { (0..pts.len()).collect() } else { near };
        for &q in &near {
            let base = pts.xs[q] - pts.xs[p];
            for k in -kmax..=kmax {
                let o = nf * (base + k as f64);
                if o.abs() < w {
                    offs.push(o);
                }
            }
        }
        let mut idx = alloc::vec![0usize; m - 1];
        let mut args = alloc::vec![0.0; m - 1];
        let mut acc = 0.0;
        if offs.is_empty() {
            return 0.0;
        }
        loop {
            for (a, &i) in args.iter_mut().zip(&idx) {
                *a = offs[i];
            }
            acc += kern.eval_offsets(&args);
            let mut d = 0;
            loop {
                idx[d] += 1;
                if idx[d] < offs.len() {
                    break;
                }
                idx[d] = 0;
                d += 1;
                if d == m - 1 {
                    return acc;
                }
            }
        }
    });
    Ok(total / nf)
}

/// Output of the dual (Fourier) route.
#[derive(Debug, Clone, Copy)]
pub struct DualResult {
    pub value: f64,
    /// Bound on `|f^(xi)|` past the cutoff.
    pub tail_bound: f64,
    pub k_cut: i64,
}

/// Largest |f^| allowed beyond the frequency cutoff.
pub const DUAL_TAIL: f64 = 1e-12;

/// The smallest `K` passing the truncation certificate.
pub fn default_k_cut(f: &TestFunction, n: u64) -> i64 {
    math::ceil(f.fourier_cutoff(DUAL_TAIL) * n as f64) as i64
}

/// `T(k) = sum_{n <= N} e(k y(n))` for `0 <= k <= kmax`.
pub fn weyl_sums<S: PointSequence, E: Executor>(seq: &S, n: u64, kmax: i64, exec: &E) -> Vec<Complex64> {
    let ys: Vec<Dd> = (1..=n).map(|i| seq.y(i)).collect();
    exec.map(kmax as usize + 1, |k| {
        let mut acc = Complex64::new(0.0, 0.0);
        for &y in &ys {
            acc += math::e(phase_dd(k as i64, y).value_mod1);
        }
        acc
    })
}

fn certify(f: &TestFunction, n: u64, k_cut: i64) -> Result<f64> {
    let tail = f.fourier_tail_bound((k_cut + 1) as f64 / n as f64);
    if tail >= DUAL_TAIL {
        bail!(Certificate, "|f^| may reach {tail:e} beyond K_cut = {k_cut}; raise K_cut");
    }
    Ok(tail)
}

/// `int_0^1 P(s)^j ds` for the trigonometric polynomial `P(s) = sum c_k e(ks)`,
/// `c_{-k} = conj(c_k)`, computed exactly by an FFT on more than `j K` nodes.
fn power_integral(c: &[Complex64], j: usize) -> f64 {
    let kmax = c.len() - 1;
    if j == 0 {
        return 1.0;
    }
    if j == 1 {
        return c[0].re;
    }
    if j == 2 {
        return c[0].norm_sqr() + 2.0 * c[1..].iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    let len = (j * kmax + 1).next_power_of_two();
    let mut buf = alloc::vec![Complex64::new(0.0, 0.0); len];
    buf[0] = c[0];
    for k in 1..=kmax {
        buf[k] = c[k];
        buf[len - k] = c[k].conj();
    }
    fft(&mut buf, true);
    let vals: Vec<f64> = buf.iter().map(|z| math::pow(z.re, j as f64)).collect();
    math::pairwise_sum(&vals) / len as f64
}

/// The m-th moment from its Poisson-dual form: frequencies restricted to
/// `|k_i| <= K_cut` and `sum k_i = 0`.
pub fn moment_dual<S: PointSequence, E: Executor>(seq: &S, f: &TestFunction, m: usize, n: u64, k_cut: i64, exec: &E) -> Result<DualResult> {
    check_common(m, n)?;
    let tail = certify(f, n, k_cut)?;
    let t = weyl_sums(seq, n, k_cut, exec);
    let nf = n as f64;
    let c: Vec<Complex64> = t.iter().enumerate().map(|(k, tk)| tk * (f.fourier(k as f64 / nf) / nf)).collect();
    Ok(DualResult { value: power_integral(&c, m), tail_bound: tail, k_cut })
}

/// `K_j(N)`: the part of the dual sum with exactly `j` nonzero frequencies.
pub fn k_j_sum<S: PointSequence, E: Executor>(seq: &S, f: &TestFunction, m: usize, j: usize, n: u64, k_cut: i64, exec: &E) -> Result<f64> {
    check_common(m, n)?;
    if j > m {
        bail!(InvalidParameter, "j = {j} exceeds m = {m}");
    }
    if j == 1 {
        bail!(InvalidParameter, "j = 1 is impossible: the s-integral forces the frequencies to sum to zero");
    }
    let ef = f.fourier(0.0);
    let weight = binom(m, j) * math::pow(ef, (m - j) as f64);
    if j == 0 {
        return Ok(weight);
    }
    certify(f, n, k_cut)?;
    let t = weyl_sums(seq, n, k_cut, exec);
    let nf = n as f64;
    let mut c: Vec<Complex64> = t.iter().enumerate().map(|(k, tk)| tk * (f.fourier(k as f64 / nf) / nf)).collect();
    c[0] = Complex64::new(0.0, 0.0);
    Ok(weight * power_integral(&c, j))
}

/// `K_j(N)` computed in space: `C(m,j) E(f)^(m-j) int (S_N - E(f))^j ds`.
pub fn k_j_sum_spatial<S: PointSequence, E: Executor>(seq: &S, f: &TestFunction, m: usize, j: usize, n: u64, exec: &E) -> Result<f64> {
    check_common(m, n)?;
    if j > m {
        bail!(InvalidParameter, "j = {j} exceeds m = {m}");
    }
    if j == 1 {
        bail!(InvalidParameter, "j = 1 is impossible: the s-integral forces the frequencies to sum to zero");
    }
    let ef = f.mean();
    let weight = binom(m, j) * math::pow(ef, (m - j) as f64);
    if j == 0 {
        return Ok(weight);
    }
    let field = CountingField::new(seq, f, n, exec);
    let r = field.integrate(3 * j, 1, exec, |vals, out| {
        let s: f64 = vals.iter().sum();
        out[0] = math::pow(s - ef, j as f64);
    })?;
    Ok(weight * r.value[0])
}

/// `sum over all partitions of [m] of prod E(f^|block|)`.
pub fn poissonian_target(f: &TestFunction, m: usize) -> Result<f64> {
    partitions::poissonian_target(f, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::seqcore::{Lattice, PointSet};
    use crate::testfn::ProductKernel;

    #[test]
    fn near_wraps_around() {
        let pts = SortedPoints { xs: alloc::vec![0.01, 0.3, 0.98], order: alloc::vec![1, 2, 3] };
        let mut out = Vec::new();
        pts.near(0.0, 0.05, &mut out);
        out.sort();
        assert_eq!(out, [0, 2]);
    }

    #[test]
    fn two_points_by_hand() {
        // N = 2 points at 0.1 and 0.35, f radius 1 so N * distance = 0.5 < 1.
        let seq = PointSet { points: alloc::vec![0.1, 0.35] };
        let f = TestFunction::bspline(1.0).unwrap();
        let v = completed_correlation(&seq, &f, 2, 2, &Sequential).unwrap();
        let k = CorrKernel::new(&f, 2).unwrap();
        let expect = (2.0 * k.eval_offsets(&[0.0]) + k.eval_offsets(&[0.5]) + k.eval_offsets(&[-0.5])) / 2.0;
        // the shifted copies at distance 2 - 0.5 = 1.5 also fall inside |w| < 2
        let extra = (k.eval_offsets(&[1.5]) + k.eval_offsets(&[-1.5])) / 2.0;
        assert!((v - expect - extra).abs() < 1e-14, "{v} vs {}", expect + extra);
    }

    #[test]
    fn lattice_pairs() {
        let n = 40;
        let f = TestFunction::bspline(3.0).unwrap();
        let k = ProductKernel { base: f.clone(), dim: 1 };
        let v = rm_correlation(&Lattice { n_total: n }, &k, 2, n, &Sequential).unwrap();
        let expect: f64 = (1..=3).map(|j| 2.0 * f.eval(j as f64)).sum();
        assert!((v - expect).abs() < 1e-12, "{v} vs {expect}");
    }
}

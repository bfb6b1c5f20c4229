//! Pluggable execution for embarrassingly parallel loops.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::math::{pairwise_sum, pairwise_sum_c, KahanSum};

/// Fixed chunk length used by every reduction in the crate.
pub const CHUNK: usize = 2048;

/// Maps an index range to values. Implementations may run `f` on any thread
/// and in any order but must return results in index order.
pub trait Executor: Sync {
    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;

    fn workers(&self) -> usize {
        1
    }
}

/// Runs on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..len).map(f).collect()
    }
}

/// Sum of `f(i)` for `i < len`. Chunks of [`CHUNK`] are summed with Neumaier
/// compensation, then chunk totals are summed pairwise, so the result does not
/// depend on the executor.
pub fn sum<E: Executor, F>(exec: &E, len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = len.div_ceil(CHUNK);
    let partial = exec.map(chunks, |c| {
        let mut k = KahanSum::new();
        for i in c * CHUNK..((c + 1) * CHUNK).min(len) {
            k.add(f(i));
        }
        k.value()
    });
    pairwise_sum(&partial)
}

/// Complex version of [`sum`].
pub fn sum_c<E: Executor, F>(exec: &E, len: usize, f: F) -> Complex64
where
    F: Fn(usize) -> Complex64 + Sync + Send,
{
    let chunks = len.div_ceil(CHUNK);
    let partial = exec.map(chunks, |c| {
        let mut re = KahanSum::new();
        let mut im = KahanSum::new();
        for i in c * CHUNK..((c + 1) * CHUNK).min(len) {
            let z = f(i);
            re.add(z.re);
            im.add(z.im);
        }
        Complex64::new(re.value(), im.value())
    });
    pairwise_sum_c(&partial)
}

/// Vector-valued sum: every `f(i)` writes into a buffer of `width` slots.
pub fn sum_vec<E: Executor, F>(exec: &E, len: usize, width: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    let chunks = len.div_ceil(CHUNK);
    let partial = exec.map(chunks, |c| {
        let mut acc = alloc::vec![KahanSum::new(); width];
        let mut buf = alloc::vec![0.0; width];
        for i in c * CHUNK..((c + 1) * CHUNK).min(len) {
            buf.iter_mut().for_each(|b| *b = 0.0);
            f(i, &mut buf);
            for (a, &b) in acc.iter_mut().zip(&buf) {
                a.add(b);
            }
        }
        acc.iter().map(|a| a.value()).collect::<Vec<f64>>()
    });
    (0..width)
        .map(|w| {
            let col: Vec<f64> = partial.iter().map(|p| p[w]).collect();
            pairwise_sum(&col)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Splits work across a fake pool in reverse order to make sure nothing
    /// depends on evaluation order.
    struct Reversed;
    impl Executor for Reversed {
        fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
        where
            T: Send,
            F: Fn(usize) -> T + Sync + Send,
        {
            let mut v: Vec<(usize, T)> = (0..len).rev().map(|i| (i, f(i))).collect();
            v.reverse();
            v.into_iter().map(|(_, t)| t).collect()
        }
        fn workers(&self) -> usize {
            4
        }
    }

    #[test]
    fn sums_are_executor_independent() {
        let f = |i: usize| 1.0 / (1.0 + i as f64).powi(2) * if i % 3 == 0 { -1.0 } else { 1.0 };
        let a = sum(&Sequential, 100_000, f);
        let b = sum(&Reversed, 100_000, f);
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

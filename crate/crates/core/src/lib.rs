//! Numerical kernels for m-point correlations of the sequence `alpha * n^theta mod 1`.
//!
//! The crate is `no_std` with `alloc`. Parallel work goes through the
//! [`exec::Executor`] trait; the default [`exec::Sequential`] runs everything on
//! the calling thread, and a std companion can plug in a thread pool. Chunk
//! boundaries never depend on the executor, so results are bit-identical for
//! any worker count.

#![no_std]
#![allow(clippy::needless_range_loop, clippy::too_many_arguments)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bprocess;
pub mod correlations;
pub mod dd;
pub mod error;
pub mod exec;
pub mod expsums;
pub mod fft;
pub mod jet;
pub mod linalg;
pub mod math;
pub mod oscillatory;
pub mod partitions;
pub mod quad;
pub mod seqcore;
pub mod stats;
pub mod testfn;

pub use error::{Error, Result};
pub use num_complex::Complex64;

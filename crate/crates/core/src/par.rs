//! Data-parallel helpers with a sequential fallback.
//!
//! Reductions are split into fixed-size chunks whose partial sums are
//! combined left to right, so the parallel and sequential paths produce
//! bit-identical results.

use num_complex::Complex64;

/// Fixed chunk length for reductions.
pub const CHUNK: usize = 64;

/// Execution strategy for the inner loops.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// Falls back to sequential when the `parallel` feature is disabled.
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

/// Order-preserving map over `0..n`.
pub fn map<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Deterministic sum of `f(i)` for `i` in `0..n`.
pub fn sum<F>(exec: Exec, n: usize, f: F) -> Complex64
where
    F: Fn(usize) -> Complex64 + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let partial = map(exec, chunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        (lo..hi).fold(Complex64::new(0.0, 0.0), |acc, i| acc + f(i))
    });
    partial.into_iter().fold(Complex64::new(0.0, 0.0), |acc, p| acc + p)
}

/// Deterministic real sum.
pub fn sum_real<F>(exec: Exec, n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    sum(exec, n, |i| Complex64::new(f(i), 0.0)).re
}

/// Returns the first index (in order) for which `f` yields `Some`.
pub fn find_first<T, F>(exec: Exec, n: usize, f: F) -> Option<T>
where
    T: Send,
    F: Fn(usize) -> Option<T> + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().find_map_first(f)
        }
        _ => (0..n).find_map(f),
    }
}

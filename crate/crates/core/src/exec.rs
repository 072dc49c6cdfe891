//! Data-parallel primitives over amplitude arrays.
//!
//! Every kernel in the crate goes through the helpers here so that the
//! parallel and sequential paths split work into the same fixed-size chunks.
//! Reductions sum per-chunk partials in chunk order, which keeps results
//! bit-identical regardless of the execution mode or the thread count.

use std::sync::atomic::{AtomicU8, Ordering};

use num_complex::Complex64;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Number of amplitudes processed per work item.
pub const CHUNK: usize = 1 << 12;

/// How kernels dispatch their chunked work.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    Parallel,
}

static MODE: AtomicU8 = AtomicU8::new(1);

/// Selects the execution mode for subsequent kernel calls.
///
/// Without the `parallel` feature this is a no-op and everything runs
/// sequentially.
pub fn set_mode(mode: ExecMode) {
    MODE.store(matches!(mode, ExecMode::Parallel) as u8, Ordering::Relaxed);
}

pub fn mode() -> ExecMode {
    if cfg!(feature = "parallel") && MODE.load(Ordering::Relaxed) == 1 {
        ExecMode::Parallel
    } else {
        ExecMode::Sequential
    }
}

/// Runs `f(chunk_index, chunk)` over `CHUNK`-sized pieces of `out`.
pub fn for_each_chunk_mut<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode() == ExecMode::Parallel && out.len() > CHUNK {
        out.par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| f(c, chunk));
        return;
    }
    for (c, chunk) in out.chunks_mut(CHUNK).enumerate() {
        f(c, chunk);
    }
}

/// Sums `f(range_start, range_len)` over consecutive chunks of `0..len`.
pub fn sum_chunks<F>(len: usize, f: F) -> Complex64
where
    F: Fn(usize, usize) -> Complex64 + Sync + Send,
{
    let n_chunks = len.div_ceil(CHUNK);
    let part = |c: usize| {
        let start = c * CHUNK;
        f(start, CHUNK.min(len - start))
    };
    #[cfg(feature = "parallel")]
    if mode() == ExecMode::Parallel && n_chunks > 1 {
        let partials: Vec<Complex64> = (0..n_chunks).into_par_iter().map(part).collect();
        return partials.into_iter().sum();
    }
    (0..n_chunks).map(part).sum()
}

/// Maps independent work items, preserving input order in the output.
pub fn map_items<I, T, F>(items: Vec<I>, f: F) -> Vec<T>
where
    I: Send,
    T: Send,
    F: Fn(I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode() == ExecMode::Parallel && items.len() > 1 {
        return items.into_par_iter().map(f).collect();
    }
    items.into_iter().map(f).collect()
}

/// Inner product ⟨a|b⟩ with the crate's deterministic chunked reduction.
pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    assert_eq!(a.len(), b.len());
    sum_chunks(a.len(), |s, n| {
        a[s..s + n]
            .iter()
            .zip(&b[s..s + n])
            .map(|(x, y)| x.conj() * y)
            .sum()
    })
}

pub fn norm_sqr(a: &[Complex64]) -> f64 {
    sum_chunks(a.len(), |s, n| {
        Complex64::new(a[s..s + n].iter().map(|x| x.norm_sqr()).sum(), 0.0)
    })
    .re
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reductions_match_across_modes() {
        let v: Vec<Complex64> = (0..3 * CHUNK + 17)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        set_mode(ExecMode::Sequential);
        let a = (dot(&v, &v), norm_sqr(&v));
        set_mode(ExecMode::Parallel);
        let b = (dot(&v, &v), norm_sqr(&v));
        assert_eq!(a.0.re.to_bits(), b.0.re.to_bits());
        assert_eq!(a.1.to_bits(), b.1.to_bits());
    }

    #[test]
    fn map_items_keeps_order() {
        let out = map_items((0..50).collect(), |i: usize| i * i);
        assert_eq!(out, (0..50).map(|i| i * i).collect::<Vec<_>>());
    }
}

//! Thin wrappers that run on rayon when the `parallel` feature is enabled and
//! fall back to plain iterators otherwise.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Applies `f(index, chunk)` to consecutive `chunk`-sized pieces of `data`.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(chunk)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return (0..n).into_par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    (0..n).map(f).collect()
}

/// Sums `len`-long accumulators produced by `f(&mut acc, i)` over `0..n`.
/// The reduction order is fixed by splitting `0..n` into `blocks` contiguous
/// blocks, so results do not depend on the thread count.
pub fn sum_into<F>(n: usize, len: usize, f: F) -> Vec<f64>
where
    F: Fn(&mut [f64], usize) + Sync + Send,
{
    const BLOCKS: usize = 64;
    let blocks = BLOCKS.min(n.max(1));
    let per = n.div_ceil(blocks);
    let partial = map_range(blocks, |b| {
        let mut acc = vec![0.0; len];
        for i in b * per..((b + 1) * per).min(n) {
            f(&mut acc, i);
        }
        acc
    });
    let mut total = vec![0.0; len];
    for p in partial {
        total.iter_mut().zip(p).for_each(|(t, x)| *t += x);
    }
    total
}

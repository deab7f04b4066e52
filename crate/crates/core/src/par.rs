//! Sequential/parallel switch for the data-parallel kernels.
//!
//! Callers split their work into a fixed number of chunks that does not
//! depend on the thread count, map each chunk, and merge the results in
//! index order. That keeps floating point reductions bit-stable.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluates `f(0..n)` and returns the results in index order.
#[cfg(feature = "parallel")]
pub(crate) fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Runs `f(chunk_index, chunk)` over consecutive `chunk`-sized pieces of `data`.
#[cfg(feature = "parallel")]
pub(crate) fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    data.par_chunks_mut(chunk.max(1))
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    F: Fn(usize, &mut [T]),
{
    data.chunks_mut(chunk.max(1))
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

/// Number of `chunk`-sized pieces covering `len` items.
pub(crate) fn chunk_count(len: usize, chunk: usize) -> usize {
    len.div_ceil(chunk.max(1))
}

/// Sums per-chunk partial scalars of a length-`len` range in fixed order.
pub(crate) fn chunked_sum<F>(len: usize, chunk: usize, f: F) -> f64
where
    F: Fn(std::ops::Range<usize>) -> f64 + Sync + Send,
{
    let n = chunk_count(len, chunk);
    map_collect(n, |c| {
        let start = c * chunk;
        f(start..(start + chunk).min(len))
    })
    .into_iter()
    .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_sum_matches_plain_sum() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let s = chunked_sum(xs.len(), 64, |r| xs[r].iter().sum());
        let direct: f64 = xs.chunks(64).map(|c| c.iter().sum::<f64>()).sum();
        assert_eq!(s, direct);
        assert_eq!(chunk_count(1000, 64), 16);
        assert_eq!(chunk_count(0, 64), 0);
    }

    #[test]
    fn chunks_cover_slice() {
        let mut v = vec![0usize; 37];
        for_each_chunk_mut(&mut v, 8, |i, c| c.iter_mut().for_each(|x| *x = i));
        assert_eq!(v[0], 0);
        assert_eq!(v[8], 1);
        assert_eq!(v[36], 4);
    }
}

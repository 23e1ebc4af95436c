//! Data-parallel helpers over grid points and trials.
//!
//! With the `parallel` feature (default) the loops run on the rayon pool;
//! without it they run sequentially. Every helper writes results in index
//! order, so output never depends on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Fill `data` chunk by chunk, `f(chunk_index, chunk)`.
pub fn fill_chunks<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if chunk == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(chunk)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// `(0..len).map(f).collect()` in index order.
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}

/// Sum in fixed sequential order (bit-stable across thread counts).
pub fn ordered_sum(values: &[f64]) -> f64 {
    values.iter().sum()
}

/// Number of worker threads currently available.
pub fn threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Install a global pool capped by `TELEHAM_THREADS`, if set.
///
/// Returns the cap that was applied. Calling this twice is harmless; the
/// second call leaves the existing pool in place.
pub fn configure_from_env() -> Option<usize> {
    let cap = std::env::var("TELEHAM_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)?;
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cap)
            .build_global();
    }
    Some(cap)
}

/// Run `f` with the point loops forced onto a single thread.
///
/// Used by the benches to compare against the default pool.
pub fn sequential<R: Send, F: FnOnce() -> R + Send>(f: F) -> R {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .expect("single-thread pool")
            .install(f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        f()
    }
}

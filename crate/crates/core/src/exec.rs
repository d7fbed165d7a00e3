//! Execution policy for the data-parallel inner loops.
//!
//! Every helper here returns results in index order, and reductions use a
//! fixed chunk size, so outputs are bitwise identical for a given policy no
//! matter how many worker threads rayon happens to use.

use std::sync::atomic::{AtomicBool, Ordering};

/// Fixed chunk length for deterministic reductions.
pub const CHUNK: usize = 256;

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Sequential,
    Parallel,
}

/// Select the process-wide policy. Without the `parallel` feature this is a
/// no-op and everything runs sequentially.
pub fn set_policy(policy: Policy) {
    FORCE_SEQUENTIAL.store(policy == Policy::Sequential, Ordering::SeqCst);
}

pub fn policy() -> Policy {
    if cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::SeqCst) {
        Policy::Parallel
    } else {
        Policy::Sequential
    }
}

/// Number of worker threads the current policy will use.
pub fn threads() -> usize {
    match policy() {
        Policy::Sequential => 1,
        #[cfg(feature = "parallel")]
        Policy::Parallel => rayon::current_num_threads(),
        #[cfg(not(feature = "parallel"))]
        Policy::Parallel => 1,
    }
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if policy() == Policy::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Apply `f(index, item)` to every element, possibly in parallel.
pub fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if policy() == Policy::Parallel {
        use rayon::prelude::*;
        items.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
        return;
    }
    items.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
}

/// Deterministic sum of `f(i)` for `i in 0..n`: partial sums over fixed
/// chunks, then a sequential sum of the partials.
pub fn sum_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let n_chunks = n.div_ceil(CHUNK);
    let partials = map_indexed(n_chunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        (lo..hi).map(&f).sum::<f64>()
    });
    partials.into_iter().sum()
}

/// Deterministic maximum of `f(i)`.
pub fn max_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_indexed(n, f).into_iter().fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_is_policy_independent() {
        let f = |i: usize| 1.0 / (1.0 + i as f64).powf(1.3);
        set_policy(Policy::Sequential);
        let a = sum_indexed(10_000, f);
        set_policy(Policy::Parallel);
        let b = sum_indexed(10_000, f);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn map_keeps_order() {
        let v = map_indexed(1000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }
}

//! Data-parallel execution of independent trials.
//!
//! With the `parallel` feature (default) trial loops fan out over a rayon
//! pool; without it the same API runs sequentially. Results are collected in
//! index order either way, so output never depends on scheduling. The
//! `parallel_trials` bench compares the two paths.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..count`, in parallel when the `parallel` feature is on.
///
/// `f` must derive any randomness from its index (see [`crate::rng`]) for
/// results to be independent of the execution schedule.
pub fn run_trials<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

/// Sequential reference path, available regardless of features.
pub fn run_trials_seq<T, F>(count: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(f).collect()
}

/// Chunked map-reduce over `0..count` with a deterministic reduction order.
///
/// Items are processed in fixed chunks; per-chunk accumulators are combined
/// sequentially in chunk order, so floating-point results are identical to a
/// fully sequential chunked run.
pub fn run_chunked<A, F, G>(count: usize, chunk: usize, map: F, combine: G) -> Option<A>
where
    A: Send,
    F: Fn(std::ops::Range<usize>) -> A + Sync + Send,
    G: Fn(A, A) -> A,
{
    assert!(chunk > 0);
    let ranges: Vec<std::ops::Range<usize>> = (0..count)
        .step_by(chunk)
        .map(|s| s..(s + chunk).min(count))
        .collect();
    let parts: Vec<A> = {
        #[cfg(feature = "parallel")]
        {
            ranges.into_par_iter().map(map).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            ranges.into_iter().map(map).collect()
        }
    };
    parts.into_iter().reduce(combine)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let f = |i: usize| (i as f64).sin();
        assert_eq!(run_trials(100, f), run_trials_seq(100, f));
    }

    #[test]
    fn chunked_reduction_is_order_stable() {
        let map = |r: std::ops::Range<usize>| r.map(|i| 1.0 / (i + 1) as f64).sum::<f64>();
        let a = run_chunked(1000, 64, map, |x, y| x + y).unwrap();
        let b = run_chunked(1000, 64, map, |x, y| x + y).unwrap();
        assert_eq!(a, b);
    }
}

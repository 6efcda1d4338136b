//! Runner for independent simulation jobs (seeds, tasks, configurations).
//!
//! With the `parallel` feature (default) jobs are spread over the rayon
//! pool; without it they run in order on the calling thread. Results are
//! returned in input order either way, and every job derives its seed from
//! its index, so both paths produce identical output.

use crate::dsp::derive_seed;

/// Seed for job `index` under a base seed.
pub fn job_seed(base: u64, index: usize) -> u64 {
    derive_seed(base, 0x4A0B_0000 + index as u64)
}

pub fn map_jobs_sequential<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(usize, &T) -> R,
{
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

#[cfg(feature = "parallel")]
pub fn map_jobs_parallel<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

/// Parallel when built with `parallel`, sequential otherwise.
pub fn map_jobs<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_jobs_parallel(items, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_jobs_sequential(items, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let items: Vec<u64> = (0..64).collect();
        let out = map_jobs(&items, |i, &v| (i as u64) * 1000 + v);
        assert_eq!(out, items.iter().map(|v| v * 1001).collect::<Vec<_>>());
    }

    #[test]
    fn both_runners_agree() {
        let items: Vec<usize> = (0..20).collect();
        let f = |i: usize, _: &usize| job_seed(7, i);
        assert_eq!(map_jobs(&items, f), map_jobs_sequential(&items, f));
    }
}

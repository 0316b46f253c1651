use std::sync::Arc;

use rayon::prelude::*;
use rayon::ThreadPool;

use super::Scalar;

/// Execution policy for tensor kernels.
///
/// `Sequential` is the deterministic default: every reduction runs in a
/// fixed order, so repeated runs are bitwise identical. `Parallel` spreads
/// row blocks over a thread pool; reductions are split into blocks, which
/// perturbs rounding at the 1e-6 relative level.
#[derive(Clone, Default)]
pub enum Exec {
    #[default]
    Sequential,
    Parallel(Arc<ThreadPool>),
}

impl std::fmt::Debug for Exec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Exec::Sequential => write!(f, "Sequential"),
            Exec::Parallel(p) => write!(f, "Parallel({} threads)", p.current_num_threads()),
        }
    }
}

const ROWS_PER_TASK: usize = 32;

impl Exec {
    /// Parallel policy with `threads` workers (0 lets rayon decide).
    pub fn parallel(threads: usize) -> Self {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        Exec::Parallel(Arc::new(pool))
    }

    /// Parallel policy capped by the `CGNN_THREADS` environment variable.
    pub fn fast_from_env() -> Self {
        let threads = std::env::var("CGNN_THREADS")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .unwrap_or(0);
        Self::parallel(threads)
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, Exec::Sequential)
    }

    /// Runs `f(first_row, rows)` over `data` split into whole rows of `row_len`.
    pub(crate) fn for_row_chunks<T, F>(&self, data: &mut [T], row_len: usize, f: F)
    where
        T: Scalar,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        match self {
            Exec::Sequential => f(0, data),
            Exec::Parallel(pool) => {
                let chunk = (row_len * ROWS_PER_TASK).max(1);
                pool.install(|| {
                    data.par_chunks_mut(chunk)
                        .enumerate()
                        .for_each(|(i, c)| f(i * ROWS_PER_TASK, c));
                });
            }
        }
    }

    /// Sums `f(lo, hi)` partial results over `0..n` row ranges.
    pub(crate) fn reduce_ranges<T, F>(&self, n: usize, out_len: usize, f: F) -> Vec<T>
    where
        T: Scalar,
        F: Fn(usize, usize) -> Vec<T> + Sync + Send,
    {
        match self {
            Exec::Sequential => f(0, n),
            Exec::Parallel(pool) => {
                let blocks: Vec<(usize, usize)> = (0..n)
                    .step_by(ROWS_PER_TASK * 4)
                    .map(|lo| (lo, (lo + ROWS_PER_TASK * 4).min(n)))
                    .collect();
                let partials: Vec<Vec<T>> =
                    pool.install(|| blocks.par_iter().map(|&(lo, hi)| f(lo, hi)).collect());
                let mut out = vec![T::zero(); out_len];
                for p in partials {
                    for (o, v) in out.iter_mut().zip(p) {
                        *o += v;
                    }
                }
                out
            }
        }
    }
}

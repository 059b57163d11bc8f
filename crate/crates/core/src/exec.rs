//! Data-parallel mapping over independent solves.
//!
//! With the `parallel` feature (default) [`Execution::Parallel`] runs on the
//! rayon pool; without it every mode runs sequentially. Results always come
//! back in index order, so outputs do not depend on the mode.

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..n).map(f).collect(),
            Execution::Parallel => par_map(n, f),
        }
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Caps the global worker pool. `0` keeps the automatic size. Returns false
/// if the pool was already initialised or parallelism is compiled out.
pub fn configure_threads(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        if threads == 0 {
            return true;
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        false
    }
}
